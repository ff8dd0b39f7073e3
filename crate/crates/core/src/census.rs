//! Grid searches over market parameters with a sweep of group 2's
//! correlation, flagging combinations whose cutoffs are not monotone.

use crate::copula::{Copula, CopulaFamily};
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::metrics::{
    detect_nonmonotone_cutoffs, increasing_runs, metric_sweep_with, Increase, SweepRow, MONOTONE_SLACK,
};
use crate::scores::{GroupScoreModel, Marginal, PreferenceList};
use crate::solver::{MarketSpec, SolverOptions};
use std::sync::Arc;

/// One point of the parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusCombo {
    pub id: usize,
    pub gamma: Vec<f64>,
    pub total_capacity: f64,
    /// Capacity shares, summing to 1.
    pub split: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta1: f64,
    pub beta_label: String,
    pub beta: Vec<f64>,
}

/// Rank metric watched for decreases along each sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub group: usize,
    pub pref: PreferenceList,
    pub k: usize,
}

#[derive(Debug, Clone)]
pub struct CensusTemplate {
    pub colleges: usize,
    pub combos: Vec<CensusCombo>,
    pub theta2_grid: Vec<f64>,
    pub monitor: Monitor,
}

/// `0, 0.01, ..., 0.99`.
pub fn default_theta2_grid() -> Vec<f64> {
    (0..100).map(|k| k as f64 / 100.0).collect()
}

fn uniform_beta(m: usize) -> Vec<f64> {
    let n: usize = (1..=m).product();
    vec![1.0 / n as f64; n]
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

impl CensusTemplate {
    /// Full cartesian product, ordered with the group proportions varying
    /// slowest and the preference vector fastest.
    pub fn product(
        colleges: usize,
        gammas: &[[f64; 2]],
        totals: &[f64],
        splits: &[Vec<f64>],
        theta1s: &[f64],
        betas: &[(String, Vec<f64>)],
        monitor: Monitor,
    ) -> Self {
        let mut combos = Vec::new();
        for g in gammas {
            for &total in totals {
                for split in splits {
                    let split = normalized(split);
                    for &theta1 in theta1s {
                        for (label, beta) in betas {
                            combos.push(CensusCombo {
                                id: combos.len(),
                                gamma: g.to_vec(),
                                total_capacity: total,
                                alpha: split.iter().map(|s| s * total).collect(),
                                split: split.clone(),
                                theta1,
                                beta_label: label.clone(),
                                beta: beta.clone(),
                            });
                        }
                    }
                }
            }
        }
        CensusTemplate {
            colleges,
            combos,
            theta2_grid: default_theta2_grid(),
            monitor,
        }
    }

    /// The 324-point three-college grid.
    pub fn three_college() -> Self {
        Self::product(
            3,
            &[[0.1, 0.9], [0.3, 0.7], [0.5, 0.5]],
            &[1.0 / 3.0, 0.5, 2.0 / 3.0],
            &[vec![10.0, 10.0, 80.0], vec![1.0, 1.0, 1.0], vec![10.0, 45.0, 45.0]],
            &[0.0, 1.0 / 3.0, 2.0 / 3.0, 0.99],
            &[
                ("I".into(), uniform_beta(3)),
                (
                    "II".into(),
                    vec![1.0 / 32.0, 1.0 / 8.0, 1.0 / 32.0, 0.25, 1.0 / 16.0, 0.5],
                ),
                (
                    "III".into(),
                    vec![0.5, 1.0 / 16.0, 0.25, 1.0 / 32.0, 1.0 / 8.0, 1.0 / 32.0],
                ),
            ],
            Monitor {
                group: 0,
                pref: PreferenceList::from_digits("312").expect("valid list"),
                k: 2,
            },
        )
    }

    /// The 36-point four-college grid under uniform preferences.
    pub fn four_college() -> Self {
        Self::product(
            4,
            &[[0.1, 0.9], [0.5, 0.5]],
            &[1.0 / 3.0, 2.0 / 3.0, 0.9],
            &[vec![10.0, 20.0, 30.0, 40.0], vec![6.25, 12.5, 18.75, 62.5]],
            &[0.0, 0.5, 0.99],
            &[("I".into(), uniform_beta(4))],
            Monitor {
                group: 0,
                pref: PreferenceList::from_digits("4321").expect("valid list"),
                k: 2,
            },
        )
    }

    /// Market of one combination: uniform marginals, equicorrelated
    /// gaussian copulas, group 2 at the first grid node.
    pub fn market(&self, combo: &CensusCombo) -> Result<MarketSpec> {
        let m = self.colleges;
        let cop: Arc<dyn Copula> = Arc::new(CopulaFamily::gaussian(m));
        let theta2 = self.theta2_grid.first().copied().unwrap_or(0.0);
        let groups = [combo.theta1, theta2]
            .iter()
            .map(|&t| GroupScoreModel::new(vec![Marginal::unit_uniform(); m], cop.clone(), t))
            .collect::<Result<Vec<_>>>()?;
        MarketSpec::new(
            combo.alpha.clone(),
            combo.gamma.clone(),
            vec![combo.beta.clone(); 2],
            groups,
        )
    }
}

#[derive(Debug, Clone)]
pub struct ComboOutcome {
    pub rows: Vec<SweepRow>,
    pub increases: Vec<Increase>,
    /// Runs of grid intervals over which the monitored rank metric fell.
    pub monitored_decreases: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct ComboResult {
    pub combo: CensusCombo,
    pub outcome: std::result::Result<ComboOutcome, Error>,
}

impl ComboResult {
    pub fn is_nonmonotone(&self) -> bool {
        matches!(&self.outcome, Ok(o) if !o.increases.is_empty())
    }

    pub fn monitored_decreases(&self) -> bool {
        matches!(&self.outcome, Ok(o) if !o.monitored_decreases.is_empty())
    }
}

#[derive(Debug, Clone)]
pub struct CensusReport {
    pub colleges: usize,
    pub theta2_grid: Vec<f64>,
    pub monitor: Monitor,
    pub results: Vec<ComboResult>,
}

impl CensusReport {
    pub fn nonmonotone_count(&self) -> usize {
        self.results.iter().filter(|r| r.is_nonmonotone()).count()
    }

    /// Non-monotone combinations whose monitored metric also decreases.
    pub fn monitored_decrease_count(&self) -> usize {
        self.results
            .iter()
            .filter(|r| r.is_nonmonotone() && r.monitored_decreases())
            .count()
    }

    pub fn failure_count(&self) -> usize {
        self.results.iter().filter(|r| r.outcome.is_err()).count()
    }
}

/// Sweep every combination; solver failures are recorded, not raised.
pub fn run_census(template: &CensusTemplate, opts: &SolverOptions, mode: ExecMode) -> CensusReport {
    let results = exec::map(mode, &template.combos, |combo| ComboResult {
        combo: combo.clone(),
        outcome: run_combo(template, combo, opts),
    });
    CensusReport {
        colleges: template.colleges,
        theta2_grid: template.theta2_grid.clone(),
        monitor: template.monitor.clone(),
        results,
    }
}

pub fn run_combo(template: &CensusTemplate, combo: &CensusCombo, opts: &SolverOptions) -> Result<ComboOutcome> {
    let spec = template.market(combo)?;
    let rows = metric_sweep_with(&spec, 1, &template.theta2_grid, opts)?;
    let increases = detect_nonmonotone_cutoffs(&rows);
    let mon = &template.monitor;
    let s = spec
        .pref_lists()
        .iter()
        .position(|p| *p == mon.pref)
        .ok_or_else(|| Error::input(format!("monitored list {} not in market", mon.pref)))?;
    let negated: Vec<f64> = rows.iter().map(|r| -r.metrics.rank(mon.group, s, mon.k)).collect();
    let monitored_decreases = increasing_runs(&negated, MONOTONE_SLACK)
        .into_iter()
        .map(|(a, b, d)| (rows[a].theta, rows[b].theta, d))
        .collect();
    Ok(ComboOutcome {
        rows,
        increases,
        monitored_decreases,
    })
}
