//! Welfare and inequality metrics over solved cutoffs.

use crate::error::{Error, Result};
use crate::solver::{solve_market_clearing_with, CutoffVector, MarketSpec, SolverOptions};
use serde::{Deserialize, Serialize};

/// Forward differences above this count as increases.
pub const MONOTONE_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `ranks[j][s][k - 1]`: share of group `j` with the `s`-th preference
    /// list matched within its top `k`.
    pub ranks: Vec<Vec<Vec<f64>>>,
    /// Unmatched share per group.
    pub unmatched: Vec<f64>,
    /// Mass of students receiving their first choice.
    pub efficiency: f64,
    /// `inequality[j][l] = |unmatched[j] - unmatched[l]|`.
    pub inequality: Vec<Vec<f64>>,
}

impl MetricsReport {
    pub fn rank(&self, group: usize, pref: usize, k: usize) -> f64 {
        self.ranks[group][pref][k - 1]
    }
}

pub fn compute_metrics(spec: &MarketSpec, cutoffs: &CutoffVector) -> Result<MetricsReport> {
    let m = spec.colleges();
    let all = (1usize << m) - 1;
    let tables = spec.below_tables(&cutoffs.p)?;
    let prefs = spec.pref_lists();
    let ranks: Vec<Vec<Vec<f64>>> = tables
        .iter()
        .map(|t| {
            prefs
                .iter()
                .map(|s| {
                    // clamp keeps R non-decreasing in k under rounding
                    let mut prev: f64 = 0.0;
                    (1..=m)
                        .map(|k| {
                            prev = prev.max((1.0 - t[s.prefix_mask(k)]).clamp(0.0, 1.0));
                            prev
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let unmatched: Vec<f64> = tables.iter().map(|t| t[all]).collect();
    let efficiency = spec
        .gamma()
        .iter()
        .zip(spec.beta())
        .zip(&ranks)
        .map(|((g, b), r)| g * b.iter().zip(r).map(|(w, rs)| w * rs[0]).sum::<f64>())
        .sum();
    let inequality = unmatched
        .iter()
        .map(|a| unmatched.iter().map(|b| (a - b).abs()).collect())
        .collect();
    Ok(MetricsReport {
        ranks,
        unmatched,
        efficiency,
        inequality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: f64,
    pub cutoffs: CutoffVector,
    pub metrics: MetricsReport,
}

pub fn metric_sweep(spec: &MarketSpec, j: usize, grid: &[f64]) -> Result<Vec<SweepRow>> {
    metric_sweep_with(spec, j, grid, &SolverOptions::default())
}

/// Warm-started sweep over group `j`'s parameter.
pub fn metric_sweep_with(spec: &MarketSpec, j: usize, grid: &[f64], opts: &SolverOptions) -> Result<Vec<SweepRow>> {
    let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = spec.with_theta(j, t)?;
        let cutoffs =
            solve_market_clearing_with(&s, opts, rows.last().map(|r| &r.cutoffs)).map_err(|e| e.at_theta(t))?;
        let metrics = compute_metrics(&s, &cutoffs)?;
        rows.push(SweepRow {
            theta: t,
            cutoffs,
            metrics,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub theta_j: f64,
    pub theta_l: f64,
    pub cutoffs: CutoffVector,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoContour {
    pub points: Vec<ContourPoint>,
    /// Grid nodes of `theta_j` at which no `theta_l` attains the target.
    pub gaps: Vec<f64>,
}

/// Level set `E(theta_j, theta_l) = target`, searching `theta_l` over the
/// span of `grid`.
pub fn trace_iso_efficiency(
    spec: &MarketSpec,
    groups: (usize, usize),
    target: f64,
    grid: &[f64],
) -> Result<IsoContour> {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    trace_iso_efficiency_within(spec, groups, target, grid, (lo, hi), &SolverOptions::default())
}

pub fn trace_iso_efficiency_within(
    spec: &MarketSpec,
    (j, l): (usize, usize),
    target: f64,
    grid: &[f64],
    (lo, hi): (f64, f64),
    opts: &SolverOptions,
) -> Result<IsoContour> {
    if j == l || l >= spec.group_count() || grid.is_empty() {
        return Err(Error::input("contour needs two distinct groups and a non-empty grid"));
    }
    let mut points = Vec::new();
    let mut gaps = Vec::new();
    let (mut e_min, mut e_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &tj in grid {
        let base = spec.with_theta(j, tj)?;
        let eval = |tl: f64, warm: Option<&CutoffVector>| -> Result<(CutoffVector, MetricsReport)> {
            let s = base.with_theta(l, tl)?;
            let cv = solve_market_clearing_with(&s, opts, warm).map_err(|e| e.at_theta(tl))?;
            let mr = compute_metrics(&s, &cv)?;
            Ok((cv, mr))
        };
        let (cl, ml) = eval(lo, None)?;
        let (ch, mh) = eval(hi, Some(&cl))?;
        e_min = e_min.min(ml.efficiency);
        e_max = e_max.max(mh.efficiency);
        if !(ml.efficiency - 1e-6 <= target && target <= mh.efficiency + 1e-6) {
            gaps.push(tj);
            continue;
        }
        let (mut a, mut b) = (lo, hi);
        let mut best = if (ml.efficiency - target).abs() <= (mh.efficiency - target).abs() {
            (lo, cl, ml)
        } else {
            (hi, ch, mh)
        };
        for _ in 0..100 {
            if (best.2.efficiency - target).abs() <= 1e-8 || b - a <= 1e-13 {
                break;
            }
            let c = 0.5 * (a + b);
            let (cv, mr) = eval(c, Some(&best.1))?;
            if mr.efficiency < target {
                a = c;
            } else {
                b = c;
            }
            best = (c, cv, mr);
        }
        points.push(ContourPoint {
            theta_j: tj,
            theta_l: best.0,
            cutoffs: best.1,
            metrics: best.2,
        });
    }
    if points.is_empty() {
        return Err(Error::Domain {
            theta: target,
            domain: format!("attainable efficiency [{e_min}, {e_max}]"),
        });
    }
    Ok(IsoContour { points, gaps })
}

/// A maximal run of grid intervals over which a cutoff increased.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Increase {
    pub college: usize,
    pub theta_from: f64,
    pub theta_to: f64,
    pub max_increment: f64,
}

/// Runs of consecutive forward differences above `slack`, as
/// `(start index, end index, max increment)`.
pub fn increasing_runs(values: &[f64], slack: f64) -> Vec<(usize, usize, f64)> {
    let mut out: Vec<(usize, usize, f64)> = Vec::new();
    for k in 1..values.len() {
        let inc = values[k] - values[k - 1];
        if inc > slack {
            match out.last_mut() {
                Some(run) if run.1 == k - 1 => {
                    run.1 = k;
                    run.2 = run.2.max(inc);
                }
                _ => out.push((k - 1, k, inc)),
            }
        }
    }
    out
}

pub fn detect_nonmonotone_cutoffs(sweep: &[SweepRow]) -> Vec<Increase> {
    let thetas: Vec<f64> = sweep.iter().map(|r| r.theta).collect();
    let cutoffs: Vec<&CutoffVector> = sweep.iter().map(|r| &r.cutoffs).collect();
    detect_nonmonotone(&thetas, &cutoffs)
}

pub fn detect_nonmonotone(thetas: &[f64], cutoffs: &[&CutoffVector]) -> Vec<Increase> {
    let m = cutoffs.first().map_or(0, |c| c.p.len());
    (0..m)
        .flat_map(|i| {
            let series: Vec<f64> = cutoffs.iter().map(|c| c.p[i]).collect();
            increasing_runs(&series, MONOTONE_SLACK)
                .into_iter()
                .map(move |(a, b, inc)| Increase {
                    college: i,
                    theta_from: thetas[a],
                    theta_to: thetas[b],
                    max_increment: inc,
                })
        })
        .collect()
}
