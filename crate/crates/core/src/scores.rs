//! Group-level joint score distributions: marginals composed with a copula.

use crate::copula::Copula;
use crate::error::{Error, Result};
use crate::numeric::{norm_cdf, norm_quantile};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Continuous, strictly increasing marginal score distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Marginal {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    /// Linear interpolation through `(xs[k], ps[k])` with `ps` running
    /// from 0 to 1.
    PiecewiseLinear {
        xs: Vec<f64>,
        ps: Vec<f64>,
    },
}

impl Marginal {
    pub fn unit_uniform() -> Self {
        Marginal::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn standard_normal() -> Self {
        Marginal::Gaussian {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = Marginal::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        let m = Marginal::Gaussian { mean, variance };
        m.validate()?;
        Ok(m)
    }

    pub fn piecewise_linear(xs: Vec<f64>, ps: Vec<f64>) -> Result<Self> {
        let m = Marginal::PiecewiseLinear { xs, ps };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Marginal::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::spec(format!("uniform marginal needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            Marginal::Gaussian { mean, variance } => {
                if !(mean.is_finite() && variance.is_finite() && *variance > 0.0) {
                    return Err(Error::spec("gaussian marginal needs finite mean and positive variance"));
                }
            }
            Marginal::PiecewiseLinear { xs, ps } => {
                if xs.len() != ps.len() || xs.len() < 2 {
                    return Err(Error::spec("piecewise-linear cdf needs matching tables of length >= 2"));
                }
                if ps[0] != 0.0 || ps[ps.len() - 1] != 1.0 {
                    return Err(Error::spec("piecewise-linear cdf must run from 0 to 1"));
                }
                let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1] && w[1].is_finite());
                if !increasing(xs) || !increasing(ps) {
                    return Err(Error::spec("piecewise-linear cdf must be strictly increasing"));
                }
            }
        }
        Ok(())
    }

    /// `F(x)`, clamped to 0/1 outside the support.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Gaussian { mean, variance } => norm_cdf((x - mean) / variance.sqrt()),
            Marginal::PiecewiseLinear { xs, ps } => {
                if x <= xs[0] {
                    return 0.0;
                }
                if x >= xs[xs.len() - 1] {
                    return 1.0;
                }
                let k = xs.partition_point(|&v| v <= x);
                let (x0, x1, p0, p1) = (xs[k - 1], xs[k], ps[k - 1], ps[k]);
                p0 + (p1 - p0) * (x - x0) / (x1 - x0)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            Marginal::Uniform { lo, hi } => lo + p * (hi - lo),
            Marginal::Gaussian { mean, variance } => mean + variance.sqrt() * norm_quantile(p),
            Marginal::PiecewiseLinear { xs, ps } => {
                if p <= 0.0 {
                    return xs[0];
                }
                if p >= 1.0 {
                    return xs[xs.len() - 1];
                }
                let k = ps.partition_point(|&v| v <= p);
                let (x0, x1, p0, p1) = (xs[k - 1], xs[k], ps[k - 1], ps[k]);
                x0 + (x1 - x0) * (p - p0) / (p1 - p0)
            }
        }
    }

    /// Lower support bound (possibly `-inf`).
    pub fn lower(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, .. } => *lo,
            Marginal::Gaussian { .. } => f64::NEG_INFINITY,
            Marginal::PiecewiseLinear { xs, .. } => xs[0],
        }
    }

    /// Upper support bound (possibly `+inf`).
    pub fn upper(&self) -> f64 {
        match self {
            Marginal::Uniform { hi, .. } => *hi,
            Marginal::Gaussian { .. } => f64::INFINITY,
            Marginal::PiecewiseLinear { xs, .. } => xs[xs.len() - 1],
        }
    }
}

/// A strict preference order over colleges, stored zero-based;
/// `order[0]` is the favorite.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PreferenceList {
    order: Vec<usize>,
}

impl PreferenceList {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        let mut seen = vec![false; m];
        for &c in &order {
            if c >= m || seen[c] {
                return Err(Error::spec(format!("{order:?} is not a permutation of 0..{m}")));
            }
            seen[c] = true;
        }
        Ok(PreferenceList { order })
    }

    /// Parses one-based digits, e.g. `"312"`.
    pub fn from_digits(s: &str) -> Result<Self> {
        let order = s
            .chars()
            .map(|c| {
                c.to_digit(10)
                    .filter(|&d| d >= 1)
                    .map(|d| d as usize - 1)
                    .ok_or_else(|| Error::spec(format!("bad preference list {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }

    /// All `m!` lists in lexicographic order (123, 132, 213, ...).
    pub fn all(m: usize) -> Vec<PreferenceList> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..m).collect();
        loop {
            out.push(PreferenceList { order: cur.clone() });
            // next lexicographic permutation
            let Some(i) = (0..m.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..m).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// College at rank `k` (1-based).
    pub fn at_rank(&self, k: usize) -> usize {
        self.order[k - 1]
    }

    /// 1-based rank of college `c`.
    pub fn rank_of(&self, c: usize) -> usize {
        self.order.iter().position(|&x| x == c).expect("college in list") + 1
    }

    /// Bitmask of the top `k` colleges.
    pub fn prefix_mask(&self, k: usize) -> usize {
        self.order[..k].iter().fold(0, |acc, &c| acc | (1 << c))
    }
}

impl fmt::Display for PreferenceList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.order {
            write!(f, "{}", c + 1)?;
        }
        Ok(())
    }
}

/// Joint score distribution of one group: `F = H_theta(F^1, ..., F^m)`.
#[derive(Debug, Clone)]
pub struct GroupScoreModel {
    marginals: Vec<Marginal>,
    copula: Arc<dyn Copula>,
    theta: f64,
}

impl GroupScoreModel {
    pub fn new(marginals: Vec<Marginal>, copula: Arc<dyn Copula>, theta: f64) -> Result<Self> {
        if marginals.len() != copula.dim() {
            return Err(Error::spec(format!(
                "{} marginals for a {}-dimensional copula",
                marginals.len(),
                copula.dim()
            )));
        }
        for m in &marginals {
            m.validate()?;
        }
        copula.domain().check(theta)?;
        Ok(GroupScoreModel {
            marginals,
            copula,
            theta,
        })
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }

    pub fn copula(&self) -> &Arc<dyn Copula> {
        &self.copula
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Same marginals and copula with a different parameter.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        self.copula.domain().check(theta)?;
        Ok(GroupScoreModel { theta, ..self.clone() })
    }

    fn check_cutoffs(&self, cutoffs: &[f64]) -> Result<()> {
        if cutoffs.len() != self.dim() {
            return Err(Error::input(format!(
                "{} cutoffs for {} colleges",
                cutoffs.len(),
                self.dim()
            )));
        }
        if cutoffs.iter().any(|c| c.is_nan()) {
            return Err(Error::input("NaN cutoff"));
        }
        Ok(())
    }

    /// `P(W^i < P^i for all i in S)` for every subset mask `S`.
    pub fn below_table(&self, cutoffs: &[f64]) -> Result<Vec<f64>> {
        self.check_cutoffs(cutoffs)?;
        let u: Vec<f64> = self.marginals.iter().zip(cutoffs).map(|(m, &p)| m.cdf(p)).collect();
        self.copula.eval_orthant_table(self.theta, &u)
    }

    /// `P(W^i < P^i for all i in colleges)`; the empty set gives 1.
    pub fn below_cutoff_probability(&self, colleges: &[usize], cutoffs: &[f64]) -> Result<f64> {
        self.check_cutoffs(cutoffs)?;
        let mut u = vec![1.0; self.dim()];
        for &c in colleges {
            if c >= self.dim() {
                return Err(Error::input(format!("college index {c} out of range")));
            }
            u[c] = self.marginals[c].cdf(cutoffs[c]);
        }
        if colleges.is_empty() {
            return Ok(1.0);
        }
        self.copula.eval_cdf(self.theta, &u)
    }

    /// Probability of failing the cutoffs of the top `k - 1` colleges and
    /// passing the cutoff of the `k`-th.
    pub fn demand_set_probability(&self, pref: &PreferenceList, k: usize, cutoffs: &[f64]) -> Result<f64> {
        if pref.len() != self.dim() || k == 0 || k > self.dim() {
            return Err(Error::input(format!("rank {k} invalid for preference list {pref}")));
        }
        let table = self.below_table(cutoffs)?;
        Ok(demand_from_table(&table, pref, k))
    }
}

pub(crate) fn demand_from_table(table: &[f64], pref: &PreferenceList, k: usize) -> f64 {
    let d = table[pref.prefix_mask(k - 1)] - table[pref.prefix_mask(k)];
    if d < 0.0 {
        0.0
    } else {
        d
    }
}

/// Strict first-order stochastic dominance of `a` over `b` at every
/// college: `F_a^i(x) < F_b^i(x)` at the 99 interior percentiles of both
/// marginals.
pub fn fosd_check(a: &GroupScoreModel, b: &GroupScoreModel) -> bool {
    if a.dim() != b.dim() {
        return false;
    }
    a.marginals.iter().zip(&b.marginals).all(|(ma, mb)| {
        (1..100).all(|k| {
            let p = k as f64 / 100.0;
            [ma.quantile(p), mb.quantile(p)].iter().all(|&x| ma.cdf(x) < mb.cdf(x))
        })
    })
}
