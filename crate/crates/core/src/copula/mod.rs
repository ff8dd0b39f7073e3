//! Parameterized copula families `H_theta` on `[0,1]^m`.
//!
//! Every family implements [`Copula`]. The solver only ever needs the
//! lower-orthant table (the copula evaluated over every coordinate subset
//! with the remaining coordinates set to 1), so families that can produce
//! the whole table in one pass override [`Copula::eval_orthant_table`].

mod archimedean;
mod concordance;
mod gaussian;

pub use concordance::{concordance_coefficients, kendall_tau, spearman_rho, Concordance};
pub use gaussian::CorrelationMap;

use crate::error::{Error, Result};
use crate::numeric::mvn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Interval of admissible family parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl ParamDomain {
    pub const REAL_LINE: ParamDomain = ParamDomain {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        ParamDomain {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    pub fn contains(&self, theta: f64) -> bool {
        if theta.is_nan() {
            return false;
        }
        let above = if self.lo_closed {
            theta >= self.lo
        } else {
            theta > self.lo
        };
        let below = if self.hi_closed {
            theta <= self.hi
        } else {
            theta < self.hi
        };
        above && below
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain {
                theta,
                domain: self.to_string(),
            })
        }
    }
}

impl fmt::Display for ParamDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// An `m`-dimensional copula family indexed by a real parameter.
pub trait Copula: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn domain(&self) -> ParamDomain;

    fn name(&self) -> String;

    /// `H_theta(u)` for validated inputs.
    fn eval_cdf(&self, theta: f64, u: &[f64]) -> Result<f64>;

    /// `H_theta` over every subset mask of coordinates (bit `i` set means
    /// coordinate `i` is constrained to `u_i`, the rest are set to 1).
    fn eval_orthant_table(&self, theta: f64, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        let mut table = vec![1.0; 1 << m];
        let mut point = vec![1.0; m];
        for (mask, slot) in table.iter_mut().enumerate().skip(1) {
            for (i, p) in point.iter_mut().enumerate() {
                *p = if mask & (1 << i) != 0 { u[i] } else { 1.0 };
            }
            *slot = self.eval_cdf(theta, &point)?;
        }
        Ok(table)
    }

    /// Draws `n` points for a validated parameter.
    fn draw(&self, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>>;

    fn cdf(&self, theta: f64, u: &[f64]) -> Result<f64> {
        self.domain().check(theta)?;
        check_unit_point(u, self.dim())?;
        self.eval_cdf(theta, u)
    }

    fn orthant_table(&self, theta: f64, u: &[f64]) -> Result<Vec<f64>> {
        self.domain().check(theta)?;
        check_unit_point(u, self.dim())?;
        self.eval_orthant_table(theta, u)
    }

    fn sample(&self, theta: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(theta, n, &mut rng)
    }

    fn sample_with(&self, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        self.domain().check(theta)?;
        if n == 0 {
            return Err(Error::input("sample count must be positive"));
        }
        self.draw(theta, n, rng)
    }
}

pub(crate) fn check_unit_point(u: &[f64], m: usize) -> Result<()> {
    if u.len() != m {
        return Err(Error::input(format!(
            "point has dimension {}, copula has dimension {m}",
            u.len()
        )));
    }
    if let Some(bad) = u.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
        return Err(Error::input(format!("coordinate {bad} outside [0, 1]")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    Independence,
    Comonotone,
    GaussianEquicorrelated,
    GaussianCustom(CorrelationMap),
    Clayton,
    Frank,
    Gumbel,
}

/// A concrete parametric family of fixed dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaFamily {
    kind: FamilyKind,
    dim: usize,
}

impl CopulaFamily {
    pub fn new(kind: FamilyKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::spec("copula dimension must be positive"));
        }
        match &kind {
            FamilyKind::Clayton | FamilyKind::Frank | FamilyKind::Gumbel if dim != 2 => {
                return Err(Error::capability(
                    "Archimedean families are implemented for dimension 2 only",
                ))
            }
            FamilyKind::GaussianCustom(map) if map.dim() != dim => {
                return Err(Error::spec("correlation map dimension mismatch"))
            }
            _ => {}
        }
        Ok(CopulaFamily { kind, dim })
    }

    pub fn independence(dim: usize) -> Self {
        CopulaFamily {
            kind: FamilyKind::Independence,
            dim: dim.max(1),
        }
    }

    pub fn comonotone(dim: usize) -> Self {
        CopulaFamily {
            kind: FamilyKind::Comonotone,
            dim: dim.max(1),
        }
    }

    pub fn gaussian(dim: usize) -> Self {
        CopulaFamily {
            kind: FamilyKind::GaussianEquicorrelated,
            dim: dim.max(1),
        }
    }

    pub fn gaussian_custom(map: CorrelationMap) -> Self {
        let dim = map.dim();
        CopulaFamily {
            kind: FamilyKind::GaussianCustom(map),
            dim,
        }
    }

    pub fn clayton() -> Self {
        CopulaFamily {
            kind: FamilyKind::Clayton,
            dim: 2,
        }
    }

    pub fn frank() -> Self {
        CopulaFamily {
            kind: FamilyKind::Frank,
            dim: 2,
        }
    }

    pub fn gumbel() -> Self {
        CopulaFamily {
            kind: FamilyKind::Gumbel,
            dim: 2,
        }
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }
}

impl Copula for CopulaFamily {
    fn dim(&self) -> usize {
        self.dim
    }

    fn domain(&self) -> ParamDomain {
        match &self.kind {
            FamilyKind::Independence | FamilyKind::Comonotone => ParamDomain::REAL_LINE,
            FamilyKind::GaussianEquicorrelated => {
                let lo = if self.dim > 1 {
                    -1.0 / (self.dim as f64 - 1.0)
                } else {
                    -1.0
                };
                // sup is evaluated through the comonotone copula
                ParamDomain::new(lo, 1.0, false, true)
            }
            FamilyKind::GaussianCustom(map) => map.domain(),
            FamilyKind::Clayton => ParamDomain::new(-1.0, f64::INFINITY, true, false),
            FamilyKind::Frank => ParamDomain::REAL_LINE,
            FamilyKind::Gumbel => ParamDomain::new(1.0, f64::INFINITY, true, false),
        }
    }

    fn name(&self) -> String {
        match &self.kind {
            FamilyKind::Independence => "independence".into(),
            FamilyKind::Comonotone => "comonotone".into(),
            FamilyKind::GaussianEquicorrelated => "gaussian".into(),
            FamilyKind::GaussianCustom(_) => "gaussian-custom".into(),
            FamilyKind::Clayton => "clayton".into(),
            FamilyKind::Frank => "frank".into(),
            FamilyKind::Gumbel => "gumbel".into(),
        }
    }

    fn eval_cdf(&self, theta: f64, u: &[f64]) -> Result<f64> {
        Ok(match &self.kind {
            FamilyKind::Independence => u.iter().product(),
            FamilyKind::Comonotone => min_of(u),
            FamilyKind::GaussianEquicorrelated => {
                if theta == 1.0 {
                    min_of(u)
                } else {
                    let full = (1usize << self.dim) - 1;
                    gaussian::equicorrelated_table(self.dim, theta, u)?[full]
                }
            }
            FamilyKind::GaussianCustom(map) => gaussian::custom_cdf(map, theta, u)?,
            FamilyKind::Clayton => archimedean::clayton_cdf(theta, u[0], u[1]),
            FamilyKind::Frank => archimedean::frank_cdf(theta, u[0], u[1]),
            FamilyKind::Gumbel => archimedean::gumbel_cdf(theta, u[0], u[1]),
        })
    }

    fn eval_orthant_table(&self, theta: f64, u: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim;
        match &self.kind {
            FamilyKind::Independence => Ok(subset_fold(u, 1.0, |acc, v| acc * v)),
            FamilyKind::Comonotone => Ok(subset_fold(u, 1.0, f64::min)),
            FamilyKind::GaussianEquicorrelated if theta == 1.0 => Ok(subset_fold(u, 1.0, f64::min)),
            FamilyKind::GaussianEquicorrelated => gaussian::equicorrelated_table(m, theta, u),
            _ => {
                // generic route: one evaluation per subset
                let mut table = vec![1.0; 1 << m];
                let mut point = vec![1.0; m];
                for (mask, slot) in table.iter_mut().enumerate().skip(1) {
                    for (i, p) in point.iter_mut().enumerate() {
                        *p = if mask & (1 << i) != 0 { u[i] } else { 1.0 };
                    }
                    *slot = self.eval_cdf(theta, &point)?;
                }
                Ok(table)
            }
        }
    }

    fn draw(&self, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        use rand::Rng;
        let m = self.dim;
        match &self.kind {
            FamilyKind::Independence => Ok((0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect()),
            FamilyKind::Comonotone => Ok((0..n).map(|_| vec![rng.random::<f64>(); m]).collect()),
            FamilyKind::GaussianEquicorrelated => {
                if theta == 1.0 {
                    Ok((0..n).map(|_| vec![rng.random::<f64>(); m]).collect())
                } else {
                    gaussian::sample_equicorrelated(m, theta, n, rng)
                }
            }
            FamilyKind::GaussianCustom(map) => gaussian::sample_custom(map, theta, n, rng),
            FamilyKind::Clayton => Ok(archimedean::sample_clayton(theta, n, rng)),
            FamilyKind::Frank => Ok(archimedean::sample_frank(theta, n, rng)),
            FamilyKind::Gumbel => Ok(archimedean::sample_gumbel(theta, n, rng)),
        }
    }
}

fn min_of(u: &[f64]) -> f64 {
    u.iter().cloned().fold(1.0, f64::min)
}

/// Folds `op` over the coordinates of each subset mask.
fn subset_fold(u: &[f64], unit: f64, op: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let size = 1usize << u.len();
    let mut t = vec![unit; size];
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        t[mask] = op(t[mask & (mask - 1)], u[low]);
    }
    t
}

/// `H_theta(u)` with full validation.
pub fn copula_cdf(c: &dyn Copula, theta: f64, u: &[f64]) -> Result<f64> {
    c.cdf(theta, u)
}

/// Mass of the box `[lower, upper]` by inclusion–exclusion over its
/// `2^m` vertices.
pub fn copula_box_probability(c: &dyn Copula, theta: f64, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let m = c.dim();
    c.domain().check(theta)?;
    check_unit_point(lower, m)?;
    check_unit_point(upper, m)?;
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(Error::input("box lower corner exceeds upper corner"));
    }
    let mut total = 0.0;
    let mut vertex = vec![0.0; m];
    for mask in 0..(1usize << m) {
        let mut lows = 0;
        for i in 0..m {
            if mask & (1 << i) != 0 {
                vertex[i] = lower[i];
                lows += 1;
            } else {
                vertex[i] = upper[i];
            }
        }
        if vertex.contains(&0.0) {
            continue;
        }
        let h = c.eval_cdf(theta, &vertex)?;
        if lows % 2 == 0 {
            total += h;
        } else {
            total -= h;
        }
    }
    Ok(total.max(0.0))
}

/// `n` seeded draws from `H_theta`.
pub fn copula_sample(c: &dyn Copula, theta: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    c.sample(theta, n, seed)
}

/// Correlation matrix (row-major) of the equicorrelated Gaussian family.
pub fn equicorrelation(m: usize, theta: f64) -> Vec<f64> {
    mvn::equicorrelation_matrix(m, theta)
}
