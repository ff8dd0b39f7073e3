use super::ParamDomain;
use crate::error::{Error, Result};
use crate::numeric::{mvn, norm_cdf, norm_quantile};
use nalgebra::DMatrix;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Pairwise correlations that are affine, non-decreasing functions of the
/// family parameter: `rho_ik(theta) = base_ik + slope_ik * theta`.
///
/// With zero base and unit slopes this is the equicorrelated family; a
/// single non-zero slope moves one pair while the others stay fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMap {
    dim: usize,
    base: Vec<f64>,
    slope: Vec<f64>,
    domain: ParamDomain,
}

impl CorrelationMap {
    /// `base` and `slope` are row-major `dim x dim`; only off-diagonal
    /// entries are used and both must be symmetric.
    pub fn new(dim: usize, base: Vec<f64>, slope: Vec<f64>, domain: ParamDomain) -> Result<Self> {
        if base.len() != dim * dim || slope.len() != dim * dim {
            return Err(Error::spec("correlation map tables must be dim x dim"));
        }
        for i in 0..dim {
            for k in 0..dim {
                if i == k {
                    continue;
                }
                let (a, b) = (i * dim + k, k * dim + i);
                if base[a] != base[b] || slope[a] != slope[b] {
                    return Err(Error::spec("correlation map must be symmetric"));
                }
                if slope[a] < 0.0 || !slope[a].is_finite() || !base[a].is_finite() {
                    return Err(Error::spec("pairwise correlations must be non-decreasing in theta"));
                }
            }
        }
        if !(0..dim).any(|i| (0..dim).any(|k| i != k && slope[i * dim + k] > 0.0)) && dim > 1 {
            return Err(Error::spec("at least one pairwise correlation must move with theta"));
        }
        Ok(CorrelationMap {
            dim,
            base,
            slope,
            domain,
        })
    }

    /// Only the pair `(i, k)` moves with theta; every other pair is held at
    /// `fixed`.
    pub fn single_pair(dim: usize, i: usize, k: usize, fixed: f64, domain: ParamDomain) -> Result<Self> {
        if i >= dim || k >= dim || i == k {
            return Err(Error::spec("invalid pair"));
        }
        let mut base = vec![fixed; dim * dim];
        let mut slope = vec![0.0; dim * dim];
        base[i * dim + k] = 0.0;
        base[k * dim + i] = 0.0;
        slope[i * dim + k] = 1.0;
        slope[k * dim + i] = 1.0;
        Self::new(dim, base, slope, domain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> ParamDomain {
        self.domain
    }

    /// Row-major correlation matrix at `theta`.
    pub fn matrix(&self, theta: f64) -> Vec<f64> {
        let m = self.dim;
        let mut c = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                c[i * m + k] = if i == k {
                    1.0
                } else {
                    self.base[i * m + k] + self.slope[i * m + k] * theta
                };
            }
        }
        c
    }
}

pub(super) fn equicorrelated_table(m: usize, theta: f64, u: &[f64]) -> Result<Vec<f64>> {
    let x: Vec<f64> = u.iter().map(|&v| norm_quantile(v)).collect();
    if theta >= 0.0 {
        return Ok(mvn::equicorrelated_orthant_table(theta, &x));
    }
    let c = mvn::equicorrelation_matrix(m, theta);
    conditioned_table(&c, &x)
}

fn conditioned_table(c: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let m = x.len();
    let mut table = vec![1.0; 1 << m];
    let mut point = vec![f64::INFINITY; m];
    for (mask, slot) in table.iter_mut().enumerate().skip(1) {
        for i in 0..m {
            point[i] = if mask & (1 << i) != 0 { x[i] } else { f64::INFINITY };
        }
        *slot = mvn::conditioned_orthant(c, &point)?;
    }
    Ok(table)
}

pub(super) fn custom_cdf(map: &CorrelationMap, theta: f64, u: &[f64]) -> Result<f64> {
    let x: Vec<f64> = u.iter().map(|&v| norm_quantile(v)).collect();
    mvn::conditioned_orthant(&map.matrix(theta), &x)
}

pub(super) fn sample_equicorrelated(m: usize, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    if theta >= 0.0 {
        let r = theta.sqrt();
        let s = (1.0 - theta).sqrt();
        Ok((0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                (0..m)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(rng);
                        norm_cdf(r * z + s * e)
                    })
                    .collect()
            })
            .collect())
    } else {
        sample_cholesky(&mvn::equicorrelation_matrix(m, theta), m, n, rng)
    }
}

pub(super) fn sample_custom(
    map: &CorrelationMap,
    theta: f64,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<f64>>> {
    sample_cholesky(&map.matrix(theta), map.dim(), n, rng)
}

fn sample_cholesky(c: &[f64], m: usize, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
    let l = DMatrix::from_row_slice(m, m, c)
        .cholesky()
        .ok_or_else(|| Error::input("correlation matrix is not positive definite"))?
        .l();
    let mut e = vec![0.0; m];
    Ok((0..n)
        .map(|_| {
            for v in e.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            (0..m)
                .map(|i| {
                    let x: f64 = (0..=i).map(|j| l[(i, j)] * e[j]).sum();
                    norm_cdf(x)
                })
                .collect()
        })
        .collect())
}
