//! Markets generated from a latent quality plus college-specific noise.
//!
//! Student `s` in group `j` has quality `W ~ N(0, chi^2)` and score
//! `W + eps^i` at college `i` with `eps^i ~ N(0, sigma_j^2)` independent
//! across colleges. Scores are equicorrelated with
//! `r_j = chi^2 / (chi^2 + sigma_j^2)`.

use crate::copula::{Copula, CopulaFamily};
use crate::error::{Error, Result};
use crate::scores::{GroupScoreModel, Marginal};
use crate::solver::{MarketShell, MarketSpec};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentNoiseSpec {
    pub quality_variance: f64,
    pub noise_variances: Vec<f64>,
    /// Standardize scores within each group and college.
    pub standardize: bool,
}

impl LatentNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.quality_variance) || self.noise_variances.is_empty() || !self.noise_variances.iter().all(|&v| ok(v))
        {
            return Err(Error::spec("latent variances must be positive and finite"));
        }
        Ok(())
    }

    /// Score correlation of each group.
    pub fn correlations(&self) -> Vec<f64> {
        self.noise_variances
            .iter()
            .map(|s| self.quality_variance / (self.quality_variance + s))
            .collect()
    }
}

pub fn latent_to_market(lns: &LatentNoiseSpec, shell: &MarketShell, m: usize) -> Result<MarketSpec> {
    lns.validate()?;
    if lns.noise_variances.len() != shell.gamma.len() {
        return Err(Error::spec(format!(
            "{} noise variances for {} groups",
            lns.noise_variances.len(),
            shell.gamma.len()
        )));
    }
    let cop: Arc<dyn Copula> = Arc::new(CopulaFamily::gaussian(m));
    let groups = lns
        .noise_variances
        .iter()
        .zip(lns.correlations())
        .map(|(&s2, r)| {
            let marginal = if lns.standardize {
                Marginal::standard_normal()
            } else {
                Marginal::gaussian(0.0, lns.quality_variance + s2)?
            };
            GroupScoreModel::new(vec![marginal; m], cop.clone(), r)
        })
        .collect::<Result<Vec<_>>>()?;
    shell.build(groups)
}
