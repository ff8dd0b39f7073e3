#![allow(dead_code)]

use corrmatch::copula::{Copula, CopulaFamily};
use corrmatch::scores::{GroupScoreModel, Marginal};
use corrmatch::solver::MarketSpec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum MarginalParams {
    Uniform(f64, f64),
    Gaussian(f64, f64),
}

impl MarginalParams {
    pub fn build(&self) -> Marginal {
        match *self {
            MarginalParams::Uniform(lo, w) => Marginal::uniform(lo, lo + w).unwrap(),
            MarginalParams::Gaussian(mu, v) => Marginal::gaussian(mu, v).unwrap(),
        }
    }
}

/// A random market with gaussian copulas in every group.
#[derive(Debug, Clone)]
pub struct MarketParams {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub marginals: Vec<Vec<MarginalParams>>,
    pub theta: Vec<f64>,
}

fn normalize(w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

fn factorial(m: usize) -> usize {
    (1..=m).product()
}

impl MarketParams {
    pub fn colleges(&self) -> usize {
        self.alpha.len()
    }

    pub fn groups(&self) -> usize {
        self.gamma.len()
    }

    pub fn build(&self) -> MarketSpec {
        let m = self.colleges();
        let copula: Arc<dyn Copula> = Arc::new(CopulaFamily::gaussian(m));
        let groups = self
            .marginals
            .iter()
            .zip(&self.theta)
            .map(|(ms, &t)| GroupScoreModel::new(ms.iter().map(|x| x.build()).collect(), copula.clone(), t).unwrap())
            .collect();
        MarketSpec::new(self.alpha.clone(), self.gamma.clone(), self.beta.clone(), groups).unwrap()
    }

    /// Seeded draw with the same ranges as [`market_params`].
    pub fn from_seed(seed: u64, colleges: &[usize], groups: &[usize]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = colleges[rng.random_range(0..colleges.len())];
        let d = groups[rng.random_range(0..groups.len())];
        let raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
        let total = rng.random_range(0.2..0.9);
        let alpha = normalize(&raw).iter().map(|a| a * total).collect();
        let gamma = normalize(&(0..d).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<_>>());
        let beta = (0..d)
            .map(|_| {
                normalize(
                    &(0..factorial(m))
                        .map(|_| rng.random_range(0.05..1.0))
                        .collect::<Vec<_>>(),
                )
            })
            .collect();
        let marginals = (0..d)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            MarginalParams::Uniform(rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0))
                        } else {
                            MarginalParams::Gaussian(rng.random_range(-0.5..0.5), rng.random_range(0.5..2.0))
                        }
                    })
                    .collect()
            })
            .collect();
        let theta = (0..d).map(|_| rng.random_range(0.0..0.9)).collect();
        MarketParams {
            alpha,
            gamma,
            beta,
            marginals,
            theta,
        }
    }
}

pub fn marginal_params() -> impl Strategy<Value = MarginalParams> {
    prop_oneof![
        (-0.5..0.5f64, 0.5..2.0f64).prop_map(|(a, b)| MarginalParams::Uniform(a, b)),
        (-0.5..0.5f64, 0.5..2.0f64).prop_map(|(a, b)| MarginalParams::Gaussian(a, b)),
    ]
}

/// Constrained-capacity markets with `m` colleges and `d` groups.
pub fn market_params_with(m: usize, d: usize) -> impl Strategy<Value = MarketParams> {
    (
        prop::collection::vec(0.05..1.0f64, m),
        0.2..0.9f64,
        prop::collection::vec(0.1..1.0f64, d),
        prop::collection::vec(prop::collection::vec(0.05..1.0f64, factorial(m)), d),
        prop::collection::vec(prop::collection::vec(marginal_params(), m), d),
        prop::collection::vec(0.0..0.9f64, d),
    )
        .prop_map(|(raw, total, g, b, marginals, theta)| MarketParams {
            alpha: normalize(&raw).iter().map(|a| a * total).collect(),
            gamma: normalize(&g),
            beta: b.iter().map(|w| normalize(w)).collect(),
            marginals,
            theta,
        })
}

pub fn market_params() -> impl Strategy<Value = MarketParams> {
    (2usize..=3, 1usize..=3).prop_flat_map(|(m, d)| market_params_with(m, d))
}

/// Evenly spaced nodes on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}
