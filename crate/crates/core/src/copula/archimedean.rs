//! Bivariate Archimedean families (Clayton, Frank, Gumbel).

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Exp1, Gamma};
use std::f64::consts::PI;

pub(super) fn clayton_cdf(theta: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if theta == 0.0 {
        return x * y;
    }
    if theta > 0.0 {
        // log-domain evaluation of (x^-t + y^-t - 1)^(-1/t)
        let a = -theta * x.ln();
        let b = -theta * y.ln();
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        let log_sum = hi + (1.0 + (lo - hi).exp() - (-hi).exp()).ln();
        return (-log_sum / theta).exp().min(x.min(y));
    }
    let t = x.powf(-theta) + y.powf(-theta) - 1.0;
    if t <= 0.0 {
        0.0
    } else {
        t.powf(-1.0 / theta)
    }
}

pub(super) fn frank_cdf(theta: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    if theta == 0.0 {
        return x * y;
    }
    // 1 + (e^-tx - 1)(e^-ty - 1)/(e^-t - 1), rearranged so that both terms of
    // the numerator share a sign
    let a = (-theta * x).exp();
    let b = (-theta * y).exp();
    let ratio = (a * (-theta * y).exp_m1() + b * (-theta * (1.0 - y)).exp_m1()) / (-theta).exp_m1();
    (-ratio.ln() / theta).clamp(0.0, x.min(y))
}

pub(super) fn gumbel_cdf(theta: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let a = (-x.ln()).powf(theta) + (-y.ln()).powf(theta);
    (-a.powf(1.0 / theta)).exp()
}

fn uniform_open(rng: &mut dyn RngCore) -> f64 {
    loop {
        let v: f64 = rng.random();
        if v > 0.0 {
            return v;
        }
    }
}

/// Marshall–Olkin gamma frailty for positive parameters, conditional
/// inversion otherwise.
pub(super) fn sample_clayton(theta: f64, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
    if theta == 0.0 {
        return (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    }
    if theta > 0.0 {
        let frailty = Gamma::new(1.0 / theta, 1.0).expect("positive shape");
        return (0..n)
            .map(|_| {
                let v: f64 = frailty.sample(rng);
                (0..2)
                    .map(|_| {
                        let e: f64 = Exp1.sample(rng);
                        (e / v).ln_1p().mul_add(-1.0 / theta, 0.0).exp()
                    })
                    .collect()
            })
            .collect();
    }
    (0..n)
        .map(|_| {
            let u = uniform_open(rng);
            let w = uniform_open(rng);
            let v = if theta == -1.0 {
                1.0 - u
            } else {
                let inner = (w.powf(-theta / (1.0 + theta)) - 1.0) * u.powf(-theta) + 1.0;
                inner.max(0.0).powf(-1.0 / theta)
            };
            vec![u, v]
        })
        .collect()
}

pub(super) fn sample_frank(theta: f64, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let u = uniform_open(rng);
            let w = uniform_open(rng);
            if theta == 0.0 {
                return vec![u, w];
            }
            let denom = w + (1.0 - w) * (-theta * u).exp();
            let v = -(w * (-theta).exp_m1() / denom).ln_1p() / theta;
            vec![u, v.clamp(0.0, 1.0)]
        })
        .collect()
}

/// Marshall–Olkin with a positive stable frailty drawn by Kanter's
/// representation.
pub(super) fn sample_gumbel(theta: f64, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
    if theta == 1.0 {
        return (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    }
    let alpha = 1.0 / theta;
    (0..n)
        .map(|_| {
            let u = PI * uniform_open(rng);
            let e: f64 = Exp1.sample(rng);
            let v = (alpha * u).sin() / u.sin().powf(1.0 / alpha)
                * (((1.0 - alpha) * u).sin() / e).powf((1.0 - alpha) / alpha);
            (0..2)
                .map(|_| {
                    let ei: f64 = Exp1.sample(rng);
                    (-(ei / v).powf(alpha)).exp()
                })
                .collect()
        })
        .collect()
}
