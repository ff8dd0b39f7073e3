//! Deterministic lower-orthant probabilities `P(X_i <= x_i, i in S)` for a
//! standard multivariate normal vector with unit variances.
//!
//! Two independent routes are provided:
//!
//! * [`equicorrelated_orthant_table`] uses the one-factor representation
//!   `X_i = sqrt(t) Z + sqrt(1 - t) e_i`, valid for a common correlation
//!   `t >= 0`, and integrates the conditional product over `Z` with a
//!   composite Gauss–Legendre rule. One pass yields every subset at once.
//! * [`conditioned_orthant`] handles an arbitrary positive definite
//!   correlation matrix (dimension <= 4) by sequential conditioning on the
//!   Cholesky factor, with nested fixed-node composite Gauss–Legendre rules
//!   in the original normal coordinates.
//!
//! Neither route uses randomization: equal inputs produce bit-identical
//! outputs.

use super::normal::{norm_cdf, norm_pdf};
use super::quadrature::GaussLegendre;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Standardized half-width beyond which a factor is treated as saturated;
/// `Phi(-8.5)` is below 1e-17.
const TAIL: f64 = 8.5;

/// Largest dimension supported by [`conditioned_orthant`].
pub const MAX_CONDITIONED_DIM: usize = 4;

/// For every bitmask `S` over the coordinates of `x`, the probability
/// `P(X_i <= x_i for all i in S)` under common correlation `theta` in
/// `[0, 1)`. Entry 0 (the empty set) is 1. Coordinates may be infinite.
pub fn equicorrelated_orthant_table(theta: f64, x: &[f64]) -> Vec<f64> {
    debug_assert!((0.0..1.0).contains(&theta));
    let m = x.len();
    let size = 1usize << m;
    let mut table = vec![0.0; size];
    table[0] = 1.0;

    let cdf: Vec<f64> = x.iter().map(|&xi| norm_cdf(xi)).collect();
    let finite: Vec<usize> = (0..m).filter(|&i| x[i].is_finite()).collect();
    let mut neg_inf_mask = 0usize;
    let mut finite_mask = 0usize;
    for i in 0..m {
        if x[i] == f64::NEG_INFINITY {
            neg_inf_mask |= 1 << i;
        } else if x[i].is_finite() {
            finite_mask |= 1 << i;
        }
    }

    // Integrals over subsets of the finite coordinates, indexed by a compact
    // mask over `finite`.
    let nf = finite.len();
    let mut compact = vec![0.0; 1 << nf];
    compact[0] = 1.0;
    for (b, &i) in finite.iter().enumerate() {
        compact[1 << b] = cdf[i];
    }
    if nf >= 2 {
        if theta == 0.0 {
            for mask in 1..(1usize << nf) {
                let low = mask.trailing_zeros() as usize;
                compact[mask] = compact[mask & (mask - 1)] * cdf[finite[low]];
            }
        } else {
            factor_integrate(theta, &finite.iter().map(|&i| x[i]).collect::<Vec<_>>(), &mut compact);
        }
    }

    for (mask, slot) in table.iter_mut().enumerate().skip(1) {
        if mask & neg_inf_mask != 0 {
            *slot = 0.0;
            continue;
        }
        // collapse onto the finite coordinates; +inf coordinates contribute 1
        let fm = mask & finite_mask;
        let mut c = 0usize;
        for (b, &i) in finite.iter().enumerate() {
            if fm & (1 << i) != 0 {
                c |= 1 << b;
            }
        }
        *slot = compact[c];
    }
    table
}

/// Fills `out[mask]` for compact masks of size >= 2 over the finite points `x`.
fn factor_integrate(theta: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    let r = theta.sqrt();
    let s = (1.0 - theta).sqrt();
    let xmin = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let z_lo = ((xmin - TAIL * s) / r).max(-TAIL);
    let z_hi = ((xmax + TAIL * s) / r).min(TAIL);

    let size = 1usize << n;
    let mut acc = vec![0.0; size];
    if z_hi > z_lo {
        // transitions of each factor have width s / r in z
        let width = (s / r).min(1.0);
        let panels = ((z_hi - z_lo) / width).ceil().max(1.0) as usize;
        let mut f = vec![0.0; n];
        let mut prod = vec![0.0; size];
        prod[0] = 1.0;
        GaussLegendre::ten().for_each_node(z_lo, z_hi, panels, |z, w| {
            let wz = w * norm_pdf(z);
            for (fi, &xi) in f.iter_mut().zip(x) {
                *fi = norm_cdf((xi - r * z) / s);
            }
            for mask in 1..size {
                let low = mask.trailing_zeros() as usize;
                prod[mask] = prod[mask & (mask - 1)] * f[low];
                acc[mask] += wz * prod[mask];
            }
        });
    }
    // below z_lo every factor is saturated at 1
    let head = norm_cdf(z_lo);
    for mask in 1..size {
        if mask.count_ones() >= 2 {
            out[mask] = (head + acc[mask]).clamp(0.0, 1.0);
        }
    }
}

/// `P(X <= x)` for a standard normal vector with the given correlation
/// matrix (row-major, `m x m`, `m <= 4`). Infinite coordinates are allowed.
pub fn conditioned_orthant(corr: &[f64], x: &[f64]) -> Result<f64> {
    let m = x.len();
    if corr.len() != m * m {
        return Err(Error::input("correlation matrix shape does not match point"));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::input("NaN coordinate"));
    }
    if x.contains(&f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let keep: Vec<usize> = (0..m).filter(|&i| x[i].is_finite()).collect();
    let k = keep.len();
    if k == 0 {
        return Ok(1.0);
    }
    if k == 1 {
        return Ok(norm_cdf(x[keep[0]]));
    }
    if k > MAX_CONDITIONED_DIM {
        return Err(Error::capability(format!(
            "normal orthant probabilities are limited to dimension {MAX_CONDITIONED_DIM}, got {k}"
        )));
    }
    let sub = DMatrix::from_fn(k, k, |a, b| corr[keep[a] * m + keep[b]]);
    let chol = sub
        .cholesky()
        .ok_or_else(|| Error::input("correlation matrix is not positive definite"))?;
    let l = chol.l();
    let xs: Vec<f64> = keep.iter().map(|&i| x[i]).collect();

    // panel width per conditioning level from the sharpest later dependence
    let widths: Vec<f64> = (0..k)
        .map(|lvl| {
            let mut w: f64 = 1.0;
            for later in lvl + 1..k {
                let c = l[(later, lvl)].abs();
                if c > 0.0 {
                    w = w.min(l[(later, later)] / c);
                }
            }
            w
        })
        .collect();

    let mut y = vec![0.0; k];
    let p = nested_level(0, &l, &xs, &widths, &mut y);
    Ok(p.clamp(0.0, 1.0))
}

fn nested_level(lvl: usize, l: &DMatrix<f64>, x: &[f64], widths: &[f64], y: &mut [f64]) -> f64 {
    let k = x.len();
    let mut shift = 0.0;
    for j in 0..lvl {
        shift += l[(lvl, j)] * y[j];
    }
    let c = (x[lvl] - shift) / l[(lvl, lvl)];
    if lvl + 1 == k {
        return norm_cdf(c);
    }
    let a = -TAIL;
    let b = c.min(TAIL);
    if b <= a {
        return 0.0;
    }
    let panels = ((b - a) / widths[lvl]).ceil().max(1.0) as usize;
    let mut acc = 0.0;
    GaussLegendre::six().for_each_node(a, b, panels, |z, w| {
        y[lvl] = z;
        acc += w * norm_pdf(z) * nested_level(lvl + 1, l, x, widths, y);
    });
    acc
}

/// Row-major equicorrelation matrix.
pub fn equicorrelation_matrix(m: usize, theta: f64) -> Vec<f64> {
    let mut c = vec![theta; m * m];
    for i in 0..m {
        c[i * m + i] = 1.0;
    }
    c
}
