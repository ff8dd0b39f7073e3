use super::Copula;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Concordance {
    pub spearman: f64,
    pub kendall: f64,
}

/// Minimum sample size accepted by [`concordance_coefficients`].
pub const MIN_CONCORDANCE_SAMPLES: usize = 10_000;

/// Rank-based sample estimates of Spearman's rho and Kendall's tau for a
/// bivariate family.
pub fn concordance_coefficients(c: &dyn Copula, theta: f64, n: usize, seed: u64) -> Result<Concordance> {
    if c.dim() != 2 {
        return Err(Error::capability("concordance coefficients are pairwise (m = 2)"));
    }
    if n < MIN_CONCORDANCE_SAMPLES {
        return Err(Error::input(format!(
            "need at least {MIN_CONCORDANCE_SAMPLES} samples, got {n}"
        )));
    }
    let pts = c.sample(theta, n, seed)?;
    let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p[1]).collect();
    Ok(Concordance {
        spearman: spearman_rho(&xs, &ys),
        kendall: kendall_tau(&xs, &ys),
    })
}

/// Average ranks (1-based), ties share the mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = mean;
        }
        i = j + 1;
    }
    r
}

pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Kendall's tau-a in `O(n log n)`: sort by `x`, count inversions of `y`
/// with a merge sort.
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]).then(ys[a].total_cmp(&ys[b])));
    let mut y: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
    let mut buf = vec![0.0; n];
    let discordant = count_inversions(&mut y, &mut buf) as f64;
    let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
    1.0 - 2.0 * discordant / pairs
}

fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left_buf, right_buf) = buf.split_at_mut(mid);
    let mut inv = {
        let (l, r) = v.split_at_mut(mid);
        count_inversions(l, left_buf) + count_inversions(r, right_buf)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            inv += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    inv
}
