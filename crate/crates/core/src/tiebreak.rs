//! Composite copulas built from priority classes.
//!
//! College `i` partitions `[0,1]` into class intervals
//! `(a^i_{q-1}, a^i_q]` of width `kappa^i_q`, lowest class first. Each cell
//! of the product of intervals carries a rescaled copy of the base copula
//! with mass `kappa_p`, so higher classes always outrank lower ones and
//! the base copula only breaks ties within a cell.

use crate::copula::{Copula, ParamDomain};
use crate::error::{Error, Result};
use crate::scores::{GroupScoreModel, Marginal};
use crate::solver::{MarketShell, MarketSpec};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

const CONSISTENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TieBreakSpec {
    class_masses: Vec<Vec<f64>>,
    /// `anchors[i][q]`, `q = 0..=tau^i`.
    anchors: Vec<Vec<f64>>,
    cells: Vec<Vec<usize>>,
    cell_masses: Vec<f64>,
    base: Arc<dyn Copula>,
}

impl TieBreakSpec {
    /// `cell_masses` follow [`TieBreakSpec::cells`] order; `None` takes the
    /// product of class masses.
    pub fn new(class_masses: Vec<Vec<f64>>, cell_masses: Option<Vec<f64>>, base: Arc<dyn Copula>) -> Result<Self> {
        let m = base.dim();
        if class_masses.len() != m {
            return Err(Error::spec(format!(
                "{} class tables for a {m}-dimensional base copula",
                class_masses.len()
            )));
        }
        for (i, k) in class_masses.iter().enumerate() {
            if k.is_empty() || k.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::spec(format!("college {} class masses must be positive", i + 1)));
            }
            if (k.iter().sum::<f64>() - 1.0).abs() > CONSISTENCY_TOL {
                return Err(Error::spec(format!("college {} class masses do not sum to 1", i + 1)));
            }
        }
        let anchors = class_masses
            .iter()
            .map(|k| {
                let mut a = Vec::with_capacity(k.len() + 1);
                a.push(0.0);
                for x in k {
                    a.push(a.last().unwrap() + x);
                }
                *a.last_mut().unwrap() = 1.0;
                a
            })
            .collect();
        Self::assemble(class_masses, anchors, cell_masses, base)
    }

    /// Build from explicit anchors `0 = a_0 < a_1 < ... < a_tau = 1`.
    pub fn from_anchors(anchors: Vec<Vec<f64>>, cell_masses: Option<Vec<f64>>, base: Arc<dyn Copula>) -> Result<Self> {
        if anchors.len() != base.dim() {
            return Err(Error::spec("one anchor table per college required"));
        }
        for (i, a) in anchors.iter().enumerate() {
            let ordered = a.len() >= 2 && a[0] == 0.0 && a[a.len() - 1] == 1.0 && a.windows(2).all(|w| w[0] < w[1]);
            if !ordered {
                return Err(Error::spec(format!(
                    "college {} anchors must increase strictly from 0 to 1",
                    i + 1
                )));
            }
        }
        let class_masses = anchors
            .iter()
            .map(|a| a.windows(2).map(|w| w[1] - w[0]).collect())
            .collect();
        Self::assemble(class_masses, anchors, cell_masses, base)
    }

    fn assemble(
        class_masses: Vec<Vec<f64>>,
        anchors: Vec<Vec<f64>>,
        cell_masses: Option<Vec<f64>>,
        base: Arc<dyn Copula>,
    ) -> Result<Self> {
        let sizes: Vec<usize> = class_masses.iter().map(Vec::len).collect();
        let cells = enumerate_cells(&sizes);
        let cell_masses = match cell_masses {
            Some(k) => k,
            None => cells
                .iter()
                .map(|c| c.iter().enumerate().map(|(i, &q)| class_masses[i][q]).product())
                .collect(),
        };
        if cell_masses.len() != cells.len() {
            return Err(Error::spec(format!(
                "{} cell masses for {} cells",
                cell_masses.len(),
                cells.len()
            )));
        }
        if cell_masses.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::spec("cell masses must be non-negative"));
        }
        for (i, k) in class_masses.iter().enumerate() {
            for (q, &kq) in k.iter().enumerate() {
                let s: f64 = cells
                    .iter()
                    .zip(&cell_masses)
                    .filter(|(c, _)| c[i] == q)
                    .map(|(_, x)| x)
                    .sum();
                if (s - kq).abs() > CONSISTENCY_TOL {
                    return Err(Error::spec(format!(
                        "cell masses in class {} of college {} sum to {s}, class mass is {kq}",
                        q + 1,
                        i + 1
                    )));
                }
            }
        }
        Ok(TieBreakSpec {
            class_masses,
            anchors,
            cells,
            cell_masses,
            base,
        })
    }

    pub fn dim(&self) -> usize {
        self.class_masses.len()
    }

    pub fn class_masses(&self) -> &[Vec<f64>] {
        &self.class_masses
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    /// Cells as zero-based class tuples, last college varying fastest.
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_masses(&self) -> &[f64] {
        &self.cell_masses
    }

    pub fn base(&self) -> &Arc<dyn Copula> {
        &self.base
    }

    /// Class of score `x` at college `i`; the boundary `a^i_q` belongs to
    /// class `q` (the lower one).
    pub fn class_of(&self, i: usize, x: f64) -> usize {
        let a = &self.anchors[i];
        a[1..a.len() - 1].partition_point(|&b| b < x)
    }

    fn local(&self, cell: &[usize], x: &[f64]) -> Vec<f64> {
        cell.iter()
            .enumerate()
            .map(|(i, &q)| ((x[i] - self.anchors[i][q]) / self.class_masses[i][q]).clamp(0.0, 1.0))
            .collect()
    }

    /// Draws with the cell index of each.
    pub fn draw_labeled(&self, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let pick = WeightedIndex::new(&self.cell_masses).map_err(|e| Error::spec(format!("cell masses: {e}")))?;
        let labels: Vec<usize> = (0..n).map(|_| pick.sample(rng)).collect();
        let base = self.base.draw(theta, n, rng)?;
        let points = base
            .into_iter()
            .zip(&labels)
            .map(|(v, &c)| {
                let cell = &self.cells[c];
                v.iter()
                    .enumerate()
                    .map(|(i, &vi)| self.anchors[i][cell[i]] + self.class_masses[i][cell[i]] * vi)
                    .collect()
            })
            .collect();
        Ok((points, labels))
    }
}

fn enumerate_cells(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &s in sizes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..s).map(move |q| {
                    let mut c = prefix.clone();
                    c.push(q);
                    c
                })
            })
            .collect();
    }
    out
}

/// `H~_theta(x) = sum_p kappa_p H_theta(c_p(x))`.
#[derive(Debug, Clone)]
pub struct CompositeCopula {
    tb: Arc<TieBreakSpec>,
}

impl CompositeCopula {
    pub fn new(tb: Arc<TieBreakSpec>) -> Self {
        CompositeCopula { tb }
    }

    pub fn spec(&self) -> &TieBreakSpec {
        &self.tb
    }
}

impl Copula for CompositeCopula {
    fn dim(&self) -> usize {
        self.tb.dim()
    }

    fn domain(&self) -> ParamDomain {
        self.tb.base.domain()
    }

    fn name(&self) -> String {
        format!("tiebreak({})", self.tb.base.name())
    }

    fn eval_cdf(&self, theta: f64, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (cell, &k) in self.tb.cells.iter().zip(&self.tb.cell_masses) {
            if k == 0.0 {
                continue;
            }
            let u = self.tb.local(cell, x);
            if u.contains(&0.0) {
                continue;
            }
            total += k * self.tb.base.eval_cdf(theta, &u)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    fn eval_orthant_table(&self, theta: f64, x: &[f64]) -> Result<Vec<f64>> {
        // c_p maps 1 to 1, so the composite table is the mass-weighted sum
        // of base tables
        let mut table = vec![0.0; 1 << self.dim()];
        for (cell, &k) in self.tb.cells.iter().zip(&self.tb.cell_masses) {
            if k == 0.0 {
                continue;
            }
            let t = self.tb.base.eval_orthant_table(theta, &self.tb.local(cell, x))?;
            for (acc, v) in table.iter_mut().zip(t) {
                *acc += k * v;
            }
        }
        table[0] = 1.0;
        for v in &mut table {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(table)
    }

    fn draw(&self, theta: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<Vec<f64>>> {
        Ok(self.tb.draw_labeled(theta, n, rng)?.0)
    }
}

pub fn composite_copula_cdf(tb: &Arc<TieBreakSpec>, theta: f64, x: &[f64]) -> Result<f64> {
    CompositeCopula::new(tb.clone()).cdf(theta, x)
}

/// Every sampled score in a higher class exceeds every sampled score in a
/// lower class, at every college.
pub fn class_dominance_check(tb: &TieBreakSpec, theta: f64, n: usize, seed: u64) -> Result<bool> {
    tb.base.domain().check(theta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, labels) = tb.draw_labeled(theta, n, &mut rng)?;
    for i in 0..tb.dim() {
        let tau = tb.class_masses[i].len();
        let mut lo = vec![f64::INFINITY; tau];
        let mut hi = vec![f64::NEG_INFINITY; tau];
        for (x, &c) in points.iter().zip(&labels) {
            let q = tb.cells[c][i];
            lo[q] = lo[q].min(x[i]);
            hi[q] = hi[q].max(x[i]);
        }
        let mut max_below = f64::NEG_INFINITY;
        for q in 0..tau {
            if lo[q].is_finite() {
                if lo[q] <= max_below {
                    return Ok(false);
                }
                max_below = hi[q];
            }
        }
    }
    Ok(true)
}

/// Standard market with uniform marginals and one composite copula per
/// group.
pub fn tiebreak_market(groups: &[(Arc<TieBreakSpec>, f64)], shell: &MarketShell) -> Result<MarketSpec> {
    let mut models = Vec::with_capacity(groups.len());
    for (j, (tb, theta)) in groups.iter().enumerate() {
        if let Some(c) = tb.cell_masses.iter().position(|&k| k <= 0.0) {
            let cell: Vec<String> = tb.cells[c].iter().map(|q| (q + 1).to_string()).collect();
            return Err(Error::precondition(format!(
                "group {} has no mass in priority cell ({})",
                j + 1,
                cell.join(", ")
            )));
        }
        let cop: Arc<dyn Copula> = Arc::new(CompositeCopula::new(tb.clone()));
        models.push(GroupScoreModel::new(
            vec![Marginal::unit_uniform(); tb.dim()],
            cop,
            *theta,
        )?);
    }
    shell.build(models)
}
