//! Aggregate demand and the market-clearing solve.

use crate::error::{Error, Result};
use crate::scores::{GroupScoreModel, PreferenceList};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

const SUM_TOL: f64 = 1e-9;
const MAX_COLLEGES: usize = 8;
/// Tail mass cut off when a support bound is infinite.
const TAIL_EPS: f64 = 1e-16;

/// A continuum college admissions problem.
#[derive(Debug, Clone)]
pub struct MarketSpec {
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    beta: Vec<Vec<f64>>,
    groups: Vec<GroupScoreModel>,
    prefs: Vec<PreferenceList>,
    /// Per group, row-major `m x 2^m`: `D^i = sum_mask w[i][mask] * T[mask]`.
    weights: Vec<Vec<f64>>,
    lower: Vec<f64>,
    lo_eff: Vec<f64>,
    hi_eff: Vec<f64>,
    scale: Vec<f64>,
}

impl MarketSpec {
    /// `beta[j]` lists group `j`'s weights over [`PreferenceList::all`] in
    /// lexicographic order.
    pub fn new(alpha: Vec<f64>, gamma: Vec<f64>, beta: Vec<Vec<f64>>, groups: Vec<GroupScoreModel>) -> Result<Self> {
        let m = alpha.len();
        let d = gamma.len();
        if m == 0 || m > MAX_COLLEGES {
            return Err(Error::spec(format!("college count {m} outside 1..={MAX_COLLEGES}")));
        }
        if d == 0 || groups.len() != d || beta.len() != d {
            return Err(Error::spec(format!(
                "{d} group masses, {} score models, {} preference distributions",
                groups.len(),
                beta.len()
            )));
        }
        if alpha.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::spec("capacities must lie in (0, 1)"));
        }
        if gamma.iter().any(|&g| !(g > 0.0 && g <= 1.0)) || (gamma.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(Error::spec("group masses must be positive and sum to 1"));
        }
        let prefs = PreferenceList::all(m);
        for (j, b) in beta.iter().enumerate() {
            if b.len() != prefs.len() {
                return Err(Error::spec(format!(
                    "group {} has {} preference weights, expected {}",
                    j + 1,
                    b.len(),
                    prefs.len()
                )));
            }
            if b.iter().any(|&x| !(x > 0.0 && x <= 1.0)) || (b.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
                return Err(Error::spec(format!(
                    "group {} preference weights must be positive and sum to 1",
                    j + 1
                )));
            }
        }
        for (j, g) in groups.iter().enumerate() {
            if g.dim() != m {
                return Err(Error::spec(format!(
                    "group {} has {} marginals for {m} colleges",
                    j + 1,
                    g.dim()
                )));
            }
        }

        let n = 1usize << m;
        let weights = beta
            .iter()
            .map(|b| {
                let mut w = vec![0.0; m * n];
                for (pref, &bs) in prefs.iter().zip(b) {
                    for k in 1..=m {
                        let i = pref.at_rank(k);
                        w[i * n + pref.prefix_mask(k - 1)] += bs;
                        w[i * n + pref.prefix_mask(k)] -= bs;
                    }
                }
                w
            })
            .collect();

        let bound = |i: usize, p: f64, pick: fn(f64, f64) -> f64| {
            groups
                .iter()
                .map(|g| g.marginals()[i].quantile(p))
                .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| pick(a, x))))
                .unwrap()
        };
        let lower = (0..m)
            .map(|i| {
                groups
                    .iter()
                    .map(|g| g.marginals()[i].lower())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let lo_eff = (0..m).map(|i| bound(i, TAIL_EPS, f64::min)).collect();
        let hi_eff = (0..m).map(|i| bound(i, 1.0 - TAIL_EPS, f64::max)).collect();
        let scale = (0..m)
            .map(|i| bound(i, 0.9, f64::max) - bound(i, 0.1, f64::min))
            .collect();

        Ok(MarketSpec {
            alpha,
            gamma,
            beta,
            groups,
            prefs,
            weights,
            lower,
            lo_eff,
            hi_eff,
            scale,
        })
    }

    pub fn colleges(&self) -> usize {
        self.alpha.len()
    }

    pub fn group_count(&self) -> usize {
        self.gamma.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    pub fn groups(&self) -> &[GroupScoreModel] {
        &self.groups
    }

    /// Preference lists in the order used by `beta`.
    pub fn pref_lists(&self) -> &[PreferenceList] {
        &self.prefs
    }

    /// Lowest support bound across groups at each college.
    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.theta()).collect()
    }

    /// True when total capacity falls short of the student mass.
    pub fn is_constrained(&self) -> bool {
        self.alpha.iter().sum::<f64>() < 1.0
    }

    /// Every pair of colleges can jointly seat all students.
    pub fn has_excess_capacity(&self) -> bool {
        let m = self.colleges();
        m >= 2 && (0..m).all(|i| (i + 1..m).all(|k| self.alpha[i] + self.alpha[k] >= 1.0))
    }

    /// Copy with group `j`'s copula parameter replaced.
    pub fn with_theta(&self, j: usize, theta: f64) -> Result<Self> {
        if j >= self.group_count() {
            return Err(Error::input(format!("group index {j} out of range")));
        }
        let mut s = self.clone();
        s.groups[j] = s.groups[j].with_theta(theta)?;
        Ok(s)
    }

    /// Lower-orthant tables of every group at `p`.
    pub fn below_tables(&self, p: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.groups.iter().map(|g| g.below_table(p)).collect()
    }

    fn demand_from_tables(&self, tables: &[Vec<f64>]) -> Vec<f64> {
        let m = self.colleges();
        let n = 1usize << m;
        (0..m)
            .map(|i| {
                let d: f64 = tables
                    .iter()
                    .zip(&self.weights)
                    .zip(&self.gamma)
                    .map(|((t, w), g)| g * w[i * n..(i + 1) * n].iter().zip(t).map(|(a, b)| a * b).sum::<f64>())
                    .sum();
                d.clamp(0.0, 1.0)
            })
            .collect()
    }

    fn demand(&self, p: &[f64]) -> Result<Vec<f64>> {
        Ok(self.demand_from_tables(&self.below_tables(p)?))
    }
}

/// Market parameters without score models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketShell {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl MarketShell {
    pub fn build(&self, groups: Vec<GroupScoreModel>) -> Result<MarketSpec> {
        MarketSpec::new(self.alpha.clone(), self.gamma.clone(), self.beta.clone(), groups)
    }
}

/// Cutoffs of the stable matching. `full[i] == false` means college `i`
/// rejects no one and `p[i]` sits at the lower support bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffVector {
    pub p: Vec<f64>,
    pub full: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub newton_iterations: usize,
    pub sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            newton_iterations: 200,
            sweeps: 500,
        }
    }
}

/// `D^i(P)`: mass of students whose favorite college among those whose
/// cutoff they clear is `i`.
pub fn aggregate_demand(spec: &MarketSpec, p: &[f64]) -> Result<Vec<f64>> {
    spec.demand(p)
}

/// Mass of students clearing no cutoff.
pub fn unmatched_mass(spec: &MarketSpec, p: &[f64]) -> Result<f64> {
    let full = (1usize << spec.colleges()) - 1;
    Ok(spec
        .below_tables(p)?
        .iter()
        .zip(&spec.gamma)
        .map(|(t, g)| g * t[full])
        .sum())
}

pub fn solve_market_clearing(spec: &MarketSpec) -> Result<CutoffVector> {
    solve_market_clearing_with(spec, &SolverOptions::default(), None)
}

/// Solve `D(P) = alpha` (with slack at non-full colleges), optionally
/// starting from `warm`.
pub fn solve_market_clearing_with(
    spec: &MarketSpec,
    opts: &SolverOptions,
    warm: Option<&CutoffVector>,
) -> Result<CutoffVector> {
    Solver { spec, opts }.run(warm)
}

pub fn solve_theta_sweep(spec: &MarketSpec, j: usize, grid: &[f64]) -> Result<Vec<CutoffVector>> {
    solve_theta_sweep_with(spec, j, grid, &SolverOptions::default())
}

/// One solve per grid node, each warm-started from the previous node.
pub fn solve_theta_sweep_with(
    spec: &MarketSpec,
    j: usize,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<CutoffVector>> {
    let mut out: Vec<CutoffVector> = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = spec.with_theta(j, t)?;
        let cv = solve_market_clearing_with(&s, opts, out.last()).map_err(|e| e.at_theta(t))?;
        out.push(cv);
    }
    Ok(out)
}

const POLISH_TOL: f64 = 1e-14;

struct Solver<'a> {
    spec: &'a MarketSpec,
    opts: &'a SolverOptions,
}

struct Point {
    p: Vec<f64>,
    excess: Vec<f64>,
    merit: f64,
}

impl Solver<'_> {
    fn run(&self, warm: Option<&CutoffVector>) -> Result<CutoffVector> {
        let spec = self.spec;
        if spec.has_excess_capacity() {
            let pt = self.point(self.first_choice_guess())?;
            if pt.merit <= self.opts.tol {
                return self.finish(pt);
            }
        }
        let start = match warm {
            Some(w) if w.p.len() == spec.colleges() => self.clamp(w.p.clone()),
            _ => self.first_choice_guess(),
        };
        let pt = self.point(start)?;
        let pt = match self.newton(pt, self.opts.newton_iterations, self.opts.tol)? {
            Ok(pt) => return self.finish(pt),
            Err(pt) => pt,
        };
        self.tatonnement(pt.merit)
    }

    fn clamp(&self, mut p: Vec<f64>) -> Vec<f64> {
        for (i, x) in p.iter_mut().enumerate() {
            *x = x.clamp(self.spec.lo_eff[i], self.spec.hi_eff[i]);
        }
        p
    }

    fn at_floor(&self, p: &[f64], i: usize) -> bool {
        p[i] <= self.spec.lo_eff[i]
    }

    fn point(&self, p: Vec<f64>) -> Result<Point> {
        let d = self.spec.demand(&p)?;
        let excess: Vec<f64> = d.iter().zip(&self.spec.alpha).map(|(d, a)| d - a).collect();
        let merit = excess
            .iter()
            .enumerate()
            .map(|(i, &e)| if self.at_floor(&p, i) { e.max(0.0) } else { e.abs() })
            .fold(0.0, f64::max);
        Ok(Point { p, excess, merit })
    }

    /// A few extra Newton steps past the tolerance, keeping the best point.
    fn finish(&self, pt: Point) -> Result<CutoffVector> {
        let pt = match self.newton(pt, 4, POLISH_TOL.min(self.opts.tol))? {
            Ok(pt) | Err(pt) => pt,
        };
        let m = self.spec.colleges();
        let mut p = pt.p;
        let mut full = vec![true; m];
        for i in 0..m {
            if p[i] <= self.spec.lo_eff[i] {
                p[i] = self.spec.lower[i];
                full[i] = false;
            }
        }
        Ok(CutoffVector { p, full })
    }

    /// Cutoffs clearing each college against first-choice demand alone.
    fn first_choice_guess(&self) -> Vec<f64> {
        let spec = self.spec;
        (0..spec.colleges())
            .map(|i| {
                let shares: Vec<f64> = spec
                    .beta
                    .iter()
                    .zip(&spec.gamma)
                    .map(|(b, g)| {
                        g * spec
                            .prefs
                            .iter()
                            .zip(b)
                            .filter(|(p, _)| p.at_rank(1) == i)
                            .map(|(_, w)| w)
                            .sum::<f64>()
                    })
                    .collect();
                let f = |x: f64| -> f64 {
                    spec.groups
                        .iter()
                        .zip(&shares)
                        .map(|(g, s)| s * (1.0 - g.marginals()[i].cdf(x)))
                        .sum::<f64>()
                        - spec.alpha[i]
                };
                bisect_decreasing(f, spec.lo_eff[i], spec.hi_eff[i], 1e-15 * spec.scale[i], 200)
            })
            .collect()
    }

    /// Damped Newton on the active colleges. `Err` hands back the best
    /// point on stagnation.
    fn newton(&self, mut pt: Point, budget: usize, tol: f64) -> Result<std::result::Result<Point, Point>> {
        let spec = self.spec;
        let m = spec.colleges();
        for _ in 0..budget {
            if pt.merit <= tol {
                return Ok(Ok(pt));
            }
            let active: Vec<usize> = (0..m)
                .filter(|&i| !(self.at_floor(&pt.p, i) && pt.excess[i] <= 0.0))
                .collect();
            let na = active.len();
            let mut jac = DMatrix::<f64>::zeros(na, na);
            for (c, &i) in active.iter().enumerate() {
                let mut h = 1e-6 * spec.scale[i];
                if pt.p[i] + h > spec.hi_eff[i] {
                    h = -h;
                }
                let mut q = pt.p.clone();
                q[i] += h;
                let dq = spec.demand(&q)?;
                for (r, &k) in active.iter().enumerate() {
                    jac[(r, c)] = (dq[k] - spec.alpha[k] - pt.excess[k]) / h;
                }
            }
            let rhs = DVector::from_iterator(na, active.iter().map(|&k| -pt.excess[k]));
            let Some(step) = jac.lu().solve(&rhs) else {
                return Ok(Err(pt));
            };
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let mut q = pt.p.clone();
                for (c, &i) in active.iter().enumerate() {
                    q[i] += t * step[c];
                }
                let cand = self.point(self.clamp(q))?;
                if cand.merit <= (1.0 - 1e-4 * t) * pt.merit {
                    accepted = Some(cand);
                    break;
                }
                t *= 0.5;
            }
            match accepted {
                Some(c) => pt = c,
                None => return Ok(Err(pt)),
            }
        }
        if pt.merit <= tol {
            Ok(Ok(pt))
        } else {
            Ok(Err(pt))
        }
    }

    /// Gauss-Seidel tatonnement from the lowest cutoffs: each coordinate is
    /// raised to clear its own college given the others. Iterates increase
    /// monotonically to the solution.
    fn tatonnement(&self, newton_residual: f64) -> Result<CutoffVector> {
        let spec = self.spec;
        let m = spec.colleges();
        let mut p = spec.lo_eff.clone();
        let mut failure: Option<Error> = None;
        let mut merit = newton_residual;
        for sweep in 0..self.opts.sweeps {
            for i in 0..m {
                let mut q = p.clone();
                let f = |x: f64| -> f64 {
                    q[i] = x;
                    match spec.demand(&q) {
                        Ok(d) => d[i] - spec.alpha[i],
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                };
                p[i] = bisect_decreasing(f, spec.lo_eff[i], spec.hi_eff[i], 1e-14 * spec.scale[i], 100);
                if let Some(e) = failure.take() {
                    return Err(e);
                }
            }
            let pt = self.point(p.clone())?;
            merit = pt.merit;
            if merit <= self.opts.tol {
                return self.finish(pt);
            }
            if sweep % 5 == 4 && merit < 1e-4 {
                if let Ok(done) = self.newton(pt, 20, self.opts.tol)? {
                    return self.finish(done);
                }
            }
        }
        Err(Error::NonConvergence {
            residual: merit,
            iterations: self.opts.newton_iterations + self.opts.sweeps,
            theta: None,
        })
    }
}

/// Largest approximate root of a non-increasing `f` on `[lo, hi]`, or `lo`
/// when `f(lo) <= 0`.
fn bisect_decreasing(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, xtol: f64, iters: usize) -> f64 {
    if f(lo) <= 0.0 {
        return lo;
    }
    if f(hi) > 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iters {
        if b - a <= xtol {
            break;
        }
        let c = 0.5 * (a + b);
        if f(c) > 0.0 {
            a = c;
        } else {
            b = c;
        }
    }
    0.5 * (a + b)
}
