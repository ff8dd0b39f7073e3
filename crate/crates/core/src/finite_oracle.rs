//! Finite markets solved by student-proposing deferred acceptance, used as
//! a Monte Carlo check on the continuum solution.

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::solver::{solve_market_clearing, CutoffVector, MarketSpec};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct FiniteMarket {
    pub colleges: usize,
    pub group: Vec<usize>,
    /// Index into the market's preference lists.
    pub pref: Vec<usize>,
    /// Zero-based preference order per student, favorite first.
    pub order: Vec<Vec<usize>>,
    pub scores: Vec<Vec<f64>>,
    pub seats: Vec<usize>,
    pub lower: Vec<f64>,
    pub group_count: usize,
    pub pref_count: usize,
}

impl FiniteMarket {
    pub fn len(&self) -> usize {
        self.group.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group.is_empty()
    }

    /// Student `a` outranks `b` at college `c`; equal scores go to the
    /// lower index.
    pub fn outranks(&self, c: usize, a: usize, b: usize) -> bool {
        match self.scores[a][c].total_cmp(&self.scores[b][c]) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => a < b,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FiniteOutcome {
    pub assignment: Vec<Option<usize>>,
    pub cutoffs: CutoffVector,
    pub metrics: MetricsReport,
}

impl FiniteOutcome {
    pub fn unmatched_count(&self) -> usize {
        self.assignment.iter().filter(|a| a.is_none()).count()
    }
}

pub fn sample_finite_market(spec: &MarketSpec, n: usize, seed: u64) -> Result<FiniteMarket> {
    if n == 0 {
        return Err(Error::input("student count must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = |w: &[f64]| WeightedIndex::new(w).map_err(|e| Error::spec(format!("weights: {e}")));
    let pick_group = weights(spec.gamma())?;
    let pick_pref = spec.beta().iter().map(|b| weights(b)).collect::<Result<Vec<_>>>()?;
    let group: Vec<usize> = (0..n).map(|_| pick_group.sample(&mut rng)).collect();
    let pref: Vec<usize> = group.iter().map(|&j| pick_pref[j].sample(&mut rng)).collect();

    let m = spec.colleges();
    let mut scores = vec![Vec::new(); n];
    for (j, model) in spec.groups().iter().enumerate() {
        let members: Vec<usize> = (0..n).filter(|&s| group[s] == j).collect();
        if members.is_empty() {
            continue;
        }
        let draws = model.copula().draw(model.theta(), members.len(), &mut rng)?;
        for (s, u) in members.into_iter().zip(draws) {
            scores[s] = (0..m).map(|i| model.marginals()[i].quantile(u[i])).collect();
        }
    }
    let lists = spec.pref_lists();
    Ok(FiniteMarket {
        colleges: m,
        order: pref.iter().map(|&p| lists[p].order().to_vec()).collect(),
        group,
        pref,
        scores,
        seats: spec.alpha().iter().map(|a| (a * n as f64).floor() as usize).collect(),
        lower: spec.lower_bounds().to_vec(),
        group_count: spec.group_count(),
        pref_count: lists.len(),
    })
}

/// Heap entry ordered so the weakest admitted student is on top.
struct Held<'a> {
    fm: &'a FiniteMarket,
    college: usize,
    student: usize,
}

impl PartialEq for Held<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.student == other.student
    }
}

impl Eq for Held<'_> {}

impl PartialOrd for Held<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Held<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.student == other.student {
            Ordering::Equal
        } else if self.fm.outranks(self.college, self.student, other.student) {
            Ordering::Greater
        } else {
            Ordering::Less
        }
    }
}

pub fn run_deferred_acceptance(fm: &FiniteMarket) -> FiniteOutcome {
    let n = fm.len();
    let m = fm.colleges;
    let mut next = vec![0usize; n];
    let mut held: Vec<BinaryHeap<Reverse<Held>>> = (0..m).map(|_| BinaryHeap::new()).collect();
    let mut free: Vec<usize> = (0..n).rev().collect();
    while let Some(s) = free.pop() {
        if next[s] == m {
            continue;
        }
        let c = fm.order[s][next[s]];
        next[s] += 1;
        let entry = Reverse(Held {
            fm,
            college: c,
            student: s,
        });
        if held[c].len() < fm.seats[c] {
            held[c].push(entry);
            continue;
        }
        match held[c].peek() {
            Some(Reverse(w)) if fm.outranks(c, s, w.student) => {
                let Reverse(w) = held[c].pop().expect("non-empty");
                held[c].push(entry);
                free.push(w.student);
            }
            _ => free.push(s),
        }
    }
    let mut assignment = vec![None; n];
    for (c, h) in held.iter().enumerate() {
        for Reverse(e) in h.iter() {
            assignment[e.student] = Some(c);
        }
    }
    let mut p = fm.lower.clone();
    let mut full = vec![false; m];
    for (c, h) in held.iter().enumerate() {
        if fm.seats[c] > 0 && h.len() == fm.seats[c] {
            full[c] = true;
            p[c] = h.peek().map(|Reverse(e)| fm.scores[e.student][c]).expect("non-empty");
        }
    }
    let metrics = empirical_metrics(fm, &assignment);
    FiniteOutcome {
        assignment,
        cutoffs: CutoffVector { p, full },
        metrics,
    }
}

fn empirical_metrics(fm: &FiniteMarket, assignment: &[Option<usize>]) -> MetricsReport {
    let m = fm.colleges;
    let d = fm.group_count;
    let mut counts = vec![vec![vec![0usize; m]; fm.pref_count]; d];
    let mut totals = vec![vec![0usize; fm.pref_count]; d];
    let mut unmatched = vec![0usize; d];
    let mut group_size = vec![0usize; d];
    let mut first = 0usize;
    for s in 0..fm.len() {
        let (j, p) = (fm.group[s], fm.pref[s]);
        totals[j][p] += 1;
        group_size[j] += 1;
        match assignment[s] {
            Some(c) => {
                let rank = fm.order[s].iter().position(|&x| x == c).expect("listed");
                counts[j][p][rank] += 1;
                if rank == 0 {
                    first += 1;
                }
            }
            None => unmatched[j] += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let ranks = (0..d)
        .map(|j| {
            (0..fm.pref_count)
                .map(|p| {
                    let mut acc = 0;
                    (0..m)
                        .map(|k| {
                            acc += counts[j][p][k];
                            ratio(acc, totals[j][p])
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let unmatched: Vec<f64> = (0..d).map(|j| ratio(unmatched[j], group_size[j])).collect();
    let inequality = unmatched
        .iter()
        .map(|a| unmatched.iter().map(|b| (a - b).abs()).collect())
        .collect();
    MetricsReport {
        ranks,
        unmatched,
        efficiency: ratio(first, fm.len()),
        inequality,
    }
}

/// Student-college pairs where the student prefers the college to their
/// assignment and the college has a free seat or holds someone it ranks
/// lower. Each college is summarized by its weakest admitted student, so
/// the scan covers every pair.
pub fn count_blocking_pairs(fm: &FiniteMarket, assignment: &[Option<usize>]) -> usize {
    let m = fm.colleges;
    let mut weakest: Vec<Option<usize>> = vec![None; m];
    let mut load = vec![0usize; m];
    for (s, a) in assignment.iter().enumerate() {
        if let Some(c) = *a {
            load[c] += 1;
            if weakest[c].is_none_or(|w| fm.outranks(c, w, s)) {
                weakest[c] = Some(s);
            }
        }
    }
    let mut blocking = 0;
    for s in 0..fm.len() {
        for &c in &fm.order[s] {
            if assignment[s] == Some(c) {
                break;
            }
            let open = load[c] < fm.seats[c];
            let beats = weakest[c].is_some_and(|w| fm.outranks(c, s, w));
            if open || beats {
                blocking += 1;
            }
        }
    }
    blocking
}

#[derive(Debug, Clone)]
pub struct SeedDeviation {
    pub seed: u64,
    pub cutoffs: CutoffVector,
    pub metrics: MetricsReport,
    /// Max over colleges of the cutoff gap; colleges that are non-full in
    /// both solutions count as zero.
    pub cutoff_deviation: f64,
    /// Max over all rank, unmatched and efficiency entries.
    pub metric_deviation: f64,
    pub blocking_pairs: usize,
    pub unmatched: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub students: usize,
    pub continuum: CutoffVector,
    pub continuum_metrics: MetricsReport,
    pub seeds: Vec<SeedDeviation>,
}

impl OracleReport {
    /// Deviation bound `5 / sqrt(N)`.
    pub fn band(&self) -> f64 {
        5.0 / (self.students as f64).sqrt()
    }

    pub fn median_cutoff_deviation(&self) -> f64 {
        let mut v: Vec<f64> = self.seeds.iter().map(|s| s.cutoff_deviation).collect();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        if k == 0 {
            f64::NAN
        } else if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        }
    }

    pub fn max_cutoff_deviation(&self) -> f64 {
        self.seeds.iter().map(|s| s.cutoff_deviation).fold(0.0, f64::max)
    }
}

pub fn cutoff_deviation(a: &CutoffVector, b: &CutoffVector) -> f64 {
    (0..a.p.len())
        .map(|i| {
            if !a.full[i] && !b.full[i] {
                0.0
            } else {
                (a.p[i] - b.p[i]).abs()
            }
        })
        .fold(0.0, f64::max)
}

pub fn metric_deviation(a: &MetricsReport, b: &MetricsReport) -> f64 {
    let ranks = a
        .ranks
        .iter()
        .flatten()
        .flatten()
        .zip(b.ranks.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs());
    let unmatched = a.unmatched.iter().zip(&b.unmatched).map(|(x, y)| (x - y).abs());
    ranks
        .chain(unmatched)
        .chain(std::iter::once((a.efficiency - b.efficiency).abs()))
        .fold(0.0, f64::max)
}

pub fn oracle_compare(spec: &MarketSpec, n: usize, seeds: &[u64], mode: ExecMode) -> Result<OracleReport> {
    let continuum = solve_market_clearing(spec)?;
    let continuum_metrics = compute_metrics(spec, &continuum)?;
    let band = 5.0 / (n as f64).sqrt();
    let runs = exec::map(mode, seeds, |&seed| -> Result<SeedDeviation> {
        let fm = sample_finite_market(spec, n, seed)?;
        let out = run_deferred_acceptance(&fm);
        let metric_dev = metric_deviation(&out.metrics, &continuum_metrics);
        Ok(SeedDeviation {
            seed,
            cutoff_deviation: cutoff_deviation(&out.cutoffs, &continuum),
            metric_deviation: metric_dev,
            blocking_pairs: count_blocking_pairs(&fm, &out.assignment),
            unmatched: out.unmatched_count(),
            flagged: metric_dev > band,
            cutoffs: out.cutoffs,
            metrics: out.metrics,
        })
    });
    Ok(OracleReport {
        students: n,
        continuum,
        continuum_metrics,
        seeds: runs.into_iter().collect::<Result<Vec<_>>>()?,
    })
}
