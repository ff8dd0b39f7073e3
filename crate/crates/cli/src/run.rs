//! Command dispatch.

use crate::config::{BuildError, CensusTemplateName, Command, MarketSource, RunConfig};
use crate::output::{
    fmt_g, with_seed, Manifest, OutputFile, Table, Tables, Tolerances, CUTOFF_HEADER, GLOBAL_HEADER, RANK_HEADER,
};
use corrmatch::census::{run_census, CensusTemplate};
use corrmatch::exec::{self, ExecMode};
use corrmatch::finite_oracle::oracle_compare;
use corrmatch::metrics::{compute_metrics, metric_sweep_with, trace_iso_efficiency_within, MONOTONE_SLACK};
use corrmatch::solver::{solve_market_clearing_with, SolverOptions};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<corrmatch::Error> for CliError {
    fn from(e: corrmatch::Error) -> Self {
        match e {
            corrmatch::Error::NonConvergence { .. } => CliError::Solver(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(s) => CliError::Validation(s),
            BuildError::Model(e) => e.into(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub struct Invocation {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub tol: Option<f64>,
}

pub fn execute(inv: &Invocation) -> Result<Manifest, CliError> {
    let bytes = std::fs::read(&inv.config)?;
    let cfg: RunConfig = serde_json::from_slice(&bytes).map_err(|e| invalid(e.to_string()))?;
    let tol = inv.tol.or(cfg.tolerance.map(|t| t.0)).unwrap_or(1e-8);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    let seed = inv.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Context {
        cfg: &cfg,
        opts,
        seed,
        out: &inv.out,
    };
    // validate everything before creating outputs
    ctx.precheck()?;
    std::fs::create_dir_all(&inv.out)?;
    let (outputs, summary) = exec::with_jobs(inv.jobs, || ctx.dispatch())?;
    let manifest = Manifest {
        tool: "corrmatch",
        version: env!("CARGO_PKG_VERSION"),
        command: format!("{:?}", cfg.command).to_lowercase(),
        spec_sha256: hex::encode(Sha256::digest(&bytes)),
        seed,
        jobs: inv.jobs,
        tolerances: Tolerances {
            solver: tol,
            newton_iterations: opts.newton_iterations,
            tatonnement_sweeps: opts.sweeps,
            monotone_slack: MONOTONE_SLACK,
        },
        outputs,
        summary,
    };
    manifest.write(&inv.out)?;
    Ok(manifest)
}

type Outcome = (Vec<OutputFile>, BTreeMap<String, Value>);

struct Context<'a> {
    cfg: &'a RunConfig,
    opts: SolverOptions,
    seed: u64,
    out: &'a Path,
}

impl Context<'_> {
    fn precheck(&self) -> Result<(), CliError> {
        let cfg = self.cfg;
        if cfg.command == Command::Census {
            let c = cfg
                .census
                .as_ref()
                .ok_or_else(|| invalid("census needs a \"census\" section"))?;
            if let Some(g) = &c.theta2_grid {
                g.nodes().map_err(invalid)?;
            }
            return Ok(());
        }
        let source = cfg.market_source().map_err(invalid)?;
        match (cfg.command, source) {
            (Command::Tiebreak, MarketSource::TieBreak) | (Command::Latent, MarketSource::Latent) => {}
            (Command::Tiebreak, _) => return Err(invalid("tiebreak needs a \"tiebreak\" section")),
            (Command::Latent, _) => return Err(invalid("latent needs a \"latent\" section")),
            _ => {}
        }
        let spec = cfg.build_market()?;
        let d = spec.group_count();
        let group = |g: usize| -> Result<usize, CliError> {
            if g == 0 || g > d {
                Err(invalid(format!("group {g} out of range 1..={d}")))
            } else {
                Ok(g - 1)
            }
        };
        if let Some(s) = &cfg.sweep {
            group(s.group)?;
            s.thetas.nodes().map_err(invalid)?;
        }
        match cfg.command {
            Command::Sweep if cfg.sweep.is_none() => Err(invalid("sweep needs a \"sweep\" section")),
            Command::Grid => {
                let g = cfg
                    .grid
                    .as_ref()
                    .ok_or_else(|| invalid("grid needs a \"grid\" section"))?;
                if group(g.row_group)? == group(g.col_group)? {
                    return Err(invalid("grid needs two distinct groups"));
                }
                g.rows.nodes().map_err(invalid)?;
                g.cols.nodes().map_err(invalid)?;
                Ok(())
            }
            Command::Contour => {
                let c = cfg
                    .contour
                    .as_ref()
                    .ok_or_else(|| invalid("contour needs a \"contour\" section"))?;
                if group(c.groups[0])? == group(c.groups[1])? {
                    return Err(invalid("contour needs two distinct groups"));
                }
                c.thetas.nodes().map_err(invalid)?;
                Ok(())
            }
            Command::Oracle => {
                let o = cfg
                    .oracle
                    .as_ref()
                    .ok_or_else(|| invalid("oracle needs an \"oracle\" section"))?;
                if o.students == 0 {
                    return Err(invalid("oracle needs at least one student"));
                }
                if o.seeds.is_some() == o.seed_count.is_some() {
                    return Err(invalid("oracle needs exactly one of \"seeds\" or \"seed_count\""));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn dispatch(&self) -> Result<Outcome, CliError> {
        match self.cfg.command {
            Command::Solve | Command::Sweep | Command::Tiebreak | Command::Latent => self.solve_or_sweep(),
            Command::Grid => self.grid(),
            Command::Contour => self.contour(),
            Command::Oracle => self.oracle(),
            Command::Census => self.census(),
        }
    }

    fn solve_or_sweep(&self) -> Result<Outcome, CliError> {
        let spec = self.cfg.build_market()?;
        let mut tables = Tables::create(self.out, "")?;
        let mut summary = BTreeMap::new();
        match &self.cfg.sweep {
            Some(s) => {
                let j = s.group - 1;
                let grid = s.thetas.nodes().map_err(invalid)?;
                let rows = metric_sweep_with(&spec, j, &grid, &self.opts)?;
                for r in &rows {
                    tables.write(
                        None,
                        0,
                        j,
                        r.theta,
                        &spec.with_theta(j, r.theta)?,
                        &r.cutoffs,
                        &r.metrics,
                    )?;
                }
                let inc = corrmatch::metrics::detect_nonmonotone_cutoffs(&rows);
                summary.insert(
                    "nonmonotone".into(),
                    json!(inc
                        .iter()
                        .map(|i| json!({"college": i.college + 1, "theta_from": i.theta_from, "theta_to": i.theta_to, "max_increment": i.max_increment}))
                        .collect::<Vec<_>>()),
                );
            }
            None => {
                let cv = solve_market_clearing_with(&spec, &self.opts, None)?;
                let mr = compute_metrics(&spec, &cv)?;
                tables.write(None, 0, 0, spec.thetas()[0], &spec, &cv, &mr)?;
            }
        }
        Ok((tables.finish()?, summary))
    }

    fn grid(&self) -> Result<Outcome, CliError> {
        let g = self.cfg.grid.as_ref().expect("prechecked");
        let spec = self.cfg.build_market()?;
        let (rj, cj) = (g.row_group - 1, g.col_group - 1);
        let rows = g.rows.nodes().map_err(invalid)?;
        let cols = g.cols.nodes().map_err(invalid)?;
        let opts = self.opts;
        let sweeps = exec::map(ExecMode::Parallel, &rows, |&t| -> corrmatch::Result<_> {
            let s = spec.with_theta(rj, t)?;
            Ok((s.clone(), metric_sweep_with(&s, cj, &cols, &opts)?))
        });
        let mut tables = Tables::create(self.out, "")?;
        let mut combos = Table::create(self.out, "combos.csv", &["combo_id", "row_group", "row_theta"])?;
        for (id, (t, res)) in rows.iter().zip(sweeps).enumerate() {
            let (s, sweep) = res?;
            combos.row([id.to_string(), g.row_group.to_string(), fmt_g(*t)])?;
            for r in &sweep {
                tables.write(
                    None,
                    id,
                    cj,
                    r.theta,
                    &s.with_theta(cj, r.theta)?,
                    &r.cutoffs,
                    &r.metrics,
                )?;
            }
        }
        let mut outputs = tables.finish()?;
        outputs.push(combos.finish()?);
        Ok((outputs, BTreeMap::new()))
    }

    fn contour(&self) -> Result<Outcome, CliError> {
        let c = self.cfg.contour.as_ref().expect("prechecked");
        let spec = self.cfg.build_market()?;
        let (j, l) = (c.groups[0] - 1, c.groups[1] - 1);
        let grid = c.thetas.nodes().map_err(invalid)?;
        let bounds = match c.bounds {
            Some([a, b]) => (a.0, b.0),
            None => (grid[0], grid[grid.len() - 1]),
        };
        let contour = trace_iso_efficiency_within(&spec, (j, l), c.target.0, &grid, bounds, &self.opts)?;
        let mut t = Table::create(
            self.out,
            "contour.csv",
            &["point", "theta_j", "theta_l", "E", "L", "unmatched_j", "unmatched_l"],
        )?;
        for (k, p) in contour.points.iter().enumerate() {
            let m = &p.metrics;
            t.row([
                k.to_string(),
                fmt_g(p.theta_j),
                fmt_g(p.theta_l),
                fmt_g(m.efficiency),
                fmt_g(m.inequality[j][l]),
                fmt_g(m.unmatched[j]),
                fmt_g(m.unmatched[l]),
            ])?;
        }
        let mut summary = BTreeMap::new();
        summary.insert("gaps".into(), json!(contour.gaps));
        Ok((vec![t.finish()?], summary))
    }

    fn oracle(&self) -> Result<Outcome, CliError> {
        let o = self.cfg.oracle.as_ref().expect("prechecked");
        let spec = self.cfg.build_market()?;
        let seeds: Vec<u64> = match (&o.seeds, o.seed_count) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => (0..n as u64).map(|k| self.seed.wrapping_add(k)).collect(),
            _ => unreachable!("prechecked"),
        };
        let report = oracle_compare(&spec, o.students, &seeds, ExecMode::Parallel)?;
        let theta = spec.thetas()[0];
        let mut continuum = Tables::create(self.out, "")?;
        continuum.write(None, 0, 0, theta, &spec, &report.continuum, &report.continuum_metrics)?;
        let mut finite = Tables {
            cutoffs: Table::create(self.out, "oracle_cutoffs.csv", &with_seed(&CUTOFF_HEADER))?,
            ranks: Table::create(self.out, "oracle_ranks.csv", &with_seed(&RANK_HEADER))?,
            globals: Table::create(self.out, "oracle_globals.csv", &with_seed(&GLOBAL_HEADER))?,
        };
        let mut dev = Table::create(
            self.out,
            "oracle_summary.csv",
            &[
                "seed",
                "cutoff_deviation",
                "metric_deviation",
                "blocking_pairs",
                "unmatched",
                "flagged",
            ],
        )?;
        for s in &report.seeds {
            let seed = s.seed.to_string();
            finite.write(Some(&seed), 0, 0, theta, &spec, &s.cutoffs, &s.metrics)?;
            dev.row([
                seed,
                fmt_g(s.cutoff_deviation),
                fmt_g(s.metric_deviation),
                s.blocking_pairs.to_string(),
                s.unmatched.to_string(),
                u8::from(s.flagged).to_string(),
            ])?;
        }
        let mut outputs = continuum.finish()?;
        outputs.extend(finite.finish()?);
        outputs.push(dev.finish()?);
        let mut summary = BTreeMap::new();
        summary.insert("students".into(), json!(o.students));
        summary.insert("band".into(), json!(report.band()));
        summary.insert(
            "median_cutoff_deviation".into(),
            json!(report.median_cutoff_deviation()),
        );
        summary.insert("max_cutoff_deviation".into(), json!(report.max_cutoff_deviation()));
        summary.insert(
            "flagged_seeds".into(),
            json!(report.seeds.iter().filter(|s| s.flagged).count()),
        );
        summary.insert(
            "blocking_pairs".into(),
            json!(report.seeds.iter().map(|s| s.blocking_pairs).sum::<usize>()),
        );
        Ok((outputs, summary))
    }

    fn census(&self) -> Result<Outcome, CliError> {
        let c = self.cfg.census.as_ref().expect("prechecked");
        let mut template = match c.template {
            CensusTemplateName::ThreeCollege => CensusTemplate::three_college(),
            CensusTemplateName::FourCollege => CensusTemplate::four_college(),
        };
        if let Some(g) = &c.theta2_grid {
            template.theta2_grid = g.nodes().map_err(invalid)?;
        }
        let report = run_census(&template, &self.opts, ExecMode::Parallel);
        let m = template.colleges;
        let mut header: Vec<String> = ["combo_id", "gamma_1", "gamma_2", "total_capacity"]
            .map(String::from)
            .to_vec();
        header.extend((1..=m).map(|i| format!("alpha_{i}")));
        header.extend(
            [
                "theta_1",
                "beta",
                "status",
                "nonmonotone",
                "monitored_decrease",
                "max_increment",
            ]
            .map(String::from),
        );
        let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut combos = Table::create(self.out, "combos.csv", &header_refs)?;
        let mut tables = Tables::create(self.out, "")?;
        for r in &report.results {
            let cb = &r.combo;
            let mut row = vec![
                cb.id.to_string(),
                fmt_g(cb.gamma[0]),
                fmt_g(cb.gamma[1]),
                fmt_g(cb.total_capacity),
            ];
            row.extend(cb.alpha.iter().map(|a| fmt_g(*a)));
            row.extend([fmt_g(cb.theta1), cb.beta_label.clone()]);
            match &r.outcome {
                Ok(o) => {
                    let spec = template.market(cb)?;
                    for s in &o.rows {
                        tables.write(
                            None,
                            cb.id,
                            1,
                            s.theta,
                            &spec.with_theta(1, s.theta)?,
                            &s.cutoffs,
                            &s.metrics,
                        )?;
                    }
                    let max_inc = o.increases.iter().map(|i| i.max_increment).fold(0.0, f64::max);
                    row.extend([
                        "ok".to_string(),
                        u8::from(r.is_nonmonotone()).to_string(),
                        u8::from(r.is_nonmonotone() && r.monitored_decreases()).to_string(),
                        fmt_g(max_inc),
                    ]);
                }
                Err(e) => row.extend([format!("error: {e}"), String::new(), String::new(), String::new()]),
            }
            combos.row(row)?;
        }
        let mut outputs = tables.finish()?;
        outputs.push(combos.finish()?);
        let mut summary = BTreeMap::new();
        summary.insert("combinations".into(), json!(report.results.len()));
        summary.insert("nonmonotone".into(), json!(report.nonmonotone_count()));
        summary.insert("monitored_decrease".into(), json!(report.monitored_decrease_count()));
        summary.insert(
            "monitored_metric".into(),
            json!(format!(
                "R_{}^{{{},{}}}",
                report.monitor.group + 1,
                report.monitor.k,
                report.monitor.pref
            )),
        );
        summary.insert("failures".into(), json!(report.failure_count()));
        summary.insert("theta2_nodes".into(), json!(report.theta2_grid.len()));
        Ok((outputs, summary))
    }
}
