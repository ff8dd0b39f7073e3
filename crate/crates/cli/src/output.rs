//! CSV tables and the run manifest.

use corrmatch::metrics::MetricsReport;
use corrmatch::solver::{CutoffVector, MarketSpec};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};

pub const CUTOFF_HEADER: [&str; 6] = [
    "combo_id",
    "theta_target_group",
    "theta_value",
    "college",
    "cutoff",
    "full_flag",
];
pub const RANK_HEADER: [&str; 6] = ["combo_id", "theta_value", "group", "pref_list", "k", "R"];
pub const GLOBAL_HEADER: [&str; 4] = ["combo_id", "theta_value", "E", "L_12"];

/// `%.12g`.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A CSV file that counts the rows it writes.
pub struct Table {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    rows: usize,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> io::Result<Self> {
        let path = dir.join(name);
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
        writer.write_record(header)?;
        Ok(Table { path, writer, rows: 0 })
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<OutputFile> {
        self.writer.flush()?;
        Ok(OutputFile {
            file: self.path.file_name().expect("file").to_string_lossy().into_owned(),
            rows: self.rows,
        })
    }
}

/// The three standard tables of a run.
pub struct Tables {
    pub cutoffs: Table,
    pub ranks: Table,
    pub globals: Table,
}

impl Tables {
    pub fn create(dir: &Path, prefix: &str) -> io::Result<Self> {
        Ok(Tables {
            cutoffs: Table::create(dir, &format!("{prefix}cutoffs.csv"), &CUTOFF_HEADER)?,
            ranks: Table::create(dir, &format!("{prefix}ranks.csv"), &RANK_HEADER)?,
            globals: Table::create(dir, &format!("{prefix}globals.csv"), &GLOBAL_HEADER)?,
        })
    }

    /// Rows for one solved market. `lead` is prepended to every row (the
    /// oracle's seed column).
    pub fn write(
        &mut self,
        lead: Option<&str>,
        combo: usize,
        target_group: usize,
        theta: f64,
        spec: &MarketSpec,
        cutoffs: &CutoffVector,
        metrics: &MetricsReport,
    ) -> io::Result<()> {
        let lead: Vec<String> = lead.into_iter().map(String::from).collect();
        let (id, t) = (combo.to_string(), fmt_g(theta));
        for (i, (p, full)) in cutoffs.p.iter().zip(&cutoffs.full).enumerate() {
            let mut r = lead.clone();
            r.extend([
                id.clone(),
                (target_group + 1).to_string(),
                t.clone(),
                (i + 1).to_string(),
                fmt_g(*p),
                u8::from(*full).to_string(),
            ]);
            self.cutoffs.row(r)?;
        }
        for (j, group) in metrics.ranks.iter().enumerate() {
            for (pref, rs) in spec.pref_lists().iter().zip(group) {
                let label = pref.to_string();
                for (k, r) in rs.iter().enumerate() {
                    let mut row = lead.clone();
                    row.extend([
                        id.clone(),
                        t.clone(),
                        (j + 1).to_string(),
                        label.clone(),
                        (k + 1).to_string(),
                        fmt_g(*r),
                    ]);
                    self.ranks.row(row)?;
                }
            }
        }
        let l12 = metrics
            .inequality
            .first()
            .and_then(|r| r.get(1))
            .copied()
            .unwrap_or(0.0);
        let mut g = lead;
        g.extend([id, t, fmt_g(metrics.efficiency), fmt_g(l12)]);
        self.globals.row(g)
    }

    pub fn finish(self) -> io::Result<Vec<OutputFile>> {
        Ok(vec![
            self.cutoffs.finish()?,
            self.ranks.finish()?,
            self.globals.finish()?,
        ])
    }
}

/// Header of the oracle tables: the standard one with a leading seed.
pub fn with_seed(header: &[&'static str]) -> Vec<&'static str> {
    std::iter::once("seed").chain(header.iter().copied()).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub rows: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub solver: f64,
    pub newton_iterations: usize,
    pub tatonnement_sweeps: usize,
    pub monotone_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub spec_sha256: String,
    pub seed: u64,
    pub jobs: usize,
    pub tolerances: Tolerances,
    pub outputs: Vec<OutputFile>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(dir.join("manifest.json"), text)
    }
}
