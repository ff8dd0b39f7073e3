//! JSON run configuration.

use corrmatch::copula::{Copula, CopulaFamily, CorrelationMap, FamilyKind, ParamDomain};
use corrmatch::latent::{latent_to_market, LatentNoiseSpec};
use corrmatch::scores::{GroupScoreModel, Marginal};
use corrmatch::solver::{MarketShell, MarketSpec};
use corrmatch::tiebreak::{tiebreak_market, TieBreakSpec};
use serde::Deserialize;
use std::sync::Arc;

/// A number given as a JSON number, a decimal string, or a rational
/// literal such as `"1/15"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(x) => Ok(Num(x)),
            Raw::S(s) => parse_number(&s).map(Num).map_err(serde::de::Error::custom),
        }
    }
}

pub fn parse_number(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let bad = || format!("cannot parse number {s:?}");
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            if p.unsigned_abs() > 1 << 53 || q.unsigned_abs() > 1 << 53 {
                return Err(format!("rational {s:?} is not exactly representable"));
            }
            // one correctly rounded division
            Ok(p as f64 / q as f64)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Grid,
    Contour,
    Tiebreak,
    Latent,
    Oracle,
    Census,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<Num>,
    #[serde(default)]
    pub market: Option<MarketConfig>,
    #[serde(default)]
    pub latent: Option<LatentConfig>,
    #[serde(default)]
    pub tiebreak: Option<Vec<TieBreakGroup>>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub contour: Option<ContourConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub census: Option<CensusConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub alpha: Vec<Num>,
    pub gamma: Vec<Num>,
    pub beta: BetaConfig,
    #[serde(default)]
    pub groups: Option<Vec<GroupConfig>>,
}

/// `"uniform"`, one weight vector shared by all groups, or one per group.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BetaConfig {
    Named(String),
    Shared(Vec<Num>),
    PerGroup(Vec<Vec<Num>>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub marginals: MarginalsConfig,
    pub copula: CopulaConfig,
    pub theta: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MarginalsConfig {
    Each(Vec<MarginalConfig>),
    All(MarginalConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalConfig {
    Uniform { lo: Num, hi: Num },
    Gaussian { mean: Num, variance: Num },
    PiecewiseLinear { xs: Vec<Num>, ps: Vec<Num> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CopulaConfig {
    Independence,
    Comonotone,
    Gaussian,
    /// `rho_ik = base_ik + slope_ik * theta` on `[lo, hi]`.
    GaussianCustom {
        base: Vec<Vec<Num>>,
        slope: Vec<Vec<Num>>,
        lo: Num,
        hi: Num,
    },
    Clayton,
    Frank,
    Gumbel,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentConfig {
    pub quality_variance: Num,
    pub noise_variances: Vec<Num>,
    #[serde(default = "yes")]
    pub standardize: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TieBreakGroup {
    pub classes: Vec<Vec<Num>>,
    #[serde(default)]
    pub cells: Option<Vec<Num>>,
    pub base: CopulaConfig,
    pub theta: Num,
}

/// Either explicit nodes or `count` evenly spaced nodes from `start` to
/// `stop` inclusive.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Nodes(Vec<Num>),
    Range { start: Num, stop: Num, count: usize },
}

impl GridSpec {
    pub fn nodes(&self) -> Result<Vec<f64>, String> {
        let v = match self {
            GridSpec::Nodes(v) => nums(v),
            GridSpec::Range { start, stop, count } => match *count {
                0 => vec![],
                1 => vec![start.0],
                n => (0..n)
                    .map(|k| start.0 + (stop.0 - start.0) * k as f64 / (n - 1) as f64)
                    .collect(),
            },
        };
        if v.is_empty() {
            return Err("grid must have at least one node".into());
        }
        if v.windows(2).any(|w| !(w[0] < w[1])) {
            return Err("grid nodes must be strictly increasing".into());
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// 1-based group index.
    pub group: usize,
    pub thetas: GridSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub row_group: usize,
    pub rows: GridSpec,
    pub col_group: usize,
    pub cols: GridSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub groups: [usize; 2],
    pub target: Num,
    pub thetas: GridSpec,
    #[serde(default)]
    pub bounds: Option<[Num; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub students: usize,
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub seed_count: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensusTemplateName {
    ThreeCollege,
    FourCollege,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusConfig {
    pub template: CensusTemplateName,
    #[serde(default)]
    pub theta2_grid: Option<GridSpec>,
}

impl MarginalConfig {
    fn build(&self) -> corrmatch::Result<Marginal> {
        match self {
            MarginalConfig::Uniform { lo, hi } => Marginal::uniform(lo.0, hi.0),
            MarginalConfig::Gaussian { mean, variance } => Marginal::gaussian(mean.0, variance.0),
            MarginalConfig::PiecewiseLinear { xs, ps } => Marginal::piecewise_linear(nums(xs), nums(ps)),
        }
    }
}

impl CopulaConfig {
    pub fn build(&self, m: usize) -> corrmatch::Result<Arc<dyn Copula>> {
        let fam = match self {
            CopulaConfig::Independence => CopulaFamily::independence(m),
            CopulaConfig::Comonotone => CopulaFamily::comonotone(m),
            CopulaConfig::Gaussian => CopulaFamily::gaussian(m),
            CopulaConfig::GaussianCustom { base, slope, lo, hi } => {
                let flat = |v: &[Vec<Num>]| v.iter().flat_map(|r| nums(r)).collect::<Vec<_>>();
                let domain = ParamDomain::new(lo.0, hi.0, true, true);
                CopulaFamily::gaussian_custom(CorrelationMap::new(m, flat(base), flat(slope), domain)?)
            }
            CopulaConfig::Clayton => CopulaFamily::new(FamilyKind::Clayton, m)?,
            CopulaConfig::Frank => CopulaFamily::new(FamilyKind::Frank, m)?,
            CopulaConfig::Gumbel => CopulaFamily::new(FamilyKind::Gumbel, m)?,
        };
        Ok(Arc::new(fam))
    }
}

impl MarketConfig {
    pub fn shell(&self) -> Result<MarketShell, String> {
        let m = self.alpha.len();
        let d = self.gamma.len();
        let lists: usize = (1..=m).product();
        let beta = match &self.beta {
            BetaConfig::Named(s) if s == "uniform" => vec![vec![1.0 / lists as f64; lists]; d],
            BetaConfig::Named(s) => return Err(format!("unknown preference distribution {s:?}")),
            BetaConfig::Shared(b) => vec![nums(b); d],
            BetaConfig::PerGroup(bs) => bs.iter().map(|b| nums(b)).collect(),
        };
        Ok(MarketShell {
            alpha: nums(&self.alpha),
            gamma: nums(&self.gamma),
            beta,
        })
    }
}

/// How the market under study is specified.
pub enum MarketSource {
    Explicit,
    Latent,
    TieBreak,
}

impl RunConfig {
    pub fn market_source(&self) -> Result<MarketSource, String> {
        let market = self.market.as_ref().ok_or("missing \"market\" section")?;
        match (self.latent.is_some(), self.tiebreak.is_some(), market.groups.is_some()) {
            (false, false, true) => Ok(MarketSource::Explicit),
            (true, false, false) => Ok(MarketSource::Latent),
            (false, true, false) => Ok(MarketSource::TieBreak),
            (false, false, false) => Err("market needs \"groups\", \"latent\" or \"tiebreak\"".into()),
            _ => Err("give exactly one of market.groups, \"latent\" or \"tiebreak\"".into()),
        }
    }

    pub fn build_market(&self) -> Result<MarketSpec, BuildError> {
        let source = self.market_source().map_err(BuildError::Config)?;
        let market = self.market.as_ref().expect("checked");
        let shell = market.shell().map_err(BuildError::Config)?;
        let m = shell.alpha.len();
        let spec = match source {
            MarketSource::Explicit => {
                let groups = market
                    .groups
                    .as_ref()
                    .expect("checked")
                    .iter()
                    .map(|g| {
                        let marginals = match &g.marginals {
                            MarginalsConfig::All(one) => vec![one.build()?; m],
                            MarginalsConfig::Each(v) => {
                                v.iter().map(|x| x.build()).collect::<corrmatch::Result<_>>()?
                            }
                        };
                        GroupScoreModel::new(marginals, g.copula.build(m)?, g.theta.0)
                    })
                    .collect::<corrmatch::Result<Vec<_>>>()?;
                shell.build(groups)?
            }
            MarketSource::Latent => {
                let l = self.latent.as_ref().expect("checked");
                let lns = LatentNoiseSpec {
                    quality_variance: l.quality_variance.0,
                    noise_variances: nums(&l.noise_variances),
                    standardize: l.standardize,
                };
                latent_to_market(&lns, &shell, m)?
            }
            MarketSource::TieBreak => {
                let groups = self
                    .tiebreak
                    .as_ref()
                    .expect("checked")
                    .iter()
                    .map(|g| {
                        let classes = g.classes.iter().map(|c| nums(c)).collect();
                        let cells = g.cells.as_ref().map(|c| nums(c));
                        let tb = TieBreakSpec::new(classes, cells, g.base.build(m)?)?;
                        Ok((Arc::new(tb), g.theta.0))
                    })
                    .collect::<corrmatch::Result<Vec<_>>>()?;
                tiebreak_market(&groups, &shell)?
            }
        };
        Ok(spec)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] corrmatch::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_exactly() {
        assert_eq!(parse_number("1/15").unwrap(), 1.0 / 15.0);
        assert_eq!(parse_number(" -3/4 ").unwrap(), -0.75);
        assert_eq!(parse_number("0.99").unwrap(), 0.99);
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("one").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let ok = r#"{"command":"solve","market":{"alpha":["1/4","1/4"],"gamma":[1],"beta":"uniform",
            "groups":[{"marginals":{"kind":"uniform","lo":0,"hi":1},"copula":{"family":"gaussian"},"theta":0}]}}"#;
        let cfg: RunConfig = serde_json::from_str(ok).unwrap();
        assert!(cfg.build_market().is_ok());
        let bad = ok.replace("\"command\"", "\"colour\":1,\"command\"");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
        let bad = ok.replace("\"hi\":1", "\"hi\":1,\"sd\":2");
        assert!(serde_json::from_str::<RunConfig>(&bad).is_err());
    }

    #[test]
    fn grids() {
        let g: GridSpec = serde_json::from_str(r#"{"start":0,"stop":"99/100","count":100}"#).unwrap();
        let v = g.nodes().unwrap();
        assert_eq!(v.len(), 100);
        assert!((v[99] - 0.99).abs() < 1e-15 && (v[1] - 0.01).abs() < 1e-15);
        let g: GridSpec = serde_json::from_str("[0.5, 0.2]").unwrap();
        assert!(g.nodes().is_err());
    }
}
