//! TOML configuration schema.
//!
//! Every section is optional; absent fields fall back to the preset of the
//! subcommand. Relative data paths are resolved against the config file's
//! directory.
//!
//! ```toml
//! [experiment]
//! setting = "A"            # "A" or "B"
//! seed = 20240601
//! d = 5
//! periods = 250
//! replications = 200
//! mu_corr = 0.5
//! beta = 0.75
//! level = 0.05
//! forecast_draws = 10000
//!
//! [[risk]]                 # repeatable; replaces the default list
//! kind = "var"             # "var", "evar" or "es"
//! level = 0.05
//!
//! [pi]
//! kind = "gaussian"        # "gaussian", "grid" or "atom"
//! mean = 2.0
//! cov_scale = 1.0
//! size = 20000
//!
//! [network]                # random setting-B network
//! edge_prob = 0.8
//! nominal = 2.0
//! society = 2.0
//! shift_fraction = 0.9
//!
//! [table]                  # setting-A boundary tables
//! spacing = 0.75
//! radius = 6.0
//!
//! [measure]                # clearing / score / ear / backtest
//! risk = "var"
//! level = 0.05
//! shift = 0.0
//! aggregation = "lambda1"  # "sum", "lambda1" or "lambda2"
//! beta = 0.75
//!
//! [clearing]               # explicit network for "lambda2" and `clearing`
//! liabilities = [[0.0, 2.0], [0.0, 0.0]]
//! society = [2.0, 2.0]
//!
//! [data]
//! observations = "obs.csv"
//! allocations = "k.csv"
//! endowments = "e.csv"
//! forecast_a = "draws_a.csv"
//! forecast_b = "draws_b.csv"
//! predictive = "draws.csv"
//!
//! [ear]
//! w = [1.0, 1.0]
//! extent = 3.0
//! resolution = 31
//! tol = 1e-6
//! check = [0.5, 0.5]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sysrisk_core::simharness::{NetworkParams, PiSpec, RiskSpec, ScenarioConfig, Setting, TableSpec};
use sysrisk_core::{Aggregation, LiabilityNetwork, RiskKind, ScalarRiskMeasure, SystemicMeasure};

use crate::{Error, Result};

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub risk: Vec<RiskSection>,
    pub pi: Option<PiSection>,
    pub network: Option<NetworkSection>,
    pub table: Option<TableSection>,
    pub measure: Option<MeasureSection>,
    pub clearing: Option<ClearingSection>,
    #[serde(default)]
    pub data: DataSection,
    pub ear: Option<EarSection>,
    /// Directory that relative data paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub setting: Option<String>,
    pub seed: Option<u64>,
    pub d: Option<usize>,
    pub periods: Option<usize>,
    pub replications: Option<usize>,
    pub mu_corr: Option<f64>,
    pub beta: Option<f64>,
    pub level: Option<f64>,
    pub forecast_draws: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RiskSection {
    pub kind: String,
    pub level: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PiSection {
    pub kind: String,
    pub mean: Option<f64>,
    pub cov_scale: Option<f64>,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub resolution: Option<usize>,
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub edge_prob: Option<f64>,
    pub nominal: Option<f64>,
    pub society: Option<f64>,
    pub shift_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub spacing: Option<f64>,
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub risk: String,
    pub level: f64,
    #[serde(default)]
    pub shift: f64,
    pub aggregation: String,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClearingSection {
    pub liabilities: Vec<Vec<f64>>,
    pub society: Vec<f64>,
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub observations: Option<PathBuf>,
    pub allocations: Option<PathBuf>,
    pub endowments: Option<PathBuf>,
    pub forecast_a: Option<PathBuf>,
    pub forecast_b: Option<PathBuf>,
    pub predictive: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EarSection {
    pub w: Vec<f64>,
    pub extent: f64,
    pub resolution: usize,
    #[serde(default = "default_ear_tol")]
    pub tol: f64,
    pub check: Option<Vec<f64>>,
    pub probe_shifts: Option<Vec<f64>>,
}

fn default_ear_tol() -> f64 {
    1e-6
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

pub fn parse_risk_kind(tag: &str) -> Result<RiskKind> {
    RiskKind::from_tag(tag).ok_or_else(|| Error::Config(format!("unknown risk kind {tag:?} (expected var, evar or es)")))
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    /// Resolve a data path relative to the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Required data path `field` of `[data]`.
    pub fn data_path(&self, field: &str) -> Result<PathBuf> {
        let d = &self.data;
        let p = match field {
            "observations" => &d.observations,
            "allocations" => &d.allocations,
            "endowments" => &d.endowments,
            "forecast_a" => &d.forecast_a,
            "forecast_b" => &d.forecast_b,
            "predictive" => &d.predictive,
            _ => &None,
        };
        p.as_deref()
            .map(|p| self.resolve(p))
            .ok_or_else(|| Error::Config(format!("missing field data.{field}")))
    }

    /// Experiment config on top of `preset`, validated.
    pub fn scenario(&self, preset: ScenarioConfig) -> Result<ScenarioConfig> {
        let mut cfg = preset;
        let x = &self.experiment;
        if let Some(s) = &x.setting {
            let setting = match s.as_str() {
                "A" | "a" => Setting::A,
                "B" | "b" => Setting::B,
                other => return Err(Error::Config(format!("experiment.setting: unknown setting {other:?}"))),
            };
            if setting != cfg.setting {
                let keep = cfg.clone();
                cfg = match setting {
                    Setting::A => ScenarioConfig::setting_a(),
                    Setting::B => ScenarioConfig::setting_b(),
                };
                cfg.seed = keep.seed;
            }
        }
        if let Some(v) = x.seed {
            cfg.seed = v;
        }
        if let Some(v) = x.d {
            cfg.d = v;
        }
        if let Some(v) = x.periods {
            cfg.periods = v;
        }
        if let Some(v) = x.replications {
            cfg.replications = v;
        }
        if let Some(v) = x.mu_corr {
            cfg.mu_corr = v;
        }
        if let Some(v) = x.beta {
            cfg.beta = v;
        }
        if let Some(v) = x.level {
            cfg.level = v;
        }
        if let Some(v) = x.forecast_draws {
            cfg.forecast_draws = v;
        }
        if !self.risk.is_empty() {
            cfg.risks = self
                .risk
                .iter()
                .map(|r| Ok(RiskSpec { kind: parse_risk_kind(&r.kind)?, level: r.level }))
                .collect::<Result<Vec<_>>>()?;
        }
        if let Some(p) = &self.pi {
            cfg.pi = p.spec(&cfg.pi)?;
        }
        if let Some(n) = &self.network {
            let base = cfg.network;
            cfg.network = NetworkParams {
                edge_prob: n.edge_prob.unwrap_or(base.edge_prob),
                nominal: n.nominal.unwrap_or(base.nominal),
                society: n.society.unwrap_or(base.society),
                shift_fraction: n.shift_fraction.unwrap_or(base.shift_fraction),
            };
        }
        if let Some(t) = &self.table {
            cfg.table = TableSpec {
                spacing: t.spacing.unwrap_or(cfg.table.spacing),
                radius: t.radius.unwrap_or(cfg.table.radius),
            };
        }
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    /// Scoring measure of the required `[pi]` section.
    pub fn pi_spec(&self) -> Result<PiSpec> {
        let p = self.pi.as_ref().ok_or_else(|| Error::Config("missing section [pi]".into()))?;
        p.spec(&ScenarioConfig::setting_a().pi)
    }

    /// Systemic measure of `[measure]` (with `[clearing]` for `lambda2`).
    pub fn measure(&self) -> Result<SystemicMeasure> {
        let m = self.measure.as_ref().ok_or_else(|| Error::Config("missing section [measure]".into()))?;
        let rho = ScalarRiskMeasure::new(parse_risk_kind(&m.risk)?, m.level, m.shift)
            .map_err(|e| Error::Config(format!("measure: {e}")))?;
        let lambda = match m.aggregation.as_str() {
            "sum" => Aggregation::Sum,
            "lambda1" => Aggregation::weighted_pos_neg(m.beta.unwrap_or(0.75))
                .map_err(|e| Error::Config(format!("measure.beta: {e}")))?,
            "lambda2" => Aggregation::eisenberg_noe(self.network()?),
            other => {
                return Err(Error::Config(format!(
                    "measure.aggregation: unknown aggregation {other:?} (expected sum, lambda1 or lambda2)"
                )))
            }
        };
        Ok(SystemicMeasure::new(rho, lambda))
    }

    /// Explicit liability network of `[clearing]`.
    pub fn network(&self) -> Result<LiabilityNetwork> {
        let c = self.clearing.as_ref().ok_or_else(|| Error::Config("missing section [clearing]".into()))?;
        let d = c.society.len();
        if let Some((i, r)) = c.liabilities.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Config(format!("clearing.liabilities: row {} has {} entries, expected {d}", i + 1, r.len())));
        }
        if c.liabilities.len() != d {
            return Err(Error::Config(format!("clearing.liabilities: {} rows, expected {d}", c.liabilities.len())));
        }
        let flat = c.liabilities.iter().flatten().copied().collect();
        let net = LiabilityNetwork::new(d, flat, c.society.clone()).map_err(|e| Error::Config(format!("clearing: {e}")))?;
        Ok(match c.max_iterations {
            Some(n) => net.with_max_iterations(n),
            None => net,
        })
    }
}

impl PiSection {
    fn spec(&self, base: &PiSpec) -> Result<PiSpec> {
        let need = |v: Option<f64>, f: &str| v.ok_or_else(|| Error::Config(format!("pi.{f} is required")));
        Ok(match self.kind.as_str() {
            "gaussian" => {
                let (m0, c0, n0) = match base {
                    PiSpec::Gaussian { mean, cov_scale, size, .. } => (*mean, *cov_scale, *size),
                    _ => (2.0, 1.0, 20_000),
                };
                PiSpec::Gaussian {
                    mean: self.mean.unwrap_or(m0),
                    cov_scale: self.cov_scale.unwrap_or(c0),
                    size: self.size.unwrap_or(n0),
                    seed: self.seed,
                }
            }
            "grid" => PiSpec::Grid {
                lo: need(self.lo, "lo")?,
                hi: need(self.hi, "hi")?,
                resolution: self.resolution.ok_or_else(|| Error::Config("pi.resolution is required".into()))?,
            },
            "atom" => PiSpec::Atom(self.point.clone().ok_or_else(|| Error::Config("pi.point is required".into()))?),
            other => return Err(Error::Config(format!("pi.kind: unknown kind {other:?} (expected gaussian, grid or atom)"))),
        })
    }
}
