use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::convex::RestrictedPriceSet;
use crate::counterfactual::Question;
use crate::error::{Error, Result};
use crate::estimation::FitOptions;
use crate::profit_id::IdentifyConfig;
use crate::proxy::ProxyAnchor;
use crate::technology::{MarketConfig, TechnologySpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Simulate,
    Identify,
    Proxies,
    Bounds,
    Estimate,
    Duality,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Identify => "identify",
            Stage::Proxies => "proxies",
            Stage::Bounds => "bounds",
            Stage::Estimate => "estimate",
            Stage::Duality => "duality",
        }
    }

    /// File name of the stage's artifact inside the output directory.
    pub fn artifact(self) -> &'static str {
        match self {
            Stage::Simulate => "dataset.csv",
            Stage::Identify => "profits.json",
            Stage::Proxies => "proxies.json",
            Stage::Bounds => "bounds.json",
            Stage::Estimate => "fit.json",
            Stage::Duality => "duality.json",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub technology: TechnologySpec,
    pub market: MarketConfig,
    /// Also write the true type and prices of each record.
    #[serde(default)]
    pub debug_columns: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentifyStageConfig {
    /// Dataset to read when the run does not simulate one.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(flatten)]
    pub identify: IdentifyConfig,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxySource {
    /// One type's identified profits.
    #[default]
    Profits,
    /// Mean noisy profit at each proxy vector.
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyStageConfig {
    #[serde(default)]
    pub source: ProxySource,
    /// Type whose profits drive the system; defaults to the highest type.
    #[serde(default)]
    pub type_e: Option<usize>,
    pub anchor: ProxyAnchor,
    #[serde(default)]
    pub rank_anchors: Option<Vec<f64>>,
    /// Per-good grids; default to the proxy values present in the data.
    #[serde(default)]
    pub grids: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub profits: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsStageConfig {
    pub question: Question,
    /// Stratum of restricted quantities.
    #[serde(default)]
    pub restricted: Vec<f64>,
    /// Coordinates constrained to be inputs.
    #[serde(default)]
    pub nonpositive: Vec<usize>,
    #[serde(default)]
    pub profits: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateStageConfig {
    #[serde(default)]
    pub restricted: Vec<f64>,
    #[serde(default)]
    pub profits: Option<PathBuf>,
    #[serde(flatten)]
    pub fit: FitOptions,
}

/// Compact price set on which the duality check runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PbarSpec {
    Arc { theta_lo: f64, theta_hi: f64, n: usize },
    RatioBox { lo: f64, hi: f64, n: usize },
}

impl PbarSpec {
    pub fn build(&self) -> Result<RestrictedPriceSet> {
        match self {
            PbarSpec::Arc { theta_lo, theta_hi, n } => RestrictedPriceSet::arc(*theta_lo, *theta_hi, *n),
            PbarSpec::RatioBox { lo, hi, n } => RestrictedPriceSet::ratio_box_3d(*lo, *hi, *n),
        }
    }

    /// Parses `arc:lo:hi:n` or `ratio_box:lo:hi:n`.
    pub fn parse_inline(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::arg(format!("cannot parse price set {s:?}; expected arc:lo:hi:n or ratio_box:lo:hi:n"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        let n: usize = parts[3].parse().map_err(|_| bad())?;
        match parts[0] {
            "arc" => Ok(PbarSpec::Arc {
                theta_lo: lo,
                theta_hi: hi,
                n,
            }),
            "ratio_box" => Ok(PbarSpec::RatioBox { lo, hi, n }),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityStageConfig {
    /// True technology; defaults to the simulated one.
    #[serde(default)]
    pub truth: Option<TechnologySpec>,
    pub pbar: PbarSpec,
    #[serde(default = "default_oracle_points")]
    pub oracle_points: usize,
    #[serde(default)]
    pub fit: Option<PathBuf>,
}

fn default_oracle_points() -> usize {
    2000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
    #[serde(default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub identify: Option<IdentifyStageConfig>,
    #[serde(default)]
    pub proxies: Option<ProxyStageConfig>,
    #[serde(default)]
    pub bounds: Option<BoundsStageConfig>,
    #[serde(default)]
    pub estimate: Option<EstimateStageConfig>,
    #[serde(default)]
    pub duality: Option<DualityStageConfig>,
}

impl PipelineConfig {
    /// Reads a TOML config. The global seed fills in a missing market seed,
    /// and relative paths are resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut value: toml::Table = toml::from_str(text)?;
        let seed = value.get("seed").cloned();
        if let (Some(seed), Some(toml::Value::Table(sim))) = (seed, value.get_mut("simulate")) {
            if let Some(toml::Value::Table(market)) = sim.get_mut("market") {
                market.entry("seed").or_insert(seed);
            }
        }
        let cfg: Self = toml::Value::Table(value).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.identify.as_mut().and_then(|c| c.dataset.as_mut()) {
            fix(p);
        }
        if let Some(p) = self.proxies.as_mut().and_then(|c| c.profits.as_mut()) {
            fix(p);
        }
        if let Some(p) = self.bounds.as_mut().and_then(|c| c.profits.as_mut()) {
            fix(p);
        }
        if let Some(p) = self.estimate.as_mut().and_then(|c| c.profits.as_mut()) {
            fix(p);
        }
        if let Some(p) = self.duality.as_mut().and_then(|c| c.fit.as_mut()) {
            fix(p);
        }
    }

    fn runs_before(&self, provider: Stage, consumer: Stage) -> bool {
        let pos = |s| self.stages.iter().position(|x| *x == s);
        matches!((pos(provider), pos(consumer)), (Some(a), Some(b)) if a < b)
    }

    /// Checks that every stage has its section and its inputs.
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::config("no stages to run"));
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i].contains(s) {
                return Err(Error::config(format!("stage {} listed twice", s.name())));
            }
        }
        let missing = |s: Stage| Error::config(format!("stage {} has no [{}] section", s.name(), s.name()));
        for &s in &self.stages {
            match s {
                Stage::Simulate => {
                    let sim = self.simulate.as_ref().ok_or_else(|| missing(s))?;
                    sim.technology.validate()?;
                    sim.market.validate(
                        sim.technology.num_types(),
                        sim.technology.dim(),
                        sim.technology.num_restricted(),
                    )?;
                }
                Stage::Identify => {
                    let has_path = self.identify.as_ref().is_some_and(|c| c.dataset.is_some());
                    if !has_path && !self.runs_before(Stage::Simulate, s) {
                        return Err(Error::config(
                            "identify needs a dataset: run simulate first or set identify.dataset",
                        ));
                    }
                }
                Stage::Proxies => {
                    let c = self.proxies.as_ref().ok_or_else(|| missing(s))?;
                    let needs = match c.source {
                        ProxySource::Profits => c.profits.is_none() && !self.runs_before(Stage::Identify, s),
                        ProxySource::Aggregate => {
                            !self.runs_before(Stage::Simulate, s)
                                && !self.identify.as_ref().is_some_and(|i| i.dataset.is_some())
                        }
                    };
                    if needs {
                        return Err(Error::config("proxies needs profits: run identify first or set proxies.profits"));
                    }
                }
                Stage::Bounds => {
                    let c = self.bounds.as_ref().ok_or_else(|| missing(s))?;
                    if c.profits.is_none() && !self.runs_before(Stage::Identify, s) {
                        return Err(Error::config("bounds needs profits: run identify first or set bounds.profits"));
                    }
                }
                Stage::Estimate => {
                    let has_path = self.estimate.as_ref().is_some_and(|c| c.profits.is_some());
                    if !has_path && !self.runs_before(Stage::Identify, s) {
                        return Err(Error::config(
                            "estimate needs profits: run identify first or set estimate.profits",
                        ));
                    }
                }
                Stage::Duality => {
                    let c = self.duality.as_ref().ok_or_else(|| missing(s))?;
                    if c.fit.is_none() && !self.runs_before(Stage::Estimate, s) {
                        return Err(Error::config("duality needs a fit: run estimate first or set duality.fit"));
                    }
                    if c.truth.is_none() && self.simulate.is_none() {
                        return Err(Error::config("duality needs a true technology"));
                    }
                    c.pbar.build()?;
                }
            }
        }
        Ok(())
    }
}

/// Reads a TOML or JSON file into `T`. When the file is a full pipeline
/// config, the table named `section` is used.
pub fn load_section<T: DeserializeOwned>(path: &Path, section: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let v = match v.get(section) {
            Some(inner) if v.get("stages").is_some() => inner.clone(),
            _ => v,
        };
        return Ok(serde_json::from_value(v)?);
    }
    let mut table: toml::Table = toml::from_str(&text)?;
    let value = if table.contains_key("stages") {
        table
            .remove(section)
            .ok_or_else(|| Error::config(format!("config has no [{section}] section")))?
    } else {
        toml::Value::Table(table)
    };
    Ok(value.try_into()?)
}
