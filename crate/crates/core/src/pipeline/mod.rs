//! Config-driven runs chaining simulation, identification, proxy recovery,
//! bounds, estimation and the duality check.
//!
//! Every stage writes one artifact into the output directory. Artifacts are
//! written to a `.partial` file first and renamed once complete, and a
//! manifest records hashes and timings.

mod config;
mod report;

pub use config::{
    load_section, BoundsStageConfig, DualityStageConfig, EstimateStageConfig, IdentifyStageConfig, PbarSpec,
    PipelineConfig, ProxySource, ProxyStageConfig, SimulateConfig, Stage,
};
pub use report::{golden_table, render_report, GoldenRow, ReportInputs};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::counterfactual::{bounds_report, BoundsReport, ProfitData, Question};
use crate::error::{Error, Result};
use crate::estimation::{duality_check, fit_diewert, DiewertFit, DualityReport, FitOptions};
use crate::profit_id::{identify_profits, IdentifyConfig, ProfitTable};
use crate::proxy::{recover_proxies, ProfitSurface, ProxyConfig, ProxyModel, TabulatedSurface};
use crate::technology::{generate_dataset, profit_oracle, Dataset, TechnologySpec};

pub const ARTIFACT_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

/// Versioned wrapper for artifacts without a version field of their own.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub version: u32,
    pub data: T,
}

impl<T: Serialize + DeserializeOwned> Artifact<T> {
    pub fn new(data: T) -> Self {
        Self {
            version: ARTIFACT_VERSION,
            data,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let a: Self = serde_json::from_str(text)?;
        if a.version != ARTIFACT_VERSION {
            return Err(Error::Schema(format!("unsupported artifact version {}", a.version)));
        }
        Ok(a)
    }
}

/// Fitted coefficients together with the stratum they were fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub restricted: Vec<f64>,
    pub fit: DiewertFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeDuality {
    #[serde(rename = "type")]
    pub e: usize,
    pub report: DualityReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub artifact: String,
    pub sha256: String,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub crate_version: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Seconds since the Unix epoch at the start of the run.
    pub timestamp: u64,
    pub stages: Vec<StageRecord>,
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub failure: Option<StageFailure>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `contents` next to `path` with a `.partial` suffix, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let partial = partial_path(path);
    fs::write(&partial, contents)?;
    fs::rename(&partial, path)?;
    Ok(())
}

fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

pub fn simulate(cfg: &SimulateConfig) -> Result<Dataset> {
    generate_dataset(&cfg.technology, &cfg.market)
}

pub fn identify(data: &Dataset, cfg: &IdentifyConfig) -> Result<ProfitTable> {
    identify_profits(data, cfg)
}

/// Recovers price functions from one type's identified profits or from the
/// aggregate mean profit surface.
pub fn proxies(table: Option<&ProfitTable>, data: Option<&Dataset>, cfg: &ProxyStageConfig) -> Result<ProxyModel> {
    let surface = match cfg.source {
        ProxySource::Profits => {
            let table = table.ok_or_else(|| Error::config("proxy recovery from profits needs a profit table"))?;
            let e = cfg.type_e.unwrap_or(table.num_types);
            TabulatedSurface::from_profit_table(table, e)?
        }
        ProxySource::Aggregate => {
            let data = data.ok_or_else(|| Error::config("aggregate proxy recovery needs a dataset"))?;
            TabulatedSurface::aggregate_mean(data)?
        }
    };
    let grids = cfg.grids.clone().unwrap_or_else(|| surface.axes().to_vec());
    if grids.len() != surface.dim() {
        return Err(Error::Dimension {
            expected: surface.dim(),
            found: grids.len(),
        });
    }
    recover_proxies(
        &surface,
        &ProxyConfig {
            grids,
            anchor: cfg.anchor.clone(),
            rank_anchors: cfg.rank_anchors.clone(),
        },
    )
}

/// Replaces proxy observables by recovered prices so that every cell can
/// enter the counterfactual and estimation stages.
pub fn priced_table(table: &ProfitTable, model: &ProxyModel, num_restricted: usize) -> ProfitTable {
    let mut out = table.clone();
    for c in &mut out.cells {
        if c.observables.len() != num_restricted + model.goods.len() {
            continue;
        }
        let prices = model.prices(&c.observables[num_restricted..]);
        c.observables[num_restricted..].copy_from_slice(&prices);
        for f in &mut c.is_price[num_restricted..] {
            *f = true;
        }
    }
    out
}

/// Profit data of every type identified in the stratum `restricted`.
/// Types with no identified price cells are skipped.
pub fn profit_data(
    table: &ProfitTable,
    restricted: &[f64],
    nonpositive: &[usize],
    model: Option<&ProxyModel>,
) -> Result<Vec<ProfitData>> {
    let priced;
    let table = match model {
        Some(m) => {
            priced = priced_table(table, m, restricted.len());
            &priced
        }
        None => table,
    };
    let mut out = Vec::new();
    for e in 1..=table.num_types {
        match ProfitData::from_table(table, e, restricted) {
            Ok(d) => out.push(d.with_nonpositive(nonpositive.to_vec())?),
            Err(Error::Identification(_)) => continue,
            Err(err) => return Err(err),
        }
    }
    if out.is_empty() {
        return Err(Error::Identification("no type has identified price cells".into()));
    }
    Ok(out)
}

pub fn bounds(data: &[ProfitData], question: &Question) -> Result<Vec<BoundsReport>> {
    bounds_report(data, question)
}

/// Fits every type from 1 up; a type without data is an error because
/// monotonicity links adjacent types.
pub fn estimate(data: &[ProfitData], opts: &FitOptions) -> Result<DiewertFit> {
    for (k, d) in data.iter().enumerate() {
        if d.e != k + 1 {
            return Err(Error::Identification(format!(
                "type {} has no identified profits; estimation needs every type",
                k + 1
            )));
        }
    }
    fit_diewert(data, opts)
}

/// Whether a fitted Diewert function is convex in prices: nonpositive
/// off-diagonal coefficients suffice.
pub fn fit_is_convex(fit: &DiewertFit, e: usize) -> bool {
    let b = &fit.coefficients[e - 1];
    (0..b.len()).all(|s| (0..b.len()).all(|j| s == j || b[s][j] <= 0.0))
}

pub fn duality(
    truth: &TechnologySpec,
    fit: &FitOutput,
    pbar: &PbarSpec,
    oracle_points: usize,
) -> Result<Vec<TypeDuality>> {
    let set = pbar.build()?;
    if set.dim() != fit.fit.dim() || truth.dim() != fit.fit.dim() {
        return Err(Error::Dimension {
            expected: fit.fit.dim(),
            found: set.dim(),
        });
    }
    let y_r = (!fit.restricted.is_empty()).then_some(fit.restricted.as_slice());
    let n = fit.fit.num_types().min(truth.num_types());
    (1..=n)
        .map(|e| {
            // Prices on the set are positive, so the oracle cannot fail there.
            let pi_true = |p: &[f64]| profit_oracle(truth, e, p, y_r).map_or(f64::NAN, |r| r.0);
            let pi_hat = |p: &[f64]| fit.fit.profit(e, p);
            let report = duality_check(pi_true, pi_hat, &set, fit_is_convex(&fit.fit, e), oracle_points)?;
            Ok(TypeDuality { e, report })
        })
        .collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

pub fn read_profit_table(path: &Path) -> Result<ProfitTable> {
    ProfitTable::from_json(&fs::read_to_string(path)?)
}

pub fn read_fit(path: &Path) -> Result<FitOutput> {
    Ok(Artifact::<FitOutput>::from_json(&fs::read_to_string(path)?)?.data)
}

#[derive(Default)]
struct State {
    dataset: Option<Dataset>,
    table: Option<ProfitTable>,
    proxies: Option<ProxyModel>,
    bounds: Option<Vec<BoundsReport>>,
    fit: Option<FitOutput>,
    duality: Option<Vec<TypeDuality>>,
}

impl State {
    fn table(&mut self, path: Option<&PathBuf>) -> Result<&ProfitTable> {
        if self.table.is_none() {
            let path = path.ok_or_else(|| Error::config("no profit table available"))?;
            self.table = Some(read_profit_table(path)?);
        }
        Ok(self.table.as_ref().expect("set above"))
    }
}

fn run_stage(cfg: &PipelineConfig, stage: Stage, st: &mut State) -> Result<Vec<u8>> {
    match stage {
        Stage::Simulate => {
            let sim = cfg.simulate.as_ref().expect("validated");
            let data = simulate(sim)?;
            let mut buf = Vec::new();
            data.write_csv(&mut buf, sim.debug_columns)?;
            st.dataset = Some(data);
            Ok(buf)
        }
        Stage::Identify => {
            let c = cfg.identify.clone().unwrap_or_default();
            if st.dataset.is_none() {
                let path = c.dataset.as_ref().expect("validated");
                st.dataset = Some(Dataset::read_csv(fs::File::open(path)?)?);
            }
            let table = identify(st.dataset.as_ref().expect("set above"), &c.identify)?;
            let json = table.to_json()?;
            st.table = Some(table);
            Ok(json.into_bytes())
        }
        Stage::Proxies => {
            let c = cfg.proxies.as_ref().expect("validated");
            if c.source == ProxySource::Profits {
                st.table(c.profits.as_ref())?;
            }
            if c.source == ProxySource::Aggregate && st.dataset.is_none() {
                let path = cfg.identify.as_ref().and_then(|i| i.dataset.as_ref()).expect("validated");
                st.dataset = Some(Dataset::read_csv(fs::File::open(path)?)?);
            }
            let model = proxies(st.table.as_ref(), st.dataset.as_ref(), c)?;
            let json = model.to_json()?;
            st.proxies = Some(model);
            Ok(json.into_bytes())
        }
        Stage::Bounds => {
            let c = cfg.bounds.as_ref().expect("validated");
            let table = st.table(c.profits.as_ref())?.clone();
            let data = profit_data(&table, &c.restricted, &c.nonpositive, st.proxies.as_ref())?;
            let reports = bounds(&data, &c.question)?;
            let json = Artifact::new(reports.clone()).to_json()?;
            st.bounds = Some(reports);
            Ok(json.into_bytes())
        }
        Stage::Estimate => {
            let c = cfg.estimate.clone().unwrap_or_default();
            let table = st.table(c.profits.as_ref())?.clone();
            let data = profit_data(&table, &c.restricted, &[], st.proxies.as_ref())?;
            let fit = FitOutput {
                restricted: c.restricted.clone(),
                fit: estimate(&data, &c.fit)?,
            };
            let json = Artifact::new(fit.clone()).to_json()?;
            st.fit = Some(fit);
            Ok(json.into_bytes())
        }
        Stage::Duality => {
            let c = cfg.duality.as_ref().expect("validated");
            if st.fit.is_none() {
                st.fit = Some(read_fit(c.fit.as_ref().expect("validated"))?);
            }
            let truth = c
                .truth
                .as_ref()
                .or(cfg.simulate.as_ref().map(|s| &s.technology))
                .expect("validated");
            let reports = duality(truth, st.fit.as_ref().expect("set above"), &c.pbar, c.oracle_points)?;
            let json = Artifact::new(reports.clone()).to_json()?;
            st.duality = Some(reports);
            Ok(json.into_bytes())
        }
    }
}

/// Runs the configured stages in order. On failure the manifest is left as
/// `manifest.json.partial` with the failing stage recorded.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output_dir)?;
    let mut manifest = Manifest {
        version: MANIFEST_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: sha256_hex(&serde_json::to_vec(cfg)?),
        seed: cfg.seed,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        stages: Vec::new(),
        report: None,
        failure: None,
    };
    let manifest_path = cfg.output_dir.join("manifest.json");
    let manifest_partial = partial_path(&manifest_path);
    let mut st = State::default();
    for &stage in &cfg.stages {
        let start = Instant::now();
        let result = run_stage(cfg, stage, &mut st).and_then(|bytes| {
            write_atomic(&cfg.output_dir.join(stage.artifact()), &bytes)?;
            Ok(bytes)
        });
        match result {
            Ok(bytes) => manifest.stages.push(StageRecord {
                stage,
                artifact: stage.artifact().to_string(),
                sha256: sha256_hex(&bytes),
                wall_ms: start.elapsed().as_millis() as u64,
            }),
            Err(err) => {
                let err = err.in_stage(stage.name());
                manifest.failure = Some(StageFailure {
                    stage,
                    error: err.to_string(),
                });
                fs::write(&manifest_partial, serde_json::to_string_pretty(&manifest)?)?;
                return Err(err);
            }
        }
        fs::write(&manifest_partial, serde_json::to_string_pretty(&manifest)?)?;
    }
    let inputs = ReportInputs {
        table: st.table,
        proxies: st.proxies,
        bounds: st.bounds,
        fit: st.fit,
        duality: st.duality,
    };
    let text = render_report(&inputs);
    write_atomic(&cfg.output_dir.join("report.txt"), text.as_bytes())?;
    manifest.report = Some("report.txt".into());
    fs::write(&manifest_partial, serde_json::to_string_pretty(&manifest)?)?;
    fs::rename(&manifest_partial, &manifest_path)?;
    Ok(manifest)
}

impl ReportInputs {
    /// Loads whichever artifacts exist in `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Ok(Self {
            table: opt("profits.json").map(|p| read_profit_table(&p)).transpose()?,
            proxies: opt("proxies.json")
                .map(|p| ProxyModel::from_json(&fs::read_to_string(p)?))
                .transpose()?,
            bounds: opt("bounds.json")
                .map(|p| read_json::<Artifact<Vec<BoundsReport>>>(&p).map(|a| a.data))
                .transpose()?,
            fit: opt("fit.json").map(|p| read_fit(&p)).transpose()?,
            duality: opt("duality.json")
                .map(|p| read_json::<Artifact<Vec<TypeDuality>>>(&p).map(|a| a.data))
                .transpose()?,
        })
    }
}
