//! Recovery of discrete-type restricted profits from noisy profit data.
//!
//! The pipeline buckets observables into cells, finds a cell where one type
//! is isolated from the rest by more than the noise width, learns the noise
//! law there, deconvolves every cell into finitely many atoms and assigns
//! atoms to types from the top down.

mod anchor;
mod cells;
mod deconvolve;

pub use anchor::{estimate_noise_cdf, find_separated_cell, Anchor, NoiseCdf};
pub use cells::{bucket, Bucketing, Cell, CellKey};
pub use deconvolve::{deconvolve_atoms, AtomFit, AtomSet, DeconvolveOptions};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::technology::Dataset;

pub const PROFIT_TABLE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyConfig {
    /// Width `K` of the noise support.
    pub noise_width: f64,
    pub bucketing: Bucketing,
    /// Minimum observations inside the anchor interval.
    pub min_anchor_count: usize,
    /// Largest atom count tried per cell.
    pub max_types: usize,
    /// Known number of types; estimated from the cells when absent.
    pub num_types: Option<usize>,
    pub deconvolve: DeconvolveOptions,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            noise_width: 0.0,
            bucketing: Bucketing::default(),
            min_anchor_count: 200,
            max_types: 6,
            num_types: None,
            deconvolve: DeconvolveOptions::default(),
        }
    }
}

/// A fitted cell ready for type assignment.
#[derive(Clone, Debug)]
pub struct CellFit {
    pub key: CellKey,
    pub centroid: Vec<f64>,
    pub diameter: Vec<f64>,
    pub is_price: Vec<bool>,
    pub fit: AtomFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub e: usize,
    pub value: f64,
    /// Noise standard deviation over the square root of the atom's count.
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellProfits {
    pub key: CellKey,
    pub observables: Vec<f64>,
    pub diameter: Vec<f64>,
    pub is_price: Vec<bool>,
    pub n: usize,
    pub assignments: Vec<Assignment>,
    /// Types below this index are not identified in the cell.
    pub unidentified_below: usize,
    pub fit_error: f64,
    pub mgf_consistent: bool,
}

impl CellProfits {
    pub fn value(&self, e: usize) -> Option<f64> {
        self.assignments.iter().find(|a| a.e == e).map(|a| a.value)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnchorSummary {
    pub key: CellKey,
    pub observables: Vec<f64>,
    pub interval: [f64; 2],
    pub e_star: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub key: CellKey,
    pub n: usize,
    pub reason: String,
}

/// Identified profits per cell and type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitTable {
    pub version: u32,
    pub num_types: usize,
    pub anchor: AnchorSummary,
    pub noise_cdf: NoiseCdf,
    pub cells: Vec<CellProfits>,
    #[serde(default)]
    pub skipped: Vec<SkippedCell>,
}

impl ProfitTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        if t.version != PROFIT_TABLE_VERSION {
            return Err(Error::Schema(format!("unsupported profit table version {}", t.version)));
        }
        Ok(t)
    }

    /// Cell whose observables are closest to `obs`.
    pub fn nearest_cell(&self, obs: &[f64]) -> Option<&CellProfits> {
        self.cells.iter().min_by(|a, b| {
            let da: f64 = a.observables.iter().zip(obs).map(|(u, v)| (u - v).powi(2)).sum();
            let db: f64 = b.observables.iter().zip(obs).map(|(u, v)| (u - v).powi(2)).sum();
            da.total_cmp(&db)
        })
    }
}

/// Default type count: the largest atom count among cells whose fit error
/// is at most the median.
fn default_num_types(fits: &[CellFit]) -> usize {
    let mut errs: Vec<f64> = fits.iter().map(|f| f.fit.fit_error).collect();
    errs.sort_by(f64::total_cmp);
    let median = errs[(errs.len() - 1) / 2];
    fits.iter()
        .filter(|f| f.fit.fit_error <= median)
        .map(|f| f.fit.atoms.len())
        .max()
        .unwrap_or(1)
}

/// Assigns atoms to types from the top: the largest atom belongs to `d_e`.
/// Returns the type count used and the per-cell assignments.
pub fn rank_and_assign(
    fits: &[CellFit],
    num_types: Option<usize>,
    noise_sd: f64,
) -> Result<(usize, Vec<CellProfits>)> {
    if fits.is_empty() {
        return Ok((num_types.unwrap_or(0), Vec::new()));
    }
    let d_e = num_types.unwrap_or_else(|| default_num_types(fits));
    let cells = fits
        .iter()
        .map(|f| {
            let m = f.fit.atoms.len();
            if m > d_e {
                return Err(Error::Inconsistency(format!(
                    "cell {:?} has {m} atoms but only {d_e} types",
                    f.key
                )));
            }
            let first = d_e - m + 1;
            let assignments = f
                .fit
                .atoms
                .atoms
                .iter()
                .zip(&f.fit.atoms.weights)
                .enumerate()
                .map(|(i, (a, w))| Assignment {
                    e: first + i,
                    value: *a,
                    stderr: noise_sd / (w * f.fit.n as f64).sqrt(),
                })
                .collect();
            Ok(CellProfits {
                key: f.key.clone(),
                observables: f.centroid.clone(),
                diameter: f.diameter.clone(),
                is_price: f.is_price.clone(),
                n: f.fit.n,
                assignments,
                unidentified_below: first,
                fit_error: f.fit.fit_error,
                mgf_consistent: f.fit.mgf_consistent,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((d_e, cells))
}

/// Runs the full identification pipeline on a dataset.
pub fn identify_profits(data: &Dataset, cfg: &IdentifyConfig) -> Result<ProfitTable> {
    let cells = bucket(data, &cfg.bucketing)?;
    let anchor = find_separated_cell(&cells, cfg.noise_width, cfg.min_anchor_count)?;
    let anchor_cell = cells
        .iter()
        .find(|c| c.key == anchor.key)
        .expect("anchor comes from the cell list");
    let (noise_cdf, anchor_value) = estimate_noise_cdf(&anchor, anchor_cell, cfg.min_anchor_count)?;

    let results: Vec<std::result::Result<CellFit, SkippedCell>> = cells
        .par_iter()
        .map(|c| {
            deconvolve_atoms(&c.profits, &noise_cdf, cfg.max_types, &cfg.deconvolve)
                .map(|fit| CellFit {
                    key: c.key.clone(),
                    centroid: c.centroid.clone(),
                    diameter: c.diameter.clone(),
                    is_price: c.is_price.clone(),
                    fit,
                })
                .map_err(|e| SkippedCell {
                    key: c.key.clone(),
                    n: c.len(),
                    reason: e.to_string(),
                })
        })
        .collect();
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(f) => fits.push(f),
            Err(s) => skipped.push(s),
        }
    }
    if fits.is_empty() {
        return Err(Error::Deconvolution("no cell could be deconvolved".into()));
    }
    let (d_e, profits) = rank_and_assign(&fits, cfg.num_types, noise_cdf.std_dev())?;
    if anchor.rank_from_top >= d_e {
        return Err(Error::Inconsistency(format!(
            "anchor sits {} clusters below the top but there are only {d_e} types",
            anchor.rank_from_top
        )));
    }
    Ok(ProfitTable {
        version: PROFIT_TABLE_VERSION,
        num_types: d_e,
        anchor: AnchorSummary {
            key: anchor.key,
            observables: anchor.centroid,
            interval: anchor.interval,
            e_star: d_e - anchor.rank_from_top,
            value: anchor_value,
        },
        noise_cdf,
        cells: profits,
        skipped,
    })
}

/// Pair of cells whose price observables are positive multiples of each other.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityCheck {
    pub cells: [CellKey; 2],
    pub scale: f64,
    pub max_relative_deviation: f64,
}

/// Compares identified profits across cells on a common ray: profits must
/// scale with the price vector.
pub fn homogeneity_audit(table: &ProfitTable) -> Vec<HomogeneityCheck> {
    let mut out = Vec::new();
    for (i, a) in table.cells.iter().enumerate() {
        for b in &table.cells[i + 1..] {
            let mut scale = None;
            let mut parallel = true;
            for ((u, v), price) in a.observables.iter().zip(&b.observables).zip(&a.is_price) {
                if !price {
                    parallel &= (u - v).abs() <= 1e-12 * (1.0 + u.abs());
                    continue;
                }
                let s = v / u;
                match scale {
                    None => scale = Some(s),
                    Some(t) => parallel &= ((s - t) / t).abs() <= 1e-9,
                }
            }
            let Some(s) = scale.filter(|s| parallel && (s - 1.0).abs() > 1e-9) else {
                continue;
            };
            let dev = a
                .assignments
                .iter()
                .filter_map(|x| b.value(x.e).map(|y| ((y - s * x.value) / (s * x.value)).abs()))
                .fold(0.0, f64::max);
            out.push(HomogeneityCheck {
                cells: [a.key.clone(), b.key.clone()],
                scale: s,
                max_relative_deviation: dev,
            });
        }
    }
    out
}
