use serde::{Deserialize, Serialize};

use super::cells::{Cell, CellKey};
use crate::error::{Error, Result};
use crate::numeric::norm;

/// A cell and profit interval isolating a single type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub key: CellKey,
    pub centroid: Vec<f64>,
    pub interval: [f64; 2],
    /// Number of clusters above the anchored one in its cell; the anchored
    /// type is `d_e - rank_from_top`.
    pub rank_from_top: usize,
    /// Smallest gap to a neighbouring cluster (infinite if none).
    pub isolation: f64,
    pub count: usize,
}

#[derive(Clone, Debug)]
struct Cluster {
    lo: f64,
    hi: f64,
    count: usize,
}

/// Splits sorted values into maximal runs whose consecutive gaps are at most `k`.
fn clusters(sorted: &[f64], k: f64) -> Vec<Cluster> {
    let mut out: Vec<Cluster> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some(c) if v - c.hi <= k => {
                c.hi = v;
                c.count += 1;
            }
            _ => out.push(Cluster {
                lo: v,
                hi: v,
                count: 1,
            }),
        }
    }
    out
}

/// Scans cells for a cluster of width at most `k` separated from every other
/// cluster in its cell by gaps larger than `k`.
///
/// Candidates with at least `min_count` observations win over smaller ones;
/// among those, wider isolation and then larger observables are preferred.
pub fn find_separated_cell(cells: &[Cell], k: f64, min_count: usize) -> Result<Anchor> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::arg("noise width must be finite and nonnegative"));
    }
    if cells.iter().all(Cell::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let mut best: Option<Anchor> = None;
    let better = |a: &Anchor, b: &Anchor| {
        let ea = a.count >= min_count;
        let eb = b.count >= min_count;
        if ea != eb {
            return ea;
        }
        if a.isolation != b.isolation {
            return a.isolation > b.isolation;
        }
        norm(&a.centroid) > norm(&b.centroid)
    };
    for cell in cells {
        let mut sorted = cell.profits.clone();
        sorted.sort_by(f64::total_cmp);
        let cl = clusters(&sorted, k);
        let m = cl.len();
        for (i, c) in cl.iter().enumerate() {
            if c.hi - c.lo > k {
                continue;
            }
            let below = if i > 0 { c.lo - cl[i - 1].hi } else { f64::INFINITY };
            let above = if i + 1 < m { cl[i + 1].lo - c.hi } else { f64::INFINITY };
            let cand = Anchor {
                key: cell.key.clone(),
                centroid: cell.centroid.clone(),
                interval: [c.hi - k, c.lo + k],
                rank_from_top: m - 1 - i,
                isolation: below.min(above),
                count: c.count,
            };
            if best.as_ref().is_none_or(|b| better(&cand, b)) {
                best = Some(cand);
            }
        }
    }
    best.ok_or_else(|| {
        Error::Identification(format!(
            "no cell contains a cluster separated by more than K = {k}"
        ))
    })
}

/// Tabulated distribution of the measurement error, stored as quantiles at
/// equally spaced probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCdf {
    pub quantiles: Vec<f64>,
}

impl NoiseCdf {
    pub const TABLE_SIZE: usize = 401;

    /// Centered empirical quantiles of `residuals`.
    pub fn from_residuals(residuals: &[f64]) -> Result<Self> {
        if residuals.is_empty() {
            return Err(Error::InsufficientData { needed: 1, found: 0 });
        }
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        let mut r: Vec<f64> = residuals.iter().map(|v| v - mean).collect();
        r.sort_by(f64::total_cmp);
        let n = r.len();
        let m = Self::TABLE_SIZE - 1;
        let quantiles = (0..=m)
            .map(|i| {
                let pos = i as f64 / m as f64 * (n - 1) as f64;
                let j = pos.floor() as usize;
                let t = pos - j as f64;
                if j + 1 < n {
                    r[j] + t * (r[j + 1] - r[j])
                } else {
                    r[n - 1]
                }
            })
            .collect();
        Ok(Self { quantiles })
    }

    /// Point mass at zero.
    pub fn degenerate() -> Self {
        Self {
            quantiles: vec![0.0; Self::TABLE_SIZE],
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let q = &self.quantiles;
        let m = (q.len() - 1) as f64;
        if x < q[0] {
            return 0.0;
        }
        if x >= q[q.len() - 1] {
            return 1.0;
        }
        let i = q.partition_point(|v| *v <= x) - 1;
        let (a, b) = (q[i], q[i + 1]);
        let t = if b > a { (x - a) / (b - a) } else { 1.0 };
        (i as f64 + t) / m
    }

    pub fn support(&self) -> (f64, f64) {
        (self.quantiles[0], self.quantiles[self.quantiles.len() - 1])
    }

    pub fn std_dev(&self) -> f64 {
        let n = self.quantiles.len() as f64;
        (self.quantiles.iter().map(|q| q * q).sum::<f64>() / n).sqrt()
    }

    /// `E[exp(t * eta)]` by averaging over the quantile table.
    pub fn mgf(&self, t: f64) -> f64 {
        let q = &self.quantiles;
        // trapezoid in probability
        let m = (q.len() - 1) as f64;
        let inner: f64 = q[1..q.len() - 1].iter().map(|v| (t * v).exp()).sum();
        ((t * q[0]).exp() / 2.0 + inner + (t * q[q.len() - 1]).exp() / 2.0) / m
    }
}

/// Mean of the anchor cell's profits inside the anchor interval and the
/// centered error distribution around it.
pub fn estimate_noise_cdf(anchor: &Anchor, cell: &Cell, min_count: usize) -> Result<(NoiseCdf, f64)> {
    let [a, b] = anchor.interval;
    let inside: Vec<f64> = cell
        .profits
        .iter()
        .copied()
        .filter(|v| *v >= a && *v <= b)
        .collect();
    if inside.len() < min_count.max(1) {
        return Err(Error::InsufficientData {
            needed: min_count.max(1),
            found: inside.len(),
        });
    }
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    let cdf = NoiseCdf::from_residuals(&inside)?;
    Ok((cdf, mean))
}
