use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::technology::Dataset;

/// How observables `(y_restricted, x)` are grouped into conditioning cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bucketing {
    /// One cell per distinct observable vector.
    Exact,
    /// Equal-count buckets per coordinate. Coordinates with at most
    /// `per_dim` distinct values get one bucket per value.
    Quantile { per_dim: usize },
}

impl Default for Bucketing {
    fn default() -> Self {
        Bucketing::Quantile { per_dim: 10 }
    }
}

/// Bucket indices of one cell, ordered restricted quantities first.
pub type CellKey = Vec<usize>;

/// The noisy profits that fell into one cell, with a summary of its extent.
#[derive(Clone, Debug)]
pub struct Cell {
    pub key: CellKey,
    /// Coordinate-wise mean of the observables in the cell.
    pub centroid: Vec<f64>,
    /// Coordinate-wise range of the observables in the cell.
    pub diameter: Vec<f64>,
    pub is_price: Vec<bool>,
    pub profits: Vec<f64>,
}

impl Cell {
    pub fn len(&self) -> usize {
        self.profits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profits.is_empty()
    }
}

fn observables(r: &crate::technology::ObservationRecord) -> Vec<f64> {
    r.y_restricted.iter().chain(&r.x).copied().collect()
}

/// Upper edges of the buckets for one coordinate.
fn cut_points(values: &mut [f64], per_dim: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.dedup();
    if distinct.len() <= per_dim {
        return distinct;
    }
    let n = values.len();
    let mut cuts: Vec<f64> = (1..per_dim)
        .map(|k| values[(k * n / per_dim).min(n - 1)])
        .collect();
    cuts.push(values[n - 1]);
    cuts.dedup();
    cuts
}

/// Groups the dataset into cells; the result is ordered by key.
pub fn bucket(data: &Dataset, bucketing: &Bucketing) -> Result<Vec<Cell>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = data.num_restricted + data.num_goods;
    let keys: Vec<CellKey> = match bucketing {
        Bucketing::Exact => {
            let mut ids: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
            let bits: Vec<Vec<u64>> = data
                .records
                .iter()
                .map(|r| observables(r).iter().map(|v| v.to_bits()).collect())
                .collect();
            // order exact cells by their observable values, not by first appearance
            let mut sorted: Vec<(Vec<f64>, &Vec<u64>)> = data
                .records
                .iter()
                .zip(&bits)
                .map(|(r, b)| (observables(r), b))
                .collect();
            sorted.sort_by(|a, b| {
                a.0.iter()
                    .zip(&b.0)
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            for (_, b) in sorted {
                let next = ids.len();
                ids.entry(b.clone()).or_insert(next);
            }
            bits.iter().map(|b| vec![ids[b]]).collect()
        }
        Bucketing::Quantile { per_dim } => {
            if *per_dim == 0 {
                return Err(Error::arg("need at least one bucket per dimension"));
            }
            let cuts: Vec<Vec<f64>> = (0..dim)
                .map(|j| {
                    let mut col: Vec<f64> = data.records.iter().map(|r| observables(r)[j]).collect();
                    cut_points(&mut col, *per_dim)
                })
                .collect();
            data.records
                .iter()
                .map(|r| {
                    observables(r)
                        .iter()
                        .zip(&cuts)
                        .map(|(v, c)| c.partition_point(|edge| edge < v).min(c.len() - 1))
                        .collect()
                })
                .collect()
        }
    };

    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.into_iter().enumerate() {
        groups.entry(k).or_default().push(i);
    }
    Ok(groups
        .into_iter()
        .map(|(key, idx)| {
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            let mut sum = vec![0.0; dim];
            for &i in &idx {
                for (j, v) in observables(&data.records[i]).into_iter().enumerate() {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                    sum[j] += v;
                }
            }
            let first = &data.records[idx[0]];
            let mut is_price = vec![false; data.num_restricted];
            is_price.extend(&first.is_price);
            Cell {
                key,
                centroid: sum.iter().map(|s| s / idx.len() as f64).collect(),
                diameter: lo.iter().zip(&hi).map(|(a, b)| b - a).collect(),
                is_price,
                profits: idx.iter().map(|&i| data.records[i].noisy_profit).collect(),
            }
        })
        .collect())
}
