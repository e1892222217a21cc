use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::anchor::NoiseCdf;
use crate::error::{Error, Result};
use crate::numeric::nelder_mead;

const MERGE_TOL: f64 = 1e-8;
const MAX_EVAL_POINTS: usize = 1000;
const MAX_ATOMS: usize = 10;

/// Finite distribution of profits within a cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSet {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
}

impl AtomSet {
    /// Sorts, merges atoms closer than `1e-8` and drops zero weights.
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() || atoms.is_empty() {
            return Err(Error::arg("atoms and weights must be nonempty and of equal length"));
        }
        let mut pairs: Vec<(f64, f64)> = atoms.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (a, w) in pairs {
            if !(w >= 0.0) || !a.is_finite() {
                return Err(Error::arg("atoms must be finite with nonnegative weights"));
            }
            match out.last_mut() {
                Some(last) if a - last.0 < MERGE_TOL => {
                    let total = last.1 + w;
                    if total > 0.0 {
                        last.0 = (last.0 * last.1 + a * w) / total;
                    }
                    last.1 = total;
                }
                _ => out.push((a, w)),
            }
        }
        out.retain(|p| p.1 > 1e-9);
        let total: f64 = out.iter().map(|p| p.1).sum();
        if out.is_empty() || total <= 0.0 {
            return Err(Error::arg("atom weights sum to zero"));
        }
        Ok(Self {
            atoms: out.iter().map(|p| p.0).collect(),
            weights: out.iter().map(|p| p.1 / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeconvolveOptions {
    pub min_count: usize,
    /// Constant `c` in the atom-count penalty `c * k / sqrt(n)`.
    pub penalty: f64,
    /// Largest acceptable root-mean-square CDF error.
    pub max_error: f64,
    /// Relative tolerance of the moment generating function diagnostic.
    pub mgf_tolerance: f64,
}

impl Default for DeconvolveOptions {
    fn default() -> Self {
        Self {
            min_count: 50,
            penalty: 1.0,
            max_error: 0.05,
            mgf_tolerance: 0.05,
        }
    }
}

/// Result of fitting a discrete mixture to one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomFit {
    pub atoms: AtomSet,
    pub fit_error: f64,
    pub n: usize,
    /// Largest relative gap between the empirical MGF and the fitted one on `t in [-3, 3]`.
    pub mgf_deviation: f64,
    pub mgf_consistent: bool,
}

struct Target {
    points: Vec<f64>,
    ecdf: Vec<f64>,
}

fn target(sorted: &[f64]) -> Target {
    let n = sorted.len();
    let m = n.min(MAX_EVAL_POINTS);
    let points: Vec<f64> = (0..m)
        .map(|i| sorted[if m == 1 { 0 } else { i * (n - 1) / (m - 1) }])
        .collect();
    let ecdf = points
        .iter()
        .map(|x| sorted.partition_point(|v| v <= x) as f64 / n as f64)
        .collect();
    Target { points, ecdf }
}

/// Weights minimizing the CDF residual subject to `w >= 0`, `sum w = 1`,
/// found by checking the KKT system on every support.
fn simplex_weights(atoms: &[f64], noise: &NoiseCdf, t: &Target) -> (Vec<f64>, f64) {
    let k = atoms.len();
    let m = t.points.len();
    let cols: Vec<Vec<f64>> = atoms
        .iter()
        .map(|a| t.points.iter().map(|x| noise.cdf(x - a)).collect())
        .collect();
    let gram = DMatrix::from_fn(k, k, |i, j| {
        cols[i].iter().zip(&cols[j]).map(|(u, v)| u * v).sum::<f64>()
    });
    let rhs: Vec<f64> = cols
        .iter()
        .map(|c| c.iter().zip(&t.ecdf).map(|(u, v)| u * v).sum())
        .collect();
    let ff: f64 = t.ecdf.iter().map(|v| v * v).sum();
    let mut best = (vec![1.0 / k as f64; k], f64::INFINITY);
    for mask in 1u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let s = support.len();
        let mut kkt = DMatrix::<f64>::zeros(s + 1, s + 1);
        let mut b = DVector::<f64>::zeros(s + 1);
        for (a, &i) in support.iter().enumerate() {
            for (c, &j) in support.iter().enumerate() {
                kkt[(a, c)] = 2.0 * gram[(i, j)];
            }
            kkt[(a, s)] = 1.0;
            kkt[(s, a)] = 1.0;
            b[a] = 2.0 * rhs[i];
        }
        b[s] = 1.0;
        let Some(sol) = kkt.lu().solve(&b) else { continue };
        if (0..s).any(|a| !(sol[a] >= -1e-12)) {
            continue;
        }
        let mut w = vec![0.0; k];
        for (a, &i) in support.iter().enumerate() {
            w[i] = sol[a].max(0.0);
        }
        let mut quad = 0.0;
        for i in 0..k {
            for j in 0..k {
                quad += w[i] * w[j] * gram[(i, j)];
            }
        }
        let lin: f64 = w.iter().zip(&rhs).map(|(a, b)| a * b).sum();
        let sse = (quad - 2.0 * lin + ff).max(0.0);
        if sse < best.1 {
            best = (w, sse);
        }
    }
    (best.0, (best.1 / m as f64).sqrt())
}

/// One-dimensional k-means on sorted data, seeded at quantiles.
fn kmeans_1d(sorted: &[f64], k: usize) -> Vec<f64> {
    let n = sorted.len();
    let mut centers: Vec<f64> = (0..k)
        .map(|i| sorted[((2 * i + 1) * n / (2 * k)).min(n - 1)])
        .collect();
    for _ in 0..100 {
        let mut sum = vec![0.0; k];
        let mut cnt = vec![0usize; k];
        for &v in sorted {
            let c = (0..k)
                .min_by(|&a, &b| (v - centers[a]).abs().total_cmp(&(v - centers[b]).abs()))
                .expect("k > 0");
            sum[c] += v;
            cnt[c] += 1;
        }
        let next: Vec<f64> = (0..k)
            .map(|c| if cnt[c] > 0 { sum[c] / cnt[c] as f64 } else { centers[c] })
            .collect();
        let moved = next.iter().zip(&centers).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        centers = next;
        if moved == 0.0 {
            break;
        }
    }
    centers.sort_by(f64::total_cmp);
    centers.dedup();
    centers
}

fn mgf_check(sample: &[f64], atoms: &AtomSet, noise: &NoiseCdf) -> f64 {
    let n = sample.len() as f64;
    let center = sample.iter().sum::<f64>() / n;
    (0..=12)
        .map(|i| {
            let t = -3.0 + 0.5 * i as f64;
            let emp = sample.iter().map(|v| (t * (v - center)).exp()).sum::<f64>() / n;
            let fitted: f64 = atoms
                .atoms
                .iter()
                .zip(&atoms.weights)
                .map(|(a, w)| w * (t * (a - center)).exp())
                .sum();
            (emp / (fitted * noise.mgf(t)) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

/// Fits a discrete mixture convolved with the noise distribution to a cell's
/// empirical CDF, choosing the atom count by penalized fit error.
pub fn deconvolve_atoms(
    sample: &[f64],
    noise: &NoiseCdf,
    max_types: usize,
    opts: &DeconvolveOptions,
) -> Result<AtomFit> {
    let n = sample.len();
    if n < opts.min_count.max(1) {
        return Err(Error::InsufficientData {
            needed: opts.min_count.max(1),
            found: n,
        });
    }
    if max_types == 0 || max_types > MAX_ATOMS {
        return Err(Error::arg(format!("max_types must lie in 1..={MAX_ATOMS}")));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let tgt = target(&sorted);
    let step = noise.std_dev().max(1e-6 * (1.0 + sorted[n - 1].abs().max(sorted[0].abs())));

    let mut best: Option<(f64, AtomSet, f64)> = None;
    for k in 1..=max_types {
        let init = kmeans_1d(&sorted, k);
        if init.len() < k {
            break;
        }
        let objective = |a: &[f64]| simplex_weights(a, noise, &tgt).1;
        let start_err = objective(&init);
        let (refined, err) = if start_err > 0.0 {
            nelder_mead(objective, &init, step, 300 * k, 1e-10)
        } else {
            (init.clone(), 0.0)
        };
        let atoms = if err <= start_err { refined } else { init };
        let (w, err) = simplex_weights(&atoms, noise, &tgt);
        let set = AtomSet::new(atoms, w)?;
        let score = err + opts.penalty * set.len() as f64 / (n as f64).sqrt();
        if best.as_ref().is_none_or(|b| score < b.0) {
            best = Some((score, set, err));
        }
    }
    let (_, atoms, fit_error) = best.ok_or_else(|| Error::Deconvolution("no candidate fit".into()))?;
    if fit_error > opts.max_error {
        return Err(Error::Deconvolution(format!(
            "best CDF fit error {fit_error:.4} exceeds {}",
            opts.max_error
        )));
    }
    let mgf_deviation = mgf_check(sample, &atoms, noise);
    Ok(AtomFit {
        mgf_consistent: mgf_deviation <= opts.mgf_tolerance,
        atoms,
        fit_error,
        n,
        mgf_deviation,
    })
}
