use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numeric::{five_point_partial, grid_derivative};
use crate::profit_id::ProfitTable;
use crate::technology::Dataset;

/// A profit function of the proxy vector on a box domain.
pub trait ProfitSurface: Sync {
    fn dim(&self) -> usize;
    /// Per-coordinate closed intervals.
    fn domain(&self) -> Vec<(f64, f64)>;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn partial(&self, x: &[f64], j: usize) -> Result<f64>;

    fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && self
                .domain()
                .iter()
                .zip(x)
                .all(|((lo, hi), v)| *v >= *lo - 1e-12 && *v <= *hi + 1e-12)
    }
}

/// A closed-form profit function; partials by a five-point stencil.
pub struct AnalyticSurface<F> {
    f: F,
    domain: Vec<(f64, f64)>,
}

impl<F: Fn(&[f64]) -> f64 + Sync> AnalyticSurface<F> {
    pub fn new(f: F, domain: Vec<(f64, f64)>) -> Result<Self> {
        if domain.is_empty() || domain.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::arg("domain intervals must have nonempty interior"));
        }
        Ok(Self { f, domain })
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> ProfitSurface for AnalyticSurface<F> {
    fn dim(&self) -> usize {
        self.domain.len()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.domain.clone()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::arg(format!("point {x:?} outside the proxy domain")));
        }
        let v = (self.f)(x);
        if !v.is_finite() {
            return Err(Error::numeric("non-finite profit"));
        }
        Ok(v)
    }

    fn partial(&self, x: &[f64], j: usize) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::arg(format!("point {x:?} outside the proxy domain")));
        }
        let (lo, hi) = self.domain[j];
        // stay inside the domain when the point is near its edge
        let room = (x[j] - lo).min(hi - x[j]) / 2.0;
        let h = (1e-3 * x[j].abs().max(1.0)).min(room);
        if h > 1e-7 {
            return five_point_partial(&self.f, x, j, h);
        }
        let h = 1e-4 * x[j].abs().max(1.0);
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        if x[j] - lo < hi - x[j] {
            b[j] += h;
        } else {
            a[j] -= h;
        }
        Ok(((self.f)(&b) - (self.f)(&a)) / (b[j] - a[j]))
    }
}

/// Values on a rectangular grid. Evaluation is multilinear; partials are
/// multilinear interpolations of node-wise finite differences.
#[derive(Clone, Debug)]
pub struct TabulatedSurface {
    axes: Vec<Vec<f64>>,
    values: Vec<f64>,
    derivatives: Vec<Vec<f64>>,
}

impl TabulatedSurface {
    /// `values` are stored row-major, last axis fastest.
    pub fn new(axes: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(|a| a.len() < 2 || a.windows(2).any(|w| w[1] <= w[0])) {
            return Err(Error::arg("each axis needs at least two increasing nodes"));
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if values.len() != total {
            return Err(Error::Dimension {
                expected: total,
                found: values.len(),
            });
        }
        let strides = strides(&axes);
        let derivatives = (0..axes.len())
            .map(|j| {
                let mut out = vec![0.0; total];
                let n = axes[j].len();
                for base in 0..total {
                    if (base / strides[j]) % n != 0 {
                        continue;
                    }
                    let line: Vec<f64> = (0..n).map(|i| values[base + i * strides[j]]).collect();
                    for (i, d) in grid_derivative(&axes[j], &line).into_iter().enumerate() {
                        out[base + i * strides[j]] = d;
                    }
                }
                out
            })
            .collect();
        Ok(Self {
            axes,
            values,
            derivatives,
        })
    }

    /// Grid of one type's identified profits; cells must cover a full product grid.
    pub fn from_profit_table(table: &ProfitTable, e: usize) -> Result<Self> {
        let dim = table
            .cells
            .first()
            .map(|c| c.observables.len())
            .ok_or_else(|| Error::arg("profit table has no cells"))?;
        let mut axes: Vec<Vec<f64>> = (0..dim)
            .map(|j| table.cells.iter().map(|c| c.observables[j]).collect())
            .collect();
        for a in &mut axes {
            a.sort_by(f64::total_cmp);
            a.dedup_by(|u, v| (*u - *v).abs() <= 1e-12 * (1.0 + v.abs()));
        }
        let mut by_node: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
        for c in &table.cells {
            let Some(v) = c.value(e) else { continue };
            let idx: Vec<usize> = c
                .observables
                .iter()
                .zip(&axes)
                .map(|(x, a)| {
                    a.iter()
                        .position(|n| (n - x).abs() <= 1e-12 * (1.0 + x.abs()))
                        .expect("node taken from the same cells")
                })
                .collect();
            by_node.insert(idx, v);
        }
        let total: usize = axes.iter().map(Vec::len).product();
        if by_node.len() != total {
            return Err(Error::Identification(format!(
                "type {e} identified at {} of {total} grid nodes",
                by_node.len()
            )));
        }
        Self::new(axes, by_node.into_values().collect())
    }

    /// Conditional mean of noisy profit at each distinct proxy vector. The
    /// support must be a full product grid and no quantity may be restricted.
    pub fn aggregate_mean(data: &Dataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.num_restricted > 0 {
            return Err(Error::arg("aggregate profiles need data without restricted quantities"));
        }
        let mut sums: BTreeMap<Vec<u64>, (Vec<f64>, f64, usize)> = BTreeMap::new();
        for r in &data.records {
            let key = r.x.iter().map(|v| v.to_bits()).collect();
            let e = sums.entry(key).or_insert((r.x.clone(), 0.0, 0));
            e.1 += r.noisy_profit;
            e.2 += 1;
        }
        let rows: Vec<(Vec<f64>, f64)> = sums.into_values().map(|(x, s, n)| (x, s / n as f64)).collect();
        Self::from_rows(&rows)
    }

    /// Builds the grid from unordered `(x, value)` rows.
    pub fn from_rows(rows: &[(Vec<f64>, f64)]) -> Result<Self> {
        let dim = rows.first().map(|r| r.0.len()).ok_or(Error::EmptyDataset)?;
        let mut axes: Vec<Vec<f64>> = (0..dim).map(|j| rows.iter().map(|r| r.0[j]).collect()).collect();
        for a in &mut axes {
            a.sort_by(f64::total_cmp);
            a.dedup();
        }
        let total: usize = axes.iter().map(Vec::len).product();
        let strides = strides(&axes);
        let mut values = vec![f64::NAN; total];
        for (x, v) in rows {
            if x.len() != dim {
                return Err(Error::Dimension { expected: dim, found: x.len() });
            }
            let offset: usize = x
                .iter()
                .zip(&axes)
                .zip(&strides)
                .map(|((xi, a), s)| a.partition_point(|n| n < xi) * s)
                .sum();
            values[offset] = *v;
        }
        let missing = values.iter().filter(|v| v.is_nan()).count();
        if missing > 0 {
            return Err(Error::Identification(format!(
                "profile misses {missing} of {total} grid nodes"
            )));
        }
        Self::new(axes, values)
    }

    /// Profile CSV with columns `x_1..x_d, mean_profit`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let d = self.axes.len();
        let mut header: Vec<String> = (1..=d).map(|j| format!("x_{j}")).collect();
        header.push("mean_profit".into());
        out.write_record(&header)?;
        let strides = strides(&self.axes);
        for (i, v) in self.values.iter().enumerate() {
            let mut row: Vec<String> = (0..d)
                .map(|j| self.axes[j][(i / strides[j]) % self.axes[j].len()].to_string())
                .collect();
            row.push(v.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let width = rdr.headers()?.len();
        if width < 2 {
            return Err(Error::Schema("profile needs proxy columns and mean_profit".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Schema(format!("bad number {f:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push((nums[..width - 1].to_vec(), nums[width - 1]));
        }
        Self::from_rows(&rows)
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    fn interpolate(&self, data: &[f64], x: &[f64]) -> f64 {
        let strides = strides(&self.axes);
        let cells: Vec<(usize, f64)> = self
            .axes
            .iter()
            .zip(x)
            .map(|(a, v)| {
                let i = a.partition_point(|n| n <= v).clamp(1, a.len() - 1) - 1;
                (i, (v - a[i]) / (a[i + 1] - a[i]))
            })
            .collect();
        let d = self.axes.len();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut offset = 0;
            for (j, (i, t)) in cells.iter().enumerate() {
                let up = corner >> j & 1 == 1;
                w *= if up { *t } else { 1.0 - t };
                offset += (i + usize::from(up)) * strides[j];
            }
            if w != 0.0 {
                acc += w * data[offset];
            }
        }
        acc
    }
}

fn strides(axes: &[Vec<f64>]) -> Vec<usize> {
    let mut s = vec![1; axes.len()];
    for j in (0..axes.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * axes[j + 1].len();
    }
    s
}

impl ProfitSurface for TabulatedSurface {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn domain(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::arg(format!("point {x:?} outside the tabulated grid")));
        }
        Ok(self.interpolate(&self.values, x))
    }

    fn partial(&self, x: &[f64], j: usize) -> Result<f64> {
        if !self.contains(x) {
            return Err(Error::arg(format!("point {x:?} outside the tabulated grid")));
        }
        Ok(self.interpolate(&self.derivatives[j], x))
    }
}
