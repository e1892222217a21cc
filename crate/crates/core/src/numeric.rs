//! Small numerical helpers shared by several modules.

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// Central-difference partial derivative along coordinate `j` with absolute step `h`.
pub fn central_partial<F>(f: &F, x: &[f64], j: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[j] += h;
    xm[j] -= h;
    let (fp, fm) = (f(&xp), f(&xm));
    if !fp.is_finite() || !fm.is_finite() {
        return Err(Error::numeric(format!(
            "non-finite evaluation near coordinate {j}"
        )));
    }
    Ok((fp - fm) / (2.0 * h))
}

/// Fourth-order five-point partial derivative along coordinate `j`.
pub fn five_point_partial<F>(f: &F, x: &[f64], j: usize, h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let eval = |k: f64| {
        let mut y = x.to_vec();
        y[j] += k * h;
        f(&y)
    };
    let (f2, f1, m1, m2) = (eval(2.0), eval(1.0), eval(-1.0), eval(-2.0));
    if ![f2, f1, m1, m2].iter().all(|v| v.is_finite()) {
        return Err(Error::numeric(format!(
            "non-finite evaluation near coordinate {j}"
        )));
    }
    Ok((-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h))
}

/// Cumulative trapezoid integral of `values` over `grid`, zero at index `origin`.
pub fn cumulative_trapezoid(grid: &[f64], values: &[f64], origin: usize) -> Vec<f64> {
    let n = grid.len();
    let mut out = vec![0.0; n];
    for i in origin + 1..n {
        out[i] = out[i - 1] + 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    for i in (0..origin).rev() {
        out[i] = out[i + 1] - 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i]);
    }
    out
}

/// Piecewise-linear interpolation on a sorted grid, extrapolating linearly.
pub fn interp_linear(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if n == 1 {
        return values[0];
    }
    let i = match grid.partition_point(|g| *g <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let t = (x - grid[i]) / (grid[i + 1] - grid[i]);
    values[i] + t * (values[i + 1] - values[i])
}

/// Derivative of tabulated values by central differences (one-sided at the ends).
pub fn grid_derivative(grid: &[f64], values: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            if n < 2 {
                0.0
            } else if i == 0 {
                (values[1] - values[0]) / (grid[1] - grid[0])
            } else if i == n - 1 {
                (values[n - 1] - values[n - 2]) / (grid[n - 1] - grid[n - 2])
            } else {
                // second-order formula on a possibly nonuniform grid
                let h0 = grid[i] - grid[i - 1];
                let h1 = grid[i + 1] - grid[i];
                (h0 * h0 * values[i + 1] - h1 * h1 * values[i - 1]
                    + (h1 * h1 - h0 * h0) * values[i])
                    / (h0 * h1 * (h0 + h1))
            }
        })
        .collect()
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..500 {
        if (hi - lo).abs() <= rel_tol * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Bisection root finder for a function changing sign on `[lo, hi]`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::numeric("bisection bracket does not change sign"));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo).abs() < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Nelder-Mead simplex minimization. Returns the best point and its value.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = f(&x);
        simplex.push((x, v));
    }
    let blend = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(u, v)| u + t * (v - u)).collect()
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[n].1 - simplex[0].1).abs() <= tol * (1.0 + simplex[0].1.abs()) {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = blend(&centroid, &worst.0, -1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(&centroid, &worst.0, -2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = blend(&centroid, &worst.0, 0.5);
            let fc = f(&contracted);
            if fc < worst.1 {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x = blend(&best, &item.0, 0.5);
                    let v = f(&x);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}
