//! Shape-constrained Diewert profit fits, plug-in production sets and checks
//! of the duality between sup-norm profit error and Hausdorff distance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::convex::{
    hausdorff_extended, hausdorff_oracle_2d, support_value, HalfspaceEnvelope, PriceRay, RestrictedPriceSet,
};
use crate::counterfactual::ProfitData;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense, VarDomain};
use crate::numeric::golden_max;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Quantile of the check loss; 0.5 is least absolute deviations.
    pub quantile: f64,
    /// `b_jj >= 0` and `b_sj <= 0` off the diagonal.
    pub sign_constraints: bool,
    /// Coefficients nondecreasing in the type.
    pub monotone: bool,
    /// Smallest total diagonal increase between adjacent types.
    pub min_increment: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            quantile: 0.5,
            sign_constraints: true,
            monotone: true,
            min_increment: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    pub constraint: String,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiewertFit {
    /// Symmetric `b(e)` for `e = 1..=d_e`.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Check-loss objective per type.
    pub objective: Vec<f64>,
    /// Largest absolute residual per type.
    pub max_residual: Vec<f64>,
    pub slacks: Vec<Slack>,
    pub options: FitOptions,
}

impl DiewertFit {
    pub fn num_types(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dim(&self) -> usize {
        self.coefficients[0].len()
    }

    /// `Σ b_sj(e) sqrt(p_s p_j)`; `e` is 1-based.
    pub fn profit(&self, e: usize, p: &[f64]) -> f64 {
        let b = &self.coefficients[e - 1];
        let mut acc = 0.0;
        for s in 0..p.len() {
            for j in 0..p.len() {
                acc += b[s][j] * (p[s] * p[j]).sqrt();
            }
        }
        acc
    }

    /// Implied net supply `y_s = Σ_j b_sj(e) sqrt(p_j / p_s)`.
    pub fn supply(&self, e: usize, p: &[f64]) -> Vec<f64> {
        let b = &self.coefficients[e - 1];
        (0..p.len())
            .map(|s| (0..p.len()).map(|j| b[s][j] * (p[j] / p[s]).sqrt()).sum())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Upper-triangular index pairs; off-diagonal pairs enter the basis twice.
fn param_pairs(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|s| (s..d).map(move |j| (s, j))).collect()
}

fn basis(p: &[f64], pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(s, j)| if s == j { p[s] } else { 2.0 * (p[s] * p[j]).sqrt() })
        .collect()
}

/// Fits one Diewert profit function per type by quantile regression, as a
/// single linear program so that monotonicity can link the types. `data[k]`
/// holds the observations of type `k + 1`.
pub fn fit_diewert(data: &[ProfitData], opts: &FitOptions) -> Result<DiewertFit> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(opts.quantile > 0.0 && opts.quantile < 1.0) {
        return Err(Error::arg("quantile must lie in (0, 1)"));
    }
    let d = data[0].dim();
    let pairs = param_pairs(d);
    let np = pairs.len();
    for (k, td) in data.iter().enumerate() {
        td.validate()?;
        if td.dim() != d {
            return Err(Error::Dimension {
                expected: d,
                found: td.dim(),
            });
        }
        if td.len() < np {
            return Err(Error::InsufficientData {
                needed: np,
                found: td.len(),
            });
        }
        let rows: Vec<Vec<f64>> = td.pairs.iter().map(|(r, _)| basis(r.components(), &pairs)).collect();
        let x = DMatrix::from_fn(rows.len(), np, |i, j| rows[i][j]);
        let sv = x.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond < 1e10) {
            return Err(Error::Identification(format!(
                "rays of type {} do not identify the coefficients (condition {cond:.3e})",
                k + 1
            )));
        }
    }

    let nt = data.len();
    let n_obs: usize = data.iter().map(ProfitData::len).sum();
    let mut lp = LinearProgram::new(nt * np + 2 * n_obs, Sense::Minimize);
    let mut row = nt * np;
    for (k, td) in data.iter().enumerate() {
        for (r, v) in &td.pairs {
            let mut coeffs: Vec<(usize, f64)> = basis(r.components(), &pairs)
                .into_iter()
                .enumerate()
                .map(|(j, c)| (k * np + j, c))
                .collect();
            coeffs.push((row, 1.0));
            coeffs.push((row + 1, -1.0));
            lp.set_domain(row, VarDomain::NonNegative);
            lp.set_domain(row + 1, VarDomain::NonNegative);
            lp.set_objective_coeff(row, opts.quantile);
            lp.set_objective_coeff(row + 1, 1.0 - opts.quantile);
            lp.add_constraint(coeffs, Relation::Eq, *v);
            row += 2;
        }
    }
    if opts.sign_constraints {
        for k in 0..nt {
            for (j, &(s, t)) in pairs.iter().enumerate() {
                let dom = if s == t { VarDomain::NonNegative } else { VarDomain::NonPositive };
                lp.set_domain(k * np + j, dom);
            }
        }
    }
    if opts.monotone {
        for k in 0..nt.saturating_sub(1) {
            for j in 0..np {
                lp.add_constraint(vec![((k + 1) * np + j, 1.0), (k * np + j, -1.0)], Relation::Ge, 0.0);
            }
            let diag: Vec<(usize, f64)> = pairs
                .iter()
                .enumerate()
                .filter(|(_, (s, t))| s == t)
                .flat_map(|(j, _)| [((k + 1) * np + j, 1.0), (k * np + j, -1.0)])
                .collect();
            lp.add_constraint(diag, Relation::Ge, opts.min_increment);
        }
    }

    let x = match lp.solve()? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => {
            return Err(Error::ConstraintConflict(
                "no Diewert coefficients satisfy the sign and monotonicity constraints".into(),
            ))
        }
        LpOutcome::Unbounded { .. } => return Err(Error::numeric("check-loss program reported unbounded")),
    };

    let coefficients: Vec<Vec<Vec<f64>>> = (0..nt)
        .map(|k| {
            let mut b = vec![vec![0.0; d]; d];
            for (j, &(s, t)) in pairs.iter().enumerate() {
                b[s][t] = x[k * np + j];
                b[t][s] = x[k * np + j];
            }
            b
        })
        .collect();
    let mut fit = DiewertFit {
        coefficients,
        objective: Vec::with_capacity(nt),
        max_residual: Vec::with_capacity(nt),
        slacks: Vec::new(),
        options: opts.clone(),
    };
    for (k, td) in data.iter().enumerate() {
        let mut obj = 0.0;
        let mut worst: f64 = 0.0;
        for (r, v) in &td.pairs {
            let res = v - fit.profit(k + 1, r.components());
            obj += if res >= 0.0 { opts.quantile * res } else { (opts.quantile - 1.0) * res };
            worst = worst.max(res.abs());
        }
        fit.objective.push(obj);
        fit.max_residual.push(worst);
    }
    for k in 0..nt {
        let b = &fit.coefficients[k];
        for &(s, t) in &pairs {
            if opts.sign_constraints {
                let slack = if s == t { b[s][s] } else { -b[s][t] };
                fit.slacks.push(Slack {
                    constraint: format!("sign b[{}][{}]({})", s + 1, t + 1, k + 1),
                    slack,
                });
            }
            if opts.monotone && k + 1 < nt {
                fit.slacks.push(Slack {
                    constraint: format!("monotone b[{}][{}]({}..{})", s + 1, t + 1, k + 1, k + 2),
                    slack: fit.coefficients[k + 1][s][t] - b[s][t],
                });
            }
        }
    }
    Ok(fit)
}

/// `{y : p·y <= π̂(p)}` over the rays of `pbar`.
pub fn plugin_set<F: Fn(&[f64]) -> f64>(pi_hat: F, pbar: &RestrictedPriceSet) -> Result<HalfspaceEnvelope> {
    let pairs = pbar
        .rays()
        .iter()
        .map(|r| {
            let v = pi_hat(r.components());
            if v.is_finite() {
                Ok((r.clone(), v))
            } else {
                Err(Error::numeric(format!("estimated profit is not finite at {:?}", r.components())))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    HalfspaceEnvelope::from_rays(&pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualityVerdict {
    /// Convex estimate and the distance equals the sup-norm error.
    EqualityHolds,
    EqualityFails,
    /// Nonconvex estimate within the bound.
    BoundHolds,
    BoundViolated,
    /// The sup-norm error is not below the smallest true profit.
    BoundInapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub num_rays: usize,
    pub convex: bool,
    pub eta: f64,
    pub hausdorff: f64,
    /// Geometric cross-check, two goods only.
    pub oracle_hausdorff: Option<f64>,
    pub r_max: f64,
    pub r_min: f64,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub verdict: DualityVerdict,
}

/// Tolerance for the equality check against the geometric oracle.
pub const DUALITY_TOL: f64 = 1e-6;

/// Compares the sup-norm error of `pi_hat` on `pbar` with the Hausdorff
/// distance between the sets the two profit functions generate.
///
/// Support values of the estimated set come from linear programs, so a
/// nonconvex `pi_hat` is replaced by its convexification on the grid.
pub fn duality_check<F, G>(
    pi_true: F,
    pi_hat: G,
    pbar: &RestrictedPriceSet,
    convex: bool,
    oracle_points: usize,
) -> Result<DualityReport>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> f64,
{
    let a: Vec<f64> = pbar.rays().iter().map(|r| pi_true(r.components())).collect();
    let b: Vec<f64> = pbar.rays().iter().map(|r| pi_hat(r.components())).collect();
    if a.iter().chain(&b).any(|v| !v.is_finite()) {
        return Err(Error::numeric("profit functions must be finite on the price set"));
    }
    let eta = a.iter().zip(&b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let r_max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let r_min = a.iter().copied().fold(f64::INFINITY, f64::min);

    let env_a = plugin_set(&pi_true, pbar)?;
    let env_b = plugin_set(&pi_hat, pbar)?;
    let (sa, sb) = if convex {
        (a.clone(), b.clone())
    } else {
        (grid_supports(&env_a, &a, pbar)?, grid_supports(&env_b, &b, pbar)?)
    };
    let hausdorff = hausdorff_extended(&sa, &sb, pbar)?;
    let oracle_hausdorff = if pbar.dim() == 2 && oracle_points > 0 {
        Some(hausdorff_oracle_2d(&env_a, &env_b, oracle_points)?)
    } else {
        None
    };

    let (bound, verdict) = if convex {
        let d = oracle_hausdorff.unwrap_or(hausdorff);
        let ok = (hausdorff - eta).abs() <= DUALITY_TOL && (d - eta).abs() <= DUALITY_TOL;
        (None, if ok { DualityVerdict::EqualityHolds } else { DualityVerdict::EqualityFails })
    } else {
        if !(r_min > 0.0) {
            return Err(Error::Precondition(format!(
                "the bound needs strictly positive profits on the price set, smallest is {r_min}"
            )));
        }
        if eta >= r_min {
            (None, DualityVerdict::BoundInapplicable)
        } else {
            let bound = eta * (r_max / r_min) * (1.0 + eta / r_max) / (1.0 - eta / r_min);
            let d = oracle_hausdorff.unwrap_or(0.0).max(hausdorff);
            let v = if d <= bound + DUALITY_TOL {
                DualityVerdict::BoundHolds
            } else {
                DualityVerdict::BoundViolated
            };
            (Some(bound), v)
        }
    };
    Ok(DualityReport {
        num_rays: pbar.len(),
        convex,
        eta,
        hausdorff,
        oracle_hausdorff,
        r_max,
        r_min,
        bound,
        ratio: (eta > 0.0).then(|| hausdorff / eta),
        verdict,
    })
}

/// Support values of `env` (built from `values` on `pbar`) at the rays of `pbar`.
fn grid_supports(env: &HalfspaceEnvelope, values: &[f64], pbar: &RestrictedPriceSet) -> Result<Vec<f64>> {
    if pbar.dim() == 2 {
        return Ok(convexify_2d(pbar.rays(), values));
    }
    pbar.rays().iter().map(|r: &PriceRay| Ok(support_value(env, r)?.value())).collect()
}

/// Convex hull of a degree-one homogeneous function known on planar rays.
///
/// On the line `p_1 + p_2 = 1` the homogeneous extension is convex exactly
/// when its restriction is, so the hull is the lower convex hull there.
fn convexify_2d(rays: &[PriceRay], values: &[f64]) -> Vec<f64> {
    let mut pts: Vec<(f64, f64, usize)> = rays
        .iter()
        .zip(values)
        .enumerate()
        .map(|(i, (r, v))| {
            let c = r.components();
            let w = c[0] + c[1];
            (c[1] / w, v / w, i)
        })
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &(x, y, _) in &pts {
        while hull.len() >= 2 {
            let (x1, y1) = hull[hull.len() - 2];
            let (x2, y2) = hull[hull.len() - 1];
            // drop the middle point when it lies on or above the chord
            if (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1) <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push((x, y));
    }
    let hx: Vec<f64> = hull.iter().map(|h| h.0).collect();
    let hy: Vec<f64> = hull.iter().map(|h| h.1).collect();
    let mut out = vec![0.0; rays.len()];
    for (x, y, i) in pts {
        let c = rays[i].components();
        let on_hull = if hx.len() == 1 { hy[0] } else { crate::numeric::interp_linear(&hx, &hy, x) };
        out[i] = on_hull.min(y) * (c[0] + c[1]);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowDistance {
    pub window: f64,
    pub directed_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteHausdorffReport {
    pub m: f64,
    /// Directed distance from `Y` to `Ŷ_m` on `-W <= y_2 <= 0`.
    pub windows: Vec<WindowDistance>,
    /// The same sets as extended sets over a compact price arc.
    pub extended: DualityReport,
    /// `η` on the arc for increasing `m`.
    pub eta_by_m: Vec<(f64, f64)>,
}

/// Distance from `(sqrt(l), -l)` to `{y_1 <= c sqrt(-y_2)}`.
fn distance_to_scaled_root(l: f64, c: f64) -> f64 {
    let q = [l.sqrt(), -l];
    let dist2 = |t: f64| (q[0] - c * t).powi(2) + (q[1] + t * t).powi(2);
    let hi = 2.0 * l.sqrt() + 1.0;
    let (t, _) = golden_max(|t| -dist2(t), 0.0, hi, 1e-12);
    // the endpoint t = 0 is the corner of the set
    dist2(t).min(dist2(0.0)).sqrt()
}

/// `Y = {y_1 <= sqrt(-y_2)}` against `Ŷ_m = {y_1 <= (1 - 1/m) sqrt(-y_2)}`:
/// unbounded distance as sets, finite distance as extended sets over
/// `0.1 <= p_2/p_1 <= 10`.
pub fn infinite_hausdorff_demo(m: f64, windows: &[f64], arc_rays: usize) -> Result<InfiniteHausdorffReport> {
    if !(m > 1.0) {
        return Err(Error::arg("m must exceed one"));
    }
    let c = 1.0 - 1.0 / m;
    let windows = windows
        .iter()
        .map(|&w| {
            if !(w > 0.0) {
                return Err(Error::arg("windows must be positive"));
            }
            // the farthest boundary point sits at the edge of the window
            let n = 400;
            let directed_distance = (0..=n)
                .map(|i| distance_to_scaled_root(w * (i as f64 / n as f64).powi(2), c))
                .fold(0.0, f64::max);
            Ok(WindowDistance {
                window: w,
                directed_distance,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pbar = RestrictedPriceSet::arc(0.1f64.atan(), 10f64.atan(), arc_rays)?;
    let pi = |p: &[f64]| p[0] * p[0] / (4.0 * p[1]);
    let extended = duality_check(pi, |p: &[f64]| c * c * pi(p), &pbar, true, 0)?;
    let eta_by_m = [2.0, 10.0, 100.0, 1000.0, 1e4]
        .iter()
        .map(|&mm: &f64| {
            let cc = (1.0 - 1.0 / mm).powi(2);
            let eta = pbar
                .rays()
                .iter()
                .map(|r| (1.0 - cc) * pi(r.components()))
                .fold(0.0, f64::max);
            (mm, eta)
        })
        .collect();
    Ok(InfiniteHausdorffReport {
        m,
        windows,
        extended,
        eta_by_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::technology::{profit_oracle, TechnologySpec};
    use rand::{Rng, SeedableRng};

    fn b_true() -> Vec<Vec<Vec<f64>>> {
        vec![
            vec![vec![1.0, -0.2, -0.1], vec![-0.2, 1.5, -0.3], vec![-0.1, -0.3, 0.8]],
            vec![vec![1.4, -0.1, -0.1], vec![-0.1, 1.9, -0.2], vec![-0.1, -0.2, 1.1]],
        ]
    }

    fn rays3(n: usize, seed: u64) -> Vec<PriceRay> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let p: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
                PriceRay::normalize(&p).unwrap()
            })
            .collect()
    }

    fn data_from(b: &[Vec<Vec<f64>>], rays: &[PriceRay], noise: f64, seed: u64) -> Vec<ProfitData> {
        let tech = TechnologySpec::diewert(b.to_vec()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (1..=b.len())
            .map(|e| {
                let pairs = rays
                    .iter()
                    .map(|r| {
                        let v = profit_oracle(&tech, e, r.components(), None).unwrap().0;
                        let eps = if noise > 0.0 { rng.random_range(-noise / 2.0..noise / 2.0) } else { 0.0 };
                        (r.clone(), v + eps)
                    })
                    .collect();
                ProfitData::new(e, pairs).unwrap()
            })
            .collect()
    }

    #[test]
    fn noiseless_round_trip() {
        let data = data_from(&b_true(), &rays3(12, 1), 0.0, 0);
        let fit = fit_diewert(&data, &FitOptions::default()).unwrap();
        for (bf, bt) in fit.coefficients.iter().zip(b_true()) {
            for s in 0..3 {
                for j in 0..3 {
                    assert!((bf[s][j] - bt[s][j]).abs() < 1e-8);
                }
            }
        }
        assert!(fit.objective.iter().all(|o| *o < 1e-8));
        let tech = TechnologySpec::diewert(b_true()).unwrap();
        let p = [0.3, 0.5, 0.9];
        let y = profit_oracle(&tech, 2, &p, None).unwrap().1;
        for (u, v) in fit.supply(2, &p).iter().zip(&y) {
            assert!((u - v).abs() < 1e-7);
        }
        let back = DiewertFit::from_json(&fit.to_json().unwrap()).unwrap();
        assert_eq!(back, fit);
    }

    #[test]
    fn diagonal_truth() {
        let b = vec![vec![vec![0.7, 0.0], vec![0.0, 1.3]]];
        let rays: Vec<PriceRay> = (0..8).map(|k| PriceRay::from_angle(0.1 + 0.17 * k as f64).unwrap()).collect();
        let fit = fit_diewert(&data_from(&b, &rays, 0.0, 0), &FitOptions::default()).unwrap();
        let c = &fit.coefficients[0];
        assert!((c[0][0] - 0.7).abs() < 1e-9 && (c[1][1] - 1.3).abs() < 1e-9);
        assert!(c[0][1].abs() < 1e-9);
    }

    #[test]
    fn noisy_fit_residuals_within_noise() {
        let k = 0.1;
        let data = data_from(&b_true(), &rays3(300, 2), k, 3);
        let fit = fit_diewert(&data, &FitOptions::default()).unwrap();
        assert!(fit.max_residual.iter().all(|r| *r <= k / 2.0 + 0.02), "{:?}", fit.max_residual);
        assert!(fit.slacks.iter().all(|s| s.slack >= -1e-9));
    }

    #[test]
    fn scale_equivariance() {
        let data = data_from(&b_true(), &rays3(20, 4), 0.05, 5);
        let opts = FitOptions {
            monotone: false,
            ..FitOptions::default()
        };
        let f1 = fit_diewert(&data, &opts).unwrap();
        let scaled: Vec<ProfitData> = data
            .iter()
            .map(|d| ProfitData::new(d.e, d.pairs.iter().map(|(r, v)| (r.clone(), 3.0 * v)).collect()).unwrap())
            .collect();
        let f3 = fit_diewert(&scaled, &opts).unwrap();
        for (a, b) in f1.coefficients.iter().flatten().flatten().zip(f3.coefficients.iter().flatten().flatten()) {
            assert!((3.0 * a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn too_few_rays() {
        let data = data_from(&b_true(), &rays3(5, 6), 0.0, 0);
        assert!(matches!(
            fit_diewert(&data, &FitOptions::default()),
            Err(Error::InsufficientData { needed: 6, found: 5 })
        ));
        let same: Vec<PriceRay> = (0..6).map(|k| PriceRay::normalize(&[1.0, 1.0, 1.0 + k as f64]).unwrap()).collect();
        assert!(matches!(
            fit_diewert(&data_from(&b_true(), &same, 0.0, 0), &FitOptions::default()),
            Err(Error::Identification(_))
        ));
    }

    #[test]
    fn monotone_fits_are_nested() {
        let data = data_from(&b_true(), &rays3(40, 7), 0.3, 8);
        let fit = fit_diewert(&data, &FitOptions::default()).unwrap();
        for r in rays3(200, 9) {
            assert!(fit.profit(2, r.components()) >= fit.profit(1, r.components()) - 1e-12);
        }
    }

    fn arc() -> RestrictedPriceSet {
        RestrictedPriceSet::arc(0.3, 1.2, 2000).unwrap()
    }

    fn diewert_pi(p: &[f64]) -> f64 {
        1.0 * p[0] + 2.0 * p[1] - 0.6 * (p[0] * p[1]).sqrt()
    }

    #[test]
    fn plugin_set_support_equals_profit() {
        let set = RestrictedPriceSet::arc(0.3, 1.2, 25).unwrap();
        let env = plugin_set(diewert_pi, &set).unwrap();
        for r in set.rays() {
            let s = support_value(&env, r).unwrap().value();
            assert!((s - diewert_pi(r.components())).abs() < 1e-9);
        }
        let single = RestrictedPriceSet::arc(0.7, 0.7, 1).unwrap();
        assert_eq!(plugin_set(diewert_pi, &single).unwrap().constraints().len(), 1);
        assert!(plugin_set(|_: &[f64]| f64::NAN, &single).is_err());
    }

    #[test]
    fn duality_equality_for_scaled_profit() {
        let same = duality_check(diewert_pi, diewert_pi, &arc(), true, 2000).unwrap();
        assert_eq!(same.eta, 0.0);
        assert!(same.oracle_hausdorff.unwrap() < 1e-9);
        let rep = duality_check(diewert_pi, |p: &[f64]| 1.01 * diewert_pi(p), &arc(), true, 2000).unwrap();
        let sup = arc().rays().iter().map(|r| diewert_pi(r.components())).fold(0.0, f64::max);
        assert!((rep.eta - 0.01 * sup).abs() < 1e-12);
        let oracle = rep.oracle_hausdorff.unwrap();
        assert!((oracle - rep.eta).abs() <= DUALITY_TOL, "oracle {oracle} eta {}", rep.eta);
        assert_eq!(rep.verdict, DualityVerdict::EqualityHolds);
    }

    #[test]
    fn nonconvex_ripple_within_bound() {
        let set = arc();
        let r_min = set.rays().iter().map(|r| diewert_pi(r.components())).fold(f64::INFINITY, f64::min);
        let amp = 0.01 * r_min;
        let ripple = move |p: &[f64]| {
            let n = (p[0] * p[0] + p[1] * p[1]).sqrt();
            diewert_pi(p) + amp * n * (40.0 * p[1].atan2(p[0])).sin()
        };
        let rep = duality_check(diewert_pi, ripple, &set, false, 2000).unwrap();
        assert_eq!(rep.verdict, DualityVerdict::BoundHolds);
        assert!(rep.hausdorff <= rep.bound.unwrap());
        assert!(rep.ratio.unwrap() <= 1.0 + 1e-9);
        let big = duality_check(diewert_pi, |p: &[f64]| 0.0 * p[0], &set, false, 0).unwrap();
        assert_eq!(big.verdict, DualityVerdict::BoundInapplicable);
        assert!(duality_check(|_: &[f64]| -1.0, diewert_pi, &set, false, 0).is_err());
    }

    #[test]
    fn planar_convexification_matches_linear_programs() {
        let set = RestrictedPriceSet::arc(0.2, 1.3, 60).unwrap();
        let vals: Vec<f64> = set
            .rays()
            .iter()
            .map(|r| diewert_pi(r.components()) + 0.05 * (9.0 * r.angle()).sin())
            .collect();
        let env = HalfspaceEnvelope::from_rays(&set.rays().iter().cloned().zip(vals.iter().copied()).collect::<Vec<_>>()).unwrap();
        let fast = convexify_2d(set.rays(), &vals);
        for (r, f) in set.rays().iter().zip(&fast) {
            let lp = support_value(&env, r).unwrap().value();
            assert!((lp - f).abs() < 1e-9, "{lp} vs {f}");
        }
    }

    #[test]
    fn infinite_hausdorff_grows_with_window() {
        let rep = infinite_hausdorff_demo(10.0, &[1e2, 1e4, 1e6], 500).unwrap();
        let d: Vec<f64> = rep.windows.iter().map(|w| w.directed_distance).collect();
        assert!(d[0] < d[1] && d[1] < d[2]);
        // growth like sqrt(window) / m
        assert!(d[2] > 50.0, "{d:?}");
        assert!(rep.extended.eta.is_finite());
        assert!((rep.extended.hausdorff - rep.extended.eta).abs() < 1e-12);
        let etas: Vec<f64> = rep.eta_by_m.iter().map(|x| x.1).collect();
        assert!(etas.windows(2).all(|w| w[1] < w[0]));
        assert!(*etas.last().unwrap() < 1e-3);
        // closed form: the largest profit on the arc sits at p2/p1 = 0.1
        let p = [1.0 / 1.01f64.sqrt(), 0.1 / 1.01f64.sqrt()];
        let want = (1.0 - 0.81) * p[0] * p[0] / (4.0 * p[1]);
        assert!((rep.extended.eta - want).abs() < 1e-9);
    }
}
