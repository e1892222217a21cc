//! Recovery of unobserved price functions `p_j = g_j(x_j)` from proxies.
//!
//! The observed-price good is always the last coordinate of the proxy vector.

mod housing;
mod surface;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, grid_derivative, interp_linear};

pub use housing::{recover_g_housing, tabulate_markets, HousingDgp, HousingMarket};
pub use surface::{AnalyticSurface, ProfitSurface, TabulatedSurface};

/// Condition numbers at or above this are treated as rank deficient.
pub const CONDITION_THRESHOLD: f64 = 1e8;
/// `|t_j|` beyond this signals a vanishing derivative of `g_j`.
pub const VANISHING_T: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankDiagnostic {
    pub x_minus: Vec<f64>,
    pub anchors: Vec<f64>,
    /// Row `l` holds the partials in the unobserved goods at anchor `l`.
    pub matrix: Vec<Vec<f64>>,
    pub condition_number: f64,
    pub nonsingular: bool,
}

fn compose(x_minus: &[f64], xd: f64) -> Vec<f64> {
    let mut x = x_minus.to_vec();
    x.push(xd);
    x
}

fn check_anchors<S: ProfitSurface + ?Sized>(pi: &S, x_minus: &[f64], anchors: &[f64]) -> Result<()> {
    let d = pi.dim();
    if d < 2 {
        return Err(Error::UnsupportedDimension(d));
    }
    if x_minus.len() != d - 1 {
        return Err(Error::Dimension {
            expected: d - 1,
            found: x_minus.len(),
        });
    }
    if anchors.len() != d - 1 {
        return Err(Error::Dimension {
            expected: d - 1,
            found: anchors.len(),
        });
    }
    for &a in anchors {
        if !pi.contains(&compose(x_minus, a)) {
            return Err(Error::arg(format!(
                "anchor {a} with x_minus {x_minus:?} lies outside the proxy domain"
            )));
        }
    }
    Ok(())
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Matrix of partials `∂_{x_j} π̃(x_minus, x_{d,l})` for the unobserved goods `j`.
pub fn rank_matrix<S: ProfitSurface + ?Sized>(pi: &S, x_minus: &[f64], anchors: &[f64]) -> Result<RankDiagnostic> {
    check_anchors(pi, x_minus, anchors)?;
    let d = pi.dim();
    let mut matrix = Vec::with_capacity(d - 1);
    for &a in anchors {
        let x = compose(x_minus, a);
        matrix.push((0..d - 1).map(|j| pi.partial(&x, j)).collect::<Result<Vec<_>>>()?);
    }
    let m = DMatrix::from_fn(d - 1, d - 1, |i, j| matrix[i][j]);
    let condition_number = condition_number(&m);
    Ok(RankDiagnostic {
        x_minus: x_minus.to_vec(),
        anchors: anchors.to_vec(),
        matrix,
        condition_number,
        nonsingular: condition_number < CONDITION_THRESHOLD,
    })
}

/// `count` quantiles, equally spaced in rank, of the observed-price values.
pub fn default_anchors(observed: &[f64], count: usize) -> Result<Vec<f64>> {
    if observed.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut v = observed.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok((1..=count)
        .map(|l| {
            let pos = l as f64 / (count + 1) as f64 * (n - 1) as f64;
            let i = pos.floor() as usize;
            let t = pos - i as f64;
            if i + 1 < n {
                v[i] + t * (v[i + 1] - v[i])
            } else {
                v[n - 1]
            }
        })
        .collect())
}

/// Anchors spread over the observed-price interval of the surface's domain.
pub fn domain_anchors<S: ProfitSurface + ?Sized>(pi: &S) -> Vec<f64> {
    let d = pi.dim();
    let (lo, hi) = pi.domain()[d - 1];
    (1..d).map(|l| lo + (hi - lo) * l as f64 / d as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TSolution {
    /// `g_j / g_j'` for each unobserved good.
    pub t: Vec<f64>,
    pub diagnostic: RankDiagnostic,
    /// Goods whose `|t_j|` exceeds [`VANISHING_T`].
    pub vanishing: Vec<usize>,
}

/// Solves the Euler system at `x_minus` for `t_j(x_j) = g_j(x_j) / g_j'(x_j)`.
pub fn solve_t<S: ProfitSurface + ?Sized>(pi: &S, x_minus: &[f64], anchors: &[f64]) -> Result<TSolution> {
    let diagnostic = rank_matrix(pi, x_minus, anchors)?;
    if !diagnostic.nonsingular {
        return Err(Error::RankCondition {
            condition: diagnostic.condition_number,
        });
    }
    let d = pi.dim();
    let mut b = Vec::with_capacity(d - 1);
    for &a in anchors {
        let x = compose(x_minus, a);
        b.push(pi.value(&x)? - pi.partial(&x, d - 1)? * a);
    }
    let m = DMatrix::from_fn(d - 1, d - 1, |i, j| diagnostic.matrix[i][j]);
    let t = m
        .lu()
        .solve(&DVector::from_vec(b))
        .ok_or(Error::RankCondition {
            condition: f64::INFINITY,
        })?;
    let t: Vec<f64> = t.iter().copied().collect();
    let vanishing = t
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite() || v.abs() > VANISHING_T)
        .map(|(j, _)| j)
        .collect();
    Ok(TSolution { t, diagnostic, vanishing })
}

/// Tabulated price function of one good.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyGood {
    pub grid: Vec<f64>,
    pub g_values: Vec<f64>,
    pub observed_flag: bool,
}

impl ProxyGood {
    pub fn observed(grid: Vec<f64>) -> Self {
        Self {
            g_values: grid.clone(),
            grid,
            observed_flag: true,
        }
    }

    pub fn g(&self, x: f64) -> f64 {
        if self.observed_flag {
            x
        } else {
            interp_linear(&self.grid, &self.g_values, x)
        }
    }

    /// `g / g'` at `x`.
    pub fn t(&self, x: f64) -> f64 {
        if self.observed_flag {
            return x;
        }
        let dg = grid_derivative(&self.grid, &self.g_values);
        self.g(x) / interp_linear(&self.grid, &dg, x)
    }
}

/// Points excluded from integration for one good.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridGaps {
    pub good: usize,
    pub points: Vec<f64>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyAnchor {
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyModel {
    pub version: u32,
    pub goods: Vec<ProxyGood>,
    pub anchor: ProxyAnchor,
    pub diagnostics: Vec<RankDiagnostic>,
    #[serde(default)]
    pub gaps: Vec<GridGaps>,
}

impl ProxyModel {
    pub const VERSION: u32 = 1;

    pub fn prices(&self, x: &[f64]) -> Vec<f64> {
        self.goods.iter().zip(x).map(|(g, v)| g.g(*v)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.version != Self::VERSION {
            return Err(Error::Schema(format!("unsupported proxy model version {}", m.version)));
        }
        Ok(m)
    }
}

/// Integrates `log g = log p0 + ∫_{x0}^{x} ds / t(s)` on `grid`.
///
/// Points with `|t| > VANISHING_T` are dropped and `log g` is interpolated
/// across them. Returns the values on `grid` and the dropped points.
pub fn integrate_g(grid: &[f64], t: &[f64], x0: f64, p0: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.len() != t.len() {
        return Err(Error::Dimension {
            expected: grid.len(),
            found: t.len(),
        });
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("grid must have at least two increasing nodes"));
    }
    if !(p0 > 0.0) {
        return Err(Error::arg("anchor price must be positive"));
    }
    let Some(origin) = grid.iter().position(|g| *g == x0) else {
        return Err(Error::Precondition(format!("grid does not contain the anchor {x0}")));
    };
    let mut dropped = Vec::new();
    let mut kept_x = Vec::new();
    let mut kept_inv = Vec::new();
    let mut sign = 0.0;
    for (i, (&x, &ti)) in grid.iter().zip(t).enumerate() {
        if ti.is_nan() || ti == 0.0 {
            return Err(Error::Integration(format!("t vanishes at x = {x}")));
        }
        if ti.abs() > VANISHING_T && i != origin {
            dropped.push(x);
            continue;
        }
        if sign != 0.0 && ti.signum() != sign {
            return Err(Error::Integration(format!("t changes sign near x = {x}")));
        }
        sign = ti.signum();
        kept_x.push(x);
        kept_inv.push(1.0 / ti);
    }
    let kept_origin = kept_x.iter().position(|g| *g == x0).expect("origin is always kept");
    let log_g = cumulative_trapezoid(&kept_x, &kept_inv, kept_origin);
    let ln_p0 = p0.ln();
    let values = grid
        .iter()
        .map(|&x| {
            if x == x0 {
                p0
            } else {
                (ln_p0 + interp_linear(&kept_x, &log_g, x)).exp()
            }
        })
        .collect();
    Ok((values, dropped))
}

/// Settings for tracing out each unobserved `g_j` along its grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxyConfig {
    /// One grid per good, observed good last. Each must contain the anchor.
    pub grids: Vec<Vec<f64>>,
    pub anchor: ProxyAnchor,
    /// Observed-price values for the rank system; defaults to domain quantiles.
    #[serde(default)]
    pub rank_anchors: Option<Vec<f64>>,
}

/// Solves for `t_j` along each unobserved good's grid, holding the other
/// proxies at the anchor, and integrates to `g_j`.
///
/// Grid points where the rank condition fails are reported as gaps and
/// interpolated across.
pub fn recover_proxies<S: ProfitSurface + ?Sized>(pi: &S, cfg: &ProxyConfig) -> Result<ProxyModel> {
    let d = pi.dim();
    if cfg.grids.len() != d || cfg.anchor.x0.len() != d || cfg.anchor.p0.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: cfg.grids.len(),
        });
    }
    let x0 = &cfg.anchor.x0;
    if (cfg.anchor.p0[d - 1] - x0[d - 1]).abs() > 1e-12 * (1.0 + x0[d - 1].abs()) {
        return Err(Error::arg("the observed good's anchor price must equal its proxy"));
    }
    let anchors = match &cfg.rank_anchors {
        Some(a) => a.clone(),
        None => domain_anchors(pi),
    };
    let mut goods = Vec::with_capacity(d);
    let mut diagnostics = Vec::new();
    let mut gaps = Vec::new();
    for j in 0..d - 1 {
        let grid = &cfg.grids[j];
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        let mut failed = Vec::new();
        for &xj in grid {
            let mut x_minus = x0[..d - 1].to_vec();
            x_minus[j] = xj;
            match solve_t(pi, &x_minus, &anchors) {
                Ok(sol) => {
                    if xj == x0[j] {
                        diagnostics.push(sol.diagnostic.clone());
                    }
                    xs.push(xj);
                    ts.push(sol.t[j]);
                }
                Err(Error::RankCondition { .. }) if xj != x0[j] => failed.push(xj),
                Err(e) => return Err(e),
            }
        }
        if xs.len() < 2 {
            return Err(Error::Identification(format!(
                "rank condition holds at fewer than two grid points for good {j}"
            )));
        }
        let (on_kept, vanished) = integrate_g(&xs, &ts, x0[j], cfg.anchor.p0[j])?;
        let log_kept: Vec<f64> = on_kept.iter().map(|v| v.ln()).collect();
        let g_values = grid
            .iter()
            .map(|&x| if x == x0[j] { cfg.anchor.p0[j] } else { interp_linear(&xs, &log_kept, x).exp() })
            .collect();
        if !failed.is_empty() {
            gaps.push(GridGaps {
                good: j,
                points: failed,
                reason: "rank condition fails".into(),
            });
        }
        if !vanished.is_empty() {
            gaps.push(GridGaps {
                good: j,
                points: vanished,
                reason: "derivative of g vanishes".into(),
            });
        }
        goods.push(ProxyGood {
            grid: grid.clone(),
            g_values,
            observed_flag: false,
        });
    }
    goods.push(ProxyGood::observed(cfg.grids[d - 1].clone()));
    Ok(ProxyModel {
        version: ProxyModel::VERSION,
        goods,
        anchor: cfg.anchor.clone(),
        diagnostics,
        gaps,
    })
}

/// `Σ_j ∂_{x_j}π̃ · g_j/g_j' − α π̃` at `x`.
pub fn euler_system_residual<S: ProfitSurface + ?Sized>(
    pi: &S,
    model: &ProxyModel,
    x: &[f64],
    alpha: f64,
) -> Result<f64> {
    let all: Vec<usize> = (0..pi.dim()).collect();
    Ok(subset_sum(pi, model, x, &all)? - alpha * pi.value(x)?)
}

/// Residual of the Euler system restricted to `goods` when the remaining
/// goods contribute `r_tilde` to profits: `Σ_{j∈goods} ∂π̃ t_j − (π̃ − r̃)`.
pub fn extended_euler_residual<S: ProfitSurface + ?Sized>(
    pi: &S,
    model: &ProxyModel,
    x: &[f64],
    goods: &[usize],
    r_tilde: f64,
) -> Result<f64> {
    Ok(subset_sum(pi, model, x, goods)? - (pi.value(x)? - r_tilde))
}

fn subset_sum<S: ProfitSurface + ?Sized>(pi: &S, model: &ProxyModel, x: &[f64], goods: &[usize]) -> Result<f64> {
    if model.goods.len() != pi.dim() || x.len() != pi.dim() {
        return Err(Error::Dimension {
            expected: pi.dim(),
            found: model.goods.len(),
        });
    }
    let mut acc = 0.0;
    for &j in goods {
        acc += pi.partial(x, j)? * model.goods[j].t(x[j]);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::technology::{profit_oracle, TechnologySpec};

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// Profit of a Diewert type with prices generated from proxies.
    fn diewert_surface(
        b: Vec<Vec<f64>>,
        g: Vec<fn(f64) -> f64>,
        domain: Vec<(f64, f64)>,
    ) -> AnalyticSurface<impl Fn(&[f64]) -> f64 + Sync> {
        let tech = TechnologySpec::diewert(vec![b]).unwrap();
        AnalyticSurface::new(
            move |x: &[f64]| {
                let p: Vec<f64> = x.iter().zip(&g).map(|(v, f)| f(*v)).collect();
                profit_oracle(&tech, 1, &p, None).unwrap().0
            },
            domain,
        )
        .unwrap()
    }

    fn b3() -> Vec<Vec<f64>> {
        vec![
            vec![1.0, -0.2, -0.3],
            vec![-0.2, 2.0, -0.4],
            vec![-0.3, -0.4, 1.5],
        ]
    }

    #[test]
    fn identity_exp_and_quadratic_t() {
        let g: Vec<fn(f64) -> f64> = vec![|x| x * x + 1.0, f64::exp, |x| x];
        let pi = diewert_surface(b3(), g, vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)]);
        let anchors = domain_anchors(&pi);
        for &(x1, x2) in &[(0.6, 0.2), (1.0, 0.5), (1.9, 0.9)] {
            let sol = solve_t(&pi, &[x1, x2], &anchors).unwrap();
            let want = (x1 * x1 + 1.0) / (2.0 * x1);
            assert!((sol.t[0] / want - 1.0).abs() < 1e-3, "{} vs {want}", sol.t[0]);
            assert!((sol.t[1] - 1.0).abs() < 1e-4, "{}", sol.t[1]);
            assert!(sol.vanishing.is_empty());
        }
        let g: Vec<fn(f64) -> f64> = vec![|x| x, |x| x, |x| x];
        let pi = diewert_surface(b3(), g, vec![(0.5, 2.0), (0.5, 2.0), (0.5, 3.0)]);
        let sol = solve_t(&pi, &[1.2, 0.7], &domain_anchors(&pi)).unwrap();
        assert!((sol.t[0] / 1.2 - 1.0).abs() < 1e-4);
        assert!((sol.t[1] / 0.7 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn cobb_douglas_is_singular() {
        // y = k^a l^b, output price observed
        let (a, b) = (0.3, 0.4);
        let pi = AnalyticSurface::new(
            move |x: &[f64]| {
                let (pk, pl, po) = (x[0], x[1].exp(), x[2]);
                let s = 1.0 - a - b;
                s * (po * (a / pk).powf(a) * (b / pl).powf(b)).powf(1.0 / s)
            },
            vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)],
        )
        .unwrap();
        for anchors in [[1.0, 2.0], [0.6, 2.9], [1.5, 1.7]] {
            let diag = rank_matrix(&pi, &[1.0, 0.5], &anchors).unwrap();
            assert!(!diag.nonsingular, "cond {}", diag.condition_number);
        }
        assert!(matches!(
            solve_t(&pi, &[1.0, 0.5], &[1.0, 2.0]),
            Err(Error::RankCondition { .. })
        ));
    }

    #[test]
    fn diewert_rank_condition_matches_inequality() {
        let g: Vec<fn(f64) -> f64> = vec![|x| x, |x| x, |x| x];
        let pi = diewert_surface(b3(), g.clone(), vec![(0.5, 2.0), (0.5, 2.0), (0.5, 3.0)]);
        let diag = rank_matrix(&pi, &[1.0, 1.0], &[1.0, 2.0]).unwrap();
        let b = b3();
        let lhs = (b[0][0] + b[0][1]) / (b[1][1] + b[0][1]);
        assert!((lhs - b[0][2] / b[1][2]).abs() > 0.1);
        assert!(diag.nonsingular);
        assert_eq!(diag.matrix.len(), 2);

        // equality in the inequality: the two rows become proportional
        let mut bad = b3();
        bad[0][2] = -0.4 * (bad[0][0] + bad[0][1]) / (bad[1][1] + bad[0][1]);
        bad[2][0] = bad[0][2];
        let pi = diewert_surface(bad, g, vec![(0.5, 2.0), (0.5, 2.0), (0.5, 3.0)]);
        let diag = rank_matrix(&pi, &[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(!diag.nonsingular, "cond {}", diag.condition_number);
    }

    #[test]
    fn one_unobserved_price() {
        let pi = AnalyticSurface::new(|x: &[f64]| x[1] * x[1] / (4.0 * x[0]), vec![(0.5, 2.0), (0.5, 2.0)]).unwrap();
        let diag = rank_matrix(&pi, &[1.0], &[1.0]).unwrap();
        assert_eq!(diag.matrix.len(), 1);
        assert!(diag.nonsingular);
        let flat = AnalyticSurface::new(|x: &[f64]| x[1], vec![(0.5, 2.0), (0.5, 2.0)]).unwrap();
        assert!(!rank_matrix(&flat, &[1.0], &[1.0]).unwrap().nonsingular);
        assert!(rank_matrix(&pi, &[1.0], &[5.0]).is_err());
    }

    #[test]
    fn integrate_closed_forms() {
        let grid = linspace(0.0, 1.0, 1001);
        let (g, dropped) = integrate_g(&grid, &vec![1.0; grid.len()], 0.0, 1.0).unwrap();
        assert!(dropped.is_empty());
        for (x, v) in grid.iter().zip(&g) {
            assert!((v / x.exp() - 1.0).abs() <= 1e-4);
        }
        let grid = linspace(0.5, 3.0, 251);
        let x0 = grid[50];
        let (g, _) = integrate_g(&grid, &grid, x0, x0).unwrap();
        assert_eq!(g[50], x0);
        for (x, v) in grid.iter().zip(&g) {
            assert!((v / x - 1.0).abs() <= 1e-3);
        }
    }

    #[test]
    fn integrate_rejects_sign_change_and_skips_vanishing() {
        let grid = linspace(-1.0, 1.0, 21);
        let t: Vec<f64> = grid.iter().map(|x| x + 0.05).collect();
        assert!(matches!(integrate_g(&grid, &t, grid[15], 1.0), Err(Error::Integration(_))));
        let grid = linspace(0.0, 1.0, 11);
        let mut t = vec![1.0; 11];
        t[4] = 1e13;
        let (g, dropped) = integrate_g(&grid, &t, 0.0, 2.0).unwrap();
        assert_eq!(dropped, vec![grid[4]]);
        assert!((g[4] / (2.0 * 0.4f64.exp()) - 1.0).abs() < 1e-3);
        assert!(integrate_g(&grid, &t, 0.55, 2.0).is_err());
    }

    fn recovered_model() -> (AnalyticSurface<impl Fn(&[f64]) -> f64 + Sync>, ProxyModel) {
        let g: Vec<fn(f64) -> f64> = vec![|x| x * x + 1.0, f64::exp, |x| x];
        let pi = diewert_surface(b3(), g, vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)]);
        let cfg = ProxyConfig {
            grids: vec![linspace(0.5, 2.0, 301), linspace(0.0, 1.0, 201), linspace(0.5, 3.0, 11)],
            anchor: ProxyAnchor {
                x0: vec![1.0, 0.5, 1.5],
                p0: vec![2.0, 0.5f64.exp(), 1.5],
            },
            rank_anchors: None,
        };
        let model = recover_proxies(&pi, &cfg).unwrap();
        (pi, model)
    }

    #[test]
    fn recovers_nonlinear_proxies() {
        let (_, model) = recovered_model();
        assert!(model.gaps.is_empty());
        assert_eq!(model.goods[0].g(1.0), 2.0);
        for (x, v) in model.goods[0].grid.iter().zip(&model.goods[0].g_values) {
            assert!((v / (x * x + 1.0) - 1.0).abs() < 1e-3, "x={x}");
        }
        for (x, v) in model.goods[1].grid.iter().zip(&model.goods[1].g_values) {
            assert!((v / x.exp() - 1.0).abs() < 1e-4);
        }
        assert!(model.goods[2].observed_flag);
        assert_eq!(model.goods[2].g(2.345), 2.345);
        let back = ProxyModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn euler_residuals() {
        let (pi, model) = recovered_model();
        for &x in &[[0.8, 0.3, 1.2], [1.5, 0.7, 2.5], [1.1, 0.5, 0.9]] {
            let r = euler_system_residual(&pi, &model, &x, 1.0).unwrap();
            assert!(r.abs() <= 1e-3 * pi.value(&x).unwrap().abs(), "residual {r}");
        }
        let mut wrong = model.clone();
        let good = &mut wrong.goods[0];
        good.g_values = good.grid.iter().map(|x| 2.0 * x * x + 1.0).collect();
        let r = euler_system_residual(&pi, &wrong, &[1.5, 0.7, 2.5], 1.0).unwrap();
        assert!(r.abs() > 1e-2 * pi.value(&[1.5, 0.7, 2.5]).unwrap().abs());

        let flat = AnalyticSurface::new(|_: &[f64]| 3.0, vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)]).unwrap();
        assert!(euler_system_residual(&flat, &model, &[1.0, 0.5, 1.0], 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn scaling_g_leaves_t_unchanged() {
        let g1: Vec<fn(f64) -> f64> = vec![|x| x * x + 1.0, f64::exp, |x| x];
        let g2: Vec<fn(f64) -> f64> = vec![|x| 3.0 * (x * x + 1.0), |x| 0.5 * x.exp(), |x| x];
        let dom = vec![(0.5, 2.0), (0.0, 1.0), (0.5, 3.0)];
        let a = diewert_surface(b3(), g1, dom.clone());
        let b = diewert_surface(b3(), g2, dom);
        let anchors = domain_anchors(&a);
        let ta = solve_t(&a, &[1.3, 0.4], &anchors).unwrap().t;
        let tb = solve_t(&b, &[1.3, 0.4], &anchors).unwrap().t;
        for (u, v) in ta.iter().zip(&tb) {
            assert!((u - v).abs() < 1e-6 * u.abs());
        }
    }

    #[test]
    fn subset_residual_with_fixed_contribution() {
        // goods 0 and 1 enter additively through r̃; goods 2, 3 are Diewert with proxies
        let tech = TechnologySpec::diewert(vec![vec![vec![1.0, -0.3], vec![-0.3, 1.2]]]).unwrap();
        let r_tilde = |x: &[f64]| 0.7 * x[0] - 0.2 * x[1];
        let pi = AnalyticSurface::new(
            move |x: &[f64]| {
                let p = [x[2] * x[2] + 1.0, x[3]];
                profit_oracle(&tech, 1, &p, None).unwrap().0 + r_tilde(x)
            },
            vec![(1.0, 2.0), (1.0, 2.0), (0.5, 2.0), (0.5, 2.0)],
        )
        .unwrap();
        let model = ProxyModel {
            version: 1,
            goods: vec![
                ProxyGood::observed(linspace(1.0, 2.0, 5)),
                ProxyGood::observed(linspace(1.0, 2.0, 5)),
                ProxyGood {
                    grid: linspace(0.5, 2.0, 601),
                    g_values: linspace(0.5, 2.0, 601).iter().map(|x| x * x + 1.0).collect(),
                    observed_flag: false,
                },
                ProxyGood::observed(linspace(0.5, 2.0, 5)),
            ],
            anchor: ProxyAnchor {
                x0: vec![1.0; 4],
                p0: vec![1.0, 1.0, 2.0, 1.0],
            },
            diagnostics: vec![],
            gaps: vec![],
        };
        let x = [1.3, 1.6, 1.1, 1.4];
        let r = extended_euler_residual(&pi, &model, &x, &[2, 3], r_tilde(&x)).unwrap();
        assert!(r.abs() < 1e-4, "{r}");
    }
}
