use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{cumulative_trapezoid, grid_derivative, interp_linear};

/// Land developers with `y_o = A(e) m^γ`, materials priced at one, and land
/// priced so that average profit in each market is zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HousingDgp {
    pub productivity: Vec<f64>,
    pub weights: Vec<f64>,
    pub gamma: f64,
}

/// One market: the unobserved housing price, the average value of housing
/// per acre and the land price.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HousingMarket {
    pub p_o: f64,
    pub vbar: f64,
    pub p_l: f64,
}

impl HousingDgp {
    pub fn validate(&self) -> Result<()> {
        if self.productivity.is_empty() || self.productivity.len() != self.weights.len() {
            return Err(Error::config("need one weight per productivity level"));
        }
        if self.productivity.iter().chain(&self.weights).any(|v| !(*v > 0.0)) {
            return Err(Error::config("productivities and weights must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Value of housing per acre built by type `e` (0-based) at price `p_o`.
    pub fn value(&self, p_o: f64, e: usize) -> f64 {
        let a = self.productivity[e];
        let m = (self.gamma * a * p_o).powf(1.0 / (1.0 - self.gamma));
        m / self.gamma
    }

    /// Population average value at `p_o`.
    pub fn mean_value(&self, p_o: f64) -> f64 {
        let total: f64 = self.weights.iter().sum();
        (0..self.productivity.len())
            .map(|e| self.weights[e] / total * self.value(p_o, e))
            .sum()
    }

    /// The true map from average value to housing price.
    pub fn g(&self, vbar: f64) -> f64 {
        (vbar / self.mean_value(1.0)).powf(1.0 - self.gamma)
    }

    /// Markets with log-uniform housing prices on `[lo, hi]`; each market's
    /// firms draw types independently of the price.
    pub fn simulate(&self, num_markets: usize, firms: usize, lo: f64, hi: f64, seed: u64) -> Result<Vec<HousingMarket>> {
        self.validate()?;
        if num_markets == 0 || firms == 0 {
            return Err(Error::EmptyDataset);
        }
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::config("price range must be positive and nonempty"));
        }
        let types = WeightedIndex::new(&self.weights).map_err(|e| Error::config(e.to_string()))?;
        Ok((0..num_markets as u64)
            .into_par_iter()
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(id);
                let p_o = (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
                let vbar = (0..firms).map(|_| self.value(p_o, types.sample(&mut rng))).sum::<f64>() / firms as f64;
                // revenue net of materials is (1 - γ) v for every type
                HousingMarket {
                    p_o,
                    vbar,
                    p_l: (1.0 - self.gamma) * vbar,
                }
            })
            .collect())
    }
}

/// Sorts markets by average value and averages them into `bins` equal-count
/// groups, giving an increasing `(v̄, p_l)` table.
pub fn tabulate_markets(markets: &[HousingMarket], bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if markets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut m = markets.to_vec();
    m.sort_by(|a, b| a.vbar.total_cmp(&b.vbar));
    let bins = bins.clamp(1, m.len());
    let mut vbar = Vec::with_capacity(bins);
    let mut pl = Vec::with_capacity(bins);
    for b in 0..bins {
        let chunk = &m[b * m.len() / bins..(b + 1) * m.len() / bins];
        let n = chunk.len() as f64;
        vbar.push(chunk.iter().map(|c| c.vbar).sum::<f64>() / n);
        pl.push(chunk.iter().map(|c| c.p_l).sum::<f64>() / n);
    }
    Ok((vbar, pl))
}

/// Integrates `log g(v̄) = log p0 + ∫ π̃'(s)/s ds` over the tabulated map
/// `v̄ ↦ p_l = π̃(v̄)`, anchored at `g(v0) = p0`.
///
/// The integral is taken in `log s`, so the integrand is `π̃'` itself.
pub fn recover_g_housing(vbar: &[f64], p_l: &[f64], v0: f64, p0: f64) -> Result<Vec<f64>> {
    if vbar.len() != p_l.len() {
        return Err(Error::Dimension {
            expected: vbar.len(),
            found: p_l.len(),
        });
    }
    if vbar.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: vbar.len(),
        });
    }
    if vbar.iter().any(|v| !(*v > 0.0)) || !(v0 > 0.0) {
        return Err(Error::arg("average housing values must be positive"));
    }
    if vbar.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("average housing values must be strictly increasing"));
    }
    if !(p0 > 0.0) {
        return Err(Error::arg("anchor price must be positive"));
    }
    if v0 < vbar[0] || v0 > vbar[vbar.len() - 1] {
        return Err(Error::Precondition(format!("anchor {v0} outside the tabulated range")));
    }
    let dpi = grid_derivative(vbar, p_l);
    let u: Vec<f64> = vbar.iter().map(|v| v.ln()).collect();
    let log_g = cumulative_trapezoid(&u, &dpi, 0);
    let at_anchor = interp_linear(&u, &log_g, v0.ln());
    Ok(vbar
        .iter()
        .zip(&log_g)
        .map(|(v, l)| if *v == v0 { p0 } else { p0 * (l - at_anchor).exp() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_profit_gives_power_law() {
        let vbar: Vec<f64> = (0..200).map(|i| 1.0 + 9.0 * i as f64 / 199.0).collect();
        let c = 0.35;
        let pl: Vec<f64> = vbar.iter().map(|v| c * v).collect();
        let v0 = vbar[40];
        let g = recover_g_housing(&vbar, &pl, v0, 2.0).unwrap();
        assert_eq!(g[40], 2.0);
        for (v, gv) in vbar.iter().zip(&g) {
            assert!((gv / (2.0 * (v / v0).powf(c)) - 1.0).abs() < 1e-12);
        }
        let flat = recover_g_housing(&vbar, &vec![4.0; 200], 3.3, 1.5).unwrap();
        assert!(flat.iter().all(|v| (v - 1.5).abs() < 1e-15));
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(recover_g_housing(&[0.0, 1.0], &[0.0, 1.0], 1.0, 1.0).is_err());
        assert!(recover_g_housing(&[2.0, 1.0], &[0.0, 1.0], 1.0, 1.0).is_err());
        assert!(recover_g_housing(&[1.0, 2.0], &[0.0, 1.0], 3.0, 1.0).is_err());
    }

    #[test]
    fn simulated_housing_markets() {
        let dgp = HousingDgp {
            productivity: vec![0.8, 1.0, 1.3],
            weights: vec![0.3, 0.4, 0.3],
            gamma: 0.6,
        };
        let markets = dgp.simulate(400, 20_000, 0.5, 2.0, 7).unwrap();
        let (vbar, pl) = tabulate_markets(&markets, 40).unwrap();
        let v0 = vbar[20];
        let g = recover_g_housing(&vbar, &pl, v0, dgp.g(v0)).unwrap();
        let worst = vbar
            .iter()
            .zip(&g)
            .map(|(v, gv)| (gv / dgp.g(*v) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
        // the population relation holds at each market up to type-mix noise
        let worst = markets
            .iter()
            .map(|m| (interp_linear(&vbar, &g, m.vbar) / m.p_o - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.01, "{worst}");
    }
}
