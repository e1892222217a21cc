//! Synthetic firm technologies nested in a discrete productivity index.
//!
//! Types are indexed `1..=d_e`. Single-input technologies use the netput
//! `(y_o, -l)` with prices `(p_o, p_l)`; Diewert technologies use the
//! generalized Leontief profit function directly.

mod dataset;
mod market;

pub use dataset::{generate_dataset, Dataset, ObservationRecord};
pub use market::{
    gen_demand_proxy, DemandFn, EntryRule, MarketConfig, NoiseShape, NoiseSpec, PriceLaw,
    ProxyColumn, ProxyFn, RestrictedLaw,
};

use serde::{Deserialize, Serialize};

use crate::convex::PriceRay;
use crate::error::{Error, Result};

/// One concave power piece `scale * (l - shift)^exponent + offset` on `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerPiece {
    pub lower: f64,
    #[serde(default)]
    pub upper: Option<f64>,
    pub scale: f64,
    #[serde(default)]
    pub shift: f64,
    pub exponent: f64,
    #[serde(default)]
    pub offset: f64,
}

impl PowerPiece {
    fn value(&self, l: f64) -> f64 {
        self.scale * (l - self.shift).max(0.0).powf(self.exponent) + self.offset
    }

    fn slope(&self, l: f64) -> f64 {
        let u = l - self.shift;
        if self.exponent == 1.0 {
            self.scale
        } else {
            self.scale * self.exponent * u.powf(self.exponent - 1.0)
        }
    }

    fn upper(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TechnologyKind {
    /// `f(l, e) = A(e) * l^exponent` with `0 < exponent < 1`.
    PowerScaled { productivity: Vec<f64>, exponent: f64 },
    /// One concave piecewise power production function per type.
    PiecewiseKinked { types: Vec<Vec<PowerPiece>> },
    /// `pi(p, e) = sum_s sum_j b_sj(e) sqrt(p_s p_j)`, one symmetric matrix per type.
    DiewertGl { coefficients: Vec<Vec<Vec<f64>>> },
    /// `A(e) * fbar(l)` with `fbar` piecewise linear and concave through the nodes.
    HicksNeutral {
        productivity: Vec<f64>,
        inputs: Vec<f64>,
        outputs: Vec<f64>,
    },
}

/// A family of nested technologies.
///
/// When restricted quantities are present the restricted profit is the
/// unrestricted one scaled by `prod_r y_r^{alpha_r}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TechnologySpec {
    #[serde(flatten)]
    pub kind: TechnologyKind,
    #[serde(default)]
    pub restricted_exponents: Vec<f64>,
}

impl TechnologySpec {
    pub fn new(kind: TechnologyKind) -> Result<Self> {
        let spec = Self {
            kind,
            restricted_exponents: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_restricted(mut self, exponents: Vec<f64>) -> Result<Self> {
        self.restricted_exponents = exponents;
        self.validate()?;
        Ok(self)
    }

    pub fn power_scaled(productivity: Vec<f64>, exponent: f64) -> Result<Self> {
        Self::new(TechnologyKind::PowerScaled {
            productivity,
            exponent,
        })
    }

    pub fn diewert(coefficients: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        Self::new(TechnologyKind::DiewertGl { coefficients })
    }

    /// The three-type economy with nonmonotone supply: `l^0.4`, `2 l^0.4`
    /// and a kinked function lying between them at high input levels.
    pub fn nonmonotone_supply_triple() -> Self {
        let base = 0.01f64.powf(0.2);
        let f3 = vec![
            PowerPiece {
                lower: 0.0,
                upper: Some(0.01),
                scale: 1.0,
                shift: 0.0,
                exponent: 0.2,
                offset: 0.0,
            },
            PowerPiece {
                lower: 0.01,
                upper: Some(0.03),
                scale: 7.0,
                shift: 0.01,
                exponent: 1.0,
                offset: base,
            },
            PowerPiece {
                lower: 0.03,
                upper: None,
                scale: 2.0,
                shift: 0.0,
                exponent: 0.4,
                offset: 7.0 * 0.02 + base - 2.0 * 0.03f64.powf(0.4),
            },
        ];
        let power = |scale: f64| {
            vec![PowerPiece {
                lower: 0.0,
                upper: None,
                scale,
                shift: 0.0,
                exponent: 0.4,
                offset: 0.0,
            }]
        };
        Self::new(TechnologyKind::PiecewiseKinked {
            types: vec![power(1.0), power(2.0), f3],
        })
        .expect("built-in technology is valid")
    }

    pub fn num_types(&self) -> usize {
        match &self.kind {
            TechnologyKind::PowerScaled { productivity, .. }
            | TechnologyKind::HicksNeutral { productivity, .. } => productivity.len(),
            TechnologyKind::PiecewiseKinked { types } => types.len(),
            TechnologyKind::DiewertGl { coefficients } => coefficients.len(),
        }
    }

    /// Number of flexible goods (length of the price vector).
    pub fn dim(&self) -> usize {
        match &self.kind {
            TechnologyKind::DiewertGl { coefficients } => coefficients[0].len(),
            _ => 2,
        }
    }

    pub fn num_restricted(&self) -> usize {
        self.restricted_exponents.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_types() == 0 {
            return Err(Error::config("technology needs at least one type"));
        }
        if self
            .restricted_exponents
            .iter()
            .any(|a| !a.is_finite() || *a < 0.0)
        {
            return Err(Error::config("restricted exponents must be finite and nonnegative"));
        }
        match &self.kind {
            TechnologyKind::PowerScaled {
                productivity,
                exponent,
            } => {
                if !(*exponent > 0.0 && *exponent < 1.0) {
                    return Err(Error::config("power exponent must lie in (0, 1)"));
                }
                if productivity.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::config("productivity must be positive"));
                }
            }
            TechnologyKind::PiecewiseKinked { types } => {
                for pieces in types {
                    validate_pieces(pieces)?;
                }
            }
            TechnologyKind::DiewertGl { coefficients } => {
                let d = coefficients[0].len();
                if d < 2 {
                    return Err(Error::config("Diewert technology needs at least two goods"));
                }
                for b in coefficients {
                    if b.len() != d || b.iter().any(|row| row.len() != d) {
                        return Err(Error::config("Diewert coefficient matrices must be d x d"));
                    }
                    for s in 0..d {
                        if b[s][s] < 0.0 {
                            return Err(Error::config("Diewert diagonal coefficients must be >= 0"));
                        }
                        for j in 0..d {
                            if (b[s][j] - b[j][s]).abs() > 1e-12 {
                                return Err(Error::config("Diewert coefficients must be symmetric"));
                            }
                            if s != j && b[s][j] > 0.0 {
                                return Err(Error::config(
                                    "Diewert off-diagonal coefficients must be <= 0",
                                ));
                            }
                        }
                    }
                }
            }
            TechnologyKind::HicksNeutral {
                productivity,
                inputs,
                outputs,
            } => {
                if productivity.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::config("productivity must be positive"));
                }
                if inputs.len() < 2 || inputs.len() != outputs.len() {
                    return Err(Error::config("Hicks-neutral table needs >= 2 matching nodes"));
                }
                if inputs[0] != 0.0 || inputs.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::config("input nodes must start at 0 and increase"));
                }
                let slopes: Vec<f64> = inputs
                    .windows(2)
                    .zip(outputs.windows(2))
                    .map(|(l, f)| (f[1] - f[0]) / (l[1] - l[0]))
                    .collect();
                if slopes.iter().any(|s| *s < 0.0) || slopes.windows(2).any(|w| w[1] > w[0] + 1e-12)
                {
                    return Err(Error::config("tabulated production must be increasing and concave"));
                }
            }
        }
        Ok(())
    }

    fn check_type(&self, e: usize) -> Result<()> {
        if e == 0 || e > self.num_types() {
            return Err(Error::arg(format!(
                "type {e} outside 1..={}",
                self.num_types()
            )));
        }
        Ok(())
    }

    fn restricted_factor(&self, y_restricted: Option<&[f64]>) -> Result<f64> {
        let k = self.num_restricted();
        match y_restricted {
            None if k == 0 => Ok(1.0),
            None => Err(Error::arg("restricted quantities required")),
            Some(y) => {
                if y.len() != k {
                    return Err(Error::Dimension {
                        expected: k,
                        found: y.len(),
                    });
                }
                if y.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::arg("restricted quantities must be positive"));
                }
                Ok(y.iter()
                    .zip(&self.restricted_exponents)
                    .map(|(v, a)| v.powf(*a))
                    .product())
            }
        }
    }
}

fn validate_pieces(pieces: &[PowerPiece]) -> Result<()> {
    if pieces.is_empty() || pieces[0].lower != 0.0 {
        return Err(Error::config("piecewise technology must start at l = 0"));
    }
    for (i, pc) in pieces.iter().enumerate() {
        if !(pc.scale > 0.0) || !(pc.exponent > 0.0 && pc.exponent <= 1.0) {
            return Err(Error::config("pieces need positive scale and exponent in (0, 1]"));
        }
        if pc.shift > pc.lower {
            return Err(Error::config("piece shift must not exceed its lower end"));
        }
        let last = i + 1 == pieces.len();
        match (pc.upper, last) {
            (None, false) => return Err(Error::config("only the last piece may be unbounded")),
            (Some(u), _) if u <= pc.lower => return Err(Error::config("empty piece")),
            _ => {}
        }
        if let Some(next) = pieces.get(i + 1) {
            let b = pc.upper();
            if (next.lower - b).abs() > 1e-15 {
                return Err(Error::config("pieces must be contiguous"));
            }
            let gap = (pc.value(b) - next.value(b)).abs();
            if gap > 1e-9 {
                return Err(Error::config(format!("production function jumps by {gap} at {b}")));
            }
            if next.slope(b) > pc.slope(b) + 1e-9 {
                return Err(Error::config(format!("production function is not concave at {b}")));
            }
        }
    }
    Ok(())
}

fn single_input_profit(p_o: f64, p_l: f64, l: f64, f: f64) -> f64 {
    p_o * f - p_l * l
}

fn piecewise_optimum(pieces: &[PowerPiece], p_o: f64, p_l: f64) -> Result<(f64, f64)> {
    let last = pieces.last().expect("validated");
    if last.upper.is_none() && last.exponent == 1.0 && p_o * last.scale > p_l {
        return Err(Error::Unbounded(
            "linear tail outearns the input price".into(),
        ));
    }
    let mut best = (0.0, pieces[0].value(0.0));
    let mut best_profit = single_input_profit(p_o, p_l, best.0, best.1);
    let mut consider = |l: f64, f: f64| {
        let v = single_input_profit(p_o, p_l, l, f);
        if v > best_profit {
            best_profit = v;
            best = (l, f);
        }
    };
    for pc in pieces {
        let (lo, hi) = (pc.lower, pc.upper());
        if hi.is_finite() {
            consider(hi, pc.value(hi));
        }
        if pc.exponent < 1.0 {
            // first-order condition p_o * scale * k * u^(k-1) = p_l
            let u = (p_l / (p_o * pc.scale * pc.exponent)).powf(1.0 / (pc.exponent - 1.0));
            let l = (pc.shift + u).clamp(lo, hi);
            consider(l, pc.value(l));
        }
    }
    Ok(best)
}

fn tabulated_optimum(
    a: f64,
    inputs: &[f64],
    outputs: &[f64],
    p_o: f64,
    p_l: f64,
) -> Result<(f64, f64)> {
    let n = inputs.len();
    let tail = (outputs[n - 1] - outputs[n - 2]) / (inputs[n - 1] - inputs[n - 2]);
    if p_o * a * tail > p_l {
        return Err(Error::Unbounded(
            "extrapolated production outearns the input price".into(),
        ));
    }
    let mut best = (0.0, a * outputs[0]);
    let mut best_profit = single_input_profit(p_o, p_l, 0.0, best.1);
    for (l, f) in inputs.iter().zip(outputs) {
        let v = single_input_profit(p_o, p_l, *l, a * f);
        if v > best_profit {
            best_profit = v;
            best = (*l, a * f);
        }
    }
    Ok(best)
}

/// Restricted profit and an optimal flexible netput for type `e` at prices `p`.
pub fn profit_oracle(
    tech: &TechnologySpec,
    e: usize,
    p: &[f64],
    y_restricted: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    tech.check_type(e)?;
    if p.len() != tech.dim() {
        return Err(Error::Dimension {
            expected: tech.dim(),
            found: p.len(),
        });
    }
    if p.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::arg("prices must be strictly positive"));
    }
    let factor = tech.restricted_factor(y_restricted)?;
    let finish = |profit: f64, netput: Vec<f64>| {
        (profit * factor, netput.into_iter().map(|v| v * factor).collect())
    };
    match &tech.kind {
        TechnologyKind::DiewertGl { coefficients } => {
            let b = &coefficients[e - 1];
            let d = p.len();
            let mut profit = 0.0;
            let mut supply = vec![0.0; d];
            for s in 0..d {
                for j in 0..d {
                    profit += b[s][j] * (p[s] * p[j]).sqrt();
                    supply[s] += b[s][j] * (p[j] / p[s]).sqrt();
                }
            }
            Ok(finish(profit, supply))
        }
        TechnologyKind::PowerScaled {
            productivity,
            exponent,
        } => {
            let (a, g) = (productivity[e - 1], *exponent);
            let l = (g * a * p[0] / p[1]).powf(1.0 / (1.0 - g));
            let y = a * l.powf(g);
            Ok(finish(single_input_profit(p[0], p[1], l, y), vec![y, -l]))
        }
        TechnologyKind::PiecewiseKinked { types } => {
            let (l, y) = piecewise_optimum(&types[e - 1], p[0], p[1])?;
            Ok(finish(single_input_profit(p[0], p[1], l, y), vec![y, -l]))
        }
        TechnologyKind::HicksNeutral {
            productivity,
            inputs,
            outputs,
        } => {
            let (l, y) = tabulated_optimum(productivity[e - 1], inputs, outputs, p[0], p[1])?;
            Ok(finish(single_input_profit(p[0], p[1], l, y), vec![y, -l]))
        }
    }
}

/// True iff profits are strictly increasing in the type at every probe ray.
pub fn nested_check(tech: &TechnologySpec, probe_rays: &[PriceRay]) -> bool {
    if probe_rays.is_empty() {
        return false;
    }
    let y_r = vec![1.0; tech.num_restricted()];
    let y_r = (!y_r.is_empty()).then_some(y_r.as_slice());
    probe_rays.iter().all(|ray| {
        let values: Option<Vec<f64>> = (1..=tech.num_types())
            .map(|e| profit_oracle(tech, e, ray.components(), y_r).ok().map(|r| r.0))
            .collect();
        values.is_some_and(|v| v.windows(2).all(|w| w[0] < w[1]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::dot;

    const P: [f64; 2] = [0.12, 1.0];

    fn diewert_pair() -> TechnologySpec {
        TechnologySpec::diewert(vec![
            vec![vec![1.0, -0.3], vec![-0.3, 2.0]],
            vec![vec![1.5, -0.3], vec![-0.3, 2.4]],
        ])
        .unwrap()
    }

    fn probe_arc(n: usize) -> Vec<PriceRay> {
        (0..n)
            .map(|k| PriceRay::from_angle(0.05 + 1.45 * k as f64 / (n - 1) as f64).unwrap())
            .collect()
    }

    #[test]
    fn nonmonotone_supply_closed_forms() {
        let t = TechnologySpec::nonmonotone_supply_triple();
        let (_, y1) = profit_oracle(&t, 1, &P, None).unwrap();
        let (_, y2) = profit_oracle(&t, 2, &P, None).unwrap();
        let (_, y3) = profit_oracle(&t, 3, &P, None).unwrap();
        assert!((-y1[1] - 0.048f64.powf(5.0 / 3.0)).abs() < 1e-12);
        assert!((y1[0] - 0.048f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((-y2[1] - 0.096f64.powf(5.0 / 3.0)).abs() < 1e-12);
        assert!((y2[0] - 2.0 * 0.096f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert!((-y3[1] - 0.024f64.powf(1.25)).abs() < 1e-12);
        assert!((y3[0] - 0.024f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn triple_is_nested() {
        let t = TechnologySpec::nonmonotone_supply_triple();
        assert!(nested_check(&t, &probe_arc(40)));
    }

    #[test]
    fn identical_types_are_not_nested() {
        let t = TechnologySpec::power_scaled(vec![1.0, 1.0], 0.5).unwrap();
        assert!(!nested_check(&t, &probe_arc(5)));
        assert!(!nested_check(&t, &[]));
    }

    #[test]
    fn diewert_with_diagonal_increment_is_nested() {
        assert!(nested_check(&diewert_pair(), &probe_arc(30)));
    }

    #[test]
    fn diewert_supply_is_the_price_gradient() {
        let t = diewert_pair();
        let p = [0.7, 1.3];
        let (pi, y) = profit_oracle(&t, 2, &p, None).unwrap();
        assert!((dot(&p, &y) - pi).abs() < 1e-12);
        let h = 1e-6;
        let (up, _) = profit_oracle(&t, 2, &[p[0] + h, p[1]], None).unwrap();
        let (dn, _) = profit_oracle(&t, 2, &[p[0] - h, p[1]], None).unwrap();
        assert!(((up - dn) / (2.0 * h) - y[0]).abs() < 1e-7);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(TechnologySpec::power_scaled(vec![1.0], 1.2).is_err());
        assert!(TechnologySpec::diewert(vec![vec![vec![1.0, 0.2], vec![0.2, 1.0]]]).is_err());
        assert!(TechnologySpec::diewert(vec![vec![vec![1.0, -0.2], vec![-0.1, 1.0]]]).is_err());
        let convex_table = TechnologyKind::HicksNeutral {
            productivity: vec![1.0],
            inputs: vec![0.0, 1.0, 2.0],
            outputs: vec![0.0, 1.0, 3.0],
        };
        assert!(TechnologySpec::new(convex_table).is_err());
    }

    #[test]
    fn bad_type_and_prices() {
        let t = diewert_pair();
        assert!(profit_oracle(&t, 0, &[1.0, 1.0], None).is_err());
        assert!(profit_oracle(&t, 3, &[1.0, 1.0], None).is_err());
        assert!(profit_oracle(&t, 1, &[0.0, 1.0], None).is_err());
        assert!(matches!(
            profit_oracle(&t, 1, &[1.0, 1.0, 1.0], None),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn hicks_neutral_unbounded_tail() {
        let t = TechnologySpec::new(TechnologyKind::HicksNeutral {
            productivity: vec![1.0, 3.0],
            inputs: vec![0.0, 1.0, 2.0],
            outputs: vec![0.0, 2.0, 3.0],
        })
        .unwrap();
        assert!(profit_oracle(&t, 1, &[1.0, 1.5], None).is_ok());
        assert!(matches!(
            profit_oracle(&t, 2, &[1.0, 1.5], None),
            Err(Error::Unbounded(_))
        ));
        let (pi, y) = profit_oracle(&t, 1, &[1.0, 1.5], None).unwrap();
        assert!((pi - 0.5).abs() < 1e-12 && (y[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_quantities_scale_profit() {
        let t = diewert_pair().with_restricted(vec![0.5]).unwrap();
        let (a, _) = profit_oracle(&t, 1, &[1.0, 1.0], Some(&[4.0])).unwrap();
        let (b, _) = profit_oracle(&t, 1, &[1.0, 1.0], Some(&[1.0])).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-12);
        assert!(profit_oracle(&t, 1, &[1.0, 1.0], None).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn techs() -> Vec<TechnologySpec> {
            vec![
                TechnologySpec::nonmonotone_supply_triple(),
                diewert_pair(),
                TechnologySpec::power_scaled(vec![1.0, 1.7], 0.6).unwrap(),
            ]
        }

        proptest! {
            #[test]
            fn homogeneity_of_profit_and_optimizer(
                p0 in 0.05f64..3.0, p1 in 0.05f64..3.0, lam in 0.1f64..20.0, which in 0usize..3, e in 1usize..3
            ) {
                let t = &techs()[which];
                let (a, ya) = profit_oracle(t, e, &[p0, p1], None).unwrap();
                let (b, yb) = profit_oracle(t, e, &[lam * p0, lam * p1], None).unwrap();
                prop_assert!((b - lam * a).abs() <= 1e-9 * (1.0 + b.abs()));
                for (u, v) in ya.iter().zip(&yb) {
                    prop_assert!((u - v).abs() <= 1e-9 * (1.0 + u.abs()));
                }
            }

            #[test]
            fn weak_axiom_of_profit_maximization(
                p in prop::array::uniform2(0.05f64..3.0),
                q in prop::array::uniform2(0.05f64..3.0),
                which in 0usize..3, e in 1usize..3
            ) {
                let t = &techs()[which];
                let (_, yp) = profit_oracle(t, e, &p, None).unwrap();
                let (pq, yq) = profit_oracle(t, e, &q, None).unwrap();
                prop_assert!((dot(&q, &yq) - pq).abs() <= 1e-10 * (1.0 + pq.abs()));
                prop_assert!(dot(&q, &yq) >= dot(&q, &yp) - 1e-10 * (1.0 + pq.abs()));
            }
        }
    }
}
