use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::bisect;

/// Distribution of market price vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriceLaw {
    /// Each market picks one of the listed price vectors uniformly.
    Discrete { prices: Vec<Vec<f64>> },
    /// Each market picks one point of the product grid uniformly.
    Grid { axes: Vec<Vec<f64>> },
    /// Independent log-uniform components.
    LogUniform { lower: Vec<f64>, upper: Vec<f64> },
    /// Unit rays with angle uniform on `[theta_lo, theta_hi]` (two goods).
    Arc { theta_lo: f64, theta_hi: f64 },
}

impl PriceLaw {
    pub fn dim(&self) -> usize {
        match self {
            PriceLaw::Discrete { prices } => prices.first().map_or(0, Vec::len),
            PriceLaw::Grid { axes } => axes.len(),
            PriceLaw::LogUniform { lower, .. } => lower.len(),
            PriceLaw::Arc { .. } => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        let ok = match self {
            PriceLaw::Discrete { prices } => {
                !prices.is_empty()
                    && prices.iter().all(|p| p.len() == prices[0].len() && positive(p))
            }
            PriceLaw::Grid { axes } => axes.iter().all(|a| !a.is_empty() && positive(a)),
            PriceLaw::LogUniform { lower, upper } => {
                lower.len() == upper.len()
                    && positive(lower)
                    && positive(upper)
                    && lower.iter().zip(upper).all(|(a, b)| a <= b)
            }
            PriceLaw::Arc { theta_lo, theta_hi } => {
                0.0 < *theta_lo && theta_lo <= theta_hi && *theta_hi < std::f64::consts::FRAC_PI_2
            }
        };
        if !ok || self.dim() == 0 {
            return Err(Error::config("price law must produce strictly positive prices"));
        }
        Ok(())
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            PriceLaw::Discrete { prices } => prices[rng.random_range(0..prices.len())].clone(),
            PriceLaw::Grid { axes } => axes
                .iter()
                .map(|a| a[rng.random_range(0..a.len())])
                .collect(),
            PriceLaw::LogUniform { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| {
                    if a == b {
                        *a
                    } else {
                        (rng.random_range(a.ln()..b.ln())).exp()
                    }
                })
                .collect(),
            PriceLaw::Arc { theta_lo, theta_hi } => {
                let t = if theta_lo == theta_hi {
                    *theta_lo
                } else {
                    rng.random_range(*theta_lo..*theta_hi)
                };
                vec![t.cos(), t.sin()]
            }
        }
    }
}

/// A strictly increasing map `p = g(x)` from a proxy to a price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxyFn {
    Identity,
    Exp,
    /// `x^2 + 1` on `x > 0`.
    SquarePlusOne,
    /// `x^exponent` on `x > 0`, `exponent > 0`.
    Power { exponent: f64 },
    Affine { intercept: f64, slope: f64 },
}

impl ProxyFn {
    pub fn g(&self, x: f64) -> f64 {
        match self {
            ProxyFn::Identity => x,
            ProxyFn::Exp => x.exp(),
            ProxyFn::SquarePlusOne => x * x + 1.0,
            ProxyFn::Power { exponent } => x.powf(*exponent),
            ProxyFn::Affine { intercept, slope } => intercept + slope * x,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ProxyFn::Identity => 1.0,
            ProxyFn::Exp => x.exp(),
            ProxyFn::SquarePlusOne => 2.0 * x,
            ProxyFn::Power { exponent } => exponent * x.powf(exponent - 1.0),
            ProxyFn::Affine { slope, .. } => *slope,
        }
    }

    pub fn inverse(&self, p: f64) -> Result<f64> {
        let x = match self {
            ProxyFn::Identity => p,
            ProxyFn::Exp => p.ln(),
            ProxyFn::SquarePlusOne => (p - 1.0).sqrt(),
            ProxyFn::Power { exponent } => p.powf(1.0 / exponent),
            ProxyFn::Affine { intercept, slope } => (p - intercept) / slope,
        };
        if !x.is_finite() {
            return Err(Error::arg(format!("price {p} outside the range of the proxy map")));
        }
        Ok(x)
    }

    fn validate(&self) -> Result<()> {
        match self {
            ProxyFn::Power { exponent } if !(*exponent > 0.0) => {
                Err(Error::config("power proxy exponent must be positive"))
            }
            ProxyFn::Affine { slope, .. } if !(*slope > 0.0) => {
                Err(Error::config("affine proxy slope must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Aggregate demand `D(p)` for one good, required to be strictly decreasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DemandFn {
    /// `scale * p^(-elasticity)`.
    Power { scale: f64, elasticity: f64 },
    /// `intercept - slope * p`.
    Linear { intercept: f64, slope: f64 },
    /// Linear interpolation through `(prices, quantities)`.
    Tabulated {
        prices: Vec<f64>,
        quantities: Vec<f64>,
    },
}

impl DemandFn {
    pub fn eval(&self, p: f64) -> f64 {
        match self {
            DemandFn::Power { scale, elasticity } => scale * p.powf(-elasticity),
            DemandFn::Linear { intercept, slope } => intercept - slope * p,
            DemandFn::Tabulated { prices, quantities } => {
                crate::numeric::interp_linear(prices, quantities, p)
            }
        }
    }

    /// Validates strict decrease on `[lo, hi]`.
    pub fn validate(&self, lo: f64, hi: f64) -> Result<()> {
        match self {
            DemandFn::Power { scale, elasticity } if !(*scale > 0.0 && *elasticity > 0.0) => {
                return Err(Error::config("power demand needs positive scale and elasticity"));
            }
            DemandFn::Linear { slope, .. } if !(*slope > 0.0) => {
                return Err(Error::config("linear demand needs a positive slope"));
            }
            DemandFn::Tabulated { prices, quantities } => {
                if prices.len() < 2
                    || prices.len() != quantities.len()
                    || prices.windows(2).any(|w| w[1] <= w[0])
                {
                    return Err(Error::config("tabulated demand needs increasing price nodes"));
                }
                if quantities.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::config("configured demand is not strictly decreasing"));
                }
            }
            _ => {}
        }
        let n = 256;
        let mut prev = f64::INFINITY;
        for k in 0..=n {
            let p = lo + (hi - lo) * k as f64 / n as f64;
            let q = self.eval(p);
            if !q.is_finite() || q >= prev {
                return Err(Error::config(format!(
                    "configured demand is not strictly decreasing near p = {p}"
                )));
            }
            prev = q;
        }
        Ok(())
    }

    /// Price `g(x) = D^{-1}(x)` found by bisection on `[lo, hi]`.
    pub fn invert(&self, quantity: f64, lo: f64, hi: f64) -> Result<f64> {
        bisect(|p| self.eval(p) - quantity, lo, hi, 1e-14 * (1.0 + hi.abs()))
    }
}

/// What the analyst observes in place of each flexible price.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxyColumn {
    Price,
    /// `x = g^{-1}(p)`.
    Transform { map: ProxyFn },
    /// `x = D(p)` using the market config's demand side for this good.
    AggregateDemand,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryRule {
    AllEnter,
    NonnegativeProfit,
    /// Type `e` enters when its profit is at least `thresholds[e-1] + s`, with
    /// `s` drawn uniformly from `[0, market_shift]` per market. Thresholds
    /// must be non-increasing in `e` so presence stays monotone.
    ThresholdByType {
        thresholds: Vec<f64>,
        #[serde(default)]
        market_shift: f64,
    },
}

/// Restricted quantities drawn per market.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RestrictedLaw {
    Discrete { values: Vec<Vec<f64>> },
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

impl RestrictedLaw {
    pub fn dim(&self) -> usize {
        match self {
            RestrictedLaw::Discrete { values } => values.first().map_or(0, Vec::len),
            RestrictedLaw::Uniform { lower, .. } => lower.len(),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            RestrictedLaw::Discrete { values } => values[rng.random_range(0..values.len())].clone(),
            RestrictedLaw::Uniform { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(a, b)| if a == b { *a } else { rng.random_range(*a..*b) })
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseShape {
    Uniform,
    /// Normal with standard deviation `half_width / 2`, truncated to the support.
    TruncatedNormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub half_width: f64,
    #[serde(default = "default_shape")]
    pub shape: NoiseShape,
}

fn default_shape() -> NoiseShape {
    NoiseShape::Uniform
}

impl NoiseSpec {
    pub fn uniform(k: f64) -> Self {
        Self {
            half_width: k / 2.0,
            shape: NoiseShape::Uniform,
        }
    }

    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let h = self.half_width;
        if h == 0.0 {
            return 0.0;
        }
        match self.shape {
            NoiseShape::Uniform => rng.random_range(-h..=h),
            NoiseShape::TruncatedNormal => {
                let n = Normal::new(0.0, h / 2.0).expect("positive sd");
                loop {
                    let v: f64 = n.sample(rng);
                    if v.abs() <= h {
                        return v;
                    }
                }
            }
        }
    }
}

/// Everything needed to generate a synthetic dataset besides the technology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    pub num_markets: usize,
    pub firms_per_market: usize,
    /// Relative frequencies of types among potential entrants (default uniform).
    #[serde(default)]
    pub type_weights: Vec<f64>,
    pub price_law: PriceLaw,
    /// One entry per flexible good; defaults to observing every price.
    #[serde(default)]
    pub proxy_law: Vec<ProxyColumn>,
    #[serde(default = "default_entry")]
    pub entry_rule: EntryRule,
    #[serde(default)]
    pub restricted_law: Option<RestrictedLaw>,
    pub noise: NoiseSpec,
    /// Per-good aggregate demand used by `AggregateDemand` proxy columns.
    #[serde(default)]
    pub demand_side: Vec<Option<DemandFn>>,
    /// Market endowments; metadata parameterizing the price law.
    #[serde(default)]
    pub endowments: Vec<f64>,
    pub seed: u64,
}

fn default_entry() -> EntryRule {
    EntryRule::AllEnter
}

impl MarketConfig {
    /// Minimal config: all firms enter, every price observed.
    pub fn new(num_markets: usize, firms_per_market: usize, price_law: PriceLaw, k: f64, seed: u64) -> Self {
        Self {
            num_markets,
            firms_per_market,
            type_weights: Vec::new(),
            price_law,
            proxy_law: Vec::new(),
            entry_rule: EntryRule::AllEnter,
            restricted_law: None,
            noise: NoiseSpec::uniform(k),
            demand_side: Vec::new(),
            endowments: Vec::new(),
            seed,
        }
    }

    pub fn validate(&self, num_types: usize, dim: usize, num_restricted: usize) -> Result<()> {
        if self.num_markets == 0 || self.firms_per_market == 0 {
            return Err(Error::config("need at least one market and one firm per market"));
        }
        self.price_law.validate()?;
        if self.price_law.dim() != dim {
            return Err(Error::config(format!(
                "price law has {} goods, technology has {dim}",
                self.price_law.dim()
            )));
        }
        if !self.type_weights.is_empty()
            && (self.type_weights.len() != num_types
                || self.type_weights.iter().any(|w| !(*w >= 0.0))
                || self.type_weights.iter().sum::<f64>() <= 0.0)
        {
            return Err(Error::config("type weights must be nonnegative, one per type"));
        }
        if !(self.noise.half_width >= 0.0 && self.noise.half_width.is_finite()) {
            return Err(Error::config("noise half-width must be finite and nonnegative"));
        }
        if !self.proxy_law.is_empty() && self.proxy_law.len() != dim {
            return Err(Error::config("proxy law needs one column per good"));
        }
        for (j, col) in self.proxy_law.iter().enumerate() {
            match col {
                ProxyColumn::Transform { map } => map.validate()?,
                ProxyColumn::AggregateDemand => {
                    let d = self
                        .demand_side
                        .get(j)
                        .and_then(Option::as_ref)
                        .ok_or_else(|| Error::config(format!("good {} has no demand function", j + 1)))?;
                    let (lo, hi) = self.price_range(j);
                    d.validate(lo, hi)?;
                }
                ProxyColumn::Price => {}
            }
        }
        if let EntryRule::ThresholdByType {
            thresholds,
            market_shift,
        } = &self.entry_rule
        {
            if thresholds.len() != num_types || thresholds.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::config(
                    "entry thresholds must be one per type and non-increasing",
                ));
            }
            if !(*market_shift >= 0.0) {
                return Err(Error::config("market shift must be nonnegative"));
            }
        }
        let k = self.restricted_law.as_ref().map_or(0, RestrictedLaw::dim);
        if k != num_restricted {
            return Err(Error::config(format!(
                "restricted law has {k} quantities, technology expects {num_restricted}"
            )));
        }
        if let Some(RestrictedLaw::Uniform { lower, upper }) = &self.restricted_law {
            if lower.len() != upper.len() || lower.iter().zip(upper).any(|(a, b)| !(*a > 0.0 && a <= b)) {
                return Err(Error::config("restricted quantities must be positive ranges"));
            }
        }
        if let Some(RestrictedLaw::Discrete { values }) = &self.restricted_law {
            if values.iter().any(|v| v.len() != k || v.iter().any(|x| !(*x > 0.0))) {
                return Err(Error::config("restricted quantities must be positive"));
            }
        }
        Ok(())
    }

    /// Range of good `j`'s price under the price law.
    pub fn price_range(&self, j: usize) -> (f64, f64) {
        match &self.price_law {
            PriceLaw::Discrete { prices } => prices.iter().map(|p| p[j]).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(v), hi.max(v)),
            ),
            PriceLaw::Grid { axes } => axes[j].iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(*v), hi.max(*v)),
            ),
            PriceLaw::LogUniform { lower, upper } => (lower[j], upper[j]),
            PriceLaw::Arc { theta_lo, theta_hi } => {
                if j == 0 {
                    (theta_hi.cos(), theta_lo.cos())
                } else {
                    (theta_lo.sin(), theta_hi.sin())
                }
            }
        }
    }

    pub(crate) fn draw_restricted<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.restricted_law.as_ref().map_or_else(Vec::new, |l| l.draw(rng))
    }

    pub(crate) fn column(&self, j: usize) -> &ProxyColumn {
        self.proxy_law.get(j).unwrap_or(&ProxyColumn::Price)
    }
}

/// Aggregate quantities `D_j(p_j)` for every good with a configured demand.
pub fn gen_demand_proxy(cfg: &MarketConfig, p: &[f64]) -> Result<Vec<f64>> {
    if cfg.demand_side.is_empty() {
        return Err(Error::config("no demand side configured"));
    }
    if cfg.demand_side.len() != p.len() {
        return Err(Error::Dimension {
            expected: cfg.demand_side.len(),
            found: p.len(),
        });
    }
    cfg.demand_side
        .iter()
        .zip(p)
        .enumerate()
        .map(|(j, (d, pj))| {
            let d = d
                .as_ref()
                .ok_or_else(|| Error::config(format!("good {} has no demand function", j + 1)))?;
            let (lo, hi) = cfg.price_range(j);
            d.validate(lo.min(*pj), hi.max(*pj))?;
            Ok(d.eval(*pj))
        })
        .collect()
}
