//! Rationalizability of per-type profit data and sharp bounds on
//! counterfactual profits and quantities.
//!
//! Every program here is linear in the quantity vectors `{y_p}` supporting
//! the observed profits. Unbounded programs produce infinite bounds together
//! with the solver's recession certificate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::PriceRay;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense, VarDomain};
use crate::numeric::dot;
use crate::profit_id::ProfitTable;

const CERT_TOL: f64 = 1e-8;
const TIE_TOL: f64 = 1e-9;

/// Profits of one type on a finite set of price rays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfitData {
    pub e: usize,
    pub pairs: Vec<(PriceRay, f64)>,
    /// Coordinates known to be inputs, constrained to `y_k <= 0` in every program.
    #[serde(default)]
    pub nonpositive: Vec<usize>,
}

impl ProfitData {
    pub fn new(e: usize, pairs: Vec<(PriceRay, f64)>) -> Result<Self> {
        let data = Self {
            e,
            pairs,
            nonpositive: Vec::new(),
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_nonpositive(mut self, coords: Vec<usize>) -> Result<Self> {
        self.nonpositive = coords;
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.pairs[0].0.dim()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let Some((first, _)) = self.pairs.first() else {
            return Err(Error::EmptyDataset);
        };
        let d = first.dim();
        for (i, (r, v)) in self.pairs.iter().enumerate() {
            if r.dim() != d {
                return Err(Error::Dimension {
                    expected: d,
                    found: r.dim(),
                });
            }
            if !v.is_finite() {
                return Err(Error::arg("profits must be finite"));
            }
            if self.pairs[..i].iter().any(|(q, _)| same_ray(q, r)) {
                return Err(Error::arg(format!("duplicate price ray {:?}", r.components())));
            }
        }
        if let Some(k) = self.nonpositive.iter().find(|k| **k >= d) {
            return Err(Error::arg(format!("sign restriction on coordinate {k} of {d}")));
        }
        Ok(())
    }

    /// Adds a pair; used for sharpness and information checks.
    pub fn with_pair(&self, ray: PriceRay, value: f64) -> Result<Self> {
        let mut out = self.clone();
        out.pairs.push((ray, value));
        out.validate()?;
        Ok(out)
    }

    /// Pairs of type `e` from the price-only cells of a profit table.
    ///
    /// Observables are normalized onto the unit sphere with profits scaled by
    /// the same factor. Cells whose prices are proportional are averaged.
    /// `restricted` selects the stratum of restricted quantities.
    pub fn from_table(table: &ProfitTable, e: usize, restricted: &[f64]) -> Result<Self> {
        let nr = restricted.len();
        let mut pairs: Vec<(PriceRay, f64, usize)> = Vec::new();
        for c in &table.cells {
            if c.is_price[nr..].iter().any(|p| !p) || c.observables.len() <= nr {
                continue;
            }
            let stratum = &c.observables[..nr];
            if stratum.iter().zip(restricted).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
                continue;
            }
            let Some(v) = c.value(e) else { continue };
            let p = &c.observables[nr..];
            let n = dot(p, p).sqrt();
            let ray = PriceRay::normalize(p)?;
            match pairs.iter_mut().find(|(r, _, _)| same_ray(r, &ray)) {
                Some((_, sum, k)) => {
                    *sum += v / n;
                    *k += 1;
                }
                None => pairs.push((ray, v / n, 1)),
            }
        }
        if pairs.is_empty() {
            return Err(Error::Identification(format!("no price cells identify type {e}")));
        }
        Self::new(e, pairs.into_iter().map(|(r, s, k)| (r, s / k as f64)).collect())
    }

    /// CSV with columns `ray_1..ray_d, profit`; rows are normalized onto the sphere.
    pub fn read_csv<R: std::io::Read>(e: usize, r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let width = rdr.headers()?.len();
        if width < 2 {
            return Err(Error::Schema("profit data needs ray columns and a profit column".into()));
        }
        let mut pairs = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let nums = rec
                .iter()
                .map(|f| f.trim().parse::<f64>().map_err(|err| Error::Schema(format!("bad number {f:?}: {err}"))))
                .collect::<Result<Vec<_>>>()?;
            let p = &nums[..width - 1];
            let n = dot(p, p).sqrt();
            pairs.push((PriceRay::normalize(p)?, nums[width - 1] / n));
        }
        Self::new(e, pairs)
    }
}

fn same_ray(a: &PriceRay, b: &PriceRay) -> bool {
    a.components().iter().zip(b.components()).all(|(u, v)| (u - v).abs() <= 1e-9)
}

/// Serializes infinite bounds as the strings `"inf"` and `"-inf"`.
mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            Err(serde::ser::Error::custom("NaN bound"))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                _ => Err(serde::de::Error::custom(format!("bad bound {t:?}"))),
            },
        }
    }
}

/// A point attaining a finite bound, or a point and recession direction
/// certifying an infinite one. For quantity programs the point stacks
/// `y_c` followed by every `y_p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub point: Vec<f64>,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub num_rays: usize,
    /// Largest angle between a ray and its nearest neighbour.
    pub max_gap_radians: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub feasible: bool,
    /// `+inf` when infeasible.
    #[serde(with = "ext_real")]
    pub lower: f64,
    /// `-inf` when infeasible.
    #[serde(with = "ext_real")]
    pub upper: f64,
    pub lower_certificate: Option<Certificate>,
    pub upper_certificate: Option<Certificate>,
    /// Rays attaining the lower bound: observed faces for profit bounds,
    /// counterfactual grid rays for fixed-quantity bounds.
    #[serde(default)]
    pub lower_rays: Vec<PriceRay>,
    #[serde(default)]
    pub upper_rays: Vec<PriceRay>,
    #[serde(default)]
    pub grid: Option<GridMetadata>,
}

/// Answer to "can this type be profitable?" given bounds on its profit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    DefinitelyNo,
    DefinitelyYes,
    Undetermined,
    Infeasible,
}

impl BoundResult {
    fn infeasible() -> Self {
        Self {
            feasible: false,
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY,
            lower_certificate: None,
            upper_certificate: None,
            lower_rays: Vec::new(),
            upper_rays: Vec::new(),
            grid: None,
        }
    }

    /// Multiplies both bounds by a positive factor.
    pub fn scaled(mut self, c: f64) -> Self {
        self.lower *= c;
        self.upper *= c;
        self
    }

    pub fn profitability(&self) -> Verdict {
        if !self.feasible {
            Verdict::Infeasible
        } else if self.upper < 0.0 {
            Verdict::DefinitelyNo
        } else if self.lower >= 0.0 {
            Verdict::DefinitelyYes
        } else {
            Verdict::Undetermined
        }
    }
}

fn require_feasible(data: &ProfitData) -> Result<()> {
    data.validate()?;
    if wapm_feasible(data)?.is_none() {
        return Err(Error::Precondition(format!(
            "profit data of type {} cannot be generated by any production set",
            data.e
        )));
    }
    Ok(())
}

/// Adds `p*·y <= π(p*)` for every observed ray and sign restrictions on the
/// block of variables starting at `offset`.
fn add_envelope(lp: &mut LinearProgram, data: &ProfitData, offset: usize) {
    for (r, v) in &data.pairs {
        lp.add_dense_at(offset, r.components(), Relation::Le, *v);
    }
    for &k in &data.nonpositive {
        lp.set_domain(offset + k, VarDomain::NonPositive);
    }
}

/// Whether some `{y_p}` with `p·y_p = π(p)` and `p*·y_p <= π(p*)` exists.
/// The certificate lists `y_p` in the order of the pairs.
pub fn wapm_feasible(data: &ProfitData) -> Result<Option<Vec<Vec<f64>>>> {
    data.validate()?;
    let d = data.dim();
    let n = data.len();
    let mut lp = LinearProgram::new(n * d, Sense::Maximize);
    for (i, (r, v)) in data.pairs.iter().enumerate() {
        add_envelope(&mut lp, data, i * d);
        lp.add_dense_at(i * d, r.components(), Relation::Eq, *v);
    }
    match lp.solve()? {
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Optimal { x, .. } | LpOutcome::Unbounded { point: x, .. } => {
            if lp.max_violation(&x) > CERT_TOL * (1.0 + max_abs_profit(data)) {
                return Err(Error::numeric("feasibility certificate violates constraints"));
            }
            Ok(Some(x.chunks(d).map(<[f64]>::to_vec).collect()))
        }
    }
}

fn max_abs_profit(data: &ProfitData) -> f64 {
    data.pairs.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
}

/// Solves `lp` and converts the outcome into a bound and its certificate.
fn bound_of(lp: &LinearProgram, sense: Sense) -> Result<Option<(f64, Certificate)>> {
    Ok(match lp.solve()? {
        LpOutcome::Infeasible => None,
        LpOutcome::Optimal { x, value } => Some((
            value,
            Certificate {
                point: x,
                direction: None,
            },
        )),
        LpOutcome::Unbounded { point, ray } => {
            let v = if sense == Sense::Maximize { f64::INFINITY } else { f64::NEG_INFINITY };
            Some((
                v,
                Certificate {
                    point,
                    direction: Some(ray),
                },
            ))
        }
    })
}

/// Bounds on `π(p_c)` over all production sets generating the data.
///
/// The upper bound is the support of the halfspace envelope at `p_c`. The
/// lower bound is the best, over observed rays `p`, of the smallest `p_c·y`
/// on the face `{p·y = π(p)}` of the envelope.
pub fn profit_bounds(data: &ProfitData, p_c: &PriceRay) -> Result<BoundResult> {
    require_feasible(data)?;
    let d = data.dim();
    if p_c.dim() != d {
        return Err(Error::Dimension {
            expected: d,
            found: p_c.dim(),
        });
    }
    let mut up = LinearProgram::new(d, Sense::Maximize);
    up.set_objective(p_c.components());
    add_envelope(&mut up, data, 0);
    let (upper, upper_cert) = bound_of(&up, Sense::Maximize)?
        .ok_or_else(|| Error::numeric("feasible data gave an infeasible envelope"))?;

    let faces: Vec<(f64, Certificate)> = data
        .pairs
        .iter()
        .map(|(r, v)| {
            let mut lp = LinearProgram::new(d, Sense::Minimize);
            lp.set_objective(p_c.components());
            add_envelope(&mut lp, data, 0);
            lp.add_dense(r.components(), Relation::Eq, *v);
            bound_of(&lp, Sense::Minimize)?.ok_or_else(|| Error::numeric("empty face of a feasible envelope"))
        })
        .collect::<Result<_>>()?;
    let lower = faces.iter().map(|f| f.0).fold(f64::NEG_INFINITY, f64::max);
    let tol = TIE_TOL * (1.0 + lower.abs());
    let winners: Vec<usize> = (0..faces.len())
        .filter(|&i| faces[i].0 == lower || (lower.is_finite() && (faces[i].0 - lower).abs() <= tol))
        .collect();
    Ok(BoundResult {
        feasible: true,
        lower,
        upper,
        lower_certificate: Some(faces[winners[0]].1.clone()),
        upper_certificate: Some(upper_cert),
        lower_rays: winners.iter().map(|&i| data.pairs[i].0.clone()).collect(),
        upper_rays: Vec::new(),
        grid: None,
    })
}

/// The counterfactual program in `y_c` (first block) and `{y_p}`: each
/// `y_p` supports its observed profit, `y_c` lies in the envelope, and
/// `y_c` is optimal at `p_c` against every `y_p`.
fn counterfactual_program(data: &ProfitData, p_c: &PriceRay, objective: &[f64], sense: Sense) -> LinearProgram {
    let d = data.dim();
    let n = data.len();
    let mut lp = LinearProgram::new((n + 1) * d, sense);
    for (k, c) in objective.iter().enumerate() {
        lp.set_objective_coeff(k, *c);
    }
    add_envelope(&mut lp, data, 0);
    for (i, (r, v)) in data.pairs.iter().enumerate() {
        let off = (i + 1) * d;
        add_envelope(&mut lp, data, off);
        lp.add_dense_at(off, r.components(), Relation::Eq, *v);
        let mut row = Vec::with_capacity(2 * d);
        for k in 0..d {
            row.push((k, p_c.components()[k]));
            row.push((off + k, -p_c.components()[k]));
        }
        lp.add_constraint(row, Relation::Ge, 0.0);
    }
    lp
}

/// Bounds on `u·y_c` for the quantity `y_c` chosen at the counterfactual ray.
pub fn quantity_bounds(data: &ProfitData, p_c: &PriceRay, u: &[f64]) -> Result<BoundResult> {
    require_feasible(data)?;
    let d = data.dim();
    if p_c.dim() != d || u.len() != d {
        return Err(Error::Dimension {
            expected: d,
            found: if p_c.dim() != d { p_c.dim() } else { u.len() },
        });
    }
    let up = counterfactual_program(data, p_c, u, Sense::Maximize);
    let lo = counterfactual_program(data, p_c, u, Sense::Minimize);
    let (upper, uc) = bound_of(&up, Sense::Maximize)?.ok_or_else(|| Error::numeric("infeasible counterfactual program"))?;
    let (lower, lc) = bound_of(&lo, Sense::Minimize)?.ok_or_else(|| Error::numeric("infeasible counterfactual program"))?;
    Ok(BoundResult {
        feasible: true,
        lower,
        upper,
        lower_certificate: Some(lc),
        upper_certificate: Some(uc),
        lower_rays: Vec::new(),
        upper_rays: Vec::new(),
        grid: None,
    })
}

/// Bounds on counterfactual profit when coordinate `coord` of the chosen
/// quantity is pinned at `ybar` and the price is free within `ray_grid`.
pub fn profit_bounds_fixed_quantity(
    data: &ProfitData,
    coord: usize,
    ybar: f64,
    ray_grid: &[PriceRay],
) -> Result<BoundResult> {
    require_feasible(data)?;
    let d = data.dim();
    if ray_grid.is_empty() {
        return Err(Error::arg("counterfactual ray grid is empty"));
    }
    if coord >= d || !ybar.is_finite() {
        return Err(Error::arg(format!("cannot pin coordinate {coord} of {d} at {ybar}")));
    }
    if let Some(r) = ray_grid.iter().find(|r| r.dim() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: r.dim(),
        });
    }
    let per_ray: Vec<Option<((f64, Certificate), (f64, Certificate))>> = ray_grid
        .par_iter()
        .map(|p_c| {
            let solve = |sense| {
                let mut lp = counterfactual_program(data, p_c, p_c.components(), sense);
                lp.add_constraint(vec![(coord, 1.0)], Relation::Eq, ybar);
                bound_of(&lp, sense)
            };
            let Some(hi) = solve(Sense::Maximize)? else {
                return Ok(None);
            };
            let lo = solve(Sense::Minimize)?.ok_or_else(|| Error::numeric("inconsistent feasibility"))?;
            Ok(Some((lo, hi)))
        })
        .collect::<Result<_>>()?;
    let mut out = BoundResult::infeasible();
    out.grid = Some(grid_metadata(ray_grid));
    for (r, sol) in ray_grid.iter().zip(per_ray) {
        let Some(((lo, lc), (hi, hc))) = sol else { continue };
        out.feasible = true;
        if hi > out.upper {
            out.upper = hi;
            out.upper_certificate = Some(hc);
            out.upper_rays = vec![r.clone()];
        } else if hi == out.upper {
            out.upper_rays.push(r.clone());
        }
        if lo < out.lower {
            out.lower = lo;
            out.lower_certificate = Some(lc);
            out.lower_rays = vec![r.clone()];
        } else if lo == out.lower {
            out.lower_rays.push(r.clone());
        }
    }
    Ok(out)
}

fn grid_metadata(rays: &[PriceRay]) -> GridMetadata {
    let angle = |a: &PriceRay, b: &PriceRay| dot(a.components(), b.components()).clamp(-1.0, 1.0).acos();
    let max_gap_radians = if rays.len() < 2 {
        0.0
    } else {
        rays.iter()
            .enumerate()
            .map(|(i, a)| {
                rays.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(_, b)| angle(a, b))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    GridMetadata {
        num_rays: rays.len(),
        max_gap_radians,
    }
}

/// Evenly spread rays in the nonnegative orthant: equal angles in two
/// dimensions, a Fibonacci lattice restricted to the orthant in three.
pub fn default_ray_grid(d: usize, count: usize) -> Result<Vec<PriceRay>> {
    if count == 0 {
        return Err(Error::arg("ray grid needs at least one ray"));
    }
    match d {
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::FRAC_PI_2 * (k as f64 + 0.5) / count as f64;
                PriceRay::from_angle(t)
            })
            .collect(),
        3 => {
            // an eighth of the sphere's lattice lands in the orthant
            let total = 8 * count;
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..total)
                .filter_map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) * 2.0 / total as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    let v = [r * th.cos(), r * th.sin(), z];
                    v.iter().all(|c| *c > 0.0).then(|| PriceRay::normalize(&v))
                })
                .collect()
        }
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Grid-search bounds for two goods and at most four observed rays, built
/// without linear programming.
///
/// Each candidate `y_p` is a point on the line `p·y = π(p)` scanned with
/// `resolution` points per unit length and kept when it satisfies every
/// observed constraint. The support of the free-disposal hull of an
/// assignment at `p_c` is the largest `p_c·y_p`, so the extreme assignments
/// are found ray by ray. A side of the bound is infinite when feasible
/// candidates reach the edge of the widest scan window.
pub fn brute_force_bounds(data: &ProfitData, p_c: &PriceRay, resolution: usize) -> Result<BoundResult> {
    data.validate()?;
    if data.dim() != 2 || p_c.dim() != 2 {
        return Err(Error::UnsupportedDimension(data.dim()));
    }
    if data.len() > 4 {
        return Err(Error::arg("brute force handles at most four rays"));
    }
    if resolution == 0 {
        return Err(Error::arg("resolution must be positive"));
    }
    let step = 1.0 / resolution as f64;
    let tol = 1e-9 * (1.0 + max_abs_profit(data));
    let feasible = |y: [f64; 2]| {
        data.pairs.iter().all(|(r, v)| r.dot(&y) <= v + tol) && data.nonpositive.iter().all(|&k| y[k] <= tol)
    };
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::NEG_INFINITY;
    let mut upper_point = None;
    let mut lower_point = None;
    let mut lower_ray = 0;
    for (idx, (r, v)) in data.pairs.iter().enumerate() {
        let p = r.components();
        let base = [v * p[0], v * p[1]];
        let q = [-p[1], p[0]];
        let at = |s: f64| [base[0] + s * q[0], base[1] + s * q[1]];
        let mut window = 16.0;
        let (lo, hi, lo_open, hi_open) = loop {
            let n = (window * resolution as f64) as i64;
            let mut lo: Option<f64> = None;
            let mut hi: Option<f64> = None;
            for i in -n..=n {
                let s = i as f64 * step;
                if feasible(at(s)) {
                    lo.get_or_insert(s);
                    hi = Some(s);
                }
            }
            let Some((lo, hi)) = lo.zip(hi) else {
                return Err(Error::OracleFailure(format!(
                    "no feasible candidate on the face of ray {idx} at resolution {resolution}"
                )));
            };
            let lo_open = lo <= -window + step / 2.0;
            let hi_open = hi >= window - step / 2.0;
            if !(lo_open || hi_open) || window >= 1024.0 {
                break (lo, hi, lo_open, hi_open);
            }
            window *= 4.0;
        };
        let slope = dot(p_c.components(), &q);
        let value = |s: f64| dot(p_c.components(), &at(s));
        // the objective is linear along the face, so the extremes sit at the ends
        let (best, best_open, worst, worst_open) = if slope >= 0.0 {
            (hi, hi_open, lo, lo_open)
        } else {
            (lo, lo_open, hi, hi_open)
        };
        let face_max = if best_open && slope.abs() > 1e-12 { f64::INFINITY } else { value(best) };
        let face_min = if worst_open && slope.abs() > 1e-12 { f64::NEG_INFINITY } else { value(worst) };
        if face_max > upper {
            upper = face_max;
            upper_point = Some(at(best).to_vec());
        }
        if face_min > lower {
            lower = face_min;
            lower_point = Some(at(worst).to_vec());
            lower_ray = idx;
        }
    }
    Ok(BoundResult {
        feasible: true,
        lower,
        upper,
        lower_certificate: lower_point.map(|point| Certificate { point, direction: None }),
        upper_certificate: upper_point.map(|point| Certificate { point, direction: None }),
        lower_rays: vec![data.pairs[lower_ray].0.clone()],
        upper_rays: Vec::new(),
        grid: None,
    })
}

/// A counterfactual question about one type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Question {
    /// Profit at a positive price vector, rescaled from its ray.
    Profit { price: Vec<f64> },
    /// `u·y` at the quantity chosen at a positive price vector.
    Quantity { price: Vec<f64>, direction: Vec<f64> },
    /// Profit with one quantity pinned and the price free on a ray grid.
    FixedQuantity {
        coord: usize,
        ybar: f64,
        #[serde(default = "default_grid_size")]
        grid_size: usize,
    },
}

fn default_grid_size() -> usize {
    720
}

impl Question {
    pub fn answer(&self, data: &ProfitData) -> Result<BoundResult> {
        match self {
            Question::Profit { price } => {
                let n = dot(price, price).sqrt();
                Ok(profit_bounds(data, &PriceRay::normalize(price)?)?.scaled(n))
            }
            Question::Quantity { price, direction } => {
                quantity_bounds(data, &PriceRay::normalize(price)?, direction)
            }
            Question::FixedQuantity { coord, ybar, grid_size } => {
                let grid = default_ray_grid(data.dim(), *grid_size)?;
                profit_bounds_fixed_quantity(data, *coord, *ybar, &grid)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    #[serde(rename = "type")]
    pub e: usize,
    pub question: Question,
    pub result: BoundResult,
    pub verdict: Option<Verdict>,
}

/// Answers `question` for every type's data.
pub fn bounds_report(data: &[ProfitData], question: &Question) -> Result<Vec<BoundsReport>> {
    data.iter()
        .map(|d| {
            let result = question.answer(d)?;
            let verdict = matches!(question, Question::Profit { .. } | Question::FixedQuantity { .. })
                .then(|| result.profitability());
            Ok(BoundsReport {
                e: d.e,
                question: question.clone(),
                result,
                verdict,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::technology::{profit_oracle, TechnologySpec};
    use proptest::prelude::*;

    fn ray(p: &[f64]) -> PriceRay {
        PriceRay::normalize(p).unwrap()
    }

    fn diewert() -> TechnologySpec {
        TechnologySpec::diewert(vec![
            vec![vec![1.0, -0.3], vec![-0.3, 2.0]],
            vec![vec![1.5, -0.3], vec![-0.3, 2.4]],
        ])
        .unwrap()
    }

    fn oracle_data(e: usize, angles: &[f64]) -> ProfitData {
        let t = diewert();
        let pairs = angles
            .iter()
            .map(|a| {
                let r = PriceRay::from_angle(*a).unwrap();
                let v = profit_oracle(&t, e, r.components(), None).unwrap().0;
                (r, v)
            })
            .collect();
        ProfitData::new(e, pairs).unwrap()
    }

    fn truth(e: usize, r: &PriceRay) -> f64 {
        profit_oracle(&diewert(), e, r.components(), None).unwrap().0
    }

    #[test]
    fn wapm_examples() {
        let data = oracle_data(1, &[0.2, 0.7, 1.1, 1.4]);
        let cert = wapm_feasible(&data).unwrap().unwrap();
        for ((r, v), y) in data.pairs.iter().zip(&cert) {
            assert!((r.dot(y) - v).abs() < 1e-8);
        }
        let single = ProfitData::new(1, vec![(ray(&[1.0, 2.0]), -3.0)]).unwrap();
        assert!(wapm_feasible(&single).unwrap().is_some());
        let bad = ProfitData::new(
            1,
            vec![(ray(&[1.0, 0.0]), 1.0), (ray(&[0.0, 1.0]), 1.0), (ray(&[0.6, 0.8]), 2.0)],
        )
        .unwrap();
        assert!(wapm_feasible(&bad).unwrap().is_none());
        assert!(matches!(profit_bounds(&bad, &ray(&[1.0, 1.0])), Err(Error::Precondition(_))));
        assert!(matches!(
            brute_force_bounds(&bad, &ray(&[1.0, 1.0]), 100),
            Err(Error::OracleFailure(_))
        ));
    }

    #[test]
    fn observed_ray_pins_both_bounds() {
        let data = oracle_data(2, &[0.3, 0.8, 1.2]);
        let (r, v) = data.pairs[1].clone();
        let b = profit_bounds(&data, &r).unwrap();
        assert!((b.lower - v).abs() < 1e-9 && (b.upper - v).abs() < 1e-9);
        let bf = brute_force_bounds(&data, &r, 1000).unwrap();
        assert!((bf.lower - v).abs() < 2e-3 && (bf.upper - v).abs() < 2e-3);
    }

    #[test]
    fn single_halfspace_is_uninformative() {
        let data = ProfitData::new(1, vec![(ray(&[1.0, 1.0]), 0.0)]).unwrap();
        let b = profit_bounds(&data, &ray(&[1.0, 2.0])).unwrap();
        assert_eq!((b.lower, b.upper), (f64::NEG_INFINITY, f64::INFINITY));
        let cert = b.upper_certificate.unwrap();
        let dir = cert.direction.unwrap();
        assert!(ray(&[1.0, 1.0]).dot(&dir) <= 1e-9);
        assert!(ray(&[1.0, 2.0]).dot(&dir) > 0.0);
        let bf = brute_force_bounds(&data, &ray(&[1.0, 2.0]), 50).unwrap();
        assert_eq!((bf.lower, bf.upper), (f64::NEG_INFINITY, f64::INFINITY));
        let q = quantity_bounds(&data, &ray(&[1.0, 1.0]), &[1.0, 0.0]).unwrap();
        assert_eq!((q.lower, q.upper), (f64::NEG_INFINITY, f64::INFINITY));
    }

    #[test]
    fn two_rays_leave_lower_bound_open() {
        let data = oracle_data(1, &[0.4, 1.2]);
        let b = profit_bounds(&data, &PriceRay::from_angle(0.8).unwrap()).unwrap();
        assert_eq!(b.lower, f64::NEG_INFINITY);
        assert!(b.upper.is_finite());
    }

    #[test]
    fn brackets_truth_and_matches_brute_force() {
        for e in [1, 2] {
            let data = oracle_data(e, &[0.25, 0.8, 1.3]);
            for q in [0.4, 0.6, 1.0, 1.2] {
                let pc = PriceRay::from_angle(q).unwrap();
                let b = profit_bounds(&data, &pc).unwrap();
                assert!(b.lower.is_finite() && b.upper.is_finite());
                let t = truth(e, &pc);
                assert!(b.lower - 1e-9 <= t && t <= b.upper + 1e-9, "{} {t} {}", b.lower, b.upper);
                let bf = brute_force_bounds(&data, &pc, 2000).unwrap();
                assert!((bf.lower - b.lower).abs() <= 2.0 / 2000.0);
                assert!((bf.upper - b.upper).abs() <= 2.0 / 2000.0);
                // the upper bound is attained by a rationalizing set
                assert!(wapm_feasible(&data.with_pair(pc.clone(), b.upper).unwrap()).unwrap().is_some());
                let q = quantity_bounds(&data, &pc, pc.components()).unwrap();
                assert!((q.lower - b.lower).abs() < 1e-7 && (q.upper - b.upper).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn quantity_bounds_cover_true_supply() {
        let t = diewert();
        let data = oracle_data(1, &[0.1, 0.45, 0.8, 1.15, 1.5]);
        let pc = PriceRay::from_angle(0.6).unwrap();
        let y = profit_oracle(&t, 1, pc.components(), None).unwrap().1;
        let b = quantity_bounds(&data, &pc, &[1.0, 0.0]).unwrap();
        assert!(b.lower - 1e-9 <= y[0] && y[0] <= b.upper + 1e-9);
    }

    #[test]
    fn fixed_quantity_grid() {
        let t = diewert();
        let data = oracle_data(1, &[0.25, 0.8, 1.3]);
        let (r, v) = data.pairs[1].clone();
        let y = profit_oracle(&t, 1, r.components(), None).unwrap().1;
        let mut grid = default_ray_grid(2, 10).unwrap();
        grid.push(r.clone());
        let b = profit_bounds_fixed_quantity(&data, 0, y[0], &grid).unwrap();
        assert!(b.upper >= v - 1e-9);
        assert_eq!(b.grid.as_ref().unwrap().num_rays, 11);

        let coarse = profit_bounds_fixed_quantity(&data, 0, y[0], &default_ray_grid(2, 10).unwrap()).unwrap();
        let mut fine_grid = default_ray_grid(2, 10).unwrap();
        fine_grid.extend(default_ray_grid(2, 100).unwrap());
        let fine = profit_bounds_fixed_quantity(&data, 0, y[0], &fine_grid).unwrap();
        assert!(fine.upper >= coarse.upper && fine.lower <= coarse.lower);
        let finer = profit_bounds_fixed_quantity(&data, 0, y[0], &default_ray_grid(2, 400).unwrap()).unwrap();
        assert!((finer.upper - fine.upper).abs() < 1e-3);
    }

    #[test]
    fn negative_upper_bound_means_no() {
        // y_o <= sqrt(l) with at least one unit of input; with output pinned
        // at zero the firm only pays for input
        let profit = |p: &[f64]| {
            let l = (p[0] / (2.0 * p[1])).powi(2).max(1.0);
            p[0] * l.sqrt() - p[1] * l
        };
        let pairs = [[1.0, 1.5], [1.0, 2.0], [1.0, 3.0]]
            .iter()
            .map(|p| {
                let r = ray(p);
                let v = profit(r.components());
                (r, v)
            })
            .collect();
        let data = ProfitData::new(1, pairs).unwrap().with_nonpositive(vec![1]).unwrap();
        assert!(data.pairs.iter().all(|(_, v)| *v < 0.0));
        let b = profit_bounds_fixed_quantity(&data, 0, 0.0, &default_ray_grid(2, 90).unwrap()).unwrap();
        assert!(b.feasible);
        assert!(b.upper < 0.0, "{}", b.upper);
        assert_eq!(b.profitability(), Verdict::DefinitelyNo);
        let none = profit_bounds_fixed_quantity(&data, 1, 5.0, &default_ray_grid(2, 20).unwrap()).unwrap();
        assert!(!none.feasible);
        assert_eq!(none.profitability(), Verdict::Infeasible);
    }

    #[test]
    fn report_json_keeps_infinities() {
        let data = ProfitData::new(1, vec![(ray(&[1.0, 1.0]), 0.0)]).unwrap();
        let rep = bounds_report(&[data], &Question::Profit { price: vec![1.0, 2.0] }).unwrap();
        let s = serde_json::to_string(&rep).unwrap();
        assert!(s.contains("\"-inf\"") && s.contains("\"inf\""));
        let back: Vec<BoundsReport> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn fibonacci_grid_in_orthant() {
        let g = default_ray_grid(3, 1000).unwrap();
        assert!((900..1100).contains(&g.len()));
        assert!(grid_metadata(&g).max_gap_radians < 0.1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn more_information_never_widens(
            angles in proptest::collection::btree_set(5u32..145, 2..5),
            extra in 5u32..145,
            q in 5u32..145,
            e in 1usize..3,
        ) {
            let a: Vec<f64> = angles.iter().map(|k| *k as f64 / 100.0).collect();
            prop_assume!(!angles.contains(&extra));
            let data = oracle_data(e, &a);
            let pc = PriceRay::from_angle(q as f64 / 100.0).unwrap();
            let b = profit_bounds(&data, &pc).unwrap();
            let r = PriceRay::from_angle(extra as f64 / 100.0).unwrap();
            let more = data.with_pair(r.clone(), truth(e, &r)).unwrap();
            let m = profit_bounds(&more, &pc).unwrap();
            prop_assert!(m.upper <= b.upper + 1e-8);
            prop_assert!(m.lower >= b.lower - 1e-8);
            let t = truth(e, &pc);
            prop_assert!(m.lower - 1e-8 <= t && t <= m.upper + 1e-8);
        }
    }
}
