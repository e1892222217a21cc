//! Convex-geometry primitives: price rays, halfspace envelopes and their
//! support functions, Hausdorff distances between extended envelopes,
//! free-disposal hulls and homogeneity diagnostics.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation, Sense};
use crate::numeric::{central_partial, dot, norm};

pub const ENVELOPE_SCHEMA_VERSION: u32 = 1;
const UNIT_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

/// A nonnegative price direction on the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceRay(Vec<f64>);

impl PriceRay {
    /// Validates an already-normalized ray.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::arg("price ray must have at least one component"));
        }
        if let Some(c) = components.iter().find(|c| !(**c >= 0.0) || !c.is_finite()) {
            return Err(Error::arg(format!(
                "price ray components must be nonnegative, got {c}"
            )));
        }
        let n = norm(&components);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::arg(format!("price ray has norm {n}, expected 1")));
        }
        Ok(Self(components))
    }

    /// Normalizes a nonnegative, nonzero price vector onto the unit sphere.
    pub fn normalize(p: &[f64]) -> Result<Self> {
        if p.is_empty() || p.iter().any(|c| !(*c >= 0.0) || !c.is_finite()) || p.iter().all(|c| *c == 0.0) {
            return Err(Error::arg(format!(
                "cannot normalize non-positive price vector {p:?}"
            )));
        }
        let n = norm(p);
        Self::new(p.iter().map(|c| c / n).collect())
    }

    /// Ray at angle `theta` in the positive quadrant.
    pub fn from_angle(theta: f64) -> Result<Self> {
        Self::normalize(&[theta.cos(), theta.sin()])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        dot(&self.0, y)
    }

    pub fn angle(&self) -> f64 {
        self.0[1].atan2(self.0[0])
    }
}

impl TryFrom<Vec<f64>> for PriceRay {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        // tolerate serialization round-off in stored rays
        let n = norm(&v);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::arg(format!("price ray has norm {n}, expected 1")));
        }
        if (n - 1.0).abs() <= UNIT_TOL {
            PriceRay::new(v)
        } else {
            PriceRay::normalize(&v)
        }
    }
}

impl From<PriceRay> for Vec<f64> {
    fn from(r: PriceRay) -> Self {
        r.0
    }
}

/// One halfspace `{y : normal · y <= value}`.
///
/// Normals are nonnegative unit vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    #[serde(rename = "ray")]
    pub normal: Vec<f64>,
    pub value: f64,
}

impl Halfspace {
    pub fn from_ray(ray: &PriceRay, value: f64) -> Self {
        Self {
            normal: ray.components().to_vec(),
            value,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        if self.normal.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: self.normal.len(),
            });
        }
        if self.normal.iter().any(|c| *c < 0.0 || !c.is_finite()) || !self.value.is_finite() {
            return Err(Error::arg("halfspace normal must be nonnegative and finite"));
        }
        if (norm(&self.normal) - 1.0).abs() > 1e-9 {
            return Err(Error::arg("halfspace normal must have unit norm"));
        }
        Ok(())
    }
}

/// Finite intersection of halfspaces with nonnegative normals.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfspaceEnvelope {
    dimension: usize,
    constraints: Vec<Halfspace>,
}

#[derive(Serialize, Deserialize)]
struct EnvelopeDoc {
    version: u32,
    dimension: usize,
    constraints: Vec<Halfspace>,
}

impl HalfspaceEnvelope {
    pub fn new(dimension: usize, constraints: Vec<Halfspace>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::arg("envelope dimension must be positive"));
        }
        if constraints.is_empty() {
            return Err(Error::arg("envelope needs at least one constraint"));
        }
        for c in &constraints {
            c.validate(dimension)?;
        }
        Ok(Self {
            dimension,
            constraints,
        })
    }

    /// Envelope `{y : p·y <= value(p)}` over price rays.
    pub fn from_rays(pairs: &[(PriceRay, f64)]) -> Result<Self> {
        let dim = pairs
            .first()
            .map(|(r, _)| r.dim())
            .ok_or_else(|| Error::arg("envelope needs at least one constraint"))?;
        Self::new(
            dim,
            pairs
                .iter()
                .map(|(r, v)| Halfspace::from_ray(r, *v))
                .collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn constraints(&self) -> &[Halfspace] {
        &self.constraints
    }

    pub fn with_constraint(&self, extra: Halfspace) -> Result<Self> {
        let mut c = self.constraints.clone();
        c.push(extra);
        Self::new(self.dimension, c)
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        self.constraints
            .iter()
            .all(|h| dot(&h.normal, y) <= h.value + tol)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&EnvelopeDoc {
            version: ENVELOPE_SCHEMA_VERSION,
            dimension: self.dimension,
            constraints: self.constraints.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: EnvelopeDoc = serde_json::from_str(text)?;
        if doc.version != ENVELOPE_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported envelope version {}",
                doc.version
            )));
        }
        Self::new(doc.dimension, doc.constraints)
    }
}

/// Finite grid of price rays standing in for a compact convex set of prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RestrictedPriceSet {
    rays: Vec<PriceRay>,
    /// Caller's assertion that the grid discretizes a compact convex set.
    pub convex: bool,
}

impl RestrictedPriceSet {
    pub fn new(rays: Vec<PriceRay>, convex: bool) -> Result<Self> {
        if rays.is_empty() {
            return Err(Error::arg("restricted price set is empty"));
        }
        let dim = rays[0].dim();
        for (i, r) in rays.iter().enumerate() {
            if r.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: r.dim(),
                });
            }
            for s in &rays[..i] {
                let gap = r
                    .components()
                    .iter()
                    .zip(s.components())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if gap < 1e-12 {
                    return Err(Error::arg("restricted price set has duplicate rays"));
                }
            }
        }
        Ok(Self { rays, convex })
    }

    /// `n` rays equally spaced in angle over `[theta_lo, theta_hi]` (radians).
    pub fn arc(theta_lo: f64, theta_hi: f64, n: usize) -> Result<Self> {
        if n == 0 || !(0.0 < theta_lo && theta_lo <= theta_hi && theta_hi < std::f64::consts::FRAC_PI_2) {
            return Err(Error::arg("arc must lie strictly inside the positive quadrant"));
        }
        let rays = (0..n)
            .map(|k| {
                let t = if n == 1 {
                    theta_lo
                } else {
                    theta_lo + (theta_hi - theta_lo) * k as f64 / (n - 1) as f64
                };
                PriceRay::from_angle(t)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rays, true)
    }

    /// Rays through `(1, a, b)` for `a, b` on an `n x n` grid over `[lo, hi]^2`.
    pub fn ratio_box_3d(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(0.0 < lo && lo < hi) {
            return Err(Error::arg("ratio box needs 0 < lo < hi and n >= 2"));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut rays = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                rays.push(PriceRay::normalize(&[
                    1.0,
                    lo + step * i as f64,
                    lo + step * j as f64,
                ])?);
            }
        }
        Self::new(rays, true)
    }

    pub fn rays(&self) -> &[PriceRay] {
        &self.rays
    }

    pub fn dim(&self) -> usize {
        self.rays[0].dim()
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }
}

/// Value of a support function query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportResult {
    Finite { value: f64, maximizer: Vec<f64> },
    /// The program is unbounded; `point + t * direction` stays in the set.
    Infinite { point: Vec<f64>, direction: Vec<f64> },
}

impl SupportResult {
    /// The support value, `+inf` when unbounded.
    pub fn value(&self) -> f64 {
        match self {
            SupportResult::Finite { value, .. } => *value,
            SupportResult::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, SupportResult::Finite { .. })
    }

    pub fn maximizer(&self) -> Option<&[f64]> {
        match self {
            SupportResult::Finite { maximizer, .. } => Some(maximizer),
            SupportResult::Infinite { .. } => None,
        }
    }
}

fn envelope_program(env: &HalfspaceEnvelope, objective: &[f64], sense: Sense) -> LinearProgram {
    let mut lp = LinearProgram::new(env.dimension, sense);
    lp.set_objective(objective);
    for h in &env.constraints {
        lp.add_dense(&h.normal, Relation::Le, h.value);
    }
    lp
}

/// Support function of the envelope along an arbitrary direction `u`.
pub fn support_direction(env: &HalfspaceEnvelope, u: &[f64]) -> Result<SupportResult> {
    if u.len() != env.dimension {
        return Err(Error::Dimension {
            expected: env.dimension,
            found: u.len(),
        });
    }
    match envelope_program(env, u, Sense::Maximize).solve()? {
        LpOutcome::Optimal { x, value } => Ok(SupportResult::Finite {
            value,
            maximizer: x,
        }),
        LpOutcome::Unbounded { point, ray } => Ok(SupportResult::Infinite {
            point,
            direction: ray,
        }),
        // the envelope always contains a far negative point
        LpOutcome::Infeasible => Err(Error::numeric("envelope reported infeasible")),
    }
}

/// `sup { u·y : y in env }` for a price ray `u`.
pub fn support_value(env: &HalfspaceEnvelope, u: &PriceRay) -> Result<SupportResult> {
    support_direction(env, u.components())
}

/// Truncated Hausdorff distance between extended sets: the largest gap
/// between their (convex, homogeneous) support values on the ray grid.
pub fn hausdorff_extended(a: &[f64], b: &[f64], set: &RestrictedPriceSet) -> Result<f64> {
    if a.len() != set.len() || b.len() != set.len() {
        return Err(Error::arg(format!(
            "value vectors of length {} and {} do not match {} rays",
            a.len(),
            b.len(),
            set.len()
        )));
    }
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}

/// Boundary of a planar envelope as the graph of a concave, decreasing
/// piecewise-linear function: lines of the lower envelope in order of
/// increasing `y1`, and the breakpoints between consecutive lines.
struct PlanarBoundary {
    /// (slope, intercept) pairs: `y2 = slope * y1 + intercept`.
    lines: Vec<(f64, f64)>,
    vertices: Vec<[f64; 2]>,
}

impl PlanarBoundary {
    fn new(env: &HalfspaceEnvelope) -> Result<Self> {
        let mut lines: Vec<(f64, f64)> = Vec::new();
        for h in &env.constraints {
            if h.normal[1] <= 1e-14 {
                return Err(Error::arg(
                    "planar oracle needs normals with a positive second component",
                ));
            }
            lines.push((-h.normal[0] / h.normal[1], h.value / h.normal[1]));
        }
        // lower envelope for increasing y1: slopes decreasing
        lines.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)));
        lines.dedup_by(|b, a| (a.0 - b.0).abs() < 1e-14);
        let cross = |l1: (f64, f64), l2: (f64, f64)| (l2.1 - l1.1) / (l1.0 - l2.0);
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for l in lines {
            while hull.len() >= 2 {
                let n = hull.len();
                let x_prev = cross(hull[n - 2], hull[n - 1]);
                let x_new = cross(hull[n - 1], l);
                if x_new <= x_prev {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(l);
        }
        let vertices = hull
            .windows(2)
            .map(|w| {
                let x = cross(w[0], w[1]);
                [x, w[0].0 * x + w[0].1]
            })
            .collect();
        Ok(Self {
            lines: hull,
            vertices,
        })
    }

    /// Finite segments and the two unbounded rays as (start, direction,
    /// length, sampled length); rays have infinite length.
    fn pieces(&self, far: f64) -> Vec<Piece> {
        let unit = |slope: f64, sign: f64| {
            let n = (1.0 + slope * slope).sqrt();
            [sign / n, sign * slope / n]
        };
        let mut out = Vec::new();
        let (first, last) = match (self.vertices.first(), self.vertices.last()) {
            (Some(f), Some(l)) => (*f, *l),
            _ => {
                let (m, c) = self.lines[0];
                let origin = [0.0, c];
                out.push((origin, unit(m, -1.0), f64::INFINITY, far));
                out.push((origin, unit(m, 1.0), f64::INFINITY, far));
                return out;
            }
        };
        out.push((first, unit(self.lines[0].0, -1.0), f64::INFINITY, far));
        for w in self.vertices.windows(2) {
            let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                out.push((w[0], [d[0] / len, d[1] / len], len, len));
            }
        }
        let slope = self.lines.last().expect("nonempty").0;
        out.push((last, unit(slope, 1.0), f64::INFINITY, far));
        out
    }
}

type Piece = ([f64; 2], [f64; 2], f64, f64);

fn point_segment_distance(q: [f64; 2], start: [f64; 2], dir: [f64; 2], len: f64) -> f64 {
    let rel = [q[0] - start[0], q[1] - start[1]];
    let t = (rel[0] * dir[0] + rel[1] * dir[1]).clamp(0.0, len);
    let proj = [start[0] + t * dir[0], start[1] + t * dir[1]];
    ((q[0] - proj[0]).powi(2) + (q[1] - proj[1]).powi(2)).sqrt()
}

fn planar_distance(q: [f64; 2], env: &HalfspaceEnvelope, pieces: &[Piece]) -> f64 {
    if env.contains(&q, 1e-12) {
        return 0.0;
    }
    pieces
        .iter()
        .map(|(s, d, l, _)| point_segment_distance(q, *s, *d, *l))
        .fold(f64::INFINITY, f64::min)
}

/// Geometric Hausdorff distance between two planar envelopes computed by
/// sampling both boundaries and measuring exact point-to-set distances.
pub fn hausdorff_oracle_2d(
    env_a: &HalfspaceEnvelope,
    env_b: &HalfspaceEnvelope,
    n_boundary: usize,
) -> Result<f64> {
    for env in [env_a, env_b] {
        if env.dimension != 2 {
            return Err(Error::UnsupportedDimension(env.dimension));
        }
    }
    let ba = PlanarBoundary::new(env_a)?;
    let bb = PlanarBoundary::new(env_b)?;
    let span = ba
        .vertices
        .iter()
        .chain(&bb.vertices)
        .flat_map(|v| v.iter().map(|c| c.abs()))
        .fold(1.0, f64::max);
    let far = 10.0 * span;
    let pa = ba.pieces(far);
    let pb = bb.pieces(far);

    let directed = |from: &PlanarBoundary,
                    from_pieces: &[Piece],
                    to: &HalfspaceEnvelope,
                    to_pieces: &[Piece]| {
        let total: f64 = from_pieces.iter().map(|p| p.3).sum();
        let mut worst: f64 = 0.0;
        for v in &from.vertices {
            worst = worst.max(planar_distance(*v, to, to_pieces));
        }
        for (start, dir, _, len) in from_pieces {
            let k = ((n_boundary as f64) * len / total).ceil().max(1.0) as usize;
            for i in 0..=k {
                let t = len * i as f64 / k as f64;
                let q = [start[0] + t * dir[0], start[1] + t * dir[1]];
                worst = worst.max(planar_distance(q, to, to_pieces));
            }
        }
        worst
    };
    Ok(directed(&ba, &pa, env_b, &pb).max(directed(&bb, &pb, env_a, &pa)))
}

/// Free-disposal convex hull `conv(points) + R^d_-` as an exact list of
/// facets. Facets are found by enumerating hyperplanes through `d`
/// generators (points or negative coordinate directions).
pub fn free_disposal_hull(points: &[Vec<f64>]) -> Result<HalfspaceEnvelope> {
    let first = points
        .first()
        .ok_or_else(|| Error::arg("free-disposal hull of an empty point list"))?;
    let d = first.len();
    if d == 0 {
        return Err(Error::arg("points must have positive dimension"));
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension {
            expected: d,
            found: p.len(),
        });
    }
    if d == 1 {
        let top = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return HalfspaceEnvelope::new(1, vec![Halfspace { normal: vec![1.0], value: top }]);
    }

    // generators: indices < n are points, n + i is direction -e_i
    let n = points.len();
    let total = n + d;
    let mut facets: Vec<Halfspace> = Vec::new();
    let mut combo: Vec<usize> = (0..d).collect();
    loop {
        if combo[0] < n {
            if let Some(h) = facet_through(points, &combo, d) {
                if !facets.iter().any(|f| {
                    f.normal
                        .iter()
                        .zip(&h.normal)
                        .all(|(a, b)| (a - b).abs() < 1e-9)
                }) {
                    facets.push(h);
                }
            }
        }
        // next combination in lexicographic order
        let mut i = d;
        loop {
            if i == 0 {
                return HalfspaceEnvelope::new(d, facets);
            }
            i -= 1;
            if combo[i] < total - d + i {
                combo[i] += 1;
                for k in i + 1..d {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn facet_through(points: &[Vec<f64>], combo: &[usize], d: usize) -> Option<Halfspace> {
    let n = points.len();
    let base = &points[combo[0]];
    let mut rows = Vec::with_capacity(d - 1);
    for &g in &combo[1..] {
        if g < n {
            rows.push(points[g].iter().zip(base).map(|(a, b)| a - b).collect::<Vec<_>>());
        } else {
            let mut e = vec![0.0; d];
            e[g - n] = -1.0;
            rows.push(e);
        }
    }
    // pad to a square matrix so the SVD exposes the full null space
    let mut m = DMatrix::<f64>::zeros(d, d);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let scale = sv.iter().cloned().fold(0.0, f64::max).max(1.0);
    if d >= 2 && sv[order[d - 2]] < 1e-10 * scale {
        return None;
    }
    let k = order[d - 1];
    let mut normal: Vec<f64> = (0..d).map(|j| v_t[(k, j)]).collect();
    if normal.iter().sum::<f64>() < 0.0 {
        normal.iter_mut().for_each(|v| *v = -*v);
    }
    if normal.iter().any(|v| *v < -1e-12) {
        return None;
    }
    normal.iter_mut().for_each(|v| *v = v.max(0.0));
    let nn = norm(&normal);
    normal.iter_mut().for_each(|v| *v /= nn);
    let value = dot(&normal, base);
    let tol = 1e-9 * (1.0 + value.abs());
    if points.iter().any(|p| dot(&normal, p) > value + tol) {
        return None;
    }
    let value = points.iter().map(|p| dot(&normal, p)).fold(value, f64::max);
    Some(Halfspace { normal, value })
}

/// Finite support at every probe ray: the grid relaxation of the recession
/// cone property.
pub fn recession_ok(env: &HalfspaceEnvelope, probe_rays: &[PriceRay]) -> bool {
    probe_rays.iter().all(|r| {
        r.dim() == env.dimension
            && matches!(support_value(env, r), Ok(SupportResult::Finite { .. }))
    })
}

/// Euler identity residual `sum_j p_j ∂_j f(p) - f(p)` by central differences
/// with step `h * p_j`.
pub fn euler_residual<F>(f: &F, p: &[f64], h: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    if !(h > 0.0) {
        return Err(Error::arg("finite-difference step must be positive"));
    }
    let fp = f(p);
    if !fp.is_finite() {
        return Err(Error::numeric("non-finite function value"));
    }
    let mut acc = -fp;
    for (j, pj) in p.iter().enumerate() {
        acc += central_partial(f, p, j, h * pj.abs().max(f64::MIN_POSITIVE))? * pj;
    }
    Ok(acc)
}

/// Feasibility check used by tests and certificates.
pub fn satisfies(env: &HalfspaceEnvelope, y: &[f64]) -> bool {
    env.contains(y, FEAS_TOL)
}
