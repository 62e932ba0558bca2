//! Expression tree of non-expansive self-maps of C, the sup metric, and the
//! family of Lipschitz-constant estimators.
//!
//! Estimators are split into exact closed forms and certified sampled lower
//! bounds; an uncertified upper bound is never reported as exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ConvexBody, OpenSubset, SampleStrategy, Shape};
use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{self, Lp, NormSpec, Vector};
use crate::witness::WitnessParams;

/// Pairs closer than this are excluded from difference quotients.
const PAIR_MIN_DIST: f64 = 1e-12;

/// Sampling budget: number of pairs (or points) and the seed that fully
/// determines the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub pairs: usize,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(pairs: usize, seed: u64) -> SamplePlan {
        SamplePlan { pairs, seed }
    }

    /// Derive a decorrelated seed for a sub-task; deterministic in (seed, tag).
    pub fn subseed(&self, tag: u64) -> u64 {
        splitmix(self.seed ^ tag.wrapping_mul(0x9e3779b97f4a7c15))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// How a Lipschitz value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateKind {
    Exact,
    SampledLowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipEstimate {
    pub value: f64,
    pub kind: EstimateKind,
    pub samples: usize,
    pub seed: u64,
}

impl LipEstimate {
    fn exact(value: f64) -> LipEstimate {
        LipEstimate { value, kind: EstimateKind::Exact, samples: 0, seed: 0 }
    }
}

/// A self-map of C, non-expansive by construction of each node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapExpr {
    Identity,
    Constant {
        value: Vector,
    },
    Affine {
        matrix: Vec<Vector>,
        offset: Vector,
        /// User-asserted Lipschitz bound, required for p outside {1, 2, inf}
        /// where no exact operator norm is available.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        asserted_lip: Option<f64>,
    },
    ScaleToward {
        anchor: Vector,
        factor: f64,
    },
    ConvexCombo {
        weights: Vec<f64>,
        children: Vec<MapExpr>,
    },
    Compose {
        outer: Box<MapExpr>,
        inner: Box<MapExpr>,
    },
    /// x -> x^2 / 2 on 1-D bodies inside [-1, 1] (|f'| <= 1 there).
    Quadratic1d,
    /// The porosity witness g(x) = f(x + gamma(x - x0)).
    Perturbed {
        inner: Box<MapExpr>,
        params: WitnessParams,
    },
}

/// Counters for rare numerical events during evaluation.
#[derive(Debug, Default, Clone, Copy)]
pub struct EvalTrace {
    /// Inner arguments of Perturbed nodes nudged back into C (float drift).
    pub clamps: u64,
}

impl MapExpr {
    /// Evaluate f(x); the input must lie in C up to 1e-9 and the result is
    /// checked to lie in C up to 1e-6.
    pub fn evaluate(&self, x: &[f64], body: &ConvexBody) -> Result<Vector> {
        let mut trace = EvalTrace::default();
        self.evaluate_traced(x, body, &mut trace)
    }

    pub fn evaluate_traced(
        &self,
        x: &[f64],
        body: &ConvexBody,
        trace: &mut EvalTrace,
    ) -> Result<Vector> {
        if !body.contains(x, 1e-9)? {
            return Err(Error::OutsideBody { residual: f64::NAN, tol: 1e-9 });
        }
        let y = self.eval_inner(x, body, trace)?;
        if !body.contains(&y, 1e-6)? {
            return Err(Error::InvalidMap(
                "map result left the body beyond tolerance; constructor certificate invalid".into(),
            ));
        }
        Ok(y)
    }

    fn eval_inner(&self, x: &[f64], body: &ConvexBody, trace: &mut EvalTrace) -> Result<Vector> {
        Ok(match self {
            MapExpr::Identity => x.to_vec(),
            MapExpr::Constant { value } => value.clone(),
            MapExpr::Affine { matrix, offset, .. } => {
                space::add(&linalg::matvec(matrix, x), offset)
            }
            MapExpr::ScaleToward { anchor, factor } => anchor
                .iter()
                .zip(x)
                .map(|(a, xi)| a + factor * (xi - a))
                .collect(),
            MapExpr::ConvexCombo { weights, children } => {
                let mut acc = space::zeros(x.len());
                for (w, child) in weights.iter().zip(children) {
                    let y = child.eval_inner(x, body, trace)?;
                    for (a, yi) in acc.iter_mut().zip(&y) {
                        *a += w * yi;
                    }
                }
                acc
            }
            MapExpr::Compose { outer, inner } => {
                let mid = inner.eval_inner(x, body, trace)?;
                outer.eval_inner(&mid, body, trace)?
            }
            MapExpr::Quadratic1d => vec![x[0] * x[0] / 2.0],
            MapExpr::Perturbed { inner, params } => {
                let offset = space::sub(x, &params.x0);
                let disp = params.gamma(&body.space, &offset);
                let mut arg = space::add(x, &disp);
                if !body.contains(&arg, 0.0)? {
                    if !body.contains(&arg, 1e-9)? {
                        return Err(Error::InvalidMap(
                            "perturbed inner argument left the body beyond 1e-9".into(),
                        ));
                    }
                    arg = clamp_toward(body, &arg, &params.x0)?;
                    trace.clamps += 1;
                }
                inner.eval_inner(&arg, body, trace)?
            }
        })
    }

    /// Validate the constructor certificates: dimensions, weight algebra,
    /// operator-norm bounds, and sampled range inclusion for Affine nodes.
    pub fn validate(&self, body: &ConvexBody, plan: &SamplePlan) -> Result<()> {
        let space = body.space;
        match self {
            MapExpr::Identity => {}
            MapExpr::Constant { value } => {
                space.check_dim(value)?;
                if !body.contains(value, 1e-6)? {
                    return Err(Error::InvalidMap("constant value lies outside C".into()));
                }
            }
            MapExpr::Affine { matrix, offset, asserted_lip } => {
                space.check_dim(offset)?;
                if matrix.len() != space.dim || matrix.iter().any(|r| r.len() != space.dim) {
                    return Err(Error::InvalidMap("affine matrix must be dim x dim".into()));
                }
                let lip = match operator_norm(matrix, space.p) {
                    Some(n) => n,
                    None => asserted_lip.ok_or_else(|| {
                        Error::InvalidMap(
                            "affine node for general p requires an asserted Lipschitz bound".into(),
                        )
                    })?,
                };
                if lip > 1.0 + 1e-9 {
                    return Err(Error::InvalidMap(format!(
                        "affine operator norm {lip} exceeds 1"
                    )));
                }
                // domain-inclusion certificate: sampled range points lie in C
                let n = plan.pairs.clamp(16, 512);
                for p in body.sample(SampleStrategy::Random { n, seed: plan.subseed(11) })? {
                    let y = space::add(&linalg::matvec(matrix, &p), offset);
                    if !body.contains(&y, 1e-6)? {
                        return Err(Error::InvalidMap(
                            "affine range certificate failed: sampled image left C".into(),
                        ));
                    }
                }
            }
            MapExpr::ScaleToward { anchor, factor } => {
                space.check_dim(anchor)?;
                if !(0.0..=1.0).contains(factor) {
                    return Err(Error::InvalidMap(format!(
                        "scale factor {factor} must lie in [0, 1]"
                    )));
                }
                if !body.contains(anchor, 1e-6)? {
                    return Err(Error::InvalidMap("scale anchor lies outside C".into()));
                }
            }
            MapExpr::ConvexCombo { weights, children } => {
                if weights.len() != children.len() || children.is_empty() {
                    return Err(Error::InvalidMap("weights and children must match".into()));
                }
                if weights.iter().any(|w| *w < 0.0) {
                    return Err(Error::InvalidMap("weights must be nonnegative".into()));
                }
                let s: f64 = weights.iter().sum();
                if (s - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidMap(format!("weights sum to {s}, not 1")));
                }
                for child in children {
                    child.validate(body, plan)?;
                }
            }
            MapExpr::Compose { outer, inner } => {
                inner.validate(body, plan)?;
                outer.validate(body, plan)?;
            }
            MapExpr::Quadratic1d => {
                if space.dim != 1 {
                    return Err(Error::InvalidMap("quadratic1d requires dimension 1".into()));
                }
                let (lo, hi) = body.bounding_box();
                if lo[0] < -1.0 - 1e-12 || hi[0] > 1.0 + 1e-12 {
                    return Err(Error::InvalidMap(
                        "quadratic1d requires the body to lie inside [-1, 1]".into(),
                    ));
                }
                for t in [lo[0], hi[0], 0.0f64.clamp(lo[0], hi[0])] {
                    if !body.contains(&[t * t / 2.0], 1e-6)? {
                        return Err(Error::InvalidMap("quadratic1d image leaves C".into()));
                    }
                }
            }
            MapExpr::Perturbed { inner, params } => {
                params.validate(&space)?;
                inner.validate(body, plan)?;
            }
        }
        Ok(())
    }

    /// Exact global Lipschitz constant when a closed form exists.
    pub fn exact_lip(&self, body: &ConvexBody) -> Option<f64> {
        match self {
            MapExpr::Identity => Some(1.0),
            MapExpr::Constant { .. } => Some(0.0),
            MapExpr::ScaleToward { factor, .. } => Some(*factor),
            MapExpr::Affine { matrix, asserted_lip, .. } => {
                operator_norm(matrix, body.space.p).or(*asserted_lip)
            }
            MapExpr::Quadratic1d => {
                let (lo, hi) = body.bounding_box();
                Some(lo[0].abs().max(hi[0].abs()))
            }
            MapExpr::ConvexCombo { weights, children } => {
                // exact only when at most one child has a nonzero constant
                let vals: Option<Vec<f64>> =
                    children.iter().map(|c| c.exact_lip(body)).collect();
                let vals = vals?;
                let nonzero = vals.iter().filter(|v| **v > 0.0).count();
                if nonzero <= 1 {
                    Some(weights.iter().zip(&vals).map(|(w, v)| w * v).sum())
                } else {
                    None
                }
            }
            MapExpr::Compose { outer, inner } => {
                if matches!(**outer, MapExpr::Constant { .. })
                    || matches!(**inner, MapExpr::Constant { .. })
                {
                    return Some(0.0);
                }
                Some(outer.homothety_ratio()? * inner.homothety_ratio()?)
            }
            MapExpr::Perturbed { .. } => None,
        }
    }

    /// Scaling ratio when the map is a homothety (the quotient is constant).
    fn homothety_ratio(&self) -> Option<f64> {
        match self {
            MapExpr::Identity => Some(1.0),
            MapExpr::Constant { .. } => Some(0.0),
            MapExpr::ScaleToward { factor, .. } => Some(*factor),
            MapExpr::Compose { outer, inner } => {
                Some(outer.homothety_ratio()? * inner.homothety_ratio()?)
            }
            _ => None,
        }
    }
}

/// Exact operator norm of a matrix for p in {1, 2, inf}.
pub fn operator_norm(matrix: &[Vector], p: Lp) -> Option<f64> {
    let n = matrix.len();
    match p {
        Lp::One => Some(
            (0..n)
                .map(|j| matrix.iter().map(|row| row[j].abs()).sum::<f64>())
                .fold(0.0, f64::max),
        ),
        Lp::Inf => Some(
            matrix
                .iter()
                .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        ),
        Lp::Two => {
            // sqrt of the largest eigenvalue of A^T A
            let ata: Vec<Vector> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (0..n).map(|k| matrix[k][i] * matrix[k][j]).sum())
                        .collect()
                })
                .collect();
            Some(linalg::max_symmetric_eigenvalue(&ata).max(0.0).sqrt())
        }
        Lp::P(_) => None,
    }
}

/// Max difference quotient of f over all pairs of the given points (capped
/// at `max_pairs`); the oracle-friendly core of the sampled estimators.
pub fn lip_over_points(
    f: &MapExpr,
    body: &ConvexBody,
    points: &[Vector],
    max_pairs: usize,
) -> Result<(f64, usize)> {
    let space = body.space;
    let images: Vec<Vector> = points
        .iter()
        .map(|p| f.evaluate(p, body))
        .collect::<Result<_>>()?;
    let mut best = 0.0f64;
    let mut used = 0usize;
    'outer: for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = space.distance_unchecked(&points[i], &points[j]);
            if d < PAIR_MIN_DIST {
                continue;
            }
            let q = space.distance_unchecked(&images[i], &images[j]) / d;
            best = best.max(q);
            used += 1;
            if used >= max_pairs {
                break 'outer;
            }
        }
    }
    Ok((best, used))
}

/// Candidate unit directions: coordinate axes, sign vectors, and seeded
/// random directions, normalized in the space's own norm.
fn unit_directions(space: NormSpec, seed: u64, n_random: usize) -> Vec<Vector> {
    let dim = space.dim;
    let mut dirs = Vec::new();
    for d in 0..dim {
        let mut v = space::zeros(dim);
        v[d] = 1.0;
        dirs.push(v.clone());
        v[d] = -1.0;
        dirs.push(v);
    }
    if dim > 1 && dim <= 6 {
        for mask in 0..(1usize << dim) {
            let v: Vector = (0..dim)
                .map(|d| if mask >> d & 1 == 1 { -1.0 } else { 1.0 })
                .collect();
            dirs.push(v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_random {
        let v: Vector = (0..dim).map(|_| gaussian(&mut rng)).collect();
        if space.norm_unchecked(&v) > 1e-9 {
            dirs.push(v);
        }
    }
    dirs.iter()
        .map(|v| space::scale(1.0 / space.norm_unchecked(v), v))
        .collect()
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Largest step t in [0, t_hi] with pred(base + t * dir), by bisection.
fn max_step<F: Fn(&[f64]) -> bool>(pred: F, base: &[f64], dir: &[f64], t_hi: f64) -> f64 {
    if t_hi <= 0.0 {
        return 0.0;
    }
    if pred(&space::axpy(base, t_hi, dir)) {
        return t_hi;
    }
    let (mut lo, mut hi) = (0.0f64, t_hi);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if pred(&space::axpy(base, mid, dir)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn quotient(f: &MapExpr, body: &ConvexBody, x: &[f64], y: &[f64]) -> Result<Option<f64>> {
    let d = body.space.distance_unchecked(x, y);
    if d < PAIR_MIN_DIST {
        return Ok(None);
    }
    let fx = f.evaluate(x, body)?;
    let fy = f.evaluate(y, body)?;
    Ok(Some(body.space.distance_unchecked(&fx, &fy) / d))
}

/// Sampled lower bound on Lip(f) over points satisfying `pred`, combining
/// pairwise quotients, structured directions from `base`, and a stochastic
/// direction refinement.
fn lip_sampled<F: Fn(&[f64]) -> bool>(
    f: &MapExpr,
    body: &ConvexBody,
    points: &[Vector],
    base: &Vector,
    pred: F,
    plan: &SamplePlan,
) -> Result<LipEstimate> {
    let space = body.space;
    let (mut best, mut used) = lip_over_points(f, body, points, plan.pairs)?;
    let mut best_pair: Option<(Vector, Vector)> = None;
    // structured directions from the base point
    let reach = body.diameter();
    for dir in unit_directions(space, plan.subseed(21), 8) {
        let t = max_step(&pred, base, &dir, reach) * (1.0 - 1e-9);
        if t < PAIR_MIN_DIST {
            continue;
        }
        let y = space::axpy(base, t, &dir);
        if let Some(q) = quotient(f, body, base, &y)? {
            used += 1;
            if q > best {
                best = q;
                best_pair = Some((base.clone(), y));
            }
        }
    }
    // recover the best pairwise pair for refinement if it beat the rays
    if best_pair.is_none() {
        let mut record = 0.0;
        'outer: for i in 0..points.len() {
            for j in i + 1..points.len() {
                if let Some(q) = quotient(f, body, &points[i], &points[j])? {
                    if q > record {
                        record = q;
                        best_pair = Some((points[i].clone(), points[j].clone()));
                    }
                    if record >= best {
                        break 'outer;
                    }
                }
            }
        }
    }
    // stochastic hill climb on the direction of the best pair
    if let Some((x, y)) = best_pair {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.subseed(22));
        let mut dir = space::sub(&y, &x);
        let norm = space.norm_unchecked(&dir);
        if norm > PAIR_MIN_DIST {
            dir = space::scale(1.0 / norm, &dir);
            let mut step_scale = 0.5;
            for it in 0..300 {
                if it % 60 == 59 {
                    step_scale *= 0.5;
                }
                let cand: Vector = dir
                    .iter()
                    .map(|d| d + step_scale * gaussian(&mut rng))
                    .collect();
                let n = space.norm_unchecked(&cand);
                if n < 1e-9 {
                    continue;
                }
                let cand = space::scale(1.0 / n, &cand);
                let t = max_step(&pred, &x, &cand, reach) * (1.0 - 1e-9);
                if t < PAIR_MIN_DIST {
                    continue;
                }
                if let Some(q) = quotient(f, body, &x, &space::axpy(&x, t, &cand))? {
                    used += 1;
                    if q > best {
                        best = q;
                        dir = cand;
                    }
                }
            }
        }
    }
    Ok(LipEstimate { value: best, kind: EstimateKind::SampledLowerBound, samples: used, seed: plan.seed })
}

fn point_budget(pairs: usize) -> usize {
    (((2 * pairs) as f64).sqrt().ceil() as usize + 1).max(4)
}

/// Global Lipschitz constant: exact closed form when available, otherwise a
/// certified sampled lower bound.
pub fn lip_global(f: &MapExpr, body: &ConvexBody, plan: &SamplePlan) -> Result<LipEstimate> {
    if let Some(v) = f.exact_lip(body) {
        return Ok(LipEstimate::exact(v));
    }
    let pts = body.sample(SampleStrategy::Random { n: point_budget(plan.pairs), seed: plan.subseed(1) })?;
    let base = interior_base(body)?;
    let pred = |p: &[f64]| body.contains(p, 0.0).unwrap_or(false);
    lip_sampled(f, body, &pts, &base, pred, plan)
}

/// Lip(f, U): same contract as [`lip_global`] with both points drawn from U.
pub fn lip_on_set(f: &MapExpr, u: &OpenSubset, plan: &SamplePlan) -> Result<LipEstimate> {
    if let Some(v) = f.exact_lip(&u.parent) {
        return Ok(LipEstimate::exact(v));
    }
    let pts = u.sample(point_budget(plan.pairs), plan.subseed(2))?;
    let base = if u.contains(&u.center, 0.0)? {
        u.center.clone()
    } else {
        pts[0].clone()
    };
    let pred = |p: &[f64]| u.contains(p, 0.0).unwrap_or(false);
    lip_sampled(f, &u.parent, &pts, &base, pred, plan)
}

/// Lip(f, x, r): sup of quotients from x within the open ball B(x, r) ∩ C.
pub fn lip_local(
    f: &MapExpr,
    body: &ConvexBody,
    x: &[f64],
    r: f64,
    plan: &SamplePlan,
) -> Result<LipEstimate> {
    if let Some(ratio) = f.homothety_ratio() {
        return Ok(LipEstimate::exact(ratio));
    }
    if r <= 0.0 {
        return Err(Error::Config("lip_local requires r > 0".into()));
    }
    let space = body.space;
    let open_r = r * (1.0 - 1e-9);
    let pred = |p: &[f64]| {
        space.distance_unchecked(p, x) < open_r && body.contains(p, 0.0).unwrap_or(false)
    };
    let mut best = 0.0f64;
    let mut used = 0usize;
    // rays to the relative boundary of B(x, r) ∩ C
    for dir in unit_directions(space, plan.subseed(31), 8) {
        let t = max_step(pred, x, &dir, open_r) * (1.0 - 1e-9);
        if t < PAIR_MIN_DIST {
            continue;
        }
        if let Some(q) = quotient(f, body, x, &space::axpy(x, t, &dir))? {
            best = best.max(q);
            used += 1;
        }
    }
    // random points of the ball intersection
    let mut rng = ChaCha8Rng::seed_from_u64(plan.subseed(32));
    let mut attempts = 0usize;
    let wanted = plan.pairs.min(4096);
    let mut accepted = 0usize;
    while accepted < wanted && attempts < wanted * 1000 {
        attempts += 1;
        let y: Vector = x
            .iter()
            .map(|c| c + r * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        if !pred(&y) {
            continue;
        }
        accepted += 1;
        if let Some(q) = quotient(f, body, x, &y)? {
            best = best.max(q);
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::EmptySample(
            "no admissible y in B(x, r) ∩ C; radius too small".into(),
        ));
    }
    Ok(LipEstimate { value: best, kind: EstimateKind::SampledLowerBound, samples: used, seed: plan.seed })
}

/// The limsup approximation: lip_local across a decreasing radii schedule,
/// reported as a monotone envelope, plus the estimate at the smallest radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipAtPoint {
    pub estimate: LipEstimate,
    /// (radius, envelope value); nonincreasing as the radius shrinks.
    pub envelope: Vec<(f64, f64)>,
}

pub fn lip_at_point(
    f: &MapExpr,
    body: &ConvexBody,
    x: &[f64],
    radii: &[f64],
    plan: &SamplePlan,
) -> Result<LipAtPoint> {
    if radii.is_empty() || radii.windows(2).any(|w| w[0] <= w[1]) || radii.iter().any(|r| *r <= 0.0)
    {
        return Err(Error::Config("radii must be positive and strictly decreasing".into()));
    }
    let mut envelope = Vec::with_capacity(radii.len());
    let mut env = f64::INFINITY;
    let mut last = None;
    for r in radii {
        let est = lip_local(f, body, x, *r, plan)?;
        env = env.min(est.value);
        envelope.push((*r, env));
        last = Some(est);
    }
    let mut estimate = last.unwrap();
    estimate.value = env;
    Ok(LipAtPoint { estimate, envelope })
}

/// Sampled lower bound on the uniform distance d(f, g) = sup |f - g|.
pub fn sup_distance(
    f: &MapExpr,
    g: &MapExpr,
    body: &ConvexBody,
    plan: &SamplePlan,
) -> Result<f64> {
    let space = body.space;
    let mut pts = body.sample(SampleStrategy::Random {
        n: plan.pairs.clamp(64, 8192),
        seed: plan.subseed(41),
    })?;
    // near-boundary structured points
    let base = interior_base(body)?;
    let pred = |p: &[f64]| body.contains(p, 0.0).unwrap_or(false);
    for dir in unit_directions(space, plan.subseed(42), 8) {
        let t = max_step(pred, &base, &dir, body.diameter()) * (1.0 - 1e-9);
        if t > PAIR_MIN_DIST {
            pts.push(space::axpy(&base, t, &dir));
        }
    }
    if let Shape::Simplex { vertices } | Shape::Hull { points: vertices } = &body.shape {
        pts.extend(vertices.iter().cloned());
    }
    let mut best = 0.0f64;
    for p in &pts {
        let d = space.distance_unchecked(&f.evaluate(p, body)?, &g.evaluate(p, body)?);
        best = best.max(d);
    }
    Ok(best)
}

fn interior_base(body: &ConvexBody) -> Result<Vector> {
    let c = body.center_point();
    if body.contains(&c, 0.0)? {
        Ok(c)
    } else {
        // center of the bounding box may fall outside odd hulls; fall back
        Ok(body.sample(SampleStrategy::Random { n: 1, seed: 7 })?.remove(0))
    }
}

fn clamp_toward(body: &ConvexBody, z: &[f64], anchor: &[f64]) -> Result<Vector> {
    let mut lam = 1e-14;
    while lam < 1.0 {
        let p = space::lerp(z, anchor, lam);
        if body.contains(&p, 0.0)? {
            return Ok(p);
        }
        lam *= 4.0;
    }
    Err(Error::InvalidMap("could not clamp drifted point back into C".into()))
}

/// Named builtin maps for demos and configs.
pub fn builtin(name: &str, dim: usize) -> Option<MapExpr> {
    match name {
        "scale" => Some(MapExpr::ScaleToward { anchor: space::zeros(dim), factor: 0.801 }),
        "rotate2d" => {
            if dim != 2 {
                return None;
            }
            let th = 30f64.to_radians();
            Some(MapExpr::Affine {
                matrix: vec![vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]],
                offset: space::zeros(2),
                asserted_lip: None,
            })
        }
        "affine" => {
            let matrix: Vec<Vector> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|j| if i == j { 0.9 / (i + 1) as f64 } else { 0.0 })
                        .collect()
                })
                .collect();
            Some(MapExpr::Affine { matrix, offset: space::zeros(dim), asserted_lip: None })
        }
        "quadratic1d" => {
            if dim != 1 {
                return None;
            }
            Some(MapExpr::Quadratic1d)
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Shape;

    fn ball2() -> ConvexBody {
        ConvexBody::new(
            NormSpec::new(2, Lp::Two),
            Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
        )
        .unwrap()
    }

    fn unit_interval() -> ConvexBody {
        ConvexBody::new(
            NormSpec::new(1, Lp::Two),
            Shape::Box { lower: vec![0.0], upper: vec![1.0] },
        )
        .unwrap()
    }

    #[test]
    fn evaluate_identity_and_scale() {
        let b = ball2();
        let x = vec![0.3, 0.4];
        assert_eq!(MapExpr::Identity.evaluate(&x, &b).unwrap(), x);
        let f = MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.5 };
        assert_eq!(f.evaluate(&[0.8, 0.0], &b).unwrap(), vec![0.4, 0.0]);
    }

    #[test]
    fn evaluate_rejects_outside_input() {
        let b = ball2();
        assert!(MapExpr::Identity.evaluate(&[2.0, 0.0], &b).is_err());
    }

    #[test]
    fn operator_norms_closed_form() {
        let a = vec![vec![0.9, 0.0], vec![0.0, 0.3]];
        assert!((operator_norm(&a, Lp::Two).unwrap() - 0.9).abs() < 1e-12);
        assert!((operator_norm(&a, Lp::One).unwrap() - 0.9).abs() < 1e-12);
        assert!((operator_norm(&a, Lp::Inf).unwrap() - 0.9).abs() < 1e-12);
        let m = vec![vec![0.5, 0.4], vec![0.1, 0.2]];
        assert!((operator_norm(&m, Lp::Inf).unwrap() - 0.9).abs() < 1e-12);
        assert!((operator_norm(&m, Lp::One).unwrap() - 0.6).abs() < 1e-12);
        assert!(operator_norm(&m, Lp::P(3.0)).is_none());
    }

    #[test]
    fn lip_global_exact_cases() {
        let b = ball2();
        let plan = SamplePlan::new(100, 1);
        let c = MapExpr::Constant { value: vec![0.1, 0.1] };
        assert_eq!(lip_global(&c, &b, &plan).unwrap().value, 0.0);
        assert_eq!(lip_global(&MapExpr::Identity, &b, &plan).unwrap().value, 1.0);
        let a = MapExpr::Affine {
            matrix: vec![vec![0.9, 0.0], vec![0.0, 0.3]],
            offset: vec![0.0, 0.0],
            asserted_lip: None,
        };
        let est = lip_global(&a, &b, &plan).unwrap();
        assert_eq!(est.kind, EstimateKind::Exact);
        assert!((est.value - 0.9).abs() < 1e-12);
    }

    #[test]
    fn lip_sampled_cross_check_against_exact() {
        let b = ball2();
        let plan = SamplePlan::new(10_000, 3);
        let a = MapExpr::Affine {
            matrix: vec![vec![0.9, 0.0], vec![0.0, 0.3]],
            offset: vec![0.0, 0.0],
            asserted_lip: None,
        };
        let pts = b.sample(SampleStrategy::Random { n: 150, seed: 5 }).unwrap();
        let base = b.center_point();
        let pred = |p: &[f64]| b.contains(p, 0.0).unwrap_or(false);
        let est = lip_sampled(&a, &b, &pts, &base, pred, &plan).unwrap();
        assert!(est.value >= 0.9 - 0.01, "sampled {}", est.value);
        assert!(est.value <= 0.9 + 1e-12);
    }

    #[test]
    fn lip_local_quadratic() {
        let b = unit_interval();
        let plan = SamplePlan::new(2000, 9);
        let est = lip_local(&MapExpr::Quadratic1d, &b, &[0.5], 0.2, &plan).unwrap();
        assert!((est.value - 0.6).abs() < 1e-6, "got {}", est.value);
        let c = MapExpr::Constant { value: vec![0.2] };
        assert_eq!(lip_local(&c, &b, &[0.5], 0.2, &plan).unwrap().value, 0.0);
        assert_eq!(lip_local(&MapExpr::Identity, &b, &[0.5], 0.2, &plan).unwrap().value, 1.0);
    }

    #[test]
    fn lip_at_point_quadratic_envelope() {
        let b = unit_interval();
        let plan = SamplePlan::new(2000, 9);
        let out = lip_at_point(&MapExpr::Quadratic1d, &b, &[0.5], &[0.1, 0.01, 0.001], &plan).unwrap();
        // analytic sup is x + r/2 per radius, tending to 0.5
        for (r, v) in &out.envelope {
            assert!((v - (0.5 + r / 2.0)).abs() < 1e-5, "r={r} v={v}");
        }
        assert!((out.estimate.value - 0.5).abs() < 1e-3);
    }

    #[test]
    fn sup_distance_examples() {
        let b = ball2();
        let plan = SamplePlan::new(2000, 11);
        let f = MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.9 };
        assert_eq!(sup_distance(&f, &f, &b, &plan).unwrap(), 0.0);
        let z = MapExpr::Constant { value: vec![0.0, 0.0] };
        let c = MapExpr::Constant { value: vec![0.3, 0.4] };
        assert!((sup_distance(&z, &c, &b, &plan).unwrap() - 0.5).abs() < 1e-12);
        let d = sup_distance(&MapExpr::Identity, &f, &b, &plan).unwrap();
        assert!((d - 0.1).abs() < 1e-3, "got {d}");
    }

    #[test]
    fn convex_combo_exact_lip() {
        let b = ball2();
        // (1 - t) const + t id has exact Lipschitz constant t
        let g = MapExpr::ConvexCombo {
            weights: vec![0.95, 0.05],
            children: vec![MapExpr::Constant { value: vec![0.0, 0.0] }, MapExpr::Identity],
        };
        assert!((g.exact_lip(&b).unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn validate_rejects_expansive_affine() {
        let b = ball2();
        let plan = SamplePlan::new(64, 1);
        let a = MapExpr::Affine {
            matrix: vec![vec![1.2, 0.0], vec![0.0, 0.3]],
            offset: vec![0.0, 0.0],
            asserted_lip: None,
        };
        assert!(a.validate(&b, &plan).is_err());
    }

    #[test]
    fn map_serde_roundtrip() {
        let f = MapExpr::Compose {
            outer: Box::new(MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.5 }),
            inner: Box::new(MapExpr::Identity),
        };
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains(r#""kind":"compose""#));
        let back: MapExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn builtins_exist() {
        assert!(builtin("scale", 3).is_some());
        assert!(builtin("rotate2d", 2).is_some());
        assert!(builtin("rotate2d", 3).is_none());
        assert!(builtin("quadratic1d", 1).is_some());
        assert!(builtin("nope", 2).is_none());
    }
}
