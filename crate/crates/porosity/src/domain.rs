//! The bounded, closed, convex domain C and its open convex subsets
//! U = B(center, radius) ∩ C, with membership, diameter, and deterministic
//! seeded sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{self, NormSpec, Vector};

/// Maximum rejection attempts per requested sample point.
const MAX_REJECT_FACTOR: usize = 20_000;

/// Shape of a convex body; closed and convex by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Ball { center: Vector, radius: f64 },
    Box { lower: Vector, upper: Vector },
    Simplex { vertices: Vec<Vector> },
    Hull { points: Vec<Vector> },
}

/// A bounded, closed, convex subset of an lp space with more than one element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBody {
    pub space: NormSpec,
    #[serde(flatten)]
    pub shape: Shape,
}

/// Sampling strategy for [`ConvexBody::sample`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum SampleStrategy {
    /// Uniform lattice of the bounding box intersected with C; k points per axis.
    Grid { k: usize },
    /// Deterministic pseudo-random points, a pure function of the seed.
    Random { n: usize, seed: u64 },
}

impl ConvexBody {
    pub fn new(space: NormSpec, shape: Shape) -> Result<ConvexBody> {
        let dim = space.dim;
        match &shape {
            Shape::Ball { center, radius } => {
                space.check_dim(center)?;
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidBody(format!("ball radius {radius} must be positive")));
                }
            }
            Shape::Box { lower, upper } => {
                space.check_dim(lower)?;
                space.check_dim(upper)?;
                if lower.iter().zip(upper).any(|(l, u)| !(l < u)) {
                    return Err(Error::InvalidBody("box requires lower < upper coordinatewise".into()));
                }
            }
            Shape::Simplex { vertices } => {
                if vertices.len() != dim + 1 {
                    return Err(Error::InvalidBody(format!(
                        "simplex in dimension {dim} requires {} vertices, got {}",
                        dim + 1,
                        vertices.len()
                    )));
                }
                for v in vertices {
                    space.check_dim(v)?;
                }
                if edge_matrix_singular(vertices) {
                    return Err(Error::InvalidBody("simplex vertices are affinely dependent".into()));
                }
            }
            Shape::Hull { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidBody("hull requires at least 2 points".into()));
                }
                for v in points {
                    space.check_dim(v)?;
                }
                if points.iter().all(|p| p == &points[0]) {
                    return Err(Error::InvalidBody("hull points must not all coincide".into()));
                }
            }
        }
        Ok(ConvexBody { space, shape })
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    /// Coordinatewise bounding box (valid for every p >= 1 since
    /// |x_i| <= |x|_p).
    pub fn bounding_box(&self) -> (Vector, Vector) {
        match &self.shape {
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            Shape::Box { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Simplex { vertices } => vertex_bbox(vertices),
            Shape::Hull { points } => vertex_bbox(points),
        }
    }

    /// An interior reference point.
    pub fn center_point(&self) -> Vector {
        match &self.shape {
            Shape::Ball { center, .. } => center.clone(),
            Shape::Box { lower, upper } => {
                lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect()
            }
            Shape::Simplex { vertices } => vertex_mean(vertices),
            Shape::Hull { points } => vertex_mean(points),
        }
    }

    /// True iff x lies in C up to tol.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        self.space.check_dim(x)?;
        Ok(match &self.shape {
            Shape::Ball { center, radius } => {
                self.space.distance_unchecked(x, center) <= radius + tol
            }
            Shape::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(xi, (l, u))| *xi >= l - tol && *xi <= u + tol),
            Shape::Simplex { vertices } => simplex_residual(vertices, x) <= tol,
            Shape::Hull { points } => hull_residual(points, x, tol) <= tol,
        })
    }

    /// Diameter in the body's own norm; exact for every shape (the diameter
    /// of a polytope is attained at vertices).
    pub fn diameter(&self) -> f64 {
        match &self.shape {
            Shape::Ball { radius, .. } => 2.0 * radius,
            Shape::Box { lower, upper } => self.space.norm_unchecked(&space::sub(upper, lower)),
            Shape::Simplex { vertices } => max_pairwise(&self.space, vertices),
            Shape::Hull { points } => max_pairwise(&self.space, points),
        }
    }

    /// Deterministic sampling; every returned point satisfies
    /// `contains(., 1e-9)`.
    pub fn sample(&self, strategy: SampleStrategy) -> Result<Vec<Vector>> {
        match strategy {
            SampleStrategy::Grid { k } => {
                if k < 2 {
                    return Err(Error::Config("grid strategy requires k >= 2".into()));
                }
                let (lo, hi) = self.bounding_box();
                let dim = self.dim();
                let total = k.pow(dim as u32);
                let mut out = Vec::new();
                for idx in 0..total {
                    let mut rem = idx;
                    let mut p = vec![0.0; dim];
                    for d in 0..dim {
                        let i = rem % k;
                        rem /= k;
                        p[d] = lo[d] + (hi[d] - lo[d]) * i as f64 / (k - 1) as f64;
                    }
                    if self.contains(&p, 1e-9)? {
                        out.push(p);
                    }
                }
                if out.is_empty() {
                    return Err(Error::EmptySample(
                        "grid resolution misses the body entirely".into(),
                    ));
                }
                Ok(out)
            }
            SampleStrategy::Random { n, seed } => {
                if n < 1 {
                    return Err(Error::Config("random strategy requires n >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                self.sample_random(n, &mut rng)
            }
        }
    }

    fn sample_random(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Vector>> {
        let mut out = Vec::with_capacity(n);
        match &self.shape {
            Shape::Box { lower, upper } => {
                for _ in 0..n {
                    let p = lower
                        .iter()
                        .zip(upper)
                        .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                        .collect();
                    out.push(p);
                }
            }
            Shape::Ball { center, radius } => {
                let mut attempts = 0usize;
                while out.len() < n {
                    attempts += 1;
                    if attempts > MAX_REJECT_FACTOR * n {
                        return Err(Error::EmptySample("ball rejection sampling exhausted".into()));
                    }
                    let p: Vector = center
                        .iter()
                        .map(|c| c + radius * (2.0 * rng.random::<f64>() - 1.0))
                        .collect();
                    if self.space.distance_unchecked(&p, center) <= *radius {
                        out.push(p);
                    }
                }
            }
            Shape::Simplex { vertices } | Shape::Hull { points: vertices } => {
                // Dirichlet(1,..,1) vertex weights via normalized exponentials
                for _ in 0..n {
                    let w: Vec<f64> = (0..vertices.len())
                        .map(|_| -(1.0 - rng.random::<f64>()).ln())
                        .collect();
                    let s: f64 = w.iter().sum();
                    let mut p = vec![0.0; self.dim()];
                    for (wi, v) in w.iter().zip(vertices) {
                        for (pd, vd) in p.iter_mut().zip(v) {
                            *pd += wi / s * vd;
                        }
                    }
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

/// U = B(center, radius) ∩ C, convex and relatively open in C.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenSubset {
    pub center: Vector,
    pub radius: f64,
    pub parent: ConvexBody,
}

impl OpenSubset {
    pub fn new(center: Vector, radius: f64, parent: ConvexBody) -> Result<OpenSubset> {
        parent.space.check_dim(&center)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidBody(format!("subset radius {radius} must be positive")));
        }
        // nonemptiness: the center must be within the ball's reach of C
        if !parent.contains(&center, 0.999 * radius)? {
            return Err(Error::InvalidBody(
                "open subset is empty: center too far from the body".into(),
            ));
        }
        Ok(OpenSubset { center, radius, parent })
    }

    pub fn space(&self) -> NormSpec {
        self.parent.space
    }

    /// Membership in the relatively open set U.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.parent.contains(x, tol)?
            && self.space().distance(x, &self.center)? < self.radius + tol)
    }

    /// U.radius - d(x0, U.center) - r; a nonnegative value certifies
    /// B(x0, r) ∩ C ⊆ U by the triangle inequality.
    pub fn subset_margin(&self, x0: &[f64], r: f64) -> Result<f64> {
        Ok(self.radius - self.space().distance(x0, &self.center)? - r)
    }

    /// Deterministic rejection sampling from U.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vector>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (plo, phi) = self.parent.bounding_box();
        // intersect the parent's bbox with the ball's bbox
        let lo: Vector = plo
            .iter()
            .zip(&self.center)
            .map(|(l, c)| l.max(c - self.radius))
            .collect();
        let hi: Vector = phi
            .iter()
            .zip(&self.center)
            .map(|(h, c)| h.min(c + self.radius))
            .collect();
        if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
            return Err(Error::EmptySample("subset bounding box is empty".into()));
        }
        let open_r = self.radius * (1.0 - 1e-12);
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n {
            attempts += 1;
            if attempts > MAX_REJECT_FACTOR * n {
                return Err(Error::EmptySample("subset rejection sampling exhausted".into()));
            }
            let p: Vector = lo
                .iter()
                .zip(&hi)
                .map(|(l, h)| l + (h - l) * rng.random::<f64>())
                .collect();
            if self.space().distance_unchecked(&p, &self.center) < open_r
                && self.parent.contains(&p, 0.0)?
            {
                out.push(p);
            }
        }
        Ok(out)
    }
}

fn vertex_bbox(vertices: &[Vector]) -> (Vector, Vector) {
    let dim = vertices[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for v in vertices {
        for d in 0..dim {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    (lo, hi)
}

fn vertex_mean(vertices: &[Vector]) -> Vector {
    let dim = vertices[0].len();
    let mut m = vec![0.0; dim];
    for v in vertices {
        for d in 0..dim {
            m[d] += v[d] / vertices.len() as f64;
        }
    }
    m
}

fn max_pairwise(space: &NormSpec, vertices: &[Vector]) -> f64 {
    let mut best = 0.0f64;
    for (i, v) in vertices.iter().enumerate() {
        for w in &vertices[i + 1..] {
            best = best.max(space.distance_unchecked(v, w));
        }
    }
    best
}

fn edge_matrix_singular(vertices: &[Vector]) -> bool {
    let dim = vertices[0].len();
    let a: Vec<Vec<f64>> = (0..dim)
        .map(|row| (1..=dim).map(|j| vertices[j][row] - vertices[0][row]).collect())
        .collect();
    linalg::solve(&a, &vec![0.0; dim]).is_none()
}

/// Feasibility residual of a barycentric representation for a full simplex:
/// 0 when inside, otherwise the linf distance of the clipped combination.
fn simplex_residual(vertices: &[Vector], x: &[f64]) -> f64 {
    let dim = x.len();
    let a: Vec<Vec<f64>> = (0..dim)
        .map(|row| (1..=dim).map(|j| vertices[j][row] - vertices[0][row]).collect())
        .collect();
    let rhs: Vec<f64> = (0..dim).map(|d| x[d] - vertices[0][d]).collect();
    let Some(lam_tail) = linalg::solve(&a, &rhs) else {
        return f64::INFINITY;
    };
    let lam0 = 1.0 - lam_tail.iter().sum::<f64>();
    let mut lam = vec![lam0];
    lam.extend(lam_tail);
    if lam.iter().all(|l| *l >= 0.0) {
        return 0.0;
    }
    // clip negative weights, renormalize, measure the linf residual
    let clipped: Vec<f64> = lam.iter().map(|l| l.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    let mut y = vec![0.0; dim];
    for (w, v) in clipped.iter().zip(vertices) {
        for d in 0..dim {
            y[d] += w / s * v[d];
        }
    }
    y.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// linf residual of the best convex combination found by pairwise
/// Frank-Wolfe on the squared euclidean distance.
fn hull_residual(points: &[Vector], x: &[f64], tol: f64) -> f64 {
    let m = points.len();
    let dim = x.len();
    // start at the nearest vertex
    let start = (0..m)
        .min_by(|&i, &j| sq_dist(&points[i], x).total_cmp(&sq_dist(&points[j], x)))
        .unwrap();
    let mut w = vec![0.0; m];
    w[start] = 1.0;
    let mut y: Vector = points[start].clone();
    let target = (tol * 0.5).max(1e-13);
    for _ in 0..50_000 {
        let resid_inf = y.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if resid_inf <= target {
            break;
        }
        // gradient of 1/2|Vw - x|^2 in weight space is V^T (y - x)
        let grad: Vec<f64> = points
            .iter()
            .map(|p| p.iter().zip(y.iter().zip(x)).map(|(pi, (yi, xi))| pi * (yi - xi)).sum())
            .collect();
        let s = (0..m).min_by(|&i, &j| grad[i].total_cmp(&grad[j])).unwrap();
        let a = (0..m)
            .filter(|&i| w[i] > 0.0)
            .max_by(|&i, &j| grad[i].total_cmp(&grad[j]))
            .unwrap();
        if s == a {
            break;
        }
        // pairwise step: shift mass from the away atom a to the FW atom s
        let d: Vector = (0..dim).map(|k| points[s][k] - points[a][k]).collect();
        let dd: f64 = d.iter().map(|v| v * v).sum();
        if dd == 0.0 {
            break;
        }
        let rd: f64 = d.iter().zip(y.iter().zip(x)).map(|(di, (yi, xi))| di * (yi - xi)).sum();
        let step = (-rd / dd).clamp(0.0, w[a]);
        if step == 0.0 {
            break;
        }
        w[a] -= step;
        w[s] += step;
        for k in 0..dim {
            y[k] += step * d[k];
        }
    }
    y.iter().zip(x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
