//! Machine-checkable certificates for the lemma inequalities of the witness
//! construction, plus local-Lipschitz fields and residual-set reports.
//!
//! Failures are recorded in the certificate, never thrown; every sampled
//! check carries its seed and budget so certificates are reproducible
//! byte-for-byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ConvexBody, OpenSubset, SampleStrategy};
use crate::error::{Error, Result};
use crate::map::{self, EstimateKind, MapExpr, SamplePlan};
use crate::space::{self, NormSpec, Vector};
use crate::witness::WitnessParams;

/// How a check's value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    AnalyticBound,
    Sampled,
}

/// Default tolerances: exact-arithmetic noise versus sampling error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub exact: f64,
    pub sampled: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { exact: 1e-9, sampled: 1e-6 }
    }
}

/// One named inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// Positive when the inequality holds with room; the pass tolerance is
    /// applied on top of it.
    pub margin: f64,
    pub pass: bool,
    pub method: Method,
    pub samples: usize,
    pub seed: u64,
}

impl Check {
    /// value <= bound (+ tol)
    fn upper(name: &str, value: f64, bound: f64, tol: f64, method: Method) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            margin: bound - value,
            pass: value <= bound + tol,
            method,
            samples: 0,
            seed: 0,
        }
    }

    /// value >= bound (- tol)
    fn lower(name: &str, value: f64, bound: f64, tol: f64, method: Method) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            margin: value - bound,
            pass: value >= bound - tol,
            method,
            samples: 0,
            seed: 0,
        }
    }

    fn with_budget(mut self, samples: usize, seed: u64) -> Check {
        self.samples = samples;
        self.seed = seed;
        self
    }
}

/// A bundle of named checks; overall pass iff every check passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub checks: Vec<Check>,
    pub overall: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<WitnessParams>,
}

impl Certificate {
    fn seal(checks: Vec<Check>, params: Option<WitnessParams>) -> Certificate {
        let overall = checks.iter().all(|c| c.pass);
        Certificate { checks, overall, params }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Deliberate corruption of the evaluated perturbation, used only by
/// negative-control fixtures (the honest gamma cannot violate its own
/// lemma bounds for any parameter values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaDistortion {
    /// Multiplies the displacement.
    pub scale: f64,
    /// Multiplies the support radius used inside psi.
    pub support_factor: f64,
}

impl Default for GammaDistortion {
    fn default() -> Self {
        GammaDistortion { scale: 1.0, support_factor: 1.0 }
    }
}

fn distorted_gamma(
    params: &WitnessParams,
    space: &NormSpec,
    x: &[f64],
    d: &GammaDistortion,
) -> Vector {
    if d.support_factor == 1.0 {
        return space::scale(d.scale, &params.gamma(space, x));
    }
    let mut widened = params.clone();
    widened.r *= d.support_factor;
    // keep phi's cap as the original construction intended
    widened.eps *= d.support_factor;
    widened.eps0 *= d.support_factor;
    space::scale(d.scale, &widened.gamma(space, x))
}

/// Certify the perturbation lemma: Lip(gamma) <= 3 sigma, sup |gamma| <= eps,
/// and support inside B(0, r).
pub fn certify_gamma(
    params: &WitnessParams,
    space: &NormSpec,
    plan: &SamplePlan,
    tol: &Tolerances,
) -> Certificate {
    certify_gamma_with(params, space, plan, tol, &GammaDistortion::default())
}

/// [`certify_gamma`] with an explicit distortion; the negative-control hook.
pub fn certify_gamma_with(
    params: &WitnessParams,
    space: &NormSpec,
    plan: &SamplePlan,
    tol: &Tolerances,
    distortion: &GammaDistortion,
) -> Certificate {
    let r = params.r;
    let dim = space.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.subseed(61));
    // offsets spanning the support and a band beyond it
    let n_pts = (((2 * plan.pairs) as f64).sqrt().ceil() as usize + 1).max(8);
    let mut pts: Vec<Vector> = Vec::with_capacity(n_pts);
    for _ in 0..n_pts {
        let p: Vector = (0..dim)
            .map(|_| 1.3 * r * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        pts.push(p);
    }
    // axis-aligned probes at the support boundary sharpen the Lip sample
    for d in 0..dim {
        for s in [-1.0, 1.0] {
            for f in [0.45, 0.5, 0.55, 0.9, 0.999, 1.0] {
                let mut p = space::zeros(dim);
                p[d] = s * f * r;
                pts.push(p);
            }
        }
    }
    let images: Vec<Vector> = pts
        .iter()
        .map(|p| distorted_gamma(params, space, p, distortion))
        .collect();

    let mut lip = 0.0f64;
    let mut used = 0usize;
    'outer: for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = space.distance_unchecked(&pts[i], &pts[j]);
            if d < 1e-12 {
                continue;
            }
            lip = lip.max(space.distance_unchecked(&images[i], &images[j]) / d);
            used += 1;
            if used >= plan.pairs {
                break 'outer;
            }
        }
    }
    let sup = images.iter().map(|g| space.norm_unchecked(g)).fold(0.0, f64::max);
    let support_viol = pts
        .iter()
        .zip(&images)
        .filter(|(p, _)| space.norm_unchecked(p) >= r)
        .map(|(_, g)| space.norm_unchecked(g))
        .fold(0.0, f64::max);

    let lip_bound = 3.0 * params.sigma;
    let checks = vec![
        Check::upper("gamma_lip", lip, lip_bound, lip_bound * 1e-9, Method::Sampled)
            .with_budget(used, plan.seed),
        Check::upper("gamma_sup", sup, params.eps, params.eps * 1e-9, Method::Sampled)
            .with_budget(pts.len(), plan.seed),
        Check::upper("gamma_support", support_viol, 0.0, 0.0, Method::Sampled)
            .with_budget(pts.len(), plan.seed),
    ];
    let _ = tol;
    Certificate::seal(checks, Some(params.clone()))
}

/// Certify the witness lemma for (f, g, params): closeness, non-expansiveness,
/// the two-point stretch, and locality off B(x0, r).
pub fn certify_witness(
    f: &MapExpr,
    g: &MapExpr,
    u: &OpenSubset,
    params: &WitnessParams,
    plan: &SamplePlan,
    tol: &Tolerances,
) -> Result<Certificate> {
    let body = &u.parent;
    let space = body.space;
    let lip_f = map::lip_global(f, body, plan)?;
    let lip_f_bound = match lip_f.kind {
        EstimateKind::Exact => lip_f.value,
        // without a closed form, membership in M is the certified premise
        EstimateKind::SampledLowerBound => 1.0,
    };
    let mut checks = Vec::new();

    // (1) |g - f|_inf <= eps: analytic Lip(f) |gamma|_inf <= eps, plus sampled sup
    checks.push(Check::upper(
        "sup_dist_analytic",
        lip_f_bound * params.eps,
        params.eps,
        tol.exact,
        Method::AnalyticBound,
    ));
    let sd = map::sup_distance(f, g, body, plan)?;
    checks.push(
        Check::upper("sup_dist_sampled", sd, params.eps, params.eps * 1e-9, Method::Sampled)
            .with_budget(plan.pairs, plan.seed),
    );

    // (2) Lip(g) <= max{b(1 + 3 sigma), Lip(f)} <= 1
    let analytic = (params.b * (1.0 + 3.0 * params.sigma)).max(lip_f_bound);
    checks.push(Check::upper("lip_g_analytic", analytic, 1.0, tol.exact, Method::AnalyticBound));
    let lip_g = map::lip_global(g, body, plan)?;
    checks.push(
        Check::upper("lip_g_sampled", lip_g.value, 1.0, 1e-9, Method::Sampled)
            .with_budget(lip_g.samples, lip_g.seed),
    );

    // (3) two-point stretch >= a(1 + sigma/4)
    let stretch = two_point_stretch(g, body, params)?;
    checks.push(Check::lower(
        "stretch",
        stretch,
        params.a * (1.0 + params.sigma / 4.0),
        1e-12,
        Method::Exact,
    ));

    // locality: g = f exactly on sampled points of C \ B(x0, r)
    let pts = body.sample(SampleStrategy::Random {
        n: plan.pairs.clamp(64, 2048),
        seed: plan.subseed(71),
    })?;
    let mut viol = 0.0f64;
    let mut outside = 0usize;
    for p in &pts {
        if space.distance_unchecked(p, &params.x0) >= params.r {
            outside += 1;
            viol = viol.max(space.distance_unchecked(&g.evaluate(p, body)?, &f.evaluate(p, body)?));
        }
    }
    checks.push(
        Check::upper("locality", viol, 0.0, 0.0, Method::Sampled).with_budget(outside, plan.seed),
    );

    Ok(Certificate::seal(checks, Some(params.clone())))
}

/// The two-point quotient |g(x0 + eps e) - g(x0)| / eps.
pub fn two_point_stretch(g: &MapExpr, body: &ConvexBody, params: &WitnessParams) -> Result<f64> {
    let p1 = space::axpy(&params.x0, params.eps, &params.e);
    let y1 = g.evaluate(&p1, body)?;
    let y0 = g.evaluate(&params.x0, body)?;
    Ok(body.space.distance_unchecked(&y1, &y0) / params.eps)
}

/// Certify the hole lemma: the exclusion arithmetic a(1 + sigma/8) = 2b - a > b,
/// the inequality chain instantiated with the verified stretch, and fuzzed
/// non-expansive probes h within the sup-ball of radius (a sigma / 16) eps.
pub fn certify_hole(
    g: &MapExpr,
    u: &OpenSubset,
    params: &WitnessParams,
    plan: &SamplePlan,
    tol: &Tolerances,
    n_probes: usize,
) -> Result<Certificate> {
    let body = &u.parent;
    let (a, b, sigma, eps) = (params.a, params.b, params.sigma, params.eps);
    let hole_bound = a * (1.0 + sigma / 8.0);
    let mut checks = Vec::new();

    // (i) a(1 + sigma/8) = 2b - a > b, exact in the 2b - a form
    checks.push(Check::lower("exclusion_arith", 2.0 * b - a, b, 0.0, Method::Exact));

    // (ii) the chain: verified stretch - a sigma/8 >= a(1 + sigma/8)
    let stretch = two_point_stretch(g, body, params)?;
    checks.push(Check::lower(
        "hole_chain",
        stretch - a * sigma / 8.0,
        hole_bound,
        tol.exact,
        Method::Exact,
    ));

    // (iii) probes h = (1 - mu) g + mu const, with sup d(h, g) <= (a sigma/16) eps
    let radius = a * sigma / 16.0 * eps;
    let centers = body.sample(SampleStrategy::Random { n: n_probes, seed: plan.subseed(81) })?;
    let mut worst = f64::INFINITY;
    let mut count = 0usize;
    for c in centers {
        let base = map::sup_distance(
            &g.clone(),
            &MapExpr::Constant { value: c.clone() },
            body,
            &SamplePlan::new(plan.pairs.min(1024), plan.subseed(82)),
        )?;
        if base < 1e-12 {
            continue;
        }
        let mu = (radius / base) * 0.999;
        let h = MapExpr::ConvexCombo {
            weights: vec![1.0 - mu, mu],
            children: vec![g.clone(), MapExpr::Constant { value: c }],
        };
        let d = map::sup_distance(&h, g, body, &SamplePlan::new(plan.pairs.min(1024), plan.subseed(83)))?;
        if d > radius * (1.0 + 1e-9) {
            // probe overshot its sup-ball; skip rather than misreport
            continue;
        }
        worst = worst.min(two_point_stretch(&h, body, params)?);
        count += 1;
    }
    if count == 0 {
        worst = stretch; // the zero perturbation h = g
        count = 1;
    }
    checks.push(
        Check::lower("hole_probes", worst, hole_bound, tol.exact, Method::Sampled)
            .with_budget(count, plan.seed),
    );

    Ok(Certificate::seal(checks, Some(params.clone())))
}

/// Certify the constant-map lemma for f constant on U and its witness
/// g = (1 - eps/R) f + (eps/R) id.
pub fn certify_constant_witness(
    f: &MapExpr,
    g: &MapExpr,
    u: &OpenSubset,
    eps: f64,
    body: &ConvexBody,
    plan: &SamplePlan,
    tol: &Tolerances,
    n_probes: usize,
) -> Result<Certificate> {
    let space = body.space;
    let diam = body.diameter();
    let mut checks = Vec::new();

    // precondition: f constant on U (sampled)
    let upts = u.sample(plan.pairs.clamp(32, 512), plan.subseed(91))?;
    let f0 = f.evaluate(&upts[0], body)?;
    let const_viol = upts
        .iter()
        .map(|p| Ok(space.distance_unchecked(&f.evaluate(p, body)?, &f0)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    checks.push(
        Check::upper("constant_on_u", const_viol, 0.0, tol.exact, Method::Sampled)
            .with_budget(upts.len(), plan.seed),
    );

    // probe pair (u, v): the best-separated sampled pair in U
    let (mut pu, mut pv, mut sep) = (upts[0].clone(), upts[0].clone(), 0.0);
    for i in 0..upts.len() {
        for j in i + 1..upts.len() {
            let d = space.distance_unchecked(&upts[i], &upts[j]);
            if d > sep {
                sep = d;
                pu = upts[i].clone();
                pv = upts[j].clone();
            }
        }
    }

    // (i) non-expansiveness of g (sampled)
    let lip_g = map::lip_global(g, body, plan)?;
    checks.push(
        Check::upper("nonexpansive_g", lip_g.value, 1.0, 1e-9, Method::Sampled)
            .with_budget(lip_g.samples, lip_g.seed),
    );

    // (ii) sup distance within eps
    let sd = map::sup_distance(f, g, body, plan)?;
    checks.push(
        Check::upper("sup_dist", sd, eps, eps * 1e-9, Method::Sampled)
            .with_budget(plan.pairs, plan.seed),
    );

    // (iii) the exact identity |g(u) - g(v)| = (eps/R) |u - v|
    let gd = space.distance_unchecked(&g.evaluate(&pu, body)?, &g.evaluate(&pv, body)?);
    let identity_err = (gd - eps / diam * sep).abs();
    checks.push(Check::upper("identity", identity_err, 0.0, 1e-12, Method::Exact));

    // (iv) separation floor eps |u - v| / (3R) under fuzzed probes
    let floor = eps * sep / (3.0 * diam);
    let probe_radius = sep * eps / (3.0 * diam);
    let centers = body.sample(SampleStrategy::Random { n: n_probes, seed: plan.subseed(92) })?;
    let mut worst = f64::INFINITY;
    let mut count = 0usize;
    for c in centers {
        let base = map::sup_distance(
            g,
            &MapExpr::Constant { value: c.clone() },
            body,
            &SamplePlan::new(plan.pairs.min(1024), plan.subseed(93)),
        )?;
        if base < 1e-12 {
            continue;
        }
        let mu = (probe_radius / base) * 0.999;
        let h = MapExpr::ConvexCombo {
            weights: vec![1.0 - mu, mu],
            children: vec![g.clone(), MapExpr::Constant { value: c }],
        };
        let d = space.distance_unchecked(&h.evaluate(&pu, body)?, &h.evaluate(&pv, body)?);
        worst = worst.min(d);
        count += 1;
    }
    if count == 0 {
        worst = gd;
        count = 1;
    }
    checks.push(
        Check::lower("separation", worst, floor, tol.exact, Method::Sampled)
            .with_budget(count, plan.seed),
    );

    Ok(Certificate::seal(checks, None))
}

/// The local-Lipschitz field Lip(f, x, r) over a grid of C.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipField {
    pub space: NormSpec,
    pub radius: f64,
    pub grid: Vec<Vector>,
    pub values: Vec<f64>,
}

/// Grid specification for [`lip_field`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldGrid {
    /// Lattice of the body's bounding box intersected with C, k per axis.
    Lattice { k: usize },
    /// Explicit grid points (must lie in C).
    Points(Vec<Vector>),
}

pub fn lip_field(
    f: &MapExpr,
    body: &ConvexBody,
    r: f64,
    grid: &FieldGrid,
    plan: &SamplePlan,
) -> Result<LipField> {
    let mut points = match grid {
        FieldGrid::Lattice { k } => body.sample(SampleStrategy::Grid { k: *k })?,
        FieldGrid::Points(p) => p.clone(),
    };
    if points.is_empty() {
        return Err(Error::EmptySample("empty field grid".into()));
    }
    // stable lexicographic order makes emitted fields byte-reproducible
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let local_plan = SamplePlan::new(plan.pairs, plan.subseed(100 + i as u64));
            Ok(map::lip_local(f, body, p, r, &local_plan)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(LipField { space: body.space, radius: r, grid: points, values })
}

/// Per-threshold summary of a Lip field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualEntry {
    pub threshold: f64,
    pub fraction: f64,
    pub exceed_count: usize,
    /// Heuristic density flag at grid resolution: every grid point has an
    /// exceeding point within twice the grid spacing. Not a proof of density.
    pub grid_dense: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub entries: Vec<ResidualEntry>,
    pub note: String,
}

pub fn residual_report(field: &LipField, thresholds: &[f64]) -> ResidualReport {
    let n = field.grid.len();
    // grid spacing: max nearest-neighbour distance
    let mut spacing = 0.0f64;
    for (i, p) in field.grid.iter().enumerate() {
        let nearest = field
            .grid
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, q)| field.space.distance_unchecked(p, q))
            .fold(f64::INFINITY, f64::min);
        if nearest.is_finite() {
            spacing = spacing.max(nearest);
        }
    }
    let entries = thresholds
        .iter()
        .map(|s| {
            let exceed: Vec<usize> = (0..n).filter(|i| field.values[*i] > *s).collect();
            let grid_dense = !exceed.is_empty()
                && field.grid.iter().all(|p| {
                    exceed.iter().any(|&i| {
                        field.space.distance_unchecked(p, &field.grid[i])
                            <= 2.0 * spacing + 1e-12
                    })
                });
            ResidualEntry {
                threshold: *s,
                fraction: exceed.len() as f64 / n as f64,
                exceed_count: exceed.len(),
                grid_dense,
            }
        })
        .collect();
    ResidualReport {
        entries,
        note: "grid-resolution heuristic; density flags are not Baire-category proofs".into(),
    }
}
