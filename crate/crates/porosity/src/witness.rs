//! The witness construction: the admissible interval condition, the proof
//! constants, the search for (x0, e), the radius choice, the bump functions,
//! the perturbation gamma, the witness map g, the constant-map witness, and
//! the greedy interval cover of (0, 1).

use serde::{Deserialize, Serialize};

use crate::domain::{ConvexBody, OpenSubset};
use crate::error::{Error, Result};
use crate::map::{MapExpr, SamplePlan};
use crate::space::{self, NormSpec, Vector};

/// All proof-mandated parameters of one witness construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessParams {
    pub a: f64,
    pub b: f64,
    pub x0: Vector,
    pub e: Vector,
    pub r: f64,
    pub sigma: f64,
    pub eps0: f64,
    pub eps: f64,
    pub alpha: f64,
}

impl WitnessParams {
    /// Check the algebraic invariants tying the fields together.
    pub fn validate(&self, space: &NormSpec) -> Result<()> {
        space.check_dim(&self.x0)?;
        space.check_dim(&self.e)?;
        let fail = |reason: &str| Error::IntervalCondition {
            a: self.a,
            b: self.b,
            reason: reason.into(),
        };
        if !(self.a < self.b) {
            return Err(fail("requires a < b"));
        }
        if !check_interval(self.a, self.b)? {
            return Err(fail("width condition b - a < min{a/16, a(1-b)/(48b)} fails"));
        }
        let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0);
        if !rel(self.sigma, 16.0 * (self.b - self.a) / self.a) {
            return Err(fail("sigma must equal 16(b-a)/a"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(fail("sigma must lie in (0, 1)"));
        }
        if self.b * (1.0 + 3.0 * self.sigma) > 1.0 {
            return Err(fail("requires b(1 + 3 sigma) <= 1"));
        }
        if !(self.r > 0.0) {
            return Err(fail("radius must be positive"));
        }
        if !rel(self.eps0, self.sigma * self.r / 2.0) {
            return Err(fail("eps0 must equal sigma r / 2"));
        }
        if !(self.eps > 0.0 && self.eps < self.eps0) {
            return Err(Error::EpsilonOutOfRange { eps: self.eps, eps0: self.eps0 });
        }
        if !rel(self.alpha, self.b - self.a) {
            return Err(fail("alpha must equal b - a"));
        }
        let en = space.norm(&self.e)?;
        if (en - 1.0).abs() > space::UNIT_TOL {
            return Err(Error::NotUnitNorm { norm: en });
        }
        Ok(())
    }

    /// The perturbation displacement gamma(x) for an offset x = point - x0:
    /// (sigma / 2r) psi(x) phi(e*(x)) (r e - x). Exactly zero outside B(0, r).
    pub fn gamma(&self, space: &NormSpec, x: &[f64]) -> Vector {
        let psi = bump_psi(self.r, x, space);
        if psi == 0.0 {
            return space::zeros(x.len());
        }
        // e is stored unit-norm; renormalize to absorb serialization drift
        let en = space.norm_unchecked(&self.e);
        let e_unit = space::scale(1.0 / en, &self.e);
        let estar = space
            .norming_functional(&e_unit)
            .expect("validated params carry a unit direction");
        let phi = bump_phi(self.eps, self.sigma, estar.eval(x));
        let coef = self.sigma / (2.0 * self.r) * psi * phi;
        let mut out = space::scale(self.r, &e_unit);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = coef * (*o - xi);
        }
        out
    }
}

/// True iff 0 < a < b < 1 and b - a < min{a/16, a(1-b)/(48b)}.
pub fn check_interval(a: f64, b: f64) -> Result<bool> {
    if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0) {
        return Err(Error::IntervalCondition {
            a,
            b,
            reason: "arguments must lie in (0, 1)".into(),
        });
    }
    Ok(a < b && b - a < (a / 16.0).min(a * (1.0 - b) / (48.0 * b)))
}

/// The proof constants derived from (a, b, r).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessConstants {
    pub sigma: f64,
    pub eps0: f64,
    pub alpha: f64,
}

/// sigma = 16(b-a)/a, eps0 = sigma r / 2, alpha = b - a; asserts the implied
/// bounds sigma < 1 and b(1 + 3 sigma) < 1.
pub fn witness_constants(a: f64, b: f64, r: f64) -> Result<WitnessConstants> {
    if !check_interval(a, b)? {
        return Err(Error::IntervalCondition {
            a,
            b,
            reason: "width condition b - a < min{a/16, a(1-b)/(48b)} fails".into(),
        });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("radius {r} must be positive")));
    }
    let sigma = 16.0 * (b - a) / a;
    assert!(sigma < 1.0, "interval condition implies sigma < 1");
    assert!(b * (1.0 + 3.0 * sigma) < 1.0, "interval condition implies b(1+3 sigma) < 1");
    Ok(WitnessConstants { sigma, eps0: sigma * r / 2.0, alpha: b - a })
}

/// phi(t) = min{|t|, eps/sigma}; 1-Lipschitz and even.
pub fn bump_phi(eps: f64, sigma: f64, t: f64) -> f64 {
    t.abs().min(eps / sigma)
}

/// psi(x) = clamp(2 - 2|x|/r, 0, 1): one on B(0, r/2), zero outside B(0, r),
/// affine in |x| between; 2/r-Lipschitz.
pub fn bump_psi(r: f64, x: &[f64], space: &NormSpec) -> f64 {
    (2.0 - 2.0 * space.norm_unchecked(x) / r).clamp(0.0, 1.0)
}

/// The output of the (x0, e) search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionChoice {
    pub x0: Vector,
    pub e: Vector,
    /// Distance from x0 to the far end of the sampled segment; forward steps
    /// x0 + t e stay in U for t below this.
    pub forward_slack: f64,
    /// The minimum grid quotient achieved by the winning candidate.
    pub min_quotient: f64,
}

/// Search for a base point x0 in U and a unit direction e whose forward
/// difference quotients |f(x0 + t e) - f(x0)| / t exceed L on a geometric
/// t-grid. A grid certificate, not the paper's liminf over all t.
pub fn find_direction(
    f: &MapExpr,
    u: &OpenSubset,
    threshold: f64,
    plan: &SamplePlan,
) -> Result<DirectionChoice> {
    let space = u.space();
    let body = &u.parent;
    let n_pts = (((2 * plan.pairs) as f64).sqrt().ceil() as usize + 1).max(8);
    let pts = u.sample(2 * n_pts, plan.subseed(51))?;
    // best sampled pair with quotient above the threshold
    let images: Vec<Vector> = pts
        .iter()
        .map(|p| f.evaluate(p, body))
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, usize, f64)> = None;
    let mut used = 0usize;
    'outer: for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = space.distance_unchecked(&pts[i], &pts[j]);
            if d < 1e-12 {
                continue;
            }
            used += 1;
            let q = space.distance_unchecked(&images[i], &images[j]) / d;
            if q > threshold && best.map_or(true, |(_, _, bq)| q > bq) {
                best = Some((i, j, q));
            }
            if used >= plan.pairs {
                break 'outer;
            }
        }
    }
    let Some((i, j, _)) = best else {
        return Err(Error::NoDirectionFound { threshold });
    };
    let (x, y) = (&pts[i], &pts[j]);
    let seg = space.distance_unchecked(x, y);
    let e = space::scale(1.0 / seg, &space::sub(y, x));

    // scan candidate base points along [x, y]; for each, certify the forward
    // quotient on a geometric t-grid and keep the best minimum
    let mut winner: Option<DirectionChoice> = None;
    for step in 0..10 {
        let s = step as f64 / 10.0;
        let c = space::lerp(x, y, s);
        let t_max = seg * (1.0 - s) * (1.0 - 1e-12);
        if t_max < 1e-10 {
            continue;
        }
        let fc = f.evaluate(&c, body)?;
        let mut min_q = f64::INFINITY;
        let mut t = t_max;
        for _ in 0..24 {
            if t < 1e-12 {
                break;
            }
            let q = space.distance_unchecked(&f.evaluate(&space::axpy(&c, t, &e), body)?, &fc) / t;
            min_q = min_q.min(q);
            t /= 2.0;
        }
        if min_q > threshold
            && winner.as_ref().map_or(true, |w| min_q > w.min_quotient)
        {
            winner = Some(DirectionChoice {
                x0: c,
                e: e.clone(),
                forward_slack: seg * (1.0 - s),
                min_quotient: min_q,
            });
        }
    }
    winner.ok_or(Error::NoDirectionFound { threshold })
}

/// The output of the radius choice, with its grid certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadiusChoice {
    pub r: f64,
    /// Worst-case stretch margin min_t |f(x0+te)-f(x0)|/t - a over the grid.
    pub margin: f64,
    pub grid_points: usize,
}

/// Largest radius from a geometric ladder such that B(x0, r) ∩ C ⊆ U
/// (triangle-inequality certificate), x0 + r e ∈ U, and the stretch quotient
/// exceeds `a` on a dense grid of (0, r].
pub fn choose_radius(
    f: &MapExpr,
    u: &OpenSubset,
    dir: &DirectionChoice,
    a: f64,
    plan: &SamplePlan,
) -> Result<RadiusChoice> {
    let _ = plan;
    let space = u.space();
    let body = &u.parent;
    let slack = u.radius - space.distance(&dir.x0, &u.center)?;
    let r_cap = 0.999 * slack.min(dir.forward_slack);
    if r_cap <= 0.0 {
        return Err(Error::NoRadiusFound { threshold: a });
    }
    let fx0 = f.evaluate(&dir.x0, body)?;
    let mut r = r_cap;
    for _ in 0..60 {
        if u.subset_margin(&dir.x0, r)? >= 0.0
            && u.contains(&space::axpy(&dir.x0, r, &dir.e), 0.0)?
        {
            // linear grid plus a geometric refinement toward t = 0; the
            // floor r e-6 keeps f(x0 + te) - f(x0) clear of cancellation
            let mut ts: Vec<f64> = (1..=64).map(|i| r * i as f64 / 64.0).collect();
            let mut t = r / 2.0;
            for _ in 0..40 {
                if t < r * 1e-6 {
                    break;
                }
                ts.push(t);
                t /= 2.0;
            }
            let mut margin = f64::INFINITY;
            for t in &ts {
                let q = space
                    .distance_unchecked(&f.evaluate(&space::axpy(&dir.x0, *t, &dir.e), body)?, &fx0)
                    / t;
                margin = margin.min(q - a);
            }
            if margin > 0.0 {
                return Ok(RadiusChoice { r, margin, grid_points: ts.len() });
            }
        }
        r *= 0.75;
    }
    Err(Error::NoRadiusFound { threshold: a })
}

/// Run the full construction: find (x0, e), choose r, derive the constants,
/// and assemble the Perturbed witness map g(x) = f(x + gamma(x - x0)).
pub fn build_witness(
    f: &MapExpr,
    u: &OpenSubset,
    a: f64,
    b: f64,
    eps: f64,
    plan: &SamplePlan,
) -> Result<(MapExpr, WitnessParams)> {
    if !check_interval(a, b)? {
        return Err(Error::IntervalCondition {
            a,
            b,
            reason: "width condition b - a < min{a/16, a(1-b)/(48b)} fails".into(),
        });
    }
    let dir = find_direction(f, u, a, plan).map_err(|e| e.at_stage("direction"))?;
    let radius = choose_radius(f, u, &dir, a, plan).map_err(|e| e.at_stage("radius"))?;
    let consts = witness_constants(a, b, radius.r)?;
    if !(eps > 0.0 && eps < consts.eps0) {
        return Err(Error::EpsilonOutOfRange { eps, eps0: consts.eps0 }.at_stage("epsilon"));
    }
    let params = WitnessParams {
        a,
        b,
        x0: dir.x0,
        e: dir.e,
        r: radius.r,
        sigma: consts.sigma,
        eps0: consts.eps0,
        eps,
        alpha: consts.alpha,
    };
    params.validate(&u.space())?;
    let g = MapExpr::Perturbed { inner: Box::new(f.clone()), params: params.clone() };
    Ok((g, params))
}

/// The witness for maps constant on U: g(x) = (1 - eps/R) f(x) + (eps/R) x
/// with R = diam(C).
pub fn constant_witness(f: &MapExpr, eps: f64, body: &ConvexBody) -> Result<MapExpr> {
    if eps < 0.0 {
        return Err(Error::Config(format!("eps {eps} must be nonnegative")));
    }
    if eps == 0.0 {
        return Ok(f.clone());
    }
    let diam = body.diameter();
    if eps > diam {
        return Err(Error::Config(format!("eps {eps} exceeds diam(C) = {diam}")));
    }
    let t = eps / diam;
    Ok(MapExpr::ConvexCombo {
        weights: vec![1.0 - t, t],
        children: vec![f.clone(), MapExpr::Identity],
    })
}

/// A finite open cover of [lo, hi] ⊂ (0, 1) by intervals satisfying the
/// admissible-width condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalCover {
    pub intervals: Vec<(f64, f64)>,
    pub range: (f64, f64),
}

/// Greedy sweep: each interval takes half the admissible width at its left
/// endpoint (the binding constraint solved exactly), with overlap factor 0.9.
pub fn cover_intervals(lo: f64, hi: f64) -> Result<IntervalCover> {
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::DegenerateRange { lo, hi });
    }
    let mut intervals = Vec::new();
    let mut a = lo * (1.0 - 1e-9); // start slightly below lo
    loop {
        // candidate width from the first constraint, halved
        let b1 = a + a / 32.0;
        // b - a = a(1-b)/(96b), i.e. the positive root of 96 b^2 - 95 a b - a
        let b2 = (95.0 * a + (9025.0 * a * a + 384.0 * a).sqrt()) / 192.0;
        let b = b1.min(b2);
        debug_assert!(check_interval(a, b).unwrap());
        intervals.push((a, b));
        if b > hi {
            break;
        }
        a += 0.9 * (b - a);
        if intervals.len() > 200_000 {
            return Err(Error::Config("interval cover failed to terminate".into()));
        }
    }
    Ok(IntervalCover { intervals, range: (lo, hi) })
}

impl IntervalCover {
    /// True iff x lies in some open interval of the cover.
    pub fn covers(&self, x: f64) -> bool {
        self.intervals.iter().any(|(a, b)| *a < x && x < *b)
    }

    /// First interval containing x in its half-open classification sense
    /// (a, b]; boundary values resolve to the lower interval.
    pub fn classify(&self, x: f64) -> Option<(usize, bool)> {
        let idx = self
            .intervals
            .iter()
            .position(|(a, b)| *a < x && x <= *b)?;
        let (a, b) = self.intervals[idx];
        let boundary = x == a || x == b;
        Some((idx, boundary))
    }
}
