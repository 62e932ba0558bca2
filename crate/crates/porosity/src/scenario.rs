//! End-to-end scenario runner: parse a declarative config, build the witness,
//! and certify every lemma inequality, with errors labeled by pipeline stage.

use serde::{Deserialize, Serialize};

use crate::certify::{
    self, Certificate, GammaDistortion, Tolerances,
};
use crate::domain::{ConvexBody, OpenSubset, Shape};
use crate::error::{Error, Result};
use crate::map::{self, LipEstimate, MapExpr, SamplePlan};
use crate::space::{NormSpec, Vector};
use crate::witness::{self, WitnessParams};

/// The open-ball subset U = B(center, radius) ∩ C in config form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetConfig {
    pub center: Vector,
    pub radius: f64,
}

/// Deliberate corruption of a passing scenario, for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tamper {
    /// Certify against the unperturbed map: the stretch check must fail.
    Stretch,
    /// Distort the perturbation field: the gamma checks must fail.
    Gamma,
    /// Swap a and b in the exclusion arithmetic: 2b - a > b must fail.
    Exclusion,
}

/// A full scenario: space, body, map, subset, interval, and budgets.
/// Exactly one of `eps` / `eps_frac` must be given; `eps_frac` scales the
/// runtime bound eps0 = sigma r / 2, which depends on the chosen radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub space: NormSpec,
    pub body: Shape,
    pub map: MapExpr,
    pub u: SubsetConfig,
    pub a: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_frac: Option<f64>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tamper: Option<Tamper>,
}

fn default_seed() -> u64 {
    1
}

fn default_pairs() -> usize {
    4000
}

/// Everything the certify pipeline produced for one scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub params: WitnessParams,
    pub lip_estimate: LipEstimate,
    pub gamma: Certificate,
    pub witness: Certificate,
    pub hole: Certificate,
    pub overall: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let sc: Scenario = serde_json::from_str(text)?;
        sc.validate_config()?;
        Ok(sc)
    }

    fn validate_config(&self) -> Result<()> {
        match (self.eps, self.eps_frac) {
            (Some(_), Some(_)) => {
                Err(Error::Config("give exactly one of eps / eps_frac, not both".into()))
            }
            (None, None) => Err(Error::Config("one of eps / eps_frac is required".into())),
            (Some(e), None) if !(e > 0.0 && e.is_finite()) => {
                Err(Error::Config(format!("eps {e} must be positive and finite")))
            }
            (None, Some(t)) if !(t > 0.0 && t < 1.0) => {
                Err(Error::Config(format!("eps_frac {t} must lie in (0, 1)")))
            }
            _ => Ok(()),
        }
    }

    pub fn build_body(&self) -> Result<ConvexBody> {
        ConvexBody::new(self.space, self.body.clone()).map_err(|e| e.at_stage("body"))
    }

    pub fn build_subset(&self, body: &ConvexBody) -> Result<OpenSubset> {
        OpenSubset::new(self.u.center.clone(), self.u.radius, body.clone())
            .map_err(|e| e.at_stage("subset"))
    }
}

/// Run the whole pipeline. A tampered scenario still returns `Ok` with a
/// failing certificate; `Err` means the configuration itself is unusable.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioReport> {
    let body = sc.build_body()?;
    let u = sc.build_subset(&body)?;
    let plan = SamplePlan::new(sc.pairs, sc.seed);
    let tol = Tolerances::default();

    sc.map.validate(&body, &plan).map_err(|e| e.at_stage("map"))?;
    let lip_estimate = map::lip_global(&sc.map, &body, &plan).map_err(|e| e.at_stage("map"))?;

    // resolve eps: a fixed fraction of eps0 needs the radius first, so build
    // with a placeholder then rebuild at the resolved value
    let eps = match (sc.eps, sc.eps_frac) {
        (Some(e), None) => e,
        (None, Some(t)) => {
            let (_, trial) =
                witness::build_witness(&sc.map, &u, sc.a, sc.b, f64::MIN_POSITIVE, &plan)
                    .map_err(|e| e.at_stage("witness"))?;
            t * trial.eps0
        }
        _ => unreachable!("validate_config enforces exactly one"),
    };
    let (g, params) = witness::build_witness(&sc.map, &u, sc.a, sc.b, eps, &plan)
        .map_err(|e| e.at_stage("witness"))?;

    let distortion = match sc.tamper {
        Some(Tamper::Gamma) => GammaDistortion { scale: 40.0, support_factor: 1.5 },
        _ => GammaDistortion::default(),
    };
    let gamma =
        certify::certify_gamma_with(&params, &body.space, &plan, &tol, &distortion);

    let g_certified = match sc.tamper {
        Some(Tamper::Stretch) => sc.map.clone(),
        _ => g.clone(),
    };
    let witness_cert = certify::certify_witness(&sc.map, &g_certified, &u, &params, &plan, &tol)
        .map_err(|e| e.at_stage("certify"))?;

    let mut hole_params = params.clone();
    if sc.tamper == Some(Tamper::Exclusion) {
        std::mem::swap(&mut hole_params.a, &mut hole_params.b);
    }
    let hole = certify::certify_hole(&g_certified, &u, &hole_params, &plan, &tol, 8)
        .map_err(|e| e.at_stage("certify"))?;

    let overall = gamma.overall && witness_cert.overall && hole.overall;
    Ok(ScenarioReport { params, lip_estimate, gamma, witness: witness_cert, hole, overall })
}

/// The countable family U_{i,j} = B(x_i, q_j) ∩ C from a seeded point cloud
/// and the radius ladder q_j = 1/(j+2).
pub fn subset_family(
    body: &ConvexBody,
    n_points: usize,
    n_radii: usize,
    seed: u64,
) -> Result<Vec<OpenSubset>> {
    let centers = body.sample(crate::domain::SampleStrategy::Random { n: n_points, seed })?;
    let mut out = Vec::new();
    for c in centers {
        for j in 0..n_radii {
            let q = 1.0 / (j as f64 + 2.0);
            // every sampled center lies in C, so the subset is nonempty
            out.push(OpenSubset::new(c.clone(), q, body.clone())?);
        }
    }
    Ok(out)
}

/// How a map relates to the sweep's interval cover on one subset U.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum SweepClass {
    /// f is (numerically) constant on U.
    ConstantOnU,
    /// The sampled Lip(f, U) lower bound lands in cover interval `index`;
    /// `boundary` flags values resolved at a shared endpoint.
    Interval { index: usize, a: f64, b: f64, boundary: bool },
    /// Lip(f, U) is below the cover's range or at/above 1: no strict
    /// contraction witness applies on this subset.
    NoContractionWitness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepEntry {
    pub center: Vector,
    pub radius: f64,
    pub lip_on_u: f64,
    pub class: SweepClass,
}

/// Classify f against a cover of [lo, hi] over every subset in the family.
pub fn sweep_family(
    f: &MapExpr,
    family: &[OpenSubset],
    cover: &witness::IntervalCover,
    plan: &SamplePlan,
) -> Result<Vec<SweepEntry>> {
    let mut out = Vec::with_capacity(family.len());
    for (i, u) in family.iter().enumerate() {
        let sub_plan = SamplePlan::new(plan.pairs, plan.subseed(1000 + i as u64));
        let est = map::lip_on_set(f, u, &sub_plan)?;
        let class = if est.value <= 1e-9 {
            SweepClass::ConstantOnU
        } else {
            match cover.classify(est.value) {
                Some((index, boundary)) => {
                    let (a, b) = cover.intervals[index];
                    SweepClass::Interval { index, a, b, boundary }
                }
                None => SweepClass::NoContractionWitness,
            }
        };
        out.push(SweepEntry {
            center: u.center.clone(),
            radius: u.radius,
            lip_on_u: est.value,
            class,
        });
    }
    Ok(out)
}
