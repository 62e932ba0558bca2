//! Acceptance suite: one test per top-level criterion, each printing a
//! pass/fail line (visible with `--nocapture`; the harness line mirrors it).

use std::process::Command;

use porosity::certify::{self, FieldGrid, Tolerances};
use porosity::domain::{ConvexBody, OpenSubset, Shape};
use porosity::map::{self, EstimateKind, MapExpr, SamplePlan};
use porosity::scenario::{self, Scenario, SubsetConfig, Tamper};
use porosity::space::{Lp, NormSpec};
use porosity::witness::{self, WitnessParams};

const BUDGET: usize = 10_000;

fn report(criterion: &str, pass: bool) {
    println!("criterion {criterion}: {}", if pass { "pass" } else { "FAIL" });
    assert!(pass, "criterion {criterion} failed");
}

fn scenario(
    space: NormSpec,
    body: Shape,
    map: MapExpr,
    u_center: Vec<f64>,
    u_radius: f64,
    (a, b): (f64, f64),
    seed: u64,
) -> Scenario {
    Scenario {
        space,
        body,
        map,
        u: SubsetConfig { center: u_center, radius: u_radius },
        a,
        b,
        eps: None,
        eps_frac: Some(0.5),
        seed,
        pairs: BUDGET,
        tamper: None,
    }
}

fn affine(matrix: Vec<Vec<f64>>) -> MapExpr {
    let dim = matrix.len();
    MapExpr::Affine { matrix, offset: vec![0.0; dim], asserted_lip: None }
}

fn rotation(theta: f64, scale: f64) -> Vec<Vec<f64>> {
    vec![
        vec![scale * theta.cos(), -scale * theta.sin()],
        vec![scale * theta.sin(), scale * theta.cos()],
    ]
}

/// Seven scenarios spanning {l1, l2, linf} x {ball, box, simplex}, dims 1-4.
fn seed_scenarios() -> Vec<(&'static str, Scenario)> {
    let th = 30f64.to_radians();
    vec![
        (
            "l2-ball-2d-scale",
            scenario(
                NormSpec::new(2, Lp::Two),
                Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
                MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.801 },
                vec![0.0, 0.0],
                0.5,
                (0.8, 0.801),
                11,
            ),
        ),
        (
            "l1-box-2d-scale",
            scenario(
                NormSpec::new(2, Lp::One),
                Shape::Box { lower: vec![0.0, 0.0], upper: vec![1.0, 1.0] },
                MapExpr::ScaleToward { anchor: vec![0.5, 0.5], factor: 0.801 },
                vec![0.5, 0.5],
                0.4,
                (0.8, 0.801),
                12,
            ),
        ),
        (
            "linf-ball-3d-scale",
            scenario(
                NormSpec::new(3, Lp::Inf),
                Shape::Ball { center: vec![0.0, 0.0, 0.0], radius: 1.0 },
                MapExpr::ScaleToward { anchor: vec![0.0, 0.0, 0.0], factor: 0.505 },
                vec![0.0, 0.0, 0.0],
                0.5,
                (0.5, 0.505),
                13,
            ),
        ),
        (
            "l2-simplex-2d-scale",
            scenario(
                NormSpec::new(2, Lp::Two),
                Shape::Simplex {
                    vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
                },
                MapExpr::ScaleToward { anchor: vec![1.0 / 3.0, 1.0 / 3.0], factor: 0.801 },
                vec![1.0 / 3.0, 1.0 / 3.0],
                0.25,
                (0.8, 0.801),
                14,
            ),
        ),
        (
            "l1-ball-1d-affine",
            scenario(
                NormSpec::new(1, Lp::One),
                Shape::Ball { center: vec![0.0], radius: 1.0 },
                affine(vec![vec![0.801]]),
                vec![0.0],
                0.5,
                (0.8, 0.801),
                15,
            ),
        ),
        (
            "linf-box-4d-affine",
            scenario(
                NormSpec::new(4, Lp::Inf),
                Shape::Box { lower: vec![-1.0; 4], upper: vec![1.0; 4] },
                affine(
                    (0..4)
                        .map(|i| (0..4).map(|j| if i == j { 0.505 } else { 0.0 }).collect())
                        .collect(),
                ),
                vec![0.0; 4],
                0.5,
                (0.5, 0.505),
                16,
            ),
        ),
        (
            "l2-ball-2d-rotation",
            scenario(
                NormSpec::new(2, Lp::Two),
                Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
                affine(rotation(th, 0.801)),
                vec![0.0, 0.0],
                0.5,
                (0.8, 0.801),
                17,
            ),
        ),
    ]
}

#[test]
fn criterion_1_witness_certificate_suite() {
    let mut pass = true;
    for (name, sc) in seed_scenarios() {
        let rep = scenario::run_scenario(&sc).unwrap_or_else(|e| panic!("{name}: {e}"));
        for check in ["sup_dist_analytic", "sup_dist_sampled", "lip_g_sampled", "stretch"] {
            let c = rep.witness.check(check).unwrap();
            if !c.pass {
                eprintln!("{name}/{check}: value {} bound {}", c.value, c.bound);
                pass = false;
            }
        }
        if !rep.hole.check("exclusion_arith").unwrap().pass {
            eprintln!("{name}/exclusion_arith failed");
            pass = false;
        }
        if !rep.overall {
            eprintln!("{name}: overall fail");
            pass = false;
        }
        // porosity constant alpha = b - a recorded
        assert!((rep.params.alpha - (sc.b - sc.a)).abs() < 1e-15);
    }
    report("1 (witness certificate suite)", pass);
}

#[test]
fn criterion_2_gamma_lemma() {
    let mut pass = true;
    for (name, sc) in seed_scenarios() {
        let rep = scenario::run_scenario(&sc).unwrap_or_else(|e| panic!("{name}: {e}"));
        let gamma = &rep.gamma;
        let lip = gamma.check("gamma_lip").unwrap();
        if !(lip.pass && lip.value <= 3.0 * rep.params.sigma * (1.0 + 1e-9)) {
            eprintln!("{name}/gamma_lip: {} vs {}", lip.value, 3.0 * rep.params.sigma);
            pass = false;
        }
        let sup = gamma.check("gamma_sup").unwrap();
        if !(sup.pass && sup.value <= rep.params.eps * (1.0 + 1e-9)) {
            eprintln!("{name}/gamma_sup: {} vs {}", sup.value, rep.params.eps);
            pass = false;
        }
        // support vanishes exactly outside B(0, r)
        if gamma.check("gamma_support").unwrap().value != 0.0 {
            eprintln!("{name}/gamma_support nonzero");
            pass = false;
        }
    }
    report("2 (gamma lemma)", pass);
}

#[test]
fn criterion_3_interval_algebra_sweep() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut accepted = 0usize;
    while accepted < 10_000 {
        let a: f64 = 0.01 + 0.97 * rng.random::<f64>();
        let width = (a / 16.0).min(a * (1.0 - a) / 48.0);
        let b = a + rng.random::<f64>() * width;
        if !(b < 1.0 && witness::check_interval(a, b).unwrap()) {
            continue;
        }
        accepted += 1;
        let sigma = 16.0 * (b - a) / a;
        assert!(sigma < 1.0, "sigma {sigma} at ({a}, {b})");
        assert!(b * (1.0 + 3.0 * sigma) < 1.0, "lip bound at ({a}, {b})");
        assert!(2.0 * b - a > b, "exclusion at ({a}, {b})");
    }
    report("3 (interval algebra sweep)", true);
}

#[test]
fn criterion_4_cover() {
    let cover = witness::cover_intervals(0.05, 0.95).unwrap();
    for (a, b) in &cover.intervals {
        assert!(witness::check_interval(*a, *b).unwrap(), "({a}, {b})");
    }
    let mut x = 0.05f64;
    while x <= 0.95 {
        assert!(cover.covers(x), "{x} uncovered");
        x += 1e-4;
    }
    report("4 (interval cover)", true);
}

#[test]
fn criterion_5_constant_map_lemma() {
    let body = ConvexBody::new(
        NormSpec::new(2, Lp::Two),
        Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
    )
    .unwrap();
    let u = OpenSubset::new(vec![0.2, 0.0], 0.3, body.clone()).unwrap();
    let f = MapExpr::Constant { value: vec![0.1, -0.1] };
    let eps = 0.05;
    let g = witness::constant_witness(&f, eps, &body).unwrap();
    let cert = certify::certify_constant_witness(
        &f,
        &g,
        &u,
        eps,
        &body,
        &SamplePlan::new(BUDGET, 55),
        &Tolerances::default(),
        20,
    )
    .unwrap();
    let identity = cert.check("identity").unwrap();
    let separation = cert.check("separation").unwrap();
    let pass = cert.overall && identity.value <= 1e-12 && separation.samples == 20;
    if !pass {
        eprintln!("{:#?}", cert.checks);
    }
    report("5 (constant-map lemma)", pass);
}

#[test]
fn criterion_6_lip_estimator_oracle_equivalence() {
    // Compose(affine, identity) has no closed form, forcing the sampled path
    let cases: Vec<(usize, Lp, Vec<Vec<f64>>)> = vec![
        (2, Lp::One, vec![vec![0.5, 0.2], vec![0.4, 0.3]]),
        (3, Lp::One, vec![
            vec![0.9, 0.0, 0.0],
            vec![0.0, 0.3, 0.0],
            vec![0.0, 0.0, 0.5],
        ]),
        (4, Lp::Inf, vec![
            vec![0.2, 0.2, 0.2, 0.2],
            vec![0.1, 0.0, 0.0, 0.1],
            vec![0.0, 0.3, 0.0, 0.0],
            vec![0.1, 0.1, 0.1, 0.0],
        ]),
        (2, Lp::Two, rotation(30f64.to_radians(), 0.801)),
        (2, Lp::Two, vec![vec![0.6, 0.3], vec![0.0, 0.5]]),
        (3, Lp::Two, vec![
            vec![0.85, 0.0, 0.0],
            vec![0.0, 0.4, 0.0],
            vec![0.0, 0.0, 0.2],
        ]),
    ];
    let mut pass = true;
    for (i, (dim, p, matrix)) in cases.into_iter().enumerate() {
        let exact = map::operator_norm(&matrix, p).unwrap();
        let body = ConvexBody::new(
            NormSpec::new(dim, p),
            Shape::Ball { center: vec![0.0; dim], radius: 1.0 },
        )
        .unwrap();
        let f = MapExpr::Compose {
            outer: Box::new(MapExpr::Affine {
                matrix,
                offset: vec![0.0; dim],
                asserted_lip: None,
            }),
            inner: Box::new(MapExpr::Identity),
        };
        let est = map::lip_global(&f, &body, &SamplePlan::new(BUDGET, 60 + i as u64)).unwrap();
        assert_eq!(est.kind, EstimateKind::SampledLowerBound);
        if est.value < 0.98 * exact || est.value > exact + 1e-12 {
            eprintln!("case {i}: sampled {} vs exact {exact}", est.value);
            pass = false;
        }
    }
    report("6 (Lipschitz estimator oracle equivalence)", pass);
}

#[test]
fn criterion_7_residual_exploration() {
    let mut pass = true;
    // 64-point lattice inside the unit l2 ball
    let grid: Vec<Vec<f64>> = (0..8)
        .flat_map(|i| {
            (0..8).map(move |j| {
                vec![-0.63 + 0.18 * i as f64, -0.63 + 0.18 * j as f64]
            })
        })
        .collect();
    let ball = ConvexBody::new(
        NormSpec::new(2, Lp::Two),
        Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
    )
    .unwrap();
    let plan = SamplePlan::new(2000, 70);

    let iso = MapExpr::Affine {
        matrix: rotation(30f64.to_radians(), 1.0),
        offset: vec![0.0, 0.0],
        asserted_lip: None,
    };
    let field =
        certify::lip_field(&iso, &ball, 0.05, &FieldGrid::Points(grid.clone()), &plan).unwrap();
    for v in &field.values {
        if (v - 1.0).abs() > 1e-6 {
            eprintln!("rotation field value {v}");
            pass = false;
        }
    }
    let rep = certify::residual_report(&field, &[0.99]);
    if rep.entries[0].fraction != 1.0 {
        eprintln!("rotation fraction {}", rep.entries[0].fraction);
        pass = false;
    }

    let scale = MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.5 };
    let field = certify::lip_field(&scale, &ball, 0.05, &FieldGrid::Points(grid), &plan).unwrap();
    let rep = certify::residual_report(&field, &[0.9]);
    if rep.entries[0].fraction != 0.0 {
        eprintln!("scale fraction {}", rep.entries[0].fraction);
        pass = false;
    }

    // quadratic oracle Lip(f, x, r) = x + r/2 on [0, 1]
    let seg = ConvexBody::new(
        NormSpec::new(1, Lp::Two),
        Shape::Box { lower: vec![0.0], upper: vec![1.0] },
    )
    .unwrap();
    let r = 0.1;
    let pts: Vec<Vec<f64>> = (1..=9).map(|i| vec![i as f64 / 10.0]).collect();
    let field =
        certify::lip_field(&MapExpr::Quadratic1d, &seg, r, &FieldGrid::Points(pts), &plan).unwrap();
    for (p, v) in field.grid.iter().zip(&field.values) {
        let oracle = p[0] + r / 2.0;
        if (v - oracle).abs() > 1e-6 {
            eprintln!("quadratic field at {}: {} vs {}", p[0], v, oracle);
            pass = false;
        }
    }
    report("7 (residual exploration)", pass);
}

fn running_example() -> (MapExpr, MapExpr, OpenSubset, WitnessParams, ConvexBody) {
    let body = ConvexBody::new(
        NormSpec::new(2, Lp::Two),
        Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
    )
    .unwrap();
    let f = MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.801 };
    let u = OpenSubset::new(vec![0.0, 0.0], 0.5, body.clone()).unwrap();
    let (g, params) =
        witness::build_witness(&f, &u, 0.8, 0.801, 1e-4, &SamplePlan::new(2000, 5)).unwrap();
    (f, g, u, params, body)
}

#[test]
fn criterion_8_negative_controls() {
    let tol = Tolerances::default();
    let plan = SamplePlan::new(2000, 8);
    let (f, g, u, params, body) = running_example();
    let mut pass = true;
    let mut expect_fail = |label: &str, failed: bool| {
        if !failed {
            eprintln!("negative control {label} did not fail");
            pass = false;
        }
    };

    // gamma checks, via the distortion hook
    let dist = certify::certify_gamma_with(
        &params,
        &body.space,
        &plan,
        &tol,
        &certify::GammaDistortion { scale: 40.0, support_factor: 1.5 },
    );
    expect_fail("gamma_lip", !dist.check("gamma_lip").unwrap().pass);
    expect_fail("gamma_sup", !dist.check("gamma_sup").unwrap().pass);
    expect_fail("gamma_support", !dist.check("gamma_support").unwrap().pass);

    // sup_dist_analytic and lip_g_analytic/lip_g_sampled: an asserted
    // expansion bound on a general-p space defeats the closed forms
    let p3_body = ConvexBody::new(
        NormSpec::new(2, Lp::P(3.0)),
        Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
    )
    .unwrap();
    let p3_u = OpenSubset::new(vec![0.0, 0.0], 0.5, p3_body.clone()).unwrap();
    let expansive = MapExpr::Affine {
        matrix: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        offset: vec![0.0, 0.0],
        asserted_lip: Some(1.2),
    };
    let cert = certify::certify_witness(&expansive, &expansive, &p3_u, &params, &plan, &tol).unwrap();
    expect_fail("sup_dist_analytic", !cert.check("sup_dist_analytic").unwrap().pass);
    expect_fail("lip_g_analytic", !cert.check("lip_g_analytic").unwrap().pass);
    expect_fail("lip_g_sampled", !cert.check("lip_g_sampled").unwrap().pass);

    // sup_dist_sampled: shrink eps far below the actual perturbation size
    let mut tiny = params.clone();
    tiny.eps /= 100.0;
    tiny.eps0 /= 100.0;
    let cert = certify::certify_witness(&f, &g, &u, &tiny, &plan, &tol).unwrap();
    expect_fail("sup_dist_sampled", !cert.check("sup_dist_sampled").unwrap().pass);

    // stretch: certify the unperturbed map in place of g
    let cert = certify::certify_witness(&f, &f, &u, &params, &plan, &tol).unwrap();
    expect_fail("stretch", !cert.check("stretch").unwrap().pass);

    // locality: a map differing from f everywhere
    let off = MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.9 };
    let cert = certify::certify_witness(&f, &off, &u, &params, &plan, &tol).unwrap();
    expect_fail("locality", !cert.check("locality").unwrap().pass);

    // exclusion_arith: swap a and b
    let mut swapped = params.clone();
    std::mem::swap(&mut swapped.a, &mut swapped.b);
    let cert = certify::certify_hole(&g, &u, &swapped, &plan, &tol, 3).unwrap();
    expect_fail("exclusion_arith", !cert.check("exclusion_arith").unwrap().pass);

    // hole_chain and hole_probes: the unperturbed map has no extra stretch
    let cert = certify::certify_hole(&f, &u, &params, &plan, &tol, 5).unwrap();
    expect_fail("hole_chain", !cert.check("hole_chain").unwrap().pass);
    expect_fail("hole_probes", !cert.check("hole_probes").unwrap().pass);

    // constant-map certificate controls
    let c = MapExpr::Constant { value: vec![0.1, -0.1] };
    let cw = witness::constant_witness(&c, 0.05, &body).unwrap();
    let cert = certify::certify_constant_witness(
        &MapExpr::Identity,
        &cw,
        &u,
        0.05,
        &body,
        &plan,
        &tol,
        3,
    )
    .unwrap();
    expect_fail("constant_on_u", !cert.check("constant_on_u").unwrap().pass);

    // on the general-p body only the asserted expansion bound is available
    let cert =
        certify::certify_constant_witness(&c, &expansive, &p3_u, 0.05, &p3_body, &plan, &tol, 3)
            .unwrap();
    expect_fail("nonexpansive_g", !cert.check("nonexpansive_g").unwrap().pass);

    // sup_dist: claim a far smaller eps than the witness was built with
    let cert =
        certify::certify_constant_witness(&c, &cw, &u, 5e-5, &body, &plan, &tol, 3).unwrap();
    expect_fail("sup_dist", !cert.check("sup_dist").unwrap().pass);

    // identity: the unperturbed constant has zero separation
    let cert = certify::certify_constant_witness(&c, &c, &u, 0.05, &body, &plan, &tol, 3).unwrap();
    expect_fail("identity", !cert.check("identity").unwrap().pass);
    expect_fail("separation", !cert.check("separation").unwrap().pass);

    // exit code 1 through the CLI on a tampered scenario
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tampered.json");
    let mut sc = scenario(
        NormSpec::new(2, Lp::Two),
        Shape::Ball { center: vec![0.0, 0.0], radius: 1.0 },
        MapExpr::ScaleToward { anchor: vec![0.0, 0.0], factor: 0.801 },
        vec![0.0, 0.0],
        0.5,
        (0.8, 0.801),
        8,
    );
    sc.pairs = 1500;
    sc.tamper = Some(Tamper::Stretch);
    std::fs::write(&cfg, serde_json::to_string(&sc).unwrap()).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_porosity"))
        .args(["certify", "--config", cfg.to_str().unwrap()])
        .output()
        .unwrap();
    expect_fail("cli exit code 1", out.status.code() == Some(1));

    report("8 (negative controls)", pass);
}
