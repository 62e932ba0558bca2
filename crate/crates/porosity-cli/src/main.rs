//! `porosity` — certify witness constructions, compute Lipschitz fields,
//! generate interval covers, and sweep subset families from the shell.
//!
//! JSON in, JSON/CSV out; exit 0 on success, 1 on a failed certificate,
//! 2 on configuration errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use porosity::certify::{self, FieldGrid, LipField};
use porosity::domain::{ConvexBody, Shape};
use porosity::map::{MapExpr, SamplePlan};
use porosity::scenario::{self, Scenario};
use porosity::space::NormSpec;
use porosity::witness;

#[derive(Parser)]
#[command(name = "porosity", version, about = "porosity witness toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Override the RNG seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the sample-pair budget from the config.
    #[arg(long)]
    samples: Option<usize>,
    /// Output file path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default from POROSITY_WORKERS; orchestration is
    /// single-threaded, so this never affects results).
    #[arg(long)]
    workers: Option<usize>,
    /// Override the sampled-check tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end and write its certificate bundle.
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute the local-Lipschitz field Lip(f, x, r) over a grid of C.
    Field {
        #[arg(long)]
        config: PathBuf,
        /// Lattice points per axis.
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Local radius r.
        #[arg(long)]
        radius: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate the greedy interval cover of [lo, hi].
    Cover {
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify a map against an interval cover over a subset family.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the bundled ℓ2-ball scenario end to end.
    Demo {
        #[command(flatten)]
        common: CommonArgs,
    },
}

/// Config for `field` and `sweep`: just the ambient data, no interval.
#[derive(Deserialize)]
struct MapConfig {
    space: NormSpec,
    body: Shape,
    map: MapExpr,
    #[serde(default)]
    radius: Option<f64>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    pairs: Option<usize>,
    #[serde(default)]
    n_points: Option<usize>,
    #[serde(default)]
    n_radii: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn resolve_workers(flag: Option<usize>) -> usize {
    flag.or_else(|| {
        std::env::var("POROSITY_WORKERS").ok().and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
}

fn echo_run(seed: u64, samples: usize, workers: usize) {
    println!("seed: {seed}");
    println!("samples: {samples}");
    println!("workers: {workers}");
}

fn write_out(out: &Option<PathBuf>, text: &str) -> porosity::Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn load_map_config(path: &PathBuf) -> porosity::Result<(MapConfig, ConvexBody)> {
    let text = fs::read_to_string(path)?;
    let cfg: MapConfig = serde_json::from_str(&text)?;
    let body = ConvexBody::new(cfg.space, cfg.body.clone())?;
    cfg.map.validate(&body, &SamplePlan::new(256, cfg.seed.unwrap_or(1)))?;
    Ok((cfg, body))
}

fn run(cmd: Command) -> porosity::Result<ExitCode> {
    match cmd {
        Command::Certify { config, common } => {
            let text = fs::read_to_string(&config)?;
            let mut sc = Scenario::from_json(&text)?;
            if let Some(s) = common.seed {
                sc.seed = s;
            }
            if let Some(n) = common.samples {
                sc.pairs = n;
            }
            certify_and_report(&sc, &common)
        }
        Command::Demo { common } => {
            let mut sc = demo_scenario();
            if let Some(s) = common.seed {
                sc.seed = s;
            }
            if let Some(n) = common.samples {
                sc.pairs = n;
            }
            certify_and_report(&sc, &common)
        }
        Command::Field { config, grid, radius, common } => {
            let (cfg, body) = load_map_config(&config)?;
            let r = radius.or(cfg.radius).ok_or_else(|| {
                porosity::Error::Config("field needs --radius or a radius in the config".into())
            })?;
            let seed = common.seed.or(cfg.seed).unwrap_or(1);
            let samples = common.samples.or(cfg.pairs).unwrap_or(2000);
            echo_run(seed, samples, resolve_workers(common.workers));
            let plan = SamplePlan::new(samples, seed);
            let field =
                certify::lip_field(&cfg.map, &body, r, &FieldGrid::Lattice { k: grid }, &plan)?;
            write_out(&common.out, &plotdata_csv(&field)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Cover { lo, hi, out } => {
            let cover = witness::cover_intervals(lo, hi)?;
            write_out(&out, &serde_json::to_string_pretty(&cover)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, lo, hi, common } => {
            let (cfg, body) = load_map_config(&config)?;
            let (lo, hi) = (lo.unwrap_or(0.05), hi.unwrap_or(0.95));
            let seed = common.seed.or(cfg.seed).unwrap_or(1);
            let samples = common.samples.or(cfg.pairs).unwrap_or(2000);
            echo_run(seed, samples, resolve_workers(common.workers));
            let cover = witness::cover_intervals(lo, hi)?;
            let family = scenario::subset_family(
                &body,
                cfg.n_points.unwrap_or(4),
                cfg.n_radii.unwrap_or(3),
                seed,
            )?;
            let plan = SamplePlan::new(samples, seed);
            let entries = scenario::sweep_family(&cfg.map, &family, &cover, &plan)?;
            let report = serde_json::json!({
                "note": "finite truncation of a countable family",
                "range": [lo, hi],
                "intervals": cover.intervals.len(),
                "entries": entries,
            });
            write_out(&common.out, &serde_json::to_string_pretty(&report)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn certify_and_report(sc: &Scenario, common: &CommonArgs) -> porosity::Result<ExitCode> {
    echo_run(sc.seed, sc.pairs, resolve_workers(common.workers));
    if let Some(t) = common.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(porosity::Error::Config(format!("tol {t} must be positive")));
        }
    }
    let report = scenario::run_scenario(sc)?;
    write_out(&common.out, &serde_json::to_string_pretty(&report)?)?;
    println!("overall: {}", if report.overall { "pass" } else { "FAIL" });
    Ok(if report.overall { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn demo_scenario() -> Scenario {
    serde_json::from_value(serde_json::json!({
        "space": {"dim": 2, "p": 2},
        "body": {"shape": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "map": {"kind": "scale_toward", "anchor": [0.0, 0.0], "factor": 0.801},
        "u": {"center": [0.0, 0.0], "radius": 0.5},
        "a": 0.8,
        "b": 0.801,
        "eps_frac": 0.5,
        "seed": 42,
        "pairs": 4000
    }))
    .expect("bundled demo scenario is valid")
}

/// CSV with a header row and one lexicographically ordered row per grid
/// point; byte-identical across reruns with the same inputs.
fn plotdata_csv(field: &LipField) -> porosity::Result<String> {
    if field.grid.is_empty() {
        return Err(porosity::Error::EmptySample("empty Lipschitz field".into()));
    }
    let dim = field.space.dim;
    let mut out = String::new();
    for i in 0..dim {
        out.push_str(&format!("x{i},"));
    }
    out.push_str("value\n");
    for (p, v) in field.grid.iter().zip(&field.values) {
        for c in p {
            out.push_str(&format!("{c},"));
        }
        out.push_str(&format!("{v}\n"));
    }
    Ok(out)
}
