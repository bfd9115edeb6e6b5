//! `lpns`: verification suites, simulations, twin runs and criterion reports.
//!
//! Exit codes: 0 pass, 1 assertion failure, 2 usage or configuration error,
//! 3 numerical abort.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use lpns::besov::{self, BesovSpec, CriterionTriple, TripleMode};
use lpns::lp::Dyadic;
use lpns::monitor::{self, LosingParams, ReportParams};
use lpns::snapshot;
use lpns::solver::{self, InitialCondition, SolverConfig};
use lpns::suites::{self, Suite, SuiteOptions, SuiteReport};
use lpns::{Error, ProductRule};

use manifest::RunManifest;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "LPNS_OUT";

#[derive(Parser)]
#[command(name = "lpns", version, about = "Littlewood-Paley laboratory for Navier-Stokes on the torus")]
struct Cli {
    /// Cap on worker threads; only independent jobs run concurrently.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Output directory [default: $LPNS_OUT, else ./lpns-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run property suites with fixed seeds and print measured constants.
    Verify {
        /// all, lp, bony, bernstein, bkm or solver.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Grid size override.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Use collocation products without padding.
        #[arg(long, hide = true)]
        no_dealias: bool,
    },
    /// Integrate the Navier-Stokes equations and store the trajectory.
    Simulate {
        /// Flat key = value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `key=value` overrides applied after the file.
        overrides: Vec<String>,
    },
    /// Base run plus a run from perturbed data `u0 + delta ||u0|| p`.
    Twin {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        overrides: Vec<String>,
    },
    /// Criterion, Gronwall and losing-weight diagnostics for two stored runs.
    Report {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        /// `r,p,q`; exponents accept fractions and `inf`.
        #[arg(long, allow_hyphen_values = true)]
        triple: String,
        /// Loss index in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        s: f64,
        /// Comma-separated weight rates.
        #[arg(long, default_value = "1,2,4,8")]
        lambda: String,
    },
    /// Besov norm of a stored snapshot.
    Besov {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        s: f64,
        #[arg(long)]
        p: String,
        #[arg(long, default_value = "inf")]
        q: String,
    },
    /// Low/high frequency split of a stored snapshot.
    Split {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        p: String,
        /// Defaults to the value fixed by `2/q + 3/p = 1 + r`.
        #[arg(long)]
        q: Option<String>,
        #[arg(long, allow_negative_numbers = true)]
        r: f64,
    },
}

enum Failure {
    Assertion(String),
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Lib(Error::NumericalAbort { .. }) => 3,
            Failure::Lib(_) => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Assertion(m) => format!("assertion failed: {m}"),
            Failure::Usage(m) => format!("usage error: {m}"),
            Failure::Lib(e) => e.to_string(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn out_dir(cli: &Option<PathBuf>) -> PathBuf {
    cli.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lpns-out"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = out_dir(&cli.out);
    if cli.threads == 0 {
        eprintln!("usage error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("usage error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Verify { suite, n, seed, no_dealias } => verify(&out, &suite, n, seed, no_dealias),
        Command::Simulate { config, overrides } => simulate(&out, config.as_deref(), &overrides),
        Command::Twin { config, delta, seed, overrides } => {
            twin(&out, config.as_deref(), &overrides, delta, seed)
        }
        Command::Report { u, v, triple, s, lambda } => report(&out, &u, &v, &triple, s, &lambda),
        Command::Besov { snapshot, s, p, q } => besov_cmd(&out, &snapshot, s, &p, &q),
        Command::Split { snapshot, p, q, r } => split(&out, &snapshot, &p, q.as_deref(), r),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn verify(out: &Path, suite: &str, n: Option<usize>, seed: u64, no_dealias: bool) -> Outcome {
    let suites: Vec<Suite> = if suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![suite.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?]
    };
    let opts = SuiteOptions {
        n,
        seed,
        rule: if no_dealias { ProductRule::Aliased } else { ProductRule::ThreeHalves },
    };
    let mut manifest = RunManifest::new(out);
    manifest.seeds.push(seed);
    manifest.phase("suites");
    let reports: Vec<lpns::Result<SuiteReport>> =
        suites.par_iter().map(|s| suites::run_suite(*s, &opts)).collect();
    let mut first_failure = None;
    for report in reports {
        let report = report?;
        print!("{}", report.table());
        println!("  ({:.2} s)", report.seconds);
        if first_failure.is_none() {
            if let Some(c) = report.first_failure() {
                first_failure = Some(format!("[{}] {}", report.suite, c.line()));
            }
        }
        let json = serde_json::to_string_pretty(&report).map_err(Error::from)?;
        manifest.write_file(&format!("verify_{}.json", report.suite), json.as_bytes())?;
        for (name, contents) in &report.artifacts {
            manifest.write_file(name, contents.as_bytes())?;
        }
    }
    let path = manifest.finish()?;
    println!("manifest: {}", path.display());
    match first_failure {
        None => {
            println!("all assertions passed");
            Ok(())
        }
        Some(f) => Err(Failure::Assertion(f)),
    }
}

fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<SolverConfig, Failure> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", p.display())))?;
            SolverConfig::parse(&text)?
        }
        None => SolverConfig::default(),
    };
    for item in overrides {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("override `{item}` is not key=value")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_seeds(cfg: &SolverConfig) -> Vec<u64> {
    match cfg.initial {
        InitialCondition::RandomDivFree { seed, .. } => vec![seed],
        InitialCondition::TaylorGreen => vec![],
    }
}

fn save_run(manifest: &mut RunManifest, dir: &Path, traj: &solver::Trajectory) -> Outcome {
    for path in snapshot::save_trajectory(dir, traj)? {
        manifest.record(&path)?;
    }
    println!(
        "{}: {} snapshots to t = {}, energy balance residual {:.3e}, max |div u| {:.3e}",
        dir.display(),
        traj.len(),
        traj.times().last().copied().unwrap_or(0.0),
        traj.energy_balance_residual(),
        traj.max_divergence()
    );
    Ok(())
}

fn simulate(out: &Path, config: Option<&Path>, overrides: &[String]) -> Outcome {
    let cfg = load_config(config, overrides)?;
    let mut manifest = RunManifest::new(out);
    manifest.config = Some(cfg.to_text());
    manifest.seeds = config_seeds(&cfg);
    manifest.phase("solve");
    let traj = solver::run(&cfg)?;
    manifest.phase("write");
    save_run(&mut manifest, &out.join("trajectory"), &traj)?;
    println!("manifest: {}", manifest.finish()?.display());
    Ok(())
}

fn twin(out: &Path, config: Option<&Path>, overrides: &[String], delta: f64, seed: u64) -> Outcome {
    if !delta.is_finite() {
        return Err(Failure::Usage(format!("delta must be finite, got {delta}")));
    }
    let cfg = load_config(config, overrides)?;
    let mut manifest = RunManifest::new(out);
    manifest.config = Some(format!("{}delta = {delta}\n", cfg.to_text()));
    manifest.seeds = config_seeds(&cfg);
    manifest.seeds.push(seed);
    manifest.phase("solve");
    let (u, v) = solver::twin_run(&cfg, delta, seed)?;
    manifest.phase("write");
    save_run(&mut manifest, &out.join("u"), &u)?;
    save_run(&mut manifest, &out.join("v"), &v)?;
    println!("manifest: {}", manifest.finish()?.display());
    Ok(())
}

fn parse_list(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|t| besov::parse_exponent(t).map_err(|e| Failure::Usage(e.to_string())))
        .collect()
}

fn triple_mode(r: f64) -> TripleMode {
    if r > 0.0 {
        TripleMode::Strict
    } else {
        TripleMode::Losing
    }
}

fn parse_triple(text: &str) -> Result<CriterionTriple, Failure> {
    let parts = parse_list(text)?;
    let [r, p, q] = parts[..] else {
        return Err(Failure::Usage(format!("--triple expects r,p,q, got `{text}`")));
    };
    Ok(CriterionTriple::new(r, p, q, triple_mode(r))?)
}

fn report(out: &Path, u: &Path, v: &Path, triple: &str, s: f64, lambda: &str) -> Outcome {
    let triple = parse_triple(triple)?;
    let lambdas = parse_list(lambda)?;
    for &l in &lambdas {
        LosingParams::new(s, l)?;
    }
    let mut manifest = RunManifest::new(out);
    manifest.phase("load");
    let tu = snapshot::load_trajectory(u)?;
    let tv = snapshot::load_trajectory(v)?;
    let grid = tu.grid().ok_or_else(|| Error::Precondition("trajectory has no snapshots".into()))?;
    manifest.config = Some(tu.config.to_text());
    manifest.phase("report");
    let dy = Dyadic::with_default_cutoffs(grid);
    let params = ReportParams { triple, s, lambdas };
    let rep = monitor::build_report(&dy, &tu, &tv, &params)?;
    manifest.phase("write");
    for (name, contents) in &rep.files {
        manifest.write_file(name, contents.as_bytes())?;
    }
    println!("{}", serde_json::to_string_pretty(&rep.summary).map_err(Error::from)?);
    println!("manifest: {}", manifest.finish()?.display());
    Ok(())
}

#[derive(Serialize)]
struct BesovOutput {
    snapshot: String,
    time: f64,
    dim: usize,
    n: usize,
    s: f64,
    p: String,
    q: String,
    norm: f64,
    block_norms: Vec<f64>,
}

fn besov_cmd(out: &Path, path: &Path, s: f64, p: &str, q: &str) -> Outcome {
    let (pv, qv) = (
        besov::parse_exponent(p).map_err(|e| Failure::Usage(e.to_string()))?,
        besov::parse_exponent(q).map_err(|e| Failure::Usage(e.to_string()))?,
    );
    let spec = BesovSpec::new(s, pv, qv)?;
    let mut manifest = RunManifest::new(out);
    manifest.phase("besov");
    let (field, header) = snapshot::read_snapshot(path)?;
    let dy = Dyadic::with_default_cutoffs(field.grid());
    let blocks = besov::block_norms(&dy, &field, spec.p)?;
    let result = BesovOutput {
        snapshot: path.display().to_string(),
        time: header.time,
        dim: header.dim,
        n: header.n,
        s,
        p: lpns::lp::fmt_exponent(pv),
        q: lpns::lp::fmt_exponent(qv),
        norm: besov::besov_from_blocks(&blocks, spec.s, spec.q),
        block_norms: blocks,
    };
    let json = serde_json::to_string_pretty(&result).map_err(Error::from)? + "\n";
    print!("{json}");
    manifest.write_file("besov.json", json.as_bytes())?;
    println!("manifest: {}", manifest.finish()?.display());
    Ok(())
}

#[derive(Serialize)]
struct SplitOutput {
    snapshot: String,
    time: f64,
    #[serde(flatten)]
    summary: besov::SplitSummary,
    /// `floor(q/2 · log2(e + norm)) + 1` recomputed from the reported norm.
    formula_n: i32,
    j_max: i32,
}

fn split(out: &Path, path: &Path, p: &str, q: Option<&str>, r: f64) -> Outcome {
    let pv = besov::parse_exponent(p).map_err(|e| Failure::Usage(e.to_string()))?;
    let triple = match q {
        Some(q) => {
            let qv = besov::parse_exponent(q).map_err(|e| Failure::Usage(e.to_string()))?;
            CriterionTriple::new(r, pv, qv, triple_mode(r))?
        }
        None => CriterionTriple::from_r_p(r, pv, triple_mode(r))?,
    };
    let mut manifest = RunManifest::new(out);
    manifest.phase("split");
    let (field, header) = snapshot::read_snapshot(path)?;
    let dy = Dyadic::with_default_cutoffs(field.grid());
    let result = besov::split_low_high(&dy, &field, &triple, None)?;
    let summary = result.summary(&triple)?;
    let formula_n = (triple.q / 2.0 * (std::f64::consts::E + summary.norm).log2()).floor() as i32 + 1;
    let output = SplitOutput {
        snapshot: path.display().to_string(),
        time: header.time,
        summary,
        formula_n,
        j_max: dy.j_max(),
    };
    let json = serde_json::to_string_pretty(&output).map_err(Error::from)? + "\n";
    print!("{json}");
    manifest.write_file("split.json", json.as_bytes())?;
    println!("manifest: {}", manifest.finish()?.display());
    Ok(())
}
