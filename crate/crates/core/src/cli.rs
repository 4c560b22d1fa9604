//! The `icechain` command line.
//!
//! Exit codes: 0 on success, 1 when an input fails validation or a command
//! cannot be carried out, 2 on usage errors.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{check_instance, ChainState, Glauber};
use crate::configuration::Configuration;
use crate::constraint::{make_fstar, make_six_vertex, ConstraintFunction4, FunctionFile};
use crate::counting::estimate_z;
use crate::coupling::{coalescence_experiment, drift_all_pairs, mixing_bound, theoretical_beta};
use crate::decomposition::{decompose, CircuitGraph, Convention};
use crate::error::{Error, Result};
use crate::exactness::{self, Caps};
use crate::graph::{self, LabeledGraph};
use crate::rational::{self, Rational};
use crate::windability;

#[derive(Parser, Debug)]
#[command(name = "icechain", version, about = "Circuit Glauber dynamics for a six-vertex model")]
struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated instance.
    Gen(GenArgs),
    /// Decompose an instance into circuits.
    Decompose(DecomposeArgs),
    /// Run the chain and record states as JSON lines.
    Sample(SampleArgs),
    /// Exact oracles: TV curve and stationarity report.
    Exact(ExactArgs),
    /// Path-coupling drift, coalescence, or the mixing bound.
    Couple(CoupleArgs),
    /// Decide windability of a 4-ary function.
    Windable(WindableArgs),
    /// Estimate the partition function.
    EstimateZ(EstimateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    Theta,
    Fig2,
    Torus,
    Chain,
    Triangle,
    Random,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long, default_value_t = 2)]
    rows: usize,
    #[arg(long, default_value_t = 2)]
    cols: usize,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Vertex count for the random family.
    #[arg(long, default_value_t = 6)]
    vertices: usize,
    #[arg(long, env = "ICECHAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Instance {
    /// Instance file, or `-` for standard input.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = Convention::Intersection, value_parser = parse_convention)]
    convention: Convention,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_parser = parse_b)]
    b: Rational,
    /// Steps after burn-in.
    #[arg(long)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    burn_in: u64,
    /// Record every this many steps.
    #[arg(long, default_value_t = 1)]
    thinning: u64,
    #[arg(long, env = "ICECHAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExactArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_parser = parse_b)]
    b: Rational,
    #[arg(long, default_value_t = 500)]
    tmax: usize,
    /// Print state count, Z, residuals and the irreducibility verdict.
    #[arg(long)]
    report: bool,
    /// CSV destination for the TV curve.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CoupleMode {
    Drift,
    Coalesce,
    Bound,
}

#[derive(Args, Debug)]
struct CoupleArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_parser = parse_b)]
    b: Rational,
    #[arg(long, value_enum)]
    mode: CoupleMode,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 10_000_000)]
    max_steps: u64,
    #[arg(long, env = "ICECHAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FunctionKind {
    Fstar,
    SixVertex,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["function", "fn_file"])))]
struct WindableArgs {
    #[arg(long = "fn", value_enum)]
    function: Option<FunctionKind>,
    /// JSON function file.
    #[arg(long)]
    fn_file: Option<PathBuf>,
    /// `b` of f*, or the second six-vertex weight.
    #[arg(long, value_parser = parse_b)]
    b: Option<Rational>,
    #[arg(long, value_parser = parse_b)]
    a: Option<Rational>,
    #[arg(long, value_parser = parse_b)]
    c: Option<Rational>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    instance: Instance,
    #[arg(long, value_parser = parse_b)]
    b: Rational,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, env = "ICECHAIN_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_b(s: &str) -> std::result::Result<Rational, String> {
    rational::parse_nonnegative(s).map_err(|e| e.to_string())
}

fn parse_convention(s: &str) -> std::result::Result<Convention, String> {
    s.parse::<Convention>().map_err(|e| e.to_string())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    // only fails if a pool already exists, which is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Decompose(a) => {
            let g = load(&a.instance.input)?;
            let d = decompose(&g)?;
            emit(a.out.as_ref(), &json(&d.report(a.instance.convention))?)
        }
        Command::Sample(a) => sample(a),
        Command::Exact(a) => exact(a),
        Command::Couple(a) => couple(a),
        Command::Windable(a) => windable(a),
        Command::EstimateZ(a) => {
            let cg = sampler_graph(&a.instance)?;
            let est = estimate_z(&cg, &a.b, a.eps, a.confidence, a.seed)?;
            emit(a.out.as_ref(), &json(&est)?)
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn load(path: &PathBuf) -> Result<LabeledGraph> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        io::stdin().read_to_string(&mut text)?;
        LabeledGraph::from_json_str(&text)
    } else {
        LabeledGraph::load(path)
    }
}

/// Loads, decomposes and checks that the chain applies.
fn sampler_graph(inst: &Instance) -> Result<CircuitGraph> {
    let d = decompose(&load(&inst.input)?)?;
    check_instance(&d)?;
    Ok(d.circuit_graph(inst.convention))
}

fn gen(a: GenArgs) -> Result<()> {
    let g = match a.family {
        Family::Theta => graph::gen_theta(),
        Family::Fig2 => graph::gen_fig2(),
        Family::Torus => graph::gen_torus(a.rows, a.cols)?,
        Family::Chain => graph::gen_chain(a.k)?,
        Family::Triangle => graph::gen_triangle(),
        Family::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            graph::gen_random_coherent(a.vertices, &mut rng, 100_000).ok_or_else(|| {
                Error::InvalidArgument(format!("no coherent instance on {} vertices found", a.vertices))
            })?
        }
    };
    let mut text = g.to_json_string();
    text.push('\n');
    emit(a.out.as_ref(), &text)
}

fn sample(a: SampleArgs) -> Result<()> {
    let cg = sampler_graph(&a.instance)?;
    let model = Glauber::new(cg, a.b)?;
    let mut state = ChainState::new(Configuration::zeros(model.n()), a.seed);
    state.advance(&model, a.burn_in);
    let thinning = a.thinning.max(1);
    let mut text = String::new();
    let mut done = 0;
    while done + thinning <= a.steps {
        state.advance(&model, thinning);
        done += thinning;
        text.push_str(&format!("{{\"step\":{},\"sigma\":\"{}\"}}\n", state.step_count, state.sigma));
    }
    emit(a.out.as_ref(), &text)
}

fn exact(a: ExactArgs) -> Result<()> {
    let cg = sampler_graph(&a.instance)?;
    let caps = Caps::default();
    if a.report {
        let r = exactness::exact_report(&cg, &a.b, caps)?;
        println!("|Ω| = {}", r.states);
        println!("Z = {}", r.z);
        println!("detailed balance residual = {}", r.detailed_balance_residual);
        println!("stationarity residual = {}", r.stationarity_residual);
        println!("irreducible and aperiodic = {}", r.irreducible_aperiodic);
    }
    if a.out.is_some() || !a.report {
        let space = exactness::enumerate_omega(&cg, caps)?;
        let model = Glauber::new(cg.clone(), a.b.clone())?;
        let p = exactness::transition_matrix(&space, &model);
        let mu = exactness::exact_mu(&space, &cg, &a.b);
        let curve = exactness::tv_curve(&p, &mu, a.tmax);
        emit(a.out.as_ref(), &curve.to_csv())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BoundReport {
    n: usize,
    delta: u32,
    b: String,
    eps: f64,
    beta: Option<String>,
    tau: Option<f64>,
    outside_proven_region: Option<String>,
}

#[derive(Serialize)]
struct DriftSummary {
    pairs: usize,
    cases_hold: bool,
    bounds_checked: usize,
    bounds_hold: bool,
    max_total: String,
}

#[derive(Serialize)]
struct DriftOutput {
    summary: DriftSummary,
    reports: Vec<crate::coupling::DriftReport>,
}

fn couple(a: CoupleArgs) -> Result<()> {
    let cg = sampler_graph(&a.instance)?;
    let text = match a.mode {
        CoupleMode::Bound => {
            let (n, delta) = (cg.n(), cg.delta_max());
            let report = match (theoretical_beta(n, delta, &a.b), mixing_bound(n, delta, &a.b, a.eps)) {
                (Ok(beta), Ok(tau)) => BoundReport {
                    n,
                    delta,
                    b: rational::format(&a.b),
                    eps: a.eps,
                    beta: Some(rational::format(&beta)),
                    tau: Some(tau),
                    outside_proven_region: None,
                },
                (Err(e), _) | (_, Err(e)) => BoundReport {
                    n,
                    delta,
                    b: rational::format(&a.b),
                    eps: a.eps,
                    beta: None,
                    tau: None,
                    outside_proven_region: Some(e.to_string()),
                },
            };
            json(&report)?
        }
        CoupleMode::Drift => {
            let reports = drift_all_pairs(&cg, &a.b, Caps::default())?;
            let checked: Vec<bool> = reports.iter().filter_map(|r| r.bound_holds).collect();
            let summary = DriftSummary {
                pairs: reports.len(),
                cases_hold: reports.iter().all(|r| r.cases_hold),
                bounds_checked: checked.len(),
                bounds_hold: checked.iter().all(|&h| h),
                max_total: reports
                    .iter()
                    .map(|r| &r.total)
                    .max()
                    .map(rational::format)
                    .unwrap_or_else(|| "0".into()),
            };
            json(&DriftOutput { summary, reports })?
        }
        CoupleMode::Coalesce => {
            if cg.n() == 0 {
                return Err(Error::InvalidArgument("instance has no circuits".into()));
            }
            let model = Glauber::new(cg, a.b)?;
            json(&coalescence_experiment(&model, a.trials, a.seed, a.max_steps))?
        }
    };
    emit(a.out.as_ref(), &text)
}

fn windable(a: WindableArgs) -> Result<()> {
    let missing = |name: &str| Error::InvalidArgument(format!("--{name} is required"));
    let f: ConstraintFunction4 = match (a.function, &a.fn_file) {
        (Some(FunctionKind::Fstar), None) => make_fstar(a.b.as_ref().ok_or_else(|| missing("b"))?)?,
        (Some(FunctionKind::SixVertex), None) => make_six_vertex(
            a.a.as_ref().ok_or_else(|| missing("a"))?,
            a.b.as_ref().ok_or_else(|| missing("b"))?,
            a.c.as_ref().ok_or_else(|| missing("c"))?,
        )?,
        (None, Some(path)) => {
            let file: FunctionFile = serde_json::from_str(&fs::read_to_string(path)?)?;
            ConstraintFunction4::from_json(&file)?
        }
        _ => return Err(Error::InvalidArgument("give exactly one of --fn or --fn-file".into())),
    };
    emit(a.out.as_ref(), &json(&windability::report(&f))?)
}
