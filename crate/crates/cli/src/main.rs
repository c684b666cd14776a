//! `flm`: generate instances, run the pipelines, verify solutions, sweep
//! benchmarks and measure integrality gaps.
//!
//! JSON goes to stdout and logs to stderr. Exit codes: 0 ok, 1 verification
//! failure, 2 precondition, 3 capability.

mod bench;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flm::instance::{check_solution, fixture, generate_euclidean, generate_euclidean_perfect, reduce_ufl_to_flm};
use flm::instance::{solution_cost, FlmInstance, FlmSolution};
use flm::lp::{build_lp_flm, flm_costs, solve_lp_flm_with, FractionalFlm, LpVariant};
use flm::oracle::{exact_solve_with, gap_ratio, EXACT_FACILITY_CAP};
use flm::par::Parallelism;
use flm::pipeline::{solve, PipelineConfig, PipelineMode};
use flm::rounding::{RoundingMode, UflInstance};
use flm::FlmError;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "flm", version, about = "Facility location with matching")]
struct Cli {
    /// Log level for stderr (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log: String,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance as JSON.
    Generate(GenerateArgs),
    /// Solve an instance and print the report.
    Solve(SolveArgs),
    /// Check a solution against an instance.
    Verify(VerifyArgs),
    /// Seeded sweep over generated instances, written as CSV.
    Bench(bench::BenchArgs),
    /// Exact optimum over LP value for one relaxation.
    Gap(GapArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Named fixture: gap-2fac, colocated-unit or triangle-3-2.
    #[arg(long, conflicts_with_all = ["euclidean", "from_ufl"])]
    fixture: Option<String>,
    /// Random points in a square with Euclidean distances.
    #[arg(long, conflicts_with = "from_ufl")]
    euclidean: bool,
    /// UFL instance JSON (`opening_costs`, `cost`) to reduce by doubling clients.
    #[arg(long, value_name = "FILE")]
    from_ufl: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    nf: usize,
    #[arg(long, default_value_t = 6)]
    nc: usize,
    /// Edge probability of the compatibility graph.
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side of the square the points are drawn from.
    #[arg(long = "box", default_value_t = 10.0)]
    box_size: f64,
    /// Plant a perfect matching in the compatibility graph.
    #[arg(long)]
    perfect: bool,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolveMode {
    General,
    PerfectReroute,
    PerfectDirect,
    Auto,
    LpOnly,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rounding {
    Randomized,
    Deterministic,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "auto")]
    mode: SolveMode,
    /// Scaling factor of the rounding; defaults to the best value for the mode.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Independent rounding trials; the cheapest is reported.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, value_enum, default_value = "randomized")]
    rounding: Rounding,
    /// Write the final relaxation in CPLEX LP format.
    #[arg(long, value_name = "FILE")]
    dump_lp: Option<PathBuf>,
    /// Write the rerouting trace as JSON lines.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    /// Facility limit of the exact solver.
    #[arg(long, default_value_t = EXACT_FACILITY_CAP)]
    exact_cap: usize,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    /// A solution, or a report holding one under `solution` or `optimal_solution`.
    solution: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Full,
    WeakOpening,
    DegreeOnly,
}

impl From<Variant> for LpVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Full => LpVariant::Full,
            Variant::WeakOpening => LpVariant::WeakOpening,
            Variant::DegreeOnly => LpVariant::DegreeOnly,
        }
    }
}

#[derive(Args)]
struct GapArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    variant: Variant,
}

/// Failure of a subcommand, carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<FlmError> for Failure {
    fn from(err: FlmError) -> Self {
        let code = match err {
            FlmError::Capability(_) => 3,
            FlmError::Feasibility(_) | FlmError::Invariant(_) => 1,
            _ => 2,
        };
        Failure { code, message: err.to_string() }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().parse_filters(&cli.log).target(env_logger::Target::Stderr).init();
    let par = if cli.sequential { Parallelism::Sequential } else { Parallelism::default() };
    let res = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a, par),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => bench::cmd_bench(a, par),
        Command::Gap(a) => cmd_gap(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(FlmError::from)?;
    println!("{text}");
    Ok(())
}

fn read_instance(path: &Path) -> Result<FlmInstance, Failure> {
    FlmInstance::read(path).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    let inst = if let Some(name) = &a.fixture {
        fixture(name)?
    } else if let Some(path) = &a.from_ufl {
        let text = std::fs::read_to_string(path).map_err(FlmError::from)?;
        let ufl: UflInstance = serde_json::from_str(&text).map_err(FlmError::from)?;
        let ufl = UflInstance::new((0..ufl.n_facilities()).map(|i| ufl.opening_cost(i)).collect(), {
            (0..ufl.n_facilities()).map(|i| (0..ufl.n_clients()).map(|j| ufl.cost(i, j)).collect()).collect()
        })?;
        reduce_ufl_to_flm(&ufl)
    } else if a.euclidean {
        if a.perfect {
            generate_euclidean_perfect(a.nf, a.nc, a.p, a.box_size, a.seed)?
        } else {
            generate_euclidean(a.nf, a.nc, a.p, a.box_size, a.seed)?
        }
    } else {
        return Err(Failure { code: 2, message: "choose one of --fixture, --euclidean or --from-ufl".into() });
    };
    log::info!("{} facilities, {} clients, {} edges", inst.n_facilities(), inst.n_clients(), inst.n_edges());
    match &a.output {
        Some(path) => inst.write(path)?,
        None => println!("{}", inst.to_json()),
    }
    Ok(())
}

#[derive(Serialize)]
struct LpReport {
    mode: &'static str,
    lp_value: f64,
    lp_open: f64,
    lp_conn: f64,
    cuts: usize,
    nu: usize,
    perfect: bool,
    history: Vec<f64>,
    cut_sets: Vec<Vec<usize>>,
    fractional: FractionalFlm,
}

fn cmd_solve(a: SolveArgs, par: Parallelism) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let problems = flm::instance::validate_instance(&inst);
    if !problems.is_empty() {
        return Err(Failure { code: 2, message: format!("invalid instance: {}", problems.join("; ")) });
    }
    if let Some(path) = &a.dump_lp {
        let lp = solve_lp_flm_with(&inst, LpVariant::Full)?;
        let (program, _) = build_lp_flm(&inst, LpVariant::Full, lp.perfect, lp.nu, &lp.cut_sets)?;
        std::fs::write(path, program.to_lp_format()).map_err(FlmError::from)?;
    }
    let mode = match a.mode {
        SolveMode::Exact => {
            let res = exact_solve_with(&inst, a.exact_cap, par)?;
            return print_json(&res);
        }
        SolveMode::LpOnly => {
            let lp = solve_lp_flm_with(&inst, LpVariant::Full)?;
            let (lp_open, lp_conn) = flm_costs(&inst, &lp.frac);
            return print_json(&LpReport {
                mode: "lp-only",
                lp_value: lp.value,
                lp_open,
                lp_conn,
                cuts: lp.cuts,
                nu: lp.nu,
                perfect: lp.perfect,
                history: lp.history,
                cut_sets: lp.cut_sets,
                fractional: lp.frac,
            });
        }
        SolveMode::General => PipelineMode::General,
        SolveMode::PerfectReroute => PipelineMode::PerfectReroute,
        SolveMode::PerfectDirect => PipelineMode::PerfectDirect,
        SolveMode::Auto => PipelineMode::Auto,
    };
    let cfg = PipelineConfig {
        mode,
        lambda: a.lambda,
        seed: a.seed,
        trials: a.trials,
        rounding: match a.rounding {
            Rounding::Randomized => RoundingMode::Randomized,
            Rounding::Deterministic => RoundingMode::DeterministicFallback,
        },
        parallelism: par,
    };
    let report = solve(&inst, &cfg)?;
    if let Some(path) = &a.trace {
        let text = report.reroute.as_ref().map(|r| r.trace_jsonl()).unwrap_or_default();
        std::fs::write(path, text).map_err(FlmError::from)?;
    }
    log::info!("{} cost {} vs LP {}", report.mode, report.cost, report.lp_value);
    print_json(&report)
}

#[derive(Serialize)]
struct VerifyReport {
    ok: bool,
    violations: Vec<String>,
    total: Option<f64>,
    opening: Option<f64>,
    connection: Option<f64>,
}

fn load_solution(path: &Path) -> Result<FlmSolution, Failure> {
    let text = std::fs::read_to_string(path).map_err(FlmError::from)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(FlmError::from)?;
    let inner = ["solution", "optimal_solution"].iter().find_map(|k| value.get(*k)).cloned().unwrap_or(value);
    serde_json::from_value(inner).map_err(|e| Failure { code: 2, message: format!("{}: {e}", path.display()) })
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let sol = load_solution(&a.solution)?;
    let mut violations: Vec<String> =
        flm::instance::validate_instance(&inst).into_iter().map(|p| format!("instance: {p}")).collect();
    violations.extend(check_solution(&inst, &sol));
    let cost = solution_cost(&inst, &sol).ok();
    let report = VerifyReport {
        ok: violations.is_empty(),
        total: cost.map(|c| c.total),
        opening: cost.map(|c| c.opening),
        connection: cost.map(|c| c.connection),
        violations,
    };
    print_json(&report)?;
    if report.ok {
        Ok(())
    } else {
        for v in &report.violations {
            eprintln!("violation: {v}");
        }
        Err(Failure { code: 1, message: String::new() })
    }
}

#[derive(Serialize)]
struct GapReport {
    variant: LpVariant,
    exact: f64,
    lp_value: f64,
    ratio: f64,
}

fn cmd_gap(a: GapArgs) -> CmdResult {
    let inst = read_instance(&a.instance)?;
    let exact = flm::oracle::exact_solve(&inst)?.optimum;
    let variant = LpVariant::from(a.variant);
    let lp_value = solve_lp_flm_with(&inst, variant)?.value;
    print_json(&GapReport { variant, exact, lp_value, ratio: gap_ratio(exact, lp_value) })
}
