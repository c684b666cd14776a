//! Seeded benchmark sweep.
//!
//! Every (instance, mode, λ) run executes `seeds` rounding trials with seeds
//! `instance_seed + t` and emits one CSV row per trial. Instance `k` is
//! generated from `sweep_seed + k`, so rows do not depend on `--jobs`.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use flm::instance::{generate_euclidean, generate_euclidean_perfect, FlmInstance};
use flm::oracle::{exact_solve_with, gap_ratio, EXACT_FACILITY_CAP};
use flm::par::Parallelism;
use flm::pipeline::{solve, PipelineConfig, PipelineMode};
use flm::FlmError;

use crate::{CmdResult, Failure};

pub const HEADER: &str =
    "instance,mode,lambda,seed,nu,lp_value,cost,exact,ratio_lp,ratio_exact,cuts,reroute_iters,ms_lp,ms_round,status";

#[derive(Args)]
pub struct BenchArgs {
    /// Named parameter set; explicit flags override it.
    #[arg(long, value_parser = ["desk"])]
    preset: Option<String>,
    /// Comma-separated pipeline modes.
    #[arg(long, value_delimiter = ',')]
    modes: Vec<String>,
    /// Comma-separated λ values; omitted means each mode's default.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long)]
    nf: Option<usize>,
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    /// Number of generated instances.
    #[arg(long)]
    instances: Option<usize>,
    /// Rounding trials (rows) per instance and mode.
    #[arg(long)]
    seeds: Option<usize>,
    /// Plant a perfect matching so the perfect modes apply.
    #[arg(long)]
    planted: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 1 runs the sweep sequentially.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(short, long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct Sweep {
    modes: Vec<PipelineMode>,
    lambdas: Vec<Option<f64>>,
    nf: usize,
    nc: usize,
    p: f64,
    instances: usize,
    seeds: usize,
    planted: bool,
    seed: u64,
}

impl Sweep {
    fn from_args(a: &BenchArgs) -> Result<Self, Failure> {
        let desk = a.preset.as_deref() == Some("desk");
        let modes = if a.modes.is_empty() {
            if desk {
                vec![PipelineMode::General, PipelineMode::PerfectReroute, PipelineMode::PerfectDirect]
            } else {
                vec![PipelineMode::General]
            }
        } else {
            a.modes.iter().map(|m| m.parse()).collect::<flm::Result<_>>()?
        };
        let lambdas = if a.lambdas.is_empty() { vec![None] } else { a.lambdas.iter().map(|&l| Some(l)).collect() };
        Ok(Sweep {
            modes,
            lambdas,
            nf: a.nf.unwrap_or(4),
            nc: a.nc.unwrap_or(8),
            p: a.p.unwrap_or(0.4),
            instances: a.instances.unwrap_or(if desk { 60 } else { 10 }),
            seeds: a.seeds.unwrap_or(3),
            planted: a.planted || desk,
            seed: a.seed,
        })
    }
}

fn status_of(err: &FlmError) -> &'static str {
    match err {
        FlmError::Precondition(_) => "precondition",
        FlmError::Capability(_) => "capability",
        FlmError::Invariant(_) => "invariant",
        FlmError::Infeasible(_) | FlmError::Unbounded(_) => "lp",
        _ => "error",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn instance_rows(sweep: &Sweep, k: usize, par: Parallelism) -> String {
    let inst_seed = sweep.seed.wrapping_add(k as u64);
    let name = format!("euc-f{}-c{}-p{}-s{inst_seed}", sweep.nf, sweep.nc, sweep.p);
    let inst: flm::Result<FlmInstance> = if sweep.planted {
        generate_euclidean_perfect(sweep.nf, sweep.nc, sweep.p, 10.0, inst_seed)
    } else {
        generate_euclidean(sweep.nf, sweep.nc, sweep.p, 10.0, inst_seed)
    };
    let mut out = String::new();
    let inst = match inst {
        Ok(inst) => inst,
        Err(err) => {
            for mode in &sweep.modes {
                let _ = writeln!(out, "{name},{mode},,{inst_seed},,,,,,,,,,,{}", status_of(&err));
            }
            return out;
        }
    };
    let exact = if sweep.nf <= EXACT_FACILITY_CAP {
        exact_solve_with(&inst, EXACT_FACILITY_CAP, Parallelism::Sequential).ok().map(|r| r.optimum)
    } else {
        None
    };
    for &mode in &sweep.modes {
        for &lambda in &sweep.lambdas {
            let cfg = PipelineConfig {
                lambda,
                trials: sweep.seeds,
                parallelism: par,
                ..PipelineConfig::new(mode, inst_seed)
            };
            match solve(&inst, &cfg) {
                Ok(r) => {
                    let iters = r.reroute.as_ref().map_or(0, |rr| rr.iterations);
                    let ms_round = r.timings.ms_round / r.trials as f64;
                    for (t, &cost) in r.trial_costs.iter().enumerate() {
                        let ratio_exact = exact.map(|e| gap_ratio(cost, e));
                        let _ = writeln!(
                            out,
                            "{name},{},{},{},{},{},{cost},{},{},{},{},{iters},{:.3},{:.3},ok",
                            r.mode,
                            r.lambda,
                            flm::pipeline::trial_seed(inst_seed, t),
                            r.nu,
                            r.lp_value,
                            fmt_opt(exact),
                            gap_ratio(cost, r.lp_value),
                            fmt_opt(ratio_exact),
                            r.cuts,
                            r.timings.ms_lp,
                            ms_round,
                        );
                    }
                }
                Err(err) => {
                    log::warn!("{name} {mode}: {err}");
                    let _ = writeln!(
                        out,
                        "{name},{mode},{},{inst_seed},,,,{},,,,,,,{}",
                        fmt_opt(lambda),
                        fmt_opt(exact),
                        status_of(&err)
                    );
                }
            }
        }
    }
    out
}

fn run_sweep(sweep: &Sweep, par: Parallelism) -> String {
    let chunks = flm::par::map_range(sweep.instances, par, |k| instance_rows(sweep, k, par));
    let mut csv = String::from(HEADER);
    csv.push('\n');
    chunks.iter().for_each(|c| csv.push_str(c));
    csv
}

pub fn cmd_bench(a: BenchArgs, par: Parallelism) -> CmdResult {
    let sweep = Sweep::from_args(&a)?;
    log::info!("sweep {sweep:?}");
    let par = if a.jobs == 1 { Parallelism::Sequential } else { par };
    let csv = run_with_jobs(&sweep, par, a.jobs)?;
    match &a.output {
        Some(path) => std::fs::write(path, csv).map_err(FlmError::from)?,
        None => print!("{csv}"),
    }
    Ok(())
}

#[cfg(feature = "parallel")]
fn run_with_jobs(sweep: &Sweep, par: Parallelism, jobs: usize) -> Result<String, Failure> {
    if jobs <= 1 || !par.is_parallel() {
        return Ok(run_sweep(sweep, par));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure { code: 2, message: format!("thread pool: {e}") })?;
    Ok(pool.install(|| run_sweep(sweep, par)))
}

#[cfg(not(feature = "parallel"))]
fn run_with_jobs(sweep: &Sweep, par: Parallelism, _jobs: usize) -> Result<String, Failure> {
    Ok(run_sweep(sweep, par))
}
