//! End-to-end approximation pipelines.
//!
//! * `General` / `PerfectReroute`: solve the LP, fix a cheapest maximum
//!   (perfect) matching, reroute the LP point onto it, and round the
//!   resulting meta-client UFL instance.
//! * `PerfectDirect`: solve the LP, round its client-level projection to pick
//!   the open set `S`, then match with a min-cost perfect matching under
//!   `d(S, ·)`.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{FlmError, Result};
use crate::instance::{check_solution, validate_instance, FlmInstance, FlmSolution};
use crate::lp::{flm_costs, project_to_ufl, solve_lp_flm, FractionalFlm, LpFlmResult};
use crate::matching::{self, Matching};
use crate::par::{self, Parallelism};
use crate::reroute::{reroute, RerouteMode, RerouteOptions, RerouteReport};
use crate::rounding::{
    build_meta_client_ufl, client_level_ufl, round_with_mode, RoundingMode, UflFractional, UflInstance, UflSolution,
};

const CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    General,
    PerfectReroute,
    PerfectDirect,
    /// `PerfectDirect` on perfectly matchable graphs, `General` otherwise.
    Auto,
}

impl PipelineMode {
    pub fn name(self) -> &'static str {
        match self {
            PipelineMode::General => "general",
            PipelineMode::PerfectReroute => "perfect-reroute",
            PipelineMode::PerfectDirect => "perfect-direct",
            PipelineMode::Auto => "auto",
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PipelineMode {
    type Err = FlmError;

    fn from_str(s: &str) -> Result<Self> {
        [PipelineMode::General, PipelineMode::PerfectReroute, PipelineMode::PerfectDirect, PipelineMode::Auto]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FlmError::Precondition(format!("unknown pipeline mode {s:?}")))
    }
}

/// λ giving each mode its best guarantee.
pub fn default_lambda(mode: PipelineMode) -> f64 {
    match mode {
        PipelineMode::General | PipelineMode::Auto => 1.934,
        PipelineMode::PerfectReroute => 2.373,
        PipelineMode::PerfectDirect => 2.218,
    }
}

/// Approximation factor of `mode` at `lambda`:
/// general `max{2λ, 3(1 + 2/e^λ)}`, perfect-reroute `max{λ, 2(1 + 2/e^λ)}`,
/// perfect-direct `max{λ, 2 + 2/e^λ}`.
pub fn guarantee_bound(mode: PipelineMode, lambda: f64) -> f64 {
    let t = 2.0 * (-lambda).exp();
    match mode {
        PipelineMode::General | PipelineMode::Auto => (2.0 * lambda).max(3.0 * (1.0 + t)),
        PipelineMode::PerfectReroute => lambda.max(2.0 * (1.0 + t)),
        PipelineMode::PerfectDirect => lambda.max(2.0 + t),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    /// Defaults to [`default_lambda`] of the resolved mode.
    pub lambda: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    pub rounding: RoundingMode,
    #[serde(skip)]
    pub parallelism: Parallelism,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PipelineMode::Auto,
            lambda: None,
            seed: 0,
            trials: 1,
            rounding: RoundingMode::Randomized,
            parallelism: Parallelism::default(),
        }
    }
}

impl PipelineConfig {
    pub fn new(mode: PipelineMode, seed: u64) -> Self {
        Self { mode, seed, ..Self::default() }
    }
}

/// Seed of trial `t`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    seed.wrapping_add(t as u64)
}

/// Runtime checks of the deterministic inequalities the guarantees rest on.
/// Slacks are `right-hand side − left-hand side` and must be ≥ −tolerance.
#[derive(Clone, Debug, Default, Serialize)]
pub struct InequalityChecks {
    /// `conn(x*) − Σ_{e∈M*} d(e)`
    pub matching_vs_lp_connection: Option<f64>,
    /// Smallest `d(e) + d(S,j) + d(S,k) − d(S,e)` over edges and trials.
    pub set_distance_triangle: Option<f64>,
    pub set_distance_edges_checked: usize,
    /// Smallest `Σ_e d(S,e) x*_e − connection cost` over trials.
    pub assignment_vs_lp: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub ms_lp: f64,
    pub ms_reroute: f64,
    pub ms_round: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineReport {
    pub mode: PipelineMode,
    pub lambda: f64,
    pub seed: u64,
    pub trials: usize,
    pub solution: FlmSolution,
    pub cost: f64,
    pub lp_value: f64,
    pub lp_open: f64,
    pub lp_conn: f64,
    pub cuts: usize,
    pub nu: usize,
    pub guarantee_bound: f64,
    pub trial_costs: Vec<f64>,
    pub mean_cost: f64,
    pub std_error: f64,
    pub reroute: Option<RerouteReport>,
    pub checks: InequalityChecks,
    pub timings: Timings,
}

/// Resolves `Auto` against the instance.
pub fn resolve_mode(inst: &FlmInstance, mode: PipelineMode) -> PipelineMode {
    match mode {
        PipelineMode::Auto if matching::is_perfectly_matchable(&inst.graph()) && inst.n_edges() > 0 => {
            PipelineMode::PerfectDirect
        }
        PipelineMode::Auto => PipelineMode::General,
        m => m,
    }
}

/// Validates the instance and dispatches on the (resolved) mode.
pub fn solve(inst: &FlmInstance, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let problems = validate_instance(inst);
    if !problems.is_empty() {
        return Err(FlmError::Precondition(format!("invalid instance: {}", problems.join("; "))));
    }
    let mode = resolve_mode(inst, cfg.mode);
    let cfg = PipelineConfig { mode, ..cfg.clone() };
    match mode {
        PipelineMode::PerfectDirect => solve_flm_perfect(inst, &cfg),
        _ => solve_flm_main(inst, &cfg),
    }
}

struct Prepared {
    lambda: f64,
    lp: LpFlmResult,
    lp_open: f64,
    lp_conn: f64,
    ms_lp: f64,
}

fn prepare(inst: &FlmInstance, cfg: &PipelineConfig, mode: PipelineMode) -> Result<Prepared> {
    if cfg.trials == 0 {
        return Err(FlmError::Precondition("at least one trial is required".into()));
    }
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(mode));
    if !(lambda >= crate::rounding::MIN_LAMBDA) {
        return Err(FlmError::Precondition(format!("lambda = {lambda} is below {}", crate::rounding::MIN_LAMBDA)));
    }
    let start = Instant::now();
    let lp = solve_lp_flm(inst)?;
    let ms_lp = start.elapsed().as_secs_f64() * 1e3;
    let (lp_open, lp_conn) = flm_costs(inst, &lp.frac);
    Ok(Prepared { lambda, lp, lp_open, lp_conn, ms_lp })
}

/// Rerouting pipeline (`General` or `PerfectReroute`).
pub fn solve_flm_main(inst: &FlmInstance, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let mode = match cfg.mode {
        PipelineMode::Auto => PipelineMode::General,
        PipelineMode::PerfectDirect => {
            return Err(FlmError::Precondition("the rerouting pipeline runs general or perfect-reroute".into()))
        }
        m => m,
    };
    let g = inst.graph();
    if mode == PipelineMode::PerfectReroute && !matching::is_perfectly_matchable(&g) {
        return Err(FlmError::Precondition("perfect-reroute needs a perfectly matchable compatibility graph".into()));
    }
    let pre = prepare(inst, cfg, mode)?;
    if pre.lp.nu == 0 {
        return Ok(empty_report(inst, cfg, mode, pre));
    }
    let lengths: Vec<f64> = (0..inst.n_edges()).map(|e| inst.edge_length(e)).collect();
    let m_star: Matching = match mode {
        PipelineMode::PerfectReroute => matching::min_cost_perfect_matching(&g, &lengths)?,
        _ => matching::min_cost_maximum_matching(&g, &lengths)?,
    };
    let mut checks = InequalityChecks::default();
    let matched_length = matching::matching_cost(&m_star, &lengths);
    let slack = pre.lp_conn - matched_length;
    checks.matching_vs_lp_connection = Some(slack);
    if slack < -CHECK_TOL * (1.0 + pre.lp_conn) {
        return Err(FlmError::Invariant(format!(
            "cheapest maximum matching has length {matched_length} above the LP connection cost {}",
            pre.lp_conn
        )));
    }
    log::debug!("matching length {matched_length} vs LP connection {} (slack {slack})", pre.lp_conn);

    let start = Instant::now();
    let rmode = if mode == PipelineMode::PerfectReroute { RerouteMode::Perfect } else { RerouteMode::General };
    let rr = reroute(inst, &pre.lp.frac, &m_star, rmode, &RerouteOptions::default())?;
    let ms_reroute = start.elapsed().as_secs_f64() * 1e3;

    let ufl = build_meta_client_ufl(inst, &m_star);
    let frac = meta_client_fractional(&rr.output, &m_star)?;
    let start = Instant::now();
    let trials = run_trials(&ufl, &frac, pre.lambda, cfg)?;
    let ms_round = start.elapsed().as_secs_f64() * 1e3;

    let solutions: Vec<FlmSolution> = trials
        .iter()
        .map(|s| FlmSolution::from_edges(inst, s.open_set.clone(), &m_star, s.assignment.clone()))
        .collect();
    finish(inst, cfg, mode, pre, solutions, Some(rr), checks, ms_reroute, ms_round)
}

/// Direct pipeline for perfectly matchable graphs.
pub fn solve_flm_perfect(inst: &FlmInstance, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let mode = PipelineMode::PerfectDirect;
    let g = inst.graph();
    if !matching::is_perfectly_matchable(&g) {
        return Err(FlmError::Precondition("perfect-direct needs a perfectly matchable compatibility graph".into()));
    }
    let pre = prepare(inst, cfg, mode)?;
    if pre.lp.nu == 0 {
        return Ok(empty_report(inst, cfg, mode, pre));
    }
    let ufl = client_level_ufl(inst);
    let mut frac = project_to_ufl(inst, &pre.lp.frac)?;
    normalize_columns(&mut frac)?;
    let start = Instant::now();
    let trials = run_trials(&ufl, &frac, pre.lambda, cfg)?;
    let xe = pre.lp.frac.edge_marginals();

    let per_trial: Vec<Result<(FlmSolution, f64, f64)>> = par::map_slice(&trials, cfg.parallelism, |s| {
        let open = &s.open_set;
        let nearest: Vec<(f64, usize)> = (0..inst.n_edges()).map(|e| inst.edge_set_distance(open, e)).collect();
        let cost: Vec<f64> = nearest.iter().map(|p| p.0).collect();
        let m = matching::min_cost_perfect_matching(&g, &cost)?;
        let assignment = m.iter().map(|&e| nearest[e].1).collect();
        let sol = FlmSolution::from_edges(inst, open.clone(), &m, assignment);
        let mut tri = f64::INFINITY;
        for e in 0..inst.n_edges() {
            let (j, k) = inst.edge(e);
            let dj = open.iter().map(|&i| inst.facility_client(i, j)).fold(f64::INFINITY, f64::min);
            let dk = open.iter().map(|&i| inst.facility_client(i, k)).fold(f64::INFINITY, f64::min);
            tri = tri.min(inst.edge_length(e) + dj + dk - cost[e]);
        }
        let lp_side: f64 = cost.iter().zip(&xe).map(|(c, x)| c * x).sum();
        Ok((sol, tri, lp_side - matching::matching_cost(&m, &cost)))
    });
    let ms_round = start.elapsed().as_secs_f64() * 1e3;
    let mut checks = InequalityChecks::default();
    let mut solutions = Vec::with_capacity(per_trial.len());
    for r in per_trial {
        let (sol, tri, assign) = r?;
        if tri < -1e-9 {
            return Err(FlmError::Invariant(format!("set-distance triangle inequality fails by {}", -tri)));
        }
        if assign < -CHECK_TOL * (1.0 + sol.connection_cost_total) {
            return Err(FlmError::Invariant(format!("assignment cost exceeds the LP bound by {}", -assign)));
        }
        checks.set_distance_triangle = Some(checks.set_distance_triangle.map_or(tri, |t: f64| t.min(tri)));
        checks.assignment_vs_lp = Some(checks.assignment_vs_lp.map_or(assign, |t: f64| t.min(assign)));
        checks.set_distance_edges_checked += inst.n_edges();
        solutions.push(sol);
    }
    finish(inst, cfg, mode, pre, solutions, None, checks, 0.0, ms_round)
}

/// The rerouted point as a fractional solution of the meta-client instance;
/// columns are renormalized to remove float drift.
fn meta_client_fractional(out: &FractionalFlm, m: &[usize]) -> Result<UflFractional> {
    let mut frac =
        UflFractional { x: out.x.iter().map(|row| m.iter().map(|&e| row[e]).collect()).collect(), y: out.y.clone() };
    normalize_columns(&mut frac)?;
    Ok(frac)
}

fn normalize_columns(frac: &mut UflFractional) -> Result<()> {
    let nc = frac.x.first().map_or(0, Vec::len);
    for j in 0..nc {
        let s: f64 = frac.x.iter().map(|row| row[j]).sum();
        if (s - 1.0).abs() > CHECK_TOL {
            return Err(FlmError::Invariant(format!("client {j} carries assignment {s} instead of 1")));
        }
        frac.x.iter_mut().for_each(|row| row[j] /= s);
    }
    for (row, &y) in frac.x.iter_mut().zip(&frac.y) {
        for v in row.iter_mut() {
            *v = v.min(y).max(0.0);
        }
    }
    // clipping may take a hair of mass; put it back on the largest entry
    for j in 0..nc {
        let s: f64 = frac.x.iter().map(|row| row[j]).sum();
        if s != 1.0 {
            let i = (0..frac.x.len()).max_by(|&a, &b| frac.x[a][j].total_cmp(&frac.x[b][j])).expect("facility");
            frac.x[i][j] += 1.0 - s;
        }
    }
    Ok(())
}

fn run_trials(ufl: &UflInstance, frac: &UflFractional, lambda: f64, cfg: &PipelineConfig) -> Result<Vec<UflSolution>> {
    par::map_range(cfg.trials, cfg.parallelism, |t| {
        round_with_mode(ufl, frac, lambda, trial_seed(cfg.seed, t), cfg.rounding)
    })
    .into_iter()
    .collect()
}

fn empty_report(inst: &FlmInstance, cfg: &PipelineConfig, mode: PipelineMode, pre: Prepared) -> PipelineReport {
    let solution = FlmSolution::from_edges(inst, Vec::new(), &[], Vec::new());
    PipelineReport {
        mode,
        lambda: pre.lambda,
        seed: cfg.seed,
        trials: cfg.trials,
        solution,
        cost: 0.0,
        lp_value: pre.lp.value,
        lp_open: pre.lp_open,
        lp_conn: pre.lp_conn,
        cuts: pre.lp.cuts,
        nu: 0,
        guarantee_bound: guarantee_bound(mode, pre.lambda),
        trial_costs: vec![0.0; cfg.trials],
        mean_cost: 0.0,
        std_error: 0.0,
        reroute: None,
        checks: InequalityChecks::default(),
        timings: Timings { ms_lp: pre.ms_lp, ms_reroute: 0.0, ms_round: 0.0 },
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    inst: &FlmInstance,
    cfg: &PipelineConfig,
    mode: PipelineMode,
    pre: Prepared,
    solutions: Vec<FlmSolution>,
    reroute: Option<RerouteReport>,
    checks: InequalityChecks,
    ms_reroute: f64,
    ms_round: f64,
) -> Result<PipelineReport> {
    let costs: Vec<f64> = solutions.iter().map(FlmSolution::total_cost).collect();
    for (t, sol) in solutions.iter().enumerate() {
        let problems = check_solution(inst, sol);
        if !problems.is_empty() {
            return Err(FlmError::Invariant(format!(
                "trial {t} produced an infeasible solution: {}",
                problems.join("; ")
            )));
        }
        if costs[t] < pre.lp.value - CHECK_TOL * (1.0 + pre.lp.value) {
            return Err(FlmError::Invariant(format!(
                "trial {t} costs {} below the LP value {}",
                costs[t], pre.lp.value
            )));
        }
    }
    let (mean_cost, std_error) = mean_and_std_error(&costs);
    let best = (0..costs.len()).fold(0, |b, t| if costs[t] < costs[b] { t } else { b });
    let solution = solutions.into_iter().nth(best).expect("at least one trial");
    Ok(PipelineReport {
        mode,
        lambda: pre.lambda,
        seed: cfg.seed,
        trials: cfg.trials,
        cost: costs[best],
        solution,
        lp_value: pre.lp.value,
        lp_open: pre.lp_open,
        lp_conn: pre.lp_conn,
        cuts: pre.lp.cuts,
        nu: pre.lp.nu,
        guarantee_bound: guarantee_bound(mode, pre.lambda),
        trial_costs: costs,
        mean_cost,
        std_error,
        reroute,
        checks,
        timings: Timings { ms_lp: pre.ms_lp, ms_reroute, ms_round },
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_fixture, Fixture};

    #[test]
    fn default_lambdas_and_bounds() {
        assert_eq!(default_lambda(PipelineMode::General), 1.934);
        assert!((guarantee_bound(PipelineMode::General, 1.934) - 3.868).abs() < 1e-12);
        assert!((guarantee_bound(PipelineMode::PerfectReroute, 2.373) - 2.373).abs() < 1e-12);
        assert!((guarantee_bound(PipelineMode::PerfectDirect, 2.218) - 2.218).abs() < 1e-12);
    }

    #[test]
    fn fixtures_cost_what_they_should() {
        let gap = build_fixture(Fixture::Gap2Fac);
        let unit = build_fixture(Fixture::ColocatedUnit);
        for mode in [PipelineMode::General, PipelineMode::PerfectReroute, PipelineMode::PerfectDirect] {
            for seed in 0..5 {
                let r = solve(&gap, &PipelineConfig::new(mode, seed)).unwrap();
                assert!((r.cost - 10.0).abs() < 1e-9, "{mode} seed {seed}: {}", r.cost);
                let r = solve(&unit, &PipelineConfig::new(mode, seed)).unwrap();
                assert!((r.cost - 1.0).abs() < 1e-9, "{mode} seed {seed}: {}", r.cost);
            }
        }
    }

    #[test]
    fn auto_resolves_by_matchability() {
        let gap = build_fixture(Fixture::Gap2Fac);
        assert_eq!(solve(&gap, &PipelineConfig::default()).unwrap().mode, PipelineMode::PerfectDirect);
        let tri = build_fixture(Fixture::Triangle32);
        assert_eq!(solve(&tri, &PipelineConfig::default()).unwrap().mode, PipelineMode::General);
        assert!(solve(&tri, &PipelineConfig::new(PipelineMode::PerfectDirect, 0)).is_err());
    }

    #[test]
    fn trials_report_best_and_mean() {
        let inst = crate::instance::generate_euclidean(3, 6, 0.6, 10.0, 5).unwrap();
        let cfg = PipelineConfig { trials: 8, ..PipelineConfig::new(PipelineMode::General, 1) };
        let r = solve(&inst, &cfg).unwrap();
        assert_eq!(r.trial_costs.len(), 8);
        assert!(r.cost <= r.mean_cost + 1e-12);
        let seq = solve(&inst, &PipelineConfig { parallelism: Parallelism::Sequential, ..cfg }).unwrap();
        assert_eq!(seq.trial_costs, r.trial_costs);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"guarantee_bound\""));
    }

    #[test]
    fn mean_and_error() {
        let (m, s) = mean_and_std_error(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
