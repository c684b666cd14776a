//! Exhaustive solvers for small instances, used to certify everything else.

use serde::Serialize;

use crate::error::{FlmError, Result};
use crate::instance::{FlmInstance, FlmSolution};
use crate::lp::{solve_lp_flm_with, LpVariant};
use crate::matching::{self, Graph, Matching};
use crate::par::{self, Parallelism};

/// Default limit on the facility count of [`exact_solve`].
pub const EXACT_FACILITY_CAP: usize = 16;
/// Vertex limit of [`brute_force_matchings`].
pub const BRUTE_FORCE_VERTEX_CAP: usize = 12;

#[derive(Clone, Debug, Serialize)]
pub struct ExactResult {
    pub optimum: f64,
    pub optimal_solution: FlmSolution,
    pub facility_subsets_evaluated: usize,
}

/// Optimal FLM solution by enumerating facility subsets. For a fixed open
/// set `S`, the best matching is a min-cost maximum matching under
/// `d(S, e)`, with every pair sent to its nearest open facility.
pub fn exact_solve(inst: &FlmInstance) -> Result<ExactResult> {
    exact_solve_with(inst, EXACT_FACILITY_CAP, Parallelism::default())
}

pub fn exact_solve_with(inst: &FlmInstance, cap: usize, mode: Parallelism) -> Result<ExactResult> {
    let nf = inst.n_facilities();
    if nf > cap {
        return Err(FlmError::Capability(format!("exact solver enumerates at most {cap} facilities, got {nf}")));
    }
    let g = inst.graph();
    if matching::nu(&g) == 0 {
        return Ok(ExactResult {
            optimum: 0.0,
            optimal_solution: FlmSolution::from_edges(inst, Vec::new(), &[], Vec::new()),
            facility_subsets_evaluated: 1,
        });
    }
    if nf == 0 {
        return Err(FlmError::Precondition("pairs must be served but there are no facilities".into()));
    }
    let subsets = (1usize << nf) - 1;
    let evaluated = par::map_range(subsets, mode, |k| evaluate_subset(inst, &g, k + 1));
    let mut best: Option<(f64, usize)> = None;
    for (k, res) in evaluated.iter().enumerate() {
        let cost = res.as_ref().map_err(|e| FlmError::Invariant(e.to_string()))?.0;
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, k));
        }
    }
    let (optimum, k) = best.expect("at least one subset");
    let (_, m, open, assignment) = evaluated.into_iter().nth(k).expect("index in range")?;
    let optimal_solution = FlmSolution::from_edges(inst, open, &m, assignment);
    Ok(ExactResult { optimum, optimal_solution, facility_subsets_evaluated: subsets })
}

type SubsetValue = (f64, Matching, Vec<usize>, Vec<usize>);

fn evaluate_subset(inst: &FlmInstance, g: &Graph, mask: usize) -> Result<SubsetValue> {
    let open: Vec<usize> = (0..inst.n_facilities()).filter(|&i| mask >> i & 1 == 1).collect();
    let nearest: Vec<(f64, usize)> = (0..inst.n_edges()).map(|e| inst.edge_set_distance(&open, e)).collect();
    let cost: Vec<f64> = nearest.iter().map(|p| p.0).collect();
    let m = matching::min_cost_maximum_matching(g, &cost)?;
    let opening: f64 = open.iter().map(|&i| inst.opening_cost(i)).sum();
    let total = opening + matching::matching_cost(&m, &cost);
    let assignment = m.iter().map(|&e| nearest[e].1).collect();
    Ok((total, m, open, assignment))
}

/// Every matching of `g` (including the empty one).
pub fn all_matchings(g: &Graph) -> Result<Vec<Matching>> {
    if g.n_vertices() > BRUTE_FORCE_VERTEX_CAP {
        return Err(FlmError::Capability(format!(
            "matching enumeration is limited to {BRUTE_FORCE_VERTEX_CAP} vertices, got {}",
            g.n_vertices()
        )));
    }
    let mut out = Vec::new();
    let mut used = vec![false; g.n_vertices()];
    let mut cur = Vec::new();
    enumerate(g, 0, &mut used, &mut cur, &mut out);
    Ok(out)
}

fn enumerate(g: &Graph, v: usize, used: &mut [bool], cur: &mut Vec<usize>, out: &mut Vec<Matching>) {
    if v == g.n_vertices() {
        let mut m = cur.clone();
        m.sort_unstable();
        out.push(m);
        return;
    }
    if used[v] {
        enumerate(g, v + 1, used, cur, out);
        return;
    }
    enumerate(g, v + 1, used, cur, out);
    for &(w, e) in g.neighbors(v) {
        if w > v && !used[w] {
            used[v] = true;
            used[w] = true;
            cur.push(e);
            enumerate(g, v + 1, used, cur, out);
            cur.pop();
            used[v] = false;
            used[w] = false;
        }
    }
}

/// Every maximum matching of `g`.
pub fn brute_force_matchings(g: &Graph) -> Result<Vec<Matching>> {
    let all = all_matchings(g)?;
    let best = all.iter().map(Vec::len).max().unwrap_or(0);
    Ok(all.into_iter().filter(|m| m.len() == best).collect())
}

/// Exact optimum over LP optimum; 1 when both vanish.
pub fn integrality_gap(inst: &FlmInstance) -> Result<f64> {
    integrality_gap_with(inst, LpVariant::Full)
}

pub fn integrality_gap_with(inst: &FlmInstance, variant: LpVariant) -> Result<f64> {
    let exact = exact_solve(inst)?.optimum;
    let lp = solve_lp_flm_with(inst, variant)?.value;
    Ok(gap_ratio(exact, lp))
}

pub fn gap_ratio(exact: f64, lp: f64) -> f64 {
    const ZERO: f64 = 1e-12;
    match (exact.abs() <= ZERO, lp.abs() <= ZERO) {
        (true, true) => 1.0,
        (false, true) => f64::INFINITY,
        _ => exact / lp,
    }
}
