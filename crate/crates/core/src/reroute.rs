//! Rerouting a fractional solution onto one fixed maximum matching `M`.
//!
//! The edge marginals are written as a convex combination of maximum
//! matchings. While some `M' ≠ M` carries weight, one alternating component
//! `P` of `M △ M'` is taken and, for every `M'`-edge of `P`, service mass of
//! its most loaded facility moves to the neighbouring `M`-edge (general mode)
//! or half to each neighbour (perfect mode). The weight moves from `M'` to
//! `M' △ P` by the same amount.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{FlmError, Result};
use crate::instance::FlmInstance;
use crate::lp::{check_lp_flm_feasible, FractionalFlm};
use crate::matching::{self, decompose_to_maximum_matchings, symmetric_difference_components, ComponentKind, Matching};

/// Service values at or below this count as zero.
pub const SUPPORT_TOL: f64 = 1e-9;
const GAMMA_DROP: f64 = 1e-12;
const PRECONDITION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RerouteMode {
    /// Moves mass along paths and cycles; opening doubles.
    General,
    /// Perfect matchings only; mass is split between both cycle neighbours
    /// and opening is unchanged.
    Perfect,
}

#[derive(Clone, Debug, Default)]
pub struct RerouteOptions {
    /// Re-check LP feasibility of `(x̃, 2y)` after every step.
    pub check_each_iteration: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RerouteStep {
    pub iteration: usize,
    pub epsilon: f64,
    pub component_size: usize,
    pub potential: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RerouteReport {
    pub mode: RerouteMode,
    pub output: FractionalFlm,
    pub iterations: usize,
    pub initial_potential: u64,
    pub final_potential: u64,
    /// Total service mass moved between edges.
    pub transfer_total: f64,
    pub trace: Vec<RerouteStep>,
}

impl RerouteReport {
    /// One JSON object per iteration.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for step in &self.trace {
            let _ = writeln!(s, "{}", serde_json::to_string(step).expect("plain struct serializes"));
        }
        s
    }
}

/// `Φ = (|E| + 1)·#{(i, e') : e' ∉ M, x̃_{i,e'} > 0} + Σ_{γ_{M'} > 0} |M' ∖ M|`.
pub fn potential(n_edges: usize, x_tilde: &[Vec<f64>], gamma: &BTreeMap<Matching, f64>, m: &[usize]) -> u64 {
    let mut in_m = vec![false; n_edges];
    m.iter().for_each(|&e| in_m[e] = true);
    let served =
        x_tilde.iter().flat_map(|row| row.iter().enumerate()).filter(|&(e, &v)| !in_m[e] && v > SUPPORT_TOL).count()
            as u64;
    let off: u64 =
        gamma.iter().filter(|(_, &c)| c > 0.0).map(|(mm, _)| mm.iter().filter(|&&e| !in_m[e]).count() as u64).sum();
    (n_edges as u64 + 1) * served + off
}

pub fn reroute_general(inst: &FlmInstance, frac: &FractionalFlm, m: &[usize]) -> Result<RerouteReport> {
    reroute(inst, frac, m, RerouteMode::General, &RerouteOptions::default())
}

pub fn reroute_perfect(inst: &FlmInstance, frac: &FractionalFlm, m: &[usize]) -> Result<RerouteReport> {
    reroute(inst, frac, m, RerouteMode::Perfect, &RerouteOptions::default())
}

pub fn reroute(
    inst: &FlmInstance,
    frac: &FractionalFlm,
    m: &[usize],
    mode: RerouteMode,
    opts: &RerouteOptions,
) -> Result<RerouteReport> {
    let g = inst.graph();
    let ne = inst.n_edges();
    let mut m: Matching = m.to_vec();
    m.sort_unstable();
    if !g.is_matching(&m) {
        return Err(FlmError::Precondition(format!("{m:?} is not a matching of the compatibility graph")));
    }
    let nu = matching::nu(&g);
    if m.len() != nu {
        return Err(FlmError::Precondition(format!("matching has {} edges but nu = {nu}", m.len())));
    }
    if mode == RerouteMode::Perfect && 2 * m.len() != g.n_vertices() {
        return Err(FlmError::Precondition("perfect rerouting needs a perfect matching".into()));
    }
    let bad = check_lp_flm_feasible(inst, frac, PRECONDITION_TOL);
    if !bad.is_empty() {
        return Err(FlmError::Precondition(format!("input is not LP feasible: {}", bad.join("; "))));
    }
    let y_out: Vec<f64> = match mode {
        RerouteMode::General => frac.y.iter().map(|v| 2.0 * v).collect(),
        RerouteMode::Perfect => frac.y.clone(),
    };

    let mut x: Vec<Vec<f64>> =
        frac.x.iter().map(|row| row.iter().map(|&v| if v < SUPPORT_TOL { 0.0 } else { v }).collect()).collect();
    let marg = edge_sums(&x, ne);
    let decomposition = decompose_to_maximum_matchings(&g, &marg)?;
    // align the service split with the reconstructed marginals
    let recon = decomposition.reconstruct(ne);
    for e in 0..ne {
        if marg[e] > 0.0 {
            let f = recon[e] / marg[e];
            x.iter_mut().for_each(|row| row[e] *= f);
        }
    }
    let mut gamma: BTreeMap<Matching, f64> = BTreeMap::new();
    for (mm, c) in decomposition.matchings.into_iter().zip(decomposition.coefficients) {
        *gamma.entry(mm).or_insert(0.0) += c;
    }

    let mut in_m = vec![false; ne];
    m.iter().for_each(|&e| in_m[e] = true);
    let initial_potential = potential(ne, &x, &gamma, &m);
    let mut phi = initial_potential;
    let mut trace = Vec::new();
    let mut transfer_total = 0.0;
    let mut iteration = 0usize;
    while let Some((mp, gamma_mp)) = gamma.iter().find(|(k, &c)| **k != m && c > 0.0).map(|(k, &c)| (k.clone(), c)) {
        iteration += 1;
        if iteration as u64 > initial_potential + 1 {
            return Err(FlmError::Invariant(format!("rerouting exceeded the initial potential {initial_potential}")));
        }
        let comps = symmetric_difference_components(&g, &m, &mp);
        let p = comps
            .into_iter()
            .next()
            .ok_or_else(|| FlmError::Invariant("distinct matchings without a component".into()))?;
        let dump = || format!("iteration {iteration}, M' = {mp:?}, component {:?}", p.edges);
        if p.edges.len() % 2 != 0 || in_m[p.edges[0]] {
            return Err(FlmError::Invariant(format!("component is not an even alternating walk: {}", dump())));
        }
        if mode == RerouteMode::Perfect && p.kind != ComponentKind::Cycle {
            return Err(FlmError::Invariant(format!("perfect matchings produced a path: {}", dump())));
        }
        let len = p.edges.len();
        // (M'-edge, chosen facility, receiving edges)
        let mut moves: Vec<(usize, usize, Vec<usize>)> = Vec::new();
        for pos in (0..len).step_by(2) {
            let ep = p.edges[pos];
            let i = (0..x.len())
                .fold(None, |best: Option<usize>, i| match best {
                    Some(b) if x[b][ep] >= x[i][ep] => Some(b),
                    _ => Some(i),
                })
                .expect("at least one facility");
            let targets = match mode {
                RerouteMode::General => vec![p.edges[(pos + 1) % len]],
                RerouteMode::Perfect => vec![p.edges[(pos + len - 1) % len], p.edges[(pos + 1) % len]],
            };
            moves.push((ep, i, targets));
        }
        let x_min = moves.iter().map(|&(ep, i, _)| x[i][ep]).fold(f64::INFINITY, f64::min);
        let epsilon = if x_min <= 0.0 {
            if gamma_mp >= SUPPORT_TOL {
                return Err(FlmError::Invariant(format!(
                    "weight {gamma_mp} on M' but an M'-edge has no service left: {}",
                    dump()
                )));
            }
            gamma_mp
        } else {
            gamma_mp.min(x_min)
        };
        if x_min > 0.0 {
            for (ep, i, targets) in &moves {
                let have = x[*i][*ep];
                let amount = if have - epsilon <= SUPPORT_TOL { have } else { epsilon };
                x[*i][*ep] -= amount;
                let share = amount / targets.len() as f64;
                for &t in targets {
                    x[*i][t] += share;
                }
                transfer_total += amount;
            }
        }
        let swapped: Matching = {
            let mut s: Vec<usize> = mp.iter().copied().filter(|e| !p.edges.contains(e)).collect();
            s.extend(p.edges.iter().copied().filter(|e| in_m[*e]));
            s.sort_unstable();
            s
        };
        let left = gamma_mp - epsilon;
        if left < GAMMA_DROP {
            gamma.remove(&mp);
        } else {
            gamma.insert(mp.clone(), left);
        }
        *gamma.entry(swapped).or_insert(0.0) += epsilon;
        gamma.retain(|_, c| *c >= GAMMA_DROP);

        let next_phi = potential(ne, &x, &gamma, &m);
        if next_phi >= phi {
            return Err(FlmError::Invariant(format!(
                "potential did not decrease ({phi} -> {next_phi}) with epsilon {epsilon}: {}",
                dump()
            )));
        }
        phi = next_phi;
        trace.push(RerouteStep { iteration, epsilon, component_size: len, potential: phi });
        // (x̃, 2y) stays feasible in every iteration of both modes; the tighter
        // flow bound of perfect mode only holds once everything sits on M
        if opts.check_each_iteration {
            let cur = FractionalFlm { x: x.clone(), y: frac.y.iter().map(|v| 2.0 * v).collect() };
            let bad = check_lp_flm_feasible(inst, &cur, PRECONDITION_TOL);
            if !bad.is_empty() {
                return Err(FlmError::Invariant(format!("infeasible after {}: {}", dump(), bad.join("; "))));
            }
        }
    }

    // float residue left off M after the weights are exhausted
    for row in x.iter_mut() {
        for (e, v) in row.iter_mut().enumerate() {
            if !in_m[e] && *v != 0.0 {
                if *v > SUPPORT_TOL {
                    return Err(FlmError::Invariant(format!("service {v} left on edge {e} outside M")));
                }
                *v = 0.0;
            }
        }
    }
    let final_potential = potential(ne, &x, &gamma, &m);
    let output = FractionalFlm { x, y: y_out };
    let bad = check_lp_flm_feasible(inst, &output, PRECONDITION_TOL);
    if !bad.is_empty() {
        return Err(FlmError::Invariant(format!("rerouted point is infeasible: {}", bad.join("; "))));
    }
    Ok(RerouteReport { mode, output, iterations: iteration, initial_potential, final_potential, transfer_total, trace })
}

fn edge_sums(x: &[Vec<f64>], ne: usize) -> Vec<f64> {
    let mut s = vec![0.0; ne];
    for row in x {
        for (e, &v) in row.iter().enumerate() {
            s[e] += v;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_fixture, Client, Facility, Fixture};
    use crate::lp::flm_costs;

    fn triangle_frac() -> FractionalFlm {
        FractionalFlm { x: vec![vec![1.0 / 3.0; 3]], y: vec![2.0 / 3.0] }
    }

    #[test]
    fn triangle_potential_is_ten() {
        let mut gamma = BTreeMap::new();
        for e in 0..3 {
            gamma.insert(vec![e], 1.0 / 3.0);
        }
        assert_eq!(potential(3, &triangle_frac().x, &gamma, &[0]), 10);
    }

    #[test]
    fn triangle_reroutes_onto_the_matched_edge() {
        let tri = build_fixture(Fixture::Triangle32);
        for e in 0..3 {
            let r = reroute(
                &tri,
                &triangle_frac(),
                &[e],
                RerouteMode::General,
                &RerouteOptions { check_each_iteration: true },
            )
            .unwrap();
            assert!((r.output.x[0][e] - 1.0).abs() < 1e-9);
            assert!((r.output.y[0] - 4.0 / 3.0).abs() < 1e-12);
            assert_eq!(r.final_potential, 0);
            assert!(r.trace.windows(2).all(|w| w[1].potential < w[0].potential));
            // the original opening is too small for the rerouted point
            let under = FractionalFlm { x: r.output.x.clone(), y: vec![2.0 / 3.0] };
            assert!(!check_lp_flm_feasible(&tri, &under, 1e-7).is_empty());
        }
    }

    #[test]
    fn supported_input_is_unchanged() {
        let tri = build_fixture(Fixture::Triangle32);
        let frac = FractionalFlm { x: vec![vec![1.0, 0.0, 0.0]], y: vec![1.0] };
        let r = reroute_general(&tri, &frac, &[0]).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.output.x, frac.x);
        assert_eq!(r.output.y, vec![2.0]);
    }

    #[test]
    fn four_cycle_perfect_split() {
        // clients 0..4 on a unit square around one free facility at the centre
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut d = vec![vec![0.0; 5]; 5];
        let pts: [(f64, f64); 5] = [(0.5, 0.5), (0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];
        for a in 0..5 {
            for b in 0..5 {
                d[a][b] = (pts[a].0 - pts[b].0).hypot(pts[a].1 - pts[b].1);
            }
        }
        assert!((d[0][1] - h).abs() < 1e-12);
        let inst = FlmInstance::new(
            vec![Facility { label: None, opening_cost: 0.0 }],
            vec![Client::default(); 4],
            d,
            vec![(0, 1), (1, 2), (2, 3), (0, 3)],
        )
        .unwrap();
        let frac = FractionalFlm { x: vec![vec![0.5; 4]], y: vec![1.0] };
        let r = reroute_perfect(&inst, &frac, &[0, 2]).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.output.x[0][0] - 1.0).abs() < 1e-12 && (r.output.x[0][2] - 1.0).abs() < 1e-12);
        assert_eq!(r.output.y, vec![1.0]);
        let (_, before) = flm_costs(&inst, &frac);
        let (_, after) = flm_costs(&inst, &r.output);
        let md: f64 = [0, 2].iter().map(|&e| inst.edge_length(e)).sum();
        assert!(after <= before + md + 1e-9);
        assert!((r.output.total_mass() - frac.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_maximum_target() {
        let gap = build_fixture(Fixture::Gap2Fac);
        let frac = crate::lp::solve_lp_flm(&gap).unwrap().frac;
        assert!(matches!(reroute_general(&gap, &frac, &[0]), Err(FlmError::Precondition(_))));
    }

    #[test]
    fn trace_is_jsonl() {
        let tri = build_fixture(Fixture::Triangle32);
        let r = reroute_general(&tri, &triangle_frac(), &[1]).unwrap();
        let text = r.trace_jsonl();
        assert_eq!(text.lines().count(), r.iterations);
        assert!(text.lines().all(|l| l.starts_with("{\"iteration\"")));
    }
}
