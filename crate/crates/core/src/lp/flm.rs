use serde::{Deserialize, Serialize};

use super::{solve_lp, LinearProgram, Relation};
use crate::error::{FlmError, Result};
use crate::instance::FlmInstance;
use crate::matching::{self, separate_odd_set, Graph, OddSetCut, SeparationMode};
use crate::rounding::UflFractional;

const MAX_CUT_ROUNDS: usize = 2000;
const EXHAUSTIVE_CHECK_CAP: usize = 14;

/// A fractional FLM solution: `x[i][e]` and `y[i]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalFlm {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl FractionalFlm {
    pub fn zeros(n_facilities: usize, n_edges: usize) -> Self {
        Self { x: vec![vec![0.0; n_edges]; n_facilities], y: vec![0.0; n_facilities] }
    }

    /// Embeds an integral solution: `x[σ(e)][e] = 1` on `M`, `y = 1` on `S`.
    pub fn from_integral(inst: &FlmInstance, open: &[usize], matching: &[usize], assignment: &[usize]) -> Self {
        let mut f = Self::zeros(inst.n_facilities(), inst.n_edges());
        for &i in open {
            f.y[i] = 1.0;
        }
        for (&e, &i) in matching.iter().zip(assignment) {
            f.x[i][e] = 1.0;
        }
        f
    }

    pub fn n_edges(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Edge marginals `x_e = Σ_i x_{i,e}`.
    pub fn edge_marginals(&self) -> Vec<f64> {
        let mut xe = vec![0.0; self.n_edges()];
        for row in &self.x {
            for (e, &v) in row.iter().enumerate() {
                xe[e] += v;
            }
        }
        xe
    }

    /// `x_{i,j} = Σ_{e∈δ(j)} x_{i,e}`.
    pub fn client_flow(&self, inst: &FlmInstance, i: usize, j: usize) -> f64 {
        inst.edges().iter().enumerate().filter(|(_, &(a, b))| a == j || b == j).map(|(e, _)| self.x[i][e]).sum()
    }

    /// Σ_{i,e} x_{i,e}
    pub fn total_mass(&self) -> f64 {
        self.x.iter().flatten().sum()
    }

    pub fn scaled_y(&self, factor: f64) -> Self {
        Self { x: self.x.clone(), y: self.y.iter().map(|v| v * factor).collect() }
    }
}

/// Which relaxation to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpVariant {
    /// Matching-polytope constraints plus the per-client flow constraints.
    Full,
    /// `x_{i,e} ≤ y_i` per edge instead of the per-client flow constraints.
    WeakOpening,
    /// Full flow constraints and degree constraints but no odd-set cuts.
    DegreeOnly,
}

/// Variable indices of an LP built by [`build_lp_flm`].
#[derive(Clone, Debug)]
pub struct LpLayout {
    pub x: Vec<Vec<usize>>,
    pub y: Vec<usize>,
    pub xe: Vec<usize>,
    pub perfect: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LpFlmResult {
    pub frac: FractionalFlm,
    pub value: f64,
    pub cuts: usize,
    /// LP value after each solve, first entry without cuts.
    pub history: Vec<f64>,
    pub cut_sets: Vec<Vec<usize>>,
    pub perfect: bool,
    pub nu: usize,
}

/// Builds the relaxation with the given odd-set cuts. Variables are named
/// `x_i_e`, `y_i` and `xe_e`. With `perfect`, degree constraints are
/// equalities and cuts take the form `x(δ(U)) ≥ 1`; otherwise degrees are
/// at most one, `Σ x_e = ν` and cuts bound `x(E[U])` by `(|U| − 1) / 2`.
pub fn build_lp_flm(
    inst: &FlmInstance,
    variant: LpVariant,
    perfect: bool,
    nu: usize,
    cuts: &[Vec<usize>],
) -> Result<(LinearProgram, LpLayout)> {
    let (nf, ne, nv) = (inst.n_facilities(), inst.n_edges(), inst.n_clients());
    let mut lp = LinearProgram::new();
    let x: Vec<Vec<usize>> = (0..nf)
        .map(|i| (0..ne).map(|e| lp.add_variable(format!("x_{i}_{e}"), inst.edge_pair_distance(i, e))).collect())
        .collect();
    let y: Vec<usize> = (0..nf).map(|i| lp.add_variable(format!("y_{i}"), inst.opening_cost(i))).collect();
    let xe: Vec<usize> = (0..ne).map(|e| lp.add_variable(format!("xe_{e}"), 0.0)).collect();

    for e in 0..ne {
        let mut terms = vec![(xe[e], 1.0)];
        terms.extend((0..nf).map(|i| (x[i][e], -1.0)));
        lp.add_constraint(format!("link_{e}"), terms, Relation::Eq, 0.0)?;
    }
    let g = inst.graph();
    for v in 0..nv {
        let terms: Vec<(usize, f64)> = g.neighbors(v).iter().map(|&(_, e)| (xe[e], 1.0)).collect();
        if terms.is_empty() {
            continue;
        }
        let rel = if perfect { Relation::Eq } else { Relation::Le };
        lp.add_constraint(format!("deg_{v}"), terms, rel, 1.0)?;
    }
    if !perfect {
        lp.add_constraint("size", xe.iter().map(|&v| (v, 1.0)).collect(), Relation::Eq, nu as f64)?;
    }
    match variant {
        LpVariant::Full | LpVariant::DegreeOnly => {
            for i in 0..nf {
                for v in 0..nv {
                    let mut terms: Vec<(usize, f64)> = g.neighbors(v).iter().map(|&(_, e)| (x[i][e], 1.0)).collect();
                    if terms.is_empty() {
                        continue;
                    }
                    terms.push((y[i], -1.0));
                    lp.add_constraint(format!("flow_{i}_{v}"), terms, Relation::Le, 0.0)?;
                }
            }
        }
        LpVariant::WeakOpening => {
            for i in 0..nf {
                for e in 0..ne {
                    lp.add_constraint(format!("open_{i}_{e}"), vec![(x[i][e], 1.0), (y[i], -1.0)], Relation::Le, 0.0)?;
                }
            }
        }
    }
    for (k, set) in cuts.iter().enumerate() {
        let mut member = vec![false; nv];
        set.iter().for_each(|&v| member[v] = true);
        if perfect {
            let terms = (0..ne).filter(|&e| member[g.edge(e).0] != member[g.edge(e).1]).map(|e| (xe[e], 1.0)).collect();
            lp.add_constraint(format!("cut_{k}"), terms, Relation::Ge, 1.0)?;
        } else {
            let terms = (0..ne).filter(|&e| member[g.edge(e).0] && member[g.edge(e).1]).map(|e| (xe[e], 1.0)).collect();
            lp.add_constraint(format!("cut_{k}"), terms, Relation::Le, ((set.len() - 1) / 2) as f64)?;
        }
    }
    Ok((lp, LpLayout { x, y, xe, perfect }))
}

/// Solves the full relaxation by cutting planes.
pub fn solve_lp_flm(inst: &FlmInstance) -> Result<LpFlmResult> {
    solve_lp_flm_with(inst, LpVariant::Full)
}

/// Cutting-plane loop: solve, separate the edge marginals, add the single
/// most violated odd-set constraint, re-solve, until nothing is violated.
/// Perfectly matchable graphs use the perfect-matching form of the polytope.
pub fn solve_lp_flm_with(inst: &FlmInstance, variant: LpVariant) -> Result<LpFlmResult> {
    let g = inst.graph();
    let nu = matching::nu(&g);
    let perfect = 2 * nu == g.n_vertices() && nu > 0;
    if nu == 0 {
        return Ok(LpFlmResult {
            frac: FractionalFlm::zeros(inst.n_facilities(), inst.n_edges()),
            value: 0.0,
            cuts: 0,
            history: vec![0.0],
            cut_sets: Vec::new(),
            perfect: false,
            nu,
        });
    }
    let mode = if perfect { SeparationMode::Perfect } else { SeparationMode::General };
    let mut cuts: Vec<Vec<usize>> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..MAX_CUT_ROUNDS {
        let (lp, layout) = build_lp_flm(inst, variant, perfect, nu, &cuts)?;
        let sol = solve_lp(&lp)?;
        let value = sol.objective;
        if let Some(&prev) = history.last() {
            if value < prev - 1e-6 * (1.0 + f64::abs(prev)) {
                return Err(FlmError::Invariant(format!("LP value dropped from {prev} to {value} after a cut")));
            }
        }
        history.push(value);
        let frac = FractionalFlm {
            x: layout.x.iter().map(|row| row.iter().map(|&v| sol.values[v]).collect()).collect(),
            y: layout.y.iter().map(|&v| sol.values[v]).collect(),
        };
        let xe: Vec<f64> = layout.xe.iter().map(|&v| sol.values[v]).collect();
        let cut = if variant == LpVariant::DegreeOnly { None } else { separate_odd_set(&g, &xe, mode)? };
        match cut {
            Some(OddSetCut { vertices, .. }) => {
                log::debug!("round {}: adding odd-set cut on {vertices:?} at value {value}", history.len());
                if cuts.contains(&vertices) {
                    return Err(FlmError::Invariant(format!("cut on {vertices:?} is violated after being added")));
                }
                cuts.push(vertices);
            }
            None => {
                return Ok(LpFlmResult { frac, value, cuts: cuts.len(), history, cut_sets: cuts, perfect, nu });
            }
        }
    }
    Err(FlmError::Invariant(format!("cutting-plane loop exceeded {MAX_CUT_ROUNDS} rounds")))
}

/// `(open(y), conn(x))` with `conn(x) = Σ_{i,e} d(i,e) x_{i,e}`.
pub fn flm_costs(inst: &FlmInstance, frac: &FractionalFlm) -> (f64, f64) {
    let open = frac.y.iter().enumerate().map(|(i, &y)| inst.opening_cost(i) * y).sum();
    let mut conn = 0.0;
    for (i, row) in frac.x.iter().enumerate() {
        for (e, &v) in row.iter().enumerate() {
            conn += inst.edge_pair_distance(i, e) * v;
        }
    }
    (open, conn)
}

/// Client-level projection `x_{i,j} = Σ_{e∈δ(j)} x_{i,e}`, `y` unchanged.
pub fn project_to_ufl(inst: &FlmInstance, frac: &FractionalFlm) -> Result<UflFractional> {
    if !matching::is_perfectly_matchable(&inst.graph()) {
        return Err(FlmError::Precondition("projection needs a perfectly matchable compatibility graph".into()));
    }
    let (nf, nc) = (inst.n_facilities(), inst.n_clients());
    let mut x = vec![vec![0.0; nc]; nf];
    for (i, row) in frac.x.iter().enumerate() {
        for (e, &v) in row.iter().enumerate() {
            let (j, k) = inst.edge(e);
            x[i][j] += v;
            x[i][k] += v;
        }
    }
    Ok(UflFractional { x, y: frac.y.clone() })
}

/// Every constraint of the relaxation violated by more than `tol`: shapes,
/// nonnegativity, flow, degree, size and odd-set constraints.
pub fn check_lp_flm_feasible(inst: &FlmInstance, frac: &FractionalFlm, tol: f64) -> Vec<String> {
    let (nf, ne, nv) = (inst.n_facilities(), inst.n_edges(), inst.n_clients());
    let mut out = Vec::new();
    if frac.y.len() != nf || frac.x.len() != nf || frac.x.iter().any(|r| r.len() != ne) {
        out.push(format!("shape mismatch: expected {nf} facilities x {ne} edges"));
        return out;
    }
    for i in 0..nf {
        if frac.y[i] < -tol {
            out.push(format!("nonnegativity: y_{i} = {}", frac.y[i]));
        }
        for e in 0..ne {
            if frac.x[i][e] < -tol {
                out.push(format!("nonnegativity: x_{i}_{e} = {}", frac.x[i][e]));
            }
        }
    }
    let g: Graph = inst.graph();
    for i in 0..nf {
        for v in 0..nv {
            let flow: f64 = g.neighbors(v).iter().map(|&(_, e)| frac.x[i][e]).sum();
            if flow > frac.y[i] + tol {
                out.push(format!("flow: facility {i} client {v}: {flow} > y = {}", frac.y[i]));
            }
        }
    }
    let xe = frac.edge_marginals();
    for (v, d) in g.degree_sums(&xe).into_iter().enumerate() {
        if d > 1.0 + tol {
            out.push(format!("degree: client {v} has {d} > 1"));
        }
    }
    let nu = matching::nu(&g) as f64;
    let size: f64 = xe.iter().sum();
    if (size - nu).abs() > tol {
        out.push(format!("size: sum of x_e is {size}, nu is {nu}"));
    }
    if nv <= EXHAUSTIVE_CHECK_CAP {
        let full = (1usize << nv) - 1;
        for mask in 1..=full {
            let k = mask.count_ones() as usize;
            if k < 3 || k.is_multiple_of(2) {
                continue;
            }
            let set: Vec<usize> = (0..nv).filter(|&v| mask >> v & 1 == 1).collect();
            let (inside, _) = matching::odd_set_sums(&g, &xe, &set);
            if inside > (k - 1) as f64 / 2.0 + tol {
                out.push(format!("odd set {set:?}: {inside} > {}", (k - 1) / 2));
            }
        }
    } else {
        match separate_odd_set(&g, &xe, SeparationMode::General) {
            Ok(Some(cut)) => {
                out.push(format!("odd set {:?}: {} > {}", cut.vertices, cut.inside, (cut.vertices.len() - 1) / 2))
            }
            Ok(None) => {}
            Err(err) => out.push(format!("odd-set constraints not checked: {err}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_fixture, Fixture};

    #[test]
    fn fixture_values() {
        let gap = build_fixture(Fixture::Gap2Fac);
        let r = solve_lp_flm(&gap).unwrap();
        assert!((r.value - 10.0).abs() < 1e-6, "{}", r.value);
        assert!(r.perfect);
        assert!(check_lp_flm_feasible(&gap, &r.frac, 1e-7).is_empty());
        let (open, conn) = flm_costs(&gap, &r.frac);
        assert!(open.abs() < 1e-9 && (conn - 10.0).abs() < 1e-6);

        let unit = build_fixture(Fixture::ColocatedUnit);
        assert!((solve_lp_flm(&unit).unwrap().value - 1.0).abs() < 1e-6);
        let weak = solve_lp_flm_with(&unit, LpVariant::WeakOpening).unwrap();
        assert!((weak.value - 1.0 / 3.0).abs() < 1e-6, "{}", weak.value);
        let degree_only = solve_lp_flm_with(&gap, LpVariant::DegreeOnly).unwrap();
        assert!(degree_only.value.abs() < 1e-6);
    }

    #[test]
    fn history_is_monotone() {
        let gap = build_fixture(Fixture::Gap2Fac);
        let r = solve_lp_flm(&gap).unwrap();
        assert!(r.cuts >= 1);
        assert!(r.history.windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn triangle_thirds_are_feasible_only_with_enough_opening() {
        let tri = build_fixture(Fixture::Triangle32);
        let frac = FractionalFlm { x: vec![vec![1.0 / 3.0; 3]], y: vec![2.0 / 3.0] };
        assert!(check_lp_flm_feasible(&tri, &frac, 1e-7).is_empty());
        let low = FractionalFlm { x: frac.x.clone(), y: vec![0.5] };
        let v = check_lp_flm_feasible(&tri, &low, 1e-7);
        assert_eq!(v.iter().filter(|s| s.starts_with("flow")).count(), 3);
    }

    #[test]
    fn projection_preserves_connection_cost() {
        let gap = build_fixture(Fixture::Gap2Fac);
        let r = solve_lp_flm(&gap).unwrap();
        let ufl = crate::rounding::client_level_ufl(&gap);
        let proj = project_to_ufl(&gap, &r.frac).unwrap();
        assert!(proj.violations(&ufl, 1e-7).is_empty());
        assert!((proj.connection_cost(&ufl) - flm_costs(&gap, &r.frac).1).abs() < 1e-7);
        let tri = build_fixture(Fixture::Triangle32);
        assert!(project_to_ufl(&tri, &FractionalFlm::zeros(1, 3)).is_err());
    }

    #[test]
    fn empty_graph_has_zero_value() {
        let inst = crate::instance::generate_euclidean(2, 4, 0.0, 10.0, 1).unwrap();
        let r = solve_lp_flm(&inst).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn lp_dump_uses_documented_names() {
        let unit = build_fixture(Fixture::ColocatedUnit);
        let (lp, _) = build_lp_flm(&unit, LpVariant::Full, true, 2, &[]).unwrap();
        let text = lp.to_lp_format();
        assert!(text.contains("x_0_0") && text.contains("y_0") && text.contains("xe_5"));
    }
}
