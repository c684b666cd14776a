use serde::Serialize;

use super::Graph;
use crate::error::{FlmError, Result};

/// Largest vertex count handled by exhaustive odd-set enumeration.
pub const EXHAUSTIVE_ODD_SET_CAP: usize = 22;

/// Blossom constraints are reported only when violated by more than this.
pub const SEPARATION_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SeparationMode {
    /// `z(E[U]) ≤ (|U| − 1) / 2`
    General,
    /// `z(δ(U)) ≥ 1`, for points with degree equalities
    Perfect,
}

/// A violated odd-set constraint.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OddSetCut {
    pub vertices: Vec<usize>,
    /// z(E[U])
    pub inside: f64,
    /// z(δ(U))
    pub cut: f64,
    pub violation: f64,
}

/// `(z(E[U]), z(δ(U)))` for a vertex set `U`.
pub fn odd_set_sums(g: &Graph, z: &[f64], set: &[usize]) -> (f64, f64) {
    let mut member = vec![false; g.n_vertices()];
    set.iter().for_each(|&v| member[v] = true);
    let mut inside = 0.0;
    let mut cut = 0.0;
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        match (member[u], member[v]) {
            (true, true) => inside += z[e],
            (true, false) | (false, true) => cut += z[e],
            _ => {}
        }
    }
    (inside, cut)
}

/// `z(E[U])` and `Σ_{v∈U} z(δ(v))` for every vertex bitmask `U`, each built
/// from the entry for `U` without its lowest vertex.
pub(crate) fn subset_sums(g: &Graph, z: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let deg = g.degree_sums(z);
    let size = 1usize << g.n_vertices();
    let mut inside = vec![0.0f64; size];
    let mut degsum = vec![0.0f64; size];
    for mask in 1..size {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let mut add = 0.0;
        for &(w, e) in g.neighbors(v) {
            if rest >> w & 1 == 1 {
                add += z[e];
            }
        }
        inside[mask] = inside[rest] + add;
        degsum[mask] = degsum[rest] + deg[v];
    }
    (inside, degsum)
}

/// Finds the most violated odd-set constraint (`|U| ≥ 3`), lowest bitmask
/// on ties, or `None` when every such constraint holds within tolerance.
///
/// Enumerates all subsets, so graphs above [`EXHAUSTIVE_ODD_SET_CAP`]
/// vertices are rejected with a capability error.
pub fn separate_odd_set(g: &Graph, z: &[f64], mode: SeparationMode) -> Result<Option<OddSetCut>> {
    let n = g.n_vertices();
    if n > EXHAUSTIVE_ODD_SET_CAP {
        return Err(FlmError::Capability(format!(
            "odd-set separation enumerates subsets only up to {EXHAUSTIVE_ODD_SET_CAP} vertices, got {n}"
        )));
    }
    if n < 3 {
        return Ok(None);
    }
    let (inside, degsum) = subset_sums(g, z);
    let mut best: Option<(f64, usize)> = None;
    for mask in 1..inside.len() {
        let k = mask.count_ones() as usize;
        if k < 3 || k.is_multiple_of(2) {
            continue;
        }
        let violation = match mode {
            SeparationMode::General => inside[mask] - (k - 1) as f64 / 2.0,
            SeparationMode::Perfect => 1.0 - (degsum[mask] - 2.0 * inside[mask]),
        };
        if violation > SEPARATION_TOL && best.is_none_or(|(b, _)| violation > b) {
            best = Some((violation, mask));
        }
    }
    Ok(best.map(|(violation, mask)| {
        let vertices: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        OddSetCut { vertices, inside: inside[mask], cut: degsum[mask] - 2.0 * inside[mask], violation }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k6() -> Graph {
        Graph::new(6, (0..6).flat_map(|u| (u + 1..6).map(move |v| (u, v))).collect()).unwrap()
    }

    #[test]
    fn integral_matching_is_not_separated() {
        let g = k6();
        let mut z = vec![0.0; g.n_edges()];
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            if (u, v) == (0, 1) || (u, v) == (2, 3) || (u, v) == (4, 5) {
                z[e] = 1.0;
            }
        }
        assert!(separate_odd_set(&g, &z, SeparationMode::General).unwrap().is_none());
        assert!(separate_odd_set(&g, &z, SeparationMode::Perfect).unwrap().is_none());
    }

    #[test]
    fn half_triangle_is_separated() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let cut = separate_odd_set(&g, &[0.5; 3], SeparationMode::General).unwrap().unwrap();
        assert_eq!(cut.vertices, vec![0, 1, 2]);
        assert!((cut.inside - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_triples_violate_the_cut_form() {
        let g = k6();
        let z: Vec<f64> = g.edges().iter().map(|&(u, v)| if (u < 3) == (v < 3) { 0.5 } else { 0.0 }).collect();
        let cut = separate_odd_set(&g, &z, SeparationMode::Perfect).unwrap().unwrap();
        assert_eq!(cut.vertices, vec![0, 1, 2]);
        assert_eq!(cut.cut, 0.0);
        assert!((cut.violation - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_graphs_need_capability() {
        let g = Graph::new(23, vec![]).unwrap();
        assert!(matches!(separate_odd_set(&g, &[], SeparationMode::General), Err(FlmError::Capability(_))));
    }
}
