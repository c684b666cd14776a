use std::collections::HashMap;

use serde::Serialize;

use super::separation::subset_sums;
use super::{max_weight_mates, nu, separate_odd_set, Graph, Matching, SeparationMode, EXHAUSTIVE_ODD_SET_CAP};
use crate::error::{FlmError, Result};

/// Entries below this are treated as zero before decomposing.
pub const CLAMP_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-7;
const TIGHT_TOL: f64 = 1e-9;
const DUST: f64 = 1e-12;

/// A convex combination `Σ γ_M χ^M` of maximum matchings.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct MatchingDecomposition {
    pub matchings: Vec<Matching>,
    pub coefficients: Vec<f64>,
}

impl MatchingDecomposition {
    pub fn len(&self) -> usize {
        self.matchings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matchings.is_empty()
    }

    /// `Σ_M γ_M χ^M` as a per-edge vector.
    pub fn reconstruct(&self, n_edges: usize) -> Vec<f64> {
        let mut z = vec![0.0; n_edges];
        for (m, &c) in self.matchings.iter().zip(&self.coefficients) {
            for &e in m {
                z[e] += c;
            }
        }
        z
    }
}

/// Writes a point of the maximum-matching polytope as a convex combination
/// of maximum matchings.
///
/// Each round picks a maximum matching lying in the smallest face of the
/// polytope that contains the remaining (rescaled) point, found as a
/// max-weight maximum matching of the support where every tight degree or
/// odd-set constraint contributes weight to the edges it covers. Removing the
/// largest multiple that keeps the remainder in the polytope either zeroes an
/// edge or makes one more constraint tight, so the face dimension drops every
/// round and at most `|E| + 1` rounds are needed.
pub fn decompose_to_maximum_matchings(g: &Graph, z: &[f64]) -> Result<MatchingDecomposition> {
    let n = g.n_vertices();
    if z.len() != g.n_edges() {
        return Err(FlmError::Precondition(format!("{} values for {} edges", z.len(), g.n_edges())));
    }
    if n > EXHAUSTIVE_ODD_SET_CAP {
        return Err(FlmError::Capability(format!(
            "decomposition enumerates odd sets only up to {EXHAUSTIVE_ODD_SET_CAP} vertices, got {n}"
        )));
    }
    let mut r: Vec<f64> = z.iter().map(|&v| if v < CLAMP_TOL { 0.0 } else { v }).collect();
    check_in_polytope(g, &r)?;

    let odd_sets: Vec<(usize, f64)> = (1usize..1 << n)
        .filter(|m| m.count_ones() >= 3 && m.count_ones() % 2 == 1)
        .map(|m| (m, (m.count_ones() - 1) as f64 / 2.0))
        .collect();
    let mut t = 1.0f64;
    let mut parts: Vec<(Matching, f64)> = Vec::new();
    let guard = 2 * g.n_edges() + n + 2;
    for _ in 0..guard {
        if t <= TIGHT_TOL {
            break;
        }
        let (inside, _) = subset_sums(g, &r);
        let deg = g.degree_sums(&r);
        let tight_vertex: Vec<bool> = deg.iter().map(|&d| d >= t - TIGHT_TOL).collect();
        let tight_sets: Vec<usize> =
            odd_sets.iter().filter(|&&(m, h)| inside[m] >= h * t - TIGHT_TOL).map(|&(m, _)| m).collect();

        let (support, map) = g.edge_subgraph(|e| r[e] > DUST);
        let weights: Vec<i64> = map
            .iter()
            .map(|&e| {
                let (u, v) = g.edge(e);
                let bits = (1usize << u) | (1usize << v);
                tight_vertex[u] as i64
                    + tight_vertex[v] as i64
                    + tight_sets.iter().filter(|&&m| m & bits == bits).count() as i64
            })
            .collect();
        let mates = max_weight_mates(&support, &weights, true);
        let m: Matching = {
            let mut m: Vec<usize> = support.mates_to_matching(&mates).into_iter().map(|e| map[e]).collect();
            m.sort_unstable();
            m
        };

        let mut covered = vec![false; n];
        for &e in &m {
            let (u, v) = g.edge(e);
            covered[u] = true;
            covered[v] = true;
        }
        let mut eps = t;
        for &e in &m {
            eps = eps.min(r[e]);
        }
        for v in 0..n {
            if !covered[v] {
                eps = eps.min(t - deg[v]);
            }
        }
        let mbits: Vec<usize> = m.iter().map(|&e| (1usize << g.edge(e).0) | (1usize << g.edge(e).1)).collect();
        for &(mask, h) in &odd_sets {
            let inside_m = mbits.iter().filter(|&&b| mask & b == b).count() as f64;
            if inside_m < h {
                eps = eps.min((h * t - inside[mask]) / (h - inside_m));
            }
        }
        if eps <= DUST {
            return Err(FlmError::Invariant(format!(
                "decomposition stalled with mass {t:.3e} left; the point is numerically outside the polytope"
            )));
        }
        for &e in &m {
            r[e] -= eps;
        }
        r.iter_mut().for_each(|v| {
            if *v < DUST {
                *v = 0.0;
            }
        });
        t -= eps;
        parts.push((m, eps));
    }
    if t > TIGHT_TOL {
        return Err(FlmError::Invariant(format!("decomposition exceeded {guard} rounds with mass {t:.3e} left")));
    }

    let total: f64 = parts.iter().map(|p| p.1).sum();
    let mut index: HashMap<Matching, usize> = HashMap::new();
    let mut out = MatchingDecomposition::default();
    for (m, c) in parts {
        match index.get(&m) {
            Some(&k) => out.coefficients[k] += c / total,
            None => {
                index.insert(m.clone(), out.matchings.len());
                out.matchings.push(m);
                out.coefficients.push(c / total);
            }
        }
    }
    Ok(out)
}

fn check_in_polytope(g: &Graph, z: &[f64]) -> Result<()> {
    if let Some(e) = z.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(FlmError::Infeasible(format!("nonnegativity: z[{e}] = {}", z[e])));
    }
    for (v, d) in g.degree_sums(z).into_iter().enumerate() {
        if d > 1.0 + FEASIBILITY_TOL {
            return Err(FlmError::Infeasible(format!("degree constraint at vertex {v}: {d} > 1")));
        }
    }
    let size: f64 = z.iter().sum();
    let target = nu(g) as f64;
    if (size - target).abs() > FEASIBILITY_TOL {
        return Err(FlmError::Infeasible(format!("size constraint: sum of z is {size}, nu is {target}")));
    }
    if let Some(cut) = separate_odd_set(g, z, SeparationMode::General)? {
        return Err(FlmError::Infeasible(format!(
            "odd-set constraint on {:?}: inside sum {} exceeds {}",
            cut.vertices,
            cut.inside,
            (cut.vertices.len() - 1) / 2
        )));
    }
    Ok(())
}

/// The doubled graph: a copy `v + n` of every vertex, a copy `|E| + e` of
/// every edge and a rung `2|E| + v` joining `v` to its copy. The point `z`
/// extends by mirroring it on the copy and putting `1 − z(δ(v))` on rungs,
/// which makes it a perfect fractional matching.
pub fn doubled_graph(g: &Graph, z: &[f64]) -> (Graph, Vec<f64>) {
    let n = g.n_vertices();
    let mut edges = g.edges().to_vec();
    edges.extend(g.edges().iter().map(|&(u, v)| (u + n, v + n)));
    edges.extend((0..n).map(|v| (v, v + n)));
    let deg = g.degree_sums(z);
    let mut zz = z.to_vec();
    zz.extend_from_slice(z);
    zz.extend(deg.iter().map(|d| (1.0 - d).max(0.0)));
    (Graph::from_edges_unchecked(2 * n, edges), zz)
}

/// Lifts a matching of `g` to a perfect matching of [`doubled_graph`]:
/// the matching, its copy, and the rungs of uncovered vertices.
pub fn lift_matching(g: &Graph, m: &[usize]) -> Matching {
    let n = g.n_vertices();
    let ne = g.n_edges();
    let mut covered = vec![false; n];
    let mut out: Matching = m.to_vec();
    for &e in m {
        let (u, v) = g.edge(e);
        covered[u] = true;
        covered[v] = true;
        out.push(ne + e);
    }
    out.extend((0..n).filter(|&v| !covered[v]).map(|v| 2 * ne + v));
    out.sort_unstable();
    out
}
