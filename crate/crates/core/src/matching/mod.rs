//! General-graph matching: cardinality and weighted blossom engines,
//! alternating components, odd-set separation and convex decomposition into
//! maximum matchings.

mod cardinality;
mod decompose;
mod separation;
mod symdiff;
mod weighted;

use std::collections::HashMap;

use crate::error::{FlmError, Result};

pub use cardinality::max_cardinality_mates;
pub use decompose::{decompose_to_maximum_matchings, doubled_graph, lift_matching, MatchingDecomposition};
pub use separation::{odd_set_sums, separate_odd_set, OddSetCut, SeparationMode, EXHAUSTIVE_ODD_SET_CAP};
pub use symdiff::{symmetric_difference_components, AlternatingComponent, ComponentKind};
pub use weighted::max_weight_mates;

/// A matching as a sorted list of edge indices into its [`Graph`].
pub type Matching = Vec<usize>;

/// Simple undirected graph. Edge `e` is `edges[e] = (u, v)` with `u < v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph, rejecting loops, multi-edges and out-of-range vertices.
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= n_vertices || v >= n_vertices {
                return Err(FlmError::Identifier(format!("edge {e} = ({u},{v}) outside 0..{n_vertices}")));
            }
            if u == v {
                return Err(FlmError::Precondition(format!("self-loop at vertex {u}")));
            }
            if seen.insert((u.min(v), u.max(v)), e).is_some() {
                return Err(FlmError::Precondition(format!("duplicate edge ({u},{v})")));
            }
        }
        Ok(Self::from_edges_unchecked(n_vertices, edges))
    }

    pub(crate) fn from_edges_unchecked(n_vertices: usize, edges: Vec<(usize, usize)>) -> Self {
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
        let mut adjacency = vec![Vec::new(); n_vertices];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push((v, e));
            adjacency[v].push((u, e));
        }
        Self { n_vertices, edges, adjacency }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// `(neighbour, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    /// The subgraph on the same vertices keeping only edges where `keep` holds.
    /// Returns the subgraph and the map from its edge indices to ours.
    pub fn edge_subgraph(&self, keep: impl Fn(usize) -> bool) -> (Graph, Vec<usize>) {
        let kept: Vec<usize> = (0..self.edges.len()).filter(|&e| keep(e)).collect();
        let g = Graph::from_edges_unchecked(self.n_vertices, kept.iter().map(|&e| self.edges[e]).collect());
        (g, kept)
    }

    fn edge_between(&self) -> HashMap<(usize, usize), usize> {
        let mut map = HashMap::with_capacity(self.edges.len());
        for (e, &p) in self.edges.iter().enumerate() {
            map.entry(p).or_insert(e);
        }
        map
    }

    /// Converts a mate vector into sorted edge indices.
    fn mates_to_matching(&self, mates: &[Option<usize>]) -> Matching {
        let between = self.edge_between();
        let mut m: Matching =
            mates.iter().enumerate().filter_map(|(u, &v)| v.filter(|&v| u < v).map(|v| between[&(u, v)])).collect();
        m.sort_unstable();
        m
    }

    /// True when `m` is a set of pairwise disjoint edges of this graph.
    pub fn is_matching(&self, m: &[usize]) -> bool {
        let mut used = vec![false; self.n_vertices];
        for &e in m {
            if e >= self.edges.len() {
                return false;
            }
            let (u, v) = self.edges[e];
            if used[u] || used[v] {
                return false;
            }
            used[u] = true;
            used[v] = true;
        }
        true
    }

    /// Σ_{e∈δ(v)} z_e for every vertex.
    pub fn degree_sums(&self, z: &[f64]) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_vertices];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            deg[u] += z[e];
            deg[v] += z[e];
        }
        deg
    }
}

/// A maximum-cardinality matching via Edmonds' blossom shrinking.
pub fn max_cardinality_matching(g: &Graph) -> Matching {
    g.mates_to_matching(&max_cardinality_mates(g))
}

/// ν(G), the size of a maximum matching.
pub fn nu(g: &Graph) -> usize {
    max_cardinality_mates(g).iter().filter(|m| m.is_some()).count() / 2
}

pub fn is_perfectly_matchable(g: &Graph) -> bool {
    2 * nu(g) == g.n_vertices()
}

/// Integer weights for the K-shift reduction. Costs are quantized so their
/// total sits near 2^52, which keeps every dual of the weighted engine far
/// below i64 overflow while resolving costs far below f64 comparison noise.
fn shifted_weights(cost: &[f64]) -> Vec<i64> {
    let total: f64 = cost.iter().sum();
    let scale = if total > 0.0 { (1u64 << 52) as f64 / total } else { 1.0 };
    let quantized: Vec<i64> = cost.iter().map(|&c| (c * scale).round() as i64).collect();
    let k: i64 = quantized.iter().sum::<i64>() + 1;
    quantized.iter().map(|&q| k - q).collect()
}

fn check_costs(g: &Graph, cost: &[f64]) -> Result<()> {
    if cost.len() != g.n_edges() {
        return Err(FlmError::Precondition(format!("{} costs for {} edges", cost.len(), g.n_edges())));
    }
    if let Some(e) = cost.iter().position(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(FlmError::Precondition(format!("edge {e} has invalid cost {}", cost[e])));
    }
    Ok(())
}

/// Among all matchings of size ν(G), one of minimum total cost.
///
/// Runs the weighted engine on `w(e) = K − cost(e)` with `K` exceeding the
/// total cost, so any larger matching outweighs any smaller one.
pub fn min_cost_maximum_matching(g: &Graph, cost: &[f64]) -> Result<Matching> {
    check_costs(g, cost)?;
    let weights = shifted_weights(cost);
    Ok(g.mates_to_matching(&max_weight_mates(g, &weights, false)))
}

/// A minimum-cost perfect matching; errors when none exists.
pub fn min_cost_perfect_matching(g: &Graph, cost: &[f64]) -> Result<Matching> {
    let m = min_cost_maximum_matching(g, cost)?;
    if 2 * m.len() != g.n_vertices() {
        return Err(FlmError::Infeasible(format!(
            "graph is not perfectly matchable: nu = {} for {} vertices",
            m.len(),
            g.n_vertices()
        )));
    }
    Ok(m)
}

/// Total cost of a matching.
pub fn matching_cost(m: &[usize], cost: &[f64]) -> f64 {
    m.iter().map(|&e| cost[e]).sum()
}
