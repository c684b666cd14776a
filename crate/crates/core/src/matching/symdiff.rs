use serde::Serialize;

use super::Graph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ComponentKind {
    Path,
    Cycle,
}

/// One connected component of `M △ M'`.
///
/// `edges` follow the walk. Paths start at the end whose first edge lies in
/// `M' ∖ M` when there is one (lower endpoint otherwise); cycles start at
/// their lowest vertex with the `M'` edge first. `vertices` lists the walk,
/// so a path has one more vertex than edges and a cycle the same number.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AlternatingComponent {
    pub kind: ComponentKind,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
}

impl AlternatingComponent {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Splits `M △ M'` into maximal alternating paths and cycles, ordered by
/// their smallest vertex.
pub fn symmetric_difference_components(g: &Graph, m: &[usize], m_prime: &[usize]) -> Vec<AlternatingComponent> {
    let n = g.n_vertices();
    let mut in_m = vec![false; g.n_edges()];
    let mut in_mp = vec![false; g.n_edges()];
    m.iter().for_each(|&e| in_m[e] = true);
    m_prime.iter().for_each(|&e| in_mp[e] = true);

    // each vertex has at most one incident edge from each side
    let mut via_m = vec![None; n];
    let mut via_mp = vec![None; n];
    for e in 0..g.n_edges() {
        let (u, v) = g.edge(e);
        if in_m[e] && !in_mp[e] {
            via_m[u] = Some(e);
            via_m[v] = Some(e);
        } else if in_mp[e] && !in_m[e] {
            via_mp[u] = Some(e);
            via_mp[v] = Some(e);
        }
    }
    let degree = |v: usize| via_m[v].is_some() as usize + via_mp[v].is_some() as usize;
    let other = |e: usize, v: usize| {
        let (a, b) = g.edge(e);
        if a == v {
            b
        } else {
            a
        }
    };

    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] || degree(start) == 0 {
            continue;
        }
        // locate the component and its endpoints
        let mut members = vec![start];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            for e in [via_m[v], via_mp[v]].into_iter().flatten() {
                let w = other(e, v);
                if !seen[w] {
                    seen[w] = true;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        let ends: Vec<usize> = members.iter().copied().filter(|&v| degree(v) == 1).collect();
        let (kind, first, first_edge) = if ends.is_empty() {
            let low = *members.iter().min().expect("nonempty");
            (ComponentKind::Cycle, low, via_mp[low].expect("cycle vertex has both sides"))
        } else {
            let mut ends = ends;
            ends.sort_unstable();
            let pick = ends.iter().copied().find(|&v| via_mp[v].is_some()).unwrap_or(ends[0]);
            let e = via_mp[pick].or(via_m[pick]).expect("endpoint has an edge");
            (ComponentKind::Path, pick, e)
        };
        let mut vertices = vec![first];
        let mut edges = vec![first_edge];
        let mut v = other(first_edge, first);
        let mut last = first_edge;
        loop {
            if kind == ComponentKind::Cycle && v == first {
                break;
            }
            vertices.push(v);
            let next = if in_m[last] { via_mp[v] } else { via_m[v] };
            match next {
                Some(e) => {
                    edges.push(e);
                    last = e;
                    v = other(e, v);
                }
                None => break,
            }
        }
        out.push(AlternatingComponent { kind, edges, vertices });
    }
    out
}
