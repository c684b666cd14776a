use std::collections::VecDeque;

use super::Graph;

/// Edmonds' cardinality matching: grow alternating BFS trees from each
/// exposed vertex, contracting odd cycles into their base until an
/// augmenting path appears. O(V^3).
pub fn max_cardinality_mates(g: &Graph) -> Vec<Option<usize>> {
    let n = g.n_vertices();
    let mut search = Search {
        g,
        mate: vec![None; n],
        parent: vec![None; n],
        base: (0..n).collect(),
        used: vec![false; n],
        queue: VecDeque::new(),
    };
    // greedy warm start
    for u in 0..n {
        if search.mate[u].is_none() {
            if let Some(&(v, _)) = g.neighbors(u).iter().find(|&&(v, _)| search.mate[v].is_none()) {
                search.mate[u] = Some(v);
                search.mate[v] = Some(u);
            }
        }
    }
    for root in 0..n {
        if search.mate[root].is_none() {
            if let Some(end) = search.find_path(root) {
                search.augment(end);
            }
        }
    }
    search.mate
}

struct Search<'a> {
    g: &'a Graph,
    mate: Vec<Option<usize>>,
    parent: Vec<Option<usize>>,
    base: Vec<usize>,
    used: Vec<bool>,
    queue: VecDeque<usize>,
}

impl Search<'_> {
    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        let mut seen = vec![false; self.mate.len()];
        loop {
            a = self.base[a];
            seen[a] = true;
            match self.mate[a] {
                Some(m) => a = self.parent[m].expect("matched tree vertex has a parent"),
                None => break,
            }
        }
        loop {
            b = self.base[b];
            if seen[b] {
                return b;
            }
            b = self.parent[self.mate[b].expect("outer vertex is matched")].expect("tree parent");
        }
    }

    fn mark_path(&mut self, mut v: usize, b: usize, mut child: usize, in_blossom: &mut [bool]) {
        while self.base[v] != b {
            let m = self.mate[v].expect("blossom path vertex is matched");
            in_blossom[self.base[v]] = true;
            in_blossom[self.base[m]] = true;
            self.parent[v] = Some(child);
            child = m;
            v = self.parent[m].expect("tree parent");
        }
    }

    fn find_path(&mut self, root: usize) -> Option<usize> {
        let n = self.mate.len();
        self.used.iter_mut().for_each(|u| *u = false);
        self.parent.iter_mut().for_each(|p| *p = None);
        for (i, b) in self.base.iter_mut().enumerate() {
            *b = i;
        }
        self.used[root] = true;
        self.queue.clear();
        self.queue.push_back(root);
        while let Some(v) = self.queue.pop_front() {
            for idx in 0..self.g.neighbors(v).len() {
                let to = self.g.neighbors(v)[idx].0;
                if self.base[v] == self.base[to] || self.mate[v] == Some(to) {
                    continue;
                }
                let to_is_outer = to == root || self.mate[to].is_some_and(|m| self.parent[m].is_some());
                if to_is_outer {
                    let cur = self.lca(v, to);
                    let mut in_blossom = vec![false; n];
                    self.mark_path(v, cur, to, &mut in_blossom);
                    self.mark_path(to, cur, v, &mut in_blossom);
                    for u in 0..n {
                        if in_blossom[self.base[u]] {
                            self.base[u] = cur;
                            if !self.used[u] {
                                self.used[u] = true;
                                self.queue.push_back(u);
                            }
                        }
                    }
                } else if self.parent[to].is_none() {
                    self.parent[to] = Some(v);
                    match self.mate[to] {
                        None => return Some(to),
                        Some(m) => {
                            self.used[m] = true;
                            self.queue.push_back(m);
                        }
                    }
                }
            }
        }
        None
    }

    fn augment(&mut self, mut v: usize) {
        loop {
            let pv = self.parent[v].expect("augmenting path parent");
            let next = self.mate[pv];
            self.mate[v] = Some(pv);
            self.mate[pv] = Some(v);
            match next {
                Some(nv) => v = nv,
                None => break,
            }
        }
    }
}
