#![allow(dead_code)]

use flm::instance::{generate_euclidean, generate_euclidean_perfect, Facility, FlmInstance};
use flm::matching::{Graph, Matching};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Copy of `inst` with every opening cost multiplied by `scale`.
pub fn with_opening_scale(inst: &FlmInstance, scale: f64) -> FlmInstance {
    let n = inst.n_facilities() + inst.n_clients();
    let metric = (0..n).map(|a| (0..n).map(|b| inst.metric(a, b)).collect()).collect();
    let facilities = inst
        .facilities()
        .iter()
        .map(|f| Facility { label: f.label.clone(), opening_cost: f.opening_cost * scale })
        .collect();
    FlmInstance::new(facilities, inst.clients().to_vec(), metric, inst.edges().to_vec()).unwrap()
}

/// Random Euclidean instance with `1..=max_f` facilities and `2..=max_v`
/// clients, random density and opening-cost scale. With `perfect` the client
/// count is even and a perfect matching is planted.
pub fn random_instance(seed: u64, max_f: usize, max_v: usize, perfect: bool) -> FlmInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = rng.gen_range(1..=max_f);
    let mut nc = rng.gen_range(2..=max_v);
    if perfect && nc % 2 == 1 {
        nc -= 1;
    }
    let p = rng.gen_range(0.15..=1.0);
    let scale = [0.25, 1.0, 4.0][rng.gen_range(0..3)];
    let base = if perfect {
        generate_euclidean_perfect(nf, nc, p, 10.0, seed)
    } else {
        generate_euclidean(nf, nc, p, 10.0, seed)
    };
    with_opening_scale(&base.unwrap(), scale)
}

/// Random graph on `n` vertices with edge probability `p`.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Graph {
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect::<Vec<_>>();
    let edges = edges.into_iter().filter(|_| rng.gen_bool(p)).collect();
    Graph::new(n, edges).unwrap()
}

/// Characteristic vector of `m`.
pub fn indicator(n_edges: usize, m: &Matching) -> Vec<f64> {
    let mut z = vec![0.0; n_edges];
    m.iter().for_each(|&e| z[e] = 1.0);
    z
}

pub fn edge_lengths(inst: &FlmInstance) -> Vec<f64> {
    (0..inst.n_edges()).map(|e| inst.edge_length(e)).collect()
}
