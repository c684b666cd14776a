mod common;

use common::{edge_lengths, indicator, random_instance};
use flm::instance::{check_solution, FlmInstance, FlmSolution};
use flm::lp::{check_lp_flm_feasible, flm_costs, solve_lp_flm, solve_lp_ufl, FractionalFlm};
use flm::matching::{
    decompose_to_maximum_matchings, matching_cost, max_cardinality_matching, max_weight_mates,
    min_cost_maximum_matching, nu, odd_set_sums, separate_odd_set, Graph, SeparationMode,
};
use flm::oracle::{all_matchings, brute_force_matchings};
use flm::par::Parallelism;
use flm::pipeline::{solve, PipelineConfig, PipelineMode};
use flm::reroute::{reroute, RerouteMode, RerouteOptions};
use flm::rounding::{generate_ufl, round_bifactor};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        proptest::collection::vec(any::<bool>(), pairs.len()).prop_map(move |keep| {
            Graph::new(n, pairs.iter().zip(&keep).filter(|p| *p.1).map(|p| *p.0).collect()).unwrap()
        })
    })
}

fn weighted_graph(max_n: usize) -> impl Strategy<Value = (Graph, Vec<i64>)> {
    graph_strategy(max_n).prop_flat_map(|g| {
        let m = g.n_edges();
        (Just(g), proptest::collection::vec(-20i64..40, m))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn max_weight_matching_matches_enumeration((g, w) in weighted_graph(9), maxcard in any::<bool>()) {
        let mates = max_weight_mates(&g, &w, maxcard);
        let m: Vec<usize> = (0..g.n_edges()).filter(|&e| { let (u, v) = g.edge(e); mates[u] == Some(v) && mates[v] == Some(u) }).collect();
        prop_assert!(g.is_matching(&m));
        let all = all_matchings(&g).unwrap();
        let key = |m: &Vec<usize>| (if maxcard { m.len() as i64 } else { 0 }, m.iter().map(|&e| w[e]).sum::<i64>());
        let best = all.iter().map(key).max().unwrap();
        prop_assert_eq!(key(&m), best);
    }

    #[test]
    fn cardinality_matching_is_maximum(g in graph_strategy(11)) {
        let m = max_cardinality_matching(&g);
        prop_assert!(g.is_matching(&m));
        let best = all_matchings(&g).unwrap().iter().map(Vec::len).max().unwrap();
        prop_assert_eq!(m.len(), best);
        prop_assert_eq!(nu(&g), best);
    }

    #[test]
    fn decomposition_reconstructs_convex_combinations(g in graph_strategy(8), picks in proptest::collection::vec((0usize..1000, 1u32..10), 1..5)) {
        let maxima = brute_force_matchings(&g).unwrap();
        let total: u32 = picks.iter().map(|p| p.1).sum();
        let mut z = vec![0.0; g.n_edges()];
        for &(k, w) in &picks {
            let part = indicator(g.n_edges(), &maxima[k % maxima.len()]);
            z.iter_mut().zip(part).for_each(|(a, b)| *a += w as f64 / total as f64 * b);
        }
        let d = decompose_to_maximum_matchings(&g, &z).unwrap();
        let back = d.reconstruct(g.n_edges());
        for e in 0..g.n_edges() {
            prop_assert!((back[e] - z[e]).abs() <= 1e-7);
        }
        prop_assert!((d.coefficients.iter().sum::<f64>() - 1.0).abs() <= 1e-7);
        for m in &d.matchings {
            prop_assert!(g.is_matching(m) && m.len() == nu(&g));
        }
    }

    #[test]
    fn separation_certifies_membership(g in graph_strategy(9), raw in proptest::collection::vec(0.0f64..1.0, 36)) {
        // scale a random point into the degree polytope
        let mut z: Vec<f64> = raw[..g.n_edges()].to_vec();
        let deg = g.degree_sums(&z);
        let worst = deg.iter().cloned().fold(1.0, f64::max);
        z.iter_mut().for_each(|v| *v /= worst);
        let cut = separate_odd_set(&g, &z, SeparationMode::General).unwrap();
        let n = g.n_vertices();
        let mut most = 0.0f64;
        for mask in 1u32..1 << n {
            let set: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            if set.len() >= 3 && set.len() % 2 == 1 {
                let (inside, _) = odd_set_sums(&g, &z, &set);
                most = most.max(inside - (set.len() - 1) as f64 / 2.0);
            }
        }
        match cut {
            Some(c) => prop_assert!((c.violation - most).abs() <= 1e-9 && c.violation > 0.0),
            None => prop_assert!(most <= 1e-7),
        }
    }

    #[test]
    fn min_cost_matching_agrees_with_enumeration(seed in 0u64..5_000) {
        let inst = random_instance(seed, 3, 8, false);
        let g = inst.graph();
        let cost = edge_lengths(&inst);
        let m = min_cost_maximum_matching(&g, &cost).unwrap();
        let best = brute_force_matchings(&g).unwrap().iter().map(|m| matching_cost(m, &cost)).fold(f64::INFINITY, f64::min);
        let got = matching_cost(&m, &cost);
        prop_assert!((got - best).abs() <= 1e-9 * (1.0 + best.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn instance_json_round_trips(seed in 0u64..10_000) {
        let inst = random_instance(seed, 4, 8, seed % 2 == 0);
        let text = inst.to_json();
        let back = FlmInstance::from_json(&text).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(back.to_json(), text);
    }

    #[test]
    fn lp_point_is_feasible_and_reroutes(seed in 0u64..10_000) {
        let inst = random_instance(seed, 3, 8, false);
        let lp = solve_lp_flm(&inst).unwrap();
        prop_assert!(check_lp_flm_feasible(&inst, &lp.frac, 1e-6).is_empty());
        let (open, conn) = flm_costs(&inst, &lp.frac);
        prop_assert!((open + conn - lp.value).abs() <= 1e-6 * (1.0 + lp.value));
        if lp.nu > 0 {
            let m = max_cardinality_matching(&inst.graph());
            let r = reroute(&inst, &lp.frac, &m, RerouteMode::General, &RerouteOptions { check_each_iteration: true }).unwrap();
            prop_assert_eq!(r.final_potential, 0);
            let moved: f64 = r.output.x.iter().flatten().sum();
            prop_assert!((moved - lp.nu as f64).abs() <= 1e-6);
        }
    }

    #[test]
    fn pipeline_is_deterministic_and_feasible(seed in 0u64..10_000, mode_pick in 0usize..3) {
        let inst = random_instance(seed, 3, 8, true);
        let mode = [PipelineMode::General, PipelineMode::PerfectReroute, PipelineMode::PerfectDirect][mode_pick];
        let cfg = PipelineConfig { trials: 6, ..PipelineConfig::new(mode, seed) };
        let a = solve(&inst, &cfg).unwrap();
        let b = solve(&inst, &PipelineConfig { parallelism: Parallelism::Sequential, ..cfg }).unwrap();
        prop_assert_eq!(&a.trial_costs, &b.trial_costs);
        prop_assert_eq!(&a.solution, &b.solution);
        prop_assert!(check_solution(&inst, &a.solution).is_empty());
        prop_assert!(a.cost >= a.lp_value - 1e-6);
    }

    #[test]
    fn tampered_solutions_are_rejected(seed in 0u64..10_000) {
        let inst = random_instance(seed, 3, 8, true);
        prop_assume!(inst.nu() > 0);
        let sol = solve(&inst, &PipelineConfig::new(PipelineMode::General, seed)).unwrap().solution;
        let mut fewer = sol.clone();
        fewer.matching.pop();
        fewer.assignment.pop();
        prop_assert!(check_solution(&inst, &fewer).iter().any(|v| v.contains("matching not maximum")));
        let closed: Vec<usize> = (0..inst.n_facilities()).filter(|i| !sol.open_set.contains(i)).collect();
        if let Some(&i) = closed.first() {
            let mut bad = sol.clone();
            bad.assignment[0] = i;
            prop_assert!(check_solution(&inst, &bad).iter().any(|v| v.contains("assignment target not open")));
        }
        let mut mispriced: FlmSolution = sol.clone();
        mispriced.connection_cost_total += 1.0;
        prop_assert!(!check_solution(&inst, &mispriced).is_empty());
    }

    #[test]
    fn bifactor_rounding_serves_everyone(seed in 0u64..10_000, lambda in 1.678f64..3.0) {
        let ufl = generate_ufl(3, 6, 10.0, seed);
        let (frac, _) = solve_lp_ufl(&ufl).unwrap();
        let sol = round_bifactor(&ufl, &frac, lambda, seed).unwrap();
        prop_assert!(!sol.open_set.is_empty());
        prop_assert_eq!(sol.assignment.len(), ufl.n_clients());
        for (j, &i) in sol.assignment.iter().enumerate() {
            prop_assert!(sol.open_set.contains(&i));
            let nearest = sol.open_set.iter().map(|&k| ufl.cost(k, j)).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(ufl.cost(i, j), nearest);
        }
    }
}

#[test]
fn weak_point_is_not_reroutable() {
    // a point outside the relaxation is refused up front
    let inst = random_instance(3, 2, 6, true);
    let frac = FractionalFlm::zeros(inst.n_facilities(), inst.n_edges());
    let m = max_cardinality_matching(&inst.graph());
    assert!(reroute(&inst, &frac, &m, RerouteMode::General, &RerouteOptions::default()).is_err());
}
