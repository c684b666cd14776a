mod common;

use common::random_instance;
use flm::instance::{check_solution, reduce_ufl_to_flm, FlmInstance};
use flm::lp::{solve_lp_flm, solve_lp_ufl};
use flm::oracle::{brute_force_matchings, exact_solve, exact_solve_with};
use flm::par::Parallelism;
use flm::rounding::generate_ufl;

/// Optimum over every open set, maximum matching and assignment of pairs to
/// open facilities, without the nearest-facility shortcut.
fn naive_optimum(inst: &FlmInstance) -> f64 {
    let g = inst.graph();
    let maxima = brute_force_matchings(&g).unwrap();
    let nf = inst.n_facilities();
    let mut best = f64::INFINITY;
    for mask in 1usize..1 << nf {
        let open: Vec<usize> = (0..nf).filter(|&i| mask >> i & 1 == 1).collect();
        let opening: f64 = open.iter().map(|&i| inst.opening_cost(i)).sum();
        for m in &maxima {
            let mut choice = vec![0usize; m.len()];
            loop {
                let conn: f64 = m.iter().zip(&choice).map(|(&e, &c)| inst.edge_pair_distance(open[c], e)).sum();
                best = best.min(opening + conn);
                let Some(t) = (0..m.len()).find(|&t| choice[t] + 1 < open.len()) else { break };
                choice[t] += 1;
                choice[..t].iter_mut().for_each(|c| *c = 0);
            }
        }
    }
    if maxima.iter().all(Vec::is_empty) {
        0.0
    } else {
        best
    }
}

#[test]
fn exact_solver_matches_naive_enumeration() {
    for seed in 0..60 {
        let inst = random_instance(20_000 + seed, 3, 6, seed % 2 == 0);
        let exact = exact_solve(&inst).unwrap();
        let naive = naive_optimum(&inst);
        assert!((exact.optimum - naive).abs() <= 1e-9 * (1.0 + naive), "seed {seed}: {} vs {naive}", exact.optimum);
        assert!(check_solution(&inst, &exact.optimal_solution).is_empty());
        assert!((exact.optimal_solution.total_cost() - exact.optimum).abs() <= 1e-9 * (1.0 + naive));
    }
}

#[test]
fn exact_solver_is_strategy_independent() {
    for seed in 0..20 {
        let inst = random_instance(21_000 + seed, 6, 8, false);
        let par = exact_solve_with(&inst, 16, Parallelism::Parallel).unwrap();
        let seq = exact_solve_with(&inst, 16, Parallelism::Sequential).unwrap();
        assert_eq!(par.optimum, seq.optimum);
        assert_eq!(par.optimal_solution, seq.optimal_solution);
    }
}

#[test]
fn ufl_reduction_doubles_optimum_and_relaxation() {
    for seed in 0..30 {
        let ufl = generate_ufl(3, 5, 10.0, seed);
        let inst = reduce_ufl_to_flm(&ufl);
        assert_eq!(inst.n_clients(), 2 * ufl.n_clients());
        assert_eq!(inst.nu(), ufl.n_clients());
        let flm_opt = exact_solve(&inst).unwrap().optimum;
        let ufl_opt = ufl.brute_force_optimum().unwrap();
        assert!((flm_opt - 2.0 * ufl_opt).abs() <= 1e-9 * (1.0 + ufl_opt), "seed {seed}");
        let flm_lp = solve_lp_flm(&inst).unwrap().value;
        let (_, ufl_lp) = solve_lp_ufl(&ufl).unwrap();
        assert!((flm_lp - 2.0 * ufl_lp).abs() <= 1e-6 * (1.0 + ufl_lp), "seed {seed}: {flm_lp} vs 2·{ufl_lp}");
    }
}

#[test]
fn relaxation_never_exceeds_optimum_on_larger_graphs() {
    for seed in 0..40 {
        let inst = random_instance(22_000 + seed, 3, 10, seed % 3 == 0);
        let lp = solve_lp_flm(&inst).unwrap().value;
        let opt = exact_solve(&inst).unwrap().optimum;
        assert!(lp <= opt + 1e-6, "seed {seed}: {lp} > {opt}");
    }
}
