//! Bifactor LP rounding for uncapacitated facility location: scale the
//! opening variables, cluster clients around disjoint close sets, open one
//! facility per cluster and the rest independently, then connect every
//! client to its nearest open facility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlmError, Result};
use crate::instance::{FlmInstance, METRIC_TOL};

/// Smallest admissible scaling factor λ.
pub const MIN_LAMBDA: f64 = 1.678;
const FRAC_TOL: f64 = 1e-7;
const MASS_EPS: f64 = 1e-12;

/// A UFL instance given by opening costs and facility × client costs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UflInstance {
    opening_costs: Vec<f64>,
    cost: Vec<Vec<f64>>,
}

impl UflInstance {
    /// `cost[i][j]` is the cost of serving client `j` from facility `i`.
    pub fn new(opening_costs: Vec<f64>, cost: Vec<Vec<f64>>) -> Result<Self> {
        if cost.len() != opening_costs.len() {
            return Err(FlmError::Precondition(format!(
                "{} cost rows for {} facilities",
                cost.len(),
                opening_costs.len()
            )));
        }
        let nc = cost.first().map_or(0, Vec::len);
        if cost.iter().any(|row| row.len() != nc) {
            return Err(FlmError::Precondition("ragged cost matrix".into()));
        }
        if opening_costs.iter().chain(cost.iter().flatten()).any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(FlmError::Precondition("costs must be finite and nonnegative".into()));
        }
        Ok(Self { opening_costs, cost })
    }

    pub fn n_facilities(&self) -> usize {
        self.opening_costs.len()
    }

    pub fn n_clients(&self) -> usize {
        self.cost.first().map_or(0, Vec::len)
    }

    pub fn cost(&self, i: usize, j: usize) -> f64 {
        self.cost[i][j]
    }

    pub fn opening_cost(&self, i: usize) -> f64 {
        self.opening_costs[i]
    }

    /// Exact optimum by enumerating nonempty facility subsets (small sizes only).
    pub fn brute_force_optimum(&self) -> Result<f64> {
        let nf = self.n_facilities();
        if nf > 20 {
            return Err(FlmError::Capability(format!("{nf} facilities is too many to enumerate")));
        }
        if self.n_clients() == 0 {
            return Ok(0.0);
        }
        let mut best = f64::INFINITY;
        for mask in 1usize..1 << nf {
            let open: Vec<usize> = (0..nf).filter(|&i| mask >> i & 1 == 1).collect();
            best = best.min(self.evaluate(&open).total());
        }
        Ok(best)
    }

    /// Opens `open` and connects every client to its nearest open facility.
    pub fn evaluate(&self, open: &[usize]) -> UflSolution {
        let mut open = open.to_vec();
        open.sort_unstable();
        open.dedup();
        let assignment: Vec<usize> = (0..self.n_clients())
            .map(|j| {
                let mut best = open[0];
                for &i in &open[1..] {
                    if self.cost(i, j) < self.cost(best, j) {
                        best = i;
                    }
                }
                best
            })
            .collect();
        let opening_cost = open.iter().map(|&i| self.opening_cost(i)).sum();
        let connection_cost = assignment.iter().enumerate().map(|(j, &i)| self.cost(i, j)).sum();
        UflSolution { open_set: open, assignment, opening_cost, connection_cost }
    }
}

/// A fractional point of the UFL relaxation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UflFractional {
    /// `x[i][j]`
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl UflFractional {
    /// Σ f(i) y_i
    pub fn opening_cost(&self, ufl: &UflInstance) -> f64 {
        self.y.iter().enumerate().map(|(i, &y)| ufl.opening_cost(i) * y).sum()
    }

    /// Σ d(i,j) x_{i,j}
    pub fn connection_cost(&self, ufl: &UflInstance) -> f64 {
        let mut total = 0.0;
        for (i, row) in self.x.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                total += ufl.cost(i, j) * x;
            }
        }
        total
    }

    /// Violations of `Σ_i x_ij = 1`, `x_ij ≤ y_i` and nonnegativity.
    pub fn violations(&self, ufl: &UflInstance, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        let (nf, nc) = (ufl.n_facilities(), ufl.n_clients());
        if self.y.len() != nf || self.x.len() != nf || self.x.iter().any(|r| r.len() != nc) {
            out.push(format!("fractional point shape does not match {nf} facilities x {nc} clients"));
            return out;
        }
        for i in 0..nf {
            if self.y[i] < -tol {
                out.push(format!("y[{i}] = {} is negative", self.y[i]));
            }
            for j in 0..nc {
                if self.x[i][j] < -tol {
                    out.push(format!("x[{i}][{j}] = {} is negative", self.x[i][j]));
                }
                if self.x[i][j] > self.y[i] + tol {
                    out.push(format!("x[{i}][{j}] = {} exceeds y[{i}] = {}", self.x[i][j], self.y[i]));
                }
            }
        }
        for j in 0..nc {
            let s: f64 = (0..nf).map(|i| self.x[i][j]).sum();
            if (s - 1.0).abs() > tol {
                out.push(format!("client {j} is assigned {s} in total"));
            }
        }
        out
    }
}

/// An integral UFL solution with nearest-facility assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UflSolution {
    pub open_set: Vec<usize>,
    pub assignment: Vec<usize>,
    pub opening_cost: f64,
    pub connection_cost: f64,
}

impl UflSolution {
    pub fn total(&self) -> f64 {
        self.opening_cost + self.connection_cost
    }
}

/// Lists quadruples breaking `d(i,j) ≤ d(i,j') + d(i',j') + d(i',j)`.
pub fn validate_three_hop(ufl: &UflInstance) -> Vec<String> {
    let (nf, nc) = (ufl.n_facilities(), ufl.n_clients());
    let mut out = Vec::new();
    for i in 0..nf {
        for j in 0..nc {
            for i2 in 0..nf {
                for j2 in 0..nc {
                    let via = ufl.cost(i, j2) + ufl.cost(i2, j2) + ufl.cost(i2, j);
                    if ufl.cost(i, j) > via + METRIC_TOL {
                        out.push(format!(
                            "three-hop violated at (i={i}, j={j}, i'={i2}, j'={j2}): {} > {via}",
                            ufl.cost(i, j)
                        ));
                    }
                }
            }
        }
    }
    out
}

/// The UFL instance whose clients are the pairs of `matching` (edge indices
/// of `inst`), served at cost `d(i, e) = d(i, j) + d(i, k)`.
pub fn build_meta_client_ufl(inst: &FlmInstance, matching: &[usize]) -> UflInstance {
    let cost =
        (0..inst.n_facilities()).map(|i| matching.iter().map(|&e| inst.edge_pair_distance(i, e)).collect()).collect();
    let opening = (0..inst.n_facilities()).map(|i| inst.opening_cost(i)).collect();
    UflInstance { opening_costs: opening, cost }
}

/// The client-level UFL instance `(F, V, f, d)` of an FLM instance.
pub fn client_level_ufl(inst: &FlmInstance) -> UflInstance {
    let cost =
        (0..inst.n_facilities()).map(|i| (0..inst.n_clients()).map(|j| inst.facility_client(i, j)).collect()).collect();
    let opening = (0..inst.n_facilities()).map(|i| inst.opening_cost(i)).collect();
    UflInstance { opening_costs: opening, cost }
}

/// A slice `[lo, hi)` of a facility's scaled opening mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub facility: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Piece {
    pub fn mass(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The scaled, split and clustered fractional solution.
#[derive(Clone, Debug)]
pub struct Clustering {
    /// ȳ = min(1, λ y)
    pub y_bar: Vec<f64>,
    pub pieces: Vec<Piece>,
    /// Piece indices of each client's close set (total mass 1).
    pub close: Vec<Vec<usize>>,
    /// Mass-weighted average distance to the close set.
    pub close_distance: Vec<f64>,
    /// Cluster centers in the order they were chosen.
    pub centers: Vec<usize>,
    /// For every client, the center whose close set blocked or is its own.
    pub center_of: Vec<usize>,
    /// Owning center of each piece, if claimed.
    pub claimed_by: Vec<Option<usize>>,
}

impl Clustering {
    /// Largest distance from `j` to a facility in its close set.
    pub fn max_close_distance(&self, ufl: &UflInstance, j: usize) -> f64 {
        self.close[j].iter().map(|&p| ufl.cost(self.pieces[p].facility, j)).fold(0.0, f64::max)
    }
}

fn check_inputs(ufl: &UflInstance, frac: &UflFractional, lambda: f64) -> Result<()> {
    if !(lambda >= MIN_LAMBDA) || !lambda.is_finite() {
        return Err(FlmError::Precondition(format!("lambda = {lambda} is below {MIN_LAMBDA}")));
    }
    let v = frac.violations(ufl, FRAC_TOL);
    if !v.is_empty() {
        return Err(FlmError::Feasibility(v.join("; ")));
    }
    Ok(())
}

/// Scales, splits and clusters `frac`.
///
/// Each client's close set is the nearest ȳ-mass 1 over all facilities
/// (distance, then index). Facilities are cut so every close set is a union
/// of pieces. Clients are scanned by ascending average close distance and
/// become centers when their close pieces are still unclaimed.
pub fn cluster(ufl: &UflInstance, frac: &UflFractional, lambda: f64) -> Result<Clustering> {
    check_inputs(ufl, frac, lambda)?;
    let (nf, nc) = (ufl.n_facilities(), ufl.n_clients());
    let y_bar: Vec<f64> = frac.y.iter().map(|&y| (lambda * y.max(0.0)).min(1.0)).collect();

    // close prefix of each client: (facility, mass taken from the facility's start)
    let mut prefixes: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nc);
    let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); nf];
    for j in 0..nc {
        let mut order: Vec<usize> = (0..nf).filter(|&i| y_bar[i] > MASS_EPS).collect();
        order.sort_by(|&a, &b| ufl.cost(a, j).total_cmp(&ufl.cost(b, j)).then(a.cmp(&b)));
        let mut need = 1.0;
        let mut prefix = Vec::new();
        for i in order {
            if need <= MASS_EPS {
                break;
            }
            let take = if y_bar[i] <= need + MASS_EPS { y_bar[i] } else { need };
            if take < y_bar[i] {
                cuts[i].push(take);
            }
            prefix.push((i, take));
            need -= take;
        }
        prefixes.push(prefix);
    }
    let mut pieces = Vec::new();
    let mut first_piece = vec![0usize; nf + 1];
    for i in 0..nf {
        first_piece[i] = pieces.len();
        let mut points = std::mem::take(&mut cuts[i]);
        points.push(0.0);
        points.push(y_bar[i]);
        points.sort_by(f64::total_cmp);
        points.dedup_by(|a, b| (*a - *b).abs() <= MASS_EPS);
        for w in points.windows(2) {
            if w[1] - w[0] > MASS_EPS {
                pieces.push(Piece { facility: i, lo: w[0], hi: w[1] });
            }
        }
    }
    first_piece[nf] = pieces.len();

    let mut close = Vec::with_capacity(nc);
    let mut close_distance = Vec::with_capacity(nc);
    for (j, prefix) in prefixes.iter().enumerate() {
        let mut mine = Vec::new();
        let mut dist = 0.0;
        for &(i, take) in prefix {
            for p in first_piece[i]..first_piece[i + 1] {
                if pieces[p].hi <= take + MASS_EPS {
                    mine.push(p);
                    dist += pieces[p].mass() * ufl.cost(i, j);
                }
            }
        }
        close.push(mine);
        close_distance.push(dist);
    }

    let mut order: Vec<usize> = (0..nc).collect();
    order.sort_by(|&a, &b| close_distance[a].total_cmp(&close_distance[b]).then(a.cmp(&b)));
    let mut claimed_by: Vec<Option<usize>> = vec![None; pieces.len()];
    let mut centers = Vec::new();
    let mut center_of = vec![usize::MAX; nc];
    for j in order {
        match close[j].iter().find_map(|&p| claimed_by[p]) {
            Some(c) => center_of[j] = c,
            None => {
                for &p in &close[j] {
                    claimed_by[p] = Some(j);
                }
                centers.push(j);
                center_of[j] = j;
            }
        }
    }
    Ok(Clustering { y_bar, pieces, close, close_distance, centers, center_of, claimed_by })
}

/// How facilities are chosen after clustering.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoundingMode {
    /// The randomized bifactor rounding; its expected cost is at most
    /// `λ·open(y) + (1 + 2/e^λ)·conn(x)`.
    Randomized,
    /// Opens every facility with ȳ ≥ 1/2 and the cheapest close facility of
    /// every center. Reproducible but without any approximation guarantee.
    DeterministicFallback,
}

/// Randomized bifactor rounding, deterministic for a fixed seed.
pub fn round_bifactor(ufl: &UflInstance, frac: &UflFractional, lambda: f64, seed: u64) -> Result<UflSolution> {
    round_with_mode(ufl, frac, lambda, seed, RoundingMode::Randomized)
}

pub fn round_with_mode(
    ufl: &UflInstance,
    frac: &UflFractional,
    lambda: f64,
    seed: u64,
    mode: RoundingMode,
) -> Result<UflSolution> {
    let cl = cluster(ufl, frac, lambda)?;
    let open = match mode {
        RoundingMode::Randomized => open_randomized(ufl, &cl, seed),
        RoundingMode::DeterministicFallback => open_fallback(ufl, &cl),
    };
    if open.is_empty() {
        return Ok(UflSolution {
            open_set: Vec::new(),
            assignment: Vec::new(),
            opening_cost: 0.0,
            connection_cost: 0.0,
        });
    }
    Ok(ufl.evaluate(&open))
}

fn open_randomized(ufl: &UflInstance, cl: &Clustering, seed: u64) -> Vec<usize> {
    let nc = ufl.n_clients() as u64;
    let mut is_open: Vec<bool> = cl.y_bar.iter().map(|&y| y >= 1.0).collect();
    for &c in &cl.centers {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + c as u64);
        let total: f64 = cl.close[c].iter().map(|&p| cl.pieces[p].mass()).sum();
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = *cl.close[c].last().expect("close sets are nonempty");
        for &p in &cl.close[c] {
            u -= cl.pieces[p].mass();
            if u < 0.0 {
                chosen = p;
                break;
            }
        }
        is_open[cl.pieces[chosen].facility] = true;
    }
    for i in 0..ufl.n_facilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + nc + i as u64);
        for p in cl.pieces.iter().enumerate().filter(|(k, p)| p.facility == i && cl.claimed_by[*k].is_none()) {
            if rng.gen::<f64>() < p.1.mass() {
                is_open[i] = true;
            }
        }
    }
    if ufl.n_clients() == 0 {
        return Vec::new();
    }
    (0..ufl.n_facilities()).filter(|&i| is_open[i]).collect()
}

fn open_fallback(ufl: &UflInstance, cl: &Clustering) -> Vec<usize> {
    if ufl.n_clients() == 0 {
        return Vec::new();
    }
    let mut is_open: Vec<bool> = cl.y_bar.iter().map(|&y| y >= 0.5).collect();
    for &c in &cl.centers {
        let cheapest = cl.close[c]
            .iter()
            .map(|&p| cl.pieces[p].facility)
            .min_by(|&a, &b| ufl.opening_cost(a).total_cmp(&ufl.opening_cost(b)).then(a.cmp(&b)))
            .expect("close sets are nonempty");
        is_open[cheapest] = true;
    }
    (0..ufl.n_facilities()).filter(|&i| is_open[i]).collect()
}

/// `λ·open(y) + (1 + 2/e^λ)·conn(x)`, the expected-cost bound of the rounding.
pub fn bifactor_bound(ufl: &UflInstance, frac: &UflFractional, lambda: f64) -> f64 {
    lambda * frac.opening_cost(ufl) + (1.0 + 2.0 * (-lambda).exp()) * frac.connection_cost(ufl)
}

/// A random metric UFL instance: points in the unit square scaled by `box_size`.
pub fn generate_ufl(n_fac: usize, n_cli: usize, box_size: f64, seed: u64) -> UflInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fac: Vec<(f64, f64)> = (0..n_fac).map(|_| (rng.gen::<f64>() * box_size, rng.gen::<f64>() * box_size)).collect();
    let cli: Vec<(f64, f64)> = (0..n_cli).map(|_| (rng.gen::<f64>() * box_size, rng.gen::<f64>() * box_size)).collect();
    let opening = (0..n_fac).map(|_| rng.gen::<f64>() * box_size).collect();
    let cost =
        fac.iter().map(|a| cli.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect()).collect();
    UflInstance { opening_costs: opening, cost }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integral(nf: usize, nc: usize, open: &[usize], assign: &[usize]) -> UflFractional {
        let mut x = vec![vec![0.0; nc]; nf];
        for (j, &i) in assign.iter().enumerate() {
            x[i][j] = 1.0;
        }
        let y = (0..nf).map(|i| if open.contains(&i) { 1.0 } else { 0.0 }).collect();
        UflFractional { x, y }
    }

    #[test]
    fn single_pair_costs_seven() {
        let ufl = UflInstance::new(vec![2.0], vec![vec![5.0]]).unwrap();
        let frac = integral(1, 1, &[0], &[0]);
        for seed in 0..20 {
            assert_eq!(round_bifactor(&ufl, &frac, 2.0, seed).unwrap().total(), 7.0);
        }
    }

    #[test]
    fn integral_inputs_round_to_themselves() {
        let ufl = generate_ufl(4, 6, 10.0, 3);
        let open = [1, 3];
        let assign: Vec<usize> = (0..6).map(|j| if ufl.cost(1, j) <= ufl.cost(3, j) { 1 } else { 3 }).collect();
        let frac = integral(4, 6, &open, &assign);
        for seed in 0..20 {
            let sol = round_bifactor(&ufl, &frac, 1.934, seed).unwrap();
            assert_eq!(sol.open_set, vec![1, 3]);
            assert_eq!(sol.assignment, assign);
        }
    }

    #[test]
    fn preconditions() {
        let ufl = UflInstance::new(vec![2.0], vec![vec![5.0]]).unwrap();
        let frac = integral(1, 1, &[0], &[0]);
        assert!(matches!(round_bifactor(&ufl, &frac, 1.5, 0), Err(FlmError::Precondition(_))));
        let bad = UflFractional { x: vec![vec![0.5]], y: vec![1.0] };
        assert!(matches!(round_bifactor(&ufl, &bad, 2.0, 0), Err(FlmError::Feasibility(_))));
    }

    #[test]
    fn three_hop_detection() {
        let ufl = UflInstance::new(vec![0.0, 0.0], vec![vec![10.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!(!validate_three_hop(&ufl).is_empty());
        assert!(validate_three_hop(&generate_ufl(3, 4, 5.0, 1)).is_empty());
    }

    #[test]
    fn close_sets_have_unit_mass_and_centers_are_disjoint() {
        let ufl = generate_ufl(4, 5, 10.0, 9);
        let y = vec![0.3, 0.3, 0.2, 0.2];
        let x = (0..4).map(|i| vec![y[i]; 5]).collect();
        let frac = UflFractional { x, y };
        let cl = cluster(&ufl, &frac, 1.934).unwrap();
        for j in 0..5 {
            let m: f64 = cl.close[j].iter().map(|&p| cl.pieces[p].mass()).sum();
            assert!((m - 1.0).abs() < 1e-9);
        }
        let mut owner = vec![None; cl.pieces.len()];
        for &c in &cl.centers {
            for &p in &cl.close[c] {
                assert!(owner[p].is_none());
                owner[p] = Some(c);
            }
        }
    }

    #[test]
    fn seeds_are_reproducible() {
        let ufl = generate_ufl(5, 7, 10.0, 4);
        let y = vec![0.2; 5];
        let x = (0..5).map(|_| vec![0.2; 7]).collect();
        let frac = UflFractional { x, y };
        let a = round_bifactor(&ufl, &frac, 1.934, 11).unwrap();
        let b = round_bifactor(&ufl, &frac, 1.934, 11).unwrap();
        assert_eq!(a, b);
        let c = round_with_mode(&ufl, &frac, 1.934, 0, RoundingMode::DeterministicFallback).unwrap();
        assert!(!c.open_set.is_empty());
    }

    #[test]
    fn meta_clients_use_pair_distances() {
        let inst = FlmInstance::new(
            vec![crate::instance::Facility { label: None, opening_cost: 1.0 }],
            vec![Default::default(), Default::default()],
            vec![vec![0.0, 0.0, 4.0], vec![0.0, 0.0, 4.0], vec![4.0, 4.0, 0.0]],
            vec![(0, 1)],
        )
        .unwrap();
        let ufl = build_meta_client_ufl(&inst, &[0]);
        assert_eq!(ufl.cost(0, 0), 4.0);
        assert_eq!(build_meta_client_ufl(&inst, &[]).n_clients(), 0);
    }
}
