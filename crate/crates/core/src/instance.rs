//! Instance data model: facilities, clients, the metric over both, and the
//! compatibility graph on clients.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FlmError, Result};
use crate::matching::{self, Graph};
use crate::rounding::UflInstance;

/// Absolute tolerance for every metric check.
pub const METRIC_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct Facility {
    pub label: Option<String>,
    pub opening_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Client {
    pub label: Option<String>,
}

/// A facility-location-with-matching instance.
///
/// The metric is a dense symmetric matrix over `facilities ++ clients`:
/// facility `i` is row `i`, client `j` is row `n_facilities + j`.
/// Edges are unordered client pairs stored as `(min, max)`; the position of
/// an edge in [`FlmInstance::edges`] is its edge index everywhere else.
#[derive(Clone, Debug, PartialEq)]
pub struct FlmInstance {
    facilities: Vec<Facility>,
    clients: Vec<Client>,
    metric: Vec<f64>,
    edges: Vec<(usize, usize)>,
}

/// What [`FlmInstance::set_distance`] measures against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Client(usize),
    Pair(usize, usize),
}

impl FlmInstance {
    /// Builds an instance, checking only shapes and index ranges. Semantic
    /// problems (triangle inequality, duplicate edges, negative costs) are
    /// reported by [`validate_instance`] instead.
    pub fn new(
        facilities: Vec<Facility>,
        clients: Vec<Client>,
        metric: Vec<Vec<f64>>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = facilities.len() + clients.len();
        if metric.len() != n || metric.iter().any(|row| row.len() != n) {
            return Err(FlmError::Precondition(format!("metric must be {n}x{n} (facilities then clients)")));
        }
        for &(j, k) in &edges {
            if j >= clients.len() || k >= clients.len() {
                return Err(FlmError::Identifier(format!(
                    "edge ({j},{k}) references a client outside 0..{}",
                    clients.len()
                )));
            }
        }
        let edges = edges.into_iter().map(|(j, k)| (j.min(k), j.max(k))).collect();
        Ok(Self { facilities, clients, metric: metric.into_iter().flatten().collect(), edges })
    }

    pub fn n_facilities(&self) -> usize {
        self.facilities.len()
    }

    pub fn n_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn facilities(&self) -> &[Facility] {
        &self.facilities
    }

    pub fn clients(&self) -> &[Client] {
        &self.clients
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn opening_cost(&self, i: usize) -> f64 {
        self.facilities[i].opening_cost
    }

    fn points(&self) -> usize {
        self.facilities.len() + self.clients.len()
    }

    /// Raw metric lookup over the combined index space.
    pub fn metric(&self, a: usize, b: usize) -> f64 {
        self.metric[a * self.points() + b]
    }

    fn client_point(&self, j: usize) -> usize {
        self.facilities.len() + j
    }

    /// d(i, j) for facility `i` and client `j`.
    pub fn facility_client(&self, i: usize, j: usize) -> f64 {
        self.metric(i, self.client_point(j))
    }

    /// d(j, k) between two clients.
    pub fn client_client(&self, j: usize, k: usize) -> f64 {
        self.metric(self.client_point(j), self.client_point(k))
    }

    /// d(i, e) = d(i, j) + d(i, k) for the edge with index `e`.
    pub fn edge_pair_distance(&self, i: usize, e: usize) -> f64 {
        let (j, k) = self.edges[e];
        self.facility_client(i, j) + self.facility_client(i, k)
    }

    /// d(e) = d(j, k) for the edge with index `e`.
    pub fn edge_length(&self, e: usize) -> f64 {
        let (j, k) = self.edges[e];
        self.client_client(j, k)
    }

    /// d(i, {j, k}) for an arbitrary client pair, with identifier checks.
    pub fn pair_distance(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_facility(i)?;
        self.check_client(j)?;
        self.check_client(k)?;
        Ok(self.facility_client(i, j) + self.facility_client(i, k))
    }

    /// Minimum distance from a facility subset to a client or client pair,
    /// with the minimizing facility (lowest index on ties).
    pub fn set_distance(&self, subset: &[usize], target: Target) -> Result<(f64, usize)> {
        if subset.is_empty() {
            return Err(FlmError::Precondition("set distance from an empty facility set".into()));
        }
        let mut best: Option<(f64, usize)> = None;
        for &i in subset {
            let d = match target {
                Target::Client(j) => {
                    self.check_facility(i)?;
                    self.check_client(j)?;
                    self.facility_client(i, j)
                }
                Target::Pair(j, k) => self.pair_distance(i, j, k)?,
            };
            best = match best {
                Some((bd, bi)) if bd < d || (bd == d && bi < i) => Some((bd, bi)),
                _ => Some((d, i)),
            };
        }
        Ok(best.expect("nonempty subset"))
    }

    /// `set_distance` for an edge index, without identifier checks.
    pub fn edge_set_distance(&self, subset: &[usize], e: usize) -> (f64, usize) {
        let mut best = (f64::INFINITY, usize::MAX);
        for &i in subset {
            let d = self.edge_pair_distance(i, e);
            if d < best.0 || (d == best.0 && i < best.1) {
                best = (d, i);
            }
        }
        best
    }

    pub fn check_facility(&self, i: usize) -> Result<()> {
        if i < self.facilities.len() {
            Ok(())
        } else {
            Err(FlmError::Identifier(format!("facility {i}")))
        }
    }

    pub fn check_client(&self, j: usize) -> Result<()> {
        if j < self.clients.len() {
            Ok(())
        } else {
            Err(FlmError::Identifier(format!("client {j}")))
        }
    }

    /// The compatibility graph, with edge indices matching [`Self::edges`].
    pub fn graph(&self) -> Graph {
        Graph::from_edges_unchecked(self.clients.len(), self.edges.clone())
    }

    /// Edge index lookup for a client pair in either orientation.
    pub fn edge_index(&self) -> HashMap<(usize, usize), usize> {
        self.edges.iter().enumerate().map(|(e, &p)| (p, e)).collect()
    }

    /// Maximum matching size of the compatibility graph.
    pub fn nu(&self) -> usize {
        matching::nu(&self.graph())
    }
}

/// Returns every invariant violation of `inst`; empty when the instance is valid.
pub fn validate_instance(inst: &FlmInstance) -> Vec<String> {
    let mut out = Vec::new();
    let n = inst.points();
    for a in 0..n {
        for b in 0..n {
            let d = inst.metric(a, b);
            if !d.is_finite() {
                out.push(format!("metric entry ({a},{b}) is not finite"));
                continue;
            }
            if d < -METRIC_TOL {
                out.push(format!("negative distance at ({a},{b}): {d}"));
            }
            if a == b && d.abs() > METRIC_TOL {
                out.push(format!("nonzero diagonal at {a}: {d}"));
            }
            if a < b && (d - inst.metric(b, a)).abs() > METRIC_TOL {
                out.push(format!("asymmetric metric at ({a},{b})"));
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            let ab = inst.metric(a, b);
            for c in 0..n {
                if a == c || a == b || b == c {
                    continue;
                }
                if a < c && inst.metric(a, c) > ab + inst.metric(b, c) + METRIC_TOL {
                    out.push(format!(
                        "triangle inequality violated for triple ({a},{b},{c}): d({a},{c})={} > d({a},{b})+d({b},{c})={}",
                        inst.metric(a, c),
                        ab + inst.metric(b, c)
                    ));
                }
            }
        }
    }
    let mut seen = HashMap::new();
    for (e, &(j, k)) in inst.edges.iter().enumerate() {
        if j == k {
            out.push(format!("self-loop edge {e} at client {j}"));
        }
        if let Some(prev) = seen.insert((j, k), e) {
            out.push(format!("duplicate edge {e} repeats edge {prev} ({j},{k})"));
        }
    }
    for (i, f) in inst.facilities.iter().enumerate() {
        if !(f.opening_cost >= 0.0) {
            out.push(format!("negative opening cost at facility {i}: {}", f.opening_cost));
        }
    }
    out
}

/// An integral solution `(S, M, σ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlmSolution {
    pub open_set: Vec<usize>,
    pub matching: Vec<(usize, usize)>,
    /// `assignment[t]` serves `matching[t]`.
    pub assignment: Vec<usize>,
    pub opening_cost_total: f64,
    pub connection_cost_total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub opening: f64,
    pub connection: f64,
}

impl FlmSolution {
    /// Builds a solution from edge indices and fills in the cost totals.
    pub fn from_edges(
        inst: &FlmInstance,
        mut open_set: Vec<usize>,
        matching_edges: &[usize],
        assignment: Vec<usize>,
    ) -> Self {
        open_set.sort_unstable();
        open_set.dedup();
        let opening = open_set.iter().map(|&i| inst.opening_cost(i)).sum();
        let connection = matching_edges.iter().zip(&assignment).map(|(&e, &i)| inst.edge_pair_distance(i, e)).sum();
        Self {
            open_set,
            matching: matching_edges.iter().map(|&e| inst.edge(e)).collect(),
            assignment,
            opening_cost_total: opening,
            connection_cost_total: connection,
        }
    }

    pub fn total_cost(&self) -> f64 {
        self.opening_cost_total + self.connection_cost_total
    }

    /// Maps the matched pairs back to edge indices of `inst`.
    pub fn matching_edge_indices(&self, inst: &FlmInstance) -> Result<Vec<usize>> {
        let index = inst.edge_index();
        self.matching
            .iter()
            .map(|&(j, k)| {
                index
                    .get(&(j.min(k), j.max(k)))
                    .copied()
                    .ok_or_else(|| FlmError::Feasibility(format!("pair ({j},{k}) is not a compatible edge")))
            })
            .collect()
    }
}

/// Lists every feasibility problem of `sol` on `inst`, including mismatches
/// between the recorded and recomputed cost totals.
pub fn check_solution(inst: &FlmInstance, sol: &FlmSolution) -> Vec<String> {
    let mut out = Vec::new();
    let index = inst.edge_index();
    let mut covered = vec![false; inst.n_clients()];
    for &(j, k) in &sol.matching {
        if j >= inst.n_clients() || k >= inst.n_clients() {
            out.push(format!("matched pair ({j},{k}) references an unknown client"));
            continue;
        }
        if !index.contains_key(&(j.min(k), j.max(k))) {
            out.push(format!("matched pair ({j},{k}) is not a compatible edge"));
        }
        for v in [j, k] {
            if covered[v] {
                out.push(format!("client {v} is matched twice"));
            }
            covered[v] = true;
        }
    }
    for &i in &sol.open_set {
        if i >= inst.n_facilities() {
            out.push(format!("open facility {i} does not exist"));
        }
    }
    if sol.assignment.len() != sol.matching.len() {
        out.push(format!("assignment has {} entries for {} matched pairs", sol.assignment.len(), sol.matching.len()));
    }
    for (t, &i) in sol.assignment.iter().enumerate() {
        if !sol.open_set.contains(&i) {
            out.push(format!("assignment target not open: pair {t} assigned to facility {i}"));
        }
    }
    let nu = inst.nu();
    if sol.matching.len() < nu {
        out.push(format!("matching not maximum: |M| = {} < nu = {nu}", sol.matching.len()));
    }
    if sol.open_set.is_empty() && nu > 0 {
        out.push("no facility open although the matching is nonempty".into());
    }
    if out.is_empty() {
        let opening: f64 = sol.open_set.iter().map(|&i| inst.opening_cost(i)).sum();
        let connection: f64 = sol
            .matching
            .iter()
            .zip(&sol.assignment)
            .map(|(&(j, k), &i)| inst.facility_client(i, j) + inst.facility_client(i, k))
            .sum();
        let tol = 1e-6 * (1.0 + opening.abs() + connection.abs());
        if (opening - sol.opening_cost_total).abs() > tol {
            out.push(format!("recorded opening cost {} != recomputed {opening}", sol.opening_cost_total));
        }
        if (connection - sol.connection_cost_total).abs() > tol {
            out.push(format!("recorded connection cost {} != recomputed {connection}", sol.connection_cost_total));
        }
    }
    out
}

/// Recomputes the cost of a solution after checking it is feasible.
pub fn solution_cost(inst: &FlmInstance, sol: &FlmSolution) -> Result<CostBreakdown> {
    let index = inst.edge_index();
    let mut covered = vec![false; inst.n_clients()];
    let mut opening = 0.0;
    for &i in &sol.open_set {
        inst.check_facility(i)?;
        opening += inst.opening_cost(i);
    }
    if sol.assignment.len() != sol.matching.len() {
        return Err(FlmError::Feasibility("assignment and matching lengths differ".into()));
    }
    let mut connection = 0.0;
    for (&(j, k), &i) in sol.matching.iter().zip(&sol.assignment) {
        inst.check_client(j)?;
        inst.check_client(k)?;
        if !index.contains_key(&(j.min(k), j.max(k))) {
            return Err(FlmError::Feasibility(format!("pair ({j},{k}) is not a compatible edge")));
        }
        for v in [j, k] {
            if std::mem::replace(&mut covered[v], true) {
                return Err(FlmError::Feasibility(format!("client {v} is matched twice")));
            }
        }
        if !sol.open_set.contains(&i) {
            return Err(FlmError::Feasibility(format!("assignment target not open: facility {i}")));
        }
        connection += inst.facility_client(i, j) + inst.facility_client(i, k);
    }
    let nu = inst.nu();
    if sol.matching.len() < nu {
        return Err(FlmError::Feasibility(format!("matching not maximum: |M| = {} < nu = {nu}", sol.matching.len())));
    }
    if sol.open_set.is_empty() && nu > 0 {
        return Err(FlmError::Feasibility("no facility open".into()));
    }
    Ok(CostBreakdown { total: opening + connection, opening, connection })
}

/// Reduces UFL to FLM: every client gets a co-located copy compatible only
/// with its original, and opening costs double. FLM costs are then exactly
/// twice the corresponding UFL costs.
///
/// The UFL instance only carries facility-client costs, so the full metric is
/// the shortest-path closure of the bipartite cost graph, which agrees with
/// the given costs whenever they satisfy the three-hop inequality.
pub fn reduce_ufl_to_flm(ufl: &UflInstance) -> FlmInstance {
    let nf = ufl.n_facilities();
    let nc = ufl.n_clients();
    let n = nf + 2 * nc;
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (a, row) in d.iter_mut().enumerate() {
        row[a] = 0.0;
    }
    for i in 0..nf {
        for j in 0..nc {
            let c = ufl.cost(i, j);
            for p in [nf + 2 * j, nf + 2 * j + 1] {
                d[i][p] = d[i][p].min(c);
                d[p][i] = d[p][i].min(c);
            }
        }
    }
    for j in 0..nc {
        let (a, b) = (nf + 2 * j, nf + 2 * j + 1);
        d[a][b] = 0.0;
        d[b][a] = 0.0;
    }
    for k in 0..n {
        for a in 0..n {
            let dak = d[a][k];
            if !dak.is_finite() {
                continue;
            }
            for b in 0..n {
                let cand = dak + d[k][b];
                if cand < d[a][b] {
                    d[a][b] = cand;
                }
            }
        }
    }
    // Disconnected pieces (no facilities) still need finite distances.
    for row in &mut d {
        for v in row.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
    }
    let facilities = (0..nf).map(|i| Facility { label: None, opening_cost: 2.0 * ufl.opening_cost(i) }).collect();
    let clients = (0..2 * nc).map(|_| Client::default()).collect();
    let edges = (0..nc).map(|j| (2 * j, 2 * j + 1)).collect();
    FlmInstance::new(facilities, clients, d, edges).expect("reduction builds consistent shapes")
}

/// Uniform random points in `[0, box_size]^2` with Euclidean distances.
/// Facilities occupy the first `n_fac` points. Each client pair becomes
/// compatible independently with `edge_probability`.
pub fn generate_euclidean(
    n_fac: usize,
    n_cli: usize,
    edge_probability: f64,
    box_size: f64,
    seed: u64,
) -> Result<FlmInstance> {
    if n_fac == 0 {
        return Err(FlmError::Precondition("at least one facility is required".into()));
    }
    if !(0.0..=1.0).contains(&edge_probability) {
        return Err(FlmError::Precondition(format!("edge probability {edge_probability} outside [0,1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (facilities, metric) = random_points(&mut rng, n_fac, n_cli, box_size);
    let mut edges = Vec::new();
    for j in 0..n_cli {
        for k in j + 1..n_cli {
            if rng.gen::<f64>() < edge_probability {
                edges.push((j, k));
            }
        }
    }
    FlmInstance::new(facilities, vec![Client::default(); n_cli], metric, edges)
}

/// Like [`generate_euclidean`] but with a planted random perfect matching, so
/// the compatibility graph is always perfectly matchable. `n_cli` must be even.
pub fn generate_euclidean_perfect(
    n_fac: usize,
    n_cli: usize,
    edge_probability: f64,
    box_size: f64,
    seed: u64,
) -> Result<FlmInstance> {
    if !n_cli.is_multiple_of(2) {
        return Err(FlmError::Precondition("a perfectly matchable graph needs an even client count".into()));
    }
    let base = generate_euclidean(n_fac, n_cli, edge_probability, box_size, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..n_cli).collect();
    order.shuffle(&mut rng);
    let mut edges = base.edges.clone();
    for pair in order.chunks(2) {
        let e = (pair[0].min(pair[1]), pair[0].max(pair[1]));
        if !edges.contains(&e) {
            edges.push(e);
        }
    }
    edges.sort_unstable();
    Ok(FlmInstance { edges, ..base })
}

fn random_points(rng: &mut ChaCha8Rng, n_fac: usize, n_cli: usize, box_size: f64) -> (Vec<Facility>, Vec<Vec<f64>>) {
    let n = n_fac + n_cli;
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>() * box_size, rng.gen::<f64>() * box_size)).collect();
    let facilities = (0..n_fac).map(|_| Facility { label: None, opening_cost: rng.gen::<f64>() * box_size }).collect();
    let metric =
        pts.iter().map(|a| pts.iter().map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()).collect()).collect();
    (facilities, metric)
}

/// Named hand-checkable instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fixture {
    /// Two free facilities 10 apart, three clients on each, all compatible.
    Gap2Fac,
    /// One unit-cost facility with four co-located, mutually compatible clients.
    ColocatedUnit,
    /// Unit triangle of compatible clients, one free facility at distance 1 from each.
    Triangle32,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Gap2Fac, Fixture::ColocatedUnit, Fixture::Triangle32];

    pub fn name(self) -> &'static str {
        match self {
            Fixture::Gap2Fac => "gap-2fac",
            Fixture::ColocatedUnit => "colocated-unit",
            Fixture::Triangle32 => "triangle-3-2",
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = FlmError;

    fn from_str(s: &str) -> Result<Self> {
        Fixture::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| FlmError::UnknownFixture(s.to_string()))
    }
}

/// Distance between the two groups of the `gap-2fac` fixture.
pub const GAP_FIXTURE_DISTANCE: f64 = 10.0;

pub fn fixture(name: &str) -> Result<FlmInstance> {
    Ok(build_fixture(name.parse()?))
}

pub fn build_fixture(which: Fixture) -> FlmInstance {
    let labeled =
        |prefix: &str, n: usize| -> Vec<Option<String>> { (1..=n).map(|t| Some(format!("{prefix}{t}"))).collect() };
    match which {
        Fixture::Gap2Fac => {
            // points: i1, i2, j1..j3, k1..k3; group 0 at the origin, group 1 far away
            let group = [0, 1, 0, 0, 0, 1, 1, 1];
            let metric = group
                .iter()
                .map(|a| group.iter().map(|b| if a == b { 0.0 } else { GAP_FIXTURE_DISTANCE }).collect())
                .collect();
            let facilities = labeled("i", 2).into_iter().map(|label| Facility { label, opening_cost: 0.0 }).collect();
            let mut clients: Vec<Client> = labeled("j", 3).into_iter().map(|label| Client { label }).collect();
            clients.extend(labeled("k", 3).into_iter().map(|label| Client { label }));
            FlmInstance::new(facilities, clients, metric, complete_graph(6)).expect("fixture shape")
        }
        Fixture::ColocatedUnit => {
            let facilities = vec![Facility { label: Some("i".into()), opening_cost: 1.0 }];
            let clients = labeled("j", 4).into_iter().map(|label| Client { label }).collect();
            FlmInstance::new(facilities, clients, vec![vec![0.0; 5]; 5], complete_graph(4)).expect("fixture shape")
        }
        Fixture::Triangle32 => {
            let facilities = vec![Facility { label: Some("i".into()), opening_cost: 0.0 }];
            let clients = labeled("v", 3).into_iter().map(|label| Client { label }).collect();
            let metric = (0..4).map(|a| (0..4).map(|b| if a == b { 0.0 } else { 1.0 }).collect()).collect();
            FlmInstance::new(facilities, clients, metric, complete_graph(3)).expect("fixture shape")
        }
    }
}

fn complete_graph(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|j| (j + 1..n).map(move |k| (j, k))).collect()
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
struct FacilityDoc {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    opening_cost: f64,
}

#[derive(Serialize, Deserialize)]
struct ClientDoc {
    id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    facilities: Vec<FacilityDoc>,
    clients: Vec<ClientDoc>,
    metric: Vec<Vec<f64>>,
    edges: Vec<[usize; 2]>,
}

impl FlmInstance {
    pub fn to_json(&self) -> String {
        let n = self.points();
        let doc = InstanceDoc {
            facilities: self
                .facilities
                .iter()
                .enumerate()
                .map(|(id, f)| FacilityDoc { id, label: f.label.clone(), opening_cost: f.opening_cost })
                .collect(),
            clients: self.clients.iter().enumerate().map(|(id, c)| ClientDoc { id, label: c.label.clone() }).collect(),
            metric: self.metric.chunks(n.max(1)).take(n).map(|r| r.to_vec()).collect(),
            edges: self.edges.iter().map(|&(j, k)| [j, k]).collect(),
        };
        serde_json::to_string_pretty(&doc).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_str(text)?;
        for (pos, f) in doc.facilities.iter().enumerate() {
            if f.id != pos {
                return Err(FlmError::Identifier(format!("facility id {} at position {pos}", f.id)));
            }
        }
        for (pos, c) in doc.clients.iter().enumerate() {
            if c.id != pos {
                return Err(FlmError::Identifier(format!("client id {} at position {pos}", c.id)));
            }
        }
        let facilities =
            doc.facilities.into_iter().map(|f| Facility { label: f.label, opening_cost: f.opening_cost }).collect();
        let clients = doc.clients.into_iter().map(|c| Client { label: c.label }).collect();
        let inst = Self::new(facilities, clients, doc.metric, doc.edges.into_iter().map(|[j, k]| (j, k)).collect())?;
        Ok(inst)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip_ws(s: &str) -> String {
        s.chars().filter(|c| !c.is_whitespace()).collect()
    }

    #[test]
    fn broken_triangle_is_named() {
        // a and b coincide, but c is 3 from a and 5 from b
        let facilities = vec![Facility { label: None, opening_cost: 0.0 }];
        let metric = vec![vec![0.0, 0.0, 3.0], vec![0.0, 0.0, 5.0], vec![3.0, 5.0, 0.0]];
        let inst = FlmInstance::new(facilities, vec![Client::default(); 2], metric, vec![]).unwrap();
        let v = validate_instance(&inst);
        assert!(v.iter().any(|s| s.contains("triangle") && s.contains("(1,0,2)")), "{v:?}");
    }

    #[test]
    fn negative_opening_cost_reported() {
        let facilities = vec![Facility { label: None, opening_cost: -1.0 }];
        let inst = FlmInstance::new(facilities, vec![], vec![vec![0.0]], vec![]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("negative opening cost"));
    }

    #[test]
    fn duplicate_and_loop_edges_reported() {
        let facilities = vec![Facility { label: None, opening_cost: 0.0 }];
        let inst = FlmInstance::new(
            facilities,
            vec![Client::default(); 2],
            vec![vec![0.0; 3]; 3],
            vec![(0, 1), (1, 0), (1, 1)],
        )
        .unwrap();
        let v = validate_instance(&inst);
        assert!(v.iter().any(|s| s.contains("duplicate")));
        assert!(v.iter().any(|s| s.contains("self-loop")));
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..20 {
            let inst = generate_euclidean(3, 7, 0.5, 10.0, seed).unwrap();
            assert!(validate_instance(&inst).is_empty());
            let inst = generate_euclidean_perfect(2, 6, 0.3, 10.0, seed).unwrap();
            assert!(validate_instance(&inst).is_empty());
            assert_eq!(inst.nu(), 3);
        }
    }

    #[test]
    fn generator_is_deterministic_and_respects_probability() {
        let a = generate_euclidean(4, 10, 0.5, 100.0, 7).unwrap();
        let b = generate_euclidean(4, 10, 0.5, 100.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let full = generate_euclidean(2, 6, 1.0, 10.0, 1).unwrap();
        assert_eq!(full.n_edges(), 15);
        let empty = generate_euclidean(2, 6, 0.0, 10.0, 1).unwrap();
        assert_eq!(empty.n_edges(), 0);
        assert_eq!(empty.nu(), 0);
        assert!(generate_euclidean(0, 3, 0.5, 1.0, 0).is_err());
        assert!(generate_euclidean(1, 3, 1.5, 1.0, 0).is_err());
    }

    #[test]
    fn pair_and_set_distances() {
        let facilities = vec![Facility { label: None, opening_cost: 0.0 }, Facility { label: None, opening_cost: 0.0 }];
        // points: i1, i2, j, k
        let metric = vec![
            vec![0.0, 2.0, 2.0, 3.0],
            vec![2.0, 0.0, 4.0, 4.0],
            vec![2.0, 4.0, 0.0, 1.0],
            vec![3.0, 4.0, 1.0, 0.0],
        ];
        let inst = FlmInstance::new(facilities, vec![Client::default(); 2], metric, vec![(0, 1)]).unwrap();
        assert_eq!(inst.pair_distance(0, 0, 1).unwrap(), 5.0);
        assert!(matches!(inst.pair_distance(5, 0, 1), Err(FlmError::Identifier(_))));
        assert_eq!(inst.edge_length(0), 1.0);
        assert_eq!(inst.set_distance(&[0, 1], Target::Client(0)).unwrap(), (2.0, 0));
        // client 1 is nearer to facility 0 (3) than to facility 1 (4)
        assert_eq!(inst.set_distance(&[1, 0], Target::Client(1)).unwrap(), (3.0, 0));
        assert!(inst.set_distance(&[], Target::Client(0)).is_err());
    }

    #[test]
    fn set_distance_tie_breaks_low_index() {
        let facilities = vec![Facility { label: None, opening_cost: 0.0 }; 2];
        let metric = vec![vec![0.0, 0.0, 4.0], vec![0.0, 0.0, 4.0], vec![4.0, 4.0, 0.0]];
        let inst = FlmInstance::new(facilities, vec![Client::default()], metric, vec![]).unwrap();
        assert_eq!(inst.set_distance(&[1, 0], Target::Client(0)).unwrap(), (4.0, 0));
    }

    #[test]
    fn colocated_pair_distance_is_zero() {
        let inst = build_fixture(Fixture::ColocatedUnit);
        assert_eq!(inst.edge_pair_distance(0, 0), 0.0);
    }

    #[test]
    fn fixtures_have_expected_shape() {
        let gap = build_fixture(Fixture::Gap2Fac);
        assert_eq!((gap.n_facilities(), gap.n_clients(), gap.n_edges()), (2, 6, 15));
        assert_eq!(gap.nu(), 3);
        let e = gap.edge_index()[&(0, 3)];
        assert_eq!(gap.set_distance(&[0, 1], Target::Pair(0, 3)).unwrap(), (10.0, 0));
        assert_eq!(gap.edge_set_distance(&[0, 1], e).0, 10.0);
        let col = build_fixture(Fixture::ColocatedUnit);
        assert_eq!((col.n_facilities(), col.n_clients(), col.n_edges()), (1, 4, 6));
        assert_eq!(col.nu(), 2);
        let tri = build_fixture(Fixture::Triangle32);
        assert_eq!(tri.nu(), 1);
        for f in Fixture::ALL {
            assert!(validate_instance(&build_fixture(f)).is_empty(), "{f}");
            assert_eq!(fixture(f.name()).unwrap(), build_fixture(f));
        }
        assert!(matches!(fixture("nope"), Err(FlmError::UnknownFixture(_))));
    }

    #[test]
    fn solution_cost_of_trivial_solutions() {
        let facilities = vec![Facility { label: None, opening_cost: 7.0 }];
        let inst = FlmInstance::new(facilities, vec![Client::default(); 2], vec![vec![0.0; 3]; 3], vec![]).unwrap();
        let sol = FlmSolution::from_edges(&inst, vec![0], &[], vec![]);
        let c = solution_cost(&inst, &sol).unwrap();
        assert_eq!((c.total, c.opening, c.connection), (7.0, 7.0, 0.0));
    }

    #[test]
    fn solution_cost_rejects_infeasible() {
        let inst = build_fixture(Fixture::Gap2Fac);
        let idx = inst.edge_index();
        let m = [idx[&(0, 1)], idx[&(2, 3)], idx[&(4, 5)]];
        let sol = FlmSolution::from_edges(&inst, vec![0, 1], &m, vec![0, 0, 1]);
        let c = solution_cost(&inst, &sol).unwrap();
        assert!((c.total - 10.0).abs() < 1e-12);
        assert!(check_solution(&inst, &sol).is_empty());

        let mut closed = sol.clone();
        closed.open_set = vec![0];
        assert!(matches!(solution_cost(&inst, &closed), Err(FlmError::Feasibility(_))));
        assert!(check_solution(&inst, &closed).iter().any(|s| s.contains("assignment target not open")));

        let short = FlmSolution::from_edges(&inst, vec![0, 1], &m[..2], vec![0, 0]);
        assert!(matches!(solution_cost(&inst, &short), Err(FlmError::Feasibility(_))));
        assert!(check_solution(&inst, &short).iter().any(|s| s.contains("matching not maximum")));
    }

    #[test]
    fn ufl_reduction_structure() {
        let ufl = UflInstance::new(vec![3.0], vec![vec![2.0]]).unwrap();
        let flm = reduce_ufl_to_flm(&ufl);
        assert_eq!(flm.n_clients(), 2);
        assert_eq!(flm.n_edges(), 1);
        assert_eq!(flm.opening_cost(0), 6.0);
        assert_eq!(flm.client_client(0, 1), 0.0);
        assert_eq!(flm.edge_pair_distance(0, 0), 4.0);
        assert!(validate_instance(&flm).is_empty());

        let ufl = UflInstance::new(vec![1.0, 2.0], vec![vec![1.0, 4.0], vec![3.0, 2.0]]).unwrap();
        let flm = reduce_ufl_to_flm(&ufl);
        assert_eq!((flm.n_clients(), flm.n_edges(), flm.nu()), (4, 2, 2));
        assert!(validate_instance(&flm).is_empty());
    }

    #[test]
    fn json_round_trip_is_exact() {
        for inst in [build_fixture(Fixture::Gap2Fac), generate_euclidean(3, 5, 0.6, 10.0, 3).unwrap()] {
            let text = inst.to_json();
            let back = FlmInstance::from_json(&text).unwrap();
            assert_eq!(back, inst);
            assert_eq!(strip_ws(&back.to_json()), strip_ws(&text));
        }
        let compact = r#"{"facilities":[{"id":0,"opening_cost":1.5}],"clients":[{"id":0,"label":"a"},{"id":1}],
            "metric":[[0.0,1.0,2.0],[1.0,0.0,1.0],[2.0,1.0,0.0]],"edges":[[0,1]]}"#;
        let inst = FlmInstance::from_json(compact).unwrap();
        assert_eq!(strip_ws(&inst.to_json()), strip_ws(compact));
    }

    #[test]
    fn json_rejects_out_of_order_ids() {
        let text = r#"{"facilities":[{"id":1,"opening_cost":1.0}],"clients":[],"metric":[[0.0]],"edges":[]}"#;
        assert!(matches!(FlmInstance::from_json(text), Err(FlmError::Identifier(_))));
    }
}
