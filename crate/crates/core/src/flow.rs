//! Flows, their costs, and ε-Nash verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, simple_paths, topological_order, Adjacency, Path, Step};
use crate::instance::Instance;

/// Absolute tolerance used for every cost comparison.
pub const COST_TOL: f64 = 1e-9;

/// Path-count guard for the exhaustive verifier.
pub const EXHAUSTIVE_PATH_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathFlowWire {
    source: usize,
    nodes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<usize>>,
    amount: f64,
}

/// `amount` units of the demand at `source` routed along `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "PathFlowWire", into = "PathFlowWire")]
pub struct PathFlow {
    pub source: usize,
    pub path: Path,
    pub amount: f64,
}

impl From<PathFlowWire> for PathFlow {
    fn from(w: PathFlowWire) -> Self {
        PathFlow {
            source: w.source,
            path: Path { nodes: w.nodes, edges: w.edges.unwrap_or_default() },
            amount: w.amount,
        }
    }
}

impl From<PathFlow> for PathFlowWire {
    fn from(p: PathFlow) -> Self {
        PathFlowWire {
            source: p.source,
            nodes: p.path.nodes,
            edges: Some(p.path.edges),
            amount: p.amount,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PathAssignment {
    pub entries: Vec<PathFlow>,
}

impl PathAssignment {
    pub fn push(&mut self, source: usize, path: Path, amount: f64) {
        self.entries.push(PathFlow { source, path, amount });
    }
}

/// Aggregate per-edge flow. For undirected instances `forward` counts
/// traversals from the stored `u` to `v` and `backward` the opposite; the
/// two add up in `total` and never cancel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeFlow {
    pub total: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
}

impl EdgeFlow {
    pub fn zero(m: usize) -> Self {
        EdgeFlow { total: vec![0.0; m], forward: vec![0.0; m], backward: vec![0.0; m] }
    }

    /// Adds `amount` along an already validated path.
    pub fn add_path(&mut self, inst: &Instance, path: &Path, amount: f64) {
        for (i, &e) in path.edges.iter().enumerate() {
            self.total[e] += amount;
            if path.nodes[i] == inst.edges[e].u {
                self.forward[e] += amount;
            } else {
                self.backward[e] += amount;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solution {
    pub facilities: Vec<usize>,
    #[serde(rename = "paths")]
    pub assignment: PathAssignment,
}

impl Solution {
    pub fn new(mut facilities: Vec<usize>, assignment: PathAssignment) -> Self {
        facilities.sort_unstable();
        facilities.dedup();
        Solution { facilities, assignment }
    }

    /// Parses `{"facilities": [...], "paths": [...]}`. Paths given only as
    /// node sequences are resolved against the instance, picking the
    /// lowest-index edge between consecutive nodes.
    pub fn from_json(s: &str, inst: &Instance) -> Result<Self> {
        let mut sol: Solution = serde_json::from_str(s)?;
        for (i, pf) in sol.assignment.entries.iter_mut().enumerate() {
            if pf.path.nodes.is_empty() {
                return Err(Error::InvalidPath { entry: i, reason: "path has no nodes".into() });
            }
            if pf.path.edges.len() + 1 != pf.path.nodes.len() {
                pf.path.edges = resolve_edges(inst, &pf.path.nodes)
                    .map_err(|reason| Error::InvalidPath { entry: i, reason })?;
            }
        }
        Ok(Solution::new(sol.facilities, sol.assignment))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("solution serializes")
    }

    pub fn facility_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &f in &self.facilities {
            if f < n {
                mask[f] = true;
            }
        }
        mask
    }
}

fn resolve_edges(inst: &Instance, nodes: &[usize]) -> std::result::Result<Vec<usize>, String> {
    nodes
        .windows(2)
        .map(|w| {
            inst.edges
                .iter()
                .position(|e| {
                    (e.u == w[0] && e.v == w[1]) || (!inst.directed && e.u == w[1] && e.v == w[0])
                })
                .ok_or_else(|| format!("no edge joins {} and {}", w[0], w[1]))
        })
        .collect()
}

fn check_path(inst: &Instance, entry: usize, pf: &PathFlow) -> Result<()> {
    let bad = |reason: String| Error::InvalidPath { entry, reason };
    let p = &pf.path;
    if p.nodes.is_empty() {
        return Err(bad("path has no nodes".into()));
    }
    if p.nodes[0] != pf.source {
        return Err(bad(format!("path starts at {} instead of its source {}", p.nodes[0], pf.source)));
    }
    if p.edges.len() + 1 != p.nodes.len() {
        return Err(bad("edge list does not match node list".into()));
    }
    if !(pf.amount.is_finite() && pf.amount > 0.0) {
        return Err(bad(format!("amount {} is not positive", pf.amount)));
    }
    for (i, &e) in p.edges.iter().enumerate() {
        let (a, b) = (p.nodes[i], p.nodes[i + 1]);
        let edge = inst.edges.get(e).ok_or_else(|| bad(format!("edge index {e} out of range")))?;
        let ok = (edge.u == a && edge.v == b) || (!inst.directed && edge.u == b && edge.v == a);
        if !ok {
            return Err(bad(format!("edge {e} does not join {a} -> {b}")));
        }
    }
    Ok(())
}

/// `x_e = sum_{p : e in p} x_p`.
pub fn edge_flow(inst: &Instance, assignment: &PathAssignment) -> Result<EdgeFlow> {
    let mut ef = EdgeFlow::zero(inst.m());
    for (i, pf) in assignment.entries.iter().enumerate() {
        check_path(inst, i, pf)?;
        ef.add_path(inst, &pf.path, pf.amount);
    }
    Ok(ef)
}

/// `RC(x) = sum_e x_e * l_e(x_e)` over per-edge loads.
pub fn routing_cost_of_loads(inst: &Instance, loads: &[f64]) -> f64 {
    inst.edges
        .iter()
        .zip(loads)
        .map(|(e, &x)| e.cost.eval_total(x.max(0.0)).expect("loads are nonnegative"))
        .sum()
}

pub fn routing_cost(inst: &Instance, ef: &EdgeFlow) -> f64 {
    routing_cost_of_loads(inst, &ef.total)
}

/// Checks the feasibility conditions of a solution: paths end at facilities
/// and every source ships exactly its demand.
pub fn check_feasible(inst: &Instance, sol: &Solution) -> Result<EdgeFlow> {
    if sol.facilities.is_empty() {
        return Err(Error::Infeasible("no facility is open".into()));
    }
    if let Some(&f) = sol.facilities.iter().find(|&&f| f >= inst.n) {
        return Err(Error::Infeasible(format!("facility {f} is not a node")));
    }
    let ef = edge_flow(inst, &sol.assignment)?;
    let mask = sol.facility_mask(inst.n);
    let demand: BTreeMap<usize, f64> = inst.merged_sources().into_iter().collect();
    let mut shipped: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, pf) in sol.assignment.entries.iter().enumerate() {
        if !mask[pf.path.end()] {
            return Err(Error::Infeasible(format!(
                "path {i} ends at {} which has no facility",
                pf.path.end()
            )));
        }
        if !demand.contains_key(&pf.source) {
            return Err(Error::Infeasible(format!("path {i} departs from non-source {}", pf.source)));
        }
        *shipped.entry(pf.source).or_insert(0.0) += pf.amount;
    }
    for (&s, &w) in &demand {
        let got = shipped.get(&s).copied().unwrap_or(0.0);
        if (got - w).abs() > COST_TOL * w.max(1.0) {
            return Err(Error::Infeasible(format!("source {s} ships {got} of its demand {w}")));
        }
    }
    Ok(ef)
}

/// `C(F) = RC(x) + sum_{i in F} B_i` for a feasible solution.
pub fn total_cost(inst: &Instance, sol: &Solution) -> Result<f64> {
    let ef = check_feasible(inst, sol)?;
    Ok(routing_cost(inst, &ef) + facility_cost(inst, &sol.facilities))
}

pub fn facility_cost(inst: &Instance, facilities: &[usize]) -> f64 {
    facilities.iter().map(|&f| inst.facility_cost(f)).sum()
}

/// Latencies `l_e(x_e)` at the given loads.
pub fn latencies(inst: &Instance, loads: &[f64]) -> Vec<f64> {
    inst.edges
        .iter()
        .zip(loads)
        .map(|(e, &x)| e.cost.eval_cost(x.max(0.0)).expect("loads are nonnegative"))
        .collect()
}

fn path_cost(p: &Path, lengths: &[f64]) -> f64 {
    p.edges.iter().map(|&e| lengths[e]).sum()
}

/// Outcome of the DAG-based ε-Nash test with its witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashCertificate {
    pub holds: bool,
    pub eps: f64,
    /// Cheapest used path to a facility.
    pub c_min: f64,
    /// Most expensive used path to a facility.
    pub c_max: f64,
    /// Cheapest path to a facility in the whole network.
    pub c_sp: f64,
    pub min_path: Vec<usize>,
    pub max_path: Vec<usize>,
    pub sp_path: Vec<usize>,
}

impl NashCertificate {
    /// Smallest eps at which the test passes.
    pub fn slack(&self) -> f64 {
        (self.c_max - self.c_sp).max(0.0)
    }
}

/// DAG certificate for one source of a directed instance at fixed loads.
pub(crate) fn dag_certificate(
    inst: &Instance,
    adj: &Adjacency,
    loads: &[f64],
    facilities: &[bool],
    src: usize,
    eps: f64,
) -> Result<NashCertificate> {
    debug_assert!(inst.directed);
    let n = inst.n;
    let lengths = latencies(inst, loads);
    let arcs: Vec<(usize, usize)> = inst
        .edges
        .iter()
        .zip(loads)
        .filter(|(_, &x)| x > 0.0)
        .map(|(e, _)| (e.u, e.v))
        .collect();
    let order = topological_order(n, &arcs).map_err(|node| Error::NotADag { node })?;

    // longest and shortest used-path lengths from src along the support
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut lo_pred: Vec<Option<usize>> = vec![None; n];
    let mut hi_pred: Vec<Option<usize>> = vec![None; n];
    lo[src] = 0.0;
    hi[src] = 0.0;
    let mut support_out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, e) in inst.edges.iter().enumerate() {
        if loads[i] > 0.0 {
            support_out[e.u].push(i);
        }
    }
    for &v in &order {
        if lo[v].is_infinite() {
            continue;
        }
        for &e in &support_out[v] {
            let w = inst.edges[e].v;
            let (a, b) = (lo[v] + lengths[e], hi[v] + lengths[e]);
            if a < lo[w] {
                lo[w] = a;
                lo_pred[w] = Some(e);
            }
            if b > hi[w] {
                hi[w] = b;
                hi_pred[w] = Some(e);
            }
        }
    }
    let mut c_min = (f64::INFINITY, usize::MAX);
    let mut c_max = (f64::NEG_INFINITY, usize::MAX);
    for v in 0..n {
        if facilities[v] && lo[v].is_finite() {
            if lo[v] < c_min.0 {
                c_min = (lo[v], v);
            }
            if hi[v] > c_max.0 {
                c_max = (hi[v], v);
            }
        }
    }
    if c_min.1 == usize::MAX {
        return Err(Error::Infeasible(format!("no used path from {src} reaches a facility")));
    }
    let sp = dijkstra(adj, src, &lengths);
    let (sp_node, c_sp) = sp
        .nearest(|v| facilities[v])
        .ok_or_else(|| Error::Infeasible(format!("source {src} cannot reach a facility")))?;
    let unwind = |pred: &[Option<usize>], mut v: usize| {
        let mut nodes = vec![v];
        while let Some(e) = pred[v] {
            v = inst.edges[e].u;
            nodes.push(v);
        }
        nodes.reverse();
        nodes
    };
    let holds = c_max.0 - c_min.0 <= eps + COST_TOL && c_sp >= c_max.0 - eps - COST_TOL;
    Ok(NashCertificate {
        holds,
        eps,
        c_min: c_min.0,
        c_max: c_max.0,
        c_sp,
        min_path: unwind(&lo_pred, c_min.1),
        max_path: unwind(&hi_pred, c_max.1),
        sp_path: sp.path_to(sp_node).map(|p| p.nodes).unwrap_or_default(),
    })
}

/// ε-Nash test for single-source directed instances: compares the shortest
/// and longest used paths on the flow-carrying DAG, then the shortest path
/// in the whole network.
pub fn verify_eps_nash(inst: &Instance, sol: &Solution, eps: f64) -> Result<NashCertificate> {
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    let sources = inst.merged_sources();
    if sources.len() != 1 {
        return Err(Error::Unsupported(
            "the DAG test handles single-source instances; use the exhaustive test".into(),
        ));
    }
    if !inst.directed {
        return Err(Error::Unsupported(
            "the DAG test needs a directed network; use the exhaustive test".into(),
        ));
    }
    let ef = check_feasible(inst, sol)?;
    let adj = Adjacency::new(inst);
    dag_certificate(inst, &adj, &ef.total, &sol.facility_mask(inst.n), sources[0].0, eps)
}

/// Largest violation of the ε-Nash condition over all sources, found by
/// enumerating every simple path from each source to a facility.
pub fn nash_slack_exhaustive(inst: &Instance, loads: &[f64], facilities: &[bool]) -> Result<f64> {
    let adj = Adjacency::new(inst);
    let lengths = latencies(inst, loads);
    let mut budget = EXHAUSTIVE_PATH_LIMIT;
    let mut slack: f64 = 0.0;
    for (s, _) in inst.merged_sources() {
        let mut min_all = f64::INFINITY;
        let mut max_used = f64::NEG_INFINITY;
        let mut visited = 0u64;
        simple_paths(&adj, s, inst.n, budget, |p| {
            visited += 1;
            if facilities[p.end()] {
                let c = path_cost(p, &lengths);
                min_all = min_all.min(c);
                if p.edges.iter().all(|&e| loads[e] > 0.0) {
                    max_used = max_used.max(c);
                }
            }
            Step::Extend
        })
        .map_err(|_| Error::GuardExceeded {
            what: "exhaustive eps-Nash path count".into(),
            limit: EXHAUSTIVE_PATH_LIMIT,
        })?;
        budget -= visited;
        if min_all.is_infinite() {
            return Err(Error::Infeasible(format!("source {s} cannot reach a facility")));
        }
        if max_used.is_finite() {
            slack = slack.max(max_used - min_all);
        }
    }
    Ok(slack)
}

/// Literal ε-Nash definition checked over all pairs of paths; handles any
/// number of sources and undirected networks.
pub fn verify_eps_nash_exhaustive(inst: &Instance, sol: &Solution, eps: f64) -> Result<bool> {
    let ef = check_feasible(inst, sol)?;
    let slack = nash_slack_exhaustive(inst, &ef.total, &sol.facility_mask(inst.n))?;
    Ok(slack <= eps + COST_TOL)
}

/// Smallest eps for which the flow is an ε-Nash flow, using the DAG test
/// when the support allows it and enumeration otherwise.
pub(crate) fn measured_nash_slack(inst: &Instance, loads: &[f64], facilities: &[bool]) -> Result<f64> {
    if inst.directed {
        let adj = Adjacency::new(inst);
        let mut slack: f64 = 0.0;
        let mut dag = true;
        for (s, _) in inst.merged_sources() {
            match dag_certificate(inst, &adj, loads, facilities, s, 0.0) {
                Ok(cert) => slack = slack.max(cert.slack()),
                Err(Error::NotADag { .. }) => {
                    dag = false;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if dag {
            return Ok(slack);
        }
    }
    nash_slack_exhaustive(inst, loads, facilities)
}
