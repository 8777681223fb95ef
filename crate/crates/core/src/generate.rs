//! Instance generators: the local-search gap family and seeded random
//! instances, plus a checker for open, close and swap moves.

use std::collections::BTreeSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::costfn::CostFn;
use crate::equilibrium::{self, DEFAULT_MAX_ITERS};
use crate::error::{Error, Result};
use crate::flow;
use crate::instance::{Edge, FacilityCosts, Instance, Source};
use crate::oracle;
use crate::rng::stream_rng;

/// Node layout of the local-search gap instance with `k` clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapLayout {
    pub k: usize,
}

impl GapLayout {
    pub fn client(&self, i: usize) -> usize {
        i
    }

    pub fn outpost(&self, i: usize) -> usize {
        self.k + i
    }

    pub fn hub(&self) -> usize {
        2 * self.k
    }

    pub fn outposts(&self) -> Vec<usize> {
        (0..self.k).map(|i| self.outpost(i)).collect()
    }
}

/// Clients `c_i` with unit demand, each joined to a private outpost `o_i`
/// by a constant-1 edge (opening cost `eps_fac`) and to a shared hub `S` by
/// an edge with latency `x^d` (opening cost `(k-1)^(d+1)`). Clients are
/// priced out of hosting a facility: their opening cost exceeds the cost of
/// the hub-only solution.
pub fn gen_local_search_gap(k: usize, d: usize, eps_fac: f64) -> Result<Instance> {
    if k < 2 || d < 1 {
        return Err(Error::Domain(format!("need k >= 2 and d >= 1, got k={k}, d={d}")));
    }
    if !(eps_fac > 0.0) {
        return Err(Error::Domain(format!("eps_fac must be positive, got {eps_fac}")));
    }
    let lay = GapLayout { k };
    let hub_cost = ((k - 1) as f64).powi(d as i32 + 1);
    let mut coeffs = vec![0.0; d + 1];
    coeffs[d] = 1.0;
    let mut edges = Vec::with_capacity(2 * k);
    for i in 0..k {
        edges.push(Edge { u: lay.client(i), v: lay.outpost(i), cost: CostFn::Constant { b: 1.0 } });
        edges.push(Edge { u: lay.client(i), v: lay.hub(), cost: CostFn::Polynomial { coeffs: coeffs.clone() } });
    }
    let mut b = vec![hub_cost + k as f64 + 1.0; k];
    b.extend(std::iter::repeat_n(eps_fac, k));
    b.push(hub_cost);
    Ok(Instance::new(
        format!("local-gap-k{k}-d{d}"),
        false,
        2 * k + 1,
        edges,
        (0..k).map(|i| Source { node: lay.client(i), w: 1.0 }).collect(),
        FacilityCosts::PerNode(b),
    ))
}

/// How demand is rerouted after a local move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rerouting {
    /// Minimum routing cost flow to the new facility set.
    #[default]
    SystemOptimal,
    /// Nash flow to the new facility set.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalMove {
    Open { node: usize },
    Close { node: usize },
    Swap { close: usize, open: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCost {
    #[serde(flatten)]
    pub mv: LocalMove,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalCheck {
    pub is_local_opt: bool,
    pub cost: f64,
    /// Cheapest feasible neighbor, improving or not.
    pub best_move: Option<MoveCost>,
    pub neighbors_evaluated: usize,
}

pub const LOCAL_TOL: f64 = 1e-9;
pub const NEIGHBOR_GUARD: usize = 100_000;

/// Total cost of facility set `f` under the given rerouting rule.
pub fn facility_set_cost(inst: &Instance, f: &[usize], mode: Rerouting) -> Result<f64> {
    let routing = match mode {
        Rerouting::SystemOptimal => oracle::min_routing_fixed_f_convex(inst, f, oracle::CONVEX_TOL)?.cost,
        Rerouting::Equilibrium => {
            equilibrium::nash_flow(inst, f, oracle::NASH_TOL, DEFAULT_MAX_ITERS)?.routing_cost
        }
    };
    Ok(routing + flow::facility_cost(inst, f))
}

/// Evaluates every open, close and swap neighbor of `facilities` and reports
/// whether any of them is cheaper.
pub fn local_moves_check(inst: &Instance, facilities: &[usize], mode: Rerouting) -> Result<LocalCheck> {
    inst.check()?;
    inst.require_all_nondecreasing()?;
    let current: BTreeSet<usize> = facilities.iter().copied().collect();
    let cost = facility_set_cost(inst, &current.iter().copied().collect::<Vec<_>>(), mode)?;
    let closed: Vec<usize> = (0..inst.n).filter(|v| !current.contains(v)).collect();
    let mut moves: Vec<LocalMove> = Vec::new();
    moves.extend(closed.iter().map(|&node| LocalMove::Open { node }));
    moves.extend(current.iter().map(|&node| LocalMove::Close { node }));
    for &c in &current {
        moves.extend(closed.iter().map(|&o| LocalMove::Swap { close: c, open: o }));
    }
    if moves.len() > NEIGHBOR_GUARD {
        return Err(Error::GuardExceeded { what: "local-move neighbors".into(), limit: NEIGHBOR_GUARD as u64 });
    }
    let mut best: Option<MoveCost> = None;
    let mut evaluated = 0;
    for mv in moves {
        let mut f = current.clone();
        match mv {
            LocalMove::Open { node } => {
                f.insert(node);
            }
            LocalMove::Close { node } => {
                f.remove(&node);
            }
            LocalMove::Swap { close, open } => {
                f.remove(&close);
                f.insert(open);
            }
        }
        if f.is_empty() {
            continue;
        }
        let f: Vec<usize> = f.into_iter().collect();
        let c = match facility_set_cost(inst, &f, mode) {
            Ok(c) => c,
            Err(e) if e.is_infeasible() => continue,
            Err(e) => return Err(e),
        };
        evaluated += 1;
        if best.as_ref().is_none_or(|b| c < b.cost) {
            best = Some(MoveCost { mv, cost: c });
        }
    }
    let is_local_opt = best.as_ref().is_none_or(|b| b.cost >= cost - LOCAL_TOL);
    Ok(LocalCheck { is_local_opt, cost, best_move: best, neighbors_evaluated: evaluated })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Constant,
    Affine,
    Polynomial,
    SharedFixed,
    PowerShare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityGen {
    Common { lo: f64, hi: f64 },
    PerNode { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomParams {
    pub n: usize,
    pub m: usize,
    pub sources: usize,
    pub directed: bool,
    /// Directed only: every arc goes from a lower to a higher node id.
    pub acyclic: bool,
    pub family: Family,
    pub demand: (f64, f64),
    pub coef: (f64, f64),
    pub facility: FacilityGen,
}

impl RandomParams {
    pub fn new(n: usize, m: usize, sources: usize, family: Family) -> Self {
        RandomParams {
            n,
            m,
            sources,
            directed: false,
            acyclic: false,
            family,
            demand: (1.0, 1.0),
            coef: (0.5, 2.0),
            facility: FacilityGen::Common { lo: 1.0, hi: 1.0 },
        }
    }
}

fn draw(rng: &mut crate::rng::Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Seeded random instance: a random spanning tree rooted at node 0 plus
/// extra edges without parallels, all in one cost family. The first source
/// sits at the root so directed instances reach every node from it.
pub fn gen_random(params: &RandomParams, seed: u64) -> Result<Instance> {
    let p = params;
    let n = p.n;
    let max_m = if !p.directed || p.acyclic { n * (n.saturating_sub(1)) / 2 } else { n * n.saturating_sub(1) };
    if n == 0 || p.m + 1 < n || p.m > max_m {
        return Err(Error::Domain(format!("cannot build a connected graph with n={n} and m={}", p.m)));
    }
    if p.sources == 0 || p.sources > n {
        return Err(Error::Domain(format!("source count {} must be in 1..={n}", p.sources)));
    }
    let ranges = [p.demand, p.coef];
    if ranges.iter().any(|&(lo, hi)| !(lo >= 0.0 && hi >= lo && hi.is_finite())) || !(p.demand.0 > 0.0) {
        return Err(Error::Domain("ranges must be nonnegative and ordered, demands positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(p.m);
    let mut seen = BTreeSet::new();
    let key = |u: usize, v: usize| if p.directed { (u, v) } else { (u.min(v), u.max(v)) };
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.push((u, v));
        seen.insert(key(u, v));
    }
    while pairs.len() < p.m {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let (u, v) = if p.acyclic && u > v { (v, u) } else { (u, v) };
        if seen.insert(key(u, v)) {
            pairs.push((u, v));
        }
    }
    let mut nodes: Vec<usize> = (1..n).collect();
    for i in (1..nodes.len()).rev() {
        let j = rng.random_range(0..=i);
        nodes.swap(i, j);
    }
    let mut src_nodes = vec![0];
    src_nodes.extend(nodes.into_iter().take(p.sources - 1));
    let sources: Vec<Source> = src_nodes.iter().map(|&node| Source { node, w: draw(&mut rng, p.demand) }).collect();
    let w_min = sources.iter().map(|s| s.w).fold(f64::INFINITY, f64::min);
    let edges: Vec<Edge> = pairs
        .into_iter()
        .map(|(u, v)| {
            let cost = match p.family {
                Family::Constant => CostFn::Constant { b: draw(&mut rng, p.coef) },
                Family::Affine => CostFn::Affine { a: draw(&mut rng, p.coef), b: draw(&mut rng, p.coef) },
                Family::Polynomial => CostFn::Polynomial { coeffs: (0..3).map(|_| draw(&mut rng, p.coef)).collect() },
                Family::SharedFixed => {
                    CostFn::SharedFixed { c: draw(&mut rng, p.coef), l: draw(&mut rng, p.coef), w_min }
                }
                Family::PowerShare => CostFn::PowerShare {
                    c: draw(&mut rng, p.coef),
                    beta: rng.random_range(0.3..0.9),
                    w_floor: Some(w_min),
                },
            };
            Edge { u, v, cost }
        })
        .collect();
    let facility_costs = match p.facility {
        FacilityGen::Common { lo, hi } => FacilityCosts::Common(draw(&mut rng, (lo, hi))),
        FacilityGen::PerNode { lo, hi } => FacilityCosts::PerNode((0..n).map(|_| draw(&mut rng, (lo, hi))).collect()),
    };
    let inst = Instance::new(format!("random-{seed}"), p.directed, n, edges, sources, facility_costs);
    inst.check()?;
    Ok(inst)
}
