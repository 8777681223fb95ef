//! Exact brute-force solvers for small instances.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{self, Objective};
use crate::error::{Error, Result};
use crate::flow::{self, PathAssignment};
use crate::graph::{dijkstra, simple_paths, Adjacency, Path, Step};
use crate::instance::Instance;
use crate::reduction::CostDistanceInstance;

/// Largest node count for facility-subset enumeration.
pub const MAX_SUBSET_NODES: usize = 12;
/// Largest edge count for cost-distance subgraph enumeration.
pub const MAX_SUBSET_EDGES: usize = 20;
/// Search-node budget of the unsplittable routing enumeration.
pub const ROUTING_GUARD: u64 = 10_000_000;
/// Per-source path budget of the unsplittable routing enumeration.
pub const PATH_GUARD: u64 = 1_000_000;
pub const CONVEX_TOL: f64 = 1e-9;
pub const NASH_TOL: f64 = 1e-8;
/// A candidate replaces the incumbent only when cheaper by more than this.
pub const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Routing {
    pub cost: f64,
    pub assignment: PathAssignment,
    /// Joint assignments or iterations examined.
    pub work: u64,
}

/// Paths from `s` to the facilities that do not pass through another
/// facility first; with nondecreasing `x l(x)` cutting a path at the first
/// facility it meets never costs more.
fn paths_to_facilities(adj: &Adjacency, s: usize, mask: &[bool]) -> Result<Vec<Path>> {
    let mut out = Vec::new();
    simple_paths(adj, s, adj.n(), PATH_GUARD, |p| {
        if mask[p.end()] {
            out.push(p.clone());
            Step::Stop
        } else {
            Step::Extend
        }
    })?;
    Ok(out)
}

struct Enum<'a> {
    inst: &'a Instance,
    sources: Vec<(usize, f64)>,
    options: Vec<Vec<Path>>,
    prune: bool,
    best: f64,
    choice: Vec<usize>,
    best_choice: Option<Vec<usize>>,
    loads: Vec<f64>,
    work: u64,
}

impl Enum<'_> {
    fn dfs(&mut self, i: usize) -> Result<()> {
        self.work += 1;
        if self.work > ROUTING_GUARD {
            return Err(Error::GuardExceeded { what: "unsplittable routing search nodes".into(), limit: ROUTING_GUARD });
        }
        let cost = flow::routing_cost_of_loads(self.inst, &self.loads);
        if self.prune && cost >= self.best {
            return Ok(());
        }
        if i == self.sources.len() {
            if cost < self.best {
                self.best = cost;
                self.best_choice = Some(self.choice.clone());
            }
            return Ok(());
        }
        let w = self.sources[i].1;
        for j in 0..self.options[i].len() {
            for &e in &self.options[i][j].edges {
                self.loads[e] += w;
            }
            self.choice.push(j);
            let r = self.dfs(i + 1);
            self.choice.pop();
            for &e in &self.options[i][j].edges {
                self.loads[e] -= w;
            }
            r?;
        }
        Ok(())
    }
}

/// Cheapest unsplittable routing to `facilities` when every `x l(x)` is
/// nondecreasing; exact for good instances, where optimal demands do not
/// split. Returns `None` if nothing cheaper than `cutoff` exists.
pub fn min_routing_unsplittable(
    inst: &Instance,
    facilities: &[usize],
    prune: bool,
    cutoff: f64,
) -> Result<Option<Routing>> {
    let mask = equilibrium::facility_mask(inst, facilities)?;
    let adj = Adjacency::new(inst);
    let sources = inst.merged_sources();
    let mut options = Vec::with_capacity(sources.len());
    for &(s, _) in &sources {
        let ps = paths_to_facilities(&adj, s, &mask)?;
        if ps.is_empty() {
            return Err(Error::Infeasible(format!("source {s} cannot reach any open facility")));
        }
        options.push(ps);
    }
    let mut en = Enum {
        inst,
        sources,
        options,
        prune,
        best: cutoff,
        choice: Vec::new(),
        best_choice: None,
        loads: vec![0.0; inst.m()],
        work: 0,
    };
    en.dfs(0)?;
    let Some(choice) = en.best_choice else { return Ok(None) };
    let mut assignment = PathAssignment::default();
    for (i, &j) in choice.iter().enumerate() {
        assignment.push(en.sources[i].0, en.options[i][j].clone(), en.sources[i].1);
    }
    Ok(Some(Routing { cost: en.best, assignment, work: en.work }))
}

/// Exact minimum routing cost to `facilities` on a good instance.
pub fn min_routing_fixed_f_good(inst: &Instance, facilities: &[usize]) -> Result<Routing> {
    inst.check()?;
    inst.require_all_good()?;
    Ok(min_routing_unsplittable(inst, facilities, true, f64::INFINITY)?.expect("an unbounded search finds a routing"))
}

/// Minimum routing cost to `facilities` on a nondecreasing instance, by
/// conditional gradient on the routing cost itself.
pub fn min_routing_fixed_f_convex(inst: &Instance, facilities: &[usize], tol: f64) -> Result<Routing> {
    let out = equilibrium::conditional_gradient(inst, facilities, Objective::SystemCost, tol, equilibrium::DEFAULT_MAX_ITERS)?;
    if !out.converged {
        log::warn!("optimal routing to {facilities:?} did not converge; gap {:.3e}", out.gap);
    }
    Ok(Routing { cost: out.objective_value, assignment: out.assignment, work: out.iterations as u64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Good,
    Nondecreasing,
}

fn regime(inst: &Instance) -> Result<Regime> {
    if inst.require_all_good().is_ok() {
        Ok(Regime::Good)
    } else if inst.require_all_nondecreasing().is_ok() {
        Ok(Regime::Nondecreasing)
    } else {
        Err(Error::Unsupported("edges mix good and nondecreasing cost functions".into()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Optimum {
    pub facilities: Vec<usize>,
    pub cost: f64,
    pub routing_cost: f64,
    pub facility_cost: f64,
    pub assignment: PathAssignment,
    pub subsets_evaluated: usize,
}

/// Facility subsets in order of size, then lexicographically.
fn subsets(n: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = (1u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= max_size)
        .map(|m| (0..n).filter(|&v| m & (1 << v) != 0).collect())
        .collect();
    all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    all
}

fn guard_nodes(inst: &Instance) -> Result<()> {
    inst.check()?;
    if inst.n > MAX_SUBSET_NODES {
        return Err(Error::GuardExceeded { what: "node count for subset enumeration".into(), limit: MAX_SUBSET_NODES as u64 });
    }
    Ok(())
}

/// Sequential reduction in canonical order so ties resolve the same way on
/// any thread count.
fn pick(candidates: Vec<Option<Optimum>>) -> Option<Optimum> {
    let mut best: Option<Optimum> = None;
    for c in candidates.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| c.cost < b.cost - TIE_TOL) {
            best = Some(c);
        }
    }
    best
}

fn skip_infeasible<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_infeasible() => Ok(None),
        Err(e) => Err(e),
    }
}

/// Opening every source node is always feasible with zero routing cost.
fn source_bound(inst: &Instance) -> f64 {
    inst.merged_sources().iter().map(|&(s, _)| inst.facility_cost(s)).sum()
}

/// Exact FLCC optimum over every nonempty facility set.
pub fn brute_force_flcc(inst: &Instance) -> Result<Optimum> {
    guard_nodes(inst)?;
    let regime = regime(inst)?;
    let bound = source_bound(inst);
    let all = subsets(inst.n, inst.n);
    let count = all.len();
    let evaluated: Vec<Option<Optimum>> = all
        .into_par_iter()
        .map(|f| -> Result<Option<Optimum>> {
            let fac = flow::facility_cost(inst, &f);
            if fac > bound + TIE_TOL {
                return Ok(None);
            }
            let routing = match regime {
                Regime::Good => {
                    skip_infeasible(min_routing_unsplittable(inst, &f, true, bound - fac + 2.0 * TIE_TOL))?.flatten()
                }
                Regime::Nondecreasing => skip_infeasible(min_routing_fixed_f_convex(inst, &f, CONVEX_TOL))?,
            };
            Ok(routing.map(|r| Optimum {
                cost: r.cost + fac,
                routing_cost: r.cost,
                facility_cost: fac,
                assignment: r.assignment,
                facilities: f,
                subsets_evaluated: 0,
            }))
        })
        .collect::<Result<_>>()?;
    let mut best = pick(evaluated).ok_or_else(|| Error::Infeasible("no facility set is feasible".into()))?;
    best.subsets_evaluated = count;
    Ok(best)
}

/// Exact FLSC optimum: the Nash flow of every facility set, priced.
pub fn brute_force_flsc(inst: &Instance) -> Result<Optimum> {
    guard_nodes(inst)?;
    inst.require_all_nondecreasing()?;
    let bound = source_bound(inst);
    let all = subsets(inst.n, inst.n);
    let count = all.len();
    let evaluated: Vec<Option<Optimum>> = all
        .into_par_iter()
        .map(|f| -> Result<Option<Optimum>> {
            let fac = flow::facility_cost(inst, &f);
            if fac > bound + TIE_TOL {
                return Ok(None);
            }
            let Some(eq) = skip_infeasible(equilibrium::nash_flow(inst, &f, NASH_TOL, equilibrium::DEFAULT_MAX_ITERS))?
            else {
                return Ok(None);
            };
            if !eq.converged {
                log::warn!("skipping facility set {f:?}: equilibrium did not converge");
                return Ok(None);
            }
            Ok(Some(Optimum {
                cost: eq.routing_cost + fac,
                routing_cost: eq.routing_cost,
                facility_cost: fac,
                assignment: eq.solution.assignment,
                facilities: f,
                subsets_evaluated: 0,
            }))
        })
        .collect::<Result<_>>()?;
    let mut best = pick(evaluated).ok_or_else(|| Error::Infeasible("no facility set is feasible".into()))?;
    best.subsets_evaluated = count;
    Ok(best)
}

/// Cheapest routing with at most `k` facilities and no opening costs.
pub fn brute_force_k_median(inst: &Instance, k: usize) -> Result<Optimum> {
    guard_nodes(inst)?;
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let regime = regime(inst)?;
    let all = subsets(inst.n, k);
    let count = all.len();
    let evaluated: Vec<Option<Optimum>> = all
        .into_par_iter()
        .map(|f| -> Result<Option<Optimum>> {
            let routing = match regime {
                Regime::Good => skip_infeasible(min_routing_unsplittable(inst, &f, true, f64::INFINITY))?.flatten(),
                Regime::Nondecreasing => skip_infeasible(min_routing_fixed_f_convex(inst, &f, CONVEX_TOL))?,
            };
            Ok(routing.map(|r| Optimum {
                cost: r.cost,
                routing_cost: r.cost,
                facility_cost: 0.0,
                assignment: r.assignment,
                facilities: f,
                subsets_evaluated: 0,
            }))
        })
        .collect::<Result<_>>()?;
    let mut best = pick(evaluated).ok_or_else(|| Error::Infeasible("no facility set is feasible".into()))?;
    best.subsets_evaluated = count;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostDistanceSolution {
    /// Indices of the chosen edges, ascending.
    pub edges: Vec<usize>,
    pub cost: f64,
}

/// Build cost of `edges` plus every source's demand times its shortest
/// `l`-distance to the sink inside the chosen subgraph; `None` if some
/// source is cut off.
pub fn cost_distance_value(cd: &CostDistanceInstance, edges: &[usize]) -> Option<f64> {
    let sub = cd.subgraph(edges);
    let adj = Adjacency::new(&sub);
    let lengths: Vec<f64> = edges.iter().map(|&e| cd.edges[e].l).collect();
    let sp = dijkstra(&adj, cd.sink, &lengths);
    let mut cost: f64 = edges.iter().map(|&e| cd.edges[e].c).sum();
    for s in &cd.sources {
        let d = sp.dist[s.node];
        if !d.is_finite() {
            return None;
        }
        cost += s.w * d;
    }
    Some(cost)
}

/// Exact cost-distance optimum over every edge subset.
pub fn brute_force_cost_distance(cd: &CostDistanceInstance) -> Result<CostDistanceSolution> {
    cd.check()?;
    let m = cd.edges.len();
    if m > MAX_SUBSET_EDGES {
        return Err(Error::GuardExceeded { what: "edge count for subgraph enumeration".into(), limit: MAX_SUBSET_EDGES as u64 });
    }
    let values: Vec<Option<f64>> = (0u32..(1 << m))
        .into_par_iter()
        .map(|mask| {
            let edges: Vec<usize> = (0..m).filter(|&e| mask & (1 << e) != 0).collect();
            cost_distance_value(cd, &edges)
        })
        .collect();
    let mut best: Option<(u32, f64)> = None;
    for (mask, v) in values.into_iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v < b - TIE_TOL) {
                best = Some((mask as u32, v));
            }
        }
    }
    let (mask, cost) = best.ok_or_else(|| Error::Infeasible("no subgraph connects every source to the sink".into()))?;
    Ok(CostDistanceSolution { edges: (0..m).filter(|&e| mask & (1 << e) != 0).collect(), cost })
}
