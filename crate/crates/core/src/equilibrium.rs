//! Nash flows for a fixed facility set on nondecreasing instances, computed
//! by minimizing the potential with a pairwise conditional-gradient method.
//! The same engine with marginal costs `d/dx [x l(x)]` yields the
//! system-optimal routing used by the oracles.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, EdgeFlow, PathAssignment, Solution};
use crate::graph::{dijkstra, Adjacency, Path};
use crate::instance::Instance;

pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// `sum_e integral_0^{x_e} l_e(t) dt`.
pub fn potential(inst: &Instance, ef: &EdgeFlow) -> Result<f64> {
    potential_of_loads(inst, &ef.total)
}

fn potential_of_loads(inst: &Instance, loads: &[f64]) -> Result<f64> {
    inst.edges.iter().zip(loads).map(|(e, &x)| e.cost.integral(x.max(0.0))).sum()
}

/// What the conditional-gradient engine minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Rosenthal potential; minimizers are Nash flows.
    Potential,
    /// Routing cost `sum_e x_e l_e(x_e)`; minimizers are optimal routings.
    SystemCost,
}

impl Objective {
    fn marginal(self, inst: &Instance, e: usize, x: f64) -> f64 {
        let f = &inst.edges[e].cost;
        let x = x.max(0.0);
        match self {
            Objective::Potential => f.eval_cost(x),
            Objective::SystemCost => f.marginal_total(x),
        }
        .expect("nondecreasing families evaluate at nonnegative loads")
    }

    fn value(self, inst: &Instance, loads: &[f64]) -> f64 {
        match self {
            Objective::Potential => potential_of_loads(inst, loads).expect("checked nondecreasing"),
            Objective::SystemCost => flow::routing_cost_of_loads(inst, loads),
        }
    }
}

/// Raw outcome of a conditional-gradient run.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub assignment: PathAssignment,
    pub loads: Vec<f64>,
    pub objective_value: f64,
    /// Duality gap `sum_p x_p (m_p - d_i)` at the final iterate.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value before the first sweep and after each sweep.
    pub trace: Vec<f64>,
}

pub(crate) fn facility_mask(inst: &Instance, facilities: &[usize]) -> Result<Vec<bool>> {
    if facilities.is_empty() {
        return Err(Error::Infeasible("no facility is open".into()));
    }
    let mut mask = vec![false; inst.n];
    for &f in facilities {
        if f >= inst.n {
            return Err(Error::Infeasible(format!("facility {f} is not a node")));
        }
        mask[f] = true;
    }
    Ok(mask)
}

struct Engine<'a> {
    inst: &'a Instance,
    adj: Adjacency,
    objective: Objective,
    mask: Vec<bool>,
    sources: Vec<(usize, f64)>,
    paths: Vec<BTreeMap<Path, f64>>,
    loads: Vec<f64>,
}

impl<'a> Engine<'a> {
    fn marginals(&self) -> Vec<f64> {
        (0..self.inst.m()).map(|e| self.objective.marginal(self.inst, e, self.loads[e])).collect()
    }

    fn recompute_loads(&mut self) {
        let mut loads = vec![0.0; self.inst.m()];
        for per_source in &self.paths {
            for (p, &x) in per_source {
                for &e in &p.edges {
                    loads[e] += x;
                }
            }
        }
        self.loads = loads;
    }

    fn shortest(&self, src: usize, lengths: &[f64]) -> Result<(Path, f64)> {
        let sp = dijkstra(&self.adj, src, lengths);
        let (t, d) = sp
            .nearest(|v| self.mask[v])
            .ok_or_else(|| Error::Infeasible(format!("source {src} cannot reach any open facility")))?;
        Ok((sp.path_to(t).expect("reachable"), d))
    }

    fn gap(&self, lengths: &[f64]) -> Result<f64> {
        let mut gap = 0.0;
        for (i, &(s, _)) in self.sources.iter().enumerate() {
            let (_, d) = self.shortest(s, lengths)?;
            for (p, &x) in &self.paths[i] {
                let c: f64 = p.edges.iter().map(|&e| lengths[e]).sum();
                gap += x * (c - d).max(0.0);
            }
        }
        Ok(gap)
    }

    /// Moves flow from the most expensive used path of source `i` to its
    /// current shortest path with an exact line search.
    fn pairwise_step(&mut self, i: usize) -> Result<()> {
        let lengths = self.marginals();
        let (q, d) = self.shortest(self.sources[i].0, &lengths)?;
        let mut worst: Option<(&Path, f64, f64)> = None;
        for (p, &x) in &self.paths[i] {
            let c: f64 = p.edges.iter().map(|&e| lengths[e]).sum();
            if worst.is_none_or(|(_, wc, _)| c > wc) {
                worst = Some((p, c, x));
            }
        }
        let Some((p, c, xp)) = worst else { return Ok(()) };
        if c - d <= 0.0 {
            return Ok(());
        }
        let p = p.clone();
        let mut coef: BTreeMap<usize, f64> = BTreeMap::new();
        for &e in &q.edges {
            *coef.entry(e).or_insert(0.0) += 1.0;
        }
        for &e in &p.edges {
            *coef.entry(e).or_insert(0.0) -= 1.0;
        }
        coef.retain(|_, c| *c != 0.0);
        let slope = |delta: f64| -> f64 {
            coef.iter()
                .map(|(&e, &c)| c * self.objective.marginal(self.inst, e, self.loads[e] + c * delta))
                .sum()
        };
        let delta = if slope(xp) <= 0.0 {
            xp
        } else {
            let (mut lo, mut hi) = (0.0, xp);
            let tol = 1e-12 * xp.max(1.0);
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                if slope(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        if delta <= 0.0 {
            return Ok(());
        }
        let paths = &mut self.paths[i];
        if delta >= xp {
            paths.remove(&p);
        } else {
            *paths.get_mut(&p).expect("path is present") -= delta;
        }
        *paths.entry(q).or_insert(0.0) += delta;
        self.recompute_loads();
        Ok(())
    }
}

/// Pairwise conditional gradient over path flows from every source to the
/// open facilities. Starts from all-or-nothing shortest paths and stops
/// once the duality gap is at most `tol * W`.
pub fn conditional_gradient(
    inst: &Instance,
    facilities: &[usize],
    objective: Objective,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    inst.check()?;
    inst.require_all_nondecreasing()?;
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mask = facility_mask(inst, facilities)?;
    let sources = inst.merged_sources();
    let mut eng = Engine {
        inst,
        adj: Adjacency::new(inst),
        objective,
        mask,
        paths: vec![BTreeMap::new(); sources.len()],
        sources,
        loads: vec![0.0; inst.m()],
    };
    let zero = eng.marginals();
    for i in 0..eng.sources.len() {
        let (s, w) = eng.sources[i];
        let (p, _) = eng.shortest(s, &zero)?;
        eng.paths[i].insert(p, w);
    }
    eng.recompute_loads();

    let budget = tol * inst.total_demand();
    let mut trace = vec![objective.value(inst, &eng.loads)];
    let mut iterations = 0;
    let mut gap = eng.gap(&eng.marginals())?;
    while gap > budget && iterations < max_iters {
        for i in 0..eng.sources.len() {
            eng.pairwise_step(i)?;
        }
        iterations += 1;
        trace.push(objective.value(inst, &eng.loads));
        gap = eng.gap(&eng.marginals())?;
    }
    let converged = gap <= budget;
    if !converged {
        log::warn!("conditional gradient stopped after {iterations} iterations with gap {gap:.3e}");
    }
    let mut assignment = PathAssignment::default();
    for (i, &(s, _)) in eng.sources.iter().enumerate() {
        for (p, &x) in &eng.paths[i] {
            if x > 0.0 {
                assignment.push(s, p.clone(), x);
            }
        }
    }
    Ok(CgOutcome {
        objective_value: *trace.last().expect("trace is nonempty"),
        assignment,
        loads: eng.loads,
        gap,
        iterations,
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquilibriumResult {
    pub solution: Solution,
    pub certified_eps: f64,
    pub potential_value: f64,
    pub routing_cost: f64,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub potential_trace: Vec<f64>,
}

impl EquilibriumResult {
    pub fn assignment(&self) -> &PathAssignment {
        &self.solution.assignment
    }
}

/// Nash flow to the facility set `facilities`. `certified_eps` is the larger
/// of `gap / min_i w_i` and the slack measured directly on the final flow, so
/// the flow is always an ε-Nash flow at that value.
pub fn nash_flow(inst: &Instance, facilities: &[usize], tol: f64, max_iters: usize) -> Result<EquilibriumResult> {
    let out = conditional_gradient(inst, facilities, Objective::Potential, tol, max_iters)?;
    let min_w = inst.merged_sources().iter().map(|&(_, w)| w).fold(f64::INFINITY, f64::min);
    let from_gap = out.gap / min_w;
    let mask = facility_mask(inst, facilities)?;
    let certified_eps = match flow::measured_nash_slack(inst, &out.loads, &mask) {
        Ok(slack) => from_gap.max(slack),
        Err(Error::GuardExceeded { .. }) => from_gap,
        Err(e) => return Err(e),
    };
    Ok(EquilibriumResult {
        solution: Solution::new(facilities.to_vec(), out.assignment),
        certified_eps,
        potential_value: out.objective_value,
        routing_cost: flow::routing_cost_of_loads(inst, &out.loads),
        gap: out.gap,
        iterations: out.iterations,
        converged: out.converged,
        potential_trace: out.trace,
    })
}

/// Bound on the FLSC cost implied by a price-of-anarchy factor for the
/// instance's function class. This is a bound, not a measurement.
pub fn report_flsc_bound(routing: f64, facilities: f64, poa: f64) -> Result<f64> {
    if !(poa >= 1.0) {
        return Err(Error::Domain(format!("price of anarchy must be at least 1, got {poa}")));
    }
    Ok(poa * routing + facilities)
}
