//! Cost-distance network design and its reduction to facility location with
//! shared fixed edge costs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::costfn::CostFn;
use crate::error::{Error, Result};
use crate::flow::{self, Solution};
use crate::graph::Adjacency;
use crate::instance::{Edge, FacilityCosts, Instance, Source};
use crate::oracle::{cost_distance_value, CostDistanceSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdEdge {
    pub u: usize,
    pub v: usize,
    /// Build cost.
    pub c: f64,
    /// Length.
    pub l: f64,
}

/// Undirected graph with build costs and lengths, weighted sources and a
/// sink. The node count is one more than the largest id mentioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostDistanceInstance {
    pub edges: Vec<CdEdge>,
    pub sources: Vec<Source>,
    pub sink: usize,
}

impl CostDistanceInstance {
    pub fn from_json(s: &str) -> Result<Self> {
        let cd: CostDistanceInstance = serde_json::from_str(s)?;
        cd.check()?;
        Ok(cd)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn n(&self) -> usize {
        let edge_max = self.edges.iter().map(|e| e.u.max(e.v)).max().unwrap_or(0);
        let src_max = self.sources.iter().map(|s| s.node).max().unwrap_or(0);
        edge_max.max(src_max).max(self.sink) + 1
    }

    pub fn check(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::InvalidInstance("no sources".into()));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.u == e.v {
                return Err(Error::InvalidInstance(format!("edge {i} is a self-loop")));
            }
            if !(e.c >= 0.0 && e.c.is_finite() && e.l >= 0.0 && e.l.is_finite()) {
                return Err(Error::InvalidInstance(format!("edge {i} has a negative or non-finite cost or length")));
            }
        }
        for s in &self.sources {
            if !(s.w > 0.0 && s.w.is_finite()) {
                return Err(Error::InvalidInstance(format!("source {} has demand {}", s.node, s.w)));
            }
        }
        Ok(())
    }

    /// The chosen edges as a plain undirected instance, for graph search.
    /// Edge `i` of the result is `edges[i]` of the input.
    pub(crate) fn subgraph(&self, edges: &[usize]) -> Instance {
        Instance {
            name: String::new(),
            directed: false,
            n: self.n(),
            edges: edges
                .iter()
                .map(|&e| Edge { u: self.edges[e].u, v: self.edges[e].v, cost: CostFn::Constant { b: 0.0 } })
                .collect(),
            sources: self.sources.clone(),
            facility_costs: FacilityCosts::Common(0.0),
        }
    }

    fn connected(&self) -> bool {
        let all: Vec<usize> = (0..self.edges.len()).collect();
        let reach = Adjacency::new(&self.subgraph(&all)).reachable_from(self.sink);
        self.sources.iter().all(|s| reach[s.node])
    }
}

/// Facility-location instance produced by the reduction, with its common
/// opening cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reduced {
    pub instance: Instance,
    pub b: f64,
}

/// Same graph with `l_e(x) = c_e / x + l_e` (floored at the smallest
/// demand), the sink added as a source carrying the total demand, and a
/// common opening cost `B = sum c + (sum w_s + w_t) sum l + 1` that exceeds
/// any routing cost, so one facility opens.
pub fn reduce_cost_distance(cd: &CostDistanceInstance) -> Result<Reduced> {
    cd.check()?;
    if !cd.connected() {
        return Err(Error::InvalidInstance("some source is not connected to the sink".into()));
    }
    let w_min = cd.sources.iter().map(|s| s.w).fold(f64::INFINITY, f64::min);
    let w_total: f64 = cd.sources.iter().map(|s| s.w).sum();
    let sum_c: f64 = cd.edges.iter().map(|e| e.c).sum();
    let sum_l: f64 = cd.edges.iter().map(|e| e.l).sum();
    let b = sum_c + (w_total + w_total) * sum_l + 1.0;
    let mut sources = cd.sources.clone();
    sources.push(Source { node: cd.sink, w: w_total });
    let instance = Instance::new(
        "cost-distance",
        false,
        cd.n(),
        cd.edges
            .iter()
            .map(|e| Edge { u: e.u, v: e.v, cost: CostFn::SharedFixed { c: e.c, l: e.l, w_min } })
            .collect(),
        sources,
        FacilityCosts::Common(b),
    );
    instance.check()?;
    Ok(Reduced { instance, b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extracted {
    #[serde(flatten)]
    pub solution: CostDistanceSolution,
    /// Whether the facility sat away from the sink and was moved onto it.
    pub relocated: bool,
}

/// Subgraph used by a one-facility flow and its cost-distance value. A
/// facility away from the sink is moved onto it by sending every demand on
/// along the sink's own path reversed; that path already lies in the flow
/// support, so the subgraph is unchanged and the value is measured with
/// shortest distances inside it.
pub fn extract_cost_distance_solution(sol: &Solution, cd: &CostDistanceInstance) -> Result<Extracted> {
    if sol.facilities.len() != 1 {
        return Err(Error::Domain(format!(
            "the reduction expects exactly one facility, the solution opens {}",
            sol.facilities.len()
        )));
    }
    let reduced = reduce_cost_distance(cd)?;
    flow::check_feasible(&reduced.instance, sol)?;
    let support: BTreeSet<usize> =
        sol.assignment.entries.iter().flat_map(|p| p.path.edges.iter().copied()).collect();
    let edges: Vec<usize> = support.into_iter().collect();
    let cost = cost_distance_value(cd, &edges)
        .ok_or_else(|| Error::Infeasible("the flow support does not connect every source to the sink".into()))?;
    Ok(Extracted { solution: CostDistanceSolution { edges, cost }, relocated: sol.facilities[0] != cd.sink })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_cost_distance, brute_force_flcc};

    fn cd(edges: &[(usize, usize, f64, f64)], sources: &[(usize, f64)], sink: usize) -> CostDistanceInstance {
        CostDistanceInstance {
            edges: edges.iter().map(|&(u, v, c, l)| CdEdge { u, v, c, l }).collect(),
            sources: sources.iter().map(|&(node, w)| Source { node, w }).collect(),
            sink,
        }
    }

    #[test]
    fn single_edge_reduction() {
        let one = cd(&[(0, 1, 4.0, 1.0)], &[(0, 2.0)], 1);
        let r = reduce_cost_distance(&one).unwrap();
        assert_eq!(r.b, 9.0);
        assert_eq!(r.instance.edges[0].cost, CostFn::SharedFixed { c: 4.0, l: 1.0, w_min: 2.0 });
        assert_eq!(r.instance.merged_sources(), vec![(0, 2.0), (1, 2.0)]);
        let opt = brute_force_flcc(&r.instance).unwrap();
        assert_eq!(opt.facilities.len(), 1);
        assert!((opt.cost - (6.0 + 9.0)).abs() < 1e-9);
        let sol = Solution::new(opt.facilities.clone(), opt.assignment.clone());
        let ex = extract_cost_distance_solution(&sol, &one).unwrap();
        assert_eq!(ex.solution.edges, vec![0]);
        assert!((ex.solution.cost - 6.0).abs() < 1e-9);
    }

    #[test]
    fn facility_at_source_is_relocated() {
        let one = cd(&[(0, 1, 4.0, 1.0)], &[(0, 2.0)], 1);
        let r = reduce_cost_distance(&one).unwrap();
        let mut a = flow::PathAssignment::default();
        a.push(0, crate::graph::Path::trivial(0), 2.0);
        a.push(1, crate::graph::Path { nodes: vec![1, 0], edges: vec![0] }, 2.0);
        let sol = Solution::new(vec![0], a);
        assert!((flow::total_cost(&r.instance, &sol).unwrap() - 15.0).abs() < 1e-9);
        let ex = extract_cost_distance_solution(&sol, &one).unwrap();
        assert!(ex.relocated);
        assert_eq!(ex.solution.cost, 6.0);
    }

    #[test]
    fn zero_cost_reduction() {
        let z = cd(&[(0, 1, 0.0, 0.0), (1, 2, 0.0, 0.0)], &[(0, 1.0), (2, 3.0)], 1);
        let r = reduce_cost_distance(&z).unwrap();
        assert_eq!(r.b, 1.0);
        let opt = brute_force_flcc(&r.instance).unwrap();
        assert_eq!(opt.cost, 1.0);
        let ex = extract_cost_distance_solution(&Solution::new(opt.facilities, opt.assignment), &z).unwrap();
        assert_eq!(ex.solution.cost, 0.0);
    }

    #[test]
    fn parallel_edges_cross_check() {
        let par = cd(&[(0, 1, 4.0, 1.0), (0, 1, 1.0, 10.0)], &[(0, 1.0)], 1);
        let r = reduce_cost_distance(&par).unwrap();
        let opt = brute_force_flcc(&r.instance).unwrap();
        assert!((opt.cost - (5.0 + r.b)).abs() < 1e-9);
        assert_eq!(brute_force_cost_distance(&par).unwrap().cost, 5.0);
    }

    #[test]
    fn disconnected_is_rejected() {
        let cut = cd(&[(0, 1, 1.0, 1.0)], &[(2, 1.0)], 1);
        assert!(matches!(reduce_cost_distance(&cut), Err(Error::InvalidInstance(_))));
    }

    #[test]
    fn json_shape() {
        let one = cd(&[(0, 1, 4.0, 1.0)], &[(0, 2.0)], 1);
        let back = CostDistanceInstance::from_json(&one.to_json()).unwrap();
        assert_eq!(back, one);
        assert!(CostDistanceInstance::from_json(r#"{"edges":[],"sources":[{"node":0,"w":1}],"sink":0,"x":1}"#).is_err());
    }
}
