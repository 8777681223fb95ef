//! Instance data model, the on-disk JSON format, and eligibility validation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costfn::{CostFn, FnClass};
use crate::error::{Error, Result};
use crate::graph::Adjacency;

/// One edge with its cost function. Undirected edges are stored once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    #[serde(rename = "fn")]
    pub cost: CostFn,
}

/// A demand of `w` units departing from `node`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub node: usize,
    pub w: f64,
}

/// Facility opening costs: one common value or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FacilityCosts {
    Common(f64),
    PerNode(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub name: String,
    pub directed: bool,
    pub n: usize,
    pub edges: Vec<Edge>,
    pub sources: Vec<Source>,
    pub facility_costs: FacilityCosts,
}

impl Instance {
    pub fn new(
        name: impl Into<String>,
        directed: bool,
        n: usize,
        edges: Vec<Edge>,
        sources: Vec<Source>,
        facility_costs: FacilityCosts,
    ) -> Self {
        let mut inst = Instance { name: name.into(), directed, n, edges, sources, facility_costs };
        inst.resolve_floors();
        inst
    }

    /// Parses the strict JSON instance format. Structural problems such as
    /// out-of-range ids are left for [`validate_instance`] to report.
    pub fn from_json(s: &str) -> Result<Self> {
        let mut inst: Instance = serde_json::from_str(s)?;
        inst.resolve_floors();
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    fn resolve_floors(&mut self) {
        let floor = self.min_demand();
        if floor.is_finite() && floor > 0.0 {
            for e in &mut self.edges {
                e.cost.resolve_floor(floor);
            }
        }
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn facility_cost(&self, v: usize) -> f64 {
        match &self.facility_costs {
            FacilityCosts::Common(b) => *b,
            FacilityCosts::PerNode(bs) => bs[v],
        }
    }

    /// The common opening cost, if the instance uses one.
    pub fn common_cost(&self) -> Option<f64> {
        match &self.facility_costs {
            FacilityCosts::Common(b) => Some(*b),
            FacilityCosts::PerNode(_) => None,
        }
    }

    pub fn total_demand(&self) -> f64 {
        self.sources.iter().map(|s| s.w).sum()
    }

    pub fn min_demand(&self) -> f64 {
        self.sources.iter().map(|s| s.w).fold(f64::INFINITY, f64::min)
    }

    /// Distinct source nodes with their summed demand, sorted by node id.
    pub fn merged_sources(&self) -> Vec<(usize, f64)> {
        let mut by_node: BTreeMap<usize, f64> = BTreeMap::new();
        for s in &self.sources {
            *by_node.entry(s.node).or_insert(0.0) += s.w;
        }
        by_node.into_iter().collect()
    }

    pub fn edge_classes(&self) -> Vec<FnClass> {
        let w = self.total_demand();
        self.edges.iter().map(|e| e.cost.classify(w)).collect()
    }

    /// Hard structural check used by every solver entry point.
    pub fn check(&self) -> Result<()> {
        let errors = structural_errors(self);
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(errors.join("; ")))
        }
    }

    pub(crate) fn require_all_nondecreasing(&self) -> Result<f64> {
        let mut a: f64 = 0.0;
        for (i, c) in self.edge_classes().iter().enumerate() {
            match c {
                FnClass::NondecreasingLipschitz { a: ai } => a = a.max(*ai),
                _ => {
                    return Err(Error::Unsupported(format!(
                        "edge {i} is not a nondecreasing Lipschitz function"
                    )))
                }
            }
        }
        Ok(a)
    }

    pub(crate) fn require_all_good(&self) -> Result<()> {
        for (i, c) in self.edge_classes().iter().enumerate() {
            if !c.is_good() {
                return Err(Error::Unsupported(format!("edge {i} is not a good cost function")));
            }
        }
        Ok(())
    }
}

fn structural_errors(inst: &Instance) -> Vec<String> {
    let mut errors = Vec::new();
    if inst.n == 0 {
        errors.push("instance has no nodes".to_string());
    }
    for (i, e) in inst.edges.iter().enumerate() {
        if e.u >= inst.n || e.v >= inst.n {
            errors.push(format!("edge {i} ({}, {}) has a node id outside [0, {})", e.u, e.v, inst.n));
        }
        if e.u == e.v {
            errors.push(format!("edge {i} is a self-loop on node {}", e.u));
        }
        if let Err(err) = e.cost.check() {
            errors.push(format!("edge {i}: {err}"));
        }
    }
    if inst.sources.is_empty() {
        errors.push("instance has no sources".to_string());
    }
    for (i, s) in inst.sources.iter().enumerate() {
        if s.node >= inst.n {
            errors.push(format!("source {i} sits on node {} outside [0, {})", s.node, inst.n));
        }
        if !(s.w.is_finite() && s.w > 0.0) {
            errors.push(format!("source {i} has nonpositive demand {}", s.w));
        }
    }
    match &inst.facility_costs {
        FacilityCosts::Common(b) => {
            if !(b.is_finite() && *b >= 0.0) {
                errors.push(format!("common facility cost {b} is not a nonnegative number"));
            }
        }
        FacilityCosts::PerNode(bs) => {
            if bs.len() != inst.n {
                errors.push(format!("per_node facility costs has {} entries, expected {}", bs.len(), inst.n));
            }
            if let Some((v, b)) = bs.iter().enumerate().find(|(_, b)| !(b.is_finite() && **b >= 0.0)) {
                errors.push(format!("facility cost {b} on node {v} is not a nonnegative number"));
            }
        }
    }
    errors
}

pub const SPARSE_SOLVER: &str = "sparse_solver";
pub const MERGE_SOLVER: &str = "merge_solver";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnreachableNodes {
    pub source: usize,
    pub nodes: Vec<usize>,
}

/// Report-only validation result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub errors: Vec<String>,
    /// Facility candidates a source cannot reach.
    pub unreachable: Vec<UnreachableNodes>,
    pub edge_classes: Vec<FnClass>,
    pub eligible: Vec<String>,
    pub ineligible: BTreeMap<String, Vec<String>>,
}

impl ValidationReport {
    pub fn is_eligible(&self, solver: &str) -> bool {
        self.eligible.iter().any(|s| s == solver)
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let errors = structural_errors(inst);
    let valid = errors.is_empty();
    let edge_classes = inst.edge_classes();

    let mut unreachable = Vec::new();
    if valid {
        let adj = Adjacency::new(inst);
        for s in &inst.sources {
            let seen = adj.reachable_from(s.node);
            let nodes: Vec<usize> = (0..inst.n).filter(|&v| !seen[v]).collect();
            if !nodes.is_empty() {
                unreachable.push(UnreachableNodes { source: s.node, nodes });
            }
        }
    }

    let any_good = edge_classes.iter().any(|c| c.is_good());
    let any_lip = edge_classes.iter().any(|c| c.lipschitz().is_some());
    let any_neither = edge_classes.iter().any(|c| matches!(c, FnClass::Neither));
    let mixed = any_good && any_lip;

    let mut ineligible: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut eligible = Vec::new();

    let mut sparse = Vec::new();
    let mut merge = Vec::new();
    if !valid {
        sparse.push("structural errors".to_string());
        merge.push("structural errors".to_string());
    }
    if mixed {
        sparse.push("mixed class".to_string());
        merge.push("mixed class".to_string());
    }
    if any_neither {
        sparse.push("edge outside every family".to_string());
        merge.push("edge outside every family".to_string());
    }
    if inst.sources.len() != 1 {
        sparse.push(format!("needs exactly one source, found {}", inst.sources.len()));
    }
    if !inst.directed {
        sparse.push("needs a directed network".to_string());
    }
    if any_good && !mixed {
        sparse.push("needs nondecreasing Lipschitz cost functions".to_string());
    }
    if inst.directed {
        merge.push("needs an undirected network".to_string());
    }
    if any_lip && !mixed {
        merge.push("needs good cost functions".to_string());
    }
    if inst.common_cost().is_none() {
        merge.push("needs a common facility cost".to_string());
    }

    for (name, reasons) in [(SPARSE_SOLVER, sparse), (MERGE_SOLVER, merge)] {
        if reasons.is_empty() {
            eligible.push(name.to_string());
        } else {
            ineligible.insert(name.to_string(), reasons);
        }
    }

    ValidationReport { valid, errors, unreachable, edge_classes, eligible, ineligible }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(u: usize, v: usize, cost: CostFn) -> Edge {
        Edge { u, v, cost }
    }

    fn sf() -> CostFn {
        CostFn::SharedFixed { c: 1.0, l: 1.0, w_min: 1.0 }
    }

    #[test]
    fn directed_affine_pair_is_sparse_eligible() {
        let inst = Instance::new(
            "pair",
            true,
            2,
            vec![edge(0, 1, CostFn::Affine { a: 1.0, b: 0.0 })],
            vec![Source { node: 0, w: 1.0 }],
            FacilityCosts::PerNode(vec![1.0, 1.0]),
        );
        let r = validate_instance(&inst);
        assert!(r.valid);
        assert_eq!(r.eligible, vec![SPARSE_SOLVER.to_string()]);
    }

    #[test]
    fn undirected_good_triangle_is_merge_eligible() {
        let inst = Instance::new(
            "triangle",
            false,
            3,
            vec![edge(0, 1, sf()), edge(1, 2, sf()), edge(0, 2, sf())],
            vec![Source { node: 0, w: 1.0 }, Source { node: 2, w: 1.0 }],
            FacilityCosts::Common(2.0),
        );
        let r = validate_instance(&inst);
        assert_eq!(r.eligible, vec![MERGE_SOLVER.to_string()]);
        assert!(r.unreachable.is_empty());
    }

    #[test]
    fn mixed_classes_are_ineligible_everywhere() {
        let inst = Instance::new(
            "mixed",
            false,
            3,
            vec![edge(0, 1, CostFn::Affine { a: 1.0, b: 0.0 }), edge(1, 2, sf())],
            vec![Source { node: 0, w: 1.0 }],
            FacilityCosts::Common(1.0),
        );
        let r = validate_instance(&inst);
        assert!(r.eligible.is_empty());
        assert!(r.ineligible[MERGE_SOLVER].contains(&"mixed class".to_string()));
        assert!(r.ineligible[SPARSE_SOLVER].contains(&"mixed class".to_string()));
    }

    #[test]
    fn structural_problems_are_reported() {
        let inst = Instance {
            name: "bad".into(),
            directed: true,
            n: 2,
            edges: vec![edge(0, 5, sf()), edge(1, 1, sf())],
            sources: vec![Source { node: 0, w: 0.0 }],
            facility_costs: FacilityCosts::PerNode(vec![1.0]),
        };
        let r = validate_instance(&inst);
        assert!(!r.valid);
        assert_eq!(r.errors.len(), 4, "{:?}", r.errors);
        assert!(inst.check().is_err());
    }

    #[test]
    fn unreachable_candidates_are_listed() {
        let inst = Instance::new(
            "line",
            true,
            3,
            vec![edge(1, 0, CostFn::Constant { b: 1.0 })],
            vec![Source { node: 0, w: 1.0 }],
            FacilityCosts::Common(1.0),
        );
        let r = validate_instance(&inst);
        assert_eq!(r.unreachable, vec![UnreachableNodes { source: 0, nodes: vec![1, 2] }]);
    }

    #[test]
    fn strict_parsing_rejects_unknown_keys() {
        let ok = r#"{"name":"p","directed":true,"n":2,
            "edges":[{"u":0,"v":1,"fn":{"kind":"constant","params":{"b":1.0}}}],
            "sources":[{"node":0,"w":1.0}],"facility_costs":{"common":0.5}}"#;
        let inst = Instance::from_json(ok).unwrap();
        assert_eq!(inst.common_cost(), Some(0.5));
        let extra = ok.replace(r#""n":2,"#, r#""n":2,"colour":"red","#);
        assert!(Instance::from_json(&extra).is_err());
        let bad_fc = ok.replace(r#"{"common":0.5}"#, r#"{"shared":0.5}"#);
        assert!(Instance::from_json(&bad_fc).is_err());
    }

    #[test]
    fn power_share_floor_defaults_to_min_demand() {
        let json = r#"{"name":"p","directed":false,"n":2,
            "edges":[{"u":0,"v":1,"fn":{"kind":"power_share","params":{"c":1.0,"beta":0.5}}}],
            "sources":[{"node":0,"w":4.0},{"node":1,"w":0.25}],"facility_costs":{"per_node":[1.0,2.0]}}"#;
        let inst = Instance::from_json(json).unwrap();
        assert_eq!(
            inst.edges[0].cost,
            CostFn::PowerShare { c: 1.0, beta: 0.5, w_floor: Some(0.25) }
        );
        assert_eq!(inst.facility_cost(1), 2.0);
    }
}
