//! The weight-dependent metric `g(u, v, w)`: shortest path when every edge
//! is priced at `w * l_e(w)`, and the pairing cost built from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{dijkstra, Adjacency, Path, ShortestPaths};
use crate::instance::Instance;

/// Edge prices `w * l_e(w)` for a demand of weight `w`.
pub fn g_lengths(inst: &Instance, w: f64) -> Result<Vec<f64>> {
    if !(w > 0.0) {
        return Err(Error::Domain(format!("weight must be positive, got {w}")));
    }
    inst.edges.iter().map(|e| e.cost.eval_total(w)).collect()
}

pub fn g_tree(inst: &Instance, adj: &Adjacency, u: usize, w: f64) -> Result<ShortestPaths> {
    Ok(dijkstra(adj, u, &g_lengths(inst, w)?))
}

/// `g(u, v, w)` and one shortest path; infinite with no path when `v` is
/// unreachable.
pub fn g_metric(inst: &Instance, u: usize, v: usize, w: f64) -> Result<(f64, Option<Path>)> {
    let adj = Adjacency::new(inst);
    let sp = g_tree(inst, &adj, u, w)?;
    Ok((sp.dist[v], sp.path_to(v)))
}

/// Pairing cost of two active nodes together with the meeting point and
/// the four paths that realize it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCost {
    pub k: f64,
    pub z: usize,
    /// `u -> z` priced at `wu`.
    pub u_to_z: Path,
    /// `v -> z` priced at `wv`.
    pub v_to_z: Path,
    /// `z -> u` priced at `wu + wv`.
    pub z_to_u: Path,
    /// `z -> v` priced at `wu + wv`.
    pub z_to_v: Path,
    /// `g(z, u, wu + wv)` and `g(z, v, wu + wv)`.
    pub back_u: f64,
    pub back_v: f64,
    pub to_meet_u: f64,
    pub to_meet_v: f64,
}

/// `min_z g(u,z,wu) + g(v,z,wv) + wu/W g(z,u,W) + wv/W g(z,v,W)` with
/// `W = wu + wv`, given the trees of `u` and `v` at their own weights and at
/// `W`. Ties go to the smallest `z`. Returns `None` if no `z` reaches both.
pub fn pair_cost_from_trees(
    (wu, tree_u, big_u): (f64, &ShortestPaths, &ShortestPaths),
    (wv, tree_v, big_v): (f64, &ShortestPaths, &ShortestPaths),
) -> Option<PairCost> {
    let w = wu + wv;
    let mut best: Option<(usize, f64)> = None;
    for z in 0..tree_u.dist.len() {
        let k = tree_u.dist[z] + tree_v.dist[z] + (wu / w) * big_u.dist[z] + (wv / w) * big_v.dist[z];
        if k.is_finite() && best.is_none_or(|(_, bk)| k < bk) {
            best = Some((z, k));
        }
    }
    let (z, k) = best?;
    Some(PairCost {
        k,
        z,
        u_to_z: tree_u.path_to(z).expect("finite distance"),
        v_to_z: tree_v.path_to(z).expect("finite distance"),
        z_to_u: big_u.path_to(z).expect("finite distance").reversed(),
        z_to_v: big_v.path_to(z).expect("finite distance").reversed(),
        back_u: big_u.dist[z],
        back_v: big_v.dist[z],
        to_meet_u: tree_u.dist[z],
        to_meet_v: tree_v.dist[z],
    })
}

/// Pairing cost from scratch with four shortest-path computations.
pub fn pair_cost_k(inst: &Instance, u: usize, wu: f64, v: usize, wv: f64) -> Result<Option<PairCost>> {
    let adj = Adjacency::new(inst);
    let tu = g_tree(inst, &adj, u, wu)?;
    let tv = g_tree(inst, &adj, v, wv)?;
    let big_u = g_tree(inst, &adj, u, wu + wv)?;
    let big_v = g_tree(inst, &adj, v, wu + wv)?;
    Ok(pair_cost_from_trees((wu, &tu, &big_u), (wv, &tv, &big_v)))
}
