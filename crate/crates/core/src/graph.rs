//! Graph plumbing shared by the solvers: adjacency, Dijkstra, simple-path
//! enumeration and acyclicity checks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::Instance;

/// A walk through the network. `edges[i]` joins `nodes[i]` and `nodes[i + 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub edges: Vec<usize>,
}

impl Path {
    pub fn trivial(node: usize) -> Self {
        Path { nodes: vec![node], edges: Vec::new() }
    }

    pub fn start(&self) -> usize {
        self.nodes[0]
    }

    pub fn end(&self) -> usize {
        *self.nodes.last().expect("paths have at least one node")
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn reversed(&self) -> Path {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        let mut edges = self.edges.clone();
        edges.reverse();
        Path { nodes, edges }
    }

    /// Appends `other`, which must start where `self` ends.
    pub fn concat(&self, other: &Path) -> Path {
        debug_assert_eq!(self.end(), other.start());
        let mut nodes = self.nodes.clone();
        nodes.extend_from_slice(&other.nodes[1..]);
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        Path { nodes, edges }
    }
}

/// Outgoing arcs per node, `(head, edge index)`, sorted for deterministic
/// traversal. Undirected edges appear in both directions.
#[derive(Debug, Clone)]
pub struct Adjacency {
    out: Vec<Vec<(usize, usize)>>,
}

impl Adjacency {
    pub fn new(inst: &Instance) -> Self {
        let mut out = vec![Vec::new(); inst.n];
        for (i, e) in inst.edges.iter().enumerate() {
            if e.u >= inst.n || e.v >= inst.n {
                continue;
            }
            out[e.u].push((e.v, i));
            if !inst.directed {
                out[e.v].push((e.u, i));
            }
        }
        for arcs in &mut out {
            arcs.sort_unstable();
        }
        Adjacency { out }
    }

    pub fn n(&self) -> usize {
        self.out.len()
    }

    pub fn out(&self, v: usize) -> &[(usize, usize)] {
        &self.out[v]
    }

    pub fn reachable_from(&self, src: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![src];
        seen[src] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.out[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (dist, node)
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest-path tree.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    pub source: usize,
    pub dist: Vec<f64>,
    pred: Vec<Option<(usize, usize)>>,
}

impl ShortestPaths {
    pub fn reachable(&self, v: usize) -> bool {
        self.dist[v].is_finite()
    }

    /// Path from the source to `target`, if reachable.
    pub fn path_to(&self, target: usize) -> Option<Path> {
        if !self.reachable(target) {
            return None;
        }
        let mut nodes = vec![target];
        let mut edges = Vec::new();
        let mut cur = target;
        while let Some((p, e)) = self.pred[cur] {
            nodes.push(p);
            edges.push(e);
            cur = p;
        }
        nodes.reverse();
        edges.reverse();
        Some(Path { nodes, edges })
    }

    /// Closest node satisfying `is_target`; ties go to the smaller id.
    pub fn nearest(&self, is_target: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (v, &d) in self.dist.iter().enumerate() {
            if d.is_finite() && is_target(v) && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((v, d));
            }
        }
        best
    }
}

/// Dijkstra with nonnegative per-edge lengths. Nodes settle in `(dist, id)`
/// order and a predecessor is only replaced on strict improvement, so the
/// returned tree is deterministic.
pub fn dijkstra(adj: &Adjacency, src: usize, lengths: &[f64]) -> ShortestPaths {
    let n = adj.n();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(HeapItem { dist: 0.0, node: src });
    while let Some(HeapItem { dist: d, node: v }) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        for &(w, e) in adj.out(v) {
            let nd = d + lengths[e];
            if nd < dist[w] {
                dist[w] = nd;
                pred[w] = Some((v, e));
                heap.push(HeapItem { dist: nd, node: w });
            }
        }
    }
    ShortestPaths { source: src, dist, pred }
}

/// What to do after visiting a path during enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Extend,
    Stop,
}

/// Depth-first enumeration of simple paths from `src` with at most
/// `max_edges` edges, in lexicographic order of node sequence. `visit` sees
/// every path, the trivial one first, and decides whether to extend it.
/// Fails once more than `limit` paths have been visited.
pub fn simple_paths<F>(adj: &Adjacency, src: usize, max_edges: usize, limit: u64, mut visit: F) -> Result<()>
where
    F: FnMut(&Path) -> Step,
{
    let mut on_path = vec![false; adj.n()];
    let mut path = Path::trivial(src);
    let mut count = 0u64;
    on_path[src] = true;
    dfs(adj, &mut path, &mut on_path, max_edges, limit, &mut count, &mut visit)
}

fn dfs<F>(
    adj: &Adjacency,
    path: &mut Path,
    on_path: &mut [bool],
    max_edges: usize,
    limit: u64,
    count: &mut u64,
    visit: &mut F,
) -> Result<()>
where
    F: FnMut(&Path) -> Step,
{
    *count += 1;
    if *count > limit {
        return Err(Error::GuardExceeded { what: "simple path enumeration".into(), limit });
    }
    if visit(path) == Step::Stop || path.len() >= max_edges {
        return Ok(());
    }
    let v = path.end();
    for &(w, e) in adj.out(v) {
        if on_path[w] {
            continue;
        }
        on_path[w] = true;
        path.nodes.push(w);
        path.edges.push(e);
        dfs(adj, path, on_path, max_edges, limit, count, visit)?;
        path.nodes.pop();
        path.edges.pop();
        on_path[w] = false;
    }
    Ok(())
}

/// Topological order of the directed graph given by `arcs`, or a node on a
/// directed cycle.
pub fn topological_order(n: usize, arcs: &[(usize, usize)]) -> std::result::Result<Vec<usize>, usize> {
    let mut indeg = vec![0usize; n];
    let mut out = vec![Vec::new(); n];
    for &(u, v) in arcs {
        out[u].push(v);
        indeg[v] += 1;
    }
    let mut ready: Vec<usize> = (0..n).rev().filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop() {
        order.push(v);
        for &w in &out[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.push(w);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).find(|&v| indeg[v] > 0).expect("some node is left on a cycle"))
    }
}
