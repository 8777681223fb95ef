//! Exhaustive search over k-multisets of paths for single-source directed
//! instances with nondecreasing Lipschitz costs. Each path in a multiset
//! carries `w / k` per copy; the facility set is the set of path endpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, dag_certificate, NashCertificate, PathAssignment, Solution};
use crate::graph::{simple_paths, Adjacency, Path, Step};
use crate::instance::Instance;

pub const DEFAULT_PATH_GUARD: u64 = 100_000;
pub const DEFAULT_GUARD_ITERS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseParams {
    pub eps: f64,
    /// Longest path considered, in edges. `None` means `n - 1`.
    pub max_path_len: Option<usize>,
    /// Multiset size; derived from the Lipschitz constant when `None`.
    pub k: Option<usize>,
    pub c_k: f64,
    pub path_guard: u64,
    pub guard_iters: u64,
}

impl SparseParams {
    pub fn new(eps: f64) -> Self {
        SparseParams {
            eps,
            max_path_len: None,
            k: None,
            c_k: 1.0,
            path_guard: DEFAULT_PATH_GUARD,
            guard_iters: DEFAULT_GUARD_ITERS,
        }
    }
}

fn single_source_directed(inst: &Instance) -> Result<(usize, f64)> {
    let sources = inst.merged_sources();
    if sources.len() != 1 {
        return Err(Error::Unsupported(format!(
            "the sparse solver needs exactly one source, found {}",
            sources.len()
        )));
    }
    if !inst.directed {
        return Err(Error::Unsupported("the sparse solver needs a directed network".into()));
    }
    Ok(sources[0])
}

/// Every simple path from the source with between 1 and `max_len` edges, in
/// lexicographic order of node sequence.
pub fn enumerate_paths(inst: &Instance, max_len: usize) -> Result<Vec<Path>> {
    enumerate_paths_guarded(inst, max_len, DEFAULT_PATH_GUARD)
}

pub fn enumerate_paths_guarded(inst: &Instance, max_len: usize, guard: u64) -> Result<Vec<Path>> {
    inst.check()?;
    let (s, _) = single_source_directed(inst)?;
    let adj = Adjacency::new(inst);
    let mut out = Vec::new();
    simple_paths(&adj, s, max_len, guard.saturating_add(1), |p| {
        if !p.is_empty() {
            out.push(p.clone());
        }
        Step::Extend
    })
    .map_err(|_| Error::GuardExceeded { what: "path count (lower the path-length cap)".into(), limit: guard })?;
    if out.len() as u64 > guard {
        return Err(Error::GuardExceeded { what: "path count (lower the path-length cap)".into(), limit: guard });
    }
    Ok(out)
}

/// Multiset size `ceil(c * p * gamma^2 / eps1^2)` with `p = 2`,
/// `gamma^2 = M + 1` and `eps1 = eps / (2 a M)`, i.e.
/// `ceil(c * 8 (1 + 1/M) a^2 M^3 / eps^2)`. Never less than 1.
pub fn caratheodory_k(a: f64, max_len: usize, eps: f64, c: f64) -> Result<usize> {
    if !(eps > 0.0) || max_len == 0 || !(a >= 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!(
            "need a >= 0, M >= 1, eps > 0, c > 0; got a={a}, M={max_len}, eps={eps}, c={c}"
        )));
    }
    let m = max_len as f64;
    let eps1 = eps / (2.0 * a * m);
    let k = c * 2.0 * (m + 1.0) / (eps1 * eps1);
    let k = if k.is_finite() { k } else { 0.0 };
    // absorb rounding noise before the ceiling
    let k = (k * (1.0 - 1e-12)).ceil();
    Ok((k as usize).max(1))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseResult {
    pub solution: Solution,
    pub total_cost: f64,
    pub routing_cost: f64,
    pub certificate: NashCertificate,
    /// Candidate path indices of the chosen multiset, nondecreasing.
    pub multiset: Vec<usize>,
    pub k: usize,
    /// Lipschitz constant with the demand normalized to one unit.
    pub a: f64,
    pub max_path_len: usize,
    pub candidate_paths: usize,
    pub nodes_visited: u64,
}

struct Search<'a> {
    inst: &'a Instance,
    adj: Adjacency,
    /// Candidate paths; index 0 is the trivial path at the source.
    paths: Vec<Path>,
    src: usize,
    unit: f64,
    k: usize,
    eps: f64,
    guard: u64,
}

#[derive(Clone)]
struct Best {
    cost: f64,
    seq: Vec<usize>,
}

fn better(cost: f64, seq: &[usize], than: &Option<Best>) -> bool {
    match than {
        None => true,
        Some(b) => cost.total_cmp(&b.cost).then_with(|| seq.cmp(&b.seq)).is_lt(),
    }
}

/// Partial multiset: copies per candidate path with the induced per-edge and
/// per-endpoint counts.
struct Node {
    mult: Vec<u32>,
    counts: Vec<u32>,
    ends: Vec<u32>,
    used: usize,
}

struct Task {
    best: Option<Best>,
    bound: f64,
    visited: u64,
}

impl<'a> Search<'a> {
    fn node(&self) -> Node {
        Node {
            mult: vec![0; self.paths.len()],
            counts: vec![0; self.inst.m()],
            ends: vec![0; self.inst.n],
            used: 0,
        }
    }

    fn loads(&self, counts: &[u32]) -> Vec<f64> {
        counts.iter().map(|&c| c as f64 * self.unit).collect()
    }

    fn add(&self, nd: &mut Node, i: usize, c: u32) {
        if c == 0 {
            return;
        }
        for &e in &self.paths[i].edges {
            nd.counts[e] += c;
        }
        nd.ends[self.paths[i].end()] += c;
        nd.mult[i] += c;
        nd.used += c as usize;
    }

    fn remove(&self, nd: &mut Node, i: usize, c: u32) {
        if c == 0 {
            return;
        }
        for &e in &self.paths[i].edges {
            nd.counts[e] -= c;
        }
        nd.ends[self.paths[i].end()] -= c;
        nd.mult[i] -= c;
        nd.used -= c as usize;
    }

    fn seq(&self, nd: &Node) -> Vec<usize> {
        nd.mult.iter().enumerate().flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize)).collect()
    }

    /// Cost of the partial multiset plus what the remaining copies must add
    /// when they go to paths `next..`. Adding `y` to a load `x` raises
    /// `x l(x)` by at least `y l(x)`, and one more endpoint may have to open.
    fn lower_bound(&self, nd: &Node, next: usize) -> f64 {
        let loads = self.loads(&nd.counts);
        let fac: f64 = nd
            .ends
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, _)| self.inst.facility_cost(v))
            .sum();
        let mut lb = flow::routing_cost_of_loads(self.inst, &loads) + fac;
        let r = self.k - nd.used;
        if r > 0 && next < self.paths.len() {
            let lat = flow::latencies(self.inst, &loads);
            let mut min_lat = f64::INFINITY;
            let mut min_fac = f64::INFINITY;
            for p in &self.paths[next..] {
                min_lat = min_lat.min(p.edges.iter().map(|&e| lat[e]).sum());
                let end = p.end();
                min_fac = min_fac.min(if nd.ends[end] > 0 { 0.0 } else { self.inst.facility_cost(end) });
            }
            lb += r as f64 * self.unit * min_lat + min_fac;
        }
        lb
    }

    fn certify(&self, nd: &Node) -> Option<NashCertificate> {
        let facilities: Vec<bool> = nd.ends.iter().map(|&c| c > 0).collect();
        match dag_certificate(self.inst, &self.adj, &self.loads(&nd.counts), &facilities, self.src, self.eps) {
            Ok(cert) if cert.holds => Some(cert),
            _ => None,
        }
    }

    fn leaf(&self, nd: &Node, task: &mut Task) {
        let cost = self.lower_bound(nd, self.paths.len());
        if cost > task.bound {
            return;
        }
        let seq = self.seq(nd);
        if better(cost, &seq, &task.best) && self.certify(nd).is_some() {
            task.best = Some(Best { cost, seq });
            task.bound = cost;
        }
    }

    /// Chooses copy counts for paths `i..`, larger counts first, so leaves
    /// arrive in lexicographic order of their sorted index sequence.
    fn dfs(&self, nd: &mut Node, i: usize, task: &mut Task) -> Result<()> {
        task.visited += 1;
        if task.visited > self.guard {
            return Err(Error::GuardExceeded { what: "multiset search nodes".into(), limit: self.guard });
        }
        let r = (self.k - nd.used) as u32;
        if r == 0 {
            self.leaf(nd, task);
            return Ok(());
        }
        if self.lower_bound(nd, i) > task.bound {
            return Ok(());
        }
        if i + 1 == self.paths.len() {
            self.add(nd, i, r);
            self.leaf(nd, task);
            self.remove(nd, i, r);
            return Ok(());
        }
        for c in (0..=r).rev() {
            self.add(nd, i, c);
            let res = self.dfs(nd, i + 1, task);
            self.remove(nd, i, c);
            res?;
        }
        Ok(())
    }

    /// Subtree in which the trivial path carries exactly `c0` copies.
    fn task(&self, c0: u32, incumbent: &Option<Best>) -> (Option<Best>, u64, Result<()>) {
        let mut task = Task { best: None, bound: incumbent.as_ref().map_or(f64::INFINITY, |b| b.cost), visited: 0 };
        let mut nd = self.node();
        self.add(&mut nd, 0, c0);
        let res = if self.paths.len() == 1 {
            if nd.used == self.k {
                self.leaf(&nd, &mut task);
            }
            Ok(())
        } else {
            self.dfs(&mut nd, 1, &mut task)
        };
        (task.best, task.visited, res)
    }

    /// Best multiset that repeats a single path `k` times.
    fn uniform_incumbent(&self) -> Option<Best> {
        let mut task = Task { best: None, bound: f64::INFINITY, visited: 0 };
        for i in 0..self.paths.len() {
            let mut nd = self.node();
            self.add(&mut nd, i, self.k as u32);
            self.leaf(&nd, &mut task);
        }
        task.best
    }
}

/// Searches every k-multiset of candidate paths (plus the trivial path that
/// keeps demand at the source) for the cheapest ε-Nash candidate. Branches
/// whose partial cost already exceeds the incumbent are cut, which never
/// changes the result because costs only grow as paths are added.
pub fn solve_flsc_sparse(inst: &Instance, params: &SparseParams) -> Result<SparseResult> {
    inst.check()?;
    let (src, w) = single_source_directed(inst)?;
    let a_raw = inst.require_all_nondecreasing()?;
    let max_len = params.max_path_len.unwrap_or(inst.n.saturating_sub(1)).max(1);
    if !(params.eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {}", params.eps)));
    }
    let a = a_raw * w;
    let k = match params.k {
        Some(0) => return Err(Error::Domain("k must be at least 1".into())),
        Some(k) => k,
        None => caratheodory_k(a, max_len, params.eps, params.c_k)?,
    };
    let mut paths = vec![Path::trivial(src)];
    paths.extend(enumerate_paths_guarded(inst, max_len, params.path_guard)?);
    let search = Search {
        inst,
        adj: Adjacency::new(inst),
        paths,
        src,
        unit: w / k as f64,
        k,
        eps: params.eps,
        guard: params.guard_iters,
    };
    let incumbent = search.uniform_incumbent();
    if k > u32::MAX as usize {
        return Err(Error::GuardExceeded { what: "multiset size".into(), limit: u32::MAX as u64 });
    }
    let results: Vec<(Option<Best>, u64, Result<()>)> =
        (0..=k as u32).rev().collect::<Vec<_>>().into_par_iter().map(|c0| search.task(c0, &incumbent)).collect();
    let mut best = incumbent;
    let mut visited = 0u64;
    for (b, v, r) in results {
        r?;
        visited += v;
        if let Some(b) = b {
            if better(b.cost, &b.seq, &best) {
                best = Some(b);
            }
        }
    }
    if visited > params.guard_iters {
        return Err(Error::GuardExceeded { what: "multiset search nodes".into(), limit: params.guard_iters });
    }
    let best = best.ok_or(Error::NoCandidate)?;

    let mut assignment = PathAssignment::default();
    let mut facilities = Vec::new();
    let mut i = 0;
    while i < best.seq.len() {
        let j = best.seq[i..].iter().take_while(|&&x| x == best.seq[i]).count();
        let p = &search.paths[best.seq[i]];
        assignment.push(src, p.clone(), w * j as f64 / k as f64);
        facilities.push(p.end());
        i += j;
    }
    let solution = Solution::new(facilities, assignment);
    let certificate = flow::verify_eps_nash(inst, &solution, params.eps)?;
    let total_cost = flow::total_cost(inst, &solution)?;
    let routing_cost = total_cost - flow::facility_cost(inst, &solution.facilities);
    Ok(SparseResult {
        solution,
        total_cost,
        routing_cost,
        certificate,
        multiset: best.seq,
        k,
        a,
        max_path_len: max_len,
        candidate_paths: search.paths.len() - 1,
        nodes_visited: visited,
    })
}
