//! Minimum-cost matching with a prescribed number of unmatched nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count matched exactly by the subset DP.
pub const EXACT_LIMIT: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Index pairs `(i, j)` with `i < j`, sorted.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched: Vec<usize>,
    pub cost: f64,
    /// False when the greedy fallback produced the pairs.
    pub exact: bool,
    /// True when the cardinality rule gave zero pairs and the cheapest
    /// single pair was taken instead.
    pub forced: bool,
}

fn check_costs(costs: &[Vec<f64>]) -> Result<()> {
    let n = costs.len();
    for (i, row) in costs.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Matching(format!("row {i} has {} entries, expected {n}", row.len())));
        }
        for (j, &c) in row.iter().enumerate() {
            if c.is_nan() || c < 0.0 {
                return Err(Error::Matching(format!("cost ({i},{j}) = {c} is not a nonnegative number")));
            }
            let d = costs[j][i];
            if c != d && !((c - d).abs() <= 1e-9 * c.abs().max(d.abs()).max(1.0)) {
                return Err(Error::Matching(format!("costs ({i},{j}) and ({j},{i}) differ")));
            }
        }
    }
    Ok(())
}

fn finish(n: usize, mut pairs: Vec<(usize, usize)>, costs: &[Vec<f64>], exact: bool, forced: bool) -> MatchResult {
    pairs.sort_unstable();
    let mut matched = vec![false; n];
    for &(i, j) in &pairs {
        matched[i] = true;
        matched[j] = true;
    }
    let cost = pairs.iter().map(|&(i, j)| costs[i][j]).sum();
    MatchResult { unmatched: (0..n).filter(|&i| !matched[i]).collect(), pairs, cost, exact, forced }
}

/// Chooses `floor((n - k) / 2)` disjoint pairs of minimum total cost, so
/// `k` nodes stay unmatched, or `k + 1` when parity forces it. When that
/// count is zero the single cheapest pair is matched so the caller always
/// makes progress.
pub fn constrained_matching(costs: &[Vec<f64>], k: usize) -> Result<MatchResult> {
    check_costs(costs)?;
    let n = costs.len();
    if n <= k {
        return Err(Error::Matching(format!("{n} nodes cannot leave more than {k} unmatched")));
    }
    let want = (n - k) / 2;
    if want == 0 {
        let mut best: Option<(usize, usize)> = None;
        for i in 0..n {
            for j in i + 1..n {
                if best.is_none_or(|(a, b)| costs[i][j] < costs[a][b]) {
                    best = Some((i, j));
                }
            }
        }
        let pair = best.ok_or_else(|| Error::Matching("a single node has nobody to pair with".into()))?;
        return Ok(finish(n, vec![pair], costs, true, true));
    }
    if n <= EXACT_LIMIT {
        Ok(finish(n, exact_pairs(costs, want), costs, true, false))
    } else {
        log::warn!("matching {n} nodes greedily; the result is a heuristic");
        Ok(finish(n, greedy_pairs(costs, want), costs, false, false))
    }
}

/// `best[mask]` is the cheapest perfect matching of the nodes in `mask`,
/// built by pairing the lowest node with each other member. The answer is
/// the cheapest mask with `2 * want` members.
fn exact_pairs(costs: &[Vec<f64>], want: usize) -> Vec<(usize, usize)> {
    let n = costs.len();
    let size = 1usize << n;
    let mut best = vec![f64::INFINITY; size];
    best[0] = 0.0;
    for mask in 1..size {
        if mask.count_ones() % 2 == 1 || mask.count_ones() as usize > 2 * want {
            continue;
        }
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut b = f64::INFINITY;
        let mut r = rest;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let c = costs[i][j] + best[rest & !(1 << j)];
            if c < b {
                b = c;
            }
        }
        best[mask] = b;
    }
    let mut pick: Option<usize> = None;
    for mask in 0..size {
        if mask.count_ones() as usize == 2 * want && pick.is_none_or(|p| best[mask] < best[p]) {
            pick = Some(mask);
        }
    }
    let mut mask = pick.expect("some subset has the requested size");
    let mut pairs = Vec::with_capacity(want);
    while mask != 0 {
        let i = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << i);
        let mut r = rest;
        let mut chosen: Option<(usize, f64)> = None;
        while r != 0 {
            let j = r.trailing_zeros() as usize;
            r &= r - 1;
            let c = costs[i][j] + best[rest & !(1 << j)];
            if chosen.is_none_or(|(_, bc)| c < bc) {
                chosen = Some((j, c));
            }
        }
        let (j, _) = chosen.expect("even subsets pair up");
        pairs.push((i, j));
        mask = rest & !(1 << j);
    }
    pairs
}

fn greedy_pairs(costs: &[Vec<f64>], want: usize) -> Vec<(usize, usize)> {
    let n = costs.len();
    let mut all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    all.sort_by(|&(a, b), &(c, d)| costs[a][b].total_cmp(&costs[c][d]).then((a, b).cmp(&(c, d))));
    let mut used = vec![false; n];
    let mut pairs = Vec::with_capacity(want);
    for (i, j) in all {
        if pairs.len() == want {
            break;
        }
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            pairs.push((i, j));
        }
    }
    pairs
}
