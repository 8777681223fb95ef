//! Acceptance criteria. Runs as a plain binary and prints one PASS or FAIL
//! line per criterion; exits nonzero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::Rng;

use congfac::costfn::CostFn;
use congfac::equilibrium::{self, Objective};
use congfac::flow::{self, PathAssignment};
use congfac::generate::{self, FacilityGen, Family, GapLayout, RandomParams, Rerouting};
use congfac::graph::{simple_paths, Adjacency, Path as GPath, Step};
use congfac::merge::{self, constrained_matching};
use congfac::oracle;
use congfac::reduction::{self, CdEdge, CostDistanceInstance};
use congfac::rng::stream_rng;
use congfac::sparse::{self, SparseParams};
use congfac::{Edge, FacilityCosts, Instance, Solution, Source};

type Check = Result<String, String>;

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 11] = [
        ("sparse solver within eps/2 of the equilibrium optimum", sparse_guarantee),
        ("DAG eps-Nash test agrees with path enumeration", nash_verifier_equivalence),
        ("equilibrium sanity", equilibrium_sanity),
        ("merge phase count bound", merge_phase_bound),
        ("per-phase expected merge cost", per_phase_cost),
        ("end-to-end merge approximation", merge_approximation),
        ("cost-distance reduction", reduction_correctness),
        ("hub-only facility set is a poor local optimum", locality_gap),
        ("oracle flows are unsplit forests", oracle_structure),
        ("matching DP equals enumeration", matching_exactness),
        ("CLI output is deterministic", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = check();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(detail) => println!("criterion {:>2}: PASS  {name} [{secs:.1}s] {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2}: FAIL  {name} [{secs:.1}s] {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn err<E: std::fmt::Display>(ctx: &str) -> impl Fn(E) -> String + '_ {
    move |e| format!("{ctx}: {e}")
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Single-source DAG with at most four layers, so every path has at most
/// three edges. Slopes stay small to keep the multiset size tractable.
fn layered_instance(seed: u64) -> Instance {
    let mut rng = stream_rng(seed, 1);
    let n = rng.random_range(4..=6);
    let mut layer_of = vec![0usize; n];
    // three nonempty layers after the source
    let mut sizes = [1usize; 3];
    for _ in 0..n - 4 {
        sizes[rng.random_range(0..3)] += 1;
    }
    let mut v = 1;
    for (l, &s) in sizes.iter().enumerate() {
        for _ in 0..s {
            layer_of[v] = l + 1;
            v += 1;
        }
    }
    let nodes_in = |l: usize| (0..n).filter(|&v| layer_of[v] == l).collect::<Vec<_>>();
    let mut arcs = Vec::new();
    for l in 1..=3 {
        let prev = nodes_in(l - 1);
        for v in nodes_in(l) {
            let forced = prev[rng.random_range(0..prev.len())];
            for &u in &prev {
                if u == forced || rng.random_bool(0.4) {
                    arcs.push((u, v));
                }
            }
            if l >= 2 {
                for u in nodes_in(l - 2) {
                    if rng.random_bool(0.25) {
                        arcs.push((u, v));
                    }
                }
            }
        }
    }
    let edges = arcs
        .into_iter()
        .map(|(u, v)| {
            let cost = match rng.random_range(0..3) {
                0 => CostFn::Constant { b: rng.random_range(0.1..1.0) },
                1 => CostFn::Affine { a: rng.random_range(0.0..0.04), b: rng.random_range(0.1..1.0) },
                _ => CostFn::Polynomial {
                    coeffs: vec![rng.random_range(0.1..1.0), rng.random_range(0.0..0.02), rng.random_range(0.0..0.01)],
                },
            };
            Edge { u, v, cost }
        })
        .collect();
    let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    b[0] = rng.random_range(0.5..3.0);
    Instance::new(format!("layered-{seed}"), true, n, edges, vec![Source { node: 0, w: 1.0 }], FacilityCosts::PerNode(b))
}

fn sparse_guarantee() -> Check {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut max_k = 0;
    for seed in 0..25u64 {
        let inst = layered_instance(seed);
        let eps = if seed % 2 == 0 { 0.25 } else { 0.5 };
        let params = SparseParams { max_path_len: Some(3), ..SparseParams::new(eps) };
        let sp = sparse::solve_flsc_sparse(&inst, &params).map_err(err("sparse solver"))?;
        let opt = oracle::brute_force_flsc(&inst).map_err(err("FLSC oracle"))?;
        max_k = max_k.max(sp.k);
        let excess = sp.total_cost - (opt.cost + eps / 2.0);
        worst = worst.max(excess);
        if excess > 1e-9 {
            return Err(format!(
                "seed {seed}: sparse {} > optimum {} + {}",
                sp.total_cost,
                opt.cost,
                eps / 2.0
            ));
        }
    }
    Ok(format!("25 instances, largest k {max_k}, worst margin {worst:.3e}"))
}

fn all_paths(inst: &Instance, src: usize) -> Vec<GPath> {
    let adj = Adjacency::new(inst);
    let mut out = Vec::new();
    simple_paths(&adj, src, inst.n, 1_000_000, |p| {
        out.push(p.clone());
        Step::Extend
    })
    .expect("small graph");
    out
}

fn nash_verifier_equivalence() -> Check {
    let families = [Family::Constant, Family::Affine, Family::Polynomial];
    let (mut holds, mut fails) = (0, 0);
    for seed in 0..50u64 {
        let n = 4 + (seed as usize % 3);
        let m = (n - 1 + seed as usize % 5).min(n * (n - 1) / 2);
        let p = RandomParams {
            directed: true,
            acyclic: true,
            demand: (0.5, 2.0),
            facility: FacilityGen::PerNode { lo: 0.1, hi: 1.0 },
            ..RandomParams::new(n, m, 1, families[seed as usize % 3])
        };
        let inst = generate::gen_random(&p, seed).map_err(err("generator"))?;
        let w = inst.sources[0].w;
        let paths = all_paths(&inst, 0);
        let mut rng = stream_rng(seed, 2);
        for trial in 0..100 {
            let count = rng.random_range(1..=paths.len().min(4));
            let mut chosen: Vec<usize> = Vec::new();
            while chosen.len() < count {
                let i = rng.random_range(0..paths.len());
                if !chosen.contains(&i) {
                    chosen.push(i);
                }
            }
            let raw: Vec<f64> = chosen.iter().map(|_| rng.random_range(0.05..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let mut a = PathAssignment::default();
            let mut facilities: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.2)).collect();
            for (&i, r) in chosen.iter().zip(&raw) {
                a.push(0, paths[i].clone(), w * r / sum);
                facilities.push(paths[i].end());
            }
            let sol = Solution::new(facilities, a);
            let loads = flow::edge_flow(&inst, &sol.assignment).map_err(err("edge flow"))?.total;
            let slack = flow::nash_slack_exhaustive(&inst, &loads, &sol.facility_mask(n)).map_err(err("slack"))?;
            let eps = slack * rng.random_range(0.0..2.0);
            let dag = flow::verify_eps_nash(&inst, &sol, eps).map_err(err("DAG test"))?.holds;
            let exh = flow::verify_eps_nash_exhaustive(&inst, &sol, eps).map_err(err("exhaustive test"))?;
            if dag != exh {
                return Err(format!("seed {seed} trial {trial}: DAG says {dag}, enumeration says {exh} at eps {eps}"));
            }
            if dag {
                holds += 1;
            } else {
                fails += 1;
            }
        }
    }
    Ok(format!("5000 trials agree ({holds} hold, {fails} do not)"))
}

fn pigou_two_edges() -> Instance {
    Instance::new(
        "pigou",
        true,
        2,
        vec![
            Edge { u: 0, v: 1, cost: CostFn::Affine { a: 1.0, b: 0.0 } },
            Edge { u: 0, v: 1, cost: CostFn::Constant { b: 1.0 } },
        ],
        vec![Source { node: 0, w: 1.0 }],
        FacilityCosts::Common(1.0),
    )
}

fn monotone(trace: &[f64]) -> bool {
    trace.windows(2).all(|p| p[1] <= p[0] + 1e-12 * p[0].abs().max(1.0))
}

fn equilibrium_sanity() -> Check {
    let pigou = pigou_two_edges();
    let eq = equilibrium::nash_flow(&pigou, &[1], 1e-6, equilibrium::DEFAULT_MAX_ITERS).map_err(err("Pigou"))?;
    let loads = flow::edge_flow(&pigou, eq.assignment()).map_err(err("Pigou flow"))?.total;
    if !(close(loads[0], 1.0, 1e-4) && close(loads[1], 0.0, 1e-4)) {
        return Err(format!("Pigou equilibrium {loads:?}"));
    }
    if !monotone(&eq.potential_trace) {
        return Err("Pigou potential increased".into());
    }
    for seed in 0..10u64 {
        // directed instances keep one source at the root, which reaches every node
        let directed = seed % 2 == 0;
        let sources = if directed { 1 } else { 1 + seed as usize % 3 };
        let p = RandomParams {
            directed,
            demand: (0.5, 2.0),
            ..RandomParams::new(6, 9, sources, [Family::Affine, Family::Polynomial][seed as usize % 3 % 2])
        };
        let inst = generate::gen_random(&p, seed).map_err(err("generator"))?;
        let out = equilibrium::conditional_gradient(&inst, &[5], Objective::Potential, 1e-6, 100_000)
            .map_err(err("conditional gradient"))?;
        if !monotone(&out.trace) {
            return Err(format!("potential increased on random instance {seed}"));
        }
    }
    let mut rng = stream_rng(3, 3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let f = match i % 3 {
            0 => CostFn::Constant { b: rng.random_range(0.0..3.0) },
            1 => CostFn::Affine { a: rng.random_range(0.0..3.0), b: rng.random_range(0.0..3.0) },
            _ => CostFn::Polynomial { coeffs: (0..4).map(|_| rng.random_range(0.0..2.0)).collect() },
        };
        let x: f64 = rng.random_range(0.1..2.0);
        let fd = (f.integral(x + h).unwrap() - f.integral(x - h).unwrap()) / (2.0 * h);
        let fd_total = (f.eval_total(x + h).unwrap() - f.eval_total(x - h).unwrap()) / (2.0 * h);
        let d1 = (fd - f.eval_cost(x).unwrap()).abs();
        let d2 = (fd_total - f.marginal_total(x).unwrap()).abs();
        worst = worst.max(d1).max(d2);
        if d1 > 1e-6 || d2 > 1e-6 {
            return Err(format!("gradient mismatch for {f:?} at {x}: {d1:.3e}, {d2:.3e}"));
        }
    }
    Ok(format!("Pigou loads ({:.6}, {:.6}), worst gradient error {worst:.2e}", loads[0], loads[1]))
}

fn complete_unit(n: usize) -> Instance {
    let edges = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(u, v)| Edge { u, v, cost: CostFn::SharedFixed { c: 0.0, l: 1.0, w_min: 1.0 } })
        .collect();
    Instance::new(
        format!("complete-{n}"),
        false,
        n,
        edges,
        (0..n).map(|node| Source { node, w: 1.0 }).collect(),
        FacilityCosts::Common(1.0),
    )
}

fn phase_bound(s: usize) -> usize {
    (s as f64).log2().ceil() as usize + 2
}

fn merge_phase_bound() -> Check {
    let mut worst = Vec::new();
    for s in [2usize, 4, 8, 16, 32, 64] {
        let inst = complete_unit(s);
        let mut most = 0;
        for seed in 0..20u64 {
            let r = merge::solve_k_median(&inst, 1, seed, 1).map_err(err("merge"))?;
            most = most.max(r.phases());
            if r.phases() > phase_bound(s) {
                return Err(format!("|S| = {s}, seed {seed}: {} phases > {}", r.phases(), phase_bound(s)));
            }
        }
        worst.push(format!("{s}:{most}/{}", phase_bound(s)));
    }
    Ok(format!("max phases per |S| {}", worst.join(" ")))
}

/// Good undirected instances with 6 to 8 nodes and 3 or 4 sources.
fn good_corpus() -> Vec<Instance> {
    (0..10u64)
        .map(|seed| {
            let n = 6 + seed as usize % 3;
            let p = RandomParams {
                demand: (0.5, 2.0),
                coef: (0.2, 2.0),
                facility: FacilityGen::Common { lo: 0.5, hi: 3.0 },
                ..RandomParams::new(
                    n,
                    n + 2 + seed as usize % 3,
                    3 + seed as usize % 2,
                    [Family::SharedFixed, Family::PowerShare][seed as usize % 2],
                )
            };
            generate::gen_random(&p, 100 + seed).expect("corpus parameters are valid")
        })
        .collect()
}

fn per_phase_cost() -> Check {
    const RUNS: usize = 500;
    let mut worst0: f64 = 0.0;
    let mut worst_i: f64 = 0.0;
    for (idx, inst) in good_corpus().iter().enumerate() {
        for k in [1usize, 2] {
            let opt = oracle::brute_force_k_median(inst, k).map_err(err("k-median oracle"))?;
            let mut sums: Vec<f64> = Vec::new();
            for run in 0..RUNS {
                let r = merge::k_median_run(inst, k, 1000 + idx as u64, run).map_err(err("merge run"))?;
                if sums.len() < r.logs.len() {
                    sums.resize(r.logs.len(), 0.0);
                }
                for (i, log) in r.logs.iter().enumerate() {
                    sums[i] += log.cost;
                }
            }
            let means: Vec<f64> = sums.iter().map(|s| s / RUNS as f64).collect();
            let lim0 = 2.0 * opt.routing_cost * 1.1;
            let lim = 2.0 * opt.cost * 1.1;
            if means[0] > lim0 + 1e-12 {
                return Err(format!("instance {idx}, k = {k}: mean phase-0 cost {} > {lim0}", means[0]));
            }
            for (i, &m) in means.iter().enumerate() {
                if m > lim + 1e-12 {
                    return Err(format!("instance {idx}, k = {k}: mean phase-{i} cost {m} > {lim}"));
                }
            }
            if opt.routing_cost > 0.0 {
                worst0 = worst0.max(means[0] / (2.0 * opt.routing_cost));
            }
            worst_i = worst_i.max(means.iter().cloned().fold(0.0, f64::max) / (2.0 * opt.cost));
        }
    }
    Ok(format!("worst mean/(2 OPT): phase 0 {worst0:.3}, any phase {worst_i:.3}"))
}

fn merge_approximation() -> Check {
    let corpus = good_corpus();
    let mut within = 0;
    let mut worst: f64 = 0.0;
    for (idx, inst) in corpus.iter().enumerate() {
        let r = merge::solve_flcc_merge(inst, 2000 + idx as u64, 32).map_err(err("merge"))?;
        let opt = oracle::brute_force_flcc(inst).map_err(err("FLCC oracle"))?;
        let bound = 2.0 * phase_bound(inst.merged_sources().len()) as f64 * opt.cost;
        worst = worst.max(r.total_cost / opt.cost);
        if r.total_cost <= bound + 1e-9 {
            within += 1;
        }
    }
    let frac = within as f64 / corpus.len() as f64;
    let detail = format!("{within}/{} within bound, worst ratio {worst:.3}", corpus.len());
    if frac >= 0.95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cd_instance(seed: u64) -> CostDistanceInstance {
    let mut rng = stream_rng(seed, 4);
    let n = rng.random_range(3..=6);
    let m = rng.random_range(n - 1..=10);
    let mut edges = Vec::with_capacity(m);
    for v in 1..n {
        edges.push((rng.random_range(0..v), v));
    }
    while edges.len() < m {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            edges.push((u, v));
        }
    }
    let edges = edges
        .into_iter()
        .map(|(u, v)| CdEdge { u, v, c: rng.random_range(0.0..5.0), l: rng.random_range(0.0..2.0) })
        .collect();
    let sink = rng.random_range(0..n);
    let mut others: Vec<usize> = (0..n).filter(|&v| v != sink).collect();
    let count = rng.random_range(1..=others.len().min(3));
    let mut sources = Vec::new();
    for _ in 0..count {
        let node = others.swap_remove(rng.random_range(0..others.len()));
        sources.push(Source { node, w: rng.random_range(0.5..2.0) });
    }
    CostDistanceInstance { edges, sources, sink }
}

fn reduction_correctness() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let cd = cd_instance(seed);
        let red = reduction::reduce_cost_distance(&cd).map_err(err("reduction"))?;
        let flcc = oracle::brute_force_flcc(&red.instance).map_err(err("FLCC oracle"))?;
        let best = oracle::brute_force_cost_distance(&cd).map_err(err("cost-distance oracle"))?;
        let gap = (flcc.cost - (best.cost + red.b)).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            return Err(format!("seed {seed}: FLCC {} vs cost-distance {} + B {}", flcc.cost, best.cost, red.b));
        }
        let sol = Solution::new(flcc.facilities.clone(), flcc.assignment.clone());
        let ex = reduction::extract_cost_distance_solution(&sol, &cd).map_err(err("extraction"))?;
        if !close(ex.solution.cost, best.cost, 1e-6) {
            return Err(format!("seed {seed}: extracted {} vs optimum {}", ex.solution.cost, best.cost));
        }
    }
    Ok(format!("20 instances, worst gap {worst:.2e}"))
}

fn locality_gap() -> Check {
    let eps = 0.01;
    let mut failures = Vec::new();
    let mut info = Vec::new();
    for k in [4usize, 8] {
        for d in [1usize, 2, 3] {
            let inst = generate::gen_local_search_gap(k, d, eps).map_err(err("generator"))?;
            let lay = GapLayout { k };
            let hub = [lay.hub()];
            let target = ((k - 1) as f64).powi(d as i32 + 1) / (k as f64 * (1.0 + eps) + k as f64);
            for (mode, label) in [(Rerouting::SystemOptimal, "optimal"), (Rerouting::Equilibrium, "equilibrium")] {
                let check = generate::local_moves_check(&inst, &hub, mode).map_err(err("local moves"))?;
                let spread = generate::facility_set_cost(&inst, &lay.outposts(), mode).map_err(err("outposts"))?;
                let ratio = check.cost / spread;
                let ok = check.is_local_opt && ratio >= target;
                if mode == Rerouting::SystemOptimal {
                    if !ok {
                        let mv = check.best_move.as_ref().map(|m| format!("{:?} -> {:.4}", m.mv, m.cost));
                        failures.push(format!(
                            "k={k} d={d}: local opt {} (cost {:.4}, best neighbor {}), ratio {ratio:.3} vs {target:.3}",
                            check.is_local_opt,
                            check.cost,
                            mv.unwrap_or_default()
                        ));
                    }
                } else {
                    info.push(format!("k={k} d={d} {label}: local opt {}, ratio {ratio:.2} >= {target:.2}", ok));
                }
            }
        }
    }
    println!("  info: with equilibrium rerouting: {}", info.join("; "));
    if failures.is_empty() {
        Ok("all six instances".into())
    } else {
        Err(format!("under optimal rerouting: {}", failures.join("; ")))
    }
}

fn oracle_structure() -> Check {
    let mut checked = 0;
    for seed in 0..20u64 {
        let n = 5 + seed as usize % 4;
        let p = RandomParams {
            demand: (0.5, 2.0),
            coef: (0.2, 2.0),
            facility: FacilityGen::Common { lo: 1.0, hi: 6.0 },
            ..RandomParams::new(n, n + 3, 2 + seed as usize % 3, [Family::SharedFixed, Family::PowerShare][seed as usize % 2])
        };
        let inst = generate::gen_random(&p, 300 + seed).map_err(err("generator"))?;
        let opt = oracle::brute_force_flcc(&inst).map_err(err("FLCC oracle"))?;
        let sources = inst.merged_sources();
        for &(s, _) in &sources {
            let entries = opt.assignment.entries.iter().filter(|e| e.source == s).count();
            if entries != 1 {
                return Err(format!("seed {seed}: source {s} uses {entries} paths"));
            }
        }
        let mut support: Vec<usize> =
            opt.assignment.entries.iter().flat_map(|e| e.path.edges.iter().copied()).collect();
        support.sort_unstable();
        support.dedup();
        // union-find over support edges; a repeated component means a cycle
        let mut parent: Vec<usize> = (0..inst.n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in support {
            let (a, b) = (find(&mut parent, inst.edges[e].u), find(&mut parent, inst.edges[e].v));
            if a == b {
                return Err(format!("seed {seed}: support of the optimal flow has a cycle"));
            }
            parent[a] = b;
        }
        checked += 1;
    }
    Ok(format!("{checked} instances"))
}

/// Cheapest matching with exactly `want` pairs, by trying every pairing.
fn enumerate_matching(costs: &[Vec<f64>], free: &mut Vec<bool>, want: usize) -> f64 {
    if want == 0 {
        return 0.0;
    }
    let n = costs.len();
    let mut best = f64::INFINITY;
    let Some(i) = (0..n).find(|&i| free[i]) else { return best };
    free[i] = false;
    for j in i + 1..n {
        if free[j] {
            free[j] = false;
            best = best.min(costs[i][j] + enumerate_matching(costs, free, want - 1));
            free[j] = true;
        }
    }
    // leave i unmatched if enough nodes remain
    let remaining = free.iter().filter(|&&f| f).count();
    if remaining >= 2 * want {
        best = best.min(enumerate_matching(costs, free, want));
    }
    free[i] = true;
    best
}

fn matching_exactness() -> Check {
    let mut rng = stream_rng(10, 5);
    let mut cases = 0;
    for t in 0..200 {
        let n = rng.random_range(2..=10);
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let c: f64 = rng.random_range(0.0..10.0);
                m[i][j] = c;
                m[j][i] = c;
            }
        }
        for k in 0..n {
            let r = constrained_matching(&m, k).map_err(err("matching"))?;
            let want = ((n - k) / 2).max(1);
            let best = enumerate_matching(&m, &mut vec![true; n], want);
            if r.pairs.len() != want || !close(r.cost, best, 1e-9) {
                return Err(format!("matrix {t}, n = {n}, k = {k}: DP {} with {} pairs, enumeration {best}", r.cost, r.pairs.len()));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} (matrix, k) cases"))
}

struct CliRun {
    stdout: Vec<u8>,
    files: Vec<Vec<u8>>,
}

fn run_cli(args: &[&str], threads: Option<&str>, env_threads: Option<&str>, outputs: &[&Path]) -> Result<CliRun, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_congfac"));
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    cmd.args(args);
    cmd.env_remove("CONGFAC_THREADS");
    if let Some(t) = env_threads {
        cmd.env("CONGFAC_THREADS", t);
    }
    let out = cmd.output().map_err(|e| format!("cannot run the CLI: {e}"))?;
    if !out.status.success() {
        return Err(format!("{args:?} exited with {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    let files = outputs
        .iter()
        .map(|p| std::fs::read(p).map_err(|e| format!("{}: {e}", p.display())))
        .collect::<Result<_, _>>()?;
    Ok(CliRun { stdout: out.stdout, files })
}

/// Drops the last CSV column, which holds wall times.
fn without_wall_time(csv: &[u8]) -> String {
    String::from_utf8_lossy(csv)
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err("temp dir"))?;
    let d = dir.path();
    let good = d.join("good.json");
    let sparse_inst = d.join("sparse.json");
    std::fs::write(&sparse_inst, layered_instance(7).to_json()).map_err(err("write"))?;
    let s = |p: &Path| p.to_str().expect("utf-8 temp path").to_string();
    let good_s = s(&good);
    run_cli(
        &[
            "gen", "random", "--seed", "5", "--n", "8", "--m", "12", "--sources", "6", "--family", "shared-fixed",
            "--demand", "0.5,2", "--facility-cost", "2,2", "--out", &good_s,
        ],
        None,
        None,
        &[],
    )?;
    let phase_log = d.join("phases.jsonl");
    let csv = d.join("runs.csv");
    let (pl, cs, sp) = (s(&phase_log), s(&csv), s(&sparse_inst));
    let commands: Vec<(Vec<&str>, Vec<&Path>)> = vec![
        (
            vec!["gen", "random", "--seed", "9", "--n", "7", "--m", "10", "--sources", "3", "--family", "power-share"],
            vec![],
        ),
        (vec!["solve", "merge", "--k", "2", "--seed", "7", "--repeats", "8", &good_s, "--emit-phase-log", &pl], vec![&phase_log]),
        (vec!["solve", "merge", "--all-k", "--seed", "7", "--repeats", "8", &good_s, "--csv", &cs], vec![&csv]),
        (vec!["bench", "--seed", "3", "--repeats", "4", &good_s], vec![]),
        (vec!["solve", "sparse", "--eps", "0.25", "--max-path-len", "3", &sp], vec![]),
    ];
    let mut compared = 0;
    for (args, outputs) in &commands {
        let reference = run_cli(args, Some("1"), None, outputs)?;
        for (threads, env_threads) in [(Some("1"), None), (Some("2"), None), (Some("8"), None), (None, Some("3")), (None, None)] {
            let again = run_cli(args, threads, env_threads, outputs)?;
            if again.stdout != reference.stdout {
                return Err(format!("{args:?}: stdout differs with threads {threads:?}/{env_threads:?}"));
            }
            for (i, (a, b)) in again.files.iter().zip(&reference.files).enumerate() {
                let same = if outputs[i] == csv.as_path() { without_wall_time(a) == without_wall_time(b) } else { a == b };
                if !same {
                    return Err(format!("{args:?}: {} differs with threads {threads:?}", outputs[i].display()));
                }
            }
            compared += 1;
        }
    }
    Ok(format!("{} commands, {compared} reruns byte-identical", commands.len()))
}
