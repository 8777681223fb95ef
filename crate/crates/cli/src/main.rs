//! Command-line front end: solvers, oracles, verifiers and generators with
//! JSON reports on stdout and human-readable notes on stderr.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use congfac::equilibrium::{self, DEFAULT_MAX_ITERS};
use congfac::flow::{self, NashCertificate};
use congfac::generate::{self, FacilityGen, Family, LocalCheck, RandomParams, Rerouting};
use congfac::instance::{validate_instance, ValidationReport};
use congfac::merge::{self, KMedianResult, PhaseLog, RunSummary};
use congfac::oracle;
use congfac::reduction::{self, CostDistanceInstance};
use congfac::sparse::{self, SparseParams, SparseResult};
use congfac::{Error, Instance, Solution};

use report::{emit, write_csv, write_json, CsvRow, Inputs};

#[derive(Parser)]
#[command(name = "congfac", version, about = "Facility location with congestion", propagate_version = true)]
struct Cli {
    /// Worker threads; falls back to CONGFAC_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural checks, edge classes and solver eligibility.
    Validate { instance: PathBuf },
    /// Run an approximation solver.
    Solve {
        #[command(subcommand)]
        which: Solve,
    },
    /// Nash flow to a fixed facility set.
    Nash(NashArgs),
    /// Check whether a solution is an ε-Nash flow.
    VerifyNash(VerifyArgs),
    /// Exact brute-force oracles for small instances.
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// Turn a cost-distance instance into a facility-location instance.
    Reduce {
        instance: PathBuf,
        /// Also write the reduced instance to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate instances.
    Gen {
        #[command(subcommand)]
        which: GenCmd,
    },
    /// Merge solver for every k with timings in the CSV.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum Solve {
    /// Multiset search for single-source directed instances.
    Sparse(SparseArgs),
    /// Randomized matching-and-merge for undirected good instances.
    Merge(MergeArgs),
}

#[derive(Args)]
struct SparseArgs {
    instance: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    max_path_len: Option<usize>,
    /// Multiset size; overrides the formula.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    c_k: f64,
    #[arg(long, default_value_t = sparse::DEFAULT_GUARD_ITERS)]
    guard_iters: u64,
}

#[derive(Args)]
struct MergeArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of facilities to keep.
    #[arg(long, conflicts_with = "all_k", required_unless_present = "all_k")]
    k: Option<usize>,
    /// Try every k and add the facility costs.
    #[arg(long)]
    all_k: bool,
    #[arg(long, default_value_t = merge::DEFAULT_REPEATS)]
    repeats: usize,
    /// Write one JSON object per phase of the reported run.
    #[arg(long)]
    emit_phase_log: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Compare against the brute-force optimum.
    #[arg(long)]
    compare_oracle: bool,
}

#[derive(Args)]
struct NashArgs {
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', required = true)]
    facilities: Vec<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Price of anarchy of the cost class, for the analytic bound.
    #[arg(long)]
    poa: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[arg(long)]
    eps: f64,
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Optimal facility set and routing.
    Flcc { instance: PathBuf },
    /// Optimal facility set with Nash routing.
    Flsc { instance: PathBuf },
    /// Optimal unsplittable routing to fixed facilities (good costs).
    RoutingGood {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        facilities: Vec<usize>,
    },
    /// Optimal splittable routing to fixed facilities (convex total cost).
    RoutingConvex {
        instance: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        facilities: Vec<usize>,
        #[arg(long, default_value_t = oracle::CONVEX_TOL)]
        tol: f64,
    },
    /// Optimal cost-distance subgraph.
    CostDistance { instance: PathBuf },
    /// Optimal routing with exactly k facilities.
    KMedian {
        instance: PathBuf,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Constant,
    Affine,
    Polynomial,
    SharedFixed,
    PowerShare,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Constant => Family::Constant,
            FamilyArg::Affine => Family::Affine,
            FamilyArg::Polynomial => Family::Polynomial,
            FamilyArg::SharedFixed => Family::SharedFixed,
            FamilyArg::PowerShare => Family::PowerShare,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReroutingArg {
    SystemOptimal,
    Equilibrium,
}

#[derive(Subcommand)]
enum GenCmd {
    /// Instance where opening only at the sources is a poor local optimum.
    LocalGap {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.01)]
        eps: f64,
        /// Also run the open/close/swap check on the hub-only facility set.
        #[arg(long, value_enum)]
        check: Option<ReroutingArg>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Seeded random instance.
    Random(RandomArgs),
}

#[derive(Args)]
struct RandomArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    sources: usize,
    #[arg(long, value_enum)]
    family: FamilyArg,
    #[arg(long)]
    directed: bool,
    /// Directed arcs only go from lower to higher ids.
    #[arg(long)]
    acyclic: bool,
    #[arg(long, value_parser = parse_range, default_value = "1,1")]
    demand: (f64, f64),
    #[arg(long, value_parser = parse_range, default_value = "0.5,2")]
    coef: (f64, f64),
    /// Range `lo,hi` of the opening cost.
    #[arg(long, value_parser = parse_range, default_value = "1,1")]
    facility_cost: (f64, f64),
    /// Draw an opening cost per node instead of one common cost.
    #[arg(long)]
    per_node: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `lo,hi`.
fn parse_range(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or_else(|| format!("expected lo,hi, got {s}"))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"));
    Ok((num(lo)?, num(hi)?))
}

#[derive(Args)]
struct BenchArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = merge::DEFAULT_REPEATS)]
    repeats: usize,
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let infeasible = e.downcast_ref::<Error>().is_some_and(Error::is_infeasible);
            ExitCode::from(if infeasible { 2 } else { 1 })
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let threads = match flag {
        Some(n) => Some(n),
        None => match std::env::var("CONGFAC_THREADS") {
            Ok(v) => Some(v.trim().parse().with_context(|| format!("CONGFAC_THREADS={v} is not a number"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Validate { instance } => validate(&instance),
        Command::Solve { which: Solve::Sparse(a) } => solve_sparse(a),
        Command::Solve { which: Solve::Merge(a) } => solve_merge(a),
        Command::Nash(a) => nash(a),
        Command::VerifyNash(a) => verify_nash(a),
        Command::Oracle { which } => run_oracle(which),
        Command::Reduce { instance, out } => reduce(&instance, out.as_deref()),
        Command::Gen { which } => gen(which),
        Command::Bench(a) => bench(a),
    }
}

fn load_instance(inputs: &mut Inputs, path: &Path) -> Result<Instance> {
    let text = inputs.read("instance", path)?;
    Instance::from_json(&text).with_context(|| format!("invalid instance {}", path.display()))
}

fn ok() -> Result<ExitCode> {
    Ok(ExitCode::SUCCESS)
}

fn validate(path: &Path) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let text = inputs.read("instance", path)?;
    let inst: Instance =
        serde_json::from_str(&text).with_context(|| format!("{} is not an instance", path.display()))?;
    let rep: ValidationReport = validate_instance(&inst);
    for e in &rep.errors {
        eprintln!("invalid: {e}");
    }
    eprintln!("eligible for: {}", if rep.eligible.is_empty() { "none".into() } else { rep.eligible.join(", ") });
    let valid = rep.valid;
    emit("validate", vec![], inputs, rep)?;
    Ok(if valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn solve_sparse(a: SparseArgs) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let inst = load_instance(&mut inputs, &a.instance)?;
    let params = SparseParams {
        eps: a.eps,
        max_path_len: a.max_path_len,
        k: a.k,
        c_k: a.c_k,
        guard_iters: a.guard_iters,
        ..SparseParams::new(a.eps)
    };
    let r: SparseResult = sparse::solve_flsc_sparse(&inst, &params)?;
    eprintln!(
        "k = {}, {} candidate paths, {} search nodes, total cost {}",
        r.k, r.candidate_paths, r.nodes_visited, r.total_cost
    );
    emit("solve sparse", vec![], inputs, r)?;
    ok()
}

/// Phase bound `ceil(log2 |S|) + 2` for `s` merged sources.
fn phase_bound(s: usize) -> usize {
    (s.max(1) as f64).log2().ceil() as usize + 2
}

#[derive(Serialize)]
struct KReport {
    k: usize,
    facilities: Vec<usize>,
    routing_cost: f64,
    facility_cost: f64,
    total_cost: f64,
    phases: usize,
    phase_bound: usize,
    best_run: usize,
    runs: Vec<RunSummary>,
    solution: Solution,
}

fn k_report(inst: &Instance, r: &KMedianResult) -> KReport {
    let facility_cost = flow::facility_cost(inst, &r.solution.facilities);
    KReport {
        k: r.k,
        facilities: r.solution.facilities.clone(),
        routing_cost: r.routing_cost,
        facility_cost,
        total_cost: r.routing_cost + facility_cost,
        phases: r.phases(),
        phase_bound: phase_bound(inst.merged_sources().len()),
        best_run: r.best_run,
        runs: r.runs.clone(),
        solution: r.solution.clone(),
    }
}

#[derive(Serialize)]
struct Comparison {
    oracle_facilities: Vec<usize>,
    oracle_total: f64,
    merge_total: f64,
    ratio: f64,
    phases: usize,
    /// `2 * max(phases, 1) * oracle_total`.
    bound: f64,
    within_bound: bool,
}

#[derive(Serialize)]
struct MergeReport {
    all_k: bool,
    repeats: usize,
    best: KReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    per_k: Option<Vec<merge::KSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn csv_rows(inst: &Instance, seed: u64, r: &KMedianResult, wall_ms: f64) -> Vec<CsvRow> {
    r.runs
        .iter()
        .map(|run| CsvRow {
            k: r.k,
            seed,
            run: run.run,
            phases: run.phases,
            routing_cost: run.routing_cost,
            facility_cost: flow::facility_cost(inst, &run.facilities),
            wall_ms,
        })
        .collect()
}

/// Solves every `k` from 1 to `|S|`, keeping per-run CSV rows; the smaller
/// `k` wins ties on total cost.
fn merge_all_k(
    inst: &Instance,
    seed: u64,
    repeats: usize,
) -> Result<(KMedianResult, Vec<merge::KSummary>, Vec<CsvRow>)> {
    let count = inst.merged_sources().len();
    let mut best: Option<(f64, KMedianResult)> = None;
    let mut per_k = Vec::with_capacity(count);
    let mut rows = Vec::new();
    for k in 1..=count {
        let t = Instant::now();
        let r = merge::solve_k_median(inst, k, seed, repeats)?;
        rows.extend(csv_rows(inst, seed, &r, t.elapsed().as_secs_f64() * 1e3));
        let fac = flow::facility_cost(inst, &r.solution.facilities);
        let total = r.routing_cost + fac;
        per_k.push(merge::KSummary {
            k,
            facilities: r.solution.facilities.len(),
            phases: r.phases(),
            routing_cost: r.routing_cost,
            facility_cost: fac,
            total_cost: total,
        });
        if best.as_ref().is_none_or(|(t, _)| total < *t) {
            best = Some((total, r));
        }
    }
    let (_, best) = best.context("instance has no sources")?;
    Ok((best, per_k, rows))
}

fn solve_merge(a: MergeArgs) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let inst = load_instance(&mut inputs, &a.instance)?;
    let (best, per_k, rows) = if a.all_k {
        if inst.common_cost().is_none() {
            return Err(Error::Unsupported("--all-k needs a common facility cost".into()).into());
        }
        let (best, per_k, rows) = merge_all_k(&inst, a.seed, a.repeats)?;
        (best, Some(per_k), rows)
    } else {
        let k = a.k.context("--k or --all-k is required")?;
        let t = Instant::now();
        let r = merge::solve_k_median(&inst, k, a.seed, a.repeats)?;
        let rows = csv_rows(&inst, a.seed, &r, t.elapsed().as_secs_f64() * 1e3);
        (r, None, rows)
    };
    if let Some(path) = &a.csv {
        write_csv(path, &rows)?;
    }
    if let Some(path) = &a.emit_phase_log {
        write_phase_log(path, best.k, best.best_run, &best.logs)?;
    }
    let best = k_report(&inst, &best);
    let comparison = if a.compare_oracle {
        let opt = if a.all_k { oracle::brute_force_flcc(&inst)? } else { oracle::brute_force_k_median(&inst, best.k)? };
        let bound = 2.0 * best.phases.max(1) as f64 * opt.cost;
        Some(Comparison {
            oracle_facilities: opt.facilities,
            oracle_total: opt.cost,
            merge_total: best.total_cost,
            ratio: if opt.cost > 0.0 { best.total_cost / opt.cost } else { f64::NAN },
            phases: best.phases,
            bound,
            within_bound: best.total_cost <= bound + 1e-9,
        })
    } else {
        None
    };
    eprintln!(
        "k = {}, facilities {:?}, total cost {} after {} phases",
        best.k, best.facilities, best.total_cost, best.phases
    );
    if let Some(c) = &comparison {
        eprintln!("oracle total {}, ratio {:.4}, within bound: {}", c.oracle_total, c.ratio, c.within_bound);
    }
    let report = MergeReport { all_k: a.all_k, repeats: a.repeats, best, per_k, comparison };
    emit(if a.all_k { "solve merge --all-k" } else { "solve merge" }, vec![a.seed], inputs, report)?;
    ok()
}

#[derive(Serialize)]
struct PhaseLine<'a> {
    k: usize,
    run: usize,
    #[serde(flatten)]
    log: &'a PhaseLog,
}

fn write_phase_log(path: &Path, k: usize, run: usize, logs: &[PhaseLog]) -> Result<()> {
    let mut out = String::new();
    for log in logs {
        out.push_str(&serde_json::to_string(&PhaseLine { k, run, log })?);
        out.push('\n');
    }
    std::fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

#[derive(Serialize)]
struct Bound {
    label: &'static str,
    poa: f64,
    value: f64,
}

#[derive(Serialize)]
struct NashReport {
    #[serde(flatten)]
    equilibrium: equilibrium::EquilibriumResult,
    facility_cost: f64,
    total_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<Bound>,
}

fn nash(a: NashArgs) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let inst = load_instance(&mut inputs, &a.instance)?;
    let eq = equilibrium::nash_flow(&inst, &a.facilities, a.tol, a.max_iters)?;
    let facility_cost = flow::facility_cost(&inst, &eq.solution.facilities);
    let bound = match a.poa {
        Some(poa) => Some(Bound {
            label: "bound, not measurement",
            poa,
            value: equilibrium::report_flsc_bound(eq.routing_cost, facility_cost, poa)?,
        }),
        None => None,
    };
    if !eq.converged {
        eprintln!("warning: stopped after {} iterations with gap {:.3e}", eq.iterations, eq.gap);
    }
    eprintln!("routing cost {}, certified eps {:.3e}", eq.routing_cost, eq.certified_eps);
    let total_cost = eq.routing_cost + facility_cost;
    emit("nash", vec![], inputs, NashReport { equilibrium: eq, facility_cost, total_cost, bound })?;
    ok()
}

#[derive(Serialize)]
struct VerifyReport {
    eps: f64,
    holds: bool,
    /// `dag` for the certificate test, `exhaustive` for path enumeration.
    method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<NashCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fallback_reason: Option<String>,
}

fn verify_nash(a: VerifyArgs) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let inst = load_instance(&mut inputs, &a.instance)?;
    let text = inputs.read("solution", &a.solution)?;
    let sol = Solution::from_json(&text, &inst)?;
    let report = match flow::verify_eps_nash(&inst, &sol, a.eps) {
        Ok(cert) => VerifyReport { eps: a.eps, holds: cert.holds, method: "dag", certificate: Some(cert), fallback_reason: None },
        Err(e @ (Error::Unsupported(_) | Error::NotADag { .. })) => VerifyReport {
            eps: a.eps,
            holds: flow::verify_eps_nash_exhaustive(&inst, &sol, a.eps)?,
            method: "exhaustive",
            certificate: None,
            fallback_reason: Some(e.to_string()),
        },
        Err(e) => return Err(e.into()),
    };
    eprintln!("{}-Nash: {} ({})", a.eps, report.holds, report.method);
    emit("verify-nash", vec![], inputs, report)?;
    ok()
}

fn run_oracle(which: OracleCmd) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    match which {
        OracleCmd::Flcc { instance } => {
            let inst = load_instance(&mut inputs, &instance)?;
            let opt = oracle::brute_force_flcc(&inst)?;
            eprintln!("optimum {} at {:?}", opt.cost, opt.facilities);
            emit("oracle flcc", vec![], inputs, opt)?;
        }
        OracleCmd::Flsc { instance } => {
            let inst = load_instance(&mut inputs, &instance)?;
            let opt = oracle::brute_force_flsc(&inst)?;
            eprintln!("optimum {} at {:?}", opt.cost, opt.facilities);
            emit("oracle flsc", vec![], inputs, opt)?;
        }
        OracleCmd::RoutingGood { instance, facilities } => {
            let inst = load_instance(&mut inputs, &instance)?;
            let r = oracle::min_routing_fixed_f_good(&inst, &facilities)?;
            eprintln!("routing cost {}", r.cost);
            emit("oracle routing-good", vec![], inputs, r)?;
        }
        OracleCmd::RoutingConvex { instance, facilities, tol } => {
            let inst = load_instance(&mut inputs, &instance)?;
            let r = oracle::min_routing_fixed_f_convex(&inst, &facilities, tol)?;
            eprintln!("routing cost {}", r.cost);
            emit("oracle routing-convex", vec![], inputs, r)?;
        }
        OracleCmd::CostDistance { instance } => {
            let text = inputs.read("instance", &instance)?;
            let cd = CostDistanceInstance::from_json(&text)?;
            let s = oracle::brute_force_cost_distance(&cd)?;
            eprintln!("optimum {} with edges {:?}", s.cost, s.edges);
            emit("oracle cost-distance", vec![], inputs, s)?;
        }
        OracleCmd::KMedian { instance, k } => {
            let inst = load_instance(&mut inputs, &instance)?;
            let opt = oracle::brute_force_k_median(&inst, k)?;
            eprintln!("optimum {} at {:?}", opt.cost, opt.facilities);
            emit("oracle k-median", vec![], inputs, opt)?;
        }
    }
    ok()
}

fn reduce(path: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let text = inputs.read("instance", path)?;
    let cd = CostDistanceInstance::from_json(&text)?;
    let r = reduction::reduce_cost_distance(&cd)?;
    if let Some(out) = out {
        write_json(out, &r.instance)?;
    }
    eprintln!("common opening cost {}", r.b);
    emit("reduce", vec![], inputs, r)?;
    ok()
}

#[derive(Serialize)]
struct GenReport {
    instance: Instance,
    #[serde(skip_serializing_if = "Option::is_none")]
    local_check: Option<LocalCheck>,
}

fn gen(which: GenCmd) -> Result<ExitCode> {
    match which {
        GenCmd::LocalGap { k, d, eps, check, out } => {
            let inst = generate::gen_local_search_gap(k, d, eps)?;
            if let Some(out) = &out {
                write_json(out, &inst)?;
            }
            let local_check = match check {
                Some(mode) => {
                    let mode = match mode {
                        ReroutingArg::SystemOptimal => Rerouting::SystemOptimal,
                        ReroutingArg::Equilibrium => Rerouting::Equilibrium,
                    };
                    let hub = generate::GapLayout { k }.hub();
                    let c = generate::local_moves_check(&inst, &[hub], mode)?;
                    eprintln!("hub-only facility set locally optimal: {}", c.is_local_opt);
                    Some(c)
                }
                None => None,
            };
            emit("gen local-gap", vec![], Inputs::default(), GenReport { instance: inst, local_check })?;
        }
        GenCmd::Random(a) => {
            let facility = if a.per_node {
                FacilityGen::PerNode { lo: a.facility_cost.0, hi: a.facility_cost.1 }
            } else {
                FacilityGen::Common { lo: a.facility_cost.0, hi: a.facility_cost.1 }
            };
            let params = RandomParams {
                directed: a.directed,
                acyclic: a.acyclic,
                demand: a.demand,
                coef: a.coef,
                facility,
                ..RandomParams::new(a.n, a.m, a.sources, a.family.into())
            };
            let inst = generate::gen_random(&params, a.seed)?;
            if let Some(out) = &a.out {
                write_json(out, &inst)?;
            }
            emit("gen random", vec![a.seed], Inputs::default(), GenReport { instance: inst, local_check: None })?;
        }
    }
    ok()
}

#[derive(Serialize)]
struct BenchReport {
    repeats: usize,
    per_k: Vec<merge::KSummary>,
    best_k: usize,
}

fn bench(a: BenchArgs) -> Result<ExitCode> {
    let mut inputs = Inputs::default();
    let inst = load_instance(&mut inputs, &a.instance)?;
    let t = Instant::now();
    let (best, per_k, rows) = merge_all_k(&inst, a.seed, a.repeats)?;
    eprintln!("{} values of k in {:.1} ms", per_k.len(), t.elapsed().as_secs_f64() * 1e3);
    if let Some(path) = &a.csv {
        write_csv(path, &rows)?;
    }
    emit("bench", vec![a.seed], inputs, BenchReport { repeats: a.repeats, per_k, best_k: best.k })?;
    ok()
}
