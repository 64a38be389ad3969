//! One runner per subcommand: resolve settings, run, write outputs.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sgt_core::approx::fitted::heatmap;
use sgt_core::approx::rollout::{evaluate_batch_rl, summarize, train_batch_rl, BatchMethod, BatchRlConfig};
use sgt_core::bc::{
    bc_train_sequential, bc_train_sgt, evaluate_bc, generate_expert_dataset, BcConfig, BcMethod, BcModel, ExpertDataset,
};
use sgt_core::env2d::{builtin_world, State2D, World2D, WorldFile, BUILTIN_NAMES};
use sgt_core::exact::{
    bellman_finite_horizon, default_horizon, floyd_warshall, floyd_warshall_path, greedy_bellman_trajectory,
    greedy_sgt_tree, sgtdp, BellmanTables, ExactError, ValueTable,
};
use sgt_core::graph::{random_graph, EdgeCosts, GraphFile};
use sgt_core::nn::{GaussianNet, LAYERS};
use sgt_core::perturb::{
    adversarial_multi_cost, adversarial_multi_v, adversarial_single_v, check_bellman_trajectory_bound,
    check_sgt_trajectory_bound, BoundReport, NoiseDistribution, NoiseSpec,
};
use sgt_core::pg::train::{evaluate_seq, evaluate_sgt, held_out_pairs, success_rate, EvalRow};
use sgt_core::pg::{train_seq_sg, train_sgt_pg, PgConfig, PgError, PpoConfig};
use sgt_core::rng::derive_rng;
use sgt_core::{trajectory_cost, Graph, C_MAX};

use crate::config::{require, resolve, sibling, write_resolved};
use crate::report::{append_rows, markdown, read_rows, summarize as summarize_rows, ResultRow};
use crate::CliError;

fn finite(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err("must be finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn write_csv<T: Serialize>(out: Option<&Path>, rows: &[T]) -> Result<(), CliError> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Square tables as CSV blocks, each headed by `level,<k>` and followed by a
/// blank line.
fn write_blocks(path: &Path, levels: &[Vec<Vec<f64>>]) -> Result<(), CliError> {
    let mut f = io::BufWriter::new(File::create(path)?);
    for (k, rows) in levels.iter().enumerate() {
        writeln!(f, "level,{k}")?;
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

fn table_rows(t: &ValueTable) -> Vec<Vec<f64>> {
    (0..t.n()).map(|i| t.row(i).iter().map(|c| c.value()).collect()).collect()
}

/// A builtin name or a path to `{"obstacles": [[xmin, ymin, xmax, ymax], ...]}`.
fn load_world(spec: &str) -> Result<World2D, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let file: WorldFile = serde_json::from_reader(BufReader::new(File::open(path)?))
            .map_err(|e| CliError::BadConfig(format!("{spec}: {e}")))?;
        return World2D::from_file(file).map_err(|e| CliError::BadConfig(format!("{spec}: {e}")));
    }
    builtin_world(spec).map_err(|_| {
        CliError::BadConfig(format!("{spec:?} is neither a world file nor one of {}", BUILTIN_NAMES.join(", ")))
    })
}

fn append_results(path: &Option<PathBuf>, rows: &[ResultRow]) -> Result<(), CliError> {
    match path {
        Some(p) => append_rows(p, rows),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphMethod {
    #[default]
    Sgt,
    Bellman,
    Fw,
}

#[derive(Debug, Args, Serialize)]
pub struct ExactFlags {
    /// Graph file `{"n": .., "edges": [[i, j, cost], ...]}`.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    source: Option<usize>,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<GraphMethod>,
    /// Writes every value table level as a CSV block.
    #[arg(long)]
    dump_tables: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExactConfig {
    graph: Option<PathBuf>,
    source: Option<usize>,
    target: Option<usize>,
    method: GraphMethod,
    dump_tables: Option<PathBuf>,
}

fn load_graph(path: &Path) -> Result<Graph, CliError> {
    let file: GraphFile = serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| CliError::BadConfig(format!("{}: {e}", path.display())))?;
    file.into_graph().map_err(|e| CliError::BadConfig(format!("{}: {e}", path.display())))
}

pub fn exact(file: Option<&Path>, flags: &ExactFlags) -> Result<(), CliError> {
    let cfg: ExactConfig = resolve(file, flags)?;
    let g = load_graph(&require(&cfg.graph, "graph")?)?;
    let (s, t) = (require(&cfg.source, "source")?, require(&cfg.target, "target")?);
    for node in [s, t] {
        if node >= g.n() {
            return Err(CliError::BadConfig(format!("node {node} is out of range for a graph with {} nodes", g.n())));
        }
    }
    let (states, tables) = match cfg.method {
        GraphMethod::Sgt => {
            let stack = sgtdp(&g);
            let states = greedy_sgt_tree(&stack, s, t).flatten().expect("greedy trees are full");
            (states, stack.tables.iter().map(table_rows).collect::<Vec<_>>())
        }
        GraphMethod::Bellman => {
            let stack = bellman_finite_horizon(&g);
            let traj = greedy_bellman_trajectory(&g, BellmanTables::PerHorizon(&stack.tables), s, t, default_horizon(&g));
            (traj.states, stack.tables.iter().map(table_rows).collect())
        }
        GraphMethod::Fw => {
            let states = match floyd_warshall_path(&g, s, t) {
                Ok(p) => p,
                Err(ExactError::Unreachable { .. }) => vec![s, t],
                Err(e) => return Err(CliError::BadConfig(e.to_string())),
            };
            (states, vec![table_rows(&floyd_warshall(&g))])
        }
    };
    let cost = trajectory_cost(&g, &states).value();
    println!("{}", json!({ "cost": cost, "states": states }));
    if let Some(p) = &cfg.dump_tables {
        write_blocks(p, &tables)?;
        write_resolved(p, &cfg)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    #[default]
    Random,
    Fig4,
    Fig5,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    Uniform,
    Adversarial,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbFlags {
    #[arg(long, value_enum)]
    family: Option<Family>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = finite)]
    eps: Option<f64>,
    /// Tie-breaking offset of the per-horizon construction (default eps / 2).
    #[arg(long, value_parser = finite)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    noise: Option<Noise>,
    /// Edge probability of random graphs.
    #[arg(long, value_parser = finite)]
    density: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-format summary rows are appended here.
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    family: Family,
    n: usize,
    eps: f64,
    delta: Option<f64>,
    trials: usize,
    noise: Noise,
    density: f64,
    seed: u64,
    out: Option<PathBuf>,
    results: Option<PathBuf>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            family: Family::Random,
            n: 8,
            eps: 0.05,
            delta: None,
            trials: 100,
            noise: Noise::Uniform,
            density: 0.5,
            seed: 0,
            out: None,
            results: None,
        }
    }
}

#[derive(Debug, Serialize)]
struct PerturbRow {
    n: usize,
    eps: f64,
    trial: usize,
    method: String,
    true_cost: f64,
    optimal_cost: f64,
    excess: f64,
    bound: Option<f64>,
}

fn report_rows(r: &BoundReport) -> Vec<PerturbRow> {
    r.outcomes
        .iter()
        .map(|o| PerturbRow {
            n: r.n,
            eps: r.epsilon,
            trial: o.trial,
            method: r.method.name().into(),
            true_cost: o.true_cost,
            optimal_cost: o.optimal_cost,
            excess: o.excess,
            bound: Some(o.bound),
        })
        .collect()
}

pub fn perturb(file: Option<&Path>, flags: &PerturbFlags) -> Result<(), CliError> {
    let cfg: PerturbConfig = resolve(file, flags)?;
    if !(cfg.eps >= 0.0 && cfg.eps.is_finite()) {
        return Err(CliError::BadConfig(format!("--eps must be a nonnegative number, got {}", cfg.eps)));
    }
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    match cfg.family {
        Family::Random => {
            if cfg.n == 0 || cfg.trials == 0 || !(0.0..=1.0).contains(&cfg.density) {
                return Err(CliError::BadConfig("need --n >= 1, --trials >= 1 and --density in [0, 1]".into()));
            }
            let g = random_graph(cfg.n, cfg.density, EdgeCosts::Integer { lo: 1, hi: 9 }, &mut derive_rng(cfg.seed, &[0]));
            let distribution = match cfg.noise {
                Noise::Uniform => NoiseDistribution::UniformPmEps,
                Noise::Adversarial => NoiseDistribution::Adversarial,
            };
            let spec = NoiseSpec { epsilon: cfg.eps, seed: cfg.seed, distribution };
            for result in [check_sgt_trajectory_bound(&g, &spec, cfg.trials), check_bellman_trajectory_bound(&g, &spec, cfg.trials)] {
                let report = match result {
                    Ok(r) => r,
                    Err(v) => {
                        failures.push(v.to_string());
                        *v.report
                    }
                };
                rows.extend(report_rows(&report));
            }
        }
        Family::Fig4 => {
            if cfg.n < 3 || cfg.eps <= 0.0 {
                return Err(CliError::BadConfig("fig4 needs --n >= 3 and --eps > 0".into()));
            }
            let a = adversarial_single_v(cfg.n, cfg.eps);
            let optimal = floyd_warshall(&a.graph).get(a.start, a.goal).value();
            let greedy = greedy_bellman_trajectory(&a.graph, BellmanTables::Single(&a.table), a.start, a.goal, a.horizon);
            let sgt_states = greedy_sgt_tree(&sgtdp(&a.graph), a.start, a.goal).flatten().expect("greedy trees are full");
            for (method, cost) in [("bellman_single", greedy.total_cost().value()), ("sgt", trajectory_cost(&a.graph, &sgt_states).value())] {
                rows.push(PerturbRow { n: cfg.n, eps: cfg.eps, trial: 0, method: method.into(), true_cost: cost, optimal_cost: optimal, excess: cost - optimal, bound: None });
            }
            if greedy.total_cost().value() != C_MAX {
                failures.push(format!("single-table greedy cost {} is not saturated", greedy.total_cost().value()));
            }
        }
        Family::Fig5 => {
            let delta = cfg.delta.unwrap_or(cfg.eps / 2.0);
            if cfg.n < 3 || cfg.eps <= 0.0 || !(delta > 0.0 && delta <= cfg.eps) {
                return Err(CliError::BadConfig("fig5 needs --n >= 3, --eps > 0 and 0 < --delta <= --eps".into()));
            }
            let a = adversarial_multi_v(cfg.n, cfg.eps, delta);
            let optimal = floyd_warshall(&a.graph).get(a.start, a.goal).value();
            let greedy = greedy_bellman_trajectory(&a.graph, BellmanTables::PerHorizon(&a.tables.tables), a.start, a.goal, a.horizon);
            let cost = greedy.total_cost().value();
            let bound = (cfg.n * cfg.n - cfg.n) as f64 * cfg.eps;
            rows.push(PerturbRow { n: cfg.n, eps: cfg.eps, trial: 0, method: "bellman_per_horizon".into(), true_cost: cost, optimal_cost: optimal, excess: cost - optimal, bound: Some(bound) });
            let closed = adversarial_multi_cost(cfg.n, cfg.eps);
            if (cost - closed).abs() > 1e-9 * closed.max(1.0) {
                failures.push(format!("per-horizon greedy cost {cost} differs from (N^2 - N) eps / 2 = {closed}"));
            }
        }
    }
    write_csv(cfg.out.as_deref(), &rows)?;
    if let Some(p) = &cfg.out {
        write_resolved(p, &cfg)?;
    }
    let mut methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    methods.dedup();
    let summary: Vec<ResultRow> = methods
        .iter()
        .flat_map(|&m| {
            let mine: Vec<&PerturbRow> = rows.iter().filter(|r| r.method == m).collect();
            let max = mine.iter().map(|r| r.excess).fold(0.0, f64::max);
            let mean = mine.iter().map(|r| r.excess).sum::<f64>() / mine.len() as f64;
            [ResultRow::new("perturb", m, cfg.seed, "max_excess", max), ResultRow::new("perturb", m, cfg.seed, "mean_excess", mean)]
        })
        .collect();
    append_results(&cfg.results, &summary)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Bound(failures.join("; ")))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct FittedFlags {
    /// Builtin world name or world file.
    #[arg(long)]
    world: Option<String>,
    #[arg(long)]
    tuples: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_parser = finite)]
    cmax: Option<f64>,
    #[arg(long)]
    eval_pairs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    /// Side of the sub-goal search lattice.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    fqi_iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-level value grids toward `--heatmap-goal`.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long, num_args = 2, value_names = ["X", "Y"], value_parser = finite)]
    heatmap_goal: Option<Vec<f64>>,
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittedCliConfig {
    world: Option<String>,
    tuples: usize,
    depth: usize,
    cmax: f64,
    eval_pairs: usize,
    max_steps: usize,
    grid: usize,
    fqi_iterations: usize,
    seed: u64,
    out: Option<PathBuf>,
    heatmap: Option<PathBuf>,
    heatmap_goal: Vec<f64>,
    results: Option<PathBuf>,
}

impl Default for FittedCliConfig {
    fn default() -> Self {
        let d = BatchRlConfig::default();
        FittedCliConfig {
            world: None,
            tuples: d.tuples,
            depth: d.fitted.depth,
            cmax: d.fitted.c_max,
            eval_pairs: d.eval_pairs,
            max_steps: d.max_steps,
            grid: d.grid_resolution,
            fqi_iterations: d.fqi.iterations,
            seed: 0,
            out: None,
            heatmap: None,
            heatmap_goal: vec![0.95, 0.95],
            results: None,
        }
    }
}

pub fn fitted(file: Option<&Path>, flags: &FittedFlags) -> Result<(), CliError> {
    let cfg: FittedCliConfig = resolve(file, flags)?;
    let w = load_world(&require(&cfg.world, "world")?)?;
    if cfg.tuples == 0 || cfg.grid < 2 || cfg.eval_pairs == 0 || !(cfg.cmax > 0.0) || cfg.heatmap_goal.len() != 2 {
        return Err(CliError::BadConfig("need --tuples, --eval-pairs >= 1, --grid >= 2, --cmax > 0 and a two-number --heatmap-goal".into()));
    }
    let mut rl = BatchRlConfig { tuples: cfg.tuples, grid_resolution: cfg.grid, eval_pairs: cfg.eval_pairs, max_steps: cfg.max_steps, ..Default::default() };
    rl.fitted.depth = cfg.depth;
    rl.fitted.c_max = cfg.cmax;
    rl.fqi.iterations = cfg.fqi_iterations;
    let models = train_batch_rl(&w, &rl, cfg.seed).map_err(|e| CliError::BadConfig(e.to_string()))?;
    let rows = evaluate_batch_rl(&w, &rl, &models, cfg.seed);
    if rows.iter().any(|r| !r.final_distance.is_finite()) {
        return Err(CliError::NonFinite("rollout produced a non-finite distance".into()));
    }
    write_csv(cfg.out.as_deref(), &rows)?;
    if let Some(p) = &cfg.out {
        write_resolved(p, &cfg)?;
    }
    if let Some(p) = &cfg.heatmap {
        let goal = State2D::new(cfg.heatmap_goal[0], cfg.heatmap_goal[1]);
        write_blocks(p, &heatmap(&models.stack, goal, cfg.grid))?;
    }
    let mut summary = Vec::new();
    for m in BatchMethod::ALL {
        let (dist, coll) = summarize(&rows, m);
        summary.push(ResultRow::new("fitted", m.name(), cfg.seed, "mean_final_distance", dist));
        summary.push(ResultRow::new("fitted", m.name(), cfg.seed, "collision_rate", coll));
        eprintln!("{}", json!({ "method": m.name(), "mean_final_distance": dist, "collision_rate": coll }));
    }
    append_results(&cfg.results, &summary)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeOrSeq {
    #[default]
    Sgt,
    Seq,
}

#[derive(Debug, Args, Serialize)]
pub struct PgFlags {
    #[arg(long)]
    world: Option<String>,
    /// Tree depth; the sequential baseline places `2^depth - 1` sub-goals
    /// unless `--subgoals` is given.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    subgoals: Option<usize>,
    /// Cycle cap per trained depth.
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<TreeOrSeq>,
    #[arg(long)]
    eval_pairs: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, value_parser = finite)]
    lr: Option<f64>,
    #[arg(long, value_parser = finite)]
    entropy: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Trained parameters as JSON (default `<out>.policy.json`).
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgCliConfig {
    world: Option<String>,
    depth: usize,
    subgoals: Option<usize>,
    cycles: usize,
    method: TreeOrSeq,
    eval_pairs: usize,
    episodes: usize,
    repeats: usize,
    patience: usize,
    lr: f64,
    entropy: f64,
    epochs: usize,
    seed: u64,
    out: Option<PathBuf>,
    policy: Option<PathBuf>,
    results: Option<PathBuf>,
}

impl Default for PgCliConfig {
    fn default() -> Self {
        let d = PgConfig::default();
        PgCliConfig {
            world: None,
            depth: d.depth,
            subgoals: None,
            cycles: d.max_cycles,
            method: TreeOrSeq::Sgt,
            eval_pairs: 100,
            episodes: d.episodes_per_cycle,
            repeats: d.repeats,
            patience: d.patience,
            lr: d.ppo.lr,
            entropy: d.ppo.entropy_coeff,
            epochs: d.ppo.epochs,
            seed: 0,
            out: None,
            policy: None,
            results: None,
        }
    }
}

fn pg_error(e: PgError) -> CliError {
    match e {
        PgError::NonFiniteGradient => CliError::NonFinite(e.to_string()),
        other => CliError::BadConfig(other.to_string()),
    }
}

fn policy_json(method: TreeOrSeq, nets: &[&GaussianNet]) -> serde_json::Value {
    json!({
        "method": method,
        "prior": nets.first().map(|n| n.prior),
        "layers": LAYERS,
        "activation": "tanh",
        "params_per_net": GaussianNet::dim(),
        "distance_scale_params": 2,
        "nets": nets.iter().map(|n| &n.params).collect::<Vec<_>>(),
    })
}

pub fn pg(file: Option<&Path>, flags: &PgFlags) -> Result<(), CliError> {
    let cfg: PgCliConfig = resolve(file, flags)?;
    let w = load_world(&require(&cfg.world, "world")?)?;
    if cfg.depth == 0 || cfg.depth > 16 || cfg.cycles == 0 || cfg.episodes == 0 || cfg.repeats == 0 || cfg.eval_pairs == 0 {
        return Err(CliError::BadConfig("need 1 <= --depth <= 16 and positive --cycles, --episodes, --repeats, --eval-pairs".into()));
    }
    let pg_cfg = PgConfig {
        depth: cfg.depth,
        episodes_per_cycle: cfg.episodes,
        repeats: cfg.repeats,
        max_cycles: cfg.cycles,
        patience: cfg.patience,
        ppo: PpoConfig { lr: cfg.lr, entropy_coeff: cfg.entropy, epochs: cfg.epochs, ..PpoConfig::default() },
        ..PgConfig::default()
    };
    let pairs = held_out_pairs(&w, cfg.eval_pairs, cfg.seed);
    let subgoals = cfg.subgoals.unwrap_or((1 << cfg.depth) - 1);
    let (curve, eval, policy): (_, Vec<EvalRow>, _) = match cfg.method {
        TreeOrSeq::Sgt => {
            let (p, curve) = train_sgt_pg(&w, &pg_cfg, cfg.seed).map_err(pg_error)?;
            let eval = evaluate_sgt(&w, &p, cfg.depth, &pairs).map_err(pg_error)?;
            let policy = policy_json(cfg.method, &p.depth_params.iter().collect::<Vec<_>>());
            (curve, eval, policy)
        }
        TreeOrSeq::Seq => {
            if subgoals == 0 {
                return Err(CliError::BadConfig("--subgoals must be at least 1".into()));
            }
            let (p, curve) = train_seq_sg(&w, subgoals, &pg_cfg, cfg.seed).map_err(pg_error)?;
            let eval = evaluate_seq(&w, &p, subgoals, &pairs);
            (curve, eval, policy_json(cfg.method, &[&p.net]))
        }
    };
    write_csv(cfg.out.as_deref(), &curve)?;
    let policy_path = cfg.policy.clone().or_else(|| cfg.out.as_ref().map(|p| sibling(p, "policy.json")));
    if let Some(p) = policy_path {
        fs::write(p, serde_json::to_string(&policy)? + "\n")?;
    }
    if let Some(p) = &cfg.out {
        write_resolved(p, &cfg)?;
    }
    let method = format!("{}_{subgoals}sg", if cfg.method == TreeOrSeq::Sgt { "sgt" } else { "seq" });
    let succ = success_rate(&eval);
    let mean_cost = eval.iter().map(|r| r.cost).sum::<f64>() / eval.len() as f64;
    eprintln!("{}", json!({ "method": method, "success_rate": succ, "mean_cost": mean_cost, "cycles": curve.len() }));
    append_results(
        &cfg.results,
        &[ResultRow::new("pg", &method, cfg.seed, "success_rate", succ), ResultRow::new("pg", &method, cfg.seed, "mean_cost", mean_cost)],
    )
}

#[derive(Debug, Args, Serialize)]
pub struct BcFlags {
    #[arg(long)]
    world: Option<String>,
    #[arg(long)]
    demos: Option<usize>,
    /// Tree depth of the sub-goal model.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<TreeOrSeq>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, value_parser = finite)]
    lr: Option<f64>,
    #[arg(long)]
    eval_pairs: Option<usize>,
    /// Step cap of sequential rollouts.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Demonstrations are read from here if it exists, else generated and written.
    #[arg(long)]
    expert_cache: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    results: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcCliConfig {
    world: Option<String>,
    demos: usize,
    depth: usize,
    method: TreeOrSeq,
    steps: usize,
    batch_size: usize,
    lr: f64,
    eval_pairs: usize,
    max_steps: usize,
    expert_cache: Option<PathBuf>,
    seed: u64,
    out: Option<PathBuf>,
    results: Option<PathBuf>,
}

impl Default for BcCliConfig {
    fn default() -> Self {
        let d = BcConfig::default();
        BcCliConfig {
            world: None,
            demos: 5000,
            depth: 4,
            method: TreeOrSeq::Sgt,
            steps: d.steps,
            batch_size: d.batch_size,
            lr: d.lr,
            eval_pairs: 200,
            max_steps: 400,
            expert_cache: None,
            seed: 0,
            out: None,
            results: None,
        }
    }
}

fn expert_data(w: &World2D, cfg: &BcCliConfig) -> Result<ExpertDataset, CliError> {
    if let Some(p) = &cfg.expert_cache {
        if p.is_file() {
            return ExpertDataset::read_jsonl(BufReader::new(File::open(p)?)).map_err(|e| CliError::BadConfig(format!("{}: {e}", p.display())));
        }
    }
    let data = generate_expert_dataset(w, cfg.demos, cfg.seed);
    if let Some(p) = &cfg.expert_cache {
        let mut f = io::BufWriter::new(File::create(p)?);
        data.write_jsonl(&mut f)?;
        f.flush()?;
    }
    Ok(data)
}

pub fn bc(file: Option<&Path>, flags: &BcFlags) -> Result<(), CliError> {
    let cfg: BcCliConfig = resolve(file, flags)?;
    let w = load_world(&require(&cfg.world, "world")?)?;
    if cfg.demos == 0 || cfg.steps == 0 || cfg.batch_size == 0 || cfg.eval_pairs == 0 || cfg.depth > 16 || !(cfg.lr > 0.0) {
        return Err(CliError::BadConfig("need positive --demos, --steps, --batch-size, --eval-pairs, --lr and --depth <= 16".into()));
    }
    let data = expert_data(&w, &cfg)?;
    let bc_cfg = BcConfig { steps: cfg.steps, batch_size: cfg.batch_size, lr: cfg.lr };
    let (model, losses): (BcModel, Vec<f64>) = match cfg.method {
        TreeOrSeq::Sgt => bc_train_sgt(&data, &bc_cfg, cfg.seed),
        TreeOrSeq::Seq => bc_train_sequential(&data, &bc_cfg, cfg.seed),
    }
    .map_err(|e| CliError::BadConfig(e.to_string()))?;
    if losses.iter().chain(&model.net.params).any(|v| !v.is_finite()) {
        return Err(CliError::NonFinite("behavioural cloning produced a non-finite loss or parameter".into()));
    }
    let method = match cfg.method {
        TreeOrSeq::Sgt => BcMethod::Sgt,
        TreeOrSeq::Seq => BcMethod::Seq,
    };
    let pairs = held_out_pairs(&w, cfg.eval_pairs, cfg.seed);
    let t = Instant::now();
    let rows = evaluate_bc(&w, &model, method, &pairs, cfg.depth, cfg.max_steps);
    let predict_seconds = t.elapsed().as_secs_f64();
    write_csv(cfg.out.as_deref(), &rows)?;
    if let Some(p) = &cfg.out {
        write_resolved(p, &cfg)?;
    }
    let n = rows.len() as f64;
    let succ = rows.iter().filter(|r| r.success).count() as f64 / n;
    let calls = rows.iter().map(|r| r.model_calls as f64).sum::<f64>() / n;
    let name = if method == BcMethod::Sgt { "sgt" } else { "seq" };
    eprintln!("{}", json!({ "method": name, "success_rate": succ, "mean_model_calls": calls, "predict_seconds": predict_seconds }));
    append_results(
        &cfg.results,
        &[ResultRow::new("bc", name, cfg.seed, "success_rate", succ), ResultRow::new("bc", name, cfg.seed, "mean_model_calls", calls)],
    )
}

#[derive(Debug, Args, Serialize)]
pub struct ReportFlags {
    /// Rows appended by `--results` of the other subcommands.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Experiment to keep: fitted, pg, bc, perturb, or table1/table2/table3.
    #[arg(long)]
    table: Option<String>,
    /// Markdown destination (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary destination (default `<out>.json`).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    results: Option<PathBuf>,
    table: Option<String>,
    out: Option<PathBuf>,
    json: Option<PathBuf>,
}

pub fn report(file: Option<&Path>, flags: &ReportFlags) -> Result<(), CliError> {
    let cfg: ReportConfig = resolve(file, flags)?;
    let rows = read_rows(&require(&cfg.results, "results")?)?;
    let only = cfg.table.as_deref().map(|t| match t {
        "table1" => "fitted",
        "table2" => "pg",
        "table3" => "bc",
        other => other,
    });
    let summary = summarize_rows(&rows, only)?;
    let md = markdown(&summary);
    match &cfg.out {
        Some(p) => fs::write(p, &md)?,
        None => print!("{md}"),
    }
    if let Some(p) = cfg.json.clone().or_else(|| cfg.out.as_ref().map(|p| sibling(p, "json"))) {
        fs::write(p, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(())
}
