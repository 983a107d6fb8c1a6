use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use tsc_core::agent::{load_transfer, EpisodeMetrics, QModel};
use tsc_core::experiment::{AgentChoice, ExperimentConfig, ExperimentError};
use tsc_core::flow::{generate_flow, serialize_flow, TurnRatios};
use tsc_core::metrics::{
    compare, long_rows, min_median_max, transfer_ratio, write_comparison_csv, write_long_csv, EvalReport,
};
use tsc_core::nn::{save_weights, ParamStore};
use tsc_core::policy::PolicyName;
use tsc_core::roadnet::{build_grid_with, parse_roadnet, serialize_roadnet, Topology};

const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

/// Bad arguments or inputs, reported with the validation exit code.
#[derive(Debug, Error)]
#[error("{0}")]
struct InputError(String);

fn input(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "tsc", version, about = "Traffic signal control experiments on generated grid networks")]
struct Cli {
    /// Root for relative output paths.
    #[arg(long, env = "TSC_OUTPUT_ROOT", global = true)]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate network or flow files.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Train the configured agent once per seed.
    Train(TrainArgs),
    /// Evaluate the configured controller with drained episodes.
    Eval(EvalArgs),
    /// Evaluate weights on another scenario and report transfer ratios.
    Transfer(TransferArgs),
    /// Cyclic phase order with a pretrained duration network.
    Cycle(CycleArgs),
    /// Rank the rule-based baselines and optional agent results.
    Compare(CompareArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Write a grid road network.
    Net(GenNetArgs),
    /// Write generated demand for a network file.
    Flow(GenFlowArgs),
}

#[derive(Args)]
struct GenNetArgs {
    /// Rows x columns, e.g. 3x4.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
    #[arg(long, default_value = "A")]
    preset: Topology,
    /// East-west road length in meters.
    #[arg(long, default_value_t = 400.0)]
    ew: f64,
    /// North-south road length in meters.
    #[arg(long, default_value_t = 800.0)]
    ns: f64,
    /// Put right turns under signal control.
    #[arg(long)]
    signalized_rights: bool,
    #[arg(long, default_value = "roadnet.json")]
    out: PathBuf,
}

#[derive(Args)]
struct GenFlowArgs {
    /// Network file the routes refer to.
    #[arg(long, default_value = "roadnet.json")]
    net: PathBuf,
    /// Vehicles per second per entry road.
    #[arg(long, default_value_t = 0.1)]
    rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seconds of demand.
    #[arg(long, default_value_t = 3600)]
    horizon: u32,
    /// Left, straight and right probabilities.
    #[arg(long, default_value = "0.1,0.6,0.3", value_parser = parse_ratios)]
    ratios: TurnRatios,
    #[arg(long, default_value = "flow.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Overrides the green time of rule-based controllers, in seconds.
    #[arg(long)]
    action_duration: Option<u32>,
}

#[derive(Args)]
struct WeightArgs {
    /// One weight file for every seed.
    #[arg(long, conflicts_with = "weights_dir")]
    weights: Option<PathBuf>,
    /// Directory with `seed_<n>/weights.bin` per seed, as written by `train`.
    #[arg(long)]
    weights_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Warm-start each seed from weights already in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Args)]
struct TransferArgs {
    /// Config of the target scenario.
    #[command(flatten)]
    config: ConfigArgs,
    /// Weights trained on the source scenario.
    #[arg(long)]
    weights: PathBuf,
    /// Label of the source scenario in the report.
    #[arg(long)]
    train_on: Option<String>,
    /// Label of the target scenario in the report.
    #[arg(long)]
    eval_on: Option<String>,
    /// Travel time of direct training on the target.
    #[arg(long, conflicts_with = "direct_weights")]
    t_train: Option<f64>,
    /// Weights trained directly on the target; trained afresh when neither
    /// this nor `--t-train` is given.
    #[arg(long)]
    direct_weights: Option<PathBuf>,
}

#[derive(Args)]
struct CycleArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Pretrained weights for the duration network.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Continue training the duration network under the cyclic order.
    #[arg(long)]
    fine_tune: bool,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    weights: WeightArgs,
    /// Method the improvements are measured against.
    #[arg(long, default_value = "fixed_time")]
    baseline: String,
    /// Extra `eval_summary.csv` files to include.
    #[arg(long, num_args = 1..)]
    reports: Vec<PathBuf>,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or("expected ROWSxCOLS")?;
    let r: usize = r.trim().parse().map_err(|_| format!("bad row count `{r}`"))?;
    let c: usize = c.trim().parse().map_err(|_| format!("bad column count `{c}`"))?;
    if r == 0 || c == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok((r, c))
}

fn parse_ratios(s: &str) -> Result<TurnRatios, String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let [l, st, r] = v[..] else { return Err("expected three comma-separated probabilities".into()) };
    TurnRatios::new(l, st, r).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if is_validation(&e) { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}

fn is_validation(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<InputError>().is_some()
            || c.downcast_ref::<ExperimentError>().is_some_and(ExperimentError::is_validation)
            || c.downcast_ref::<tsc_core::roadnet::RoadnetError>().is_some()
            || c.downcast_ref::<tsc_core::flow::FlowError>().is_some()
    })
}

fn run(cli: Cli) -> Result<()> {
    let root = cli.output_root.clone();
    let ctx = Ctx { root };
    match cli.command {
        Command::Gen(GenCommand::Net(a)) => gen_net(&ctx, a),
        Command::Gen(GenCommand::Flow(a)) => gen_flow(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Transfer(a) => transfer(&ctx, a),
        Command::Cycle(a) => cycle(&ctx, a),
        Command::Compare(a) => compare_cmd(&ctx, a),
    }
}

struct Ctx {
    root: Option<PathBuf>,
}

impl Ctx {
    fn out_path(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Loads and fully validates a config, then prepares its output
    /// directory with the resolved config.
    fn load(&self, args: &ConfigArgs) -> Result<(ExperimentConfig, PathBuf)> {
        if !args.config.is_file() {
            return Err(input(format!("config file {} not found", args.config.display())));
        }
        let mut cfg = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
        if let Some(d) = &args.out_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(d) = args.action_duration {
            cfg.controller.action_duration = d;
        }
        cfg.validate().with_context(|| format!("validating {}", args.config.display()))?;
        let dir = self.out_path(&cfg.output_dir);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("resolved_config.toml"), cfg.to_toml())?;
        Ok((cfg, dir))
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| anyhow!("{e}"))
}

fn gen_net(ctx: &Ctx, a: GenNetArgs) -> Result<()> {
    let (rows, cols) = a.grid;
    let net = build_grid_with(rows, cols, a.preset, a.ew, a.ns, a.signalized_rights)?;
    let out = ctx.out_path(&a.out);
    write(&out, serialize_roadnet(&net))?;
    println!(
        "wrote {}: {} intersections, {} roads, {} lanes (preset {})",
        out.display(),
        net.intersections.len(),
        net.roads.len(),
        net.lanes.len(),
        a.preset
    );
    Ok(())
}

fn gen_flow(ctx: &Ctx, a: GenFlowArgs) -> Result<()> {
    if a.horizon == 0 {
        return Err(input("--horizon must be positive"));
    }
    if !(a.rate >= 0.0 && a.rate.is_finite()) {
        return Err(input("--rate must be non-negative"));
    }
    let net_path = ctx.out_path(&a.net);
    if !net_path.is_file() {
        return Err(input(format!("network file {} not found (create one with `tsc gen net`)", net_path.display())));
    }
    let text = fs::read_to_string(&net_path).with_context(|| format!("reading {}", net_path.display()))?;
    let net = parse_roadnet(&text).with_context(|| format!("parsing {}", net_path.display()))?;
    let flow = generate_flow(&net, a.rate, &a.ratios, a.horizon, a.seed);
    let out = ctx.out_path(&a.out);
    write(&out, serialize_flow(&flow))?;
    println!("wrote {}: {} vehicles over {} s (seed {})", out.display(), flow.len(), a.horizon, a.seed);
    Ok(())
}

fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed_{seed}"))
}

#[derive(Serialize)]
struct TrainSummary {
    seed: u64,
    episodes: usize,
    best_episode: Option<usize>,
    best_aatt: Option<f64>,
    warm_start: bool,
}

fn train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let (cfg, dir) = ctx.load(&a.config)?;
    let model = QModel::new(cfg.model_config().ok_or_else(|| input("train needs agent = \"full\" or \"lite\""))?);
    let net = cfg.load_network()?;
    model.check_network(&net).map_err(ExperimentError::from)?;
    let mut warm = Vec::new();
    for &seed in &cfg.seeds {
        let path = seed_dir(&dir, seed).join("weights.bin");
        if a.resume && path.is_file() {
            let p = load_transfer(&path, &model).map_err(ExperimentError::from).with_context(|| format!("{}", path.display()))?;
            eprintln!("seed {seed}: warm start from {}", path.display());
            warm.push(Some(p));
        } else {
            if a.resume {
                eprintln!("seed {seed}: no weights at {}, starting fresh", path.display());
            }
            warm.push(None);
        }
    }
    let outcomes: Vec<_> = cfg
        .seeds
        .par_iter()
        .zip(warm)
        .map(|(&seed, initial)| {
            let warm_start = initial.is_some();
            cfg.train(&net, seed, initial).with_context(|| format!("training seed {seed}")).map(|o| (seed, warm_start, o))
        })
        .collect::<Result<_>>()?;
    let mut summary = Vec::new();
    for (seed, warm_start, o) in outcomes {
        let sd = seed_dir(&dir, seed);
        fs::create_dir_all(&sd)?;
        save_weights(&o.params, &sd.join("weights.bin")).context("saving weights")?;
        save_weights(&o.final_params, &sd.join("final_weights.bin")).context("saving weights")?;
        write(&sd.join("metrics.csv"), csv_bytes::<EpisodeMetrics>(&o.history)?)?;
        let aatt = o.best_aatt.map_or("n/a".to_string(), |a| format!("{a:.2}"));
        println!(
            "seed {seed}: best AATT {aatt} at episode {} of {}",
            o.best_episode.map_or("-".to_string(), |e| e.to_string()),
            o.history.len()
        );
        summary.push(TrainSummary {
            seed,
            episodes: o.history.len(),
            best_episode: o.best_episode,
            best_aatt: o.best_aatt,
            warm_start,
        });
    }
    write(&dir.join("train_summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}

enum Weights {
    None,
    File(PathBuf),
    Dir(PathBuf),
}

impl Weights {
    fn from_args(a: &WeightArgs) -> Self {
        match (&a.weights, &a.weights_dir) {
            (Some(f), _) => Weights::File(f.clone()),
            (None, Some(d)) => Weights::Dir(d.clone()),
            (None, None) => Weights::None,
        }
    }

    /// Weights for `seed`, or `None` for a rule-based config.
    fn load(&self, cfg: &ExperimentConfig, seed: u64) -> Result<Option<ParamStore>> {
        let Some(m) = cfg.model_config() else { return Ok(None) };
        let path = match self {
            Weights::None => return Err(input("this config uses a learned agent; pass --weights or --weights-dir")),
            Weights::File(f) => f.clone(),
            Weights::Dir(d) => seed_dir(d, seed).join("weights.bin"),
        };
        if !path.is_file() {
            return Err(input(format!("weight file {} not found", path.display())));
        }
        let p = load_transfer(&path, &QModel::new(m))
            .map_err(ExperimentError::from)
            .with_context(|| format!("loading {}", path.display()))?;
        Ok(Some(p))
    }
}

#[derive(Serialize)]
struct EpisodeRow {
    method: String,
    seed: u64,
    episode: usize,
    aatt: f64,
    throughput: usize,
    unfinished: usize,
    mean_queue: f64,
    max_queue: u32,
}

/// Evaluation of one method over every seed.
struct MethodResult {
    method: String,
    per_seed: Vec<(u64, Vec<EvalReport>)>,
}

impl MethodResult {
    fn seed_means(&self) -> Vec<(u64, EvalReport)> {
        self.per_seed
            .iter()
            .map(|(s, r)| (*s, EvalReport::mean(self.method.clone(), r).expect("at least one episode")))
            .collect()
    }

    /// Median over seeds of the per-seed mean travel time.
    fn median_aatt(&self) -> f64 {
        let v: Vec<f64> = self.seed_means().iter().map(|(_, r)| r.aatt).collect();
        min_median_max(&v).expect("at least one seed").1
    }

    fn episode_rows(&self) -> Vec<EpisodeRow> {
        self.per_seed
            .iter()
            .flat_map(|(seed, reports)| {
                reports.iter().enumerate().map(|(k, r)| EpisodeRow {
                    method: r.method.clone(),
                    seed: *seed,
                    episode: k,
                    aatt: r.aatt,
                    throughput: r.throughput,
                    unfinished: r.unfinished,
                    mean_queue: r.mean_queue,
                    max_queue: r.max_queue,
                })
            })
            .collect()
    }

    fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write(&dir.join(format!("{stem}_episodes.csv")), csv_bytes(&self.episode_rows())?)?;
        let means: Vec<EvalReport> = self.seed_means().into_iter().map(|(_, r)| r).collect();
        let mut buf = Vec::new();
        tsc_core::metrics::write_reports_csv(&means, &mut buf)?;
        write(&dir.join(format!("{stem}_summary.csv")), buf)?;
        let long: Vec<_> = self.seed_means().iter().flat_map(|(s, r)| long_rows(r, *s)).collect();
        let mut buf = Vec::new();
        write_long_csv(&long, &mut buf)?;
        write(&dir.join(format!("{stem}_long.csv")), buf)?;
        Ok(())
    }

    fn print(&self) {
        let v: Vec<f64> = self.seed_means().iter().map(|(_, r)| r.aatt).collect();
        let (lo, med, hi) = min_median_max(&v).expect("at least one seed");
        println!("{}: AATT median {med:.2} s over {} seeds (min {lo:.2}, max {hi:.2})", self.method, v.len());
    }
}

fn evaluate_all(cfg: &ExperimentConfig, weights: &Weights) -> Result<MethodResult> {
    let net = cfg.load_network()?;
    let params: Vec<Option<ParamStore>> = cfg.seeds.iter().map(|&s| weights.load(cfg, s)).collect::<Result<_>>()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .zip(params)
        .map(|(&seed, p)| {
            cfg.evaluate_seed(&net, seed, p.as_ref())
                .with_context(|| format!("evaluating {} (seed {seed})", cfg.method_name()))
                .map(|r| (seed, r))
        })
        .collect::<Result<_>>()?;
    Ok(MethodResult { method: cfg.method_name(), per_seed })
}

fn eval(ctx: &Ctx, a: EvalArgs) -> Result<()> {
    let (cfg, dir) = ctx.load(&a.config)?;
    let weights = Weights::from_args(&a.weights);
    let result = evaluate_all(&cfg, &weights)?;
    result.write(&dir, "eval")?;
    result.print();
    Ok(())
}

#[derive(Serialize)]
struct TransferRow {
    train_on: String,
    eval_on: String,
    seed: u64,
    t_transfer: f64,
    t_train: f64,
    ratio: f64,
}

fn transfer(ctx: &Ctx, a: TransferArgs) -> Result<()> {
    let (cfg, dir) = ctx.load(&a.config)?;
    if cfg.model_config().is_none() {
        return Err(input("transfer needs agent = \"full\" or \"lite\" in the target config"));
    }
    let transferred = evaluate_all(&cfg, &Weights::File(a.weights.clone()))?;
    let direct: Vec<f64> = match (a.t_train, &a.direct_weights) {
        (Some(t), _) => vec![t; cfg.seeds.len()],
        (None, Some(w)) => {
            let r = evaluate_all(&cfg, &Weights::File(w.clone()))?;
            r.seed_means().iter().map(|(_, m)| m.aatt).collect()
        }
        (None, None) => {
            let net = cfg.load_network()?;
            cfg.seeds
                .par_iter()
                .map(|&seed| -> Result<f64> {
                    let o = cfg.train(&net, seed, None).with_context(|| format!("direct training, seed {seed}"))?;
                    let reports = cfg.evaluate_seed(&net, seed, Some(&o.params))?;
                    Ok(EvalReport::mean("direct", &reports).expect("episodes").aatt)
                })
                .collect::<Result<_>>()?
        }
    };
    let train_on = a.train_on.clone().unwrap_or_else(|| {
        a.weights.file_stem().map_or("source".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let eval_on = a.eval_on.clone().unwrap_or_else(|| cfg.network.preset.to_string());
    let mut rows = Vec::new();
    for ((seed, m), t_train) in transferred.seed_means().into_iter().zip(direct) {
        let ratio = transfer_ratio(m.aatt, t_train).map_err(ExperimentError::from)?;
        println!("{train_on} -> {eval_on}, seed {seed}: {:.2} / {t_train:.2} = {ratio:.4}", m.aatt);
        rows.push(TransferRow { train_on: train_on.clone(), eval_on: eval_on.clone(), seed, t_transfer: m.aatt, t_train, ratio });
    }
    write(&dir.join("transfer.csv"), csv_bytes(&rows)?)?;
    Ok(())
}

fn cycle(ctx: &Ctx, a: CycleArgs) -> Result<()> {
    let Some(weights) = a.weights.clone() else {
        return Err(input("cycle needs pretrained duration weights (--weights FILE)"));
    };
    let (mut cfg, dir) = ctx.load(&a.config)?;
    if cfg.controller.agent == AgentChoice::None {
        return Err(input("cycle needs agent = \"full\" or \"lite\""));
    }
    cfg.controller.policy = PolicyName::Cyclic;
    cfg.validate()?;
    write(&dir.join("resolved_config.toml"), cfg.to_toml())?;
    let model = QModel::new(cfg.model_config().expect("agent configured"));
    let pretrained = load_transfer(&weights, &model)
        .map_err(ExperimentError::from)
        .with_context(|| format!("loading {}", weights.display()))?;
    let net = cfg.load_network()?;
    let per_seed: Vec<(u64, Vec<EvalReport>, ParamStore)> = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<_> {
            let params = if a.fine_tune {
                cfg.train(&net, seed, Some(pretrained.clone())).with_context(|| format!("fine-tuning seed {seed}"))?.params
            } else {
                pretrained.clone()
            };
            let reports = cfg.evaluate_seed(&net, seed, Some(&params))?;
            Ok((seed, reports, params))
        })
        .collect::<Result<_>>()?;
    let method = format!("cycle/{}", model.arch());
    for (seed, _, params) in &per_seed {
        let sd = seed_dir(&dir, *seed);
        let flow = cfg.flow_for(&net, *seed, 0)?;
        let log = cfg.run_eval_episode(&net, &flow, Some(params))?;
        write(&sd.join("episode0.log"), log.to_text())?;
        if a.fine_tune {
            save_weights(params, &sd.join("weights.bin")).context("saving weights")?;
        }
    }
    let result = MethodResult {
        method: method.clone(),
        per_seed: per_seed
            .into_iter()
            .map(|(s, r, _)| (s, r.into_iter().map(|x| EvalReport { method: method.clone(), ..x }).collect()))
            .collect(),
    };
    result.write(&dir, "cycle")?;
    result.print();
    Ok(())
}

fn read_summary(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut by_method: Vec<(String, Vec<f64>)> = Vec::new();
    for rec in r.deserialize::<EvalReport>() {
        let rec = rec.with_context(|| format!("parsing {}", path.display()))?;
        match by_method.iter_mut().find(|(m, _)| *m == rec.method) {
            Some((_, v)) => v.push(rec.aatt),
            None => by_method.push((rec.method, vec![rec.aatt])),
        }
    }
    Ok(by_method.into_iter().map(|(m, v)| (m, min_median_max(&v).expect("non-empty").1)).collect())
}

fn compare_cmd(ctx: &Ctx, a: CompareArgs) -> Result<()> {
    let (cfg, dir) = ctx.load(&a.config)?;
    let baselines = [PolicyName::FixedTime, PolicyName::MaxQueue, PolicyName::EfficientMp];
    let mut results: Vec<(String, f64)> = Vec::new();
    for policy in baselines {
        let mut b = cfg.clone();
        b.controller.agent = AgentChoice::None;
        b.controller.policy = policy;
        b.validate()?;
        let r = evaluate_all(&b, &Weights::None)?;
        r.print();
        results.push((r.method.clone(), r.median_aatt()));
    }
    let weights = Weights::from_args(&a.weights);
    if cfg.model_config().is_some() && !matches!(weights, Weights::None) {
        let r = evaluate_all(&cfg, &weights)?;
        r.print();
        results.push((r.method.clone(), r.median_aatt()));
    }
    for path in &a.reports {
        results.extend(read_summary(path)?);
    }
    if !results.iter().any(|(m, _)| *m == a.baseline) {
        let names: Vec<&str> = results.iter().map(|(m, _)| m.as_str()).collect();
        bail!(InputError(format!("baseline `{}` not among {}", a.baseline, names.join(", "))));
    }
    let rows = compare(&results, &a.baseline)?;
    let mut buf = Vec::new();
    write_comparison_csv(&rows, &mut buf)?;
    write(&dir.join("comparison.csv"), buf)?;
    println!("{:<28} {:>10} {:>10}", "method", "AATT (s)", "vs base %");
    for r in &rows {
        println!("{:<28} {:>10.2} {:>10.2}", r.method, r.aatt, r.improvement_pct);
    }
    Ok(())
}
