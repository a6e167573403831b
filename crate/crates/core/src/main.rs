//! Command-line entry point wiring the toolkit into reproducible pipelines.
//!
//! Subcommands: `generate` (task instances), `render` (PNG panels/sheets),
//! `eval-metrics` (disentanglement scores), `train-wren` (one training run),
//! `analyze` (correlation report from CSVs), and `ladder` (the one-shot
//! pipeline: synthetic entanglement ladder -> metrics -> training sweep ->
//! analysis report).
//!
//! Configuration precedence is CLI flag > config file > built-in default;
//! `--config FILE` reads `key = value` lines whose keys are the long flag
//! names. Every artifact-producing command refuses to overwrite existing
//! outputs without `--force` and writes a run manifest next to its outputs.

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

use ravenkit::analysis::{build_report, write_report, ResultsTable};
use ravenkit::error::Error;
use ravenkit::factor::{make_space_named, FactorSpace};
use ravenkit::manifest::ManifestBuilder;
use ravenkit::metrics::{evaluate_metric, write_scores_csv, MetricId, MetricParams, MetricScore};
use ravenkit::nn::save_checkpoint;
use ravenkit::render::{compose_task_sheet, render_panel};
use ravenkit::repr::{make_entanglement_ladder, RepresentationSource, RepresentationTable};
use ravenkit::rng::{mix64, SeededRng};
use ravenkit::rpm::{generate_instance, read_instances_jsonl, write_instances_jsonl};
use ravenkit::wren::{sample_config, train_wren, write_curves_csv, TrainOptions, WrenConfig};

#[derive(Parser)]
#[command(name = "ravenkit", version, about = "Raven-style reasoning task toolkit")]
struct Cli {
    /// Key=value config file supplying defaults for long flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for parallel sweeps (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate task instances as JSON lines.
    Generate(GenerateArgs),
    /// Render instances to PNG panels and task sheets.
    Render(RenderArgs),
    /// Evaluate disentanglement metrics for a representation.
    EvalMetrics(EvalMetricsArgs),
    /// Train one relation network on a representation.
    TrainWren(TrainWrenArgs),
    /// Build the correlation report from scores and curves CSVs.
    Analyze(AnalyzeArgs),
    /// One-shot pipeline: ladder, metrics, training sweep, analysis.
    Ladder(LadderArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Verify exactly one relation-consistent answer per instance.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RenderArgs {
    /// Instances JSONL produced by `generate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Render only the first N instances.
    #[arg(long)]
    limit: Option<usize>,
    /// Skip the individual panel PNGs and write only task sheets.
    #[arg(long)]
    sheets_only: bool,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvalMetricsArgs {
    /// Representation: gt_integer | gt_onehot | permuted_scaled:SEED |
    /// linear_mixed:ALPHA:SEED | path to a representation CSV.
    #[arg(long)]
    repr: String,
    /// Required for oracle representations; optional consistency check for
    /// external files.
    #[arg(long)]
    space: Option<String>,
    /// `all`, `disentanglement`, or a comma-separated list.
    #[arg(long, default_value = "all")]
    metrics: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale factor on every sampling budget (1.0 = the standard protocol).
    #[arg(long, default_value_t = 1.0)]
    budget: f64,
    /// Row key in the scores CSV (defaults to the representation descriptor).
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct TrainWrenArgs {
    #[arg(long)]
    space: String,
    #[arg(long)]
    repr: String,
    /// Seed for the hyperparameter draw.
    #[arg(long, default_value_t = 0)]
    config_seed: u64,
    /// Seed for the instance stream.
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[arg(long, default_value_t = 100_000)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    eval_every: usize,
    #[arg(long, default_value_t = 100)]
    eval_batches: usize,
    #[arg(long)]
    model_id: Option<String>,
    /// Also write final parameters as a binary checkpoint.
    #[arg(long)]
    save_params: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    curves: PathBuf,
    /// Keep every training run as its own row instead of averaging repeats
    /// per representation.
    #[arg(long)]
    raw_runs: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct LadderArgs {
    #[arg(long)]
    space: String,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 3)]
    wren_configs: usize,
    #[arg(long, default_value_t = 2)]
    seeds: usize,
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 1000)]
    eval_every: usize,
    #[arg(long, default_value_t = 100)]
    eval_batches: usize,
    #[arg(long, default_value_t = 0)]
    mix_seed: u64,
    #[arg(long, default_value_t = 0)]
    config_seed: u64,
    #[arg(long, default_value_t = 0)]
    gen_seed: u64,
    #[arg(long, default_value_t = 0)]
    metric_seed: u64,
    /// Scale factor on metric sampling budgets.
    #[arg(long, default_value_t = 1.0)]
    metrics_budget: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

fn main() {
    let argv = apply_config_file(std::env::args_os().collect());
    let cli = Cli::parse_from(argv);
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    let (stage, result) = match cli.command {
        Command::Generate(args) => ("generate", cmd_generate(args)),
        Command::Render(args) => ("render", cmd_render(args)),
        Command::EvalMetrics(args) => ("eval-metrics", cmd_eval_metrics(args)),
        Command::TrainWren(args) => ("train-wren", cmd_train_wren(args)),
        Command::Analyze(args) => ("analyze", cmd_analyze(args)),
        Command::Ladder(args) => ("ladder", cmd_ladder(args)),
    };
    if let Err(err) = result {
        eprintln!("error in stage `{stage}`: {err}");
        std::process::exit(1);
    }
}

/// Merge `--config FILE` key=value pairs into argv as defaults: a key is
/// appended as `--key value` only when the flag is not already present, so
/// explicit flags always win.
fn apply_config_file(mut argv: Vec<std::ffi::OsString>) -> Vec<std::ffi::OsString> {
    let config_pos = argv.iter().position(|a| a == "--config");
    let Some(pos) = config_pos else {
        return argv;
    };
    let Some(path) = argv.get(pos + 1).cloned() else {
        return argv;
    };
    let Ok(text) = std::fs::read_to_string(&path) else {
        eprintln!("error: cannot read config file {}", path.to_string_lossy());
        std::process::exit(2);
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            eprintln!(
                "error: config line {} is not `key = value`: {line}",
                i + 1
            );
            std::process::exit(2);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        let flag = format!("--{key}");
        if argv.iter().any(|a| *a == flag.as_str()) {
            continue;
        }
        if value == "true" {
            argv.push(flag.into());
        } else if value != "false" {
            argv.push(flag.into());
            argv.push(value.into());
        }
    }
    argv
}

type CmdResult = std::result::Result<(), Error>;

fn refuse_existing_file(path: &Path, force: bool) -> CmdResult {
    if path.exists() && !force {
        return Err(Error::OutputExists(path.display().to_string()));
    }
    if path.exists() {
        std::fs::remove_file(path)?;
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

fn refuse_existing_dir(dir: &Path, force: bool) -> CmdResult {
    let sentinel = dir.join("manifest.json");
    if sentinel.exists() && !force {
        return Err(Error::OutputExists(dir.display().to_string()));
    }
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn parse_repr(spec: &str, space_flag: Option<&str>) -> Result<(FactorSpace, RepresentationSource), Error> {
    let oracle = |name: &str| -> Result<FactorSpace, Error> {
        let id = space_flag.ok_or_else(|| {
            Error::InvalidParam(format!("--space is required for oracle repr `{name}`"))
        })?;
        make_space_named(id)
    };
    if spec == "gt_integer" {
        let space = oracle(spec)?;
        let source = RepresentationSource::gt_integer(&space);
        return Ok((space, source));
    }
    if spec == "gt_onehot" {
        let space = oracle(spec)?;
        let source = RepresentationSource::gt_onehot(&space);
        return Ok((space, source));
    }
    if let Some(rest) = spec.strip_prefix("permuted_scaled:") {
        let seed: u64 = rest
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad seed in `{spec}`")))?;
        let space = oracle(spec)?;
        let source = RepresentationSource::permuted_scaled(&space, seed);
        return Ok((space, source));
    }
    if let Some(rest) = spec.strip_prefix("linear_mixed:") {
        let (alpha_s, seed_s) = rest
            .split_once(':')
            .ok_or_else(|| Error::InvalidParam(format!("`{spec}` needs alpha:seed")))?;
        let alpha: f64 = alpha_s
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad alpha in `{spec}`")))?;
        let seed: u64 = seed_s
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad seed in `{spec}`")))?;
        let space = oracle(spec)?;
        let source = RepresentationSource::linear_mixed(&space, alpha, seed)?;
        return Ok((space, source));
    }
    // anything else is a representation CSV path
    let table = RepresentationTable::load_external(spec)?;
    if let Some(id) = space_flag {
        if table.space.as_str() != id {
            return Err(Error::InvalidParam(format!(
                "--space {id} conflicts with manifest space {}",
                table.space
            )));
        }
    }
    let source = RepresentationSource::external(table);
    Ok((source.space().clone(), source))
}

fn parse_metrics(arg: &str) -> Result<Vec<MetricId>, Error> {
    match arg {
        "all" => Ok(MetricId::ALL.to_vec()),
        "disentanglement" => Ok(MetricId::DISENTANGLEMENT.to_vec()),
        list => list.split(',').map(|m| m.trim().parse()).collect(),
    }
}

fn cmd_generate(args: GenerateArgs) -> CmdResult {
    refuse_existing_file(&args.out, args.force)?;
    let space = make_space_named(&args.space)?;
    let mut instances = Vec::with_capacity(args.count);
    for i in 0..args.count {
        instances.push(generate_instance(&space, mix64(args.seed, i as u64), args.strict)?);
    }
    write_instances_jsonl(&args.out, &instances)?;

    let mut manifest = ManifestBuilder::new("generate");
    manifest
        .config("space", &args.space)
        .config("count", args.count)
        .config("strict", args.strict)
        .seed("seed", args.seed)
        .output(&args.out);
    manifest.write(manifest_path_for(&args.out))?;
    println!("wrote {} instances to {}", args.count, args.out.display());
    Ok(())
}

fn manifest_path_for(out_file: &Path) -> PathBuf {
    let mut name = out_file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out_file.with_file_name(name)
}

fn cmd_render(args: RenderArgs) -> CmdResult {
    refuse_existing_dir(&args.out, args.force)?;
    let instances = read_instances_jsonl(&args.input)?;
    let limit = args.limit.unwrap_or(instances.len());
    let mut manifest = ManifestBuilder::new("render");
    manifest.input(&args.input)?;
    for (idx, inst) in instances.iter().take(limit).enumerate() {
        let space = ravenkit::factor::make_space(inst.space);
        inst.validate(&space)?;
        let context: Vec<_> = inst
            .context
            .iter()
            .map(|a| render_panel(&space, a))
            .collect::<Result<_, _>>()?;
        let answers: Vec<_> = inst
            .answers
            .iter()
            .map(|a| render_panel(&space, a))
            .collect::<Result<_, _>>()?;
        if !args.sheets_only {
            for (j, img) in context.iter().enumerate() {
                let path = args.out.join(format!("inst_{idx}_ctx{j}.png"));
                img.save_png(&path)?;
                manifest.output(&path);
            }
            for (j, img) in answers.iter().enumerate() {
                let path = args.out.join(format!("inst_{idx}_ans{j}.png"));
                img.save_png(&path)?;
                manifest.output(&path);
            }
        }
        let sheet = compose_task_sheet(&context, &answers)?;
        let path = args.out.join(format!("inst_{idx}_sheet.png"));
        sheet.save_png(&path)?;
        manifest.output(&path);
    }
    manifest
        .config("limit", limit)
        .config("sheets_only", args.sheets_only);
    manifest.write(args.out.join("manifest.json"))?;
    println!("rendered {} instances into {}", limit, args.out.display());
    Ok(())
}

fn cmd_eval_metrics(args: EvalMetricsArgs) -> CmdResult {
    refuse_existing_file(&args.out, args.force)?;
    let (_, source) = parse_repr(&args.repr, args.space.as_deref())?;
    let metrics = parse_metrics(&args.metrics)?;
    let params = MetricParams::default().scaled(args.budget);
    let model_id = args.model_id.unwrap_or_else(|| source.descriptor());

    let scores: Vec<MetricScore> = metrics
        .par_iter()
        .map(|&m| evaluate_metric(m, &source, args.seed, &params))
        .collect::<Result<_, _>>()?;
    for score in &scores {
        for warning in &score.warnings {
            eprintln!("warning [{}]: {warning}", score.metric);
        }
        println!("{}\t{:.6}", score.metric, score.value);
    }
    write_scores_csv(&args.out, &model_id, &scores)?;

    let mut manifest = ManifestBuilder::new("eval-metrics");
    manifest
        .config("repr", &args.repr)
        .config("metrics", &args.metrics)
        .config("budget", args.budget)
        .config("model_id", &model_id)
        .seed("seed", args.seed)
        .output(&args.out);
    manifest.write(manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_train_wren(args: TrainWrenArgs) -> CmdResult {
    refuse_existing_file(&args.out, args.force)?;
    let (space, source) = parse_repr(&args.repr, Some(&args.space))?;
    let config = sample_config(&mut SeededRng::new(args.config_seed));
    let opts = TrainOptions {
        steps: args.steps,
        batch: args.batch,
        eval_every: args.eval_every,
        eval_batches: args.eval_batches,
        stop_at_accuracy: None,
    };
    let model_id = args.model_id.unwrap_or_else(|| {
        format!("{}_c{}_g{}", source.descriptor(), config.digest(), args.gen_seed)
    });
    let (records, params) = train_wren(&config, &space, &source, args.gen_seed, &opts)?;
    write_curves_csv(&args.out, &model_id, &records)?;

    let config_path = args.out.with_extension("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;
    if let Some(params_path) = &args.save_params {
        save_checkpoint(params_path, &[("g", &params.g), ("f", &params.f)])?;
    }
    if let Some(last) = records.last() {
        println!(
            "{model_id}: accuracy {:.4} at step {}",
            last.eval_accuracy, last.step
        );
    }

    let mut manifest = ManifestBuilder::new("train-wren");
    manifest
        .config("space", &args.space)
        .config("repr", &args.repr)
        .config("steps", args.steps)
        .config("batch", args.batch)
        .config("eval_every", args.eval_every)
        .config("eval_batches", args.eval_batches)
        .config("config_digest", config.digest())
        .config("model_id", &model_id)
        .seed("config_seed", args.config_seed)
        .seed("gen_seed", args.gen_seed)
        .output(&args.out)
        .output(&config_path);
    manifest.write(manifest_path_for(&args.out))?;
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> CmdResult {
    refuse_existing_dir(&args.out, args.force)?;
    let table = ResultsTable::from_csv_files(&args.scores, &args.curves, !args.raw_runs)?;
    let report = build_report(&table)?;
    write_report(&args.out, &report)?;

    let mut manifest = ManifestBuilder::new("analyze");
    manifest
        .config("raw_runs", args.raw_runs)
        .input(&args.scores)?
        .input(&args.curves)?
        .output(args.out.join("report.json"))
        .output(args.out.join("correlations.csv"))
        .output(args.out.join("quartiles.csv"))
        .output(args.out.join("deltas.csv"))
        .output(args.out.join("splits.csv"));
    manifest.write(args.out.join("manifest.json"))?;
    println!(
        "report over {} models, {} checkpoints -> {}",
        report.models,
        report.checkpoints.len(),
        args.out.display()
    );
    Ok(())
}

fn level_model_id(alpha: f64) -> String {
    format!("alpha_{alpha:.2}")
}

fn cmd_ladder(args: LadderArgs) -> CmdResult {
    refuse_existing_dir(&args.out, args.force)?;
    let space = make_space_named(&args.space)?;
    let ladder = make_entanglement_ladder(&space, args.levels, args.mix_seed)?;
    let alphas: Vec<f64> = (0..args.levels)
        .map(|k| k as f64 / (args.levels - 1) as f64)
        .collect();

    // stage 1: metrics per ladder level
    let params = MetricParams::default().scaled(args.metrics_budget);
    let metric_cells: Vec<(usize, MetricId)> = (0..args.levels)
        .flat_map(|l| MetricId::ALL.iter().map(move |&m| (l, m)))
        .collect();
    let scores: Vec<(usize, MetricScore)> = metric_cells
        .par_iter()
        .map(|&(level, metric)| {
            evaluate_metric(metric, &ladder[level], args.metric_seed, &params)
                .map(|s| (level, s))
        })
        .collect::<Result<_, _>>()?;
    let scores_path = args.out.join("scores.csv");
    for level in 0..args.levels {
        let level_scores: Vec<MetricScore> = scores
            .iter()
            .filter(|(l, _)| *l == level)
            .map(|(_, s)| s.clone())
            .collect();
        write_scores_csv(&scores_path, &level_model_id(alphas[level]), &level_scores)?;
    }
    eprintln!("ladder: metrics done for {} levels", args.levels);

    // stage 2: training sweep over (level, config, seed) cells
    let mut config_rng = SeededRng::new(args.config_seed);
    let configs: Vec<WrenConfig> = (0..args.wren_configs)
        .map(|_| sample_config(&mut config_rng))
        .collect();
    std::fs::write(
        args.out.join("configs.json"),
        serde_json::to_string_pretty(&configs)?,
    )?;
    let opts = TrainOptions {
        steps: args.steps,
        batch: args.batch,
        eval_every: args.eval_every,
        eval_batches: args.eval_batches,
        stop_at_accuracy: None,
    };
    let cells: Vec<(usize, usize, usize)> = (0..args.levels)
        .flat_map(|l| {
            (0..args.wren_configs).flat_map(move |c| (0..args.seeds).map(move |s| (l, c, s)))
        })
        .collect();
    let curves: Vec<Vec<ravenkit::wren::TrainRecord>> = cells
        .par_iter()
        .map(|&(level, c, s)| {
            // repetition s reseeds both the parameter init and the stream;
            // levels stay paired by sharing (config, repetition) seeds
            let mut config = configs[c];
            config.seed = mix64(config.seed, s as u64);
            let gen_seed = mix64(args.gen_seed, (c * args.seeds + s) as u64);
            let result = train_wren(&config, &space, &ladder[level], gen_seed, &opts);
            if let Ok((records, _)) = &result {
                eprintln!(
                    "ladder: level {level} config {c} rep {s} done ({} evals, final {:.3})",
                    records.len(),
                    records.last().map(|r| r.eval_accuracy).unwrap_or(f64::NAN)
                );
            }
            result.map(|(records, _)| records)
        })
        .collect::<Result<_, _>>()?;
    let curves_path = args.out.join("curves.csv");
    for (&(level, _, _), records) in cells.iter().zip(&curves) {
        write_curves_csv(&curves_path, &level_model_id(alphas[level]), records)?;
    }

    // stage 3: analysis report
    let table = ResultsTable::from_csv_files(&scores_path, &curves_path, true)?;
    let report = build_report(&table)?;
    let report_dir = args.out.join("report");
    write_report(&report_dir, &report)?;

    let mut manifest = ManifestBuilder::new("ladder");
    manifest
        .config("space", &args.space)
        .config("levels", args.levels)
        .config("wren_configs", args.wren_configs)
        .config("seeds", args.seeds)
        .config("steps", args.steps)
        .config("batch", args.batch)
        .config("eval_every", args.eval_every)
        .config("eval_batches", args.eval_batches)
        .config("metrics_budget", args.metrics_budget)
        .seed("mix_seed", args.mix_seed)
        .seed("config_seed", args.config_seed)
        .seed("gen_seed", args.gen_seed)
        .seed("metric_seed", args.metric_seed)
        .output(&scores_path)
        .output(&curves_path)
        .output(args.out.join("configs.json"))
        .output(report_dir.join("report.json"));
    manifest.write(args.out.join("manifest.json"))?;
    println!(
        "ladder complete: {} levels x {} configs x {} seeds -> {}",
        args.levels,
        args.wren_configs,
        args.seeds,
        args.out.display()
    );
    Ok(())
}
