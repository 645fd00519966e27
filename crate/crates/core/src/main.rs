use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use laf::datasets::{default_data_dir, gen_scalar_test, gen_scalar_train, write_records, TargetKind};
use laf::harness::checks::{self, CheckRow, Sabotage};
use laf::harness::{
    self, evaluate_sweep, load, load_weights, persist, persist_weights, results_csv, restarts_study, run_experiment,
    summarize, Arch, ExperimentConfig, ModelKind, RunRecord, StudyConfig, Task, LAF_BLOCK,
};
use laf::laf::{format_linear, format_unit, units_from_tensor, LafParams};
use laf::seed::derive_seed;
use laf::{Error, Result};

#[derive(Parser)]
#[command(name = "laf", version, about = "Learnable set aggregation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scalar set records ("K,x_1,...,x_K,label" per line).
    Gen(GenArgs),
    /// Train one model and evaluate it over the test sweep.
    Train(TrainArgs),
    /// Re-evaluate a trained run on freshly generated test sets.
    Eval(EvalArgs),
    /// Train (target, model) cells and write plot-ready per-M CSV.
    Sweep(SweepArgs),
    /// Restart study of raw LAF layers with growing unit counts.
    Study(StudyArgs),
    /// Check every preset against brute-force aggregators.
    PresetCheck(PresetCheckArgs),
    /// Run all finite-difference gradient suites.
    GradCheck(GradCheckArgs),
    /// Print learned units of a run or study as formulas.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value = "scalar", value_parser = parse_task)]
    task: Task,
    #[arg(long, value_parser = parse_target)]
    target: TargetKind,
    #[arg(long = "M", default_value_t = 10)]
    m: usize,
    #[arg(short = 'n', long, default_value_t = 1000)]
    n: usize,
    /// `test` produces label-diversified sets.
    #[arg(long, value_enum, default_value = "train")]
    split: SplitArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModelArgs {
    /// JSON experiment config; other model flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "scalar", value_parser = parse_task)]
    task: Task,
    #[arg(long, default_value = "laf", value_parser = parse_model, value_delimiter = ',')]
    model: Vec<ModelKind>,
    #[arg(long, default_value = "sum", value_parser = parse_target, value_delimiter = ',')]
    target: Vec<TargetKind>,
    /// Full-size data and 100 epochs instead of the desk defaults.
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    val_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    train_m: Option<usize>,
    #[arg(long)]
    mnist_images: Option<usize>,
    /// Test cardinality bounds, e.g. 5,10,25,50.
    #[arg(long = "Ms", value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    /// Directory with the MNIST IDX files (default: $LAF_DATA_DIR or data/mnist).
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    /// Parallel runs when several cells are requested.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    run: PathBuf,
    #[arg(long = "Ms", value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    #[arg(short = 'n', long)]
    n: Option<usize>,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_target)]
    target: TargetKind,
    #[arg(long, value_delimiter = ',', default_value = "1,3,6,9,12,15,18,21")]
    units: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SabotageArg {
    Mean,
}

#[derive(Args)]
struct PresetCheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 1000)]
    cases: usize,
    #[arg(long, value_enum, hide = true)]
    sabotage: Option<SabotageArg>,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    cases: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[command(flatten)]
    common: Common,
    /// A `train`/`sweep` output directory or a `study` output directory.
    #[arg(long)]
    run: PathBuf,
    /// For studies: how many restarts to show per unit count (best first).
    #[arg(long, default_value_t = 1)]
    top: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_target(s: &str) -> std::result::Result<TargetKind, String> {
    s.parse()
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_task(s: &str) -> std::result::Result<Task, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Why a command stopped without an I/O or usage problem.
enum Outcome {
    Ok,
    CheckFailed,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| Error::Io {
        path: tmp.clone(),
        source: e,
    })?;
    std::fs::rename(&tmp, path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn to_json<T: Serialize>(path: &Path, v: &T) -> Result<Vec<u8>> {
    serde_json::to_vec_pretty(v).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_gen(a: GenArgs) -> Result<Outcome> {
    if a.task != Task::Scalar {
        return Err(Error::Config(
            "gen writes digit records; MNIST sets are built from them at training time, use --task scalar".into(),
        ));
    }
    let samples = match a.split {
        SplitArg::Train => gen_scalar_train(a.target, a.n, a.m, a.common.seed)?,
        SplitArg::Test => {
            let t = gen_scalar_test(a.target, a.n, a.m, a.common.seed)?;
            if !t.stratified {
                eprintln!("warning: labels are constant for this target and M; test sets are not stratified");
            }
            t.samples
        }
    };
    write_records(&a.out, &samples)?;
    println!("wrote {} records to {}", samples.len(), a.out.display());
    Ok(Outcome::Ok)
}

fn configs(m: &ModelArgs, seed: u64) -> Result<Vec<ExperimentConfig>> {
    if let Some(path) = &m.config {
        return Ok(vec![ExperimentConfig::from_file(path)?]);
    }
    let mut out = Vec::new();
    for &target in &m.target {
        for &model in &m.model {
            let base = if m.full_scale {
                ExperimentConfig::full_scale(m.task, model, target)
            } else {
                ExperimentConfig::desk(m.task, model, target)
            };
            let cfg = ExperimentConfig {
                seed,
                epochs: m.epochs.unwrap_or(base.epochs),
                batch_size: m.batch_size.unwrap_or(base.batch_size),
                lr: m.lr.unwrap_or(base.lr),
                train_size: m.train_size.unwrap_or(base.train_size),
                val_size: m.val_size.unwrap_or(base.val_size),
                test_size: m.test_size.unwrap_or(base.test_size),
                train_m: m.train_m.unwrap_or(base.train_m),
                mnist_images: m.mnist_images.unwrap_or(base.mnist_images),
                sweep: m.ms.clone().unwrap_or_else(|| base.sweep.clone()),
                ..base
            };
            cfg.validate()?;
            out.push(cfg);
        }
    }
    Ok(out)
}

fn print_record(r: &RunRecord) {
    let c = &r.config;
    println!(
        "{} / {} ({}): best epoch {}, final lr {:e}, {:.1}s",
        c.target, c.model, c.task, r.best_epoch, r.final_lr, r.wall_time_s
    );
    for (m, mae) in &r.test_mae {
        println!("  M={:<3} mae={:.6}", m, mae);
    }
}

fn run_and_persist(cfg: &ExperimentConfig, data_dir: &Path, dir: &Path) -> Result<RunRecord> {
    let (record, model) = run_experiment(cfg, data_dir)?;
    persist(&record, dir)?;
    persist_weights(&model, dir)?;
    Ok(record)
}

fn cmd_train(a: TrainArgs) -> Result<Outcome> {
    let cfgs = configs(&a.model, a.common.seed)?;
    if cfgs.len() != 1 {
        return Err(Error::Config("train takes a single --target and --model; use sweep for several".into()));
    }
    let data_dir = a.model.data_dir.clone().unwrap_or_else(default_data_dir);
    let record = run_and_persist(&cfgs[0], &data_dir, &a.out)?;
    print_record(&record);
    Ok(Outcome::Ok)
}

fn cmd_sweep(a: SweepArgs) -> Result<Outcome> {
    let cfgs = configs(&a.model, a.common.seed)?;
    let data_dir = a.model.data_dir.clone().unwrap_or_else(default_data_dir);
    if cfgs.len() == 1 {
        let record = run_and_persist(&cfgs[0], &data_dir, &a.out)?;
        print_record(&record);
        return Ok(Outcome::Ok);
    }
    let results = harness::parallel_map(a.jobs, &cfgs, |cfg| {
        let dir = a.out.join(format!("{}-{}", cfg.target, cfg.model));
        run_and_persist(cfg, &data_dir, &dir)
    });
    let mut combined: Vec<u8> = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        let r = r?;
        print_record(&r);
        let csv = results_csv(&r)?;
        // Keep the header only once.
        let body = if i == 0 {
            &csv[..]
        } else {
            let nl = csv.iter().position(|&b| b == b'\n').map_or(csv.len(), |p| p + 1);
            &csv[nl..]
        };
        combined.extend_from_slice(body);
    }
    write_file(&a.out.join(harness::RESULTS_FILE), &combined)?;
    Ok(Outcome::Ok)
}

fn cmd_eval(a: EvalArgs) -> Result<Outcome> {
    let record = load(&a.run)?;
    let model = load_weights(&a.run)?;
    if model.arch != Arch::Scalar {
        return Err(Error::Config("eval re-scores scalar-task runs only; MNIST runs report their sweep at training time".into()));
    }
    let sweep = a.ms.unwrap_or_else(|| record.config.sweep.clone());
    let n = a.n.unwrap_or(record.config.test_size);
    let seed = derive_seed(a.common.seed, "eval", 0);
    let test_mae = evaluate_sweep(&model, record.config.target, &sweep, n, seed)?;
    let mut rescored = record.clone();
    rescored.config.seed = a.common.seed;
    rescored.test_mae = test_mae;
    write_file(&a.out, &results_csv(&rescored)?)?;
    for (m, mae) in &rescored.test_mae {
        println!("M={:<3} mae={:.6}", m, mae);
    }
    Ok(Outcome::Ok)
}

#[derive(Serialize, serde::Deserialize)]
struct StudyFileRow {
    units: usize,
    restart: usize,
    mae: f64,
    laf_params: Vec<LafParams>,
    head: Option<String>,
}

const STUDY_FILE: &str = "study.json";

fn cmd_study(a: StudyArgs) -> Result<Outcome> {
    let base = StudyConfig::desk(a.target, a.units.clone(), a.restarts);
    let cfg = StudyConfig {
        seed: a.common.seed,
        epochs: a.epochs.unwrap_or(base.epochs),
        lr: a.lr.unwrap_or(base.lr),
        train_size: a.train_size.unwrap_or(base.train_size),
        test_size: a.test_size.unwrap_or(base.test_size),
        ..base
    };
    let rows = restarts_study(&cfg, a.jobs)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(e.to_string());
    w.write_record(["target", "units", "restart", "mae", "seed"]).map_err(csv_err)?;
    for r in &rows {
        w.write_record([
            cfg.target.to_string(),
            r.units.to_string(),
            r.restart.to_string(),
            r.mae.to_string(),
            cfg.seed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    write_file(&a.out.join("study.csv"), &bytes)?;

    let mut s = csv::Writer::from_writer(Vec::new());
    s.write_record(["units", "min", "q1", "median", "q3", "max", "iqr"]).map_err(csv_err)?;
    println!("target {}: MAE distribution over {} restarts", cfg.target, cfg.restarts);
    for sum in summarize(&rows) {
        println!(
            "  units={:<3} median={:.4} iqr={:.4} [min {:.4}, max {:.4}]",
            sum.units,
            sum.median,
            sum.iqr(),
            sum.min,
            sum.max
        );
        s.write_record(
            [sum.units as f64, sum.min, sum.q1, sum.median, sum.q3, sum.max, sum.iqr()].map(|v| v.to_string()),
        )
        .map_err(csv_err)?;
    }
    let bytes = s.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    write_file(&a.out.join("summary.csv"), &bytes)?;

    let json: Vec<StudyFileRow> = rows
        .into_iter()
        .map(|r| StudyFileRow {
            units: r.units,
            restart: r.restart,
            mae: r.mae,
            laf_params: r.laf_params,
            head: r.head,
        })
        .collect();
    let path = a.out.join(STUDY_FILE);
    write_file(&path, &to_json(&path, &json)?)?;
    Ok(Outcome::Ok)
}

fn report(rows: &[CheckRow], out: Option<&Path>) -> Result<Outcome> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&r.line());
        text.push('\n');
    }
    print!("{text}");
    if let Some(p) = out {
        write_file(p, text.as_bytes())?;
    }
    Ok(if rows.iter().all(|r| r.passed) {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

fn cmd_preset_check(a: PresetCheckArgs) -> Result<Outcome> {
    let sabotage = match a.sabotage {
        Some(SabotageArg::Mean) => Sabotage::Mean,
        None => Sabotage::None,
    };
    let mut rows = checks::preset_suite(a.cases, a.common.seed, sabotage)?;
    rows.extend(checks::limit_monotonicity_suite(a.cases.min(200), a.common.seed)?);
    rows.push(checks::variance_composition(a.cases, a.common.seed)?);
    report(&rows, a.out.as_deref())
}

fn cmd_grad_check(a: GradCheckArgs) -> Result<Outcome> {
    let rows = checks::grad_suites(a.cases, a.common.seed)?;
    report(&rows, a.out.as_deref())
}

fn describe_units(units: &[LafParams], text: &mut String) {
    for (i, u) in units.iter().enumerate() {
        text.push_str(&format!("unit{}: {}\n", i + 1, format_unit(u)));
    }
}

fn cmd_inspect(a: InspectArgs) -> Result<Outcome> {
    let mut text = String::new();
    let study = a.run.join(STUDY_FILE);
    if study.is_file() {
        let bytes = std::fs::read(&study).map_err(|e| Error::Io {
            path: study.clone(),
            source: e,
        })?;
        let mut rows: Vec<StudyFileRow> = serde_json::from_slice(&bytes).map_err(|source| Error::Json {
            path: study.clone(),
            source,
        })?;
        rows.sort_by(|x, y| x.units.cmp(&y.units).then(x.mae.total_cmp(&y.mae)));
        let mut shown = std::collections::BTreeMap::<usize, usize>::new();
        for r in &rows {
            let c = shown.entry(r.units).or_default();
            if *c >= a.top {
                continue;
            }
            *c += 1;
            text.push_str(&format!("units={} restart={} mae={:.4}\n", r.units, r.restart, r.mae));
            describe_units(&r.laf_params, &mut text);
            if let Some(h) = &r.head {
                text.push_str(&format!("linear: {}\n", h));
            }
            text.push('\n');
        }
    } else {
        let record = load(&a.run)?;
        let model = load_weights(&a.run)?;
        text.push_str(&format!(
            "{} / {} ({}), best epoch {}\n",
            record.config.target, record.config.model, record.config.task, record.best_epoch
        ));
        if model.params.contains(LAF_BLOCK) {
            describe_units(&units_from_tensor(model.params.value(LAF_BLOCK)?)?, &mut text);
        } else {
            text.push_str(&format!("fixed pool {}\n", model.kind));
        }
        if model.arch == Arch::Scalar {
            let w = model.params.value("head.w")?.values().to_vec();
            let b = model.params.value("head.b")?.values()[0];
            // Pooled features are unit-major: feature k·10 + j is unit k+1 on coordinate j+1.
            text.push_str(&format!("linear over pooled features: {}\n", format_linear(b, &w, "f")));
        } else if let Some(h) = model.head_formula()? {
            text.push_str(&format!("linear: {}\n", h));
        }
    }
    print!("{text}");
    if let Some(p) = &a.out {
        write_file(p, text.as_bytes())?;
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Study(a) => cmd_study(a),
        Command::PresetCheck(a) => cmd_preset_check(a),
        Command::GradCheck(a) => cmd_grad_check(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io_or_format() {
                3
            } else if matches!(e, Error::Config(_)) {
                2
            } else {
                1
            })
        }
    }
}
