use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uwash::eval::{make_split, run_evaluation, EvalConfig, ModelSource, SplitKind};
use uwash::kv::KvMap;
use uwash::net::{train, ArchConfig, PlateauRule, TrainConfig, UWashModel, WindowDataset};
use uwash::pipeline::{
    duration_breakdown, infer_windows, timeline_svg, track_csv, Smoothing, DEFAULT_FILTER_WINDOW,
    DEFAULT_GAP_MERGE, DEFAULT_INFER_STRIDE,
};
use uwash::scoring::{score, ProfessionalDurations};
use uwash::signal::{load_csv, load_dir, write_dir, DEFAULT_RATE_HZ};
use uwash::synth::{describe, generate, GenSpec};

/// Handwashing gesture segmentation and assessment on 6-axis IMU recordings.
#[derive(Parser, Debug)]
#[command(name = "uwash", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labeled corpus as CSV files.
    Synth(SynthArgs),
    /// Train a model on every series in a corpus directory.
    Train(TrainArgs),
    /// Label every sample of one series and write a track CSV and timeline SVG.
    Infer(InferArgs),
    /// Score a procedure from its gesture durations.
    Score(ScoreArgs),
    /// Train and evaluate under a split protocol, or evaluate a checkpoint.
    Eval(EvalArgs),
    /// Print the architecture, parameter count and serialized size of a checkpoint.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Generator seed.
    #[arg(long)]
    seed: u64,
    /// Key-value generator spec; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of participants [default: 10]
    #[arg(long)]
    participants: Option<usize>,
    /// Number of locations [default: 5]
    #[arg(long)]
    locations: Option<usize>,
    /// Output directory for `<location>_<participant>_<procedure>.csv`,
    /// `spec.kv` and `stats.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct HyperArgs {
    /// Key-value file with architecture and training keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training epochs [default: 500]
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Minibatch size in windows [default: 256]
    #[arg(long)]
    batch: Option<usize>,
    /// Stride between training windows [default: 1]
    #[arg(long)]
    stride: Option<usize>,
    /// Stop when the epoch loss changed by less than `plateau_rel` over this
    /// many epochs; 0 disables [default: 0]
    #[arg(long)]
    plateau_window: Option<usize>,
    /// Relative loss change for the plateau rule [default: 0.001]
    #[arg(long)]
    plateau_rel: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Corpus directory.
    #[arg(long)]
    data: PathBuf,
    /// Initialization and shuffling seed.
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Checkpoint path; the training log goes to `<out>.log.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Series CSV named `<location>_<participant>_<procedure>.csv`.
    #[arg(long)]
    series: PathBuf,
    /// Post-processing: none, mtv, tmf or mtv+tmf.
    #[arg(long, default_value = "none")]
    smooth: String,
    /// Sweep stride for variants without voting.
    #[arg(long, default_value_t = DEFAULT_INFER_STRIDE)]
    stride: usize,
    /// Track CSV path; the timeline is written next to it with an `.svg` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    /// Track CSV with columns `index,t,predicted,ground_truth`.
    #[arg(long, conflicts_with_all = ["series", "checkpoint"])]
    track: Option<PathBuf>,
    /// Score the `ground_truth` column of the track instead of `predicted`.
    #[arg(long, requires = "track")]
    ground_truth: bool,
    /// Series CSV to segment with `--checkpoint`.
    #[arg(long, requires = "checkpoint")]
    series: Option<PathBuf>,
    #[arg(long, requires = "series")]
    checkpoint: Option<PathBuf>,
    /// Post-processing when segmenting a series.
    #[arg(long, default_value = "mtv+tmf")]
    smooth: String,
    /// Sample rate of the track in Hz.
    #[arg(long, default_value_t = DEFAULT_RATE_HZ)]
    rate: f64,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Split protocol: user-dep, lopo or lolo.
    #[arg(long, default_value = "user-dep")]
    split: String,
    /// Evaluate this model on every test fold instead of training.
    #[arg(long, conflicts_with = "seed")]
    checkpoint: Option<PathBuf>,
    /// Seed for per-fold training; required unless `--checkpoint` is given.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory for `report.json`, `confusion_<variant>.csv` and
    /// `participants_<variant>.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Resolves architecture and training settings: flags, then file, then defaults.
fn resolve_hyper(h: &HyperArgs, seed: u64) -> Result<(ArchConfig, TrainConfig)> {
    let mut m = match &h.config {
        Some(p) => KvMap::parse(&read_text(p)?).with_context(|| format!("config {}", p.display()))?,
        None => KvMap::default(),
    };
    let d = TrainConfig::default();
    let epochs = h.epochs.map_or_else(|| m.take_or("epochs", d.epochs), Ok)?;
    let lr = h.lr.map_or_else(|| m.take_or("lr", d.lr), Ok)?;
    let batch = h.batch.map_or_else(|| m.take_or("batch", d.batch_size), Ok)?;
    let stride = h.stride.map_or_else(|| m.take_or("stride", d.window_stride), Ok)?;
    let pr = PlateauRule::default();
    let pw = h.plateau_window.map_or_else(|| m.take_or("plateau_window", 0), Ok)?;
    let prel = h.plateau_rel.map_or_else(|| m.take_or("plateau_rel", pr.rel_change), Ok)?;
    // drop already-overridden keys so they are not reported as unknown
    for k in ["epochs", "lr", "batch", "stride", "plateau_window", "plateau_rel"] {
        m.take_raw(k);
    }
    let arch = ArchConfig::take_from(&mut m)?;
    m.finish().context("config")?;
    let tc = TrainConfig {
        lr,
        batch_size: batch,
        epochs,
        seed,
        window_stride: stride,
        plateau: (pw > 0).then_some(PlateauRule {
            window: pw,
            rel_change: prel,
        }),
    };
    Ok((arch, tc))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.config {
        Some(p) => GenSpec::from_kv(&read_text(p)?)?,
        None => GenSpec::default(),
    };
    spec.seed = a.seed;
    if let Some(v) = a.participants {
        spec.participants = v;
    }
    if let Some(v) = a.locations {
        spec.locations = v;
    }
    let corpus = generate(&spec)?;
    write_dir(&corpus, &a.out)?;
    write_text(&a.out.join("spec.kv"), &spec.to_kv())?;
    let stats = describe(&corpus, ArchConfig::default().input_length)?;
    write_text(&a.out.join("stats.json"), &stats.to_json())?;
    println!(
        "wrote {} series ({} samples, {} windows) to {}",
        stats.series,
        stats.samples,
        stats.windows,
        a.out.display()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let (arch, tc) = resolve_hyper(&a.hyper, a.seed)?;
    let corpus = load_dir(&a.data)?;
    if corpus.is_empty() {
        bail!("no series in {}", a.data.display());
    }
    let refs: Vec<_> = corpus.iter().collect();
    let data = WindowDataset::new(&refs, arch.input_length, tc.window_stride)?;
    let mut model = UWashModel::new(arch, a.seed)?;
    let log = train(&mut model, &data, &tc)?;
    model.save(&a.out)?;
    let mut log_path = a.out.clone().into_os_string();
    log_path.push(".log.csv");
    write_text(Path::new(&log_path), &log.to_csv())?;
    println!(
        "trained {} epochs on {} windows; final loss {:.6}; wrote {}",
        log.epochs.len(),
        data.len(),
        log.final_loss().unwrap_or(f64::NAN),
        a.out.display()
    );
    Ok(())
}

fn smoothed_labels(model: &UWashModel, series: &uwash::signal::SampleSeries, smooth: Smoothing, stride: usize) -> Result<Vec<u8>> {
    let sweep = if smooth.uses_voting() { 1 } else { stride };
    let windows = infer_windows(model, series, sweep)?;
    Ok(smooth.apply(&windows, stride, DEFAULT_FILTER_WINDOW)?.labels)
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    let smooth: Smoothing = a.smooth.parse()?;
    let model = UWashModel::load(&a.checkpoint)?;
    let series = load_csv(&a.series)?;
    let labels = smoothed_labels(&model, &series, smooth, a.stride)?;
    write_text(&a.out, &track_csv(&series, &labels)?)?;
    let svg = a.out.with_extension("svg");
    write_text(&svg, &timeline_svg(&labels, series.labels(), series.rate_hz()))?;
    println!("wrote {} and {}", a.out.display(), svg.display());
    Ok(())
}

/// Reads one label column of a track CSV.
fn read_track(path: &Path, column: &str) -> Result<Vec<u8>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("{}: empty track", path.display()))?;
    let col = header
        .split(',')
        .position(|h| h.trim() == column)
        .ok_or_else(|| anyhow!("{}: no `{column}` column", path.display()))?;
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let field = l.split(',').nth(col).unwrap_or("").trim();
            match field.parse::<u8>() {
                Ok(v) if v < 10 => Ok(v),
                _ => Err(anyhow!("{}: line {}: bad label {field:?}", path.display(), i + 2)),
            }
        })
        .collect()
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let (labels, rate) = match (&a.track, &a.series, &a.checkpoint) {
        (Some(t), _, _) => {
            let col = if a.ground_truth { "ground_truth" } else { "predicted" };
            (read_track(t, col)?, a.rate)
        }
        (None, Some(s), Some(c)) => {
            let model = UWashModel::load(c)?;
            let series = load_csv(s)?;
            let labels = smoothed_labels(&model, &series, a.smooth.parse()?, DEFAULT_INFER_STRIDE)?;
            (labels, series.rate_hz())
        }
        _ => bail!("give --track, or --series with --checkpoint"),
    };
    if labels.is_empty() {
        bail!("track is empty");
    }
    let durations = duration_breakdown(&labels, rate, DEFAULT_GAP_MERGE).gesture_durations();
    let report = score(&durations, &ProfessionalDurations::WHO)?;
    match &a.out {
        Some(p) => write_text(p, &report.to_json())?,
        None => println!("{}", report.to_json()),
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let kind: SplitKind = a.split.parse()?;
    let corpus = load_dir(&a.data)?;
    let plan = make_split(&corpus, kind)?;
    let fixed = a.checkpoint.as_deref().map(UWashModel::load).transpose()?;
    let (arch, tc) = match (&fixed, a.seed) {
        (Some(m), _) => (m.config().clone(), TrainConfig::default()),
        (None, Some(seed)) => resolve_hyper(&a.hyper, seed)?,
        (None, None) => bail!("--seed is required when training (no --checkpoint)"),
    };
    let source = match &fixed {
        Some(m) => ModelSource::Fixed(m),
        None => ModelSource::Train,
    };
    let cfg = EvalConfig {
        arch,
        train: tc,
        ..EvalConfig::default()
    };
    let report = run_evaluation(&corpus, &plan, &source, &cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_text(&a.out.join("report.json"), &report.to_json())?;
    for (name, m) in &report.aggregate {
        write_text(&a.out.join(format!("confusion_{name}.csv")), &m.confusion.to_csv())?;
        write_text(&a.out.join(format!("participants_{name}.csv")), &m.participant_csv())?;
    }
    for m in Smoothing::ALL {
        let r = report.variant(m);
        println!(
            "{:8} accuracy {:.4}  mF1 {:.4}  mean participant accuracy {:.4}",
            m.name(),
            r.accuracy,
            r.prf.macro_f1,
            r.mean_participant_accuracy
        );
    }
    Ok(())
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let model = UWashModel::load(&a.checkpoint)?;
    let size = model.size_report();
    use uwash::nn::Module;
    println!("# architecture");
    print!("{}", model.config().to_kv());
    println!("# parameters");
    for (name, p) in model.named_params() {
        println!("{name} {:?}{}", p.value.shape(), if p.trainable { "" } else { " (buffer)" });
    }
    println!("trainable_parameters = {}", model.parameter_count());
    println!("stored_values = {}", size.stored_values);
    println!("payload_bits = {}", size.payload_bits);
    println!("overhead_bits = {}", size.overhead_bits);
    println!("total_bits = {}", size.total_bits);
    println!("size_kbits = {:.3}", size.kbits());
    Ok(())
}

fn run(cli: &Cli) -> (&'static str, Result<()>) {
    match &cli.command {
        Command::Synth(a) => ("synth", cmd_synth(a)),
        Command::Train(a) => ("train", cmd_train(a)),
        Command::Infer(a) => ("infer", cmd_infer(a)),
        Command::Score(a) => ("score", cmd_score(a)),
        Command::Eval(a) => ("eval", cmd_eval(a)),
        Command::Inspect(a) => ("inspect", cmd_inspect(a)),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: args: {}", one_line(first.trim_start_matches("error: ")));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        (_, Ok(())) => ExitCode::SUCCESS,
        (origin, Err(e)) => {
            eprintln!("error: {origin}: {}", one_line(&format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
