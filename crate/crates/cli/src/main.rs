use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nccdet::filterbank::{fit_hat, HatParams};
use nccdet::harness::{
    report_from_scores, resolve_method, run_benchmark, sliding_detect, BenchConfig, MethodContext,
    DEFAULT_MATCH_RADIUS, DEFAULT_NMS_RADIUS, DEFAULT_THRESHOLD_COUNT, STANDARD_METHODS,
};
use nccdet::irdatagen::{
    generate_dataset, read_dataset, read_frames, split_samples, write_dataset, write_frames, AugmentedSet,
    ClutterKind, CoreSet, DatagenConfig, Frame, CORE_SIZE,
};
use nccdet::nccnet::{init_network, train, NetworkFile, NormMode, TrainConfig};
use nccdet::Patch;

/// Dataset file written by `datagen` inside its output folder.
const DATASET_FILE: &str = "dataset.nccd";

#[derive(Parser)]
#[command(
    name = "nccdet",
    version,
    about = "Learn, export and benchmark NCC filters for small-target detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize frames and a labeled training set
    Datagen(DatagenArgs),
    /// Train a correlation network on a dataset file
    Train(TrainArgs),
    /// Write one filter of a trained network as a text grid
    ExportFilter(ExportArgs),
    /// Fit hat parameters to a filter grid
    FitHat(FitHatArgs),
    /// Run one detector over a frame
    Detect(DetectArgs),
    /// Score several detectors on annotated frames and write ROC tables
    Bench(BenchArgs),
    /// Rebuild ROC tables from a stored scores.csv
    Roc(RocArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Training scenes with negative subsampling
    Standard,
    /// Held-out frames with every clutter kind and no subsampling
    Benchmark,
}

#[derive(Args)]
struct DatagenArgs {
    /// Output folder; receives dataset.nccd, frames/ and truths.csv
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "standard")]
    preset: Preset,
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long)]
    frames_per_scene: Option<usize>,
    /// Comma-separated clutter kinds: sky, terrain, sea-glint, collimator
    #[arg(long, value_delimiter = ',')]
    clutter: Option<Vec<String>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Negatives kept after subsampling (0 keeps all)
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Targets per frame
    #[arg(long)]
    targets: Option<usize>,
    #[arg(long)]
    bad_pixel_rate: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file written by `datagen`
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 1)]
    filters: usize,
    #[arg(long, default_value = "std")]
    norm: NormMode,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    /// Seeds the split, the initial filters and the sample order
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of each class used for training; the rest is held out
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    net: PathBuf,
    /// Filter number, starting at 1
    #[arg(long, default_value_t = 1)]
    index: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitHatArgs {
    /// Filter grid in text form
    #[arg(long)]
    filter: PathBuf,
    /// Where to write the fitted parameters
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MethodOptions {
    /// Hat parameters written by `fit-hat` (defaults to the built-in hat)
    #[arg(long)]
    hat: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NMS_RADIUS)]
    nms_radius: f64,
}

#[derive(Args)]
struct DetectArgs {
    /// Frame in text form
    #[arg(long)]
    frame: PathBuf,
    /// e.g. hat-15, hat-7-fixed, gauss-1.2, mad-ratio, net:<file>, filter:<file>
    #[arg(long)]
    method: String,
    #[arg(long)]
    threshold: f64,
    #[command(flatten)]
    opts: MethodOptions,
    /// CSV of `row,col,score`; printed to stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Folder with frames/ and truths.csv
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated methods; defaults to the standard grid
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    opts: MethodOptions,
    #[arg(long, default_value_t = DEFAULT_MATCH_RADIUS)]
    match_radius: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_COUNT)]
    thresholds: usize,
    /// Record milliseconds per frame in auc.csv
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct RocArgs {
    /// scores.csv written by `bench`
    #[arg(long)]
    scores: PathBuf,
    /// Folder with the frames' truths.csv
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MATCH_RADIUS)]
    match_radius: f64,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_COUNT)]
    thresholds: usize,
}

fn datagen(a: DatagenArgs) -> Result<()> {
    let mut cfg = match a.preset {
        Preset::Standard => DatagenConfig::standard(),
        Preset::Benchmark => DatagenConfig::standard_benchmark(),
    };
    if let Some(v) = a.scenes {
        cfg.scenes = v;
    }
    if let Some(v) = a.frames_per_scene {
        cfg.frames_per_scene = v;
    }
    if let Some(kinds) = a.clutter {
        cfg.clutter = kinds
            .iter()
            .map(|k| k.parse())
            .collect::<nccdet::Result<Vec<ClutterKind>>>()?;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.negatives {
        cfg.negative_budget = (v > 0).then_some(v);
    }
    if let Some(v) = a.width {
        cfg.scene.width = v;
    }
    if let Some(v) = a.height {
        cfg.scene.height = v;
    }
    if let Some(v) = a.targets {
        cfg.scene.target_count = v;
    }
    if let Some(v) = a.bad_pixel_rate {
        cfg.scene.bad_pixel_rate = v;
    }
    let (scenes, data) = generate_dataset(&cfg)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let frames: Vec<Frame> = scenes.into_iter().map(Frame::from).collect();
    write_frames(&frames, &a.out)?;
    write_dataset(&data.samples, a.out.join(DATASET_FILE))?;
    println!(
        "{} frames, {} positives, {} of {} negatives kept",
        frames.len(),
        data.positives,
        data.negatives,
        data.negative_candidates
    );
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let samples = read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let (train_set, held) = split_samples(&samples, a.train_fraction, a.seed)?;
    let augmented = AugmentedSet::new(&train_set)?;
    let mut cfg = TrainConfig {
        max_epochs: a.epochs,
        rng_seed: a.seed,
        ..TrainConfig::default()
    };
    if let Some(v) = a.learning_rate {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.lr_decay {
        cfg.lr_decay = v;
    }
    let init = init_network(a.filters, CORE_SIZE, a.norm, a.seed)?;
    let held_set = CoreSet(&held);
    let held_ref = (!held.is_empty()).then_some(&held_set as &dyn nccdet::nccnet::SampleSource);
    let (net, history) = train(&init, &augmented, held_ref, &cfg)?;
    for e in &history.epochs {
        let acc = e
            .held_out_accuracy
            .map(|a| format!("{a:.4}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "epoch {}: loss {:.5}, filter change {:.4}, held-out accuracy {acc}",
            e.epoch, e.mean_loss, e.filter_change
        );
    }
    NetworkFile {
        network: net,
        config: cfg,
    }
    .save(&a.out)?;
    Ok(())
}

fn export_filter(a: ExportArgs) -> Result<()> {
    let file = NetworkFile::load(&a.net).with_context(|| format!("reading {}", a.net.display()))?;
    let filters = file.network.filters();
    if a.index == 0 || a.index > filters.len() {
        bail!("filter index {} out of range 1..={}", a.index, filters.len());
    }
    fs::write(&a.out, filters[a.index - 1].to_text())?;
    Ok(())
}

fn read_patch(path: &Path) -> Result<Patch> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Patch::read_text(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

fn fit_hat_cmd(a: FitHatArgs) -> Result<()> {
    let fit = fit_hat(&read_patch(&a.filter)?)?;
    fs::write(
        &a.out,
        format!("# similarity {}\n{}\n", fit.similarity, fit.params),
    )?;
    println!("similarity {:.4}: {}", fit.similarity, fit.params);
    Ok(())
}

fn method_context(hat: Option<&Path>) -> Result<MethodContext> {
    let mut ctx = MethodContext::default();
    if let Some(path) = hat {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        ctx.hat = text
            .parse::<HatParams>()
            .with_context(|| format!("parsing {}", path.display()))?;
    }
    Ok(ctx)
}

fn detect(a: DetectArgs) -> Result<()> {
    let ctx = method_context(a.opts.hat.as_deref())?;
    let scorer = resolve_method(&a.method, &ctx)?;
    let frame = read_patch(&a.frame)?;
    let dets = sliding_detect(&frame, &scorer, a.threshold, a.opts.nms_radius)?;
    let mut csv = String::from("row,col,score\n");
    for d in &dets {
        csv.push_str(&format!("{},{},{}\n", d.row, d.col, d.score));
    }
    match a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let frames = read_frames(&a.data).with_context(|| format!("reading frames from {}", a.data.display()))?;
    let ctx = method_context(a.opts.hat.as_deref())?;
    let names = a
        .methods
        .unwrap_or_else(|| STANDARD_METHODS.iter().map(|s| s.to_string()).collect());
    let scorers = names
        .iter()
        .map(|n| resolve_method(n, &ctx))
        .collect::<nccdet::Result<Vec<_>>>()?;
    let cfg = BenchConfig {
        nms_radius: a.opts.nms_radius,
        match_radius: a.match_radius,
        threshold_count: a.thresholds,
        timing: a.timing,
    };
    let report = run_benchmark(&frames, &scorers, &cfg)?;
    report.write_csvs(&a.out_dir)?;
    print!("{}", report.auc_csv());
    Ok(())
}

fn roc(a: RocArgs) -> Result<()> {
    let scores = fs::read_to_string(&a.scores).with_context(|| format!("reading {}", a.scores.display()))?;
    let truths: Vec<_> = read_frames(&a.data)?.into_iter().map(|f| f.truths).collect();
    let cfg = BenchConfig {
        match_radius: a.match_radius,
        threshold_count: a.thresholds,
        ..BenchConfig::default()
    };
    let report = report_from_scores(&scores, &truths, &cfg)?;
    fs::create_dir_all(&a.out_dir)?;
    fs::write(a.out_dir.join("roc.csv"), report.roc_csv())?;
    fs::write(a.out_dir.join("auc.csv"), report.auc_csv())?;
    print!("{}", report.auc_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Datagen(a) => datagen(a),
        Command::Train(a) => train_cmd(a),
        Command::ExportFilter(a) => export_filter(a),
        Command::FitHat(a) => fit_hat_cmd(a),
        Command::Detect(a) => detect(a),
        Command::Bench(a) => bench(a),
        Command::Roc(a) => roc(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
