//! Command-line harness around the positioning library: synthesize
//! detection streams, replay them through the pipeline, calibrate
//! homographies, evaluate runs, and sweep module ablations.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use parkloc::config::PipelineConfig;
use parkloc::detection::read_log;
use parkloc::geometry::{parse_pairs_csv, solve_homography};
use parkloc::metrics::{
    ablation_csv, ablation_sweep, evaluate, metrics_csv, MetricsCsvRow, RunMetrics,
};
use parkloc::pipeline::{read_outcomes, write_outcomes, FrameOutcome, Pipeline};
use parkloc::sim::{
    default_rig, generate_lot, generate_trajectory, load_truth, synthesize_log, write_truth,
    DrivePattern, LotSpec, NoiseSpec, Scenario,
};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "parkloc", version)]
#[command(about = "Parking-lot vehicle positioning from recognized parking numbers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic lot, trajectory, detection log, and truth sidecar
    Sim(SimArgs),
    /// Replay a detection log through the positioning pipeline
    Replay(ReplayArgs),
    /// Solve a camera homography from ground/image point pairs
    Calib(CalibArgs),
    /// Score a replay run against its truth sidecar
    Eval(EvalArgs),
    /// Run the module ablation sweep on a seeded scenario
    Ablate(AblateArgs),
}

#[derive(Args)]
struct SimArgs {
    /// Rows of parking spots
    #[arg(long, default_value_t = 1)]
    rows: u32,
    /// Spots per row
    #[arg(long, default_value_t = 300)]
    spots: u32,
    /// Spacing between neighboring spots, meters
    #[arg(long, default_value_t = 2.2)]
    pitch: f64,
    /// Aisle width, meters
    #[arg(long, default_value_t = 6.0)]
    aisle: f64,
    /// Vehicle speed, m/s
    #[arg(long, default_value_t = 2.0)]
    speed: f64,
    /// Drive pattern: straight-aisle or serpentine
    #[arg(long, default_value = "straight-aisle")]
    pattern: DrivePattern,
    /// Gaussian sigma on box corners, pixels
    #[arg(long = "noise-px", default_value_t = 0.0)]
    noise_px: f64,
    /// Probability a detection's content is replaced by another label
    #[arg(long = "misread-rate", default_value_t = 0.0)]
    misread_rate: f64,
    /// Probability per frame of one injected far-label ghost
    #[arg(long = "ghost-rate", default_value_t = 0.0)]
    ghost_rate: f64,
    /// Probability a visible observation is dropped
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
    /// RNG seed; all randomness derives from it
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Lot map file
    #[arg(long)]
    map: Option<PathBuf>,
    /// Camera rig file
    #[arg(long)]
    rig: Option<PathBuf>,
    /// Detection log to replay
    #[arg(long)]
    log: PathBuf,
    /// Optional TOML config; flags below override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output outcomes file
    #[arg(long)]
    out: PathBuf,
    /// Override modules.afm
    #[arg(long)]
    afm: Option<bool>,
    /// Override modules.mcrp
    #[arg(long)]
    mcrp: Option<bool>,
    /// Override modules.mcap
    #[arg(long)]
    mcap: Option<bool>,
    /// Override filter.capacity
    #[arg(long)]
    capacity: Option<usize>,
    /// Override filter.reset_after_rejections
    #[arg(long = "reset-after")]
    reset_after: Option<u32>,
}

#[derive(Args)]
struct CalibArgs {
    /// CSV of correspondences: ground_x,ground_y,image_u,image_v
    #[arg(long)]
    pairs: PathBuf,
    /// Which camera this calibration belongs to
    #[arg(long, default_value = "front")]
    camera: String,
    /// Rig file to create or update
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Outcomes file from `replay`
    #[arg(long)]
    run: PathBuf,
    /// Truth sidecar from `sim`
    #[arg(long)]
    truth: PathBuf,
    /// Metrics CSV output; omit to print only the table
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    /// Scenario name: standard or serpentine
    #[arg(long, default_value = "standard")]
    scenario: String,
    /// Scenario seed
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Sweep CSV output
    #[arg(long)]
    out: PathBuf,
}

/// Input errors exit with 1, internal failures with 2.
enum CliError {
    Input(anyhow::Error),
    Internal(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    fn message(&self) -> &anyhow::Error {
        match self {
            CliError::Input(e) | CliError::Internal(e) => e,
        }
    }
}

fn input<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Input(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> CliError {
    CliError::Internal(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sim(args) => run_sim(args),
        Command::Replay(args) => run_replay(args),
        Command::Calib(args) => run_calib(args),
        Command::Eval(args) => run_eval(args),
        Command::Ablate(args) => run_ablate(args),
    }
}

fn run_sim(args: SimArgs) -> Result<(), CliError> {
    let lot = LotSpec {
        rows: args.rows,
        spots_per_row: args.spots,
        spot_pitch: args.pitch,
        aisle_width: args.aisle,
    };
    let noise = NoiseSpec {
        pixel_sigma: args.noise_px,
        misread_rate: args.misread_rate,
        dropout_rate: args.dropout,
        ghost_rate: args.ghost_rate,
        seed: args.seed,
    };
    if !(args.noise_px >= 0.0) {
        return Err(input(anyhow!("--noise-px must be non-negative")));
    }
    for (name, p) in [
        ("--misread-rate", args.misread_rate),
        ("--ghost-rate", args.ghost_rate),
        ("--dropout", args.dropout),
    ] {
        if !(0.0..=1.0).contains(&p) {
            return Err(input(anyhow!("{name} out of range: {p}")));
        }
    }

    let map = generate_lot(&lot).map_err(input)?;
    let rig = default_rig();
    let trajectory = generate_trajectory(&lot, args.speed, args.pattern).map_err(input)?;
    let (frames, truth) = synthesize_log(&map, &rig, &trajectory, &noise);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(input)?;
    let log_path = args.out.join("log.jsonl");
    map.save(args.out.join("map.json")).map_err(internal)?;
    rig.save(args.out.join("rig.json")).map_err(internal)?;
    parkloc::detection::write_log(
        BufWriter::new(File::create(&log_path).map_err(internal)?),
        &frames,
    )
    .map_err(internal)?;
    write_truth(
        BufWriter::new(File::create(args.out.join("log.jsonl.truth")).map_err(internal)?),
        &truth,
    )
    .map_err(internal)?;

    eprintln!(
        "wrote {} spots, {} frames to {}",
        map.len(),
        frames.len(),
        args.out.display()
    );
    Ok(())
}

fn load_config(args: &ReplayArgs) -> Result<PipelineConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => PipelineConfig::load(path).map_err(input)?,
        None => PipelineConfig::default(),
    };
    if let Some(v) = args.afm {
        config.modules.afm = v;
    }
    if let Some(v) = args.mcrp {
        config.modules.mcrp = v;
    }
    if let Some(v) = args.mcap {
        config.modules.mcap = v;
    }
    if let Some(v) = args.capacity {
        config.filter.capacity = v;
    }
    if let Some(v) = args.reset_after {
        config.filter.reset_after_rejections = v;
    }
    if let Some(map) = &args.map {
        config.paths.map = Some(map.clone());
    }
    if let Some(rig) = &args.rig {
        config.paths.rig = Some(rig.clone());
    }
    config.validate().map_err(input)?;
    Ok(config)
}

fn run_replay(args: ReplayArgs) -> Result<(), CliError> {
    let config = load_config(&args)?;
    let mut pipeline = Pipeline::from_config(&config).map_err(input)?;

    let reader = read_log(&args.log).map_err(input)?;
    let mut outcomes: Vec<FrameOutcome> = Vec::new();
    for bundle in reader {
        let bundle = bundle.map_err(input)?;
        outcomes.push(pipeline.process_frame(&bundle));
    }
    let mut writer = BufWriter::new(File::create(&args.out).map_err(internal)?);
    write_outcomes(&mut writer, &pipeline.header(), &outcomes).map_err(internal)?;
    writer.flush().map_err(internal)?;

    let n = outcomes.len().max(1);
    let mean: f64 = outcomes.iter().map(|o| o.latency).sum::<f64>() / n as f64;
    let max = outcomes.iter().map(|o| o.latency).fold(0.0, f64::max);
    let with_pose = outcomes.iter().filter(|o| o.pose.is_some()).count();
    eprintln!(
        "replayed {} frames ({} with pose); per-frame latency mean {:.1} us, max {:.1} us",
        outcomes.len(),
        with_pose,
        mean * 1e6,
        max * 1e6
    );
    Ok(())
}

/// Rig file under construction: cameras may still be missing.
#[derive(Default, Serialize, Deserialize)]
struct RigDraft {
    #[serde(skip_serializing_if = "Option::is_none")]
    front: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rear: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<[f64; 9]>,
}

fn run_calib(args: CalibArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.pairs)
        .with_context(|| format!("reading {}", args.pairs.display()))
        .map_err(input)?;
    let pairs = parse_pairs_csv(&text).map_err(input)?;
    let homography = solve_homography(&pairs).map_err(input)?;

    let mut draft: RigDraft = match std::fs::read_to_string(&args.out) {
        Ok(existing) => serde_json::from_str(&existing)
            .with_context(|| format!("parsing existing {}", args.out.display()))
            .map_err(input)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => RigDraft::default(),
        Err(e) => return Err(input(e)),
    };
    let entries = homography.to_row_major();
    match args.camera.as_str() {
        "front" => draft.front = Some(entries),
        "rear" => draft.rear = Some(entries),
        "left" => draft.left = Some(entries),
        "right" => draft.right = Some(entries),
        other => return Err(input(anyhow!("unknown camera {other:?}"))),
    }
    let mut out = serde_json::to_string_pretty(&draft).map_err(internal)?;
    out.push('\n');
    std::fs::write(&args.out, out).map_err(internal)?;
    eprintln!(
        "solved {} camera from {} pairs -> {}",
        args.camera,
        pairs.len(),
        args.out.display()
    );
    Ok(())
}

fn print_metrics_table(m: &RunMetrics, frames: usize) {
    println!("frames                  {frames}");
    println!("frames with pose        {:.1}%", m.frames_with_pose * 100.0);
    println!("mean error              {:.4} m", m.precision);
    println!(
        "median / p95 error      {:.4} / {:.4} m",
        m.median_euclid, m.p95_euclid
    );
    println!(
        "x-axis mean/med/p95     {:.4} / {:.4} / {:.4} m",
        m.mean_abs_x, m.median_abs_x, m.p95_abs_x
    );
    println!(
        "y-axis mean/med/p95     {:.4} / {:.4} / {:.4} m",
        m.mean_abs_y, m.median_abs_y, m.p95_abs_y
    );
    println!(
        "filter precision/recall {:.3} / {:.3}",
        m.filter_precision, m.filter_recall
    );
    println!(
        "latency mean/max        {:.1} / {:.1} us",
        m.latency_mean * 1e6,
        m.latency_max * 1e6
    );
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let (header, outcomes) = read_outcomes(BufReader::new(
        File::open(&args.run)
            .with_context(|| format!("opening {}", args.run.display()))
            .map_err(input)?,
    ))
    .map_err(input)?;
    let truth = load_truth(&args.truth).map_err(input)?;
    let metrics = evaluate(&outcomes, &truth).map_err(input)?;

    print_metrics_table(&metrics, outcomes.len());
    if let Some(out) = &args.out {
        let csv = metrics_csv(&[MetricsCsvRow::new(header.modules, &metrics)]);
        write_text(out, &csv)?;
    }
    Ok(())
}

fn run_ablate(args: AblateArgs) -> Result<(), CliError> {
    let scenario = match args.scenario.as_str() {
        "standard" => Scenario::standard(args.seed),
        "serpentine" => Scenario::serpentine(args.seed),
        other => return Err(input(anyhow!("unknown scenario {other:?}"))),
    };
    let rows = ablation_sweep(&scenario).map_err(internal)?;
    let csv = ablation_csv(&rows);
    write_text(&args.out, &csv)?;
    println!("afm mcrp mcap  precision_m");
    for row in &rows {
        let mark = |b: bool| if b { "x" } else { "-" };
        println!(
            "{:>3} {:>4} {:>4}  {:.4}",
            mark(row.flags.afm),
            mark(row.flags.mcrp),
            mark(row.flags.mcap),
            row.metrics.precision
        );
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(internal)
}
