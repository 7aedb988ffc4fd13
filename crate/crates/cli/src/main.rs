//! `fpm`: simulate stacks, build corpora, reconstruct and evaluate.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O or file format, 4 geometry or
//! validation, 5 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use fpm_core::ap::{ap_reconstruct, ApConfig, Init, Ordering};
use fpm_core::corpus::{build_corpus, load_image_dir, CorpusConfig, Manifest, Setting};
use fpm_core::dataset::{build_cube, prepare_ground_truth, CubeMeta, IntensityCube};
use fpm_core::eval::{
    run_noise_sweep, run_overlap_sweep, summarize, write_records, write_summary, EvalConfig,
    Method, RandomSequence, DEFAULT_NOISE_STDS, DEFAULT_OVERLAPS, NOISE_SWEEP_OVERLAP,
};
use fpm_core::fpc::{payload_checksum, read_cube, write_cube};
use fpm_core::imageio::{load_gray, write_pgm16};
use fpm_core::metrics::{psnr, ssim};
use fpm_core::{
    ErrorClass, FpmError, Frame, IlluminationGrid, NoiseSpec, OverlapGeometry, Pupil, PupilEdge,
    Result,
};

const OUT_DIR_ENV: &str = "FPM_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "fpm",
    version,
    about = "Fourier ptychography simulation, reconstruction and evaluation"
)]
struct Cli {
    /// Worker threads for corpus generation and sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Default directory for outputs when no explicit path is given.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate an unshuffled low-resolution stack from one image.
    Simulate(SimulateArgs),
    /// Build a corpus of shuffled cubes with a manifest.
    GenDataset(GenDatasetArgs),
    /// Reconstruct a high-resolution field from a cube with AP.
    Reconstruct(ReconstructArgs),
    /// Run the overlap and/or noise sweeps over a corpus.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EdgeArg {
    Antialiased,
    Hard,
}

impl From<EdgeArg> for PupilEdge {
    fn from(e: EdgeArg) -> Self {
        match e {
            EdgeArg::Antialiased => PupilEdge::Antialiased,
            EdgeArg::Hard => PupilEdge::Hard,
        }
    }
}

#[derive(Args, Debug)]
struct GridArgs {
    /// LEDs per side of the square array.
    #[arg(long, default_value_t = 5)]
    n_side: usize,
    /// Low-resolution sensor side in pixels.
    #[arg(long, default_value_t = 32)]
    low_res_side: usize,
    #[arg(long, value_enum, default_value = "antialiased")]
    pupil_edge: EdgeArg,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Grayscale PNG or PGM, at least 128×128.
    #[arg(long)]
    input: PathBuf,
    /// Output cube (default: <out-dir>/<stem>.fpc).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Target overlap ratio of neighbouring pupils, in [0, 1).
    #[arg(long, conflicts_with = "spacing")]
    overlap: Option<f64>,
    /// LED spacing in spectrum bins.
    #[arg(long)]
    spacing: Option<f64>,
    /// Pupil radius in bins.
    #[arg(long, default_value_t = 12.0)]
    pupil_radius: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GeometryArg {
    /// Keep the LED spacing fixed and derive the pupil radius.
    FixedSpacing,
    /// Keep the pupil radius fixed and derive the LED spacing.
    FixedRadius,
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    /// Directory of grayscale PNG/PGM images.
    #[arg(long)]
    input: PathBuf,
    /// Corpus directory (default: <out-dir>).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Overlaps for the noiseless sweep.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_OVERLAPS)]
    overlaps: Vec<f64>,
    /// Noise levels for the sweep at 65% overlap.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NOISE_STDS)]
    noise_stds: Vec<f64>,
    #[arg(long, value_enum, default_value = "fixed-spacing")]
    geometry: GeometryArg,
    /// Pupil radius for fixed-radius geometry.
    #[arg(long, default_value_t = 12.0)]
    pupil_radius: f64,
    /// LED spacing for fixed-spacing geometry (default: the spacing that
    /// gives 65% overlap at radius 12).
    #[arg(long)]
    spacing: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 2019)]
    seed: u64,
    /// Distance between 128×128 tile origins.
    #[arg(long, default_value_t = 128)]
    crop_stride: usize,
    /// Use only the central tile of each image.
    #[arg(long)]
    center_only: bool,
    /// Keep channels in canonical order.
    #[arg(long)]
    no_shuffle: bool,
    /// Also write bicubic-upsampled cubes.
    #[arg(long)]
    upsample: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OrderingArg {
    Spiral,
    Raster,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    UpsampledCenter,
    Random,
}

#[derive(Args, Debug)]
struct ApArgs {
    /// Maximum number of sweeps.
    #[arg(long, default_value_t = 50)]
    iterations: usize,
    /// Stop when the relative spectrum change per sweep drops below this.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    #[arg(long, default_value_t = 1e-12)]
    epsilon: f64,
    #[arg(long, value_enum, default_value = "spiral")]
    ordering: OrderingArg,
    #[arg(long, value_enum, default_value = "upsampled-center")]
    init: InitArg,
    /// Seed for random ordering or initialization.
    #[arg(long, default_value_t = 1)]
    ap_seed: u64,
}

impl ApArgs {
    fn config(&self) -> ApConfig {
        ApConfig {
            max_iterations: self.iterations,
            tolerance: self.tolerance,
            epsilon: self.epsilon,
            ordering: match self.ordering {
                OrderingArg::Spiral => Ordering::Spiral,
                OrderingArg::Raster => Ordering::Raster,
                OrderingArg::Random => Ordering::Random { seed: self.ap_seed },
            },
            init: match self.init {
                InitArg::UpsampledCenter => Init::UpsampledCenter,
                InitArg::Random => Init::Random { seed: self.ap_seed },
            },
            ..ApConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct ReconstructArgs {
    /// Raw (not upsampled) cube.
    #[arg(long)]
    input: PathBuf,
    /// Output prefix; writes <prefix>.fpc, <prefix>.pgm and
    /// <prefix>.residuals.csv (default: <out-dir>/<cube stem>.recon).
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    ap: ApArgs,
    /// Ground truth to score against (default: the cube's own reference,
    /// if it exists).
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SweepArg {
    Overlap,
    Noise,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RandomSequenceArg {
    Misassociated,
    OrderOnly,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Corpus directory containing manifest.csv.
    #[arg(long)]
    corpus: PathBuf,
    /// Directory for result tables (default: <out-dir>).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    sweep: SweepArg,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_OVERLAPS)]
    overlaps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_NOISE_STDS)]
    noise_stds: Vec<f64>,
    /// Methods to score: AP, AP-R, FPNET, FPNET-R, baseline-bicubic.
    #[arg(long, value_delimiter = ',', default_value = "AP,AP-R,FPNET,FPNET-R")]
    methods: Vec<Method>,
    /// Meaning of the random sequence for AP-R.
    #[arg(long, value_enum, default_value = "misassociated")]
    random_sequence: RandomSequenceArg,
    #[command(flatten)]
    ap: ApArgs,
}

fn exit_code(e: &FpmError) -> u8 {
    match e.class() {
        ErrorClass::Io => 3,
        ErrorClass::Validation => 4,
        ErrorClass::Numerical => 5,
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("output")
        .to_string()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| FpmError::io(dir, e))
}

fn simulate(args: &SimulateArgs, out_dir: &Path) -> Result<()> {
    let image = load_gray(&args.input)?;
    let object = prepare_ground_truth(&image)?;
    let spacing = match (args.spacing, args.overlap) {
        (Some(s), _) => s,
        (None, overlap) => {
            fpm_core::spacing_for_overlap(overlap.unwrap_or(0.65), args.pupil_radius)?
        }
    };
    let grid = IlluminationGrid::new(
        args.grid.n_side,
        spacing,
        args.pupil_radius,
        object.width(),
        args.grid.low_res_side,
    )?;
    let pupil = Pupil::new(
        args.grid.low_res_side,
        args.pupil_radius,
        args.grid.pupil_edge.into(),
    )?;
    let noise = NoiseSpec::new(args.noise_std, args.noise_seed)?;
    let mut cube = build_cube(&object, &grid, &pupil, &noise, 0)?;
    cube.meta.source_id = stem(&args.input);
    cube.meta.overlap_target = args.overlap.unwrap_or(cube.meta.overlap_achieved);

    let output = args
        .output
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{}.fpc", stem(&args.input))));
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_cube(&cube, &output)?;
    println!("wrote {}", output.display());
    println!("spacing: {:.6}", grid.spacing());
    println!("pupil radius: {:.6}", grid.pupil_radius());
    println!("achieved overlap: {:.6}", grid.achieved_overlap());
    println!("checksum: {:016x}", payload_checksum(&cube));
    Ok(())
}

fn gen_dataset(args: &GenDatasetArgs, out_dir: &Path) -> Result<()> {
    let geometry = match args.geometry {
        GeometryArg::FixedRadius => OverlapGeometry::FixedRadius {
            pupil_radius: args.pupil_radius,
        },
        GeometryArg::FixedSpacing => OverlapGeometry::FixedSpacing {
            spacing: args
                .spacing
                .unwrap_or_else(OverlapGeometry::default_spacing),
        },
    };
    let mut settings: Vec<Setting> = args
        .overlaps
        .iter()
        .map(|&overlap| Setting {
            overlap,
            noise_std: 0.0,
        })
        .collect();
    for &noise_std in &args.noise_stds {
        let s = Setting {
            overlap: NOISE_SWEEP_OVERLAP,
            noise_std,
        };
        if !settings.contains(&s) {
            settings.push(s);
        }
    }
    let cfg = CorpusConfig {
        settings,
        geometry,
        n_side: args.grid.n_side,
        low_res_side: args.grid.low_res_side,
        pupil_edge: args.grid.pupil_edge.into(),
        seed: args.seed,
        crop_stride: args.crop_stride,
        center_only: args.center_only,
        shuffle: !args.no_shuffle,
        upsample: args.upsample,
    };
    let dir = args.output.clone().unwrap_or_else(|| out_dir.to_path_buf());
    let images = load_image_dir(&args.input)?;
    let manifest = build_corpus(images, &cfg, &dir)?;
    println!(
        "wrote {} cubes to {} ({} images skipped)",
        manifest.rows.len(),
        dir.display(),
        manifest.skipped.len()
    );
    Ok(())
}

fn reconstruct(args: &ReconstructArgs, out_dir: &Path) -> Result<()> {
    let cube = read_cube(&args.input)?;
    let grid = cube.grid()?;
    let pupil = cube.pupil()?;
    let cfg = args.ap.config();
    let result = ap_reconstruct(&cube.canonical_stack(), &grid, &pupil, &cfg)?;
    let field = &result.field;
    let amp = Frame::new(field.width(), field.height(), field.amplitude())?;

    let prefix = args
        .output
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{}.recon", stem(&args.input))));
    if let Some(parent) = prefix.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let with_ext = |ext: &str| {
        let mut s = prefix.clone().into_os_string();
        s.push(ext);
        PathBuf::from(s)
    };
    let meta = CubeMeta {
        source_id: cube.meta.source_id.clone(),
        ground_truth: cube.meta.ground_truth.clone(),
        norm_constants: vec![1.0],
        ..CubeMeta::default()
    };
    write_cube(&IntensityCube::from_frame(&amp, meta)?, &with_ext(".fpc"))?;
    write_pgm16(&amp, &with_ext(".pgm"))?;
    let log_path = with_ext(".residuals.csv");
    let mut log = String::from("sweep,residual\n");
    for (i, r) in result.residual_history.iter().enumerate() {
        log.push_str(&format!("{},{r:e}\n", i + 1));
    }
    fs::write(&log_path, log).map_err(|e| FpmError::io(&log_path, e))?;
    println!("sweeps run: {}", result.iterations_run);
    if let Some(r) = result.residual_history.last() {
        println!("final residual: {r:e}");
    }

    let truth_path = args.ground_truth.clone().or_else(|| {
        let rel = &cube.meta.ground_truth;
        (!rel.is_empty())
            .then(|| {
                args.input
                    .parent()
                    .unwrap_or(Path::new("."))
                    .join("..")
                    .join(rel)
            })
            .filter(|p| p.exists())
    });
    if let Some(path) = truth_path {
        let truth = match read_cube(&path) {
            Ok(c) => c.channel_frame(0),
            Err(FpmError::BadMagic) => prepare_truth_image(&path)?,
            Err(e) => return Err(e),
        };
        let est = amp.map(|v| v.clamp(0.0, 1.0));
        println!("psnr_db: {:.4}", psnr(&truth, &est)?);
        println!("ssim: {:.6}", ssim(&truth, &est)?);
    }
    println!("wrote {}", with_ext(".fpc").display());
    Ok(())
}

fn prepare_truth_image(path: &Path) -> Result<Frame> {
    let object = prepare_ground_truth(&load_gray(path)?)?;
    Frame::new(object.width(), object.height(), object.amplitude())
}

fn evaluate(args: &EvaluateArgs, out_dir: &Path) -> Result<()> {
    let manifest = Manifest::read(&args.corpus)?;
    let cfg = EvalConfig {
        methods: args.methods.clone(),
        ap: args.ap.config(),
        random_sequence: match args.random_sequence {
            RandomSequenceArg::Misassociated => RandomSequence::Misassociated,
            RandomSequenceArg::OrderOnly => RandomSequence::OrderOnly,
        },
    };
    cfg.ap.validate()?;
    let dir = args.output.clone().unwrap_or_else(|| out_dir.to_path_buf());
    create_dir(&dir)?;
    let mut sweeps = Vec::new();
    if matches!(args.sweep, SweepArg::Overlap | SweepArg::Both) {
        let records = run_overlap_sweep(&args.corpus, &manifest, &args.overlaps, &cfg)?;
        sweeps.push(("overlap", records));
    }
    if matches!(args.sweep, SweepArg::Noise | SweepArg::Both) {
        let records = run_noise_sweep(&args.corpus, &manifest, &args.noise_stds, &cfg)?;
        sweeps.push(("noise", records));
    }
    for (name, records) in sweeps {
        let path = dir.join(format!("{name}_sweep.csv"));
        write_records(&path, &records)?;
        let summary = summarize(&records);
        write_summary(&dir.join(format!("{name}_summary.csv")), &summary)?;
        println!(
            "{name} sweep: {} records -> {}",
            records.len(),
            path.display()
        );
        for s in &summary {
            println!(
                "  {:<16} overlap {:.2} noise {:.0e} {:<13} psnr {:6.2} ± {:5.2} dB  ssim {:.3}",
                s.method, s.overlap, s.noise_std, s.ordering, s.psnr_mean, s.psnr_std, s.ssim_mean
            );
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(FpmError::Invalid("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| FpmError::Invalid(format!("thread pool: {e}")))?;
    }
    info!("output directory {}", cli.out_dir.display());
    match &cli.command {
        Command::Simulate(a) => simulate(a, &cli.out_dir),
        Command::GenDataset(a) => gen_dataset(a, &cli.out_dir),
        Command::Reconstruct(a) => reconstruct(a, &cli.out_dir),
        Command::Evaluate(a) => evaluate(a, &cli.out_dir),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // clap reports help/version with code 0 and usage errors with 2
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
