//! `spadsim` command-line front end. The binary is a thin wrapper around
//! [`main_entry`]; [`run`] executes one invocation in-process with its
//! report and progress lines sent to the given writers.

mod commands;
mod config;
mod error;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spadsim::dataset::Layout;
use spadsim::SampleMode;

use crate::config::{FileConfig, Overrides};
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "spadsim", version, about = "Single-photon camera simulation and paired dataset toolkit")]
pub struct Cli {
    /// TOML config file with [sensor], [sampler], [augment], [dataset] and [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed for all randomized steps (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "SPADSIM_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct SensorFlags {
    /// Detection efficiency in (0, 1].
    #[arg(long)]
    q: Option<f64>,
    /// Dead time in seconds.
    #[arg(long)]
    tau_d: Option<f64>,
    /// Exposure time in seconds.
    #[arg(long)]
    exposure: Option<f64>,
    /// Flux (photons/s) assigned to intensity 255.
    #[arg(long)]
    phi_max: Option<f64>,
    /// Decode sRGB gamma before mapping intensities to flux.
    #[arg(long)]
    linearize_srgb: bool,
    /// Count sampling law: exact (renewal) or gaussian.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<SampleMode>,
    /// Per-pixel cap on simulated detections.
    #[arg(long)]
    iteration_cap: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate binary SPC frame(s) from an RGB image.
    Simulate {
        /// RGB input image.
        input: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Number of frames in the burst.
        #[arg(long, default_value_t = 1)]
        frames: u64,
        /// Solve the exposure for this mean bit density before simulating.
        #[arg(long)]
        auto_expose: Option<f64>,
        /// File stem for outputs (defaults to the input stem).
        #[arg(long)]
        stem: Option<String>,
        #[command(flatten)]
        sensor: SensorFlags,
    },
    /// Build an augmented paired (binary, RGB) dataset from scene images.
    Dataset {
        /// Folder of images, or of scene folders each holding an images/ subfolder.
        root: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Augmented variants per source image (default 10).
        #[arg(long)]
        variants: Option<u32>,
        /// paired (A/ and B/ trees) or combined (side-by-side images).
        #[arg(long, value_parser = parse_layout)]
        layout: Option<Layout>,
        /// Fraction of samples assigned to the val split (default 0.05).
        #[arg(long)]
        val_fraction: Option<f64>,
        /// Zoom range as LO,HI.
        #[arg(long, value_parser = parse_range)]
        zoom_range: Option<(f64, f64)>,
        /// Rotation range in degrees as LO,HI.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        rotation_range: Option<(f64, f64)>,
        /// Shear range as LO,HI.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        shear_range: Option<(f64, f64)>,
        /// Per-scene image folder for scene-tree layouts.
        #[arg(long, default_value = "images")]
        images_subdir: String,
        /// Skip undecodable images instead of failing.
        #[arg(long)]
        permissive: bool,
        /// Print the planned sample count and exit without writing.
        #[arg(long)]
        dry_run: bool,
        /// Verify the manifest after building.
        #[arg(long)]
        verify: bool,
        #[command(flatten)]
        sensor: SensorFlags,
    },
    /// PSNR/SSIM between matching files of two directories.
    Metrics {
        /// Directory of reference images.
        reference: PathBuf,
        /// Directory of test images, matched to references by file stem.
        test: PathBuf,
        /// Write the CSV report here.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// External CSV with image_id,lpips columns to merge.
        #[arg(long)]
        lpips_csv: Option<PathBuf>,
    },
    /// Recover flux from a stack of binary frames.
    Recover {
        /// Frame files, directories of frames, or glob patterns.
        #[arg(required = true)]
        inputs: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Uniform ground-truth flux for error reporting.
        #[arg(long)]
        truth_flux: Option<f64>,
        /// Ground-truth RGB image for error reporting.
        #[arg(long)]
        truth_image: Option<PathBuf>,
        #[command(flatten)]
        sensor: SensorFlags,
    },
    /// Solve the exposure that reaches a target mean bit density.
    Autoexpose {
        /// RGB input image.
        input: PathBuf,
        /// Target mean bit density in (0, 1).
        #[arg(long, default_value_t = 0.5)]
        target: f64,
        #[command(flatten)]
        sensor: SensorFlags,
    },
}

fn parse_mode(s: &str) -> Result<SampleMode, String> {
    s.parse().map_err(|e: spadsim::Error| e.to_string())
}

fn parse_layout(s: &str) -> Result<Layout, String> {
    s.parse().map_err(|e: spadsim::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let parse = |v: &str| v.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok((parse(lo)?, parse(hi)?))
}

impl SensorFlags {
    fn apply(&self, o: &mut Overrides) {
        o.q = self.q;
        o.tau_d = self.tau_d;
        o.exposure = self.exposure;
        o.phi_max = self.phi_max;
        o.linearize_srgb = self.linearize_srgb;
        o.mode = self.mode;
        o.iteration_cap = self.iteration_cap;
    }
}

/// Executes a parsed invocation.
pub fn execute(cli: Cli, console: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let jobs = cli
        .jobs
        .or(file.run.jobs)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Internal(e.to_string()))?;
    writeln!(log, "jobs: {jobs}")?;

    let mut overrides = Overrides { seed: cli.seed, ..Default::default() };
    pool.install(|| match cli.command {
        Command::Simulate { input, out, frames, auto_expose, stem, sensor } => {
            sensor.apply(&mut overrides);
            let cfg = config::resolve(&file, &overrides, "simulate")?;
            let run = commands::SimulateRun { frames, auto_expose, stem };
            commands::simulate(cfg, &input, &out, run, console, log)
        }
        Command::Dataset {
            root,
            out,
            variants,
            layout,
            val_fraction,
            zoom_range,
            rotation_range,
            shear_range,
            images_subdir,
            permissive,
            dry_run,
            verify,
            sensor,
        } => {
            sensor.apply(&mut overrides);
            overrides.variants_per_image = variants;
            overrides.layout = layout;
            overrides.val_fraction = val_fraction;
            overrides.zoom = zoom_range;
            overrides.rotation_deg = rotation_range;
            overrides.shear = shear_range;
            let cfg = config::resolve(&file, &overrides, "dataset")?;
            let opts = commands::DatasetRun { images_subdir, permissive, dry_run, verify };
            commands::dataset(cfg, &root, &out, opts, console, log)
        }
        Command::Metrics { reference, test, csv, lpips_csv } => {
            commands::metrics(&reference, &test, csv.as_deref(), lpips_csv.as_deref(), console, log)
        }
        Command::Recover { inputs, out, truth_flux, truth_image, sensor } => {
            sensor.apply(&mut overrides);
            let cfg = config::resolve(&file, &overrides, "recover")?;
            commands::recover(cfg, &inputs, &out, truth_flux, truth_image.as_deref(), console)
        }
        Command::Autoexpose { input, target, sensor } => {
            sensor.apply(&mut overrides);
            let cfg = config::resolve(&file, &overrides, "autoexpose")?;
            commands::autoexpose(cfg, &input, target, console)
        }
    })
}

/// Parses `args` (including the program name) and executes them.
/// Usage errors are reported as input errors.
pub fn run<I, T>(args: I, console: &mut (dyn Write + Send), log: &mut (dyn Write + Send)) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::Input(e.to_string()))?;
    execute(cli, console, log)
}

/// Process entry point: parses `std::env::args`, runs, and maps errors to
/// exit codes.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli, &mut io::stdout(), &mut io::stderr()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("spadsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
