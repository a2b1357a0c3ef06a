mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{CliError, EXIT_USAGE};
use qsm_core::training::LossWeights;

/// Quantitative susceptibility mapping toolkit: phantoms, forward
/// simulation, phase preprocessing, classical inversions, metrics and
/// training-data preparation.
///
/// Every command writes a JSON run manifest (config snapshot, input and
/// output hashes, wall time). Set QSM_THREADS to cap the worker count.
#[derive(Parser)]
#[command(name = "qsm", version)]
pub struct Cli {
    /// TOML or JSON run config; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Manifest path [default: manifest.json in the output directory, or <out>.manifest.json]
    #[arg(long, global = true, value_name = "FILE")]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Render a phantom spec to χ, mask, label and magnitude volumes
    Phantom(PhantomArgs),
    /// Forward-simulate field maps for a set of head orientations
    Simulate(SimulateArgs),
    /// Unwrap phase, convert to ppm and remove the background field
    Prep(PrepArgs),
    /// Reconstruct susceptibility with TKD, COSMOS or the edge-weighted solver
    Recon(ReconArgs),
    /// Multi-orientation reconstruction from a simulate scan index
    Cosmos(CosmosArgs),
    /// Compare a map with a reference: pSNR, RMSE, HFEN, SSIM (JSON on stdout)
    Metrics(MetricsArgs),
    /// Per-ROI means and their spread across maps (JSON on stdout)
    RoiStats(RoiStatsArgs),
    /// Cut aligned patches from training pairs into a .qpatch file
    Patches(PatchesArgs),
    /// Evaluate the training losses for a prediction and label (JSON on stdout)
    Loss(LossArgs),
    /// Write a tilted copy of a training pair with a regenerated field
    Augment(AugmentArgs),
    /// Export the dipole kernel as a dimensionless volume
    Kernel(KernelArgs),
}

/// Three comma-separated values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triple<T>(pub [T; 3]);

impl<T: FromStr> FromStr for Triple<T>
where
    T::Err: std::fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<T> = s.split(',').map(|p| p.trim().parse::<T>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
        match <[T; 3]>::try_from(parts) {
            Ok(a) => Ok(Triple(a)),
            Err(_) => Err(format!("expected three comma-separated values, got {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Qvol,
    Nii,
}

impl Format {
    pub fn ext(self) -> &'static str {
        match self {
            Format::Qvol => "qvol",
            Format::Nii => "nii",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Tkd,
    Cosmos,
    Medi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    X,
    Y,
}

#[derive(Args)]
pub struct PhantomArgs {
    /// Phantom spec JSON [default: built-in brain-like phantom]
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Grid size
    #[arg(long, default_value = "64,64,64", value_name = "NX,NY,NZ")]
    pub dims: Triple<usize>,
    /// Voxel size in mm
    #[arg(long, default_value = "1,1,1", value_name = "DX,DY,DZ")]
    pub voxel: Triple<f64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Qvol)]
    pub format: Format,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Susceptibility map, ppm
    #[arg(long)]
    pub chi: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Number of standard tilts: 1, 3 or 5 [config: simulate.orientations]
    #[arg(long)]
    pub orientations: Option<usize>,
    /// Tilt angle in degrees [config: simulate.tilt_deg]
    #[arg(long)]
    pub tilt_deg: Option<f64>,
    /// Gaussian field noise σ in ppm [config: simulate.noise_sigma_ppm]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Noise seed [config: simulate.seed]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write wrapped phase at the configured TE and B0
    #[arg(long)]
    pub phase: bool,
    #[arg(long, value_enum, default_value_t = Format::Qvol)]
    pub format: Format,
}

#[derive(Args)]
pub struct PrepArgs {
    /// Wrapped phase, radians
    #[arg(long)]
    pub phase: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Echo time in seconds [config: acquisition.te_s]
    #[arg(long)]
    pub te: Option<f64>,
    /// Field strength in tesla [config: acquisition.b0_t]
    #[arg(long)]
    pub b0: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Qvol)]
    pub format: Format,
}

#[derive(Args)]
pub struct ReconArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// Local field, ppm (tkd, medi)
    #[arg(long, required_if_eq_any = [("method", "tkd"), ("method", "medi")])]
    pub field: Option<PathBuf>,
    /// Mask (tkd, medi)
    #[arg(long, required_if_eq_any = [("method", "tkd"), ("method", "medi")])]
    pub mask: Option<PathBuf>,
    /// Magnitude image for the edge mask (medi) [default: the mask]
    #[arg(long)]
    pub magnitude: Option<PathBuf>,
    /// Scan index written by `simulate` (cosmos)
    #[arg(long, required_if_eq("method", "cosmos"))]
    pub scans: Option<PathBuf>,
    /// Output volume (.qvol or .nii)
    #[arg(long)]
    pub out: PathBuf,
    /// B0 direction in the image frame
    #[arg(long, default_value = "0,0,1", value_name = "X,Y,Z")]
    pub b0_dir: Triple<f64>,
    /// Set the penalty weight from a phase-domain λ using the configured TE and B0 (medi)
    #[arg(long)]
    pub lambda_phase: Option<f64>,
}

#[derive(Args)]
pub struct CosmosArgs {
    /// Scan index written by `simulate`
    #[arg(long)]
    pub scans: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MetricsArgs {
    #[arg(long = "ref", value_name = "VOL")]
    pub reference: PathBuf,
    #[arg(long, value_name = "VOL")]
    pub test: PathBuf,
    #[arg(long, value_name = "VOL")]
    pub mask: PathBuf,
    /// Also write the JSON report here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RoiStatsArgs {
    /// Label volume (integer ROI ids, 0 = background)
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Susceptibility map; repeat for several maps
    #[arg(long = "map", required = true)]
    pub maps: Vec<PathBuf>,
    /// Restrict to these labels
    #[arg(long, value_delimiter = ',')]
    pub rois: Option<Vec<u32>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct PatchesArgs {
    /// Network input (local field); repeat once per pair
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Label (χ); repeat once per pair
    #[arg(long = "label", required = true)]
    pub labels: Vec<PathBuf>,
    /// Mask; repeat once per pair
    #[arg(long = "mask", required = true)]
    pub masks: Vec<PathBuf>,
    /// Output .qpatch file
    #[arg(long)]
    pub out: PathBuf,
    /// [config: patches.patch_size]
    #[arg(long)]
    pub patch_size: Option<usize>,
    /// Per-axis overlap fraction [config: patches.overlap]
    #[arg(long)]
    pub overlap: Option<f64>,
}

#[derive(Args)]
pub struct LossArgs {
    /// Prediction, ppm
    #[arg(long)]
    pub chi: PathBuf,
    /// Label, ppm
    #[arg(long)]
    pub label: PathBuf,
    /// w1,w2,w3 for model, L1 and gradient terms [config: loss]
    #[arg(long, value_name = "W1,W2,W3")]
    pub weights: Option<LossWeights>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct AugmentArgs {
    /// Label (χ), ppm
    #[arg(long)]
    pub label: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Seed for the random tilt [config: augment.seed]
    #[arg(long, conflicts_with = "angle")]
    pub seed: Option<u64>,
    /// Fixed tilt in degrees, at most 30 in magnitude
    #[arg(long, allow_hyphen_values = true, requires = "axis")]
    pub angle: Option<f64>,
    #[arg(long, value_enum)]
    pub axis: Option<Axis>,
    #[arg(long, value_enum, default_value_t = Format::Qvol)]
    pub format: Format,
}

#[derive(Args)]
pub struct KernelArgs {
    #[arg(long, value_name = "NX,NY,NZ")]
    pub dims: Triple<usize>,
    #[arg(long, default_value = "1,1,1", value_name = "DX,DY,DZ")]
    pub voxel: Triple<f64>,
    #[arg(long, default_value = "0,0,1", value_name = "X,Y,Z")]
    pub b0_dir: Triple<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("QSM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("QSM_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Other(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match configure_threads().and_then(|_| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qsm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
