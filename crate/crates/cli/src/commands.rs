use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use qsm_core::dipole::{dipole_kernel, field_from_phase, forward_field, phase_from_field, wrap_phase};
use qsm_core::io::{atomic_write, read_volume, write_volume};
use qsm_core::metrics::{compute_metrics, roi_stats};
use qsm_core::phantom::{brain_like, render_phantom, PhantomSpec};
use qsm_core::phase::{laplacian_unwrap, vsharp};
use qsm_core::recon::{cosmos, medi_like, tkd, MediConfig, OrientationScan};
use qsm_core::simulate::{simulate_orientations, standard_tilts, SimulationConfig};
use qsm_core::training::qpatch::write_qpatch;
use qsm_core::training::{augment, augment_dataset, extract_patches, total_loss, AugmentAxis, TrainingPair};
use qsm_core::{apply_mask, Mask, Rotation, Volume3};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::Session;
use crate::{
    AugmentArgs, Axis, Cli, Command, CosmosArgs, Format, KernelArgs, LossArgs, Method, MetricsArgs, PatchesArgs,
    PhantomArgs, PrepArgs, ReconArgs, RoiStatsArgs, SimulateArgs,
};

type Result<T, E = CliError> = std::result::Result<T, E>;

/// Field maps written by `simulate`, paths relative to the index file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanIndex {
    pub mask: String,
    pub scans: Vec<ScanEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanEntry {
    pub field: String,
    pub rotation: Rotation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<String>,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let m = cli.manifest;
    match cli.command {
        Command::Phantom(a) => phantom(a, config, m),
        Command::Simulate(a) => simulate(a, config, m),
        Command::Prep(a) => prep(a, config, m),
        Command::Recon(a) => recon(a, config, m),
        Command::Cosmos(a) => cosmos_cmd(a, config, m),
        Command::Metrics(a) => metrics(a, config, m),
        Command::RoiStats(a) => roi(a, config, m),
        Command::Patches(a) => patches(a, config, m),
        Command::Loss(a) => loss(a, config, m),
        Command::Augment(a) => augment_cmd(a, config, m),
        Command::Kernel(a) => kernel(a, config, m),
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn ensure_parent(file: &Path) -> Result<()> {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_dir(p),
        _ => Ok(()),
    }
}

fn dir_manifest(m: Option<PathBuf>, dir: &Path) -> Option<PathBuf> {
    Some(m.unwrap_or_else(|| dir.join("manifest.json")))
}

fn file_manifest(m: Option<PathBuf>, out: &Path) -> Option<PathBuf> {
    Some(m.unwrap_or_else(|| with_suffix(out, ".manifest.json")))
}

fn read_vol(s: &mut Session, path: &Path) -> Result<Volume3<f64>> {
    s.input(path);
    read_volume(path).map_err(|e| CliError::input(path, e))
}

fn read_mask(s: &mut Session, path: &Path) -> Result<Mask> {
    Ok(Mask::from_volume(&read_vol(s, path)?, 0.5))
}

fn write_vol(s: &mut Session, path: &Path, v: &Volume3<f64>) -> Result<()> {
    write_volume(path, v).map_err(|e| CliError::input(path, e))?;
    s.output(path);
    Ok(())
}

fn write_json(s: &mut Session, path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes()).map_err(|e| CliError::input(path, e))?;
    s.output(path);
    Ok(())
}

/// Prints to stdout and, with `--out`, also writes the file.
fn report(s: &mut Session, out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    let mut stdout = std::io::stdout().lock();
    match writeln!(stdout, "{text}").and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(CliError::io(Path::new("<stdout>"), e)),
        _ => {}
    }
    if let Some(p) = out {
        ensure_parent(p)?;
        write_json(s, p, value)?;
    }
    Ok(())
}

fn named(dir: &Path, stem: &str, format: Format) -> PathBuf {
    dir.join(format!("{stem}.{}", format.ext()))
}

fn phantom(a: PhantomArgs, config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let mut s = Session::new("phantom", config);
    let (dims, vs) = (a.dims.0, a.voxel.0);
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            s.input(p);
            PhantomSpec::from_json(&text).map_err(|e| CliError::input(p, e))?
        }
        None => brain_like(dims, vs)?,
    };
    let ph = render_phantom::<f64>(&spec, dims, vs)?;
    ensure_dir(&a.out_dir)?;
    write_vol(&mut s, &named(&a.out_dir, "chi", a.format), &ph.chi)?;
    write_vol(&mut s, &named(&a.out_dir, "mask", a.format), &ph.mask.to_volume(vs)?)?;
    write_vol(&mut s, &named(&a.out_dir, "labels", a.format), &ph.labels)?;
    write_vol(&mut s, &named(&a.out_dir, "magnitude", a.format), &ph.magnitude())?;
    write_json(&mut s, &a.out_dir.join("spec.json"), &spec)?;
    s.detail("dims", dims);
    s.detail("voxel_size_mm", vs);
    s.detail("mask_voxels", ph.mask.count());
    s.finish(dir_manifest(m, &a.out_dir).as_deref())?;
    Ok(())
}

fn simulate(a: SimulateArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let sim = &mut config.simulate;
    sim.orientations = a.orientations.unwrap_or(sim.orientations);
    sim.tilt_deg = a.tilt_deg.unwrap_or(sim.tilt_deg);
    sim.noise_sigma_ppm = a.noise_sigma.unwrap_or(sim.noise_sigma_ppm);
    sim.seed = a.seed.unwrap_or(sim.seed);
    let cfg = SimulationConfig {
        rotations: standard_tilts(sim.orientations, sim.tilt_deg)?,
        noise_sigma_ppm: sim.noise_sigma_ppm,
        seed: sim.seed,
    };
    let mut s = Session::new("simulate", config);
    let chi = read_vol(&mut s, &a.chi)?;
    let mask = read_mask(&mut s, &a.mask)?;
    let scans = simulate_orientations(&chi, &mask, &cfg)?;

    ensure_dir(&a.out_dir)?;
    let mask_path = named(&a.out_dir, "mask", a.format);
    write_vol(&mut s, &mask_path, &mask.to_volume(chi.voxel_size())?)?;
    let mut entries = Vec::with_capacity(scans.len());
    for (i, scan) in scans.iter().enumerate() {
        let field_path = named(&a.out_dir, &format!("scan_{i}.field"), a.format);
        write_vol(&mut s, &field_path, &scan.field)?;
        let phase = if a.phase {
            let acq = &s.config.acquisition;
            let wrapped = wrap_phase(&phase_from_field(&scan.field, acq.te_s, acq.b0_t)?);
            let p = named(&a.out_dir, &format!("scan_{i}.phase"), a.format);
            write_vol(&mut s, &p, &wrapped)?;
            Some(file_name(&p))
        } else {
            None
        };
        entries.push(ScanEntry { field: file_name(&field_path), rotation: scan.rotation, phase });
    }
    let index = ScanIndex { mask: file_name(&mask_path), scans: entries };
    write_json(&mut s, &a.out_dir.join("scans.json"), &index)?;
    s.detail("orientations", &index.scans);
    s.detail("noise_sigma_ppm", cfg.noise_sigma_ppm);
    s.detail("seed", cfg.seed);
    s.finish(dir_manifest(m, &a.out_dir).as_deref())?;
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn prep(a: PrepArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    config.acquisition.te_s = a.te.unwrap_or(config.acquisition.te_s);
    config.acquisition.b0_t = a.b0.unwrap_or(config.acquisition.b0_t);
    let mut s = Session::new("prep", config);
    let phase = read_vol(&mut s, &a.phase)?;
    let mask = read_mask(&mut s, &a.mask)?;
    let (te, b0) = (s.config.acquisition.te_s, s.config.acquisition.b0_t);
    let unwrapped = laplacian_unwrap(&phase, &mask)?;
    let total = field_from_phase(&unwrapped, te, b0)?;
    let (local, eroded) = vsharp(&total, &mask, &s.config.vsharp)?;
    ensure_dir(&a.out_dir)?;
    write_vol(&mut s, &named(&a.out_dir, "unwrapped", a.format), &unwrapped)?;
    write_vol(&mut s, &named(&a.out_dir, "total_field", a.format), &total)?;
    write_vol(&mut s, &named(&a.out_dir, "local_field", a.format), &local)?;
    write_vol(&mut s, &named(&a.out_dir, "mask", a.format), &eroded.to_volume(phase.voxel_size())?)?;
    s.detail("mask_voxels_in", mask.count());
    s.detail("mask_voxels_out", eroded.count());
    s.finish(dir_manifest(m, &a.out_dir).as_deref())?;
    Ok(())
}

fn load_scans(s: &mut Session, index_path: &Path) -> Result<Vec<OrientationScan<f64>>> {
    let text = std::fs::read_to_string(index_path).map_err(|e| CliError::io(index_path, e))?;
    s.input(index_path);
    let index: ScanIndex = serde_json::from_str(&text).map_err(|e| CliError::input(index_path, e.into()))?;
    let base = index_path.parent().unwrap_or(Path::new("."));
    let mask = read_mask(s, &base.join(&index.mask))?;
    index
        .scans
        .iter()
        .map(|e| {
            let field = read_vol(s, &base.join(&e.field))?;
            Ok(OrientationScan::new(field, e.rotation, mask.clone())?)
        })
        .collect()
}

fn run_cosmos(s: &mut Session, index: &Path, out: &Path) -> Result<()> {
    let scans = load_scans(s, index)?;
    let t = Instant::now();
    let chi = cosmos(&scans, s.config.cosmos.eps)?;
    s.detail("method", "cosmos");
    s.detail("orientations", scans.len());
    s.detail("recon_seconds", t.elapsed().as_secs_f64());
    ensure_parent(out)?;
    write_vol(s, out, &chi)
}

fn recon(a: ReconArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    if let Some(lp) = a.lambda_phase {
        config.medi.lambda = MediConfig::lambda_from_phase_scale(lp, config.acquisition.te_s, config.acquisition.b0_t)?;
    }
    let mut s = Session::new("recon", config);
    if let Some(lp) = a.lambda_phase {
        s.detail("lambda_phase", lp);
    }
    let usage = |what: &str| CliError::Usage(format!("--{what} is required for this method"));
    match a.method {
        Method::Cosmos => run_cosmos(&mut s, a.scans.as_deref().ok_or_else(|| usage("scans"))?, &a.out)?,
        Method::Tkd | Method::Medi => {
            let field = read_vol(&mut s, a.field.as_deref().ok_or_else(|| usage("field"))?)?;
            let mask = read_mask(&mut s, a.mask.as_deref().ok_or_else(|| usage("mask"))?)?;
            let kernel = dipole_kernel::<f64>(field.dims(), field.voxel_size(), a.b0_dir.0)?;
            let t = Instant::now();
            let chi = if a.method == Method::Tkd {
                s.detail("method", "tkd");
                tkd(&field, &kernel, &s.config.tkd, &mask)?
            } else {
                let magnitude = match &a.magnitude {
                    Some(p) => read_vol(&mut s, p)?,
                    None => mask.to_volume(field.voxel_size())?,
                };
                let r = medi_like(&field, &kernel, &magnitude, &s.config.medi, &mask)?;
                s.detail("method", "medi");
                s.detail("objective", &r.objective);
                s.detail("cg_iterations", &r.cg_iterations);
                r.chi
            };
            s.detail("recon_seconds", t.elapsed().as_secs_f64());
            ensure_parent(&a.out)?;
            write_vol(&mut s, &a.out, &chi)?;
        }
    }
    s.finish(file_manifest(m, &a.out).as_deref())?;
    Ok(())
}

fn cosmos_cmd(a: CosmosArgs, config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let mut s = Session::new("cosmos", config);
    run_cosmos(&mut s, &a.scans, &a.out)?;
    s.finish(file_manifest(m, &a.out).as_deref())?;
    Ok(())
}

fn metrics(a: MetricsArgs, config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let mut s = Session::new("metrics", config);
    let reference = read_vol(&mut s, &a.reference)?;
    let test = read_vol(&mut s, &a.test)?;
    let mask = read_mask(&mut s, &a.mask)?;
    let r = compute_metrics(&test, &reference, &mask)?;
    report(&mut s, a.out.as_deref(), &r)?;
    s.finish(m.or_else(|| a.out.as_deref().map(|p| with_suffix(p, ".manifest.json"))).as_deref())?;
    Ok(())
}

fn roi(a: RoiStatsArgs, config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let mut s = Session::new("roi-stats", config);
    let labels = read_vol(&mut s, &a.labels)?;
    let mask = read_mask(&mut s, &a.mask)?;
    let maps = a.maps.iter().map(|p| read_vol(&mut s, p)).collect::<Result<Vec<_>>>()?;
    let stats = roi_stats(&maps, &labels, &mask, a.rois.as_deref())?;
    report(&mut s, a.out.as_deref(), &stats)?;
    s.finish(m.or_else(|| a.out.as_deref().map(|p| with_suffix(p, ".manifest.json"))).as_deref())?;
    Ok(())
}

fn patches(a: PatchesArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    if a.inputs.len() != a.labels.len() || a.inputs.len() != a.masks.len() {
        return Err(CliError::Usage(format!(
            "--input, --label and --mask must be repeated equally often (got {}, {}, {})",
            a.inputs.len(),
            a.labels.len(),
            a.masks.len()
        )));
    }
    config.patches.patch_size = a.patch_size.unwrap_or(config.patches.patch_size);
    config.patches.overlap = a.overlap.unwrap_or(config.patches.overlap);
    let mut s = Session::new("patches", config);
    let mut dataset = None;
    let mut counts = Vec::new();
    for ((i, l), mk) in a.inputs.iter().zip(&a.labels).zip(&a.masks) {
        let input = read_vol(&mut s, i)?;
        let label = read_vol(&mut s, l)?;
        let mask = read_mask(&mut s, mk)?;
        let ds = extract_patches(&input, &label, &mask, &s.config.patches)?;
        counts.push(ds.len());
        match &mut dataset {
            None => dataset = Some(ds),
            Some(all) => all.extend(ds)?,
        }
    }
    let ds = dataset.ok_or_else(|| CliError::Usage("no training pairs given".into()))?;
    ensure_parent(&a.out)?;
    write_qpatch(&a.out, &ds).map_err(|e| CliError::input(&a.out, e))?;
    s.output(&a.out);
    s.detail("records", ds.len());
    s.detail("records_per_pair", counts);
    s.detail("stride", ds.stride);
    s.finish(file_manifest(m, &a.out).as_deref())?;
    Ok(())
}

fn loss(a: LossArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    config.loss = a.weights.unwrap_or(config.loss);
    let mut s = Session::new("loss", config);
    let chi = read_vol(&mut s, &a.chi)?;
    let label = read_vol(&mut s, &a.label)?;
    let kernel = dipole_kernel::<f64>(label.dims(), label.voxel_size(), [0.0, 0.0, 1.0])?;
    let b = total_loss(&chi, &label, &kernel, &s.config.loss)?;
    report(&mut s, a.out.as_deref(), &b)?;
    s.finish(m.or_else(|| a.out.as_deref().map(|p| with_suffix(p, ".manifest.json"))).as_deref())?;
    Ok(())
}

fn augment_cmd(a: AugmentArgs, mut config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    config.augment.seed = a.seed.unwrap_or(config.augment.seed);
    let mut s = Session::new("augment", config);
    let label = read_vol(&mut s, &a.label)?;
    let mask = read_mask(&mut s, &a.mask)?;
    let pair = match (a.angle, a.axis) {
        (Some(angle), Some(axis)) => {
            let axis = match axis {
                Axis::X => AugmentAxis::X,
                Axis::Y => AugmentAxis::Y,
            };
            s.detail("angle_deg", angle);
            s.detail("axis", axis);
            augment(&label, &mask, angle, axis)?
        }
        _ => {
            let kernel = dipole_kernel::<f64>(label.dims(), label.voxel_size(), [0.0, 0.0, 1.0])?;
            let input = apply_mask(&forward_field(&label, &kernel)?, &mask)?;
            let original = TrainingPair { input, label, mask };
            s.detail("seed", s.config.augment.seed);
            augment_dataset(&[original], s.config.augment.seed)?.pop().ok_or_else(|| CliError::Other("augmentation produced no pair".into()))?
        }
    };
    ensure_dir(&a.out_dir)?;
    write_vol(&mut s, &named(&a.out_dir, "input", a.format), &pair.input)?;
    write_vol(&mut s, &named(&a.out_dir, "label", a.format), &pair.label)?;
    write_vol(&mut s, &named(&a.out_dir, "mask", a.format), &pair.mask.to_volume(pair.label.voxel_size())?)?;
    s.finish(dir_manifest(m, &a.out_dir).as_deref())?;
    Ok(())
}

fn kernel(a: KernelArgs, config: RunConfig, m: Option<PathBuf>) -> Result<()> {
    let mut s = Session::new("kernel", config);
    let k = dipole_kernel::<f64>(a.dims.0, a.voxel.0, a.b0_dir.0)?;
    ensure_parent(&a.out)?;
    write_vol(&mut s, &a.out, &k.to_volume()?)?;
    s.detail("b0_dir", a.b0_dir.0);
    s.finish(file_manifest(m, &a.out).as_deref())?;
    Ok(())
}
