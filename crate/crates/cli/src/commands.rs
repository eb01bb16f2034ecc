use std::io::Write;
use std::path::{Path, PathBuf};

use spadsim::dataset::{self, IngestOptions, MANIFEST_FILE};
use spadsim::image_io::{has_image_extension, load_rgb, save_png};
use spadsim::recover::write_flux_raw;
use spadsim::{auto_exposure, intensity_to_flux, mean_bit_density, metrics, synthesize_binary_frame, BitStack};

use crate::config::RunConfig;
use crate::error::CliError;

fn fmt_density(d: [f64; 3]) -> String {
    format!("R={:.6} G={:.6} B={:.6} mean={:.6}", d[0], d[1], d[2], d.iter().sum::<f64>() / 3.0)
}

pub struct SimulateRun {
    pub frames: u64,
    pub auto_expose: Option<f64>,
    pub stem: Option<String>,
}

pub fn simulate(
    mut cfg: RunConfig,
    input: &Path,
    out: &Path,
    run: SimulateRun,
    console: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let SimulateRun { frames, auto_expose, stem } = run;
    if frames == 0 {
        return Err(CliError::Input("--frames must be at least 1".into()));
    }
    let image = load_rgb(input)?;
    let stem = stem.unwrap_or_else(|| input.file_stem().and_then(|s| s.to_str()).unwrap_or("frame").to_string());
    writeln!(log, "seed: {}", cfg.run.seed)?;
    if let Some(target) = auto_expose {
        let flux = intensity_to_flux(&image, &cfg.sensor, input.display().to_string())?;
        let t = auto_exposure(&flux, &cfg.sensor, target)?;
        cfg.sensor.exposure = t;
        writeln!(console, "auto-exposure: T = {t:.6e} s for target density {target}")?;
    }
    let flux = intensity_to_flux(&image, &cfg.sensor, input.display().to_string())?;
    writeln!(console, "exposure: {:.6e} s  config: {}", cfg.sensor.exposure, cfg.sensor.short_hash())?;
    cfg.echo(out)?;

    let mut totals = [0.0; 3];
    for index in 0..frames {
        let frame = synthesize_binary_frame(&flux, &cfg.sensor, cfg.run.seed, index, cfg.sampler)?;
        let path = out.join(frame.file_name(&stem));
        frame.save_png(&path)?;
        let d = frame.channel_density();
        for c in 0..3 {
            totals[c] += d[c];
        }
        if frames <= 16 {
            writeln!(console, "frame {index}: {} -> {}", fmt_density(d), path.display())?;
        }
    }
    let mean = totals.map(|t| t / frames as f64);
    writeln!(console, "density over {frames} frame(s): {}", fmt_density(mean))?;
    writeln!(console, "mean density: {:.6}", mean.iter().sum::<f64>() / 3.0)?;
    Ok(())
}

pub struct DatasetRun {
    pub images_subdir: String,
    pub permissive: bool,
    pub dry_run: bool,
    pub verify: bool,
}

pub fn dataset(
    cfg: RunConfig,
    root: &Path,
    out: &Path,
    run: DatasetRun,
    console: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    writeln!(log, "seed: {}", cfg.run.seed)?;
    writeln!(log, "ingest: {}", root.display())?;
    let ingest = IngestOptions { permissive: run.permissive, images_subdir: run.images_subdir };
    let scenes = dataset::ingest_scene_dir(root, &ingest)?;
    for (path, reason) in &scenes.skipped {
        writeln!(log, "skipped {}: {reason}", path.display())?;
    }
    let opts = cfg.dataset_options();
    let planned = dataset::planned_samples(&scenes, &opts);
    writeln!(
        console,
        "scenes: {}  images: {}  variants per image: {}  planned samples: {planned}",
        scenes.scenes.len(),
        scenes.total_images(),
        opts.variants_per_image
    )?;
    if run.dry_run {
        return Ok(());
    }
    cfg.echo(out)?;
    writeln!(log, "build: {}", out.display())?;
    let manifest = dataset::build_paired_dataset(&scenes, &opts, out)?;
    writeln!(console, "wrote {} samples ({} layout) to {}", manifest.samples.len(), opts.layout, out.display())?;
    if run.verify {
        writeln!(log, "verify: {}", out.join(MANIFEST_FILE).display())?;
        let report = dataset::verify_manifest(&out.join(MANIFEST_FILE))?;
        for row in report.rows.iter().filter(|r| !r.passed()) {
            writeln!(console, "row {} FAILED: {}", row.sample_id, row.problems.join("; "))?;
        }
        for p in &report.structural {
            writeln!(console, "manifest problem: {p}")?;
        }
        writeln!(console, "verify: {}/{} rows passed", report.passed(), report.rows.len())?;
        if !report.all_passed() {
            return Err(CliError::Internal("dataset verification failed".into()));
        }
    }
    Ok(())
}

pub fn metrics(
    reference: &Path,
    test: &Path,
    csv: Option<&Path>,
    lpips_csv: Option<&Path>,
    console: &mut dyn Write,
    log: &mut dyn Write,
) -> Result<(), CliError> {
    let mut report = metrics::evaluate_dirs(reference, test)?;
    if let Some(path) = lpips_csv {
        let merged = report.merge_lpips_csv(path)?;
        writeln!(log, "lpips: merged {merged} value(s) from {}", path.display())?;
    }
    write!(console, "{}", report.table())?;
    if let Some(path) = csv {
        report.write_csv(path)?;
        writeln!(log, "csv: {}", path.display())?;
    }
    Ok(())
}

fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for input in inputs {
        if input.contains(['*', '?', '[']) {
            let mut matched: Vec<PathBuf> = glob::glob(input)
                .map_err(|e| CliError::Input(format!("bad pattern {input:?}: {e}")))?
                .filter_map(Result::ok)
                .filter(|p| p.is_file())
                .collect();
            matched.sort();
            files.extend(matched);
        } else {
            let p = PathBuf::from(input);
            if p.is_dir() {
                let mut v: Vec<PathBuf> = std::fs::read_dir(&p)?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && has_image_extension(p))
                    .collect();
                v.sort();
                files.extend(v);
            } else {
                files.push(p);
            }
        }
    }
    if files.is_empty() {
        return Err(CliError::Input("no frames matched the given inputs".into()));
    }
    Ok(files)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn recover(
    cfg: RunConfig,
    inputs: &[String],
    out: &Path,
    truth_flux: Option<f64>,
    truth_image: Option<&Path>,
    console: &mut dyn Write,
) -> Result<(), CliError> {
    let files = expand_inputs(inputs)?;
    let mut stack: Option<BitStack> = None;
    for f in &files {
        let img = load_rgb(f)?;
        let s = stack.get_or_insert_with(|| BitStack::new(img.width(), img.height()));
        s.push_image(&img).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
    }
    let stack = stack.expect("at least one frame");
    let est = spadsim::estimate_flux_from_bits(&stack, &cfg.sensor)?;
    cfg.echo(out)?;
    save_png(&est.flux.to_image(cfg.sensor.phi_max), &out.join("flux.png"))?;
    write_flux_raw(&est.flux, &out.join("flux.spadflx"))?;
    save_png(&est.mask_image(), &out.join("saturation_mask.png"))?;
    let mean = est.flux.data.iter().sum::<f64>() / est.flux.data.len() as f64;
    writeln!(console, "frames: {}  size: {}x{}", stack.n_frames, stack.width, stack.height)?;
    writeln!(console, "mean recovered flux: {mean:.6e} photons/s")?;
    writeln!(console, "saturated pixel-channels: {}", est.saturated_count())?;

    let truth: Option<Vec<f64>> = match (truth_flux, truth_image) {
        (Some(phi), _) => Some(vec![phi; est.flux.data.len()]),
        (None, Some(path)) => {
            let img = load_rgb(path)?;
            let t = intensity_to_flux(&img, &cfg.sensor, path.display().to_string())?;
            if (t.width, t.height) != (est.flux.width, est.flux.height) {
                return Err(CliError::Input("truth image size differs from frames".into()));
            }
            Some(t.data)
        }
        (None, None) => None,
    };
    if let Some(truth) = truth {
        let errors: Vec<f64> =
            est.flux.data.iter().zip(&truth).filter(|(_, &t)| t > 0.0).map(|(&e, &t)| (e - t).abs() / t).collect();
        match median(errors) {
            Some(m) => writeln!(console, "median relative error: {:.4}%", 100.0 * m)?,
            None => writeln!(console, "median relative error: n/a (truth has no positive flux)")?,
        }
    }
    Ok(())
}

pub fn autoexpose(cfg: RunConfig, input: &Path, target: f64, console: &mut dyn Write) -> Result<(), CliError> {
    let image = load_rgb(input)?;
    let flux = intensity_to_flux(&image, &cfg.sensor, input.display().to_string())?;
    let t = auto_exposure(&flux, &cfg.sensor, target)?;
    let achieved = mean_bit_density(&flux, &cfg.sensor.with_exposure(t))?;
    writeln!(console, "exposure: {t:.9e} s")?;
    writeln!(console, "expected mean density: {achieved:.9}")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }
}
