//! Paired (binary SPC frame, RGB) dataset construction and verification.
//!
//! For each source image and each of its variants an [`AugmentSpec`] is
//! applied to the clean RGB image (target `B`), and the binary frame `A` is
//! simulated from that augmented image. Sample `i` uses augmentation spec
//! `i` of the master seed and frame key `(seed, frame_index = i)`, so every
//! row of the manifest can be regenerated on its own.

mod ingest;
mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use ingest::{ingest_scene_dir, IngestOptions, Scene, SceneSet};
pub use manifest::{
    DatasetManifest, Layout, ManifestHeader, OutputFile, Record, SampleRecord, Split, MANIFEST_FILE,
    PARTIAL_MANIFEST_FILE,
};

use crate::augment::{apply_affine, AugmentRanges, AugmentSpec};
use crate::config::SensorConfig;
use crate::error::{Error, Result};
use crate::frame::{intensity_to_flux, synthesize_binary_frame};
use crate::image_io::{encode_png, load_rgb};
use crate::rng::fmix;
use crate::sampler::Sampler;

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
const SPLIT_DOMAIN: u64 = 0x5350_4c49_5456_414c; // "SPLITVAL"

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetOptions {
    pub sensor: SensorConfig,
    pub sampler: Sampler,
    pub ranges: AugmentRanges,
    pub variants_per_image: u32,
    pub seed: u64,
    pub layout: Layout,
    pub val_fraction: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            sensor: SensorConfig::default(),
            sampler: Sampler::default(),
            ranges: AugmentRanges::default(),
            variants_per_image: 10,
            seed: 0,
            layout: Layout::Paired,
            val_fraction: 0.05,
        }
    }
}

impl DatasetOptions {
    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.ranges.validate()?;
        if self.variants_per_image == 0 {
            return Err(Error::InvalidConfig("variants_per_image must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.val_fraction) {
            return Err(Error::InvalidConfig(format!("val_fraction {} outside [0, 1]", self.val_fraction)));
        }
        Ok(())
    }
}

/// Number of pairs a build would emit.
pub fn planned_samples(scenes: &SceneSet, opts: &DatasetOptions) -> u64 {
    scenes.total_images() as u64 * u64::from(opts.variants_per_image)
}

/// Deterministic split from a hash of the sample id.
pub fn split_for(sample_id: u64, val_fraction: f64) -> Split {
    let u = (fmix(sample_id ^ SPLIT_DOMAIN) >> 11) as f64 / (1u64 << 53) as f64;
    if u < val_fraction {
        Split::Val
    } else {
        Split::Train
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect()
}

fn sample_name(sample_id: u64, scene: &str, source: &Path) -> String {
    let stem = source.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    format!("{sample_id:06}_{}_{}.png", sanitize(scene), sanitize(stem))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Augmented target and simulated frame for one sample.
pub fn render_pair(
    source: &RgbImage,
    spec: &AugmentSpec,
    sensor: &SensorConfig,
    sampler: Sampler,
    frame_seed: u64,
    frame_index: u64,
) -> Result<(RgbImage, RgbImage)> {
    let target = apply_affine(source, spec)?;
    let flux = intensity_to_flux(&target, sensor, "")?;
    let frame = synthesize_binary_frame(&flux, sensor, frame_seed, frame_index, sampler)?;
    Ok((frame.to_image(), target))
}

fn side_by_side(a: &RgbImage, b: &RgbImage) -> RgbImage {
    let (w, h) = a.dimensions();
    let mut out = RgbImage::new(2 * w, h);
    for (x, y, p) in a.enumerate_pixels() {
        out.put_pixel(x, y, *p);
    }
    for (x, y, p) in b.enumerate_pixels() {
        out.put_pixel(w + x, y, *p);
    }
    out
}

/// Encoded output files `(role, relative path, bytes)` for one sample.
fn encode_outputs(
    layout: Layout,
    split: Split,
    name: &str,
    a: &RgbImage,
    b: &RgbImage,
) -> Result<Vec<(String, String, Vec<u8>)>> {
    let split = split.dir_name();
    Ok(match layout {
        Layout::Paired => vec![
            ("A".into(), format!("A/{split}/{name}"), encode_png(a)?),
            ("B".into(), format!("B/{split}/{name}"), encode_png(b)?),
        ],
        Layout::Combined => vec![("AB".into(), format!("combined/{split}/{name}"), encode_png(&side_by_side(a, b))?)],
    })
}

struct WorkItem<'a> {
    first_sample: u64,
    scene: &'a str,
    source: &'a Path,
}

fn build_image_samples(
    item: &WorkItem<'_>,
    scenes: &SceneSet,
    opts: &DatasetOptions,
    out: &Path,
) -> Result<Vec<SampleRecord>> {
    let source = load_rgb(&scenes.root.join(item.source))
        .map_err(|e| Error::Sample { sample_id: item.first_sample, source: Box::new(e) })?;
    (0..opts.variants_per_image)
        .map(|variant| {
            let sample_id = item.first_sample + u64::from(variant);
            let attribute = |e: Error| Error::Sample { sample_id, source: Box::new(e) };
            let spec = opts.ranges.sample(opts.seed, sample_id);
            let (a, b) =
                render_pair(&source, &spec, &opts.sensor, opts.sampler, opts.seed, sample_id).map_err(attribute)?;
            let split = split_for(sample_id, opts.val_fraction);
            let name = sample_name(sample_id, item.scene, item.source);
            let mut outputs = Vec::new();
            for (role, rel, bytes) in encode_outputs(opts.layout, split, &name, &a, &b).map_err(attribute)? {
                let path = out.join(&rel);
                fs::create_dir_all(path.parent().expect("output has a parent"))?;
                fs::write(&path, &bytes)?;
                outputs.push(OutputFile { role, path: rel, sha256: sha256_hex(&bytes) });
            }
            Ok(SampleRecord {
                sample_id,
                scene: item.scene.to_string(),
                source: item.source.to_string_lossy().replace('\\', "/"),
                variant,
                spec,
                frame_seed: opts.seed,
                frame_index: sample_id,
                split,
                outputs,
            })
        })
        .collect()
}

/// Builds the dataset under `out` and writes `manifest.jsonl`,
/// `train.txt` and `val.txt`.
///
/// Rows are appended to `manifest.jsonl.partial` as samples complete. On
/// failure an `aborted` record is appended and the partial file is left in
/// place; on success the final manifest is written sorted by `sample_id` and
/// the partial file is removed.
pub fn build_paired_dataset(scenes: &SceneSet, opts: &DatasetOptions, out: &Path) -> Result<DatasetManifest> {
    opts.validate()?;
    fs::create_dir_all(out)?;
    let header = ManifestHeader {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        seed: opts.seed,
        sensor: opts.sensor,
        sampler: opts.sampler,
        ranges: opts.ranges,
        layout: opts.layout,
        variants_per_image: opts.variants_per_image,
        val_fraction: opts.val_fraction,
        source_root: scenes.root.clone(),
        total_images: scenes.total_images() as u64,
        total_samples: planned_samples(scenes, opts),
    };

    let partial_path = out.join(PARTIAL_MANIFEST_FILE);
    let mut partial = BufWriter::new(File::create(&partial_path)?);
    partial.write_all(Record::Header(header.clone()).to_line()?.as_bytes())?;
    partial.flush()?;
    let appender = Mutex::new(partial);

    let mut items = Vec::with_capacity(scenes.total_images());
    for scene in &scenes.scenes {
        for source in &scene.images {
            let first_sample = items.len() as u64 * u64::from(opts.variants_per_image);
            items.push(WorkItem { first_sample, scene: &scene.name, source });
        }
    }

    let result: Result<Vec<Vec<SampleRecord>>> = items
        .par_iter()
        .map(|item| {
            let rows = build_image_samples(item, scenes, opts, out)?;
            let mut w = appender.lock().expect("manifest appender poisoned");
            for row in &rows {
                w.write_all(Record::Sample(row.clone()).to_line()?.as_bytes())?;
            }
            w.flush()?;
            Ok(rows)
        })
        .collect();

    let mut partial = appender.into_inner().expect("manifest appender poisoned");
    let mut samples: Vec<SampleRecord> = match result {
        Ok(groups) => groups.into_iter().flatten().collect(),
        Err(e) => {
            let sample_id = match &e {
                Error::Sample { sample_id, .. } => Some(*sample_id),
                _ => None,
            };
            partial.write_all(Record::Aborted { sample_id, error: e.to_string() }.to_line()?.as_bytes())?;
            partial.flush()?;
            return Err(e);
        }
    };
    drop(partial);
    samples.sort_by_key(|s| s.sample_id);

    let manifest = DatasetManifest { header, samples, complete: true, aborted: Vec::new() };
    manifest.write(&out.join(MANIFEST_FILE))?;
    for split in [Split::Train, Split::Val] {
        let mut list = String::new();
        for s in manifest.samples.iter().filter(|s| s.split == split) {
            list.push_str(&s.outputs[0].path);
            list.push('\n');
        }
        fs::write(out.join(format!("{}.txt", split.dir_name())), list)?;
    }
    fs::remove_file(&partial_path)?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowCheck {
    pub sample_id: u64,
    pub problems: Vec<String>,
}

impl RowCheck {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub rows: Vec<RowCheck>,
    /// Manifest-level problems (incomplete build, id gaps, count mismatch).
    pub structural: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.passed()).count()
    }

    pub fn failed(&self) -> usize {
        self.rows.len() - self.passed()
    }

    pub fn all_passed(&self) -> bool {
        self.failed() == 0 && self.structural.is_empty()
    }

    pub fn failed_ids(&self) -> Vec<u64> {
        self.rows.iter().filter(|r| !r.passed()).map(|r| r.sample_id).collect()
    }
}

fn check_row(header: &ManifestHeader, root: &Path, row: &SampleRecord) -> Vec<String> {
    let mut problems = Vec::new();
    for out in &row.outputs {
        match fs::read(root.join(&out.path)) {
            Ok(bytes) if sha256_hex(&bytes) == out.sha256 => {}
            Ok(_) => problems.push(format!("{}: content hash mismatch on disk", out.path)),
            Err(e) => problems.push(format!("{}: {e}", out.path)),
        }
    }
    if !row.spec.within(&header.ranges) {
        problems.push("augmentation spec outside recorded ranges".into());
    }
    let regenerate = || -> Result<Vec<(String, String, Vec<u8>)>> {
        let source = load_rgb(&header.source_root.join(&row.source))?;
        let (a, b) = render_pair(&source, &row.spec, &header.sensor, header.sampler, row.frame_seed, row.frame_index)?;
        let name = Path::new(&row.outputs.first().map(|o| o.path.as_str()).unwrap_or_default())
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        encode_outputs(header.layout, row.split, &name, &a, &b)
    };
    match regenerate() {
        Ok(expected) => {
            if expected.len() != row.outputs.len() {
                problems.push("output file count does not match layout".into());
            }
            for ((role, rel, bytes), out) in expected.iter().zip(&row.outputs) {
                if *role != out.role || *rel != out.path {
                    problems.push(format!("{}: expected {role} output at {rel}", out.path));
                } else if sha256_hex(bytes) != out.sha256 {
                    problems.push(format!("{}: regenerated content hash mismatch", out.path));
                }
            }
        }
        Err(e) => problems.push(format!("regeneration failed: {e}")),
    }
    problems
}

/// Re-derives every sample from its manifest row and compares content
/// hashes, both of the regenerated bytes and of the files on disk. Missing
/// or altered files fail only their own row.
pub fn verify_manifest(manifest_path: &Path) -> Result<VerifyReport> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let root: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let header = &manifest.header;

    let mut structural = Vec::new();
    if !manifest.complete {
        structural.push("manifest has no footer (incomplete build)".into());
    }
    for (id, err) in &manifest.aborted {
        structural.push(format!("build aborted at sample {id:?}: {err}"));
    }
    if manifest.samples.len() as u64 != header.total_samples {
        structural.push(format!("{} rows but header plans {}", manifest.samples.len(), header.total_samples));
    }
    let dense = manifest.samples.iter().enumerate().all(|(i, s)| s.sample_id == i as u64);
    if !dense {
        structural.push("sample ids are not dense, unique and sorted".into());
    }

    let rows = manifest
        .samples
        .par_iter()
        .map(|row| RowCheck { sample_id: row.sample_id, problems: check_row(header, &root, row) })
        .collect();
    Ok(VerifyReport { rows, structural })
}
