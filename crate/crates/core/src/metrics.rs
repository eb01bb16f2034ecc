//! Full-reference image quality: PSNR and single-scale SSIM.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use image::RgbImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image_io::{has_image_extension, load_rgb};

const PEAK: f64 = 255.0;

fn check_same_size(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if a.dimensions() != b.dimensions() {
        return Err(Error::DimensionMismatch { left: a.dimensions(), right: b.dimensions() });
    }
    Ok(())
}

/// `10 log10(255^2 / MSE)` over all pixels and channels. Identical images
/// give `f64::INFINITY`.
pub fn psnr(reference: &RgbImage, test: &RgbImage) -> Result<f64> {
    check_same_size(reference, test)?;
    let sse: u64 = reference
        .as_raw()
        .iter()
        .zip(test.as_raw())
        .map(|(&a, &b)| {
            let d = i64::from(a) - i64::from(b);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / reference.as_raw().len() as f64;
    Ok(10.0 * (PEAK * PEAK / mse).log10())
}

/// SSIM window and stabilizer constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03, dynamic_range: PEAK }
    }
}

fn gaussian_kernel(params: &SsimParams) -> Vec<f64> {
    let half = (params.window / 2) as f64;
    let raw: Vec<f64> = (0..params.window)
        .map(|i| {
            let d = i as f64 - half;
            (-d * d / (2.0 * params.sigma * params.sigma)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Separable "valid" Gaussian filtering of a `w x h` plane.
fn filter_valid(plane: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let k = kernel.len();
    let (ow, oh) = (w + 1 - k, h + 1 - k);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = kernel.iter().zip(&line[x..x + k]).map(|(g, v)| g * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel.iter().enumerate().map(|(i, g)| g * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], w: usize, h: usize, params: &SsimParams) -> f64 {
    let kernel = gaussian_kernel(params);
    let c1 = (params.k1 * params.dynamic_range).powi(2);
    let c2 = (params.k2 * params.dynamic_range).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, w, h, &kernel);
    let mu_b = filter_valid(b, w, h, &kernel);
    let e_aa = filter_valid(&aa, w, h, &kernel);
    let e_bb = filter_valid(&bb, w, h, &kernel);
    let e_ab = filter_valid(&ab, w, h, &kernel);
    let n = mu_a.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    total / n as f64
}

pub fn ssim_with(reference: &RgbImage, test: &RgbImage, params: &SsimParams) -> Result<f64> {
    check_same_size(reference, test)?;
    let (w, h) = reference.dimensions();
    if (w.min(h) as usize) < params.window {
        return Err(Error::ImageTooSmall { width: w, height: h, min: params.window as u32 });
    }
    let plane = |img: &RgbImage, c: usize| -> Vec<f64> {
        img.as_raw().iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect()
    };
    let per_channel: Vec<f64> =
        (0..3).map(|c| ssim_plane(&plane(reference, c), &plane(test, c), w as usize, h as usize, params)).collect();
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, range 255, valid windows only, averaged over channels.
pub fn ssim(reference: &RgbImage, test: &RgbImage) -> Result<f64> {
    ssim_with(reference, test, &SsimParams::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub image_id: String,
    pub psnr_db: f64,
    pub ssim: f64,
    pub lpips: Option<f64>,
    /// Set when the pair could not be evaluated; metrics are NaN then.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub reference_dir: PathBuf,
    pub test_dir: PathBuf,
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    /// Mean over finite PSNR values; `None` when there are none.
    pub mean_psnr: Option<f64>,
    pub mean_ssim: Option<f64>,
    pub mean_lpips: Option<f64>,
    pub infinite_psnr: usize,
    pub unmatched_reference: Vec<String>,
    pub unmatched_test: Vec<String>,
    pub ssim_params: SsimParams,
    pub provenance: Provenance,
}

fn finite_mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.filter(|v| v.is_finite()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn fmt_psnr(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v:.4}")
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    match v {
        Some(v) if v.is_nan() => "nan".into(),
        Some(v) => format!("{v:.digits$}"),
        None => "n/a".into(),
    }
}

impl MetricsReport {
    pub fn from_rows(mut rows: Vec<MetricsRow>, provenance: Provenance) -> Self {
        rows.sort_by(|a, b| a.image_id.cmp(&b.image_id));
        let mut report = Self {
            rows,
            mean_psnr: None,
            mean_ssim: None,
            mean_lpips: None,
            infinite_psnr: 0,
            unmatched_reference: Vec::new(),
            unmatched_test: Vec::new(),
            ssim_params: SsimParams::default(),
            provenance,
        };
        report.recompute_aggregates();
        report
    }

    fn recompute_aggregates(&mut self) {
        self.mean_psnr = finite_mean(self.rows.iter().map(|r| r.psnr_db));
        self.mean_ssim = finite_mean(self.rows.iter().map(|r| r.ssim));
        self.mean_lpips = finite_mean(self.rows.iter().filter_map(|r| r.lpips));
        self.infinite_psnr = self.rows.iter().filter(|r| r.psnr_db == f64::INFINITY).count();
    }

    pub fn flagged(&self) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(|r| r.error.is_some())
    }

    /// `image_id,psnr_db,ssim,lpips` with `inf` for infinite PSNR and `n/a`
    /// for missing LPIPS.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["image_id", "psnr_db", "ssim", "lpips"]).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([r.image_id.clone(), fmt_psnr(r.psnr_db), fmt_opt(Some(r.ssim), 6), fmt_opt(r.lpips, 6)])
                .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    /// Console table with aggregates.
    pub fn table(&self) -> String {
        let id_w = self.rows.iter().map(|r| r.image_id.len()).max().unwrap_or(0).max(8);
        let mut s = String::new();
        let _ = writeln!(s, "{:<id_w$}  {:>10}  {:>8}  {:>8}", "image_id", "PSNR(dB)", "SSIM", "LPIPS");
        for r in &self.rows {
            let _ = write!(
                s,
                "{:<id_w$}  {:>10}  {:>8}  {:>8}",
                r.image_id,
                fmt_psnr(r.psnr_db),
                fmt_opt(Some(r.ssim), 4),
                fmt_opt(r.lpips, 4)
            );
            if let Some(e) = &r.error {
                let _ = write!(s, "  [error: {e}]");
            }
            s.push('\n');
        }
        let mean_psnr = match (self.mean_psnr, self.infinite_psnr) {
            (None, n) if n > 0 => "inf".to_string(),
            (v, _) => fmt_opt(v, 4),
        };
        let _ = writeln!(
            s,
            "{:<id_w$}  {:>10}  {:>8}  {:>8}",
            "mean",
            mean_psnr,
            fmt_opt(self.mean_ssim, 4),
            fmt_opt(self.mean_lpips, 4)
        );
        let _ = writeln!(
            s,
            "pairs: {}  infinite PSNR (excluded from mean): {}  flagged: {}  unmatched: {} ref / {} test",
            self.rows.len(),
            self.infinite_psnr,
            self.flagged().count(),
            self.unmatched_reference.len(),
            self.unmatched_test.len()
        );
        s
    }

    /// Joins an external `image_id,lpips` CSV into the report; returns the
    /// number of rows that received a value.
    pub fn merge_lpips_csv(&mut self, path: &Path) -> Result<usize> {
        let format_err = |reason: String| Error::Format { path: path.to_path_buf(), reason };
        let mut reader = csv::Reader::from_path(path).map_err(|e| format_err(e.to_string()))?;
        let headers = reader.headers().map_err(|e| format_err(e.to_string()))?.clone();
        let col = |name: &str| {
            headers.iter().position(|h| h.trim() == name).ok_or_else(|| format_err(format!("missing column {name:?}")))
        };
        let (id_col, lpips_col) = (col("image_id")?, col("lpips")?);
        let mut values = BTreeMap::new();
        for record in reader.records() {
            let record = record.map_err(|e| format_err(e.to_string()))?;
            let id = record.get(id_col).unwrap_or_default().trim().to_string();
            let raw = record.get(lpips_col).unwrap_or_default().trim();
            if raw.is_empty() || raw == "n/a" {
                continue;
            }
            let v: f64 = raw.parse().map_err(|_| format_err(format!("bad lpips value {raw:?} for {id}")))?;
            values.insert(id, v);
        }
        let mut merged = 0;
        for row in &mut self.rows {
            if let Some(&v) = values.get(&row.image_id) {
                row.lpips = Some(v);
                merged += 1;
            }
        }
        self.recompute_aggregates();
        Ok(merged)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Image files of `dir` keyed by file stem (first path wins on duplicates).
fn images_by_stem(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && has_image_extension(p))
        .collect();
    paths.sort();
    let mut map = BTreeMap::new();
    for p in paths {
        if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
            map.entry(stem.to_string()).or_insert(p);
        }
    }
    Ok(map)
}

fn evaluate_pair(id: &str, reference: &Path, test: &Path) -> MetricsRow {
    let compute = || -> Result<(f64, f64)> {
        let a = load_rgb(reference)?;
        let b = load_rgb(test)?;
        Ok((psnr(&a, &b)?, ssim(&a, &b)?))
    };
    match compute() {
        Ok((p, s)) => MetricsRow { image_id: id.to_string(), psnr_db: p, ssim: s, lpips: None, error: None },
        Err(e) => MetricsRow {
            image_id: id.to_string(),
            psnr_db: f64::NAN,
            ssim: f64::NAN,
            lpips: None,
            error: Some(e.to_string()),
        },
    }
}

/// Compares every image in `test_dir` against the `reference_dir` image
/// with the same file stem. Pairs that fail to load or compare are kept as
/// flagged rows; unmatched files are listed in the report.
pub fn evaluate_dirs(reference_dir: &Path, test_dir: &Path) -> Result<MetricsReport> {
    let refs = images_by_stem(reference_dir)?;
    let tests = images_by_stem(test_dir)?;
    let matched: Vec<(&String, &PathBuf, &PathBuf)> =
        refs.iter().filter_map(|(id, r)| tests.get(id).map(|t| (id, r, t))).collect();
    if matched.is_empty() {
        return Err(Error::NoMatchedPairs { reference: reference_dir.to_path_buf(), test: test_dir.to_path_buf() });
    }
    let rows: Vec<MetricsRow> = matched.par_iter().map(|(id, r, t)| evaluate_pair(id, r, t)).collect();
    let timestamp_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut report = MetricsReport::from_rows(
        rows,
        Provenance { reference_dir: reference_dir.to_path_buf(), test_dir: test_dir.to_path_buf(), timestamp_unix },
    );
    report.unmatched_reference = refs.keys().filter(|k| !tests.contains_key(*k)).cloned().collect();
    report.unmatched_test = tests.keys().filter(|k| !refs.contains_key(*k)).cloned().collect();
    Ok(report)
}
