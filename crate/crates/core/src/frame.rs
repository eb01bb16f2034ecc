//! RGB image to simulated single-photon binary frames.
//!
//! Each color channel is treated as an independent SPAD pixel plane. A pixel
//! channel is set to 255 when its simulated detection count is nonzero and to
//! 0 otherwise; the three planes are interleaved back into one RGB frame.

use std::collections::HashMap;
use std::path::Path;

use image::RgbImage;
use rayon::prelude::*;

use crate::config::SensorConfig;
use crate::error::{Error, Result};
use crate::image_io;
use crate::photon;
use crate::rng::RngKey;
use crate::sampler::Sampler;

pub const CHANNELS: usize = 3;

/// Per-pixel, per-channel photon flux in photons/second, RGB interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxMap {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
    pub source_id: String,
}

impl FluxMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>, source_id: impl Into<String>) -> Result<Self> {
        if data.len() != width as usize * height as usize * CHANNELS {
            return Err(Error::InvalidConfig(format!(
                "flux buffer of {} values does not fit {width}x{height}x3",
                data.len()
            )));
        }
        if let Some(&bad) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonFiniteInput(bad));
        }
        Ok(Self { width, height, data, source_id: source_id.into() })
    }

    pub fn uniform(width: u32, height: u32, phi: f64) -> Result<Self> {
        Self::new(width, height, vec![phi; width as usize * height as usize * CHANNELS], format!("uniform:{phi:e}"))
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, channel: usize) -> f64 {
        self.data[(y as usize * self.width as usize + x as usize) * CHANNELS + channel]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Quantizes to 8 bits with `phi_max` mapped to 255, clamping above.
    pub fn to_image(&self, phi_max: f64) -> RgbImage {
        let raw = self.data.iter().map(|&v| ((v / phi_max) * 255.0).round().clamp(0.0, 255.0) as u8).collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer size matches dimensions")
    }
}

/// One simulated 1-bit-per-channel exposure, stored as 0/255 bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    pub width: u32,
    pub height: u32,
    pub bits: Vec<u8>,
    pub seed: u64,
    pub frame_index: u64,
    pub config_hash: String,
}

impl BinaryFrame {
    pub fn to_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width, self.height, self.bits.clone()).expect("buffer size matches dimensions")
    }

    /// Fraction of 255 values per channel.
    pub fn channel_density(&self) -> [f64; CHANNELS] {
        let mut ones = [0u64; CHANNELS];
        for px in self.bits.chunks_exact(CHANNELS) {
            for (c, &b) in px.iter().enumerate() {
                ones[c] += u64::from(b == 255);
            }
        }
        let n = (self.width as u64 * self.height as u64).max(1) as f64;
        ones.map(|o| o as f64 / n)
    }

    pub fn density(&self) -> f64 {
        let d = self.channel_density();
        d.iter().sum::<f64>() / CHANNELS as f64
    }

    /// `<stem>_f<index>_<hash8>.png`
    pub fn file_name(&self, stem: &str) -> String {
        format!("{stem}_f{}_{}.png", self.frame_index, &self.config_hash[..8])
    }

    pub fn save_png(&self, path: &Path) -> Result<Vec<u8>> {
        image_io::save_png(&self.to_image(), path)
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Maps 8-bit intensities to flux: `phi = (v / 255) * phi_max`, after sRGB
/// decoding when `cfg.linearize_srgb` is set.
pub fn intensity_to_flux(image: &RgbImage, cfg: &SensorConfig, source_id: impl Into<String>) -> Result<FluxMap> {
    cfg.validate()?;
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::UnsupportedFormat("empty image".into()));
    }
    let mut lut = [0.0f64; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        let mut level = v as f64 / 255.0;
        if cfg.linearize_srgb {
            level = srgb_to_linear(level);
        }
        *slot = if v == 255 { cfg.phi_max } else { level * cfg.phi_max };
    }
    let data = image.as_raw().iter().map(|&v| lut[v as usize]).collect();
    Ok(FluxMap { width: image.width(), height: image.height(), data, source_id: source_id.into() })
}

/// Simulates a single channel plane; returns `width * height` bytes.
pub fn synthesize_channel(
    flux: &FluxMap,
    cfg: &SensorConfig,
    seed: u64,
    frame_index: u64,
    channel: u8,
    sampler: Sampler,
) -> Result<Vec<u8>> {
    cfg.validate()?;
    let w = flux.width as usize;
    let mut out = vec![0u8; w * flux.height as usize];
    out.par_chunks_mut(w.max(1)).enumerate().try_for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let key = RngKey::new(seed, frame_index, x as u32, y as u32, channel);
            let phi = flux.get(x as u32, y as u32, channel as usize);
            *slot = if sampler.fires(phi, cfg, &key)? { 255 } else { 0 };
        }
        Ok::<_, Error>(())
    })?;
    Ok(out)
}

/// Simulates one binary exposure. Pixel `(x, y)` channel `c` draws from the
/// keyed stream `(seed, frame_index, x, y, c)`, so the result is independent
/// of thread count and scheduling.
pub fn synthesize_binary_frame(
    flux: &FluxMap,
    cfg: &SensorConfig,
    seed: u64,
    frame_index: u64,
    sampler: Sampler,
) -> Result<BinaryFrame> {
    cfg.validate()?;
    let w = flux.width as usize;
    let mut bits = vec![0u8; w * flux.height as usize * CHANNELS];
    bits.par_chunks_mut((w * CHANNELS).max(1)).enumerate().try_for_each(|(y, row)| {
        for (x, px) in row.chunks_exact_mut(CHANNELS).enumerate() {
            for (c, slot) in px.iter_mut().enumerate() {
                let key = RngKey::new(seed, frame_index, x as u32, y as u32, c as u8);
                let phi = flux.get(x as u32, y as u32, c);
                *slot = if sampler.fires(phi, cfg, &key)? { 255 } else { 0 };
            }
        }
        Ok::<_, Error>(())
    })?;
    Ok(BinaryFrame { width: flux.width, height: flux.height, bits, seed, frame_index, config_hash: cfg.config_hash() })
}

/// Frames `0..n_frames` of one seed, each with its own frame index.
pub fn synthesize_burst(
    flux: &FluxMap,
    cfg: &SensorConfig,
    seed: u64,
    n_frames: u64,
    sampler: Sampler,
) -> Result<Vec<BinaryFrame>> {
    if n_frames == 0 {
        return Err(Error::InvalidConfig("burst needs at least one frame".into()));
    }
    (0..n_frames).map(|i| synthesize_binary_frame(flux, cfg, seed, i, sampler)).collect()
}

/// Search bracket for [`auto_exposure`], seconds.
pub const EXPOSURE_BRACKET: (f64, f64) = (1e-12, 1e3);
pub const DENSITY_TOLERANCE: f64 = 1e-6;

/// Flux values with multiplicities; images have few distinct levels.
fn flux_histogram(flux: &FluxMap) -> Vec<(f64, f64)> {
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for v in &flux.data {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let mut hist: Vec<(f64, f64)> = counts.into_iter().map(|(b, n)| (f64::from_bits(b), n as f64)).collect();
    hist.sort_by(|a, b| a.0.total_cmp(&b.0));
    hist
}

/// Mean of the per-entry bit probability over the whole flux map.
pub fn mean_bit_density(flux: &FluxMap, cfg: &SensorConfig) -> Result<f64> {
    density_from_histogram(&flux_histogram(flux), cfg)
}

fn density_from_histogram(hist: &[(f64, f64)], cfg: &SensorConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut weight = 0.0;
    for &(phi, n) in hist {
        total += n * photon::bit_probability(phi, cfg)?;
        weight += n;
    }
    Ok(if weight > 0.0 { total / weight } else { 0.0 })
}

/// Exposure whose mean bit density over the scene equals `target_density`,
/// by bisection on `log T` over [`EXPOSURE_BRACKET`].
pub fn auto_exposure(flux: &FluxMap, cfg: &SensorConfig, target_density: f64) -> Result<f64> {
    cfg.validate()?;
    if !(target_density > 0.0 && target_density < 1.0) {
        return Err(Error::InvalidTarget(target_density));
    }
    if !flux.data.iter().any(|&v| v > 0.0) {
        return Err(Error::AllZeroFlux);
    }
    let hist = flux_histogram(flux);
    let density_at = |log_t: f64| density_from_histogram(&hist, &cfg.with_exposure(log_t.exp()));

    let (mut lo, mut hi) = (EXPOSURE_BRACKET.0.ln(), EXPOSURE_BRACKET.1.ln());
    let (d_lo, d_hi) = (density_at(lo)?, density_at(hi)?);
    if target_density < d_lo - DENSITY_TOLERANCE || target_density > d_hi + DENSITY_TOLERANCE {
        return Err(Error::TargetUnreachable { target: target_density, lo: d_lo, hi: d_hi });
    }
    let mut best = (f64::INFINITY, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = density_at(mid)?;
        let err = (d - target_density).abs();
        if err < best.0 {
            best = (err, mid);
        }
        if d < target_density {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    if best.0 > DENSITY_TOLERANCE {
        return Err(Error::TargetUnreachable { target: target_density, lo: d_lo, hi: d_hi });
    }
    Ok(best.1.exp())
}
