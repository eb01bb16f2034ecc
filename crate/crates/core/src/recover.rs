//! Flux recovery: inverting the sensor model from bit stacks or counts.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::RgbImage;

use crate::config::SensorConfig;
use crate::error::{Error, Result};
use crate::frame::{BinaryFrame, FluxMap, CHANNELS};
use crate::photon::check_flux;

/// Per pixel-channel count of "on" bits over `n_frames` binary frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitStack {
    pub width: u32,
    pub height: u32,
    pub n_frames: u32,
    pub ones: Vec<u32>,
}

impl BitStack {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, n_frames: 0, ones: vec![0; width as usize * height as usize * CHANNELS] }
    }

    pub fn push_bits(&mut self, width: u32, height: u32, bits: &[u8]) -> Result<()> {
        if (width, height) != (self.width, self.height) || bits.len() != self.ones.len() {
            return Err(Error::DimensionMismatch { left: (self.width, self.height), right: (width, height) });
        }
        for (acc, &b) in self.ones.iter_mut().zip(bits) {
            match b {
                0 => {}
                255 => *acc += 1,
                other => return Err(Error::InvalidStack(format!("non-binary value {other} in frame"))),
            }
        }
        self.n_frames += 1;
        Ok(())
    }

    pub fn push(&mut self, frame: &BinaryFrame) -> Result<()> {
        self.push_bits(frame.width, frame.height, &frame.bits)
    }

    pub fn push_image(&mut self, image: &RgbImage) -> Result<()> {
        self.push_bits(image.width(), image.height(), image.as_raw())
    }

    pub fn from_frames<'a>(frames: impl IntoIterator<Item = &'a BinaryFrame>) -> Result<Self> {
        let mut iter = frames.into_iter().peekable();
        let first = iter.peek().ok_or_else(|| Error::InvalidStack("no frames".into()))?;
        let mut stack = Self::new(first.width, first.height);
        for f in iter {
            stack.push(f)?;
        }
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::InvalidStack("n_frames must be at least 1".into()));
        }
        if self.ones.len() != self.width as usize * self.height as usize * CHANNELS {
            return Err(Error::InvalidStack("ones buffer does not match dimensions".into()));
        }
        if self.ones.iter().any(|&o| o > self.n_frames) {
            return Err(Error::InvalidStack("ones count exceeds n_frames".into()));
        }
        Ok(())
    }
}

/// Recovered flux plus the pixels whose every frame fired.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxEstimate {
    pub flux: FluxMap,
    pub saturated: Vec<bool>,
}

impl FluxEstimate {
    pub fn saturated_count(&self) -> usize {
        self.saturated.iter().filter(|&&s| s).count()
    }

    pub fn mask_image(&self) -> RgbImage {
        let raw = self.saturated.iter().map(|&s| if s { 255 } else { 0 }).collect();
        RgbImage::from_raw(self.flux.width, self.flux.height, raw).expect("mask size matches flux")
    }
}

/// Maximum-likelihood flux from bit frequencies:
/// `phi = -ln(1 - ones / n) / (q T)`.
///
/// Pixels where every frame fired are clamped to the estimate at
/// `1 - 1 / (2 n)` and flagged in the saturation mask.
pub fn estimate_flux_from_bits(stack: &BitStack, cfg: &SensorConfig) -> Result<FluxEstimate> {
    cfg.validate()?;
    stack.validate()?;
    let n = f64::from(stack.n_frames);
    let scale = cfg.q * cfg.exposure;
    let clamp_p = 1.0 - 1.0 / (2.0 * n);
    let mut saturated = Vec::with_capacity(stack.ones.len());
    let data = stack
        .ones
        .iter()
        .map(|&ones| {
            let full = ones == stack.n_frames;
            saturated.push(full);
            let p = if full { clamp_p } else { f64::from(ones) / n };
            -(-p).ln_1p() / scale
        })
        .collect();
    Ok(FluxEstimate {
        flux: FluxMap {
            width: stack.width,
            height: stack.height,
            data,
            source_id: format!("bits:{}frames", stack.n_frames),
        },
        saturated,
    })
}

/// Inverse of the mean-count formula: `phi = n / (q (T - n tau_d))`.
///
/// Fails with [`Error::Saturated`] when `n * tau_d >= T`.
pub fn estimate_flux_from_count(n: f64, cfg: &SensorConfig) -> Result<f64> {
    cfg.validate()?;
    check_flux(n)?;
    let live = cfg.exposure - n * cfg.tau_d;
    if live <= 0.0 {
        return Err(Error::Saturated { count: n });
    }
    Ok(n / (cfg.q * live))
}

const RAW_MAGIC: &[u8; 8] = b"SPADFLX1";

/// Writes a lossless float raster: 8-byte magic `SPADFLX1`, then width,
/// height and channel count as little-endian `u32`, then `w * h * 3`
/// little-endian `f32` values, RGB interleaved, row-major.
pub fn write_flux_raw(flux: &FluxMap, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(20 + flux.data.len() * 4);
    out.write_all(RAW_MAGIC)?;
    out.write_all(&flux.width.to_le_bytes())?;
    out.write_all(&flux.height.to_le_bytes())?;
    out.write_all(&(CHANNELS as u32).to_le_bytes())?;
    for &v in &flux.data {
        out.write_all(&(v as f32).to_le_bytes())?;
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_flux_raw(path: &Path) -> Result<FluxMap> {
    let bytes = fs::read(path)?;
    let bad = |reason: &str| Error::Format { path: path.to_path_buf(), reason: reason.to_string() };
    if bytes.len() < 20 || &bytes[..8] != RAW_MAGIC {
        return Err(bad("missing SPADFLX1 header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let (w, h, c) = (word(8), word(12), word(16));
    if c as usize != CHANNELS {
        return Err(bad("expected 3 channels"));
    }
    let n = w as usize * h as usize * CHANNELS;
    if bytes.len() != 20 + 4 * n {
        return Err(bad("payload length does not match header"));
    }
    let data = bytes[20..].chunks_exact(4).map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap()))).collect();
    FluxMap::new(w, h, data, path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photon::expected_count;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn cfg() -> SensorConfig {
        SensorConfig::default().with_exposure(1e-5)
    }

    #[test]
    fn all_zero_stack_gives_zero_flux() {
        let mut stack = BitStack::new(3, 2);
        stack.push_bits(3, 2, &[0; 18]).unwrap();
        let est = estimate_flux_from_bits(&stack, &cfg()).unwrap();
        assert!(est.flux.data.iter().all(|&v| v == 0.0));
        assert_eq!(est.saturated_count(), 0);
    }

    #[test]
    fn half_ones_inverts_to_ln2() {
        let c = cfg();
        let stack = BitStack { width: 1, height: 1, n_frames: 10, ones: vec![5, 5, 5] };
        let est = estimate_flux_from_bits(&stack, &c).unwrap();
        let expected = LN_2 / (c.q * c.exposure);
        for v in est.flux.data {
            assert!((v - expected).abs() / expected < 1e-12);
        }
    }

    #[test]
    fn saturation_clamps_and_flags_exactly() {
        let c = cfg();
        let stack = BitStack { width: 2, height: 1, n_frames: 4, ones: vec![4, 3, 0, 4, 4, 1] };
        let est = estimate_flux_from_bits(&stack, &c).unwrap();
        assert_eq!(est.saturated, vec![true, false, false, true, true, false]);
        let clamp = -(1.0f64 / 8.0).ln() / (c.q * c.exposure);
        assert!((est.flux.data[0] - clamp).abs() / clamp < 1e-12);
        assert!(est.flux.data.iter().all(|v| v.is_finite()));
        assert_eq!(est.mask_image().as_raw()[..3], [255, 0, 0]);
    }

    #[test]
    fn invalid_stacks() {
        let empty = BitStack::new(2, 2);
        assert!(matches!(estimate_flux_from_bits(&empty, &cfg()), Err(Error::InvalidStack(_))));
        let over = BitStack { width: 1, height: 1, n_frames: 2, ones: vec![3, 0, 0] };
        assert!(matches!(estimate_flux_from_bits(&over, &cfg()), Err(Error::InvalidStack(_))));
        let mut s = BitStack::new(1, 1);
        assert!(matches!(s.push_bits(1, 1, &[0, 7, 255]), Err(Error::InvalidStack(_))));
        assert!(matches!(s.push_bits(2, 1, &[0; 6]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn count_inversion_examples() {
        let c = cfg();
        assert_eq!(estimate_flux_from_count(0.0, &c).unwrap(), 0.0);
        let n = 450.0 / 7.75;
        let phi = estimate_flux_from_count(n, &c).unwrap();
        assert!((phi - 1e8).abs() / 1e8 < 1e-12);
        let n_round = 58.0645;
        let phi = estimate_flux_from_count(n_round, &c).unwrap();
        assert!((phi - 1e8).abs() / 1e8 < 1e-5);
        let ceiling = c.exposure / c.tau_d;
        assert!(matches!(estimate_flux_from_count(ceiling, &c), Err(Error::Saturated { .. })));
        assert!(matches!(estimate_flux_from_count(ceiling + 1.0, &c), Err(Error::Saturated { .. })));
        assert!(estimate_flux_from_count(-1.0, &c).is_err());
    }

    #[test]
    fn raw_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let flux = FluxMap::new(2, 1, vec![0.0, 1.5e7, 3.25e8, 1.0, 2.0, 4.0], "t").unwrap();
        let p = dir.path().join("f.spadflx");
        write_flux_raw(&flux, &p).unwrap();
        let back = read_flux_raw(&p).unwrap();
        assert_eq!(back.data, flux.data);
        let bytes = fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], b"SPADFLX1");
        assert_eq!(bytes.len(), 20 + 6 * 4);
        fs::write(&p, &bytes[..22]).unwrap();
        assert!(matches!(read_flux_raw(&p), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn count_inverse_composes_to_identity(frac in 0.0f64..0.999, tau_exp in -9.0f64..-6.0) {
            let c = SensorConfig::default().with_exposure(1e-5).with_tau_d(10f64.powf(tau_exp));
            let n = frac * c.exposure / c.tau_d;
            let phi = estimate_flux_from_count(n, &c).unwrap();
            let back = expected_count(phi, &c).unwrap();
            prop_assert!((back - n).abs() <= 1e-9 * n.max(1e-300));
        }
    }
}
