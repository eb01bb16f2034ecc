//! Deterministic affine augmentation (zoom, rotation, shear, flips).
//!
//! The forward map about the image center `c = ((w-1)/2, (h-1)/2)` is
//! `p_out = F * S * R * Z * (p_in - c) + c` with `Z` = zoom, `R` =
//! rotation (positive = counter-clockwise on screen), `S = [[1, sx], [sy, 1]]`
//! and `F` = flips. Output pixels are pulled through the inverse map and
//! bilinearly interpolated; samples outside the image are mirrored back in.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::KeyedStream;

const AUGMENT_DOMAIN: u64 = 0x4155_474d_454e_5453; // "AUGMENTS"
const SNAP_EPS: f64 = 1e-9;

/// One affine augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSpec {
    pub spec_id: u64,
    pub zoom: f64,
    pub rotation_deg: f64,
    pub shear_x: f64,
    pub shear_y: f64,
    pub flip_h: bool,
    pub flip_v: bool,
}

impl AugmentSpec {
    pub fn identity(spec_id: u64) -> Self {
        Self { spec_id, zoom: 1.0, rotation_deg: 0.0, shear_x: 0.0, shear_y: 0.0, flip_h: false, flip_v: false }
    }

    pub fn is_identity(&self) -> bool {
        self.zoom == 1.0
            && self.rotation_deg == 0.0
            && self.shear_x == 0.0
            && self.shear_y == 0.0
            && !self.flip_h
            && !self.flip_v
    }

    /// Checks that the transform is finite and invertible.
    pub fn validate(&self) -> Result<()> {
        let fields = [self.zoom, self.rotation_deg, self.shear_x, self.shear_y];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidAugment(format!("non-finite field in {self:?}")));
        }
        if self.zoom <= 0.0 {
            return Err(Error::InvalidAugment(format!("zoom must be > 0, got {}", self.zoom)));
        }
        if (1.0 - self.shear_x * self.shear_y).abs() < 1e-6 {
            return Err(Error::InvalidAugment("shear matrix is singular".into()));
        }
        Ok(())
    }

    pub fn within(&self, ranges: &AugmentRanges) -> bool {
        let inside = |v: f64, (lo, hi): (f64, f64)| lo <= v && v <= hi;
        inside(self.zoom, ranges.zoom)
            && inside(self.rotation_deg, ranges.rotation_deg)
            && inside(self.shear_x, ranges.shear)
            && inside(self.shear_y, ranges.shear)
    }

    /// Inverse of the forward linear part, mapping output offsets to input
    /// offsets from the center.
    fn inverse_matrix(&self) -> [[f64; 2]; 2] {
        let (sin, cos) = self.rotation_deg.to_radians().sin_cos();
        // F^-1 = F
        let fx = if self.flip_h { -1.0 } else { 1.0 };
        let fy = if self.flip_v { -1.0 } else { 1.0 };
        let f = [[fx, 0.0], [0.0, fy]];
        let det = 1.0 - self.shear_x * self.shear_y;
        let s_inv = [[1.0 / det, -self.shear_x / det], [-self.shear_y / det, 1.0 / det]];
        // R = [[cos, sin], [-sin, cos]] in y-down coordinates; R^-1 = R^T
        let r_inv = [[cos, -sin], [sin, cos]];
        let z_inv = [[1.0 / self.zoom, 0.0], [0.0, 1.0 / self.zoom]];
        mat_mul(mat_mul(mat_mul(z_inv, r_inv), s_inv), f)
    }
}

fn mat_mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Closed sampling ranges for [`sample_augment_specs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentRanges {
    pub zoom: (f64, f64),
    pub rotation_deg: (f64, f64),
    pub shear: (f64, f64),
}

impl Default for AugmentRanges {
    fn default() -> Self {
        Self { zoom: (0.8, 1.3), rotation_deg: (-25.0, 25.0), shear: (-0.2, 0.2) }
    }
}

impl AugmentRanges {
    /// Ranges that only allow flips.
    pub fn flips_only() -> Self {
        Self { zoom: (1.0, 1.0), rotation_deg: (0.0, 0.0), shear: (0.0, 0.0) }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, (lo, hi): (f64, f64)| {
            if lo.is_finite() && hi.is_finite() && lo <= hi {
                Ok(())
            } else {
                Err(Error::InvalidAugment(format!("{name} range [{lo}, {hi}] is invalid")))
            }
        };
        check("zoom", self.zoom)?;
        check("rotation", self.rotation_deg)?;
        check("shear", self.shear)?;
        if self.zoom.0 <= 0.0 {
            return Err(Error::InvalidAugment("zoom range must be positive".into()));
        }
        if self.shear.0.abs().max(self.shear.1.abs()) >= 1.0 {
            return Err(Error::InvalidAugment("shear magnitude must stay below 1".into()));
        }
        Ok(())
    }

    /// Spec `index` for `seed`; independent of how many specs are drawn.
    pub fn sample(&self, seed: u64, index: u64) -> AugmentSpec {
        let mut s = KeyedStream::for_domain(AUGMENT_DOMAIN, seed, index);
        let mut uniform = |(lo, hi): (f64, f64)| {
            let u = s.next_open01();
            if lo == hi {
                lo
            } else {
                lo + u * (hi - lo)
            }
        };
        let zoom = uniform(self.zoom);
        let rotation_deg = uniform(self.rotation_deg);
        let shear_x = uniform(self.shear);
        let shear_y = uniform(self.shear);
        let flip_h = s.next_open01() < 0.5;
        let flip_v = s.next_open01() < 0.5;
        AugmentSpec { spec_id: index, zoom, rotation_deg, shear_x, shear_y, flip_h, flip_v }
    }
}

/// `count` specs with sequential ids `0..count`, uniform parameters and
/// Bernoulli(0.5) flips.
pub fn sample_augment_specs(seed: u64, count: usize, ranges: &AugmentRanges) -> Result<Vec<AugmentSpec>> {
    ranges.validate()?;
    if count == 0 {
        return Err(Error::InvalidAugment("count must be at least 1".into()));
    }
    Ok((0..count as u64).map(|i| ranges.sample(seed, i)).collect())
}

/// Mirror a continuous coordinate into `[0, n - 1]`.
fn reflect(mut v: f64, n: u32) -> f64 {
    let last = f64::from(n - 1);
    if last == 0.0 {
        return 0.0;
    }
    let period = 2.0 * last;
    v = v.rem_euclid(period);
    if v > last {
        period - v
    } else {
        v
    }
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() < SNAP_EPS {
        r
    } else {
        v
    }
}

/// Applies `spec` about the image center; output has the input's size.
pub fn apply_affine(image: &RgbImage, spec: &AugmentSpec) -> Result<RgbImage> {
    spec.validate()?;
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::InvalidAugment("empty image".into()));
    }
    if spec.is_identity() {
        return Ok(image.clone());
    }
    let m = spec.inverse_matrix();
    let (cx, cy) = (f64::from(w - 1) / 2.0, f64::from(h - 1) / 2.0);
    let src = image.as_raw();
    let idx = |x: usize, y: usize| (y * w as usize + x) * 3;

    let mut out = RgbImage::new(w, h);
    for (ox, oy, px) in out.enumerate_pixels_mut() {
        let dx = f64::from(ox) - cx;
        let dy = f64::from(oy) - cy;
        let sx = reflect(snap(m[0][0] * dx + m[0][1] * dy + cx), w);
        let sy = reflect(snap(m[1][0] * dx + m[1][1] * dy + cy), h);
        let x0 = sx.floor() as usize;
        let y0 = sy.floor() as usize;
        let x1 = (x0 + 1).min(w as usize - 1);
        let y1 = (y0 + 1).min(h as usize - 1);
        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
        for c in 0..3 {
            let p00 = f64::from(src[idx(x0, y0) + c]);
            let p10 = f64::from(src[idx(x1, y0) + c]);
            let p01 = f64::from(src[idx(x0, y1) + c]);
            let p11 = f64::from(src[idx(x1, y1) + c]);
            let top = p00 + fx * (p10 - p00);
            let bottom = p01 + fx * (p11 - p01);
            let v = top + fy * (bottom - top);
            px.0[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
