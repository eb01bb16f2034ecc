//! Naive reference implementations used to cross-check the library.

#![allow(dead_code)]

use image::RgbImage;

/// Mean squared error in f64, then the textbook PSNR formula.
pub fn naive_psnr(a: &RgbImage, b: &RgbImage) -> f64 {
    let (w, h) = a.dimensions();
    let mut sum = 0.0;
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let d = f64::from(a.get_pixel(x, y)[c]) - f64::from(b.get_pixel(x, y)[c]);
                sum += d * d;
            }
        }
    }
    let mse = sum / f64::from(w * h * 3);
    10.0 * (255.0f64.powi(2) / mse).log10()
}

/// SSIM evaluated window by window with an explicit 2-D Gaussian weight
/// grid, averaged over valid window positions and then over channels.
pub fn naive_ssim(a: &RgbImage, b: &RgbImage) -> f64 {
    const WIN: u32 = 11;
    const SIGMA: f64 = 1.5;
    let c1 = (0.01 * 255.0f64).powi(2);
    let c2 = (0.03 * 255.0f64).powi(2);
    let half = f64::from(WIN / 2);
    let mut weights = vec![0.0; (WIN * WIN) as usize];
    for j in 0..WIN {
        for i in 0..WIN {
            let (dx, dy) = (f64::from(i) - half, f64::from(j) - half);
            weights[(j * WIN + i) as usize] = (-(dx * dx + dy * dy) / (2.0 * SIGMA * SIGMA)).exp();
        }
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);

    let (w, h) = a.dimensions();
    let mut channel_means = [0.0; 3];
    for (c, slot) in channel_means.iter_mut().enumerate() {
        let mut acc = 0.0;
        let mut windows = 0usize;
        for y0 in 0..=(h - WIN) {
            for x0 in 0..=(w - WIN) {
                let (mut ma, mut mb) = (0.0, 0.0);
                for j in 0..WIN {
                    for i in 0..WIN {
                        let g = weights[(j * WIN + i) as usize];
                        ma += g * f64::from(a.get_pixel(x0 + i, y0 + j)[c]);
                        mb += g * f64::from(b.get_pixel(x0 + i, y0 + j)[c]);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for j in 0..WIN {
                    for i in 0..WIN {
                        let g = weights[(j * WIN + i) as usize];
                        let da = f64::from(a.get_pixel(x0 + i, y0 + j)[c]) - ma;
                        let db = f64::from(b.get_pixel(x0 + i, y0 + j)[c]) - mb;
                        va += g * da * da;
                        vb += g * db * db;
                        cov += g * da * db;
                    }
                }
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                windows += 1;
            }
        }
        *slot = acc / windows as f64;
    }
    channel_means.iter().sum::<f64>() / 3.0
}

/// Closed-form dead-time count mean `lambda T / (1 + lambda tau)`.
pub fn renewal_mean(q: f64, phi: f64, tau_d: f64, t: f64) -> f64 {
    let lambda = q * phi;
    lambda * t / (1.0 + lambda * tau_d)
}

/// Closed-form dead-time count variance `lambda T / (1 + lambda tau)^3`.
pub fn renewal_variance(q: f64, phi: f64, tau_d: f64, t: f64) -> f64 {
    let lambda = q * phi;
    lambda * t / (1.0 + lambda * tau_d).powi(3)
}

/// Inverse of [`renewal_mean`] solved for the flux.
pub fn renewal_flux(q: f64, n: f64, tau_d: f64, t: f64) -> f64 {
    n / (q * (t - n * tau_d))
}

/// Probability that at least one photon is detected in the exposure.
pub fn first_arrival_probability(q: f64, phi: f64, t: f64) -> f64 {
    1.0 - (-q * phi * t).exp()
}

/// Deterministic pseudo-random raster from a tiny LCG, independent of the
/// library's generator.
pub fn lcg_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    RgbImage::from_fn(width, height, |_, _| {
        let mut px = [0u8; 3];
        for v in &mut px {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (state >> 56) as u8;
        }
        image::Rgb(px)
    })
}

/// Sample mean and unbiased sample variance.
pub fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
