//! Closed-form statistics of a dead-time limited SPAD pixel.
//!
//! Photons arrive as a Poisson process of rate `phi`; each is detected with
//! probability `q`, so detections form a thinned Poisson process of rate
//! `lambda = q * phi`. After each detection the pixel is blind for `tau_d`
//! (non-paralyzable), making the detection sequence a renewal process with
//! inter-detection time `tau_d + Exp(lambda)`.
//!
//! Over an exposure `T` the detection count has the renewal moments
//!
//! ```text
//! E[N]   = lambda T / (1 + lambda tau_d)
//! Var[N] = lambda T / (1 + lambda tau_d)^3
//! ```
//!
//! The pixel reads "1" iff at least one detection happened. The first
//! detection is never preceded by a dead interval, so `P(N > 0)` is the
//! probability of at least one thinned arrival in `[0, T]`:
//! `1 - exp(-lambda T)`, independent of `tau_d`.

use serde::{Deserialize, Serialize};

use crate::config::SensorConfig;
use crate::error::{Error, Result};

/// Mean, variance and nonzero probability of the detection count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonStats {
    pub mean: f64,
    pub variance: f64,
    pub bit_prob: f64,
}

pub(crate) fn check_flux(phi: f64) -> Result<()> {
    if phi.is_finite() && phi >= 0.0 {
        Ok(())
    } else {
        Err(Error::NonFiniteInput(phi))
    }
}

fn detection_rate(phi: f64, cfg: &SensorConfig) -> Result<f64> {
    cfg.validate()?;
    check_flux(phi)?;
    Ok(cfg.q * phi)
}

/// Expected number of detections during the exposure.
pub fn expected_count(phi: f64, cfg: &SensorConfig) -> Result<f64> {
    let rate = detection_rate(phi, cfg)?;
    Ok(rate * cfg.exposure / (1.0 + rate * cfg.tau_d))
}

/// Variance of the detection count.
pub fn variance_count(phi: f64, cfg: &SensorConfig) -> Result<f64> {
    let rate = detection_rate(phi, cfg)?;
    Ok(rate * cfg.exposure / (1.0 + rate * cfg.tau_d).powi(3))
}

/// Probability that the pixel registers at least one detection.
///
/// Saturates to exactly `1.0` once `exp(-q phi T)` underflows.
pub fn bit_probability(phi: f64, cfg: &SensorConfig) -> Result<f64> {
    let rate = detection_rate(phi, cfg)?;
    Ok(-(-rate * cfg.exposure).exp_m1())
}

pub fn photon_stats(phi: f64, cfg: &SensorConfig) -> Result<PhotonStats> {
    Ok(PhotonStats {
        mean: expected_count(phi, cfg)?,
        variance: variance_count(phi, cfg)?,
        bit_prob: bit_probability(phi, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn paper_cfg() -> SensorConfig {
        SensorConfig::default().with_exposure(1e-5)
    }

    #[test]
    fn zero_flux_is_zero_everywhere() {
        let s = photon_stats(0.0, &paper_cfg()).unwrap();
        assert_eq!(s, PhotonStats { mean: 0.0, variance: 0.0, bit_prob: 0.0 });
    }

    #[test]
    fn poisson_limit_without_dead_time() {
        // q * phi * T = 100
        let cfg = SensorConfig { q: 0.5, tau_d: 0.0, exposure: 1e-6, ..Default::default() };
        let phi = 100.0 / (0.5 * 1e-6);
        assert!((expected_count(phi, &cfg).unwrap() - 100.0).abs() < 1e-9);
        assert!((variance_count(phi, &cfg).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn reference_operating_point() {
        // lambda T = 450, lambda tau_d = 6.75
        let cfg = paper_cfg();
        let mean = expected_count(1e8, &cfg).unwrap();
        let var = variance_count(1e8, &cfg).unwrap();
        assert!((mean - 450.0 / 7.75).abs() < 1e-9);
        assert!((mean - 58.0645).abs() < 1e-4);
        assert!((var - 450.0 / 7.75f64.powi(3)).abs() < 1e-12);
        assert!((var - 0.96674).abs() < 1e-5);
        assert_eq!(bit_probability(1e8, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn half_probability_at_ln2() {
        let cfg = paper_cfg();
        let phi = std::f64::consts::LN_2 / (cfg.q * cfg.exposure);
        assert!((bit_probability(phi, &cfg).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn saturation_asymptote() {
        let cfg = paper_cfg();
        let ceiling = cfg.exposure / cfg.tau_d;
        let mean = expected_count(1e12, &cfg).unwrap();
        assert!(mean < ceiling);
        assert!((ceiling - mean) / ceiling < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let cfg = paper_cfg();
        for phi in [f64::NAN, f64::INFINITY, -1.0] {
            assert!(matches!(expected_count(phi, &cfg), Err(Error::NonFiniteInput(_))));
            assert!(matches!(variance_count(phi, &cfg), Err(Error::NonFiniteInput(_))));
            assert!(matches!(bit_probability(phi, &cfg), Err(Error::NonFiniteInput(_))));
        }
        let bad = SensorConfig { q: 0.0, ..cfg };
        assert!(matches!(expected_count(1.0, &bad), Err(Error::InvalidConfig(_))));
    }

    proptest! {
        #[test]
        fn moments_are_ordered(log_phi in 0.0f64..12.0, tau_d in 1e-9f64..1e-6, t in 1e-8f64..1e-3) {
            let cfg = SensorConfig { tau_d, exposure: t, ..Default::default() };
            let phi = 10f64.powf(log_phi);
            let s = photon_stats(phi, &cfg).unwrap();
            prop_assert!(s.mean.is_finite() && s.mean > 0.0);
            prop_assert!(s.variance.is_finite() && s.variance > 0.0);
            prop_assert!(s.variance <= s.mean);
            prop_assert!(s.mean <= t / tau_d);
            prop_assert!((0.0..=1.0).contains(&s.bit_prob));
            let no_dead = cfg.with_tau_d(0.0);
            prop_assert_eq!(variance_count(phi, &no_dead).unwrap(), expected_count(phi, &no_dead).unwrap());
        }

        #[test]
        fn monotone_in_flux(a in 0.0f64..1e9, b in 0.0f64..1e9) {
            let cfg = SensorConfig::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(expected_count(lo, &cfg).unwrap() <= expected_count(hi, &cfg).unwrap());
            prop_assert!(bit_probability(lo, &cfg).unwrap() <= bit_probability(hi, &cfg).unwrap());
        }

        #[test]
        fn bit_probability_ignores_dead_time(phi in 0.0f64..1e9, tau_d in 0.0f64..1e-6) {
            let cfg = SensorConfig::default();
            prop_assert_eq!(
                bit_probability(phi, &cfg).unwrap(),
                bit_probability(phi, &cfg.with_tau_d(tau_d)).unwrap()
            );
        }
    }
}
