//! Physical parameters of the simulated SPAD pixel.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Detection efficiency used by default.
pub const DEFAULT_Q: f64 = 0.45;
/// Dead time after each detection, seconds.
pub const DEFAULT_TAU_D: f64 = 150e-9;
/// Exposure time, seconds.
pub const DEFAULT_EXPOSURE: f64 = 1e-7;
/// Flux assigned to an 8-bit intensity of 255, photons/second.
pub const DEFAULT_PHI_MAX: f64 = 1e8;

/// SPAD sensor parameters plus the intensity-to-flux scale.
///
/// `q` is the detection efficiency, `tau_d` the non-paralyzable dead time,
/// `exposure` the integration window `T` and `phi_max` the flux mapped to a
/// full-scale pixel. All times are in seconds and flux in photons/second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub q: f64,
    pub tau_d: f64,
    pub exposure: f64,
    pub phi_max: f64,
    #[serde(default)]
    pub linearize_srgb: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            q: DEFAULT_Q,
            tau_d: DEFAULT_TAU_D,
            exposure: DEFAULT_EXPOSURE,
            phi_max: DEFAULT_PHI_MAX,
            linearize_srgb: false,
        }
    }
}

impl SensorConfig {
    pub fn with_exposure(mut self, exposure: f64) -> Self {
        self.exposure = exposure;
        self
    }

    pub fn with_tau_d(mut self, tau_d: f64) -> Self {
        self.tau_d = tau_d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(msg.to_string()))
            }
        };
        check(self.q.is_finite() && self.q > 0.0 && self.q <= 1.0, "q must lie in (0, 1]")?;
        check(self.tau_d.is_finite() && self.tau_d >= 0.0, "tau_d must be finite and >= 0")?;
        check(self.exposure.is_finite() && self.exposure > 0.0, "exposure must be finite and > 0")?;
        check(self.phi_max.is_finite() && self.phi_max > 0.0, "phi_max must be finite and > 0")?;
        Ok(())
    }

    /// Canonical byte encoding: fixed field order, floats as big-endian
    /// IEEE-754 bit patterns in hex. Two configs compare equal bitwise iff
    /// their canonical bytes are equal.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        format!(
            "spadsim.sensor.v1;q={:016x};tau_d={:016x};exposure={:016x};phi_max={:016x};linearize_srgb={}",
            self.q.to_bits(),
            self.tau_d.to_bits(),
            self.exposure.to_bits(),
            self.phi_max.to_bits(),
            u8::from(self.linearize_srgb),
        )
        .into_bytes()
    }

    /// SHA-256 of [`canonical_bytes`](Self::canonical_bytes), lowercase hex.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }

    /// First eight hex digits of the config hash, used in file names.
    pub fn short_hash(&self) -> String {
        self.config_hash()[..8].to_string()
    }
}
