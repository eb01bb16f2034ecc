//! Single-photon camera simulation toolkit.
//!
//! Converts RGB images into binary SPAD frames using a dead-time renewal
//! detection model, builds augmented paired (binary, RGB) datasets, evaluates
//! image pairs with PSNR/SSIM and inverts the sensor model to recover flux.

pub mod augment;
pub mod config;
pub mod dataset;
pub mod error;
pub mod frame;
pub mod image_io;
pub mod metrics;
pub mod photon;
pub mod recover;
pub mod rng;
pub mod sampler;

pub use augment::{apply_affine, sample_augment_specs, AugmentRanges, AugmentSpec};
pub use config::SensorConfig;
pub use error::{Error, Result};
pub use frame::{
    auto_exposure, intensity_to_flux, mean_bit_density, synthesize_binary_frame, synthesize_burst, BinaryFrame, FluxMap,
};
pub use photon::{bit_probability, expected_count, photon_stats, variance_count, PhotonStats};
pub use recover::{estimate_flux_from_bits, estimate_flux_from_count, BitStack, FluxEstimate};

pub use rng::{derive_stream, KeyedStream, RngKey};
pub use sampler::{sample_count_exact, sample_count_gaussian, SampleMode, Sampler};
