//! Run configuration: built-in defaults, then the config file, then flags.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spadsim::dataset::{DatasetOptions, Layout};
use spadsim::{AugmentRanges, SampleMode, Sampler, SensorConfig};

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub sensor: SensorFile,
    #[serde(default)]
    pub sampler: SamplerFile,
    #[serde(default)]
    pub augment: AugmentFile,
    #[serde(default)]
    pub dataset: DatasetFile,
    #[serde(default)]
    pub run: RunFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorFile {
    pub q: Option<f64>,
    pub tau_d: Option<f64>,
    pub exposure: Option<f64>,
    pub phi_max: Option<f64>,
    pub linearize_srgb: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    pub mode: Option<String>,
    pub iteration_cap: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentFile {
    pub zoom: Option<(f64, f64)>,
    pub rotation_deg: Option<(f64, f64)>,
    pub shear: Option<(f64, f64)>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub layout: Option<String>,
    pub variants_per_image: Option<u32>,
    pub val_fraction: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    /// Written by the config echo; ignored on input.
    #[serde(rename = "command")]
    pub _command: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSection {
    pub layout: Layout,
    pub variants_per_image: u32,
    pub val_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
    pub command: String,
}

/// Fully resolved configuration, echoed to `<out>/run_config.toml`.
///
/// The worker count is deliberately not part of it: outputs do not depend
/// on it, and the echo is itself one of the outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub sensor: SensorConfig,
    pub sampler: Sampler,
    pub augment: AugmentRanges,
    pub dataset: DatasetSection,
    pub run: RunSection,
}

/// Command-line overrides; `None` leaves the file/default value alone.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub q: Option<f64>,
    pub tau_d: Option<f64>,
    pub exposure: Option<f64>,
    pub phi_max: Option<f64>,
    pub linearize_srgb: bool,
    pub mode: Option<SampleMode>,
    pub iteration_cap: Option<u64>,
    pub zoom: Option<(f64, f64)>,
    pub rotation_deg: Option<(f64, f64)>,
    pub shear: Option<(f64, f64)>,
    pub layout: Option<Layout>,
    pub variants_per_image: Option<u32>,
    pub val_fraction: Option<f64>,
    pub seed: Option<u64>,
}

pub fn resolve(file: &FileConfig, flags: &Overrides, command: &str) -> Result<RunConfig, CliError> {
    let d = SensorConfig::default();
    let sensor = SensorConfig {
        q: flags.q.or(file.sensor.q).unwrap_or(d.q),
        tau_d: flags.tau_d.or(file.sensor.tau_d).unwrap_or(d.tau_d),
        exposure: flags.exposure.or(file.sensor.exposure).unwrap_or(d.exposure),
        phi_max: flags.phi_max.or(file.sensor.phi_max).unwrap_or(d.phi_max),
        linearize_srgb: flags.linearize_srgb || file.sensor.linearize_srgb.unwrap_or(d.linearize_srgb),
    };
    sensor.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let file_mode = file
        .sampler
        .mode
        .as_deref()
        .map(str::parse::<SampleMode>)
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut sampler = Sampler::new(flags.mode.or(file_mode).unwrap_or_default());
    if let Some(cap) = flags.iteration_cap.or(file.sampler.iteration_cap) {
        if cap == 0 {
            return Err(CliError::Config("iteration_cap must be positive".into()));
        }
        sampler.iteration_cap = cap;
    }

    let r = AugmentRanges::default();
    let augment = AugmentRanges {
        zoom: flags.zoom.or(file.augment.zoom).unwrap_or(r.zoom),
        rotation_deg: flags.rotation_deg.or(file.augment.rotation_deg).unwrap_or(r.rotation_deg),
        shear: flags.shear.or(file.augment.shear).unwrap_or(r.shear),
    };
    augment.validate().map_err(|e| CliError::Config(e.to_string()))?;

    let file_layout = file
        .dataset
        .layout
        .as_deref()
        .map(str::parse::<Layout>)
        .transpose()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dd = DatasetOptions::default();
    let dataset = DatasetSection {
        layout: flags.layout.or(file_layout).unwrap_or(dd.layout),
        variants_per_image: flags
            .variants_per_image
            .or(file.dataset.variants_per_image)
            .unwrap_or(dd.variants_per_image),
        val_fraction: flags.val_fraction.or(file.dataset.val_fraction).unwrap_or(dd.val_fraction),
    };
    if dataset.variants_per_image == 0 {
        return Err(CliError::Config("variants_per_image must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&dataset.val_fraction) {
        return Err(CliError::Config("val_fraction must lie in [0, 1]".into()));
    }

    Ok(RunConfig {
        sensor,
        sampler,
        augment,
        dataset,
        run: RunSection { seed: flags.seed.or(file.run.seed).unwrap_or(0), command: command.to_string() },
    })
}

impl RunConfig {
    pub fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            sensor: self.sensor,
            sampler: self.sampler,
            ranges: self.augment,
            variants_per_image: self.dataset.variants_per_image,
            seed: self.run.seed,
            layout: self.dataset.layout,
            val_fraction: self.dataset.val_fraction,
        }
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Internal(e.to_string()))
    }

    pub fn echo(&self, out: &Path) -> Result<(), CliError> {
        fs::create_dir_all(out)?;
        fs::write(out.join("run_config.toml"), self.to_toml()?)?;
        Ok(())
    }
}
