//! Line-delimited JSON manifest.
//!
//! One JSON object per line, discriminated by `kind`:
//!
//! * `header`  – first line; toolkit version, master seed, sensor and
//!   sampler config, augmentation ranges, layout, split fraction, source
//!   root and planned sample count.
//! * `sample`  – one per emitted pair, sorted by `sample_id` in a finished
//!   manifest.
//! * `footer`  – last line of a finished manifest.
//! * `aborted` – appended to a partial manifest when a build fails.
//!
//! Output paths are relative to the directory holding the manifest.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::augment::{AugmentRanges, AugmentSpec};
use crate::config::SensorConfig;
use crate::error::{Error, Result};
use crate::sampler::Sampler;

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const PARTIAL_MANIFEST_FILE: &str = "manifest.jsonl.partial";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// `A/<split>/x.png` (binary) and `B/<split>/x.png` (RGB).
    #[default]
    Paired,
    /// `combined/<split>/x.png`, binary left and RGB right.
    Combined,
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Paired => "paired",
            Layout::Combined => "combined",
        })
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paired" | "ab" | "AB" => Ok(Layout::Paired),
            "combined" => Ok(Layout::Combined),
            _ => Err(Error::InvalidConfig(format!("unknown layout {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub toolkit_version: String,
    pub seed: u64,
    pub sensor: SensorConfig,
    pub sampler: Sampler,
    pub ranges: AugmentRanges,
    pub layout: Layout,
    pub variants_per_image: u32,
    pub val_fraction: f64,
    pub source_root: PathBuf,
    pub total_images: u64,
    pub total_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputFile {
    /// `A`, `B` or `AB` (combined).
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub sample_id: u64,
    pub scene: String,
    /// Source image relative to the header's `source_root`.
    pub source: String,
    pub variant: u32,
    pub spec: AugmentSpec,
    pub frame_seed: u64,
    pub frame_index: u64,
    pub split: Split,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Record {
    Header(ManifestHeader),
    Sample(SampleRecord),
    Footer { samples: u64 },
    Aborted { sample_id: Option<u64>, error: String },
}

impl Record {
    pub fn to_line(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub header: ManifestHeader,
    pub samples: Vec<SampleRecord>,
    /// Whether a footer line was present.
    pub complete: bool,
    pub aborted: Vec<(Option<u64>, String)>,
}

impl DatasetManifest {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = Record::Header(self.header.clone()).to_line()?;
        for s in &self.samples {
            out.push_str(&Record::Sample(s.clone()).to_line()?);
        }
        if self.complete {
            out.push_str(&Record::Footer { samples: self.samples.len() as u64 }.to_line()?);
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut header = None;
        let mut samples = Vec::new();
        let mut complete = false;
        let mut aborted = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(line).map_err(|e| Error::Manifest(format!("line {}: {e}", lineno + 1)))?;
            match record {
                Record::Header(h) if header.is_none() && lineno == 0 => header = Some(h),
                Record::Header(_) => return Err(Error::Manifest(format!("unexpected header on line {}", lineno + 1))),
                Record::Sample(s) => samples.push(s),
                Record::Footer { samples: n } => {
                    if n != samples.len() as u64 {
                        return Err(Error::Manifest(format!("footer counts {n} samples, found {}", samples.len())));
                    }
                    complete = true;
                }
                Record::Aborted { sample_id, error } => aborted.push((sample_id, error)),
            }
        }
        let header = header.ok_or_else(|| Error::Manifest("missing header line".into()))?;
        Ok(Self { header, samples, complete, aborted })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> ManifestHeader {
        ManifestHeader {
            toolkit_version: "0.1.0".into(),
            seed: 1,
            sensor: SensorConfig::default(),
            sampler: Sampler::default(),
            ranges: AugmentRanges::default(),
            layout: Layout::Paired,
            variants_per_image: 1,
            val_fraction: 0.05,
            source_root: "/data".into(),
            total_images: 1,
            total_samples: 1,
        }
    }

    fn sample(id: u64) -> SampleRecord {
        SampleRecord {
            sample_id: id,
            scene: "s".into(),
            source: "a.png".into(),
            variant: 0,
            spec: AugmentRanges::default().sample(1, id),
            frame_seed: 1,
            frame_index: id,
            split: Split::Train,
            outputs: vec![OutputFile { role: "A".into(), path: "A/train/x.png".into(), sha256: "00".into() }],
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let m =
            DatasetManifest { header: header(), samples: vec![sample(0), sample(1)], complete: true, aborted: vec![] };
        let text = m.to_jsonl().unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().starts_with("{\"kind\":\"header\""));
        let back = DatasetManifest::parse(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_jsonl().unwrap(), text);
    }

    #[test]
    fn partial_manifest_parses() {
        let mut text = Record::Header(header()).to_line().unwrap();
        text.push_str(&Record::Sample(sample(3)).to_line().unwrap());
        text.push_str(&Record::Aborted { sample_id: Some(4), error: "disk full".into() }.to_line().unwrap());
        let m = DatasetManifest::parse(&text).unwrap();
        assert!(!m.complete);
        assert_eq!(m.samples.len(), 1);
        assert_eq!(m.aborted, vec![(Some(4), "disk full".to_string())]);
    }

    #[test]
    fn malformed_manifests() {
        assert!(DatasetManifest::parse("").is_err());
        let s = Record::Sample(sample(0)).to_line().unwrap();
        assert!(DatasetManifest::parse(&s).is_err());
        let mut text = Record::Header(header()).to_line().unwrap();
        text.push_str("{\"kind\":\"sample\",\"bogus\":1}\n");
        assert!(matches!(DatasetManifest::parse(&text), Err(Error::Manifest(_))));
        let mut text = Record::Header(header()).to_line().unwrap();
        text.push_str(&Record::Footer { samples: 2 }.to_line().unwrap());
        assert!(DatasetManifest::parse(&text).is_err());
    }
}
