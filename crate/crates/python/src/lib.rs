use std::path::PathBuf;

use image::RgbImage;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;
use spadsim::dataset::{self, DatasetOptions, IngestOptions, Layout, MANIFEST_FILE};
use spadsim::{AugmentSpec, BitStack, FluxMap, RngKey, SampleMode, Sampler};

fn to_py(e: spadsim::Error) -> PyErr {
    match e {
        spadsim::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn raster(data: &[u8], width: u32, height: u32) -> PyResult<RgbImage> {
    RgbImage::from_raw(width, height, data.to_vec())
        .filter(|img| img.as_raw().len() == data.len())
        .ok_or_else(|| PyValueError::new_err("data length must equal width * height * 3"))
}

fn sampler(mode: &str) -> PyResult<Sampler> {
    Ok(Sampler::new(mode.parse::<SampleMode>().map_err(to_py)?))
}

/// SPAD sensor parameters (seconds, photons/second).
#[pyclass(name = "SensorConfig", module = "spadsim_py", skip_from_py_object)]
#[derive(Clone)]
struct PySensorConfig {
    inner: spadsim::SensorConfig,
}

#[pymethods]
impl PySensorConfig {
    #[new]
    #[pyo3(signature = (q=0.45, tau_d=150e-9, exposure=1e-7, phi_max=1e8, linearize_srgb=false))]
    fn new(q: f64, tau_d: f64, exposure: f64, phi_max: f64, linearize_srgb: bool) -> PyResult<Self> {
        let inner = spadsim::SensorConfig { q, tau_d, exposure, phi_max, linearize_srgb };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn q(&self) -> f64 {
        self.inner.q
    }

    #[getter]
    fn tau_d(&self) -> f64 {
        self.inner.tau_d
    }

    #[getter]
    fn exposure(&self) -> f64 {
        self.inner.exposure
    }

    #[getter]
    fn phi_max(&self) -> f64 {
        self.inner.phi_max
    }

    #[getter]
    fn linearize_srgb(&self) -> bool {
        self.inner.linearize_srgb
    }

    fn with_exposure(&self, exposure: f64) -> PyResult<Self> {
        let inner = self.inner.with_exposure(exposure);
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    fn config_hash(&self) -> String {
        self.inner.config_hash()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!(
            "SensorConfig(q={}, tau_d={:e}, exposure={:e}, phi_max={:e}, linearize_srgb={})",
            c.q,
            c.tau_d,
            c.exposure,
            c.phi_max,
            if c.linearize_srgb { "True" } else { "False" }
        )
    }
}

#[pyfunction]
fn expected_count(phi: f64, cfg: PyRef<'_, PySensorConfig>) -> PyResult<f64> {
    spadsim::expected_count(phi, &cfg.inner).map_err(to_py)
}

#[pyfunction]
fn variance_count(phi: f64, cfg: PyRef<'_, PySensorConfig>) -> PyResult<f64> {
    spadsim::variance_count(phi, &cfg.inner).map_err(to_py)
}

#[pyfunction]
fn bit_probability(phi: f64, cfg: PyRef<'_, PySensorConfig>) -> PyResult<f64> {
    spadsim::bit_probability(phi, &cfg.inner).map_err(to_py)
}

#[pyfunction]
fn estimate_flux_from_count(n: f64, cfg: PyRef<'_, PySensorConfig>) -> PyResult<f64> {
    spadsim::estimate_flux_from_count(n, &cfg.inner).map_err(to_py)
}

/// Detection count for one keyed pixel sample.
#[pyfunction]
#[pyo3(signature = (phi, cfg, seed, frame=0, x=0, y=0, channel=0, mode="EXACT_RENEWAL"))]
#[allow(clippy::too_many_arguments)]
fn sample_count(
    phi: f64,
    cfg: PyRef<'_, PySensorConfig>,
    seed: u64,
    frame: u64,
    x: u32,
    y: u32,
    channel: u8,
    mode: &str,
) -> PyResult<u64> {
    sampler(mode)?.count(phi, &cfg.inner, &RngKey::new(seed, frame, x, y, channel)).map_err(to_py)
}

/// First `n` raw outputs of the keyed stream.
#[pyfunction]
#[pyo3(signature = (seed, frame=0, x=0, y=0, channel=0, n=4))]
fn stream_head(seed: u64, frame: u64, x: u32, y: u32, channel: u8, n: usize) -> Vec<u64> {
    let mut s = spadsim::derive_stream(&RngKey::new(seed, frame, x, y, channel));
    (0..n).map(|_| s.next_u64()).collect()
}

/// Simulates one binary frame from interleaved RGB8 bytes; returns RGB8
/// bytes with every value 0 or 255.
#[pyfunction]
#[pyo3(signature = (data, width, height, cfg, seed, frame_index=0, mode="EXACT_RENEWAL"))]
#[allow(clippy::too_many_arguments)]
fn simulate_frame<'py>(
    py: Python<'py>,
    data: &[u8],
    width: u32,
    height: u32,
    cfg: PyRef<'_, PySensorConfig>,
    seed: u64,
    frame_index: u64,
    mode: &str,
) -> PyResult<Bound<'py, PyBytes>> {
    let img = raster(data, width, height)?;
    let flux = spadsim::intensity_to_flux(&img, &cfg.inner, "python").map_err(to_py)?;
    let frame =
        spadsim::synthesize_binary_frame(&flux, &cfg.inner, seed, frame_index, sampler(mode)?).map_err(to_py)?;
    Ok(PyBytes::new(py, &frame.bits))
}

#[pyfunction]
fn auto_exposure(data: &[u8], width: u32, height: u32, cfg: PyRef<'_, PySensorConfig>, target: f64) -> PyResult<f64> {
    let img = raster(data, width, height)?;
    let flux = spadsim::intensity_to_flux(&img, &cfg.inner, "python").map_err(to_py)?;
    spadsim::auto_exposure(&flux, &cfg.inner, target).map_err(to_py)
}

/// Flux estimate from per pixel-channel ones counts; returns
/// `(flux values, saturation mask)`.
#[pyfunction]
fn estimate_flux_from_bits(
    ones: Vec<u32>,
    n_frames: u32,
    width: u32,
    height: u32,
    cfg: PyRef<'_, PySensorConfig>,
) -> PyResult<(Vec<f64>, Vec<bool>)> {
    let stack = BitStack { width, height, n_frames, ones };
    let est = spadsim::estimate_flux_from_bits(&stack, &cfg.inner).map_err(to_py)?;
    Ok((est.flux.data, est.saturated))
}

#[pyfunction]
fn uniform_bit_density(width: u32, height: u32, phi: f64, cfg: PyRef<'_, PySensorConfig>) -> PyResult<f64> {
    let flux = FluxMap::uniform(width, height, phi).map_err(to_py)?;
    spadsim::mean_bit_density(&flux, &cfg.inner).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (data, width, height, zoom=1.0, rotation_deg=0.0, shear_x=0.0, shear_y=0.0, flip_h=false, flip_v=false))]
#[allow(clippy::too_many_arguments)]
fn apply_affine<'py>(
    py: Python<'py>,
    data: &[u8],
    width: u32,
    height: u32,
    zoom: f64,
    rotation_deg: f64,
    shear_x: f64,
    shear_y: f64,
    flip_h: bool,
    flip_v: bool,
) -> PyResult<Bound<'py, PyBytes>> {
    let img = raster(data, width, height)?;
    let spec = AugmentSpec { spec_id: 0, zoom, rotation_deg, shear_x, shear_y, flip_h, flip_v };
    let out = spadsim::apply_affine(&img, &spec).map_err(to_py)?;
    Ok(PyBytes::new(py, out.as_raw()))
}

#[pyfunction]
fn psnr(reference: &[u8], test: &[u8], width: u32, height: u32) -> PyResult<f64> {
    spadsim::metrics::psnr(&raster(reference, width, height)?, &raster(test, width, height)?).map_err(to_py)
}

#[pyfunction]
fn ssim(reference: &[u8], test: &[u8], width: u32, height: u32) -> PyResult<f64> {
    spadsim::metrics::ssim(&raster(reference, width, height)?, &raster(test, width, height)?).map_err(to_py)
}

/// `(image_id, psnr_db, ssim)` rows for stem-matched files.
#[pyfunction]
fn evaluate_dirs(reference: PathBuf, test: PathBuf) -> PyResult<Vec<(String, f64, f64)>> {
    let report = spadsim::metrics::evaluate_dirs(&reference, &test).map_err(to_py)?;
    Ok(report.rows.into_iter().map(|r| (r.image_id, r.psnr_db, r.ssim)).collect())
}

/// Builds a paired dataset; returns the number of samples written.
#[pyfunction]
#[pyo3(signature = (root, out, cfg, variants=10, seed=0, layout="paired"))]
fn build_dataset(
    root: PathBuf,
    out: PathBuf,
    cfg: PyRef<'_, PySensorConfig>,
    variants: u32,
    seed: u64,
    layout: &str,
) -> PyResult<usize> {
    let scenes = dataset::ingest_scene_dir(&root, &IngestOptions::default()).map_err(to_py)?;
    let opts = DatasetOptions {
        sensor: cfg.inner,
        variants_per_image: variants,
        seed,
        layout: layout.parse::<Layout>().map_err(to_py)?,
        ..Default::default()
    };
    let manifest = dataset::build_paired_dataset(&scenes, &opts, &out).map_err(to_py)?;
    Ok(manifest.samples.len())
}

/// Returns `(passed rows, failed rows)`.
#[pyfunction]
fn verify_dataset(out: PathBuf) -> PyResult<(usize, usize)> {
    let report = dataset::verify_manifest(&out.join(MANIFEST_FILE)).map_err(to_py)?;
    Ok((report.passed(), report.failed()))
}

#[pymodule]
fn spadsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySensorConfig>()?;
    m.add_function(wrap_pyfunction!(expected_count, m)?)?;
    m.add_function(wrap_pyfunction!(variance_count, m)?)?;
    m.add_function(wrap_pyfunction!(bit_probability, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_flux_from_count, m)?)?;
    m.add_function(wrap_pyfunction!(sample_count, m)?)?;
    m.add_function(wrap_pyfunction!(stream_head, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_frame, m)?)?;
    m.add_function(wrap_pyfunction!(auto_exposure, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_flux_from_bits, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_bit_density, m)?)?;
    m.add_function(wrap_pyfunction!(apply_affine, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_dirs, m)?)?;
    m.add_function(wrap_pyfunction!(build_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(verify_dataset, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
