//! PNG/JPEG decoding and deterministic PNG encoding.

use std::fs;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{DynamicImage, ImageEncoder, RgbImage};

use crate::error::{Error, Result};

pub const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

/// Accepts only three-channel (RGB) images; 16-bit RGB is reduced to 8 bits.
pub fn rgb_from_dynamic(img: DynamicImage) -> Result<RgbImage> {
    match img {
        DynamicImage::ImageRgb8(rgb) => Ok(rgb),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgb32F(_) => Ok(img.to_rgb8()),
        other => Err(Error::UnsupportedFormat(format!("expected 3-channel RGB, got {:?}", other.color()))),
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    if !path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    let img = image::open(path).map_err(|e| Error::Undecodable { path: path.to_path_buf(), reason: e.to_string() })?;
    rgb_from_dynamic(img).map_err(|e| match e {
        Error::UnsupportedFormat(msg) => Error::UnsupportedFormat(format!("{}: {msg}", path.display())),
        e => e,
    })
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    PngEncoder::new(&mut buf).write_image(img.as_raw(), img.width(), img.height(), image::ExtendedColorType::Rgb8)?;
    Ok(buf)
}

/// Encodes and writes a PNG, returning the bytes written.
pub fn save_png(img: &RgbImage, path: &Path) -> Result<Vec<u8>> {
    let bytes = encode_png(img)?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, &bytes)?;
    Ok(bytes)
}
