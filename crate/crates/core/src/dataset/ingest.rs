//! Scene directory discovery.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image_io::{has_image_extension, load_rgb};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scene {
    pub name: String,
    /// Image paths relative to the scene-set root, in lexicographic order.
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SceneSet {
    pub root: PathBuf,
    pub scenes: Vec<Scene>,
    /// Files that failed to decode and were skipped (permissive mode only).
    pub skipped: Vec<(PathBuf, String)>,
}

impl SceneSet {
    pub fn total_images(&self) -> usize {
        self.scenes.iter().map(|s| s.images.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestOptions {
    /// Skip undecodable images instead of failing.
    pub permissive: bool,
    /// Per-scene image folder in scene-tree layouts.
    pub images_subdir: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { permissive: false, images_subdir: "images".into() }
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    v.sort();
    Ok(v)
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    Ok(sorted_entries(dir)?.into_iter().filter(|p| p.is_file() && has_image_extension(p)).collect())
}

/// Discovers scenes under `root`.
///
/// Recognizes `<root>/<scene>/<images_subdir>/*.{png,jpg,jpeg}` (one scene
/// per subdirectory, as in LLFF-style captures) and images placed directly
/// in `<root>` (one scene named after the root directory). Every image is
/// decoded once to make sure it is a readable RGB raster.
pub fn ingest_scene_dir(root: &Path, opts: &IngestOptions) -> Result<SceneSet> {
    if !root.is_dir() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} is not a directory", root.display()),
        )));
    }
    let root = root.canonicalize()?;
    let mut candidates: Vec<(String, Vec<PathBuf>)> = Vec::new();

    let flat = image_files(&root)?;
    if !flat.is_empty() {
        let name = root.file_name().and_then(|n| n.to_str()).unwrap_or("root").to_string();
        candidates.push((name, flat));
    }
    for dir in sorted_entries(&root)?.into_iter().filter(|p| p.is_dir()) {
        let images_dir = dir.join(&opts.images_subdir);
        if !images_dir.is_dir() {
            continue;
        }
        let files = image_files(&images_dir)?;
        if files.is_empty() {
            continue;
        }
        let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if candidates.iter().any(|(n, _)| *n == name) {
            return Err(Error::InvalidConfig(format!("duplicate scene name {name:?} under {}", root.display())));
        }
        candidates.push((name, files));
    }

    let mut skipped = Vec::new();
    let mut scenes = Vec::new();
    for (name, files) in candidates {
        let mut images = Vec::with_capacity(files.len());
        for path in files {
            match load_rgb(&path) {
                Ok(_) => images.push(path.strip_prefix(&root).expect("path under root").to_path_buf()),
                Err(e) if opts.permissive => skipped.push((path, e.to_string())),
                Err(e) => return Err(e),
            }
        }
        if !images.is_empty() {
            scenes.push(Scene { name, images });
        }
    }
    if scenes.is_empty() {
        return Err(Error::EmptyDataset(root));
    }
    Ok(SceneSet { root, scenes, skipped })
}
