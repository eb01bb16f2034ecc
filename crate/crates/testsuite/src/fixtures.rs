use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use sha2::{Digest, Sha256};

/// Relative path to sha256 of every file below `root`.
pub fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&path).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn gradient(width: u32, height: u32, salt: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        Rgb([
            ((x * 255) / width.max(1)) as u8,
            ((y * 255) / height.max(1)) as u8,
            ((x * 7 + y * 13 + salt * 41) % 256) as u8,
        ])
    })
}

/// `scenes` scene folders, each with an `images/` folder of `per_scene`
/// distinct PNGs.
pub fn scene_tree(root: &Path, scenes: usize, per_scene: usize, width: u32, height: u32) {
    for s in 0..scenes {
        let dir = root.join(format!("scene{s:02}")).join("images");
        fs::create_dir_all(&dir).unwrap();
        for i in 0..per_scene {
            gradient(width, height, (s * per_scene + i) as u32).save(dir.join(format!("img{i:03}.png"))).unwrap();
        }
    }
}

pub fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Value following `key` on the first line of `stdout` that contains it.
pub fn field(stdout: &str, key: &str) -> f64 {
    let line = stdout.lines().find(|l| l.contains(key)).unwrap_or_else(|| panic!("no {key:?} in:\n{stdout}"));
    let rest = &line[line.find(key).unwrap() + key.len()..];
    let token = rest.split_whitespace().next().unwrap().trim_end_matches('%');
    token.parse().unwrap_or_else(|_| panic!("cannot parse {token:?} in {line:?}"))
}
