use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use spadsim::dataset::{build_paired_dataset, ingest_scene_dir, DatasetOptions, IngestOptions};

fn count_images(dir: &Path) -> usize {
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            n += count_images(&path);
        } else if path.extension().is_some_and(|e| e == "png" || e == "jpg") {
            n += 1;
        }
    }
    n
}

#[test]
fn eight_scene_tree_matches_recursive_count() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("llff");
    let names = ["fern", "flower", "fortress", "horns", "leaves", "orchids", "room", "trex"];
    for (s, name) in names.iter().enumerate() {
        let dir = root.join(name).join("images");
        fs::create_dir_all(&dir).unwrap();
        for i in 0..(s % 3 + 1) {
            let img = RgbImage::from_fn(20, 16, |x, y| Rgb([(x * 9 + i as u32) as u8, (y * 13) as u8, s as u8 * 30]));
            img.save(dir.join(format!("IMG_{i:04}.png"))).unwrap();
        }
        fs::write(root.join(name).join("poses_bounds.npy"), b"not an image").unwrap();
    }
    let set = ingest_scene_dir(&root, &IngestOptions::default()).unwrap();
    assert_eq!(set.scenes.len(), 8);
    assert_eq!(set.total_images(), count_images(&root));

    let out = tmp.path().join("out");
    let opts = DatasetOptions { variants_per_image: 2, seed: 4, ..Default::default() };
    let manifest = build_paired_dataset(&set, &opts, &out).unwrap();
    assert_eq!(manifest.samples.len(), 2 * count_images(&root));
    assert_eq!(count_images(&out), 4 * count_images(&root));
}
