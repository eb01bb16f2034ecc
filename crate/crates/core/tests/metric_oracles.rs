mod common;

use common::oracles::{lcg_image, naive_psnr, naive_ssim};
use image::RgbImage;
use spadsim::metrics::{psnr, ssim};

#[test]
fn psnr_matches_naive_on_random_images() {
    for k in 0..20 {
        let a = lcg_image(32, 32, 2 * k);
        let b = lcg_image(32, 32, 2 * k + 1);
        let got = psnr(&a, &b).unwrap();
        let want = naive_psnr(&a, &b);
        assert!((got - want).abs() < 1e-9, "image {k}: {got} vs {want}");
    }
}

#[test]
fn ssim_matches_naive_on_random_images() {
    for k in 0..20 {
        let a = lcg_image(32, 32, 100 + k);
        let mut b = a.clone();
        for (i, v) in b.iter_mut().enumerate() {
            *v = v.saturating_add((i as u64 * 2654435761 % 61) as u8);
        }
        let got = ssim(&a, &b).unwrap();
        let want = naive_ssim(&a, &b);
        assert!((got - want).abs() < 1e-9, "image {k}: {got} vs {want}");
    }
}

#[test]
fn ssim_matches_naive_on_non_square_images() {
    let a = lcg_image(23, 14, 5);
    let b = lcg_image(23, 14, 6);
    assert!((ssim(&a, &b).unwrap() - naive_ssim(&a, &b)).abs() < 1e-9);
}

#[test]
fn black_versus_white_psnr_is_zero() {
    let black = RgbImage::new(16, 16);
    let white = RgbImage::from_pixel(16, 16, image::Rgb([255; 3]));
    assert_eq!(psnr(&black, &white).unwrap(), 0.0);
    assert_eq!(naive_psnr(&black, &white), 0.0);
}
