//! Regenerates the bundled test images in `crates/cli/assets`.
//!
//! The images are synthetic and fully determined by this file.

use std::path::PathBuf;

use potkit_core::data::{write_pgm, write_ppm, GrayImage, RgbImage};

/// Deterministic per-pixel noise in [-1, 1].
fn noise(x: usize, y: usize, salt: u64) -> f64 {
    let mut h = (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ salt;
    h ^= h >> 33;
    h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
    h ^= h >> 33;
    (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn px(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn sunset(side: usize) -> RgbImage {
    let mut data = Vec::with_capacity(3 * side * side);
    let s = side as f64;
    for y in 0..side {
        for x in 0..side {
            let (fx, fy) = (x as f64 / s, y as f64 / s);
            let n = noise(x, y, 1) * 12.0;
            let sun = ((fx - 0.65).powi(2) + (fy - 0.35).powi(2)).sqrt() < 0.12;
            let rgb = if sun {
                [250.0, 210.0 + n, 90.0 + n]
            } else if fy > 0.7 {
                // Dark hills with a warm cast.
                let t = (fy - 0.7) / 0.3;
                [90.0 - 40.0 * t + n, 55.0 - 20.0 * t + n, 30.0 + n]
            } else {
                let t = fy / 0.7;
                [235.0 - 30.0 * t + n, 120.0 + 60.0 * t + n, 60.0 + 40.0 * fx + n]
            };
            data.extend(rgb.iter().map(|&v| px(v)));
        }
    }
    RgbImage::new(side, side, data).unwrap()
}

fn seaside(side: usize) -> RgbImage {
    let mut data = Vec::with_capacity(3 * side * side);
    let s = side as f64;
    for y in 0..side {
        for x in 0..side {
            let (fx, fy) = (x as f64 / s, y as f64 / s);
            let n = noise(x, y, 2) * 10.0;
            let cloud = ((fx - 0.3).powi(2) * 4.0 + (fy - 0.2).powi(2) * 25.0) < 0.08;
            let rgb = if cloud {
                [235.0 + n, 240.0 + n, 245.0 + n]
            } else if fy < 0.5 {
                let t = fy / 0.5;
                [70.0 + 60.0 * t + n, 130.0 + 50.0 * t + n, 220.0 + n]
            } else if fy < 0.8 {
                let w = (fx * 40.0 + fy * 12.0).sin() * 15.0;
                [20.0 + n, 120.0 + w + n, 140.0 + w + n]
            } else {
                // Pale sand.
                [200.0 + n, 190.0 + n, 150.0 + n]
            };
            data.extend(rgb.iter().map(|&v| px(v)));
        }
    }
    RgbImage::new(side, side, data).unwrap()
}

fn blob(side: usize, cx: f64, cy: f64, salt: u64) -> GrayImage {
    let s = side as f64;
    let data = (0..side * side)
        .map(|k| {
            let (x, y) = ((k % side) as f64 / s, (k / side) as f64 / s);
            let d2 = (x - cx).powi(2) + (y - cy).powi(2);
            px(10.0 + 220.0 * (-d2 / 0.03).exp() + 6.0 * noise(k % side, k / side, salt))
        })
        .collect();
    GrayImage::new(side, side, data).unwrap()
}

fn bar(side: usize, salt: u64) -> GrayImage {
    let s = side as f64;
    let data = (0..side * side)
        .map(|k| {
            let (x, y) = ((k % side) as f64 / s, (k / side) as f64 / s);
            let d = (x - y + 0.1).abs();
            px(8.0 + 210.0 * (-d * d / 0.01).exp() + 6.0 * noise(k % side, k / side, salt))
        })
        .collect();
    GrayImage::new(side, side, data).unwrap()
}

fn main() -> potkit_core::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets");
    std::fs::create_dir_all(&dir)?;
    write_ppm(&sunset(256), dir.join("sunset.ppm"))?;
    write_ppm(&seaside(256), dir.join("seaside.ppm"))?;
    write_pgm(&blob(32, 0.3, 0.35, 3), dir.join("blob.pgm"))?;
    write_pgm(&bar(32, 4), dir.join("bar.pgm"))?;
    println!("wrote assets to {}", dir.display());
    Ok(())
}
