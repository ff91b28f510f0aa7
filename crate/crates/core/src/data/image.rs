//! 8-bit images, binary Netpbm I/O and the image-derived histograms.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{PotError, Result};
use crate::problem::MassVector;

use super::distributions::smooth_and_normalize;

/// Smoothing floor applied to every image-derived histogram.
pub const IMAGE_HISTOGRAM_FLOOR: f64 = 1e-6;

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// Row-major 8-bit RGB image, three interleaved samples per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(PotError::Shape(format!("{}x{} image needs {} samples, got {}", width, height, width * height, data.len())));
        }
        Ok(Self { width, height, data })
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(PotError::Shape(format!(
                "{}x{} RGB image needs {} samples, got {}",
                width,
                height,
                3 * width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn pixel(&self, k: usize) -> [u8; 3] {
        [self.data[3 * k], self.data[3 * k + 1], self.data[3 * k + 2]]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Rec. 601 luma, rounded to the nearest level.
    pub fn to_gray(&self) -> GrayImage {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage { width: self.width, height: self.height, data }
    }
}

/// Either kind of Netpbm image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Image {
    pub fn to_gray(&self) -> GrayImage {
        match self {
            Image::Gray(g) => g.clone(),
            Image::Rgb(c) => c.to_gray(),
        }
    }

    /// Gray images are widened to three equal channels.
    pub fn to_rgb(&self) -> RgbImage {
        match self {
            Image::Rgb(c) => c.clone(),
            Image::Gray(g) => RgbImage {
                width: g.width,
                height: g.height,
                data: g.data.iter().flat_map(|&v| [v, v, v]).collect(),
            },
        }
    }
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' && self.bytes[self.pos] != b'\r' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PotError::Format("expected a decimal number in the header".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PotError::Format("header number out of range".into()))
    }
}

/// Parses a binary PGM (P5) or PPM (P6) with `maxval <= 255`. Samples are
/// rescaled to 0..=255 when `maxval < 255`.
pub fn decode_netpbm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || bytes[0] != b'P' || !(bytes[1] == b'5' || bytes[1] == b'6') {
        return Err(PotError::Format("not a binary PGM (P5) or PPM (P6) file".into()));
    }
    let channels = if bytes[1] == b'5' { 1 } else { 3 };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()?;
    let height = h.number()?;
    let maxval = h.number()?;
    if maxval == 0 || maxval > 255 {
        return Err(PotError::Format(format!("unsupported maxval {maxval}; only 8-bit images are read")));
    }
    if width == 0 || height == 0 {
        return Err(PotError::Shape("image has zero width or height".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if h.pos >= bytes.len() || !bytes[h.pos].is_ascii_whitespace() {
        return Err(PotError::Format("missing whitespace after maxval".into()));
    }
    let start = h.pos + 1;
    let len = width * height * channels;
    let raster = bytes
        .get(start..start + len)
        .ok_or_else(|| PotError::Format(format!("raster truncated: need {len} bytes")))?;
    let data: Vec<u8> = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v.min(maxval as u8) as f64) * 255.0 / maxval as f64).round() as u8)
            .collect()
    };
    Ok(if channels == 1 {
        Image::Gray(GrayImage { width, height, data })
    } else {
        Image::Rgb(RgbImage { width, height, data })
    })
}

pub fn read_netpbm(path: impl AsRef<Path>) -> Result<Image> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_netpbm(&bytes)
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn encode_ppm(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn write_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_pgm(img))?;
    Ok(())
}

pub fn write_ppm(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    std::fs::File::create(path)?.write_all(&encode_ppm(img))?;
    Ok(())
}

/// Area-weighted downscale of a grayscale image to `side × side`.
/// Output values are averages of the covered intensities.
pub fn downscale(image: &GrayImage, side: usize) -> Result<Vec<f64>> {
    let (h, w) = (image.height, image.width);
    if h == 0 || w == 0 {
        return Err(PotError::Shape("empty image".into()));
    }
    if side == 0 || side > h || side > w {
        return Err(PotError::Shape(format!("cannot downscale {w}x{h} to {side}x{side}")));
    }
    let weights = |len: usize| -> Vec<Vec<(usize, f64)>> {
        let scale = len as f64 / side as f64;
        (0..side)
            .map(|k| {
                let (a, b) = (k as f64 * scale, (k + 1) as f64 * scale);
                (a.floor() as usize..(b.ceil() as usize).min(len))
                    .filter_map(|p| {
                        let overlap = (b.min(p as f64 + 1.0) - a.max(p as f64)).max(0.0);
                        (overlap > 0.0).then_some((p, overlap / scale))
                    })
                    .collect()
            })
            .collect()
    };
    let wr = weights(h);
    let wc = weights(w);
    let mut out = Vec::with_capacity(side * side);
    for rows in &wr {
        for cols in &wc {
            let mut acc = 0.0;
            for &(y, fy) in rows {
                for &(x, fx) in cols {
                    acc += fy * fx * image.get(y, x) as f64;
                }
            }
            out.push(acc);
        }
    }
    Ok(out)
}

/// Position-indexed histogram of a downscaled image: one bin per output pixel
/// (row-major), mass proportional to intensity, then smoothed. Positions are
/// `(row, col)` pixel coordinates.
pub fn image_to_histogram(image: &GrayImage, target_side: usize) -> Result<(MassVector, Vec<[f64; 2]>)> {
    image_to_histogram_with_floor(image, target_side, IMAGE_HISTOGRAM_FLOOR)
}

/// [`image_to_histogram`] with an explicit smoothing floor (0 disables it).
pub fn image_to_histogram_with_floor(
    image: &GrayImage,
    target_side: usize,
    floor: f64,
) -> Result<(MassVector, Vec<[f64; 2]>)> {
    let cells = downscale(image, target_side)?;
    let total = crate::numeric::sum_compensated(&cells);
    let raw = if total > 0.0 { cells.iter().map(|x| x / total).collect() } else { cells };
    let hist = smooth_and_normalize(&MassVector::new(raw)?, floor)?;
    let positions = (0..target_side * target_side)
        .map(|k| [(k / target_side) as f64, (k % target_side) as f64])
        .collect();
    Ok((hist, positions))
}

/// Chromaticity `(U, V) = (G/L, B/L)` with `L = R+G+B`; black maps to the
/// achromatic point `(1/3, 1/3)`.
pub fn rgb_to_uv(p: [u8; 3]) -> (f64, f64) {
    let l = p[0] as f64 + p[1] as f64 + p[2] as f64;
    if l == 0.0 {
        (1.0 / 3.0, 1.0 / 3.0)
    } else {
        (p[1] as f64 / l, p[2] as f64 / l)
    }
}

/// Index of the joint UV cell containing `(u, v)` on a `bins × bins` grid
/// over `[0, 1]^2`, flattened as `iu * bins + iv`.
pub fn uv_bin(u: f64, v: f64, bins: usize) -> usize {
    let cell = |x: f64| ((x * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    cell(u) * bins + cell(v)
}

/// Centers of the UV grid cells in bin order.
pub fn uv_bin_centers(bins: usize) -> Vec<[f64; 2]> {
    let b = bins as f64;
    (0..bins * bins)
        .map(|k| [((k / bins) as f64 + 0.5) / b, ((k % bins) as f64 + 0.5) / b])
        .collect()
}

/// Unsmoothed UV cell frequencies of an image.
pub fn uv_counts(image: &RgbImage, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(PotError::Parameter("bins_per_axis must be at least 1".into()));
    }
    if image.pixel_count() == 0 {
        return Err(PotError::Shape("empty image".into()));
    }
    let mut counts = vec![0.0; bins * bins];
    for k in 0..image.pixel_count() {
        let (u, v) = rgb_to_uv(image.pixel(k));
        counts[uv_bin(u, v, bins)] += 1.0;
    }
    let n = image.pixel_count() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(counts)
}

/// Smoothed joint UV histogram and the UV cell centers.
pub fn rgb_to_luv_histogram(image: &RgbImage, bins_per_axis: usize) -> Result<(MassVector, Vec<[f64; 2]>)> {
    let counts = uv_counts(image, bins_per_axis)?;
    let hist = smooth_and_normalize(&MassVector::new(counts)?, IMAGE_HISTOGRAM_FLOOR)?;
    Ok((hist, uv_bin_centers(bins_per_axis)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn netpbm_round_trip() {
        let g = GrayImage::new(3, 2, vec![0, 10, 20, 30, 40, 255]).unwrap();
        assert_eq!(decode_netpbm(&encode_pgm(&g)).unwrap(), Image::Gray(g));
        let c = RgbImage::new(2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        assert_eq!(decode_netpbm(&encode_ppm(&c)).unwrap(), Image::Rgb(c));
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P5\n# made by hand\n2 1\n# max\n255\n\x07\x08";
        let Image::Gray(g) = decode_netpbm(bytes).unwrap() else { panic!() };
        assert_eq!(g.data, vec![7, 8]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(decode_netpbm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_netpbm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_netpbm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn constant_image_gives_uniform_histogram() {
        let g = GrayImage::new(32, 32, vec![77; 1024]).unwrap();
        let (h, pos) = image_to_histogram(&g, 10).unwrap();
        for &x in h.values() {
            assert!((x - 0.01).abs() < 1e-15);
        }
        assert_eq!(pos[13], [1.0, 3.0]);
    }

    #[test]
    fn block_averaging_conserves_mean() {
        let data: Vec<u8> = (0..1024).map(|k| ((k * 37 + k / 7) % 256) as u8).collect();
        let g = GrayImage::new(32, 32, data.clone()).unwrap();
        let cells = downscale(&g, 10).unwrap();
        let mean_img = data.iter().map(|&x| x as f64).sum::<f64>() / 1024.0;
        let mean_cells = cells.iter().sum::<f64>() / 100.0;
        assert!((mean_img - mean_cells).abs() < 1e-9);
    }

    #[test]
    fn single_white_pixel_is_one_hot() {
        let mut data = vec![0u8; 1024];
        data[5 * 32 + 20] = 255;
        let g = GrayImage::new(32, 32, data).unwrap();
        let (h, _) = image_to_histogram_with_floor(&g, 8, 0.0).unwrap();
        let nz: Vec<usize> = (0..64).filter(|&k| h.values()[k] > 0.0).collect();
        assert_eq!(nz, vec![8 + 5]);
        assert_eq!(h.values()[13], 1.0);
    }

    #[test]
    fn gray_pixels_land_on_achromatic_cell() {
        assert_eq!(rgb_to_uv([85, 85, 85]), (1.0 / 3.0, 1.0 / 3.0));
        assert_eq!(rgb_to_uv([0, 0, 0]), (1.0 / 3.0, 1.0 / 3.0));
        let img = RgbImage::new(2, 2, vec![10, 10, 10, 200, 200, 200, 0, 0, 0, 90, 90, 90]).unwrap();
        let counts = uv_counts(&img, 32).unwrap();
        let cell = uv_bin(1.0 / 3.0, 1.0 / 3.0, 32);
        assert_eq!(counts[cell], 1.0);
    }

    #[test]
    fn two_colors_two_cells() {
        let mut data = Vec::new();
        for k in 0..16 {
            data.extend_from_slice(if k % 2 == 0 { &[200, 10, 10] } else { &[10, 10, 200] });
        }
        let img = RgbImage::new(4, 4, data).unwrap();
        let counts = uv_counts(&img, 32).unwrap();
        assert_eq!(counts.iter().filter(|&&c| c > 0.0).count(), 2);
        let (h, centers) = rgb_to_luv_histogram(&img, 32).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-12);
        assert_eq!(centers.len(), 1024);
    }
}
