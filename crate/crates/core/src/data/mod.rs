//! Experiment inputs: toy histograms, image histograms and point clouds.

pub mod distributions;
pub mod image;
pub mod points;

pub use distributions::{
    bin_centers, sample_histogram, sample_histogram_pair, sample_values, seeded_rng, smooth_and_normalize, Distribution,
    DistributionSpec, HistogramPair, SeededRng,
};
pub use image::{
    decode_netpbm, encode_pgm, encode_ppm, image_to_histogram, read_netpbm, rgb_to_luv_histogram, rgb_to_uv, uv_bin,
    uv_bin_centers, write_pgm, write_ppm, GrayImage, Image, RgbImage,
};
pub use points::{kmeans, kmeans_reduce, make_moons, rotate_cloud, KMeans, PointCloud};
