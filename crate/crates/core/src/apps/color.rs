//! Color transfer by transporting UV chromaticity histograms.

use crate::data::image::{rgb_to_luv_histogram, rgb_to_uv, uv_bin, RgbImage};
use crate::error::{PotError, Result};
use crate::problem::{cost_matrix_from_positions, sparsity, MassVector, PotProblem, Regularizer, TransportPlan, SPARSITY_THRESHOLD};
use crate::qpot::{DualCertificate, SolverConfig};
use crate::solve::solve;

/// Default number of UV cells per axis.
pub const DEFAULT_BINS_PER_AXIS: usize = 32;

#[derive(Debug, Clone)]
pub struct ColorTransferResult {
    pub output_image: RgbImage,
    pub plan: TransportPlan,
    pub certificate: Option<DualCertificate>,
    pub sparsity: f64,
    pub source_hist: MassVector,
    pub target_hist: MassVector,
    pub problem: PotProblem,
}

/// Plan-weighted mean of the target cell centers for every source cell that
/// sends mass; `None` for cells that send nothing.
pub fn barycentric_targets(plan: &TransportPlan, target_centers: &[[f64; 2]]) -> Vec<Option<[f64; 2]>> {
    (0..plan.n())
        .map(|i| {
            let row = plan.row(i);
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                let (mut u, mut v) = (0.0, 0.0);
                for (x, c) in row.iter().zip(target_centers) {
                    u += x * c[0];
                    v += x * c[1];
                }
                Some([u / mass, v / mass])
            } else {
                None
            }
        })
        .collect()
}

/// Rebuilds a pixel from its brightness `L = R+G+B` and new chromaticity.
fn reconstruct(l: f64, u: f64, v: f64) -> [u8; 3] {
    let g = (u * l).clamp(0.0, 255.0);
    let b = (v * l).clamp(0.0, 255.0);
    let r = (l - g - b).clamp(0.0, 255.0);
    [r.round() as u8, g.round() as u8, b.round() as u8]
}

/// Moves every pixel's chromaticity by its source cell's barycentric
/// displacement `T(a_i) - a_i`; brightness is preserved. Pixels of cells that
/// send no mass are copied unchanged.
pub fn apply_transfer(
    source: &RgbImage,
    plan: &TransportPlan,
    source_centers: &[[f64; 2]],
    target_centers: &[[f64; 2]],
    bins_per_axis: usize,
) -> RgbImage {
    let shift: Vec<Option<[f64; 2]>> = barycentric_targets(plan, target_centers)
        .into_iter()
        .zip(source_centers)
        .map(|(t, a)| t.map(|t| [t[0] - a[0], t[1] - a[1]]))
        .collect();
    let mut data = Vec::with_capacity(source.data.len());
    for k in 0..source.pixel_count() {
        let p = source.pixel(k);
        let (u, v) = rgb_to_uv(p);
        match shift[uv_bin(u, v, bins_per_axis)] {
            Some(d) if d != [0.0, 0.0] => {
                let l = p[0] as f64 + p[1] as f64 + p[2] as f64;
                data.extend_from_slice(&reconstruct(l, u + d[0], v + d[1]));
            }
            _ => data.extend_from_slice(&p),
        }
    }
    RgbImage { width: source.width, height: source.height, data }
}

/// Transfers the target's color palette onto the source image.
pub fn color_transfer(
    source: &RgbImage,
    target: &RgbImage,
    lambda: f64,
    epsilon: f64,
    method: Regularizer,
    bins_per_axis: usize,
) -> Result<ColorTransferResult> {
    color_transfer_with(source, target, lambda, epsilon, method, bins_per_axis, &SolverConfig::default())
}

/// [`color_transfer`] with explicit solver settings.
pub fn color_transfer_with(
    source: &RgbImage,
    target: &RgbImage,
    lambda: f64,
    epsilon: f64,
    method: Regularizer,
    bins_per_axis: usize,
    config: &SolverConfig,
) -> Result<ColorTransferResult> {
    if source.pixel_count() == 0 || target.pixel_count() == 0 {
        return Err(PotError::Shape("color transfer needs nonempty images".into()));
    }
    let (source_hist, centers) = rgb_to_luv_histogram(source, bins_per_axis)?;
    let (target_hist, _) = rgb_to_luv_histogram(target, bins_per_axis)?;
    let cost = cost_matrix_from_positions(&centers, &centers, false)?;
    let problem = PotProblem::with_lambda(source_hist.clone(), target_hist.clone(), cost, lambda, epsilon, method)?;
    let solution = solve(&problem, config)?;
    let output_image = apply_transfer(source, &solution.plan, &centers, &centers, bins_per_axis);
    Ok(ColorTransferResult {
        output_image,
        sparsity: sparsity(&solution.plan, SPARSITY_THRESHOLD),
        plan: solution.plan,
        certificate: solution.certificate,
        source_hist,
        target_hist,
        problem,
    })
}
