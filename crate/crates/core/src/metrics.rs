//! Image and geometry quality metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{RgbImage, ScalarMap};

pub use crate::ssim::ssim;

/// PSNR reported when the images are (numerically) identical.
pub const PSNR_CAP_DB: f64 = 120.0;
pub const DEFAULT_PATCH: usize = 16;

pub const PDC_GREEN: [f64; 3] = [87.0, 156.0, 44.0];
pub const PDC_GRAY: [f64; 3] = [170.0, 170.0, 170.0];
pub const PDC_PURPLE: [f64; 3] = [195.0, 31.0, 125.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr: f64,
    pub ssim: f64,
    pub pdc: f64,
    pub per_patch_pdc: Vec<Vec<f64>>,
    pub patch_size: usize,
    pub pixels_evaluated: usize,
}

/// Pearson correlation; 0 when either side has (near) zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::contract(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::contract("pearson needs at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va < 1e-18 || vb < 1e-18 {
        return Ok(0.0);
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Patch-wise depth correlation over non-overlapping `patch×patch` tiles of
/// the largest cropped region; returns the mean and the per-patch grid
/// (rows of patches).
pub fn pdc(pred: &ScalarMap, reference: &ScalarMap, patch: usize) -> Result<(f64, Vec<Vec<f64>>)> {
    if !pred.same_shape(reference) {
        return Err(Error::contract("depth maps differ in shape"));
    }
    if patch < 2 || pred.width < patch || pred.height < patch {
        return Err(Error::contract(format!(
            "{}x{} map is smaller than one {patch}x{patch} patch",
            pred.width, pred.height
        )));
    }
    if !pred.data.iter().chain(&reference.data).all(|v| v.is_finite()) {
        return Err(Error::contract("depth maps must be finite"));
    }
    let (px, py) = (pred.width / patch, pred.height / patch);
    let mut grid = vec![vec![0.0; px]; py];
    let mut a = Vec::with_capacity(patch * patch);
    let mut b = Vec::with_capacity(patch * patch);
    for (j, row) in grid.iter_mut().enumerate() {
        for (i, cell) in row.iter_mut().enumerate() {
            a.clear();
            b.clear();
            for y in j * patch..(j + 1) * patch {
                for x in i * patch..(i + 1) * patch {
                    a.push(pred.get(x, y));
                    b.push(reference.get(x, y));
                }
            }
            *cell = pearson(&a, &b)?;
        }
    }
    let mean = grid.iter().flatten().sum::<f64>() / (px * py) as f64;
    Ok((mean, grid))
}

/// Overlay tint for correlation `r`: green at +1, gray at 0, purple at −1,
/// linear in between. Channels rounded half away from zero.
pub fn pdc_tint(r: f64) -> [u8; 3] {
    let r = r.clamp(-1.0, 1.0);
    let (end, t) = if r >= 0.0 { (PDC_GREEN, r) } else { (PDC_PURPLE, -r) };
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (PDC_GRAY[c] + t * (end[c] - PDC_GRAY[c])).round() as u8;
    }
    out
}

/// Grayscale depth visualization in [0, 1], near = bright.
pub fn depth_to_gray(depth: &ScalarMap) -> ScalarMap {
    let valid = depth.data.iter().copied().filter(|v| *v > 0.0 && v.is_finite());
    let (lo, hi) = valid.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    let span = hi - lo;
    let data = depth
        .data
        .iter()
        .map(|&v| {
            if !(v > 0.0 && v.is_finite()) {
                0.0
            } else if span > 0.0 {
                1.0 - (v - lo) / span
            } else {
                1.0
            }
        })
        .collect();
    ScalarMap {
        width: depth.width,
        height: depth.height,
        data,
    }
}

/// Per-patch tint blended 50% over the grayscale depth visualization.
/// Pixels outside the patch tiling keep the plain grayscale.
pub fn pdc_overlay(per_patch: &[Vec<f64>], base_depth: &ScalarMap, patch: usize) -> Result<RgbImage> {
    let rows = per_patch.len();
    let cols = per_patch.first().map_or(0, |r| r.len());
    if patch == 0
        || rows != base_depth.height / patch
        || cols != base_depth.width / patch
        || per_patch.iter().any(|r| r.len() != cols)
    {
        return Err(Error::contract("patch grid does not match the depth image tiling"));
    }
    let gray = depth_to_gray(base_depth);
    let mut out = RgbImage::zeros(base_depth.width, base_depth.height);
    for y in 0..base_depth.height {
        for x in 0..base_depth.width {
            let g = gray.get(x, y);
            let (i, j) = (x / patch, y / patch);
            let rgb = if j < rows && i < cols {
                let tint = pdc_tint(per_patch[j][i]);
                [0, 1, 2].map(|c| 0.5 * tint[c] as f64 / 255.0 + 0.5 * g)
            } else {
                [g; 3]
            };
            out.set(x, y, rgb);
        }
    }
    Ok(out)
}

/// `10·log10(1/MSE)`, capped at 120 dB.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::contract("images differ in shape"));
    }
    let mse = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.data.len() as f64;
    if mse < 1e-12 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Root-mean-square depth error over pixels where `mask` holds.
pub fn depth_rmse(pred: &ScalarMap, reference: &ScalarMap, mask: Option<&[bool]>) -> Result<f64> {
    if !pred.same_shape(reference) {
        return Err(Error::contract("depth maps differ in shape"));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for (p, (a, b)) in pred.data.iter().zip(&reference.data).enumerate() {
        if mask.is_some_and(|m| !m[p]) {
            continue;
        }
        sum += (a - b) * (a - b);
        n += 1;
    }
    Ok(if n == 0 { 0.0 } else { (sum / n as f64).sqrt() })
}

/// PSNR, SSIM and PDC of one view.
pub fn evaluate_view(
    rendered: &RgbImage,
    target: &RgbImage,
    pred_depth: &ScalarMap,
    ref_depth: &ScalarMap,
    patch: usize,
) -> Result<MetricsReport> {
    let (mean, grid) = pdc(pred_depth, ref_depth, patch)?;
    Ok(MetricsReport {
        psnr: psnr(rendered, target)?,
        ssim: ssim(rendered, target)?,
        pdc: mean,
        pixels_evaluated: grid.len() * grid.first().map_or(0, |r| r.len()) * patch * patch,
        per_patch_pdc: grid,
        patch_size: patch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&a, &[1.0, 3.0, 2.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(pearson(&a, &[2.0; 4]).unwrap(), 0.0);
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn pdc_identity_and_shape() {
        let d = ScalarMap::from_vec(35, 20, (0..700).map(|i| ((i * 37) % 101) as f64 + 1.0).collect()).unwrap();
        let (mean, grid) = pdc(&d, &d, 16).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
        assert_eq!((grid.len(), grid[0].len()), (1, 2));
        assert!(pdc(&ScalarMap::zeros(8, 8), &ScalarMap::zeros(8, 8), 16).is_err());
    }

    #[test]
    fn tint_examples() {
        assert_eq!(pdc_tint(1.0), [87, 156, 44]);
        assert_eq!(pdc_tint(0.0), [170, 170, 170]);
        assert_eq!(pdc_tint(-1.0), [195, 31, 125]);
        assert_eq!(pdc_tint(0.5), [129, 163, 107]);
    }

    #[test]
    fn overlay_is_uniform_for_uniform_grid() {
        let depth = ScalarMap::filled(32, 32, 2.0);
        let grid = vec![vec![1.0; 2]; 2];
        let img = pdc_overlay(&grid, &depth, 16).unwrap();
        let first = img.get(0, 0);
        assert!(img.data.chunks(3).all(|p| p == first));
        // green dominates the tint
        assert!(first[1] > first[0] && first[1] > first[2]);
        let gray = pdc_overlay(&vec![vec![0.0; 2]; 2], &depth, 16).unwrap();
        let p = gray.get(5, 5);
        assert!(p[0] == p[1] && p[1] == p[2]);
        assert!(pdc_overlay(&vec![vec![0.0; 3]; 2], &depth, 16).is_err());
    }

    #[test]
    fn psnr_examples() {
        let a = RgbImage::filled(4, 4, [0.2; 3]);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b = RgbImage::filled(4, 4, [0.3; 3]);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        let black = RgbImage::zeros(4, 4);
        let white = RgbImage::filled(4, 4, [1.0; 3]);
        assert!(psnr(&black, &white).unwrap().abs() < 1e-12);
        assert!(psnr(&a, &RgbImage::zeros(2, 2)).is_err());
    }
}
