//! Windowed SSIM with an 11×11 Gaussian window (σ = 1.5), zero padding,
//! dynamic range 1.0; averaged over pixels and channels.

use crate::error::{Error, Result};
use crate::image::RgbImage;

pub const WINDOW: usize = 11;
pub const SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

/// Normalized 1D window; the 2D window is its outer product.
pub fn window_1d() -> [f64; WINDOW] {
    let half = (WINDOW / 2) as f64;
    let mut w = [0.0; WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - half;
        *v = (-(x * x) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    w.map(|v| v / sum)
}

/// Separable "same" correlation with zero padding.
fn blur(src: &[f64], width: usize, height: usize, w: &[f64; WINDOW]) -> Vec<f64> {
    let half = (WINDOW / 2) as isize;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let xx = x as isize + k as isize - half;
                if xx >= 0 && (xx as usize) < width {
                    acc += wk * src[y * width + xx as usize];
                }
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                let yy = y as isize + k as isize - half;
                if yy >= 0 && (yy as usize) < height {
                    acc += wk * tmp[yy as usize * width + x];
                }
            }
            out[y * width + x] = acc;
        }
    }
    out
}

fn check(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::contract(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

struct Moments {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    e_xx: Vec<f64>,
    e_yy: Vec<f64>,
    e_xy: Vec<f64>,
}

fn moments(x: &[f64], y: &[f64], width: usize, height: usize, w: &[f64; WINDOW]) -> Moments {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    Moments {
        mu_x: blur(x, width, height, w),
        mu_y: blur(y, width, height, w),
        e_xx: blur(&xx, width, height, w),
        e_yy: blur(&yy, width, height, w),
        e_xy: blur(&xy, width, height, w),
    }
}

/// Mean SSIM of `a` against `b`.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check(a, b)?;
    let w = window_1d();
    let (width, height) = (a.width, a.height);
    let mut total = 0.0;
    for c in 0..3 {
        let x = a.channel(c).data;
        let y = b.channel(c).data;
        let m = moments(&x, &y, width, height, &w);
        for p in 0..x.len() {
            let (mx, my) = (m.mu_x[p], m.mu_y[p]);
            let sxx = m.e_xx[p] - mx * mx;
            let syy = m.e_yy[p] - my * my;
            let sxy = m.e_xy[p] - mx * my;
            total += ((2.0 * mx * my + C1) * (2.0 * sxy + C2))
                / ((mx * mx + my * my + C1) * (sxx + syy + C2));
        }
    }
    Ok(total / (3 * width * height) as f64)
}

/// Mean SSIM and its gradient w.r.t. `a` (interleaved like the image).
pub fn ssim_with_grad(a: &RgbImage, b: &RgbImage) -> Result<(f64, Vec<f64>)> {
    check(a, b)?;
    let w = window_1d();
    let (width, height) = (a.width, a.height);
    let npix = width * height;
    let norm = 1.0 / (3 * npix) as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; 3 * npix];
    for c in 0..3 {
        let x = a.channel(c).data;
        let y = b.channel(c).data;
        let m = moments(&x, &y, width, height, &w);
        let mut g_mu = vec![0.0; npix];
        let mut g_xx = vec![0.0; npix];
        let mut g_xy = vec![0.0; npix];
        for p in 0..npix {
            let (mx, my) = (m.mu_x[p], m.mu_y[p]);
            let sxx = m.e_xx[p] - mx * mx;
            let syy = m.e_yy[p] - my * my;
            let sxy = m.e_xy[p] - mx * my;
            let a1 = 2.0 * mx * my + C1;
            let a2 = 2.0 * sxy + C2;
            let b1 = mx * mx + my * my + C1;
            let b2 = sxx + syy + C2;
            let s = a1 * a2 / (b1 * b2);
            total += s;
            g_mu[p] = norm * s * (2.0 * my / a1 - 2.0 * my / a2 - 2.0 * mx / b1 + 2.0 * mx / b2);
            g_xx[p] = -norm * s / b2;
            g_xy[p] = norm * 2.0 * s / a2;
        }
        // the window is symmetric, so the adjoint of the blur is the blur
        let bm = blur(&g_mu, width, height, &w);
        let bxx = blur(&g_xx, width, height, &w);
        let bxy = blur(&g_xy, width, height, &w);
        for p in 0..npix {
            grad[3 * p + c] = bm[p] + 2.0 * x[p] * bxx[p] + y[p] * bxy[p];
        }
    }
    Ok((total * norm, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> RgbImage {
        RgbImage::from_vec(w, h, (0..w * h * 3).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    /// Direct 2D sliding-window evaluation, no separability.
    fn ssim_oracle(a: &RgbImage, b: &RgbImage) -> f64 {
        let w1 = window_1d();
        let half = (WINDOW / 2) as isize;
        let (width, height) = (a.width as isize, a.height as isize);
        let mut total = 0.0;
        for c in 0..3 {
            for y in 0..height {
                for x in 0..width {
                    let (mut mx, mut my, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for i in 0..WINDOW as isize {
                        for j in 0..WINDOW as isize {
                            let (xx, yy) = (x + j - half, y + i - half);
                            if xx < 0 || yy < 0 || xx >= width || yy >= height {
                                continue;
                            }
                            let wt = w1[i as usize] * w1[j as usize];
                            let va = a.get(xx as usize, yy as usize)[c];
                            let vb = b.get(xx as usize, yy as usize)[c];
                            mx += wt * va;
                            my += wt * vb;
                            exx += wt * va * va;
                            eyy += wt * vb * vb;
                            exy += wt * va * vb;
                        }
                    }
                    let (sx, sy, sxy) = (exx - mx * mx, eyy - my * my, exy - mx * my);
                    total += ((2.0 * mx * my + C1) * (2.0 * sxy + C2))
                        / ((mx * mx + my * my + C1) * (sx + sy + C2));
                }
            }
        }
        total / (3 * a.width * a.height) as f64
    }

    #[test]
    fn matches_definitional_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let a = random_image(&mut rng, 16, 16);
        let b = random_image(&mut rng, 16, 16);
        assert!((ssim(&a, &b).unwrap() - ssim_oracle(&a, &b)).abs() < 1e-10);
    }

    #[test]
    fn identity_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_image(&mut rng, 13, 9);
        let b = random_image(&mut rng, 13, 9);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_image(&mut rng, 12, 10);
        let b = random_image(&mut rng, 12, 10);
        let (_, g) = ssim_with_grad(&a, &b).unwrap();
        let h = 1e-6;
        for idx in [0, 7, 50, 121, 359] {
            let mut ap = a.clone();
            let mut am = a.clone();
            ap.data[idx] += h;
            am.data[idx] -= h;
            let fd = (ssim(&ap, &b).unwrap() - ssim(&am, &b).unwrap()) / (2.0 * h);
            assert!((fd - g[idx]).abs() < 1e-7 * fd.abs().max(1e-3), "{idx}: {fd} vs {}", g[idx]);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(ssim(&RgbImage::zeros(4, 4), &RgbImage::zeros(4, 5)).is_err());
    }
}
