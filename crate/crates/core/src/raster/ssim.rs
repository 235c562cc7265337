use rayon::prelude::*;

use super::{render_frames, Framebuffer, RasterError};
use crate::color::Rgba;
use crate::ssu::{apply, UpdateSequence};
use crate::svg::FrameSequence;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
pub const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.map(|v| v / sum)
}

/// BT.601 luma of each pixel; alpha is ignored.
fn luma(fb: &Framebuffer) -> Vec<f64> {
    fb.pixels
        .chunks_exact(4)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Separable Gaussian filter keeping only windows fully inside the image.
fn filter_valid(img: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut horiz = vec![0.0; ow * h];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * row[x + i];
            }
            horiz[y * ow + x] = s;
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, kv) in k.iter().enumerate() {
                s += kv * horiz[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Mean structural similarity of the luma channels, 11×11 Gaussian
/// window (σ = 1.5), over all windows that fit inside the image.
pub fn ssim(a: &Framebuffer, b: &Framebuffer) -> Result<f64, RasterError> {
    if a.size() != b.size() {
        return Err(RasterError::DimensionMismatch { a: a.size(), b: b.size() });
    }
    let (w, h) = (a.width as usize, a.height as usize);
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(RasterError::ImageTooSmall(a.size()));
    }
    let k = gaussian_kernel();
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();

    let mu_x = filter_valid(&x, w, h, &k);
    let mu_y = filter_valid(&y, w, h, &k);
    let e_xx = filter_valid(&xx, w, h, &k);
    let e_yy = filter_valid(&yy, w, h, &k);
    let e_xy = filter_valid(&xy, w, h, &k);

    let mut total = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let sxx = e_xx[i] - mx * mx;
        let syy = e_yy[i] - my * my;
        let sxy = e_xy[i] - mx * my;
        let num = (2.0 * mx * my + SSIM_C1) * (2.0 * sxy + SSIM_C2);
        let den = (mx * mx + my * my + SSIM_C1) * (sxx + syy + SSIM_C2);
        total += num / den;
    }
    Ok(total / mu_x.len() as f64)
}

/// Mean per-frame SSIM between the original frames and the frames
/// reconstructed from `candidate`, both rendered at `size` over white.
pub fn identity_score(
    original: &FrameSequence,
    candidate: &UpdateSequence,
    size: (u32, u32),
) -> Result<f64, RasterError> {
    let reconstructed = apply(candidate)?;
    let (n, m) = (original.frames().len(), reconstructed.frames().len());
    if n != m {
        return Err(RasterError::FrameCountMismatch {
            original: n,
            candidate: m,
        });
    }
    let a = render_frames(original.frames(), size, Rgba::WHITE)?;
    let b = render_frames(reconstructed.frames(), size, Rgba::WHITE)?;
    let scores = a
        .par_iter()
        .zip(&b)
        .map(|(x, y)| ssim(x, y))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scores.iter().sum::<f64>() / n as f64)
}
