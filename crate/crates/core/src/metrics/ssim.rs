//! Mean structural similarity with an 11x11 Gaussian window (std 1.5).
//!
//! Local statistics are Gaussian-weighted means over a window centred on
//! every pixel; pixels outside the image are mirrored about the edge
//! (`d c b a | a b c d | d c b a`). The constants are `C1 = 0.01^2` and
//! `C2 = 0.03^2` for a unit dynamic range. Inputs are clipped to `[0, 1]`.

use super::psnr::check_same_shape;
use crate::data::GrayImage;
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, t) in g.iter_mut().enumerate() {
        let d = i as f64 - r;
        *t = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|t| *t /= s);
    g
}

#[inline]
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let j = if i < 0 {
        -i - 1
    } else if i >= n {
        2 * n - i - 1
    } else {
        i
    };
    j as usize
}

/// Separable Gaussian filter of a `w x h` plane.
fn blur(src: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * row[reflect(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &t) in taps.iter().enumerate() {
                acc += t * tmp[reflect(y as isize + k as isize - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Mean of the local SSIM map. Symmetric in its arguments; `ssim(x, x)` is
/// exactly 1.
pub fn ssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_same_shape(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let x: Vec<f64> = reference.pixels().iter().map(|v| v.clamp(0.0, 1.0) as f64).collect();
    let y: Vec<f64> = test.pixels().iter().map(|v| v.clamp(0.0, 1.0) as f64).collect();
    let taps = gaussian_taps();
    let mu_x = blur(&x, w, h, &taps);
    let mu_y = blur(&y, w, h, &taps);
    let xx = blur(&x.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, &taps);
    let yy = blur(&y.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, &taps);
    let xy = blur(&x.iter().zip(&y).map(|(a, b)| a * b).collect::<Vec<_>>(), w, h, &taps);

    let mut total = 0.0;
    for i in 0..w * h {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        let num = (2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2);
        let den = (mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2);
        total += num / den;
    }
    Ok(total / (w * h) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(seed: usize) -> GrayImage {
        GrayImage::from_fn(23, 17, |x, y| (((x * 13 + y * 7 + seed * 5) % 29) as f32 / 28.0).powf(1.3)).unwrap()
    }

    #[test]
    fn self_similarity_is_exactly_one() {
        let a = texture(1);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn symmetric_and_bounded() {
        let (a, b) = (texture(1), texture(4));
        let ab = ssim(&a, &b).unwrap();
        assert_eq!(ab, ssim(&b, &a).unwrap());
        assert!(ab < 1.0 && ab > -1.0);
    }

    #[test]
    fn too_small() {
        let a = GrayImage::filled(10, 30, 0.5).unwrap();
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-5, 5), 4);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(9, 5), 0);
    }
}
