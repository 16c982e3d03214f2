use rand_distr::{Distribution, StandardNormal};

use super::image::GrayImage;
use crate::{rng, Error, Result};

/// A clean image, its noisy version and the noise parameters that made it.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    pub clean: GrayImage,
    pub noisy: GrayImage,
    /// Noise standard deviation on the 0-255 scale.
    pub sigma: f32,
    pub seed: u64,
}

/// Adds i.i.d. `N(0, (sigma / 255)^2)` noise, drawn in raster order from a
/// generator keyed by `seed`. The result is not clipped.
pub fn add_awgn(img: &GrayImage, sigma: f32, seed: u64) -> Result<ImagePair> {
    let mut noisy = img.clone();
    add_noise_in_place(noisy.pixels_mut(), sigma, seed)?;
    Ok(ImagePair {
        clean: img.clone(),
        noisy,
        sigma,
        seed,
    })
}

pub(crate) fn add_noise_in_place(pixels: &mut [f32], sigma: f32, seed: u64) -> Result<()> {
    let mut rng = rng::derive(seed, &[]);
    add_noise_with(pixels, sigma, &mut rng)
}

pub(crate) fn add_noise_with(pixels: &mut [f32], sigma: f32, rng: &mut impl rand::Rng) -> Result<()> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let std = sigma as f64 / 255.0;
    for p in pixels {
        let z: f64 = StandardNormal.sample(rng);
        *p += (z * std) as f32;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_noop() {
        let img = GrayImage::from_fn(8, 8, |x, y| (x + y) as f32 / 16.0).unwrap();
        let pair = add_awgn(&img, 0.0, 3).unwrap();
        assert_eq!(pair.noisy, img);
    }

    #[test]
    fn negative_sigma_rejected() {
        let img = GrayImage::filled(4, 4, 0.5).unwrap();
        assert!(add_awgn(&img, -1.0, 0).is_err());
        assert!(add_awgn(&img, f32::NAN, 0).is_err());
    }

    #[test]
    fn seeded_and_unclipped() {
        let img = GrayImage::filled(32, 32, 0.98).unwrap();
        let a = add_awgn(&img, 50.0, 7).unwrap();
        let b = add_awgn(&img, 50.0, 7).unwrap();
        let c = add_awgn(&img, 50.0, 8).unwrap();
        assert_eq!(a.noisy, b.noisy);
        assert_ne!(a.noisy, c.noisy);
        assert!(a.noisy.pixels().iter().any(|&v| v > 1.0));
        assert_eq!(a.clean, img);
    }
}
