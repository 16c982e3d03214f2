use crate::data::GrayImage;
use crate::{Error, Result};

/// Reported for identical images instead of infinity.
pub const PSNR_CAP_DB: f64 = 100.0;

pub(crate) fn check_same_shape(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(Error::shape(format!(
            "images differ in size: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Mean squared error after clipping both images to `[0, 1]`.
pub fn mse(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    check_same_shape(reference, test)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(&a, &b)| {
            let d = a.clamp(0.0, 1.0) as f64 - b.clamp(0.0, 1.0) as f64;
            d * d
        })
        .sum();
    Ok(sum / reference.pixels().len() as f64)
}

/// `10 log10(1 / MSE)` with peak 1.0, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / m).log10()).min(PSNR_CAP_DB))
}
