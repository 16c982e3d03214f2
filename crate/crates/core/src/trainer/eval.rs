use std::fmt::Write as _;

use crate::data::{add_awgn, GrayImage, NamedImage};
use crate::metrics::{psnr, ssim, MetricsReport, MetricsRow, SSIM_WINDOW};
use crate::models::Model;
use crate::{derive_seed, par, rng, Error, Result};

/// Seed of the noise field added to test image `index` at `sigma`.
pub fn eval_noise_seed(seed: u64, sigma: f32, index: usize) -> u64 {
    derive_seed(seed, &[rng::DOMAIN_EVAL, sigma.to_bits() as u64, index as u64])
}

/// Corrupts every image at every sigma, runs `denoise` on the full noisy
/// image, clips, and scores against the clean image. Images run in
/// parallel; rows come out ordered by sigma, then image.
pub fn evaluate_with<F>(images: &[NamedImage], sigmas: &[f32], seed: u64, method: &str, denoise: F) -> Result<MetricsReport>
where
    F: Fn(&GrayImage) -> Result<GrayImage> + Sync + Send,
{
    if images.is_empty() {
        return Err(Error::Empty("no evaluation images".into()));
    }
    if sigmas.is_empty() {
        return Err(Error::Empty("no noise levels to evaluate".into()));
    }
    for im in images {
        if im.image.width() < SSIM_WINDOW || im.image.height() < SSIM_WINDOW {
            return Err(Error::InvalidArgument(format!(
                "image {} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window",
                im.id
            )));
        }
    }
    let mut report = MetricsReport::new();
    for &sigma in sigmas {
        let rows = par::map(images.len(), |i| -> Result<MetricsRow> {
            let clean = &images[i].image;
            let pair = add_awgn(clean, sigma, eval_noise_seed(seed, sigma, i))?;
            let restored = denoise(&pair.noisy)?.clipped();
            Ok(MetricsRow {
                method: method.to_string(),
                sigma,
                image: images[i].id.clone(),
                psnr_db: psnr(clean, &restored)?,
                ssim: ssim(clean, &restored)?,
            })
        });
        for r in rows {
            report.push(r?);
        }
    }
    Ok(report)
}

/// Infer-mode evaluation of `model`; the model is only read.
pub fn evaluate(model: &Model, images: &[NamedImage], sigmas: &[f32], seed: u64, method: &str) -> Result<MetricsReport> {
    evaluate_with(images, sigmas, seed, method, |noisy| denoise_image(model, noisy))
}

/// Scores the noisy inputs themselves (the do-nothing baseline).
pub fn evaluate_noisy(images: &[NamedImage], sigmas: &[f32], seed: u64) -> Result<MetricsReport> {
    evaluate_with(images, sigmas, seed, "noisy", |noisy| Ok(noisy.clone()))
}

/// Full-image inference; the result is not clipped.
pub fn denoise_image(model: &Model, noisy: &GrayImage) -> Result<GrayImage> {
    let out = model.infer(&noisy.to_tensor())?;
    GrayImage::from_tensor(&out, 0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub sigma: f32,
    pub psnr_db: f64,
}

/// Mean PSNR per noise level, sorted by sigma. Rows of every method at a
/// sigma are pooled, so pass a single-method report.
pub fn behavior_curve(report: &MetricsReport) -> Result<Vec<CurvePoint>> {
    if report.rows.is_empty() {
        return Err(Error::Empty("report has no rows".into()));
    }
    let mut sigmas: Vec<f32> = report.rows.iter().map(|r| r.sigma).collect();
    sigmas.sort_by(f32::total_cmp);
    sigmas.dedup();
    Ok(sigmas
        .into_iter()
        .map(|sigma| {
            let vals: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| r.sigma == sigma)
                .map(|r| r.psnr_db)
                .collect();
            CurvePoint {
                sigma,
                psnr_db: vals.iter().sum::<f64>() / vals.len() as f64,
            }
        })
        .collect())
}

/// `sigma,psnr_db` CSV.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("sigma,psnr_db\n");
    for p in points {
        let _ = writeln!(s, "{},{}", p.sigma, p.psnr_db);
    }
    s
}
