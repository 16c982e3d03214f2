//! Image quality metrics and the pixel-histogram tools.

mod histogram;
mod psnr;
mod report;
mod ssim;

pub use histogram::{hist_distance, histogram, Histogram};
pub use psnr::{mse, psnr, PSNR_CAP_DB};
pub use report::{Aggregate, MetricsReport, MetricsRow, CSV_HEADER, MEAN_ROW};
pub use ssim::{gaussian_taps, ssim, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
