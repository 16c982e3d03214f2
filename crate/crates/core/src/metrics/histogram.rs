use crate::data::{quantize, GrayImage};
use crate::{Error, Result};

/// Counts of 8-bit pixel values.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    pub bins: [u64; 256],
    pub total: u64,
}

/// Histogram of `round(clip(v) * 255)`.
pub fn histogram(img: &GrayImage) -> Histogram {
    let mut bins = [0u64; 256];
    for &v in img.pixels() {
        bins[quantize(v) as usize] += 1;
    }
    Histogram {
        bins,
        total: img.pixels().len() as u64,
    }
}

impl Histogram {
    pub fn normalized(&self) -> Vec<f64> {
        self.bins.iter().map(|&c| c as f64 / self.total as f64).collect()
    }
}

/// `1 - sum_i min(p_i, q_i)` over the normalized histograms: 0 for identical
/// distributions, 1 for disjoint supports.
///
/// The intersection is accumulated in integers (`min(a_i * |b|, b_i * |a|)`)
/// so that equal distributions give exactly 0.
pub fn hist_distance(a: &Histogram, b: &Histogram) -> Result<f64> {
    if a.total == 0 || b.total == 0 {
        return Err(Error::Empty("histogram has no samples".into()));
    }
    let (ta, tb) = (a.total as u128, b.total as u128);
    let inter: u128 = a
        .bins
        .iter()
        .zip(&b.bins)
        .map(|(&x, &y)| (x as u128 * tb).min(y as u128 * ta))
        .sum();
    let common = inter as f64 / (ta * tb) as f64;
    Ok((1.0 - common).clamp(0.0, 1.0))
}
