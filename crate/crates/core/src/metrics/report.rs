use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["method", "sigma", "image", "psnr_db", "ssim"];
pub const MEAN_ROW: &str = "MEAN";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub method: String,
    pub sigma: f32,
    pub image: String,
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Mean PSNR / SSIM over the rows of one `(method, sigma)` group.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub method: String,
    pub sigma: f32,
    pub psnr_db: f64,
    pub ssim: f64,
    pub count: usize,
}

/// Per-image results; aggregates are always recomputed from the rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

impl MetricsReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: MetricsRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: MetricsReport) {
        self.rows.extend(other.rows);
    }

    /// Groups in order of first appearance.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out: Vec<Aggregate> = Vec::new();
        let mut sums: Vec<(f64, f64)> = Vec::new();
        for r in &self.rows {
            let i = match out
                .iter()
                .position(|a| a.method == r.method && a.sigma.to_bits() == r.sigma.to_bits())
            {
                Some(i) => i,
                None => {
                    out.push(Aggregate {
                        method: r.method.clone(),
                        sigma: r.sigma,
                        psnr_db: 0.0,
                        ssim: 0.0,
                        count: 0,
                    });
                    sums.push((0.0, 0.0));
                    out.len() - 1
                }
            };
            out[i].count += 1;
            sums[i].0 += r.psnr_db;
            sums[i].1 += r.ssim;
        }
        for (a, (p, s)) in out.iter_mut().zip(sums) {
            a.psnr_db = p / a.count as f64;
            a.ssim = s / a.count as f64;
        }
        out
    }

    pub fn aggregate(&self, method: &str, sigma: f32) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.method == method && a.sigma == sigma)
    }

    /// CSV with header `method,sigma,image,psnr_db,ssim`, one row per image,
    /// then one `MEAN` row per `(method, sigma)` group.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.sigma.to_string(),
                r.image.clone(),
                r.psnr_db.to_string(),
                r.ssim.to_string(),
            ])?;
        }
        for a in self.aggregates() {
            w.write_record([
                a.method,
                a.sigma.to_string(),
                MEAN_ROW.to_string(),
                a.psnr_db.to_string(),
                a.ssim.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()?).map_err(|e| Error::from(e).at_path(path))
    }
}
