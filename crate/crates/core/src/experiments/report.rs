//! Log-log fits and CSV emission.

use std::io::Write;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Least-squares line through `(ln x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub points: usize,
}

/// `None` for a degenerate sweep: fewer than three points or a nonpositive value.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<SlopeFit> {
    if x.len() != y.len() || x.len() < 3 || x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let stderr = if lx.len() > 2 { (sse / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    Some(SlopeFit {
        slope,
        stderr,
        intercept,
        points: lx.len(),
    })
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Contents of the `#` line heading every CSV.
#[derive(Clone, Debug)]
pub struct Metadata {
    pub command: String,
    pub config_hash: String,
    pub wall_time: Option<f64>,
}

impl Metadata {
    pub fn line(&self) -> String {
        let wall = match self.wall_time {
            Some(t) => format!("{t:.3}s"),
            None => "disabled".into(),
        };
        format!(
            "# gsk-gl {} command={} config_sha256={} wall_time={}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash,
            wall
        )
    }
}

/// Header plus string rows; built from serializable records.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn from_records<T: Serialize>(records: &[T]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes.as_slice());
        let header = rd.headers()?.iter().map(String::from).collect();
        let rows = rd
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn write(&self, meta: &Metadata, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{}", meta.line())?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}
