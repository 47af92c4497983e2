use std::io::Write;

use nerfstream_core::Frame;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("metrics: frame sizes differ ({0}x{1} vs {2}x{3})")]
    Shape(usize, usize, usize, usize),
}

/// Peak signal-to-noise ratio over RGB values in [0, 1]. Identical frames
/// give `f64::INFINITY`.
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64, MetricsError> {
    if !a.same_shape(b) {
        return Err(MetricsError::Shape(a.width, a.height, b.width, b.height));
    }
    let mut sum = 0.0f64;
    for (x, y) in a.color.iter().zip(&b.color) {
        for c in 0..3 {
            let d = x[c].clamp(0.0, 1.0) as f64 - y[c].clamp(0.0, 1.0) as f64;
            sum += d * d;
        }
    }
    let mse = sum / (3 * a.len()) as f64;
    Ok(if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() })
}

pub fn format_db(v: f64) -> String {
    if v.is_infinite() && v > 0.0 {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 { f64::NAN } else { s / n as f64 }
}

pub const METRICS_SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 12] = [
    "frame",
    "kind",
    "psnr_db",
    "psnr_drop_db",
    "warped_fraction",
    "disoccluded_fraction",
    "cycles",
    "energy_units",
    "dram_bytes",
    "dram_streaming_fraction",
    "bank_conflict_rate",
    "finish_ps",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub frame: usize,
    pub kind: String,
    /// Against a full render at the same pose.
    pub psnr_db: f64,
    /// Quality lost against the supersampled reference, relative to a full render.
    pub psnr_drop_db: f64,
    pub warped_fraction: f64,
    pub disoccluded_fraction: f64,
    pub cycles: f64,
    pub energy_units: f64,
    pub dram_bytes: f64,
    pub dram_streaming_fraction: f64,
    pub bank_conflict_rate: f64,
    pub finish_ps: u64,
}

impl MetricsRow {
    fn record(&self, frame: String) -> Vec<String> {
        vec![
            frame,
            self.kind.clone(),
            format_db(self.psnr_db),
            format!("{:.4}", self.psnr_drop_db),
            format!("{:.6}", self.warped_fraction),
            format!("{:.6}", self.disoccluded_fraction),
            format!("{:.1}", self.cycles),
            format!("{:.3}", self.energy_units),
            format!("{:.1}", self.dram_bytes),
            format!("{:.6}", self.dram_streaming_fraction),
            format!("{:.6}", self.bank_conflict_rate),
            self.finish_ps.to_string(),
        ]
    }

    /// Column-wise mean; an infinite PSNR in any row makes the mean infinite.
    pub fn mean_of(rows: &[MetricsRow]) -> MetricsRow {
        let m = |f: fn(&MetricsRow) -> f64| mean(rows.iter().map(f));
        MetricsRow {
            frame: rows.len(),
            kind: "mean".into(),
            psnr_db: m(|r| r.psnr_db),
            psnr_drop_db: m(|r| r.psnr_drop_db),
            warped_fraction: m(|r| r.warped_fraction),
            disoccluded_fraction: m(|r| r.disoccluded_fraction),
            cycles: m(|r| r.cycles),
            energy_units: m(|r| r.energy_units),
            dram_bytes: m(|r| r.dram_bytes),
            dram_streaming_fraction: m(|r| r.dram_streaming_fraction),
            bank_conflict_rate: m(|r| r.bank_conflict_rate),
            finish_ps: rows.iter().map(|r| r.finish_ps).max().unwrap_or(0),
        }
    }

    pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(METRICS_HEADER)?;
        for r in rows {
            w.write_record(r.record(r.frame.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(rows: &[MetricsRow], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = vec!["schema_version", "frames"];
        header.extend_from_slice(&METRICS_HEADER[1..]);
        w.write_record(&header)?;
        let mut rec = vec![METRICS_SCHEMA_VERSION.to_string()];
        rec.extend(Self::mean_of(rows).record(rows.len().to_string()));
        w.write_record(rec)?;
        w.flush()?;
        Ok(())
    }
}
