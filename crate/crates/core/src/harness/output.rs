//! Result files of a run.
//!
//! `estimates.csv` has one row per processed frame, ordered by frame ID:
//! `frame_id,transmittance_hat,excess_noise_mpnu,ber,skf_bits_per_symbol,accepted`.
//! Floats are written in shortest round-trip form so the aggregates in
//! `summary.txt` can be recomputed exactly from the CSV.

use super::sweep::{DelaySweepRow, SkewSweepRow};
use super::{ExperimentConfig, RunReport};
use crate::params::FrameEstimate;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
const ESTIMATES_HEADER: &str = "frame_id,transmittance_hat,excess_noise_mpnu,ber,skf_bits_per_symbol,accepted";

/// One row of `estimates.csv`, excess noise in mPNU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRow {
    pub frame_id: u32,
    pub transmittance_hat: f64,
    pub excess_noise_mpnu: f64,
    pub ber: f64,
    pub skf: f64,
    pub accepted: bool,
}

impl From<&FrameEstimate> for EstimateRow {
    fn from(e: &FrameEstimate) -> Self {
        Self {
            frame_id: e.frame_id,
            transmittance_hat: e.transmittance_hat,
            excess_noise_mpnu: e.excess_noise_hat * 1e3,
            ber: e.ber,
            skf: e.skf,
            accepted: e.accepted,
        }
    }
}

/// Statistics over accepted frames. Means are absent when nothing was
/// accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub frames: usize,
    pub processed: usize,
    pub accepted: usize,
    pub fraction_accepted: f64,
    pub mean_excess_mpnu: Option<f64>,
    /// Sample standard deviation; zero for a single frame.
    pub std_excess_mpnu: Option<f64>,
    pub mean_skf: Option<f64>,
    pub mean_transmittance: Option<f64>,
}

impl Aggregates {
    pub fn from_estimates(estimates: &[FrameEstimate], frames: usize) -> Self {
        let rows: Vec<EstimateRow> = estimates.iter().map(EstimateRow::from).collect();
        Self::from_rows(&rows, frames)
    }

    pub fn from_rows(rows: &[EstimateRow], frames: usize) -> Self {
        let acc: Vec<&EstimateRow> = rows.iter().filter(|r| r.accepted).collect();
        let n = acc.len();
        let mean = |f: fn(&EstimateRow) -> f64| (n > 0).then(|| acc.iter().map(|r| f(r)).sum::<f64>() / n as f64);
        let mean_excess = mean(|r| r.excess_noise_mpnu);
        let std = mean_excess.map(|m| {
            if n < 2 {
                0.0
            } else {
                (acc.iter().map(|r| (r.excess_noise_mpnu - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        Self {
            frames,
            processed: rows.len(),
            accepted: n,
            fraction_accepted: if frames == 0 { 0.0 } else { n as f64 / frames as f64 },
            mean_excess_mpnu: mean_excess,
            std_excess_mpnu: std,
            mean_skf: mean(|r| r.skf),
            mean_transmittance: mean(|r| r.transmittance_hat),
        }
    }

    fn lines(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| format!("{x:?}"));
        vec![
            ("result.frames", self.frames.to_string()),
            ("result.processed", self.processed.to_string()),
            ("result.accepted", self.accepted.to_string()),
            ("result.fraction_accepted", format!("{:?}", self.fraction_accepted)),
            ("result.mean_excess_mpnu", opt(self.mean_excess_mpnu)),
            ("result.std_excess_mpnu", opt(self.std_excess_mpnu)),
            ("result.mean_skf", opt(self.mean_skf)),
            ("result.mean_transmittance", opt(self.mean_transmittance)),
        ]
    }
}

pub fn estimates_csv(estimates: &[FrameEstimate]) -> String {
    let mut out = String::from(ESTIMATES_HEADER);
    out.push('\n');
    for r in estimates.iter().map(EstimateRow::from) {
        let _ = writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{}",
            r.frame_id, r.transmittance_hat, r.excess_noise_mpnu, r.ber, r.skf, r.accepted as u8
        );
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `estimates.csv`, `failures.csv` and `summary.txt` into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    write_file(&dir.join(ESTIMATES_FILE), &estimates_csv(&report.estimates))?;

    let mut fails = String::from("frame_id,reason\n");
    for f in &report.failures {
        let _ = writeln!(fails, "{},{}", f.frame_id, f.reason.replace([',', '\n'], ";"));
    }
    write_file(&dir.join(FAILURES_FILE), &fails)?;

    let cal = &report.calibration;
    let mut s = String::from("# configuration\n");
    s.push_str(&report.config.to_text());
    s.push_str("# results\n");
    for (k, v) in report.aggregates().lines() {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "result.failed = {}", report.failures.len());
    let ids: Vec<String> = report.corrupted.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(s, "result.corrupted_frames = {}", ids.join(" "));
    let _ = writeln!(s, "result.calibration_electronic_variance = {:?}", cal.electronic_variance);
    let _ = writeln!(s, "result.calibration_shot_plus_electronic_variance = {:?}", cal.shot_plus_electronic_variance);
    let _ = writeln!(s, "result.calibration_modulation_variance = {:?}", cal.modulation_variance);
    let _ = writeln!(s, "result.wall_seconds = {:.3}", report.wall_seconds);
    write_file(&dir.join(SUMMARY_FILE), &s)
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        msg: msg.into(),
    }
}

pub fn parse_estimates_csv(path: &Path, text: &str) -> Result<Vec<EstimateRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(ESTIMATES_HEADER) {
        return Err(format_err(path, "missing or unexpected header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| format_err(path, format!("line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad("field count"));
            }
            let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
            Ok(EstimateRow {
                frame_id: f[0].parse().map_err(|_| bad("frame_id"))?,
                transmittance_hat: num(1, "transmittance_hat")?,
                excess_noise_mpnu: num(2, "excess_noise_mpnu")?,
                ber: num(3, "ber")?,
                skf: num(4, "skf_bits_per_symbol")?,
                accepted: match f[5] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad("accepted")),
                },
            })
        })
        .collect()
}

/// Reads a run directory and checks the summary's aggregates against a
/// recomputation from the CSV. Returns the configuration, rows and
/// aggregates.
pub fn load_estimates(dir: &Path) -> Result<(ExperimentConfig, Vec<EstimateRow>, Aggregates)> {
    let csv_path = dir.join(ESTIMATES_FILE);
    let csv = std::fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let rows = parse_estimates_csv(&csv_path, &csv)?;
    let sum_path = dir.join(SUMMARY_FILE);
    let summary = std::fs::read_to_string(&sum_path).map_err(|e| Error::io(&sum_path, e))?;
    let config = ExperimentConfig::parse(&summary)?;
    let agg = Aggregates::from_rows(&rows, config.n_frames as usize);
    for (key, want) in agg.lines() {
        let found = summary
            .lines()
            .find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim()));
        match found {
            Some(v) if v == want => {}
            Some(v) => return Err(format_err(&sum_path, format!("{key} is {v} but the CSV gives {want}"))),
            None => return Err(format_err(&sum_path, format!("{key} missing"))),
        }
    }
    Ok((config, rows, agg))
}

pub const DELAY_SWEEP_FILE: &str = "delay_sweep.csv";
pub const SKEW_SWEEP_FILE: &str = "skew_sweep.csv";

pub fn write_delay_sweep(rows: &[DelaySweepRow], dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut s = String::from("offset_samples,frames,mean_excess_mpnu,std_excess_mpnu,mean_transmittance,skf,mean_frame_skf\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{:?},{:?},{:?}",
            r.offset, r.frames, r.mean_excess_mpnu, r.std_excess_mpnu, r.mean_transmittance, r.skf, r.mean_frame_skf
        );
    }
    let path = dir.join(DELAY_SWEEP_FILE);
    write_file(&path, &s)?;
    Ok(path)
}

pub fn write_skew_sweep(rows: &[SkewSweepRow], dir: &Path) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let mut s = String::from("skew,ber_compensated,ber_uncompensated,failed_compensated,failed_uncompensated\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:?},{:?},{:?},{},{}",
            r.skew, r.ber_compensated, r.ber_uncompensated, r.failed_compensated, r.failed_uncompensated
        );
    }
    let path = dir.join(SKEW_SWEEP_FILE);
    write_file(&path, &s)?;
    Ok(path)
}

/// Writes two-column, whitespace-separated data files for plotting and
/// returns their paths. The delay sweep file is written only when rows are
/// given.
pub fn emit_plots(report: &RunReport, dir: &Path, delay_sweep: Option<&[DelaySweepRow]>) -> Result<Vec<PathBuf>> {
    if report.estimates.is_empty() {
        return Err(Error::EmptyReport);
    }
    ensure_dir(dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &str, rows: Vec<(f64, f64)>| -> Result<()> {
        let mut s = format!("# {header}\n");
        for (x, y) in rows {
            let _ = writeln!(s, "{x:?} {y:?}");
        }
        let path = dir.join(name);
        write_file(&path, &s)?;
        written.push(path);
        Ok(())
    };
    let est = &report.estimates;
    emit(
        "excess_noise_per_frame.dat",
        "frame_id excess_noise_mpnu",
        est.iter().map(|e| (e.frame_id as f64, e.excess_noise_hat * 1e3)).collect(),
    )?;
    emit(
        "ber_vs_excess_noise.dat",
        "excess_noise_mpnu ber",
        est.iter().map(|e| (e.excess_noise_hat * 1e3, e.ber)).collect(),
    )?;
    emit(
        "spectrum.dat",
        "frequency_mhz power_db",
        report.spectrum.iter().map(|&(f, p)| (f * 1e-6, 10.0 * p.max(1e-300).log10())).collect(),
    )?;
    if let Some(rows) = delay_sweep {
        emit(
            "delay_sweep.dat",
            "offset_samples mean_excess_noise_mpnu",
            rows.iter().map(|r| (r.offset as f64, r.mean_excess_mpnu)).collect(),
        )?;
        emit(
            "delay_sweep_skf.dat",
            "offset_samples skf_bits_per_symbol",
            rows.iter().map(|r| (r.offset as f64, r.skf)).collect(),
        )?;
    }
    Ok(written)
}
