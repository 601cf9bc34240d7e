use crate::{Cf64, Error, Result};
use std::f64::consts::TAU;

/// Blind carrier-phase estimate per window of `n` symbols:
/// `θ_k = arg(Σ x^m) / m`, unwrapped across windows modulo `2π/m`.
///
/// Symbols past the last full window are folded into it, so every symbol
/// belongs to window `min(j / n, windows − 1)`.
pub fn mth_power_phase(symbols: &[Cf64], m: u32, n: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::invalid(format!("power M = {m} must be at least 2")));
    }
    if n < 8 {
        return Err(Error::invalid(format!("window N = {n} must be at least 8")));
    }
    let windows = symbols.len() / n;
    if windows == 0 {
        return Err(Error::InsufficientSamples {
            needed: n,
            available: symbols.len(),
        });
    }
    let period = TAU / m as f64;
    let mut out: Vec<f64> = Vec::with_capacity(windows);
    for k in 0..windows {
        let end = if k + 1 == windows { symbols.len() } else { (k + 1) * n };
        let sum: Cf64 = symbols[k * n..end].iter().map(|x| x.powu(m)).sum();
        if sum.norm() < 1e-12 {
            return Err(Error::DegenerateWindow);
        }
        let mut theta = sum.arg() / m as f64;
        if let Some(prev) = out.last() {
            theta += ((prev - theta) / period).round() * period;
        }
        out.push(theta);
    }
    Ok(out)
}

/// Removes a piecewise-constant phase: symbol `j` is rotated by
/// `−thetas[min(j / n, len − 1)]`.
pub fn apply_window_phases(symbols: &[Cf64], thetas: &[f64], n: usize) -> Vec<Cf64> {
    if thetas.is_empty() || n == 0 {
        return symbols.to_vec();
    }
    symbols
        .iter()
        .enumerate()
        .map(|(j, s)| s * Cf64::from_polar(1.0, -thetas[(j / n).min(thetas.len() - 1)]))
        .collect()
}
