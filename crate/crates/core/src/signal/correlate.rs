use super::fft;
use crate::{Cf64, Error, Result};

/// Minimum template length accepted by [`correlate_delay`].
pub const MIN_TEMPLATE: usize = 64;

/// Lag at which `template` best matches `x`, with the normalized
/// correlation magnitude at that lag.
///
/// The metric at lag `l` is `|Σ conj(t_i)·x_{l+i}| / (‖t‖·‖x[l..l+M]‖)`, so it
/// lies in [0, 1] and ignores both scale and global phase. Ties go to the
/// smallest lag.
pub fn correlate_delay(x: &[Cf64], template: &[Cf64]) -> Result<(usize, f64)> {
    let m = template.len();
    if m < MIN_TEMPLATE {
        return Err(Error::invalid(format!("template has {m} symbols, need {MIN_TEMPLATE}")));
    }
    if x.len() < m {
        return Err(Error::invalid(format!(
            "sequence of {} symbols shorter than the template ({m})",
            x.len()
        )));
    }
    let t_norm = template.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if t_norm == 0.0 {
        return Err(Error::Degenerate("template is all zeros"));
    }
    let lags = x.len() - m + 1;
    let n = (x.len() + m).next_power_of_two();
    let mut a = vec![Cf64::new(0.0, 0.0); n];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![Cf64::new(0.0, 0.0); n];
    b[..m].copy_from_slice(template);
    fft::forward(&mut a);
    fft::forward(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v.conj();
    }
    fft::inverse(&mut a);
    let scale = 1.0 / n as f64;

    // running window energy of x
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v.norm_sqr();
        prefix.push(acc);
    }

    let mut best = (0usize, -1.0f64);
    for (lag, c) in a.iter().take(lags).enumerate() {
        let energy = (prefix[lag + m] - prefix[lag]).max(0.0);
        let metric = if energy > 0.0 {
            (c.norm() * scale / (t_norm * energy.sqrt())).min(1.0)
        } else {
            0.0
        };
        if metric > best.1 + 1e-12 {
            best = (lag, metric);
        }
    }
    Ok((best.0, best.1.max(0.0)))
}
