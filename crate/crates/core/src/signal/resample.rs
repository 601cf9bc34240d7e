use super::ComplexSeries;
use crate::{Cf64, Error, Result};
use std::f64::consts::PI;

/// Length of the windowed-sinc interpolation kernel.
pub const RESAMPLER_TAPS: usize = 32;
const KAISER_BETA: f64 = 8.0;
const PHASES: usize = 4096;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Polyphase table of a Kaiser-windowed sinc with cutoff `cutoff` (fraction
/// of the input Nyquist). Row `p` holds the taps for fractional offset
/// `p / PHASES`; each row is normalized to unit DC gain.
struct KernelTable {
    rows: Vec<[f64; RESAMPLER_TAPS]>,
}

impl KernelTable {
    fn new(cutoff: f64) -> Self {
        let half = (RESAMPLER_TAPS / 2) as f64;
        let i0b = bessel_i0(KAISER_BETA);
        let rows = (0..=PHASES)
            .map(|p| {
                let frac = p as f64 / PHASES as f64;
                let mut row = [0.0; RESAMPLER_TAPS];
                for (j, w) in row.iter_mut().enumerate() {
                    // distance from the interpolation point to input sample j
                    let d = frac + (half - 1.0) - j as f64;
                    let u = d / half;
                    let win = if u.abs() <= 1.0 {
                        bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / i0b
                    } else {
                        0.0
                    };
                    *w = cutoff * sinc(cutoff * d) * win;
                }
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|w| *w /= s);
                row
            })
            .collect();
        Self { rows }
    }

    #[inline]
    fn interpolate(&self, x: &[Cf64], pos: f64) -> Cf64 {
        let base = pos.floor();
        let frac = pos - base;
        let fp = frac * PHASES as f64;
        let p = fp.floor() as usize;
        let mu = fp - p as f64;
        let (r0, r1) = (&self.rows[p], &self.rows[p + 1]);
        let first = base as isize - (RESAMPLER_TAPS as isize / 2 - 1);
        let mut acc = Cf64::new(0.0, 0.0);
        if first >= 0 && (first as usize + RESAMPLER_TAPS) <= x.len() {
            let win = &x[first as usize..first as usize + RESAMPLER_TAPS];
            for j in 0..RESAMPLER_TAPS {
                acc += win[j] * (r0[j] + mu * (r1[j] - r0[j]));
            }
        } else {
            for j in 0..RESAMPLER_TAPS {
                let idx = first + j as isize;
                if idx >= 0 && (idx as usize) < x.len() {
                    acc += x[idx as usize] * (r0[j] + mu * (r1[j] - r0[j]));
                }
            }
        }
        acc
    }
}

/// Band-limited interpolation of `x` onto a grid `ratio` times denser.
///
/// Output sample `m` is the input evaluated at fractional index `m / ratio`;
/// the output rate is `sample_rate · ratio` and its length is
/// `floor(len · ratio)`.
pub fn resample(x: &ComplexSeries, ratio: f64) -> Result<ComplexSeries> {
    if !(0.5..=2.0).contains(&ratio) {
        return Err(Error::invalid(format!("resampling ratio {ratio} outside [0.5, 2]")));
    }
    if ratio == 1.0 {
        return Ok(x.clone());
    }
    let out_len = (x.len() as f64 * ratio).floor() as usize;
    if out_len == 0 {
        return Err(Error::invalid("resampled series would be empty"));
    }
    let table = KernelTable::new(ratio.min(1.0));
    let input = x.samples();
    let out = (0..out_len)
        .map(|m| table.interpolate(input, m as f64 / ratio))
        .collect();
    Ok(ComplexSeries::from_parts(out, x.sample_rate() * ratio))
}
