//! FFT-backed helpers: linear convolution with a real filter and
//! frequency-domain band masking.

use crate::Cf64;
use rustfft::FftPlanner;

pub fn forward(buf: &mut [Cf64]) {
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// Unnormalized inverse transform.
pub fn inverse(buf: &mut [Cf64]) {
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
}

/// Frequency in Hz of FFT bin `k` of an `n`-point transform.
pub fn bin_frequency(k: usize, n: usize, rate: f64) -> f64 {
    let k = if k >= n.div_ceil(2) { k as f64 - n as f64 } else { k as f64 };
    k * rate / n as f64
}

/// Block length for overlap-save convolution.
const OLS_BLOCK: usize = 1 << 14;

/// Convolution aligned so that output sample `n` is centered on input
/// sample `n`, i.e. `y[n] = Σ_j h[j]·x[n + center − j]` with
/// `center = (h.len() − 1)/2`. Output length equals input length.
///
/// Long inputs are processed by overlap-save in fixed blocks.
pub fn convolve_same(x: &[Cf64], taps: &[f64]) -> Vec<Cf64> {
    let center = (taps.len() - 1) / 2;
    let m = taps.len();
    let full_len = x.len() + m - 1;
    let block = if full_len <= OLS_BLOCK { full_len.next_power_of_two() } else { OLS_BLOCK.max((2 * m).next_power_of_two()) };
    let step = block - (m - 1);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(block);
    let inv = planner.plan_fft_inverse(block);
    let mut h = vec![Cf64::new(0.0, 0.0); block];
    for (dst, &t) in h.iter_mut().zip(taps) {
        *dst = Cf64::new(t, 0.0);
    }
    fwd.process(&mut h);
    let scale = 1.0 / block as f64;
    h.iter_mut().for_each(|v| *v *= scale);

    // full linear convolution index k = n + center; block output index i
    // holds full index start + i for i ≥ m − 1
    let mut out = vec![Cf64::new(0.0, 0.0); x.len()];
    let mut buf = vec![Cf64::new(0.0, 0.0); block];
    let mut start = 0usize;
    while start < center + x.len() {
        // input samples start − (m − 1) .. start − (m − 1) + block
        for (i, b) in buf.iter_mut().enumerate() {
            let idx = (start + i) as isize - (m as isize - 1);
            *b = if idx >= 0 && (idx as usize) < x.len() { x[idx as usize] } else { Cf64::new(0.0, 0.0) };
        }
        fwd.process(&mut buf);
        for (u, v) in buf.iter_mut().zip(&h) {
            *u *= v;
        }
        inv.process(&mut buf);
        for i in 0..step {
            let k = start + i;
            if k >= center && k - center < x.len() {
                out[k - center] = buf[m - 1 + i];
            }
        }
        start += step;
    }
    out
}

/// Smallest length ≥ `n` whose only prime factors are 2, 3 and 5.
fn fast_len(n: usize) -> usize {
    let mut best = n.next_power_of_two();
    let mut p5 = 1;
    while p5 < best {
        let mut p35 = p5;
        while p35 < best {
            let mut m = p35;
            while m < n {
                m *= 2;
            }
            best = best.min(m);
            p35 *= 3;
        }
        p5 *= 5;
    }
    best
}

/// Keeps only spectral content within `center ± half_width` Hz (brick-wall
/// mask over the record, zero-padded to a fast transform length).
pub fn band_mask(x: &[Cf64], rate: f64, center: f64, half_width: f64) -> Vec<Cf64> {
    band_masks(x, rate, &[(center, half_width)]).pop().unwrap()
}

/// [`band_mask`] for several bands sharing one forward transform.
pub fn band_masks(x: &[Cf64], rate: f64, bands: &[(f64, f64)]) -> Vec<Vec<Cf64>> {
    let n = fast_len(x.len());
    let mut planner = FftPlanner::new();
    let mut spec = vec![Cf64::new(0.0, 0.0); n];
    spec[..x.len()].copy_from_slice(x);
    planner.plan_fft_forward(n).process(&mut spec);
    let inv = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;
    bands
        .iter()
        .map(|&(center, half_width)| {
            let mut buf: Vec<Cf64> = spec
                .iter()
                .enumerate()
                .map(|(k, &v)| {
                    let f = bin_frequency(k, n, rate);
                    // distance on the circle of width `rate`
                    let mut d = (f - center).rem_euclid(rate);
                    if d > rate / 2.0 {
                        d -= rate;
                    }
                    if d.abs() > half_width {
                        Cf64::new(0.0, 0.0)
                    } else {
                        v * scale
                    }
                })
                .collect();
            inv.process(&mut buf);
            buf.truncate(x.len());
            buf
        })
        .collect()
}
