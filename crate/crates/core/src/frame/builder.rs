use super::{
    draw_gaussian_symbols, generate_cazac, symbols_to_bits, CazacSequence, FrameLayout, QpskFrame,
    QuantumSymbols, HETERODYNE_SCALE,
};
use crate::rng::{derive_seed, Stream};
use crate::signal::{design_rrc, oscillator, ComplexSeries};
use crate::{Cf64, Error, Result};

/// Reference symbols at key-symbol power: CAZAC values scaled to `E|a|²`.
pub fn reference_symbols(cazac: &CazacSequence, mean_photon_number: f64) -> Vec<Cf64> {
    let amp = (4.0 * mean_photon_number).sqrt();
    cazac.values.iter().map(|v| v * amp).collect()
}

/// Synthesizes one period of the transmitter waveform at `layout.dac_rate`.
///
/// The quantum stream (reference symbols, then key symbols) and the QPSK
/// stream are RRC-shaped periodically and mixed to `f_quantum` and `f_qpsk`;
/// the two pilots are added at `f_pilot1` and `f_pilot2`. Band powers are set
/// relative to the nominal quantum band power implied by the mean photon
/// number, so a frame of zero-valued symbols still carries the pilots.
/// `seed` drives the QPSK filler symbols.
pub fn build_frame(
    layout: &FrameLayout,
    quantum: &QuantumSymbols,
    reference: &CazacSequence,
    qpsk: Option<&QpskFrame>,
    seed: u64,
) -> Result<ComplexSeries> {
    layout.validate()?;
    if quantum.values.len() != layout.n_quantum {
        return Err(Error::LayoutMismatch(format!(
            "{} key symbols for a layout of {}",
            quantum.values.len(),
            layout.n_quantum
        )));
    }
    if reference.length != layout.n_reference {
        return Err(Error::LayoutMismatch(format!(
            "{} reference symbols for a layout of {}",
            reference.length, layout.n_reference
        )));
    }
    if let Some(q) = qpsk {
        if q.header.len() != layout.n_qpsk_header {
            return Err(Error::LayoutMismatch(format!(
                "QPSK header of {} symbols for a layout of {}",
                q.header.len(),
                layout.n_qpsk_header
            )));
        }
    }
    let sps = layout.samples_per_symbol();
    let fs = layout.dac_rate;
    let rrc = design_rrc(layout.rolloff, layout.rrc_span, sps)?;
    let nbar = quantum.mean_photon_number;

    let mut stream: Vec<Cf64> = reference_symbols(reference, nbar);
    stream.extend_from_slice(&quantum.values);
    stream.iter_mut().for_each(|v| *v *= HETERODYNE_SCALE);
    let mut wave = rrc.shape_periodic(&stream);
    mix(&mut wave, layout.f_quantum / fs);

    // per-sample power of the quantum band for the nominal modulation
    let quantum_power = 2.0 * nbar / sps as f64;

    if let Some(q) = qpsk {
        let amp = (2.0 * nbar * db(layout.qpsk_power_offset)).sqrt();
        let symbols: Vec<Cf64> = q.stream(layout, seed).iter().map(|v| v * amp).collect();
        let mut band = rrc.shape_periodic(&symbols);
        mix(&mut band, layout.f_qpsk / fs);
        for (w, b) in wave.iter_mut().zip(&band) {
            *w += b;
        }
    }

    let pilot_amp = (quantum_power * db(layout.pilot_power_offset)).sqrt();
    let (c1, c2) = (layout.f_pilot1 / fs, layout.f_pilot2 / fs);
    for (n, w) in wave.iter_mut().enumerate() {
        let t = n as f64;
        *w += (oscillator(c1, t) + oscillator(c2, t)) * pilot_amp;
    }
    Ok(ComplexSeries::from_parts(wave, fs))
}

/// Wraps `guard` samples of the frame's tail before it and of its head after
/// it, as a looping waveform generator would emit around one period.
pub fn cyclic_extend(x: &ComplexSeries, guard: usize) -> ComplexSeries {
    let s = x.samples();
    let n = s.len();
    let mut out = Vec::with_capacity(n + 2 * guard);
    out.extend((0..guard).map(|k| s[(n - guard % n + k) % n]));
    out.extend_from_slice(s);
    out.extend((0..guard).map(|k| s[k % n]));
    ComplexSeries::from_parts(out, x.sample_rate())
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn mix(x: &mut [Cf64], cycles: f64) {
    crate::signal::shift_in_place(x, cycles, 0.0);
}

/// Everything Alice knows about one transmitted frame.
#[derive(Debug, Clone)]
pub struct AliceFrame {
    pub frame_id: u32,
    pub quantum: QuantumSymbols,
    pub cazac: CazacSequence,
    pub qpsk: QpskFrame,
    filler_seed: u64,
}

impl AliceFrame {
    /// Draws the frame's random content from streams derived from
    /// `(master_seed, frame_id)`.
    pub fn synthesize(layout: &FrameLayout, mean_photon_number: f64, master_seed: u64, frame_id: u32) -> Result<Self> {
        let fid = frame_id as u64;
        let quantum = draw_gaussian_symbols(
            layout.n_quantum,
            mean_photon_number,
            derive_seed(master_seed, fid, Stream::QuantumSymbols),
        )?;
        Ok(Self {
            frame_id,
            quantum,
            cazac: generate_cazac(layout.n_reference, layout.cazac_root)?,
            qpsk: QpskFrame::new(layout, frame_id)?,
            filler_seed: derive_seed(master_seed, fid, Stream::QpskFiller),
        })
    }

    pub fn waveform(&self, layout: &FrameLayout) -> Result<ComplexSeries> {
        build_frame(layout, &self.quantum, &self.cazac, Some(&self.qpsk), self.filler_seed)
    }

    /// Reference symbols in key-symbol units.
    pub fn reference(&self) -> Vec<Cf64> {
        reference_symbols(&self.cazac, self.quantum.mean_photon_number)
    }

    /// Unit-magnitude QPSK stream.
    pub fn qpsk_stream(&self, layout: &FrameLayout) -> Vec<Cf64> {
        self.qpsk.stream(layout, self.filler_seed)
    }

    pub fn qpsk_bits(&self, layout: &FrameLayout) -> Vec<bool> {
        symbols_to_bits(&self.qpsk_stream(layout))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{estimate_tone, fft};

    fn band_power(x: &ComplexSeries, center: f64, half: f64) -> f64 {
        let y = fft::band_mask(x.samples(), x.sample_rate(), center, half);
        crate::signal::mean_power(&y)
    }

    #[test]
    fn spectral_layout_and_power_offset() {
        let l = FrameLayout::default();
        let a = AliceFrame::synthesize(&l, 1.45, 1, 3).unwrap();
        let w = a.waveform(&l).unwrap();
        assert_eq!(w.len(), l.frame_samples());
        let p1 = estimate_tone(&w, [110e6, 130e6]).unwrap();
        let p2 = estimate_tone(&w, [15e6, 35e6]).unwrap();
        assert!((p1.frequency - 120e6).abs() < 100.0);
        assert!((p2.frequency - 25e6).abs() < 100.0);
        let b = l.half_bandwidth();
        let pq = band_power(&w, 160e6, b);
        let pk = band_power(&w, 80e6, b);
        let ratio_db = 10.0 * (pk / pq).log10();
        assert!((ratio_db - 7.0).abs() < 0.2, "{ratio_db}");
        // band centers: power concentrated around the nominal centers
        let side = band_power(&w, 160e6 + 2.0 * b, b / 2.0);
        assert!(side < 1e-3 * pq);
    }

    #[test]
    fn silent_symbols_leave_two_tones() {
        let l = FrameLayout::default();
        let mut q = draw_gaussian_symbols(l.n_quantum, 1.45, 1).unwrap();
        q.values.iter_mut().for_each(|v| *v = Cf64::new(0.0, 0.0));
        let mut z = generate_cazac(l.n_reference, l.cazac_root).unwrap();
        z.values.iter_mut().for_each(|v| *v = Cf64::new(0.0, 0.0));
        let w = build_frame(&l, &q, &z, None, 0).unwrap();
        let amp = (2.0 * 1.45 / 50.0 * 10.0f64).sqrt();
        for (n, s) in w.samples().iter().enumerate().step_by(997) {
            let t = n as f64;
            let expect = (oscillator(0.12, t) + oscillator(0.025, t)) * amp;
            assert!((s - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_duration() {
        let l = FrameLayout::default();
        let a = AliceFrame::synthesize(&l, 1.45, 9, 0).unwrap();
        let w1 = a.waveform(&l).unwrap();
        let w2 = AliceFrame::synthesize(&l, 1.45, 9, 0).unwrap().waveform(&l).unwrap();
        assert_eq!(w1, w2);
        assert!((w1.duration() - (l.n_reference + l.n_quantum) as f64 / l.symbol_rate).abs() < 1e-12);
    }

    #[test]
    fn quantum_power_tracks_photon_number() {
        let l = FrameLayout::default();
        let b = l.half_bandwidth();
        let p = |nbar: f64| {
            let mut q = draw_gaussian_symbols(l.n_quantum, nbar, 4).unwrap();
            // same draw, rescaled, isolates the n̄ dependence
            let base = draw_gaussian_symbols(l.n_quantum, 1.0, 4).unwrap();
            for (v, u) in q.values.iter_mut().zip(&base.values) {
                *v = u * nbar.sqrt();
            }
            let z = generate_cazac(l.n_reference, 7).unwrap();
            let w = build_frame(&l, &q, &z, None, 0).unwrap();
            band_power(&w, 160e6, b)
        };
        let r = p(2.9) / p(1.45);
        assert!((r - 2.0).abs() < 0.02, "{r}");
    }

    #[test]
    fn cyclic_extension_wraps() {
        let x = ComplexSeries::new((0..10).map(|k| Cf64::new(k as f64, 0.0)).collect(), 1.0).unwrap();
        let y = cyclic_extend(&x, 3);
        let re: Vec<f64> = y.samples().iter().map(|v| v.re).collect();
        assert_eq!(re, [7., 8., 9., 0., 1., 2., 3., 4., 5., 6., 7., 8., 9., 0., 1., 2.]);
    }

    #[test]
    fn layout_mismatch() {
        let l = FrameLayout::default();
        let q = draw_gaussian_symbols(100, 1.0, 1).unwrap();
        let z = generate_cazac(l.n_reference, 7).unwrap();
        assert!(matches!(build_frame(&l, &q, &z, None, 0), Err(Error::LayoutMismatch(_))));
    }
}
