use crate::{Error, Result};

/// Symbol counts, rates and multiplexing frequencies of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLayout {
    pub n_quantum: usize,
    pub n_reference: usize,
    pub n_qpsk_header: usize,
    /// Hz.
    pub symbol_rate: f64,
    /// Hz.
    pub dac_rate: f64,
    pub f_quantum: f64,
    pub f_pilot1: f64,
    pub f_pilot2: f64,
    pub f_qpsk: f64,
    /// QPSK band power above the quantum band, dB.
    pub qpsk_power_offset: f64,
    /// Power of each pilot above the quantum band, dB.
    pub pilot_power_offset: f64,
    pub rolloff: f64,
    /// RRC length in symbols.
    pub rrc_span: usize,
    pub cazac_root: u64,
    /// Seed of the known QPSK header, shared by both ends.
    pub header_seed: u64,
    /// Repetitions of each frame-ID bit.
    pub id_repetition: usize,
}

impl Default for FrameLayout {
    fn default() -> Self {
        Self {
            n_quantum: 10_000,
            n_reference: 2_000,
            n_qpsk_header: 2_000,
            symbol_rate: 20e6,
            dac_rate: 1e9,
            f_quantum: 160e6,
            f_pilot1: 120e6,
            f_pilot2: 25e6,
            f_qpsk: 80e6,
            qpsk_power_offset: 7.0,
            pilot_power_offset: 10.0,
            rolloff: 0.2,
            rrc_span: 20,
            cazac_root: 7,
            header_seed: 0x5EED_0F_C0FFEE,
            id_repetition: 8,
        }
    }
}

/// Bits used to carry the frame ID.
pub const FRAME_ID_BITS: usize = 16;

impl FrameLayout {
    pub fn samples_per_symbol(&self) -> usize {
        (self.dac_rate / self.symbol_rate).round() as usize
    }

    /// Symbols per frame in both the quantum and QPSK streams.
    pub fn n_symbols(&self) -> usize {
        self.n_reference + self.n_quantum
    }

    pub fn frame_samples(&self) -> usize {
        self.n_symbols() * self.samples_per_symbol()
    }

    /// Frame duration in seconds.
    pub fn frame_duration(&self) -> f64 {
        self.n_symbols() as f64 / self.symbol_rate
    }

    /// QPSK symbols carrying the repetition-coded frame ID.
    pub fn id_symbols(&self) -> usize {
        (FRAME_ID_BITS * self.id_repetition).div_ceil(2)
    }

    /// Samples of cyclic extension emitted on each side of a frame.
    pub fn guard_samples(&self) -> usize {
        self.rrc_span * self.samples_per_symbol()
    }

    pub fn pilot_spacing(&self) -> f64 {
        self.f_pilot1 - self.f_pilot2
    }

    /// One-sided occupied bandwidth of a shaped stream, Hz.
    pub fn half_bandwidth(&self) -> f64 {
        self.symbol_rate * (1.0 + self.rolloff) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_quantum == 0 {
            return bad("n_quantum must be positive".into());
        }
        if self.n_reference < 2 || self.n_reference > self.n_quantum {
            return bad(format!(
                "n_reference {} must lie in [2, n_quantum = {}]",
                self.n_reference, self.n_quantum
            ));
        }
        if self.n_qpsk_header < 64 {
            return bad("QPSK header needs at least 64 symbols".into());
        }
        if self.n_qpsk_header + self.id_symbols() > self.n_symbols() {
            return bad("QPSK header and frame ID do not fit in the frame".into());
        }
        if self.id_repetition == 0 {
            return bad("id_repetition must be positive".into());
        }
        if !(self.symbol_rate > 0.0 && self.dac_rate > 0.0) {
            return bad("rates must be positive".into());
        }
        let ratio = self.dac_rate / self.symbol_rate;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio.round() < 2.0 {
            return bad(format!("dac_rate / symbol_rate = {ratio} is not an integer ≥ 2"));
        }
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return bad(format!("roll-off {} outside (0, 1]", self.rolloff));
        }
        if self.rrc_span < 4 || (self.rrc_span * self.samples_per_symbol()) % 2 != 0 {
            return bad("rrc_span must be ≥ 4 with an even tap count".into());
        }
        if self.f_pilot1 <= self.f_pilot2 {
            return bad("f_pilot1 must exceed f_pilot2".into());
        }
        let nyq = self.dac_rate / 2.0;
        let b = self.half_bandwidth();
        // occupied intervals; pilots are points
        let mut spans = [
            ("quantum", self.f_quantum - b, self.f_quantum + b),
            ("qpsk", self.f_qpsk - b, self.f_qpsk + b),
            ("pilot1", self.f_pilot1, self.f_pilot1),
            ("pilot2", self.f_pilot2, self.f_pilot2),
        ];
        for (name, lo, hi) in spans {
            if lo <= 0.0 || hi >= nyq {
                return bad(format!("{name} band [{lo}, {hi}] Hz leaves (0, {nyq})"));
            }
        }
        spans.sort_by(|a, b| a.1.total_cmp(&b.1));
        for w in spans.windows(2) {
            if w[1].1 <= w[0].2 {
                return bad(format!("{} and {} bands overlap", w[0].0, w[1].0));
            }
        }
        // the AWG loops the frame, so every carrier must close on itself
        let dur = self.frame_duration();
        for (name, f) in [
            ("f_quantum", self.f_quantum),
            ("f_qpsk", self.f_qpsk),
            ("f_pilot1", self.f_pilot1),
            ("f_pilot2", self.f_pilot2),
        ] {
            let cycles = f * dur;
            if (cycles - cycles.round()).abs() > 1e-6 {
                return bad(format!("{name} does not complete an integer number of cycles per frame"));
            }
        }
        Ok(())
    }
}
