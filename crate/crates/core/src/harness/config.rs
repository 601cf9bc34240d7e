//! Experiment configuration and its line-oriented text format.
//!
//! Grammar, one entry per line:
//!
//! ```text
//! line    = blank | comment | entry
//! comment = "#" any*
//! entry   = ws* section "." key ws* "=" ws* value ws*
//! ```
//!
//! Sections are `run`, `frame`, `channel`, `ukf`, `security` and `sync`.
//! Keys within a section are listed in [`ExperimentConfig::to_text`], which
//! writes every key in SI units (seconds, PNU). On input, `channel.delay_us`,
//! `channel.skew_ppm`, `channel.fiber_km` (0.2 dB/km) and
//! `channel.excess_noise_mpnu` are accepted as convenience forms. Unknown keys are errors, except that the `result`
//! section written into run summaries is ignored on input. Later lines
//! override earlier ones. Booleans are `true`/`false`; `run.mode` is
//! `shared` or `free`.

use crate::channel::{fiber_transmittance, ChannelConfig};
use crate::frame::FrameLayout;
use crate::params::{SecurityParams, BER_THRESHOLD};
use crate::sync::{ClockMode, ReceiverConfig, UkfConfig};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub layout: FrameLayout,
    /// PNU of the quantum signal at the channel input.
    pub mean_photon_number: f64,
    pub channel: ChannelConfig,
    pub ukf: UkfConfig,
    pub security: SecurityParams,
    pub n_frames: u32,
    pub seed: u64,
    pub mode: ClockMode,
    /// Samples added to the quantum-symbol sampling instant after
    /// synchronization.
    pub forced_delay_error: i64,
    pub output_dir: PathBuf,
    pub ber_threshold: f64,
    /// Fraction of frames deliberately mis-synchronized.
    pub corrupt_fraction: f64,
    /// Symbols by which a corrupted frame's delay is wrong. Negative, since
    /// the record ends one guard interval after the frame.
    pub corrupt_delay_symbols: i64,
    pub skew_compensation: bool,
    pub sync_threshold: f64,
    pub mth_window: usize,
    pub pilot_half_width: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let rx = ReceiverConfig::default();
        Self {
            layout: FrameLayout::default(),
            mean_photon_number: 1.45,
            channel: ChannelConfig::default(),
            ukf: UkfConfig::default(),
            security: SecurityParams::default(),
            n_frames: 100,
            seed: 1,
            mode: ClockMode::FreeRunning,
            forced_delay_error: 0,
            output_dir: PathBuf::from("out"),
            ber_threshold: BER_THRESHOLD,
            corrupt_fraction: 0.0,
            corrupt_delay_symbols: -37,
            skew_compensation: true,
            sync_threshold: rx.sync_threshold,
            mth_window: rx.mth_window,
            pilot_half_width: rx.pilot_half_width,
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {v:?}")),
    }
}

fn parse_num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

pub fn parse_mode(v: &str) -> std::result::Result<ClockMode, String> {
    match v {
        "shared" => Ok(ClockMode::SharedClock),
        "free" => Ok(ClockMode::FreeRunning),
        _ => Err(format!("mode must be shared or free, got {v:?}")),
    }
}

pub fn mode_name(m: ClockMode) -> &'static str {
    match m {
        ClockMode::SharedClock => "shared",
        ClockMode::FreeRunning => "free",
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let (section, name) = key
                .split_once('.')
                .ok_or_else(|| err(format!("key {key:?} lacks a section prefix")))?;
            cfg.set(section, name, value).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn set(&mut self, section: &str, name: &str, v: &str) -> std::result::Result<(), String> {
        let l = &mut self.layout;
        let c = &mut self.channel;
        let u = &mut self.ukf;
        let s = &mut self.security;
        match (section, name) {
            ("run", "frames") => self.n_frames = parse_num(v)?,
            ("run", "seed") => self.seed = parse_num(v)?,
            ("run", "mode") => self.mode = parse_mode(v)?,
            ("run", "forced_delay_error") => self.forced_delay_error = parse_num(v)?,
            ("run", "output_dir") => self.output_dir = PathBuf::from(v),
            ("run", "corrupt_fraction") => self.corrupt_fraction = parse_num(v)?,
            ("run", "corrupt_delay_symbols") => self.corrupt_delay_symbols = parse_num(v)?,
            ("frame", "n_quantum") => l.n_quantum = parse_num(v)?,
            ("frame", "n_reference") => l.n_reference = parse_num(v)?,
            ("frame", "n_qpsk_header") => l.n_qpsk_header = parse_num(v)?,
            ("frame", "symbol_rate") => l.symbol_rate = parse_num(v)?,
            ("frame", "dac_rate") => l.dac_rate = parse_num(v)?,
            ("frame", "f_quantum") => l.f_quantum = parse_num(v)?,
            ("frame", "f_pilot1") => l.f_pilot1 = parse_num(v)?,
            ("frame", "f_pilot2") => l.f_pilot2 = parse_num(v)?,
            ("frame", "f_qpsk") => l.f_qpsk = parse_num(v)?,
            ("frame", "qpsk_power_offset_db") => l.qpsk_power_offset = parse_num(v)?,
            ("frame", "pilot_power_offset_db") => l.pilot_power_offset = parse_num(v)?,
            ("frame", "rolloff") => l.rolloff = parse_num(v)?,
            ("frame", "rrc_span") => l.rrc_span = parse_num(v)?,
            ("frame", "cazac_root") => l.cazac_root = parse_num(v)?,
            ("frame", "header_seed") => l.header_seed = parse_num(v)?,
            ("frame", "id_repetition") => l.id_repetition = parse_num(v)?,
            ("frame", "mean_photon_number") => self.mean_photon_number = parse_num(v)?,
            ("channel", "delay") => c.delay = parse_num(v)?,
            ("channel", "delay_us") => c.delay = parse_num::<f64>(v)? * 1e-6,
            ("channel", "skew") => c.skew = parse_num(v)?,
            ("channel", "skew_ppm") => c.skew = 1.0 + parse_num::<f64>(v)? * 1e-6,
            ("channel", "lo_offset") => c.lo_offset = parse_num(v)?,
            ("channel", "linewidth_sum") => c.linewidth_sum = parse_num(v)?,
            ("channel", "transmittance") => c.transmittance = parse_num(v)?,
            ("channel", "fiber_km") => c.transmittance = fiber_transmittance(parse_num(v)?),
            ("channel", "efficiency") => c.efficiency = parse_num(v)?,
            ("channel", "electronic_noise") => c.electronic_noise = parse_num(v)?,
            ("channel", "excess_noise") => c.excess_noise = parse_num(v)?,
            ("channel", "excess_noise_mpnu") => c.excess_noise = parse_num::<f64>(v)? * 1e-3,
            ("channel", "adc_rate") => c.adc_rate = parse_num(v)?,
            ("channel", "noise") => c.noise_enabled = parse_bool(v)?,
            ("ukf", "process_noise_phase") => u.process_noise_phase = parse_num(v)?,
            ("ukf", "process_noise_freq") => u.process_noise_freq = parse_num(v)?,
            ("ukf", "measurement_noise") => u.measurement_noise = parse_num(v)?,
            ("ukf", "sigma_point_spread") => u.sigma_point_spread = parse_num(v)?,
            ("ukf", "innovation_bound") => u.innovation_bound = parse_num(v)?,
            ("ukf", "initial_freq_variance") => u.initial_freq_variance = parse_num(v)?,
            ("ukf", "auto_measurement_noise") => u.auto_measurement_noise = parse_bool(v)?,
            ("security", "beta") => s.beta = parse_num(v)?,
            ("security", "trusted_receiver") => s.trusted_receiver = parse_bool(v)?,
            ("security", "ber_threshold") => self.ber_threshold = parse_num(v)?,
            ("sync", "skew_compensation") => self.skew_compensation = parse_bool(v)?,
            ("sync", "threshold") => self.sync_threshold = parse_num(v)?,
            ("sync", "mth_window") => self.mth_window = parse_num(v)?,
            ("sync", "pilot_half_width") => self.pilot_half_width = parse_num(v)?,
            ("result", _) => {}
            _ => return Err(format!("unknown key {section}.{name}")),
        }
        Ok(())
    }

    /// Every key, in a form [`ExperimentConfig::parse`] reads back exactly.
    pub fn to_text(&self) -> String {
        let l = &self.layout;
        let c = &self.channel;
        let u = &self.ukf;
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("run.frames", self.n_frames.to_string());
        put("run.seed", self.seed.to_string());
        put("run.mode", mode_name(self.mode).into());
        put("run.forced_delay_error", self.forced_delay_error.to_string());
        put("run.output_dir", self.output_dir.display().to_string());
        put("run.corrupt_fraction", format!("{:?}", self.corrupt_fraction));
        put("run.corrupt_delay_symbols", self.corrupt_delay_symbols.to_string());
        put("frame.n_quantum", l.n_quantum.to_string());
        put("frame.n_reference", l.n_reference.to_string());
        put("frame.n_qpsk_header", l.n_qpsk_header.to_string());
        put("frame.symbol_rate", format!("{:?}", l.symbol_rate));
        put("frame.dac_rate", format!("{:?}", l.dac_rate));
        put("frame.f_quantum", format!("{:?}", l.f_quantum));
        put("frame.f_pilot1", format!("{:?}", l.f_pilot1));
        put("frame.f_pilot2", format!("{:?}", l.f_pilot2));
        put("frame.f_qpsk", format!("{:?}", l.f_qpsk));
        put("frame.qpsk_power_offset_db", format!("{:?}", l.qpsk_power_offset));
        put("frame.pilot_power_offset_db", format!("{:?}", l.pilot_power_offset));
        put("frame.rolloff", format!("{:?}", l.rolloff));
        put("frame.rrc_span", l.rrc_span.to_string());
        put("frame.cazac_root", l.cazac_root.to_string());
        put("frame.header_seed", l.header_seed.to_string());
        put("frame.id_repetition", l.id_repetition.to_string());
        put("frame.mean_photon_number", format!("{:?}", self.mean_photon_number));
        put("channel.delay", format!("{:?}", c.delay));
        put("channel.skew", format!("{:?}", c.skew));
        put("channel.lo_offset", format!("{:?}", c.lo_offset));
        put("channel.linewidth_sum", format!("{:?}", c.linewidth_sum));
        put("channel.transmittance", format!("{:?}", c.transmittance));
        put("channel.efficiency", format!("{:?}", c.efficiency));
        put("channel.electronic_noise", format!("{:?}", c.electronic_noise));
        put("channel.excess_noise", format!("{:?}", c.excess_noise));
        put("channel.adc_rate", format!("{:?}", c.adc_rate));
        put("channel.noise", c.noise_enabled.to_string());
        put("ukf.process_noise_phase", format!("{:?}", u.process_noise_phase));
        put("ukf.process_noise_freq", format!("{:?}", u.process_noise_freq));
        put("ukf.measurement_noise", format!("{:?}", u.measurement_noise));
        put("ukf.sigma_point_spread", format!("{:?}", u.sigma_point_spread));
        put("ukf.innovation_bound", format!("{:?}", u.innovation_bound));
        put("ukf.initial_freq_variance", format!("{:?}", u.initial_freq_variance));
        put("ukf.auto_measurement_noise", u.auto_measurement_noise.to_string());
        put("security.beta", format!("{:?}", self.security.beta));
        put("security.trusted_receiver", self.security.trusted_receiver.to_string());
        put("security.ber_threshold", format!("{:?}", self.ber_threshold));
        put("sync.skew_compensation", self.skew_compensation.to_string());
        put("sync.threshold", format!("{:?}", self.sync_threshold));
        put("sync.mth_window", self.mth_window.to_string());
        put("sync.pilot_half_width", format!("{:?}", self.pilot_half_width));
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        self.channel.validate()?;
        self.ukf.validate()?;
        self.security.validate()?;
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_frames == 0 {
            return bad("run.frames must be at least 1".into());
        }
        if self.n_frames > 1 << 16 {
            return bad("run.frames exceeds the 16-bit frame ID space".into());
        }
        if !(self.mean_photon_number > 0.0 && self.mean_photon_number.is_finite()) {
            return bad(format!("mean photon number {} must be positive", self.mean_photon_number));
        }
        if !(self.ber_threshold > 0.0 && self.ber_threshold < 0.5) {
            return bad(format!("BER threshold {} not in (0, 0.5)", self.ber_threshold));
        }
        if !(0.0..=1.0).contains(&self.corrupt_fraction) {
            return bad(format!("corrupt fraction {} not in [0, 1]", self.corrupt_fraction));
        }
        if self.mth_window < 8 {
            return bad("sync.mth_window must be at least 8".into());
        }
        if !(self.pilot_half_width > 0.0) {
            return bad("sync.pilot_half_width must be positive".into());
        }
        if (self.channel.adc_rate - self.layout.dac_rate).abs() > 0.0 {
            return bad("channel.adc_rate must equal frame.dac_rate".into());
        }
        Ok(())
    }

    pub fn receiver_config(&self) -> ReceiverConfig {
        ReceiverConfig {
            layout: self.layout.clone(),
            ukf: self.ukf.clone(),
            mode: self.mode,
            skew_compensation: self.skew_compensation,
            sync_threshold: self.sync_threshold,
            mth_window: self.mth_window,
            ..ReceiverConfig::default()
        }
    }
}
