//! `cvqkd`: batch driver for the synchronization simulator.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 every frame
//! of a run failed.

use clap::{Args, Parser, Subcommand};
use cvqkd_sync::channel::run_calibration;
use cvqkd_sync::harness::{
    emit_plots, load_estimates, parse_mode, run, sweep_delay_error, sweep_skew, write_delay_sweep, write_report,
    write_skew_sweep, Aggregates, ExperimentConfig, DEFAULT_DELAY_OFFSETS,
};
use cvqkd_sync::rng::{derive_seed, Stream};
use cvqkd_sync::sync::ClockMode;
use cvqkd_sync::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Frames in a full-scale run, comparable to a long measurement campaign.
const FULL_SCALE_FRAMES: u32 = 2000;

#[derive(Parser)]
#[command(name = "cvqkd", version, about = "Digital synchronization simulator for CV-QKD receivers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    frames: Option<u32>,
    /// Clock mode: shared or free.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<ClockMode>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the shot-noise calibration and write calibration.txt.
    Calibrate,
    /// Run a seeded batch and write estimates, failures, summary and plot data.
    Run {
        /// Use the full-scale frame count (slow).
        #[arg(long)]
        full_scale: bool,
    },
    /// Excess noise and key fraction against a forced sampling offset.
    SweepDelay {
        /// Offsets in samples; must include 0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        offsets: Option<Vec<i64>>,
    },
    /// QPSK BER against clock skew, with and without compensation.
    SweepSkew {
        /// Skews in ppm from unity.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_value = "0,5,20")]
        ppm: Vec<f64>,
    },
    /// Re-read a run directory, verify its summary and print the aggregates.
    Report,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Format { .. } => 2,
        Error::EmptyReport => 3,
        _ => 1,
    }
}

fn load_config(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(n) = c.frames {
        cfg.n_frames = n;
    }
    if let Some(m) = c.mode {
        cfg.mode = m;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_aggregates(a: &Aggregates) {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    println!(
        "frames {} processed {} accepted {} ({:.1}%)",
        a.frames,
        a.processed,
        a.accepted,
        100.0 * a.fraction_accepted
    );
    println!(
        "excess noise {} ± {} mPNU, transmittance {}, key fraction {} bits/symbol",
        opt(a.mean_excess_mpnu),
        opt(a.std_excess_mpnu),
        opt(a.mean_transmittance),
        opt(a.mean_skf)
    );
}

fn execute(cli: Cli) -> Result<(), Error> {
    if let Command::Report = cli.command {
        let dir = cli.common.out.clone().unwrap_or_else(|| ExperimentConfig::default().output_dir);
        let (_, _, agg) = load_estimates(&dir)?;
        println!("{}: summary matches estimates", dir.display());
        print_aggregates(&agg);
        return Ok(());
    }
    let mut cfg = load_config(&cli.common)?;
    let out = cfg.output_dir.clone();
    match cli.command {
        Command::Calibrate => {
            let seed = derive_seed(cfg.seed, 0, Stream::Calibration);
            let cal = run_calibration(&cfg.channel, &cfg.layout, cfg.mean_photon_number, seed)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let text = format!(
                "electronic_variance = {:?}\nshot_plus_electronic_variance = {:?}\nshot_noise_unit = {:?}\n\
                 electronic_noise_snu = {:?}\nmodulation_variance_snu = {:?}\n",
                cal.electronic_variance,
                cal.shot_plus_electronic_variance,
                cal.shot_noise_unit(),
                cal.electronic_noise_snu(),
                cal.modulation_variance
            );
            let path = out.join("calibration.txt");
            std::fs::write(&path, &text).map_err(|e| Error::Io { path, source: e })?;
            print!("{text}");
        }
        Command::Run { full_scale } => {
            if full_scale {
                cfg.n_frames = FULL_SCALE_FRAMES;
            }
            let report = run(&cfg)?;
            write_report(&report, &out)?;
            for f in &report.failures {
                eprintln!("frame {}: {}", f.frame_id, f.reason);
            }
            print_aggregates(&report.aggregates());
            println!("{:.1} s, results in {}", report.wall_seconds, out.display());
            if report.estimates.is_empty() {
                return Err(Error::EmptyReport);
            }
            emit_plots(&report, &out, None)?;
        }
        Command::SweepDelay { offsets } => {
            let offsets = offsets.unwrap_or_else(|| DEFAULT_DELAY_OFFSETS.to_vec());
            let rows = sweep_delay_error(&cfg, &offsets)?;
            println!("offset  frames  excess[mPNU]  std  transmittance  skf");
            for r in &rows {
                println!(
                    "{:>6}  {:>6}  {:>12.2}  {:>5.2}  {:>13.4}  {:.4}",
                    r.offset, r.frames, r.mean_excess_mpnu, r.std_excess_mpnu, r.mean_transmittance, r.skf
                );
            }
            println!("written {}", write_delay_sweep(&rows, &out)?.display());
        }
        Command::SweepSkew { ppm } => {
            let skews: Vec<f64> = ppm.iter().map(|p| 1.0 + p * 1e-6).collect();
            let rows = sweep_skew(&cfg, &skews)?;
            println!("skew[ppm]  BER on   BER off");
            for (p, r) in ppm.iter().zip(&rows) {
                println!("{p:>9}  {:.5}  {:.5}", r.ber_compensated, r.ber_uncompensated);
            }
            println!("written {}", write_skew_sweep(&rows, &out)?.display());
        }
        Command::Report => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
