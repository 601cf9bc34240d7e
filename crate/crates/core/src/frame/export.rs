//! File formats for transmitter data: the binary waveform dump and the
//! per-symbol truth CSV.

use super::{AliceFrame, FrameLayout};
use crate::signal::ComplexSeries;
use crate::{Cf64, Error, Result};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

pub const WAVEFORM_MAGIC: [u8; 16] = *b"CVQKDWAV\0\0\0\0\0\0\0\0";
pub const WAVEFORM_VERSION: u32 = 1;
const HEADER_LEN: usize = 16 + 4 + 8 + 8;

pub fn write_waveform(path: &Path, x: &ComplexSeries) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_waveform(&mut w, x)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn encode_waveform<W: Write>(w: &mut W, x: &ComplexSeries) -> std::io::Result<()> {
    w.write_all(&WAVEFORM_MAGIC)?;
    w.write_all(&WAVEFORM_VERSION.to_le_bytes())?;
    w.write_all(&x.sample_rate().to_le_bytes())?;
    w.write_all(&(x.len() as u64).to_le_bytes())?;
    for s in x.samples() {
        w.write_all(&(s.re as f32).to_le_bytes())?;
        w.write_all(&(s.im as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<ComplexSeries> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < HEADER_LEN || bytes[..16] != WAVEFORM_MAGIC {
        return Err(bad("missing CVQKDWAV header".into()));
    }
    let version = u32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if version != WAVEFORM_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let rate = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let len = u64::from_le_bytes(bytes[28..36].try_into().unwrap()) as usize;
    let body = &bytes[HEADER_LEN..];
    if body.len() != len * 8 {
        return Err(bad(format!("expected {len} samples, found {} bytes", body.len())));
    }
    let samples = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Cf64::new(re as f64, im as f64)
        })
        .collect();
    ComplexSeries::new(samples, rate).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Reference,
    Key,
    Qpsk,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolKind::Reference => "ref",
            SymbolKind::Key => "key",
            SymbolKind::Qpsk => "qpsk",
        })
    }
}

impl FromStr for SymbolKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ref" => Ok(SymbolKind::Reference),
            "key" => Ok(SymbolKind::Key),
            "qpsk" => Ok(SymbolKind::Qpsk),
            other => Err(format!("unknown symbol kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolRecord {
    pub frame_id: u32,
    pub index: usize,
    pub kind: SymbolKind,
    pub value: Cf64,
}

/// Flattens one frame into truth records: reference, key, then QPSK symbols.
pub fn frame_records(frame: &AliceFrame, layout: &FrameLayout) -> Vec<SymbolRecord> {
    let tag = |kind, vals: Vec<Cf64>| {
        vals.into_iter().enumerate().map(move |(index, value)| SymbolRecord {
            frame_id: frame.frame_id,
            index,
            kind,
            value,
        })
    };
    tag(SymbolKind::Reference, frame.reference())
        .chain(tag(SymbolKind::Key, frame.quantum.values.clone()))
        .chain(tag(SymbolKind::Qpsk, frame.qpsk_stream(layout)))
        .collect()
}

pub fn write_symbols<W: Write>(w: &mut W, records: &[SymbolRecord]) -> std::io::Result<()> {
    writeln!(w, "frame_id,index,kind,real,imag")?;
    for r in records {
        // {:?} on f64 prints the shortest string that parses back exactly
        writeln!(w, "{},{},{},{:?},{:?}", r.frame_id, r.index, r.kind, r.value.re, r.value.im)?;
    }
    Ok(())
}

pub fn write_symbols_file(path: &Path, records: &[SymbolRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_symbols(&mut w, records)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_symbols_file(path: &Path) -> Result<Vec<SymbolRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != "frame_id,index,kind,real,imag" {
                return Err(bad(1, "unexpected header".into()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(bad(i + 1, format!("expected 5 fields, got {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 1, e.to_string()));
        out.push(SymbolRecord {
            frame_id: f[0].parse().map_err(|e: std::num::ParseIntError| bad(i + 1, e.to_string()))?,
            index: f[1].parse().map_err(|e: std::num::ParseIntError| bad(i + 1, e.to_string()))?,
            kind: f[2].parse().map_err(|e| bad(i + 1, e))?,
            value: Cf64::new(num(f[3])?, num(f[4])?),
        });
    }
    Ok(out)
}
