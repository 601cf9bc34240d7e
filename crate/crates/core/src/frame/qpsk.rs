use super::layout::{FrameLayout, FRAME_ID_BITS};
use crate::rng::rng_from_seed;
use crate::{Cf64, Error, Result};
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;

/// Gray mapping: bit 0 selects the sign of I, bit 1 the sign of Q.
pub fn gray_map(b0: bool, b1: bool) -> Cf64 {
    let s = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Cf64::new(s(b0), s(b1))
}

/// Quadrant hard decision, inverse of [`gray_map`].
pub fn gray_demap(s: Cf64) -> (bool, bool) {
    (s.re < 0.0, s.im < 0.0)
}

pub fn bits_to_symbols(bits: &[bool]) -> Vec<Cf64> {
    bits.chunks(2)
        .map(|c| gray_map(c[0], c.get(1).copied().unwrap_or(false)))
        .collect()
}

pub fn symbols_to_bits(symbols: &[Cf64]) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|&s| {
            let (a, b) = gray_demap(s);
            [a, b]
        })
        .collect()
}

/// 16-bit ID, LSB first, the whole word repeated `repetition` times.
pub fn encode_frame_id(id: u16, repetition: usize) -> Vec<bool> {
    let word: Vec<bool> = (0..FRAME_ID_BITS).map(|i| (id >> i) & 1 == 1).collect();
    (0..repetition).flat_map(|_| word.iter().copied()).collect()
}

/// Majority vote over the repetitions; `None` on a tied bit.
pub fn decode_frame_id(bits: &[bool], repetition: usize) -> Option<u16> {
    if bits.len() < FRAME_ID_BITS * repetition {
        return None;
    }
    let mut id = 0u16;
    for i in 0..FRAME_ID_BITS {
        let ones = (0..repetition).filter(|r| bits[r * FRAME_ID_BITS + i]).count();
        let zeros = repetition - ones;
        if ones == zeros {
            return None;
        }
        if ones > zeros {
            id |= 1 << i;
        }
    }
    Some(id)
}

/// The QPSK side channel of one frame: the known header, then the coded
/// frame ID, then seeded filler up to the frame length.
#[derive(Debug, Clone, PartialEq)]
pub struct QpskFrame {
    pub header: Vec<Cf64>,
    pub frame_id: u32,
    pub payload_symbols: Vec<Cf64>,
}

impl QpskFrame {
    pub fn new(layout: &FrameLayout, frame_id: u32) -> Result<Self> {
        let id = u16::try_from(frame_id)
            .map_err(|_| Error::invalid(format!("frame id {frame_id} exceeds 16 bits")))?;
        Ok(Self {
            header: header_symbols(layout),
            frame_id,
            payload_symbols: bits_to_symbols(&encode_frame_id(id, layout.id_repetition)),
        })
    }

    /// Full unit-magnitude QPSK stream of `layout.n_symbols()` symbols.
    pub fn stream(&self, layout: &FrameLayout, seed: u64) -> Vec<Cf64> {
        let n = layout.n_symbols();
        let mut out = Vec::with_capacity(n);
        out.extend_from_slice(&self.header);
        out.extend_from_slice(&self.payload_symbols);
        let mut rng = rng_from_seed(seed);
        while out.len() < n {
            out.push(gray_map(rng.random(), rng.random()));
        }
        out.truncate(n);
        out
    }
}

/// Known header shared by transmitter and receiver.
pub fn header_symbols(layout: &FrameLayout) -> Vec<Cf64> {
    let mut rng = rng_from_seed(layout.header_seed);
    (0..layout.n_qpsk_header)
        .map(|_| gray_map(rng.random(), rng.random()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_round_trip_and_adjacency() {
        for b0 in [false, true] {
            for b1 in [false, true] {
                let s = gray_map(b0, b1);
                assert!((s.norm() - 1.0).abs() < 1e-15);
                assert_eq!(gray_demap(s), (b0, b1));
                // a 90° rotation flips exactly one bit
                let r = gray_demap(s * Cf64::new(0.0, 1.0));
                assert_eq!((r.0 != b0) as u8 + (r.1 != b1) as u8, 1);
            }
        }
    }

    #[test]
    fn frame_id_round_trip() {
        let l = FrameLayout::default();
        for id in [0u32, 1, 1234, 65535] {
            let f = QpskFrame::new(&l, id).unwrap();
            let bits = symbols_to_bits(&f.payload_symbols);
            assert_eq!(decode_frame_id(&bits, l.id_repetition), Some(id as u16));
        }
        assert!(QpskFrame::new(&l, 70_000).is_err());
    }

    #[test]
    fn id_survives_minority_errors() {
        let mut bits = encode_frame_id(0xBEEF, 8);
        for r in 0..3 {
            for i in 0..16 {
                bits[r * 16 + i] = !bits[r * 16 + i];
            }
        }
        assert_eq!(decode_frame_id(&bits, 8), Some(0xBEEF));
    }

    #[test]
    fn stream_layout() {
        let l = FrameLayout::default();
        let f = QpskFrame::new(&l, 5).unwrap();
        let s = f.stream(&l, 77);
        assert_eq!(s.len(), l.n_symbols());
        assert_eq!(&s[..l.n_qpsk_header], &f.header[..]);
        assert_eq!(&s[l.n_qpsk_header..l.n_qpsk_header + 64], &f.payload_symbols[..]);
        assert!(s.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        assert_eq!(s, f.stream(&l, 77));
    }
}
