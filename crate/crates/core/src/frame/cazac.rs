use crate::{Cf64, Error, Result};
use std::f64::consts::PI;

/// Zadoff-Chu sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CazacSequence {
    pub length: usize,
    pub root: u64,
    pub values: Vec<Cf64>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `x_k = exp(−jπ·u·k·(k + c)/N)` with `c = N mod 2`; the phase numerator is
/// reduced modulo `2N` in integer arithmetic.
pub fn generate_cazac(length: usize, root: u64) -> Result<CazacSequence> {
    if length < 2 {
        return Err(Error::invalid(format!("CAZAC length {length} below 2")));
    }
    let n = length as u64;
    if root == 0 || gcd(root, n) != 1 {
        return Err(Error::invalid(format!("root {root} is not coprime with length {length}")));
    }
    let c = n % 2;
    let modulus = 2 * n as u128;
    let values = (0..n)
        .map(|k| {
            let num = (root as u128 * k as u128 * (k + c) as u128) % modulus;
            Cf64::from_polar(1.0, -PI * num as f64 / n as f64)
        })
        .collect();
    Ok(CazacSequence {
        length,
        root,
        values,
    })
}
