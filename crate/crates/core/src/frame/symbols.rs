use crate::rng::rng_from_seed;
use crate::{Cf64, Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Gaussian-modulated key symbols in shot-noise units: `a = q + jp` with
/// `Var(q) = Var(p) = 2n̄`, hence `E|a|² = 4n̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumSymbols {
    pub values: Vec<Cf64>,
    /// PNU.
    pub mean_photon_number: f64,
    pub seed: u64,
}

impl QuantumSymbols {
    /// Per-quadrature modulation variance in SNU.
    pub fn modulation_variance(&self) -> f64 {
        2.0 * self.mean_photon_number
    }

    /// Nominal `E|a|²`.
    pub fn nominal_energy(&self) -> f64 {
        4.0 * self.mean_photon_number
    }
}

pub fn draw_gaussian_symbols(n: usize, mean_photon_number: f64, seed: u64) -> Result<QuantumSymbols> {
    if n == 0 {
        return Err(Error::invalid("need at least one symbol"));
    }
    if !(mean_photon_number > 0.0 && mean_photon_number.is_finite()) {
        return Err(Error::invalid(format!(
            "mean photon number {mean_photon_number} must be positive"
        )));
    }
    let sigma = (2.0 * mean_photon_number).sqrt();
    let mut rng = rng_from_seed(seed);
    let values = (0..n)
        .map(|_| {
            let q: f64 = rng.sample(StandardNormal);
            let p: f64 = rng.sample(StandardNormal);
            Cf64::new(sigma * q, sigma * p)
        })
        .collect();
    Ok(QuantumSymbols {
        values,
        mean_photon_number,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = draw_gaussian_symbols(10_000, 1.45, 9).unwrap();
        let b = draw_gaussian_symbols(10_000, 1.45, 9).unwrap();
        assert_eq!(a, b);
        let c = draw_gaussian_symbols(10_000, 1.45, 10).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn rejects_bad_photon_number() {
        assert!(draw_gaussian_symbols(10, 0.0, 1).is_err());
        assert!(draw_gaussian_symbols(10, -1.0, 1).is_err());
        assert!(draw_gaussian_symbols(0, 1.0, 1).is_err());
    }

    #[test]
    fn moments_and_normality() {
        let n = 1_000_000;
        let s = draw_gaussian_symbols(n, 1.45, 42).unwrap();
        let target = s.nominal_energy();
        let energy = s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / n as f64;
        assert!((energy / target - 1.0).abs() < 0.01, "{energy} vs {target}");
        let mean = s.values.iter().sum::<Cf64>() / n as f64;
        // 3σ of the sample mean: sqrt(2n̄/n) per quadrature
        let sd_mean = (2.0 * 1.45 / n as f64).sqrt();
        assert!(mean.re.abs() < 3.0 * sd_mean && mean.im.abs() < 3.0 * sd_mean);
        for part in [|v: &Cf64| v.re, |v: &Cf64| v.im] {
            let xs: Vec<f64> = s.values.iter().map(part).collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
            let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n as f64;
            let kurt = m4 / (m2 * m2);
            assert!((kurt - 3.0).abs() < 0.05, "kurtosis {kurt}");
        }
    }
}
