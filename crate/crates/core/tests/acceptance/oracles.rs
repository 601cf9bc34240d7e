//! Independent reference computations used by the acceptance criteria.

use cvqkd_sync::Cf64;
use nalgebra::{DMatrix, Matrix2};
use std::f64::consts::FRAC_PI_4;

fn g(x: f64) -> f64 {
    if x <= 1.0 + 1e-12 {
        return 0.0;
    }
    let (a, b) = ((x + 1.0) / 2.0, (x - 1.0) / 2.0);
    a * a.log2() - b * b.log2()
}

fn omega(modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

/// Von Neumann entropy of a Gaussian state from its symplectic spectrum.
fn entropy(gamma: &DMatrix<f64>) -> f64 {
    let modes = gamma.nrows() / 2;
    let mut nus: Vec<f64> = (omega(modes) * gamma).complex_eigenvalues().iter().map(|z| z.norm()).collect();
    nus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nus.iter().step_by(2).map(|&nu| g(nu)).sum()
}

fn block(m: &mut DMatrix<f64>, r: usize, c: usize, b: Matrix2<f64>) {
    for i in 0..2 {
        for j in 0..2 {
            m[(2 * r + i, 2 * c + j)] = b[(i, j)];
            m[(2 * c + j, 2 * r + i)] = b[(i, j)];
        }
    }
}

/// Key fraction from explicit covariance matrices: EPR source, lossy noisy
/// line, trusted detector as a beam splitter fed by one arm of a second EPR
/// pair, heterodyne conditioning by Schur complement.
pub fn key_fraction(v_mod: f64, t: f64, eps: f64, eta: f64, v_el: f64, beta: f64) -> f64 {
    let v = v_mod + 1.0;
    let id = Matrix2::identity();
    let z = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let xi = 2.0 * eps / t;
    let vb = t * (v - 1.0) + 1.0 + t * xi;
    let cab = (t * (v * v - 1.0)).sqrt();
    let mut ab = DMatrix::zeros(4, 4);
    block(&mut ab, 0, 0, id * v);
    block(&mut ab, 1, 1, id * vb);
    block(&mut ab, 0, 1, z * cab);
    let s_ab = entropy(&ab);

    let (gamma, n) = if eta < 1.0 {
        let ve = 1.0 + 2.0 * v_el / (1.0 - eta);
        let ce = (ve * ve - 1.0).sqrt();
        let (se, sr) = (eta.sqrt(), (1.0 - eta).sqrt());
        let mut m = DMatrix::zeros(8, 8);
        block(&mut m, 0, 0, id * v);
        block(&mut m, 1, 1, id * (eta * vb + (1.0 - eta) * ve));
        block(&mut m, 2, 2, id * ((1.0 - eta) * vb + eta * ve));
        block(&mut m, 3, 3, id * ve);
        block(&mut m, 0, 1, z * (se * cab));
        block(&mut m, 0, 2, z * (-sr * cab));
        block(&mut m, 1, 2, id * (se * sr * (ve - vb)));
        block(&mut m, 1, 3, z * (sr * ce));
        block(&mut m, 2, 3, z * (se * ce));
        (m, 4)
    } else {
        (ab.clone(), 2)
    };
    let others: Vec<usize> = (0..n).filter(|&k| k != 1).collect();
    let idx = |ms: &[usize]| ms.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect::<Vec<_>>();
    let (xi_idx, b_idx) = (idx(&others), idx(&[1]));
    let gx = gamma.select_rows(&xi_idx).select_columns(&xi_idx);
    let gb = gamma.select_rows(&b_idx).select_columns(&b_idx);
    let sig = gamma.select_rows(&xi_idx).select_columns(&b_idx);
    let inv = (gb.clone() + DMatrix::identity(2, 2)).try_inverse().unwrap();
    let cond = &gx - &sig * inv * sig.transpose();
    let holevo = s_ab - entropy(&cond);

    let vb_meas = (gb[(0, 0)] + 1.0) / 2.0;
    let cond_meas = vb_meas - eta * t * v_mod / 2.0;
    let mutual = (vb_meas / cond_meas).log2();
    (beta * mutual - holevo).max(0.0)
}

/// Sum of squared distances to the nearest point of the axes QPSK
/// constellation of radius `amp` after derotating by `theta`.
fn decision_error(symbols: &[Cf64], theta: f64, amp: f64) -> f64 {
    let r = Cf64::from_polar(1.0, -theta);
    symbols
        .iter()
        .map(|s| {
            let y = s * r;
            let d = if y.re.abs() >= y.im.abs() {
                Cf64::new(amp * y.re.signum(), 0.0)
            } else {
                Cf64::new(0.0, amp * y.im.signum())
            };
            (y - d).norm_sqr()
        })
        .sum()
}

/// Brute-force carrier phase in [−π/4, π/4): the rotation minimizing the
/// hard-decision error, on a 1 mrad grid refined to 1 µrad.
pub fn grid_phase(symbols: &[Cf64], amp: f64) -> f64 {
    let search = |lo: f64, step: f64, n: usize| {
        (0..n)
            .map(|k| lo + k as f64 * step)
            .map(|t| (t, decision_error(symbols, t, amp)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0
    };
    let coarse = search(-FRAC_PI_4, 1e-3, (2.0 * FRAC_PI_4 / 1e-3).ceil() as usize);
    let mid = search(coarse - 1e-3, 1e-5, 200);
    search(mid - 1e-5, 1e-7, 200)
}

/// Brute-force M-th power phase in [−π/M, π/M): the rotation maximizing
/// `Σ Re((x·e^{−jθ})^M)`, on a 1 mrad grid refined to 0.1 µrad.
pub fn grid_mth_phase(symbols: &[Cf64], m: u32) -> f64 {
    let objective = |t: f64| {
        let r = Cf64::from_polar(1.0, -t);
        symbols.iter().map(|s| (s * r).powu(m).re).sum::<f64>()
    };
    let search = |lo: f64, step: f64, n: usize| {
        (0..n)
            .map(|k| lo + k as f64 * step)
            .map(|t| (t, objective(t)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0
    };
    let half = std::f64::consts::PI / m as f64;
    let coarse = search(-half, 1e-3, (2.0 * half / 1e-3).ceil() as usize);
    let mid = search(coarse - 1e-3, 1e-5, 200);
    search(mid - 1e-5, 1e-7, 200)
}

/// Difference of two phases modulo a quarter turn, in [−π/4, π/4).
pub fn quarter_turn_distance(a: f64, b: f64) -> f64 {
    let q = std::f64::consts::FRAC_PI_2;
    (a - b + FRAC_PI_4).rem_euclid(q) - FRAC_PI_4
}
