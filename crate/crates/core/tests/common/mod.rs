//! Dense-matrix reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod suites;

use nalgebra::{DMatrix, DVector};
use scfde_core::{ChannelTaps, Complex64, TrialStream};

pub type CMat = DMatrix<Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Explicit L×L circulant with first column [h_0 … h_ν, 0 … 0].
pub fn dense_circulant(taps: &[Complex64], block_length: usize) -> CMat {
    CMat::from_fn(block_length, block_length, |r, col| {
        let i = (r + block_length - col) % block_length;
        taps.get(i).copied().unwrap_or_default()
    })
}

/// Non-unitary DFT matrix F[k, n] = e^{−j2πkn/L}.
pub fn dft_matrix(block_length: usize) -> CMat {
    let l = block_length as f64;
    CMat::from_fn(block_length, block_length, |k, n| {
        Complex64::from_polar(
            1.0,
            -2.0 * std::f64::consts::PI * ((k * n) % block_length) as f64 / l,
        )
    })
}

/// Eigenvalues by brute force: λ_k = (F H F⁻¹)_{kk}, with the off-diagonal
/// magnitude returned alongside.
pub fn dense_eigenvalues(taps: &[Complex64], block_length: usize) -> (Vec<Complex64>, f64) {
    let f = dft_matrix(block_length);
    let finv = f.adjoint() / Complex64::from(block_length as f64);
    let d = &f * dense_circulant(taps, block_length) * finv;
    let mut off: f64 = 0.0;
    for r in 0..block_length {
        for col in 0..block_length {
            if r != col {
                off = off.max(d[(r, col)].norm());
            }
        }
    }
    ((0..block_length).map(|k| d[(k, k)]).collect(), off)
}

/// Linear MMSE estimator of √SNR·x from y = √SNR·H x + n: (HᴴH + I/SNR)⁻¹Hᴴ.
pub fn dense_mmse(h: &CMat, snr: f64) -> CMat {
    let n = h.nrows();
    let gram = h.adjoint() * h + CMat::identity(n, n) * Complex64::from(1.0 / snr);
    gram.try_inverse()
        .expect("regularized Gram matrix is invertible")
        * h.adjoint()
}

/// Unbiased SINR of each output of ỹ = W(√SNR·H x + n) for unit-energy symbols.
pub fn dense_sinr(w: &CMat, h: &CMat, snr: f64) -> Vec<f64> {
    let b = w * h;
    (0..b.nrows())
        .map(|l| {
            let signal = snr * b[(l, l)].norm_sqr();
            let isi: f64 = (0..b.ncols())
                .filter(|&m| m != l)
                .map(|m| b[(l, m)].norm_sqr())
                .sum();
            let noise: f64 = (0..w.ncols()).map(|m| w[(l, m)].norm_sqr()).sum();
            signal / (snr * isi + noise)
        })
        .collect()
}

/// Sample-by-sample cyclic-prefix transmission without noise.
pub fn dense_cp(taps: &[Complex64], x: &[Complex64], snr: f64) -> Vec<Complex64> {
    let nu = taps.len() - 1;
    let l = x.len();
    let tx: Vec<Complex64> = x[l - nu..].iter().chain(x).copied().collect();
    let mut rx = vec![c(0.0, 0.0); tx.len() + nu];
    for (n, s) in tx.iter().enumerate() {
        for (i, h) in taps.iter().enumerate() {
            rx[n + i] += h * s;
        }
    }
    rx[nu..nu + l].iter().map(|v| v * snr.sqrt()).collect()
}

pub fn to_vector(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_column_slice(v)
}

pub fn random_vector(stream: &mut TrialStream, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| stream.complex_gaussian()).collect()
}

pub fn random_taps(stream: &mut TrialStream, memory: usize) -> ChannelTaps {
    scfde_core::draw_channel(memory, stream)
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
