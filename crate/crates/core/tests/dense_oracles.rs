//! Spectral fast paths checked against explicit dense linear algebra.

mod common;

use common::*;
use nalgebra::DMatrix;
use scfde_core::equalizer::{decision_sinr, equalize, fde_coefficients, residual_noise_stats};
use scfde_core::{
    circulant_apply, cp_transmit, frequency_response, Complex64, EqualizerKind, TrialStream,
};

/// (ν, L, stream) for `count` random configurations with ν ≤ 8, L ≤ 64.
fn configs(seed: u64, count: u64) -> impl Iterator<Item = (usize, usize, TrialStream)> {
    (0..count).map(move |t| {
        let mut s = TrialStream::new(seed, t);
        let memory = s.index(9);
        let block_length = memory + 1 + s.index(64 - memory);
        (memory, block_length, s)
    })
}

#[test]
fn eigenvalues_diagonalize_the_circulant() {
    for (memory, l, mut s) in configs(11, 150) {
        let taps = random_taps(&mut s, memory);
        let fr = frequency_response(&taps, l).unwrap();
        let (dense, off) = dense_eigenvalues(taps.taps(), l);
        let scale = taps.energy().sqrt().max(1.0);
        assert!(
            off < 1e-10 * scale * l as f64,
            "off-diagonal {off} at nu={memory} L={l}"
        );
        assert!(max_abs_diff(fr.lambda(), &dense) < 1e-10 * scale * l as f64);
    }
}

#[test]
fn circulant_apply_matches_dense_product() {
    for (memory, l, mut s) in configs(12, 1000) {
        let taps = random_taps(&mut s, memory);
        let x = random_vector(&mut s, l);
        let fast = circulant_apply(&taps, l, &x).unwrap();
        let dense = dense_circulant(taps.taps(), l) * to_vector(&x);
        let err = max_abs_diff(&fast, dense.as_slice()) / norm(&x);
        assert!(err < 1e-9, "relative error {err} at nu={memory} L={l}");
    }
}

#[test]
fn cyclic_prefix_equals_circulant() {
    for (memory, l, mut s) in configs(13, 200) {
        let taps = random_taps(&mut s, memory);
        let x = random_vector(&mut s, l);
        let snr = 10f64.powf(s.uniform() * 4.0 - 1.0);
        let y = cp_transmit(&taps, &x, snr, None).unwrap();
        let circ: Vec<Complex64> = circulant_apply(&taps, l, &x)
            .unwrap()
            .iter()
            .map(|v| v * snr.sqrt())
            .collect();
        assert!(max_abs_diff(&y, &circ) < 1e-9 * snr.sqrt() * norm(&x));
        assert!(max_abs_diff(&y, &dense_cp(taps.taps(), &x, snr)) < 1e-10 * snr.sqrt() * norm(&x));
    }
}

#[test]
fn mmse_matches_dense_inverse() {
    for (memory, l, mut s) in configs(14, 150) {
        let l = l.min(32);
        let taps = random_taps(&mut s, memory);
        let snr = 10f64.powf(s.uniform() * 4.0 - 1.0);
        let fr = frequency_response(&taps, l).unwrap();
        let h = dense_circulant(taps.taps(), l);
        let w_dense = dense_mmse(&h, snr);

        let coeffs = fde_coefficients(&fr, snr, EqualizerKind::Mmse).unwrap();
        // column j of the FDE operator is its response to the unit vector e_j
        let w_fast = DMatrix::from_fn(l, l, |r, col| {
            let mut e = vec![c(0.0, 0.0); l];
            e[col] = c(1.0, 0.0);
            equalize(&e, &coeffs).unwrap()[r]
        });
        let err = max_abs_diff((&w_fast - &w_dense).as_slice(), &vec![c(0.0, 0.0); l * l]);
        let scale = w_dense.iter().map(|v| v.norm()).fold(1.0, f64::max);
        assert!(
            err < 1e-8 * scale,
            "error {err} at nu={memory} L={l} snr={snr}"
        );
    }
}

#[test]
fn sinr_matches_dense_per_symbol() {
    for (memory, l, mut s) in configs(15, 100) {
        let l = l.min(24);
        let taps = random_taps(&mut s, memory);
        let snr = 10f64.powf(s.uniform() * 3.0);
        let fr = frequency_response(&taps, l).unwrap();
        let h = dense_circulant(taps.taps(), l);

        let mmse = decision_sinr(&fr, snr, EqualizerKind::Mmse).unwrap();
        for g in dense_sinr(&dense_mmse(&h, snr), &h, snr) {
            assert!((g - mmse).abs() <= 1e-8 * mmse.max(1e-12), "{g} vs {mmse}");
        }
        let zf = decision_sinr(&fr, snr, EqualizerKind::Zf).unwrap();
        let hinv = h.clone().try_inverse().unwrap();
        for g in dense_sinr(&hinv, &h, snr) {
            assert!((g - zf).abs() <= 1e-8 * zf, "{g} vs {zf}");
        }
    }
}

#[test]
fn zero_forcing_inverts_noiseless_block() {
    for (memory, l, mut s) in configs(16, 100) {
        let taps = random_taps(&mut s, memory);
        let x = random_vector(&mut s, l);
        let snr = 100.0;
        let fr = frequency_response(&taps, l).unwrap();
        let y = cp_transmit(&taps, &x, snr, None).unwrap();
        let out = equalize(&y, &fde_coefficients(&fr, snr, EqualizerKind::Zf).unwrap()).unwrap();
        let want: Vec<Complex64> = x.iter().map(|v| v * snr.sqrt()).collect();
        let cond = fr.gains().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max_abs_diff(&out, &want) < 1e-9 * snr.sqrt() * norm(&x) / cond.sqrt().min(1.0));
    }
}

#[test]
fn residual_mean_matches_dense() {
    for (memory, l, mut s) in configs(17, 100) {
        let l = l.min(32);
        let taps = random_taps(&mut s, memory);
        let x = random_vector(&mut s, l);
        let snr = 10f64.powf(s.uniform() * 3.0);
        let fr = frequency_response(&taps, l).unwrap();
        let h = dense_circulant(taps.taps(), l);
        let b = dense_mmse(&h, snr) * &h - DMatrix::identity(l, l);
        let want = b * to_vector(&x) * Complex64::from(snr.sqrt());
        let stats = residual_noise_stats(&fr, snr, &x).unwrap();
        assert!(max_abs_diff(&stats.mean, want.as_slice()) < 1e-9 * snr.sqrt() * norm(&x));
    }
}
