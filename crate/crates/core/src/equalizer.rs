//! Per-bin MMSE and ZF frequency-domain equalization, decision-point SINR,
//! residual noise statistics, and the PSK slicer.

use crate::dft::Dft;
use crate::error::{invalid, Error, Result};
use crate::spectrum::FrequencyResponse;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EqualizerKind {
    Mmse,
    Zf,
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EqualizerKind::Mmse => "mmse",
            EqualizerKind::Zf => "zf",
        })
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmse" => Ok(EqualizerKind::Mmse),
            "zf" => Ok(EqualizerKind::Zf),
            other => Err(invalid(format!(
                "unknown equalizer {other:?}, expected mmse or zf"
            ))),
        }
    }
}

/// Unit-energy 2^R-PSK: point m is exp(j 2π m / 2^R).
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    bits: u32,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn psk(bits: u32) -> Result<Self> {
        if !(1..=16).contains(&bits) {
            return Err(invalid(format!(
                "PSK needs 1..=16 bits per symbol, got {bits}"
            )));
        }
        let order = 1usize << bits;
        let points = (0..order)
            .map(|m| {
                Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / order as f64)
            })
            .collect();
        Ok(Self { bits, points })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }

    /// Distance between neighbouring points, 2 sin(π/M).
    pub fn min_distance(&self) -> f64 {
        2.0 * (std::f64::consts::PI / self.order() as f64).sin()
    }

    /// Index of the nearest point to `z`; ties go to the lowest index.
    #[inline]
    pub fn nearest(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (m, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = m;
            }
        }
        best
    }
}

/// Per-bin equalizer coefficients.
///
/// MMSE: `w_k = conj(λ_k) / (|λ_k|² + 1/SNR)`, ZF: `w_k = 1/λ_k`.
pub fn fde_coefficients(
    fr: &FrequencyResponse,
    snr: f64,
    kind: EqualizerKind,
) -> Result<Vec<Complex64>> {
    check_snr(snr)?;
    match kind {
        EqualizerKind::Mmse => {
            let inv_snr = 1.0 / snr;
            Ok(fr
                .lambda()
                .iter()
                .map(|l| l.conj() / (l.norm_sqr() + inv_snr))
                .collect())
        }
        EqualizerKind::Zf => {
            if let Some(index) = fr.zero_bin() {
                return Err(Error::DegenerateEigenvalue { index });
            }
            Ok(fr.lambda().iter().map(|l| l.inv()).collect())
        }
    }
}

/// ỹ = IDFT(coeffs ⊙ DFT(y)).
pub fn equalize(y: &[Complex64], coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let dft = Dft::new(y.len());
    let mut out = y.to_vec();
    equalize_in_place(&dft, &mut out, coeffs)?;
    Ok(out)
}

/// In-place variant of [`equalize`] reusing a planned transform.
pub fn equalize_in_place(dft: &Dft, buf: &mut [Complex64], coeffs: &[Complex64]) -> Result<()> {
    if coeffs.len() != buf.len() {
        return Err(Error::DimensionMismatch {
            expected: buf.len(),
            actual: coeffs.len(),
        });
    }
    if dft.len() != buf.len() {
        return Err(Error::DimensionMismatch {
            expected: dft.len(),
            actual: buf.len(),
        });
    }
    dft.forward(buf);
    for (v, w) in buf.iter_mut().zip(coeffs) {
        *v *= w;
    }
    dft.inverse(buf);
    Ok(())
}

/// (1/L) Σ 1/(1 + SNR·g_k) over bin gains g_k = |λ_k|².
#[inline]
pub fn mmse_harmonic_term(gains: &[f64], snr: f64) -> f64 {
    gains.iter().map(|g| 1.0 / (1.0 + snr * g)).sum::<f64>() / gains.len() as f64
}

/// (1/L) Σ 1/(SNR·g_k); infinite when any gain is zero.
#[inline]
pub fn zf_noise_enhancement(gains: &[f64], snr: f64) -> f64 {
    gains.iter().map(|g| 1.0 / (snr * g)).sum::<f64>() / gains.len() as f64
}

/// Unbiased decision-point SINR, identical for every symbol position of the block.
///
/// MMSE: `[(1/L) Σ 1/(1+SNR|λ_k|²)]⁻¹ − 1`; ZF: `[(1/L) Σ 1/(SNR|λ_k|²)]⁻¹`.
pub fn decision_sinr(fr: &FrequencyResponse, snr: f64, kind: EqualizerKind) -> Result<f64> {
    check_snr(snr)?;
    let gains = fr.gains();
    match kind {
        EqualizerKind::Mmse => Ok(1.0 / mmse_harmonic_term(&gains, snr) - 1.0),
        EqualizerKind::Zf => {
            if let Some(index) = fr.zero_bin() {
                return Err(Error::DegenerateEigenvalue { index });
            }
            Ok(1.0 / zf_noise_enhancement(&gains, snr))
        }
    }
}

/// Moments of the MMSE residual ñ = ỹ − √SNR·x for a fixed channel and block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualNoiseStats {
    /// Deterministic residual-ISI term √SNR (W H_eq − I) x.
    pub mean: Vec<Complex64>,
    /// Diagonal of the residual covariance averaged over unit-energy symbols,
    /// (1/L) Σ SNR/(SNR|λ_k|² + 1), the same for every position.
    pub diag_cov: Vec<f64>,
    /// Ensemble mean-square bias (1/L) Σ SNR/(SNR|λ_k|² + 1)².
    pub bias_power: f64,
    /// Noise variance around the mean, (1/L) Σ SNR²|λ_k|²/(SNR|λ_k|² + 1)².
    pub variance: f64,
}

pub fn residual_noise_stats(
    fr: &FrequencyResponse,
    snr: f64,
    x: &[Complex64],
) -> Result<ResidualNoiseStats> {
    check_snr(snr)?;
    let block_length = fr.block_length();
    if x.len() != block_length {
        return Err(Error::DimensionMismatch {
            expected: block_length,
            actual: x.len(),
        });
    }
    let coeffs = fde_coefficients(fr, snr, EqualizerKind::Mmse)?;
    let residual: Vec<Complex64> = coeffs
        .iter()
        .zip(fr.lambda())
        .map(|(w, l)| w * l - Complex64::new(1.0, 0.0))
        .collect();
    let mut mean = x.to_vec();
    equalize_in_place(&Dft::new(block_length), &mut mean, &residual)?;
    let amplitude = snr.sqrt();
    for m in mean.iter_mut() {
        *m *= amplitude;
    }

    let n = block_length as f64;
    let (mut cov, mut bias, mut var) = (0.0, 0.0, 0.0);
    for g in fr.lambda().iter().map(|l| l.norm_sqr()) {
        let d = snr * g + 1.0;
        cov += snr / d;
        bias += snr / (d * d);
        var += snr * snr * g / (d * d);
    }
    Ok(ResidualNoiseStats {
        mean,
        diag_cov: vec![cov / n; block_length],
        bias_power: bias / n,
        variance: var / n,
    })
}

/// Hard decisions: nearest constellation point to ŷ(ℓ)/√SNR.
pub fn slicer(y_hat: &[Complex64], snr: f64, constellation: &Constellation) -> Vec<usize> {
    let scale = 1.0 / snr.sqrt();
    y_hat
        .iter()
        .map(|&y| constellation.nearest(y * scale))
        .collect()
}

fn check_snr(snr: f64) -> Result<()> {
    if snr > 0.0 && snr.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "SNR must be positive and finite, got {snr}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(len: usize) -> FrequencyResponse {
        FrequencyResponse::from_eigenvalues(vec![Complex64::new(1.0, 0.0); len], 0).unwrap()
    }

    #[test]
    fn flat_coefficients() {
        let w = fde_coefficients(&flat(4), 1.0, EqualizerKind::Mmse).unwrap();
        assert!(w
            .iter()
            .all(|w| (w - Complex64::new(0.5, 0.0)).norm() < 1e-15));
        let w = fde_coefficients(&flat(4), 1.0, EqualizerKind::Zf).unwrap();
        assert!(w
            .iter()
            .all(|w| (w - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn zf_rejects_zero_bin() {
        let fr = FrequencyResponse::from_eigenvalues(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
            1,
        )
        .unwrap();
        assert_eq!(
            fde_coefficients(&fr, 1.0, EqualizerKind::Zf).unwrap_err(),
            Error::DegenerateEigenvalue { index: 1 }
        );
        assert!(decision_sinr(&fr, 1.0, EqualizerKind::Zf).is_err());
        // MMSE stays well defined and positive
        assert!(decision_sinr(&fr, 1.0, EqualizerKind::Mmse).unwrap() > 0.0);
    }

    #[test]
    fn identity_filter() {
        let y: Vec<Complex64> = (0..6)
            .map(|i| Complex64::new(i as f64, -(i as f64) / 2.0))
            .collect();
        let out = equalize(&y, &[Complex64::new(1.0, 0.0); 6]).unwrap();
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(matches!(
            equalize(&y, &[Complex64::new(1.0, 0.0); 5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flat_sinr() {
        let s = 7.5;
        assert!((decision_sinr(&flat(5), s, EqualizerKind::Mmse).unwrap() - s).abs() < 1e-12);
        assert!((decision_sinr(&flat(5), s, EqualizerKind::Zf).unwrap() - s).abs() < 1e-12);
        let fr = FrequencyResponse::from_eigenvalues(
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            1,
        )
        .unwrap();
        assert!((decision_sinr(&fr, 3.0, EqualizerKind::Zf).unwrap() - 3.0).abs() < 1e-12);
        assert!((decision_sinr(&fr, 3.0, EqualizerKind::Mmse).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn flat_residual_stats() {
        let s = 4.0;
        let x: Vec<Complex64> = (0..4)
            .map(|m| Complex64::from_polar(1.0, m as f64))
            .collect();
        let st = residual_noise_stats(&flat(4), s, &x).unwrap();
        let k = -s.sqrt() / (1.0 + s);
        for (m, xi) in st.mean.iter().zip(&x) {
            assert!((m - xi * k).norm() < 1e-12);
        }
        assert!((st.variance - s * s / ((s + 1.0) * (s + 1.0))).abs() < 1e-12);
        assert!((st.variance - (st.diag_cov[0] - st.bias_power)).abs() < 1e-12);

        let big = residual_noise_stats(&flat(4), 1e12, &x).unwrap();
        assert!((big.variance - 1.0).abs() < 1e-9);
    }

    #[test]
    fn psk_points() {
        for bits in 1..=4 {
            let c = Constellation::psk(bits).unwrap();
            assert_eq!(c.order(), 1 << bits);
            for (i, p) in c.points().iter().enumerate() {
                assert!((p.norm() - 1.0).abs() < 1e-15);
                for q in &c.points()[i + 1..] {
                    assert!((p - q).norm() > 1e-6);
                }
            }
        }
        assert!(Constellation::psk(0).is_err());
    }

    #[test]
    fn slicer_exact_point_and_tie() {
        let c = Constellation::psk(3).unwrap();
        let s: f64 = 25.0;
        assert_eq!(slicer(&[c.point(3) * s.sqrt()], s, &c), vec![3]);
        let qpsk = Constellation::psk(2).unwrap();
        assert_eq!(slicer(&[Complex64::new(0.0, 0.0)], 10.0, &qpsk), vec![0]);
    }

    #[test]
    fn kind_round_trip() {
        for k in [EqualizerKind::Mmse, EqualizerKind::Zf] {
            assert_eq!(k.to_string().parse::<EqualizerKind>().unwrap(), k);
        }
        assert!("dfe".parse::<EqualizerKind>().is_err());
    }
}
