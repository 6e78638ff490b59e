//! Channel realizations and the spectral view of the cyclic-prefix channel.
//!
//! With a cyclic prefix of length ν the block channel is the L×L circulant
//! `H_eq`, whose eigenvalues are the zero-padded L-point DFT of the taps:
//!
//! ```text
//! λ_k = Σ_{i=0}^{ν} h_i · exp(−j 2π i k / L),   k = 0 … L−1
//! ```
//!
//! Indices here are zero-based; bin `k` corresponds to the one-based bin `k+1`
//! in the usual written form.

use crate::dft::{twiddle, Dft};
use crate::error::{invalid, Error, Result};
use crate::rng::TrialStream;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One realization of the ν+1 channel taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelTaps {
    taps: Vec<Complex64>,
}

impl ChannelTaps {
    pub fn new(taps: Vec<Complex64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(invalid("a channel needs at least one tap"));
        }
        Ok(Self { taps })
    }

    /// Channel memory ν (number of taps minus one).
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    /// Total tap power Σ|h_i|².
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|h| h.norm_sqr()).sum()
    }

    fn check_block(&self, block_length: usize) -> Result<()> {
        let required = self.taps.len();
        if block_length < required {
            return Err(Error::BlockTooShort {
                block_length,
                required,
            });
        }
        Ok(())
    }
}

/// Draws ν+1 i.i.d. CN(0,1) taps from `stream`.
pub fn draw_channel(memory: usize, stream: &mut TrialStream) -> ChannelTaps {
    let taps = (0..=memory).map(|_| stream.complex_gaussian()).collect();
    ChannelTaps { taps }
}

/// Eigenvalues of the equivalent circulant channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyResponse {
    lambda: Vec<Complex64>,
    memory: usize,
}

impl FrequencyResponse {
    /// Wraps eigenvalues computed elsewhere (flat channels in tests, for instance).
    pub fn from_eigenvalues(lambda: Vec<Complex64>, memory: usize) -> Result<Self> {
        if lambda.len() < memory + 1 {
            return Err(Error::BlockTooShort {
                block_length: lambda.len(),
                required: memory + 1,
            });
        }
        Ok(Self { lambda, memory })
    }

    pub fn lambda(&self) -> &[Complex64] {
        &self.lambda
    }

    pub fn block_length(&self) -> usize {
        self.lambda.len()
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Per-bin power gains |λ_k|².
    pub fn gains(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l.norm_sqr()).collect()
    }

    /// First bin with |λ_k| == 0, if any.
    pub fn zero_bin(&self) -> Option<usize> {
        self.lambda.iter().position(|l| l.norm_sqr() == 0.0)
    }
}

/// Zero-padded L-point DFT of the taps.
pub fn frequency_response(taps: &ChannelTaps, block_length: usize) -> Result<FrequencyResponse> {
    taps.check_block(block_length)?;
    let lambda = (0..block_length)
        .map(|k| {
            taps.taps
                .iter()
                .enumerate()
                .map(|(i, h)| h * twiddle(i * k, block_length))
                .sum()
        })
        .collect::<Vec<Complex64>>();
    debug_assert!({
        // Parseval: Σ|λ_k|² = L·Σ|h_i|²
        let spectral: f64 = lambda.iter().map(|l| l.norm_sqr()).sum();
        let expected = block_length as f64 * taps.energy();
        (spectral - expected).abs() <= 1e-9 * expected.max(1.0)
    });
    Ok(FrequencyResponse {
        lambda,
        memory: taps.memory(),
    })
}

/// Precomputed twiddles for repeatedly evaluating |λ_k|² of many channels with
/// the same (ν, L). This is the inner loop of the outage estimators.
#[derive(Debug, Clone)]
pub struct GainKernel {
    memory: usize,
    block_length: usize,
    // row-major [k][i]
    twiddles: Vec<Complex64>,
}

impl GainKernel {
    pub fn new(memory: usize, block_length: usize) -> Result<Self> {
        if block_length < memory + 1 {
            return Err(Error::BlockTooShort {
                block_length,
                required: memory + 1,
            });
        }
        let twiddles = (0..block_length)
            .flat_map(|k| (0..=memory).map(move |i| twiddle(i * k, block_length)))
            .collect();
        Ok(Self {
            memory,
            block_length,
            twiddles,
        })
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Writes |λ_k|² for `taps` into `out` (length L).
    #[inline]
    pub fn gains_into(&self, taps: &[Complex64], out: &mut [f64]) {
        debug_assert_eq!(taps.len(), self.memory + 1);
        debug_assert_eq!(out.len(), self.block_length);
        for (row, g) in self
            .twiddles
            .chunks_exact(self.memory + 1)
            .zip(out.iter_mut())
        {
            let lambda: Complex64 = row.iter().zip(taps).map(|(w, h)| w * h).sum();
            *g = lambda.norm_sqr();
        }
    }
}

/// H_eq·x through the spectral route: DFT, multiply by λ, inverse DFT.
pub fn circulant_apply(
    taps: &ChannelTaps,
    block_length: usize,
    x: &[Complex64],
) -> Result<Vec<Complex64>> {
    if x.len() != block_length {
        return Err(Error::DimensionMismatch {
            expected: block_length,
            actual: x.len(),
        });
    }
    let fr = frequency_response(taps, block_length)?;
    let dft = Dft::new(block_length);
    let mut buf = x.to_vec();
    dft.forward(&mut buf);
    for (v, l) in buf.iter_mut().zip(fr.lambda()) {
        *v *= l;
    }
    dft.inverse(&mut buf);
    Ok(buf)
}

/// Transmits one block through the ISI channel with a cyclic prefix.
///
/// The last ν payload symbols are prepended, the extended block is linearly
/// convolved with the taps, the first ν received samples are dropped, the
/// signal is scaled by √SNR and CN(0,1) noise is added per sample. Passing
/// `None` for `noise` gives the noiseless output √SNR·H_eq·x.
pub fn cp_transmit(
    taps: &ChannelTaps,
    x: &[Complex64],
    snr: f64,
    noise: Option<&mut TrialStream>,
) -> Result<Vec<Complex64>> {
    let block_length = x.len();
    taps.check_block(block_length)?;
    let memory = taps.memory();
    let amplitude = snr.sqrt();

    let mut extended = Vec::with_capacity(block_length + memory);
    extended.extend_from_slice(&x[block_length - memory..]);
    extended.extend_from_slice(x);

    let mut y: Vec<Complex64> = (memory..block_length + memory)
        .map(|n| {
            let r: Complex64 = taps
                .taps
                .iter()
                .enumerate()
                .map(|(i, h)| h * extended[n - i])
                .sum();
            r * amplitude
        })
        .collect();

    if let Some(stream) = noise {
        for v in y.iter_mut() {
            *v += stream.complex_gaussian();
        }
    }
    Ok(y)
}

/// Per-bin exponential orders α_k = −log|λ_k|² / log SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialOrders {
    pub alpha: Vec<f64>,
    pub snr: f64,
    /// Number of bins with α_k strictly greater than 1.
    pub m_count: usize,
}

pub fn exponential_orders(fr: &FrequencyResponse, snr: f64) -> Result<ExponentialOrders> {
    if snr.is_nan() || snr <= 1.0 {
        return Err(invalid(format!(
            "exponential orders need SNR > 1, got {snr}"
        )));
    }
    if let Some(index) = fr.zero_bin() {
        return Err(Error::DegenerateEigenvalue { index });
    }
    let log_snr = snr.ln();
    let alpha: Vec<f64> = fr
        .lambda
        .iter()
        .map(|l| -l.norm_sqr().ln() / log_snr)
        .collect();
    let m_count = alpha.iter().filter(|&&a| a > 1.0).count();
    Ok(ExponentialOrders {
        alpha,
        snr,
        m_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_close(a: &[Complex64], b: &[Complex64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).norm() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn impulse_is_flat() {
        let taps = ChannelTaps::new(vec![c(1.0, 0.0)]).unwrap();
        let fr = frequency_response(&taps, 4).unwrap();
        assert_close(fr.lambda(), &[c(1.0, 0.0); 4], 1e-15);
    }

    #[test]
    fn unit_delay_two_bins() {
        let taps = ChannelTaps::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let fr = frequency_response(&taps, 2).unwrap();
        assert_close(fr.lambda(), &[c(1.0, 0.0), c(-1.0, 0.0)], 1e-15);
    }

    #[test]
    fn block_too_short() {
        let taps = ChannelTaps::new(vec![c(1.0, 0.0); 4]).unwrap();
        assert_eq!(
            frequency_response(&taps, 3).unwrap_err(),
            Error::BlockTooShort {
                block_length: 3,
                required: 4
            }
        );
        assert!(matches!(
            cp_transmit(&taps, &[c(1.0, 0.0); 2], 1.0, None),
            Err(Error::BlockTooShort { .. })
        ));
        assert!(GainKernel::new(3, 3).is_err());
    }

    #[test]
    fn circulant_identity_and_shift() {
        let x = vec![c(1.0, 2.0), c(-0.5, 0.25), c(3.0, -1.0)];
        let id = ChannelTaps::new(vec![c(1.0, 0.0)]).unwrap();
        assert_close(&circulant_apply(&id, 3, &x).unwrap(), &x, 1e-14);

        let delay = ChannelTaps::new(vec![c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let (a, b) = (c(0.3, -0.7), c(2.0, 1.0));
        assert_close(
            &circulant_apply(&delay, 2, &[a, b]).unwrap(),
            &[b, a],
            1e-14,
        );

        assert_eq!(
            circulant_apply(&id, 4, &x).unwrap_err(),
            Error::DimensionMismatch {
                expected: 4,
                actual: 3
            }
        );
    }

    #[test]
    fn cp_identity_channel_high_snr() {
        let taps = ChannelTaps::new(vec![c(1.0, 0.0)]).unwrap();
        let x = vec![c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        let snr = 1e12;
        let mut stream = TrialStream::new(3, 0);
        let y = cp_transmit(&taps, &x, snr, Some(&mut stream)).unwrap();
        let scaled: Vec<Complex64> = y.iter().map(|v| v / snr.sqrt()).collect();
        assert_close(&scaled, &x, 1e-5);
    }

    #[test]
    fn kernel_matches_frequency_response() {
        let mut stream = TrialStream::new(11, 5);
        let taps = draw_channel(3, &mut stream);
        let kernel = GainKernel::new(3, 10).unwrap();
        let mut g = vec![0.0; 10];
        kernel.gains_into(taps.taps(), &mut g);
        let fr = frequency_response(&taps, 10).unwrap();
        for (a, b) in g.iter().zip(fr.gains()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_order_examples() {
        let snr: f64 = 100.0;
        let flat = FrequencyResponse::from_eigenvalues(vec![c(snr.powf(-0.5), 0.0); 5], 0).unwrap();
        let eo = exponential_orders(&flat, snr).unwrap();
        assert!(eo.alpha.iter().all(|a| (a - 1.0).abs() < 1e-12));
        assert_eq!(eo.m_count, 0);

        let mut lambda = vec![c(1.0, 0.0); 4];
        lambda[0] = c(0.0, 1.0 / snr); // |λ|² = SNR⁻²
        let fr = FrequencyResponse::from_eigenvalues(lambda, 0).unwrap();
        let eo = exponential_orders(&fr, snr).unwrap();
        assert!((eo.alpha[0] - 2.0).abs() < 1e-12);
        assert!(eo.alpha[1..].iter().all(|a| a.abs() < 1e-15));
        assert_eq!(eo.m_count, 1);
    }

    #[test]
    fn exponential_order_errors() {
        let fr = FrequencyResponse::from_eigenvalues(vec![c(1.0, 0.0), c(0.0, 0.0)], 1).unwrap();
        assert_eq!(
            exponential_orders(&fr, 10.0).unwrap_err(),
            Error::DegenerateEigenvalue { index: 1 }
        );
        let ok = FrequencyResponse::from_eigenvalues(vec![c(1.0, 0.0)], 0).unwrap();
        assert!(matches!(
            exponential_orders(&ok, 1.0),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn same_stream_same_taps() {
        let a = draw_channel(4, &mut TrialStream::new(99, 1234));
        let b = draw_channel(4, &mut TrialStream::new(99, 1234));
        assert_eq!(a, b);
        assert_eq!(a.taps().len(), 5);
        assert_eq!(a.memory(), 4);
    }
}
