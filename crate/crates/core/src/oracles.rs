//! Numerical checks of the tail-probability lemmas behind the diversity
//! analysis, plus the DFT interpolation identities used in their proofs.
//!
//! The tail events are far too rare for plain Monte Carlo at the SNRs where
//! the asymptotic slopes show up, so the estimators default to importance
//! sampling with [`FadeSampler`]. Plain sampling is kept as a cross-check.

use crate::dft::twiddle;
use crate::error::{invalid, Result};
use crate::montecarlo::{db_to_linear, fit_slope, wilson_interval, CurvePoint, SlopeFit};
use crate::rng::TrialStream;
use crate::spectrum::{
    draw_channel, frequency_response, ChannelTaps, FrequencyResponse, GainKernel,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const CHUNK: u64 = 2048;
const Z95: f64 = 1.959_963_984_540_054;

/// Upper limit on mixture components, C(candidates, ν+1).
pub const MAX_COMPONENTS: usize = 5000;

/// Distance below which an interpolation denominator counts as zero.
const SINGULAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMethod {
    Plain,
    ImportanceSampled,
}

/// Estimated tail probability at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub snr_db: f64,
    pub p_hat: f64,
    pub std_error: f64,
    /// Samples for which the event occurred (before weighting).
    pub hits: u64,
    pub trials: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvePoint for TailPoint {
    fn snr_db(&self) -> f64 {
        self.snr_db
    }
    fn probability(&self) -> f64 {
        self.p_hat
    }
    fn hits(&self) -> u64 {
        self.hits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub points: Vec<TailPoint>,
    /// Fit over every point with at least one hit; `None` if fewer than two.
    pub fit: Option<SlopeFit>,
}

impl TailCurve {
    fn new(points: Vec<TailPoint>) -> Self {
        let fit = fit_slope(&points, 0..points.len()).ok();
        Self { points, fit }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Accum {
    sum_w: f64,
    sum_w2: f64,
    hits: u64,
}

impl Accum {
    fn add(&mut self, w: f64) {
        self.sum_w += w;
        self.sum_w2 += w * w;
        self.hits += 1;
    }

    fn merge(&mut self, o: &Accum) {
        self.sum_w += o.sum_w;
        self.sum_w2 += o.sum_w2;
        self.hits += o.hits;
    }

    fn point(&self, snr_db: f64, trials: u64, method: TailMethod) -> TailPoint {
        let n = trials as f64;
        let p_hat = self.sum_w / n;
        match method {
            TailMethod::Plain => {
                let (lo, hi) = wilson_interval(self.hits, trials);
                TailPoint {
                    snr_db,
                    p_hat,
                    std_error: (p_hat * (1.0 - p_hat) / n).sqrt(),
                    hits: self.hits,
                    trials,
                    ci_low: lo.min(p_hat),
                    ci_high: hi.max(p_hat),
                }
            }
            TailMethod::ImportanceSampled => {
                let var = (self.sum_w2 / n - p_hat * p_hat).max(0.0);
                let se = (var / n).sqrt();
                TailPoint {
                    snr_db,
                    p_hat,
                    std_error: se,
                    hits: self.hits,
                    trials,
                    ci_low: (p_hat - Z95 * se).max(0.0),
                    ci_high: (p_hat + Z95 * se).min(1.0),
                }
            }
        }
    }
}

/// Mixture proposal for vectors h ~ CN(0, I_n) that concentrates on deep fades
/// of linear images λ = V h.
///
/// With probability `p0` a sample comes from the nominal law. Otherwise one of
/// the square matrices V_S is picked uniformly, each coordinate of λ_S = V_S h
/// is drawn from the two-scale mixture ½·CN(0, c/SNR) + ½·CN(0, σ²_wide), and
/// h = V_S⁻¹ λ_S. The returned weight is the exact density ratio p(h)/q(h).
#[derive(Debug, Clone)]
pub struct FadeSampler {
    dim: usize,
    p0: f64,
    small_var: f64,
    wide_var: f64,
    // per component: V and V⁻¹ row-major, ln |det V|²
    forward: Vec<Vec<Complex64>>,
    inverse: Vec<Vec<Complex64>>,
    log_jacobian: Vec<f64>,
}

impl FadeSampler {
    pub const DEFAULT_NOMINAL: f64 = 0.2;
    pub const DEFAULT_SCALE: f64 = 1.0;

    /// Sampler whose components are the (ν+1)-subsets of `freqs`, each giving
    /// the Vandermonde map h ↦ (Σᵢ hᵢ e^{−jωi})_{ω∈S}.
    pub fn for_frequencies(memory: usize, freqs: &[f64], snr: f64) -> Result<Self> {
        let dim = memory + 1;
        if freqs.len() < dim {
            return Err(invalid(format!(
                "need at least {dim} candidate frequencies, got {}",
                freqs.len()
            )));
        }
        let subsets = combinations(freqs.len(), dim);
        if subsets.len() > MAX_COMPONENTS {
            return Err(invalid(format!(
                "{} mixture components exceed the limit of {MAX_COMPONENTS}; use plain sampling",
                subsets.len()
            )));
        }
        let matrices = subsets
            .iter()
            .map(|s| {
                DMatrix::from_fn(dim, dim, |r, c| {
                    Complex64::from_polar(1.0, -freqs[s[r]] * c as f64)
                })
            })
            .collect();
        Self::from_matrices(matrices, dim as f64, snr)
    }

    /// Sampler for n i.i.d. CN(0, 1) variables observed directly.
    pub fn identity(dim: usize, snr: f64) -> Result<Self> {
        Self::from_matrices(vec![DMatrix::identity(dim, dim)], 1.0, snr)
    }

    fn from_matrices(matrices: Vec<DMatrix<Complex64>>, wide_var: f64, snr: f64) -> Result<Self> {
        if !(snr > 0.0 && snr.is_finite()) {
            return Err(invalid(format!(
                "SNR must be positive and finite, got {snr}"
            )));
        }
        let dim = matrices[0].nrows();
        let mut forward = Vec::with_capacity(matrices.len());
        let mut inverse = Vec::with_capacity(matrices.len());
        let mut log_jacobian = Vec::with_capacity(matrices.len());
        for v in matrices {
            let det = v.determinant().norm_sqr();
            let inv = v
                .clone()
                .try_inverse()
                .ok_or_else(|| invalid("singular component matrix"))?;
            log_jacobian.push(det.ln());
            forward.push(v.transpose().as_slice().to_vec());
            inverse.push(inv.transpose().as_slice().to_vec());
        }
        Ok(Self {
            dim,
            p0: Self::DEFAULT_NOMINAL,
            small_var: Self::DEFAULT_SCALE / snr,
            wide_var,
            forward,
            inverse,
            log_jacobian,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.forward.len()
    }

    /// Fills `h` with a proposal draw and returns its importance weight.
    pub fn sample(
        &self,
        stream: &mut TrialStream,
        h: &mut [Complex64],
        scratch: &mut [Complex64],
    ) -> f64 {
        let n = self.dim;
        if stream.uniform() < self.p0 {
            for x in h.iter_mut() {
                *x = stream.complex_gaussian();
            }
        } else {
            let j = stream.index(self.components());
            for l in scratch.iter_mut() {
                let var = if stream.uniform() < 0.5 {
                    self.small_var
                } else {
                    self.wide_var
                };
                *l = stream.complex_gaussian_scaled(var);
            }
            let inv = &self.inverse[j];
            for (r, x) in h.iter_mut().enumerate() {
                *x = inv[r * n..(r + 1) * n]
                    .iter()
                    .zip(scratch.iter())
                    .map(|(a, b)| a * b)
                    .sum();
            }
        }
        self.weight(h)
    }

    /// p(h)/q(h) for the nominal law p = CN(0, I).
    pub fn weight(&self, h: &[Complex64]) -> f64 {
        let n = self.dim;
        let energy: f64 = h.iter().map(|x| x.norm_sqr()).sum();
        let mut ratio = 0.0;
        for (v, lj) in self.forward.iter().zip(&self.log_jacobian) {
            let mut log_q = energy + lj;
            for r in 0..n {
                let lambda: Complex64 = v[r * n..(r + 1) * n]
                    .iter()
                    .zip(h)
                    .map(|(a, b)| a * b)
                    .sum();
                log_q += self.log_coord_density(lambda.norm_sqr());
            }
            ratio += log_q.exp();
        }
        ratio /= self.components() as f64;
        1.0 / (self.p0 + (1.0 - self.p0) * ratio)
    }

    // ln of ½e^{−a/σ_s}/σ_s + ½e^{−a/σ_w}/σ_w, with the 1/π factor dropped.
    fn log_coord_density(&self, a: f64) -> f64 {
        let s = -a / self.small_var - self.small_var.ln();
        let w = -a / self.wide_var - self.wide_var.ln();
        let hi = s.max(w);
        hi + ((s - hi).exp() + (w - hi).exp()).ln() - std::f64::consts::LN_2
    }
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
        if out.len() > MAX_COMPONENTS {
            return out;
        }
    }
}

/// Runs `trials` samples of an event family with `cells` outcomes per sample
/// and returns weighted accumulators, summed chunk by chunk in index order.
fn run_tail<F>(trials: u64, cells: usize, body: F) -> Vec<Accum>
where
    F: Fn(std::ops::Range<u64>, &mut [Accum]) + Sync,
{
    let chunks: Vec<Vec<Accum>> = (0..trials.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Accum::default(); cells];
            body(c * CHUNK..((c + 1) * CHUNK).min(trials), &mut acc);
            acc
        })
        .collect();
    let mut total = vec![Accum::default(); cells];
    for chunk in &chunks {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    total
}

fn check_grid(snr_db_grid: &[f64], trials: u64) -> Result<()> {
    if snr_db_grid.is_empty() || snr_db_grid.iter().any(|s| !s.is_finite()) {
        return Err(invalid("SNR grid must be non-empty and finite"));
    }
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    Ok(())
}

/// P[Σ_{k<n} 1/(1 + SNR·|λ_k|²) > m] for i.i.d. λ_k ~ CN(0, 1), per SNR point.
///
/// The probability decays as SNR^{−(⌊m⌋+1)}.
pub fn lemma1_tail_probability(
    n: usize,
    m: f64,
    snr_db_grid: &[f64],
    trials: u64,
    seed: u64,
    method: TailMethod,
) -> Result<TailCurve> {
    if n == 0 || !(m > 0.0 && m < n as f64) {
        return Err(invalid(format!(
            "tail level m must lie in (0, n) = (0, {n}), got {m}"
        )));
    }
    check_grid(snr_db_grid, trials)?;
    let event = |lam: &[Complex64], snr: f64| {
        lam.iter()
            .map(|l| 1.0 / (1.0 + snr * l.norm_sqr()))
            .sum::<f64>()
            > m
    };
    let points = snr_db_grid
        .iter()
        .enumerate()
        .map(|(p, &db)| {
            let snr = db_to_linear(db);
            let sampler = match method {
                TailMethod::Plain => None,
                TailMethod::ImportanceSampled => Some(FadeSampler::identity(n, snr)?),
            };
            let acc = run_tail(trials, 1, |range, acc| {
                let mut lam = vec![Complex64::new(0.0, 0.0); n];
                let mut scratch = lam.clone();
                for t in range {
                    let mut stream = TrialStream::with_lane(seed, p as u64, t);
                    let w = match &sampler {
                        Some(s) => s.sample(&mut stream, &mut lam, &mut scratch),
                        None => {
                            lam.iter_mut().for_each(|x| *x = stream.complex_gaussian());
                            1.0
                        }
                    };
                    if event(&lam, snr) {
                        acc[0].add(w);
                    }
                }
            });
            Ok(acc[0].point(db, trials, method))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailCurve::new(points))
}

/// Tail curves at two block lengths of the same zero-padded channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopePair {
    pub short: TailCurve,
    pub long: TailCurve,
}

impl SlopePair {
    /// |slope(L) − slope(L′)|, when both fits exist.
    pub fn slope_difference(&self) -> Option<f64> {
        Some((self.short.slope()? - self.long.slope()?).abs())
    }
}

/// P[Σ_{k<L} 1/(1 + SNR·|λ_k|²) > m] at block lengths L and L′, estimated from
/// the same channel draws.
#[allow(clippy::too_many_arguments)]
pub fn lemma2_slope_pair(
    memory: usize,
    block_length: usize,
    other_length: usize,
    m: f64,
    snr_db_grid: &[f64],
    trials: u64,
    seed: u64,
    method: TailMethod,
) -> Result<SlopePair> {
    if !(m > 0.0 && m < (memory + 1) as f64) {
        return Err(invalid(format!(
            "tail level m must lie in (0, nu+1) = (0, {}), got {m}",
            memory + 1
        )));
    }
    check_grid(snr_db_grid, trials)?;
    let kernels = [
        GainKernel::new(memory, block_length)?,
        GainKernel::new(memory, other_length)?,
    ];
    let freqs = union_grid(block_length, other_length);
    let dim = memory + 1;

    let mut short = Vec::with_capacity(snr_db_grid.len());
    let mut long = Vec::with_capacity(snr_db_grid.len());
    for (p, &db) in snr_db_grid.iter().enumerate() {
        let snr = db_to_linear(db);
        let sampler = match method {
            TailMethod::Plain => None,
            TailMethod::ImportanceSampled => {
                Some(FadeSampler::for_frequencies(memory, &freqs, snr)?)
            }
        };
        let acc = run_tail(trials, 2, |range, acc| {
            let mut h = vec![Complex64::new(0.0, 0.0); dim];
            let mut scratch = h.clone();
            let mut gains = [vec![0.0; block_length], vec![0.0; other_length]];
            for t in range {
                let mut stream = TrialStream::with_lane(seed, p as u64, t);
                let w = match &sampler {
                    Some(s) => s.sample(&mut stream, &mut h, &mut scratch),
                    None => {
                        h.copy_from_slice(draw_channel(memory, &mut stream).taps());
                        1.0
                    }
                };
                for (side, (kernel, g)) in kernels.iter().zip(gains.iter_mut()).enumerate() {
                    kernel.gains_into(&h, g);
                    if g.iter().map(|&x| 1.0 / (1.0 + snr * x)).sum::<f64>() > m {
                        acc[side].add(w);
                    }
                }
            }
        });
        short.push(acc[0].point(db, trials, method));
        long.push(acc[1].point(db, trials, method));
    }
    Ok(SlopePair {
        short: TailCurve::new(short),
        long: TailCurve::new(long),
    })
}

// Distinct frequencies 2πk/L ∪ 2πk/L′ in [0, 2π).
fn union_grid(a: usize, b: usize) -> Vec<f64> {
    let mut fracs: Vec<(usize, usize)> = (0..a).map(|k| (k, a)).collect();
    for k in 0..b {
        if !fracs.iter().any(|&(n, d)| n * b == k * d) {
            fracs.push((k, b));
        }
    }
    fracs
        .iter()
        .map(|&(n, d)| 2.0 * PI * n as f64 / d as f64)
        .collect()
}

/// Largest magnitude of the pairwise correlation coefficient
/// |E[λ_k λ_l*]| / √(E|λ_k|² E|λ_l|²) over k ≠ l, from `trials` channel draws.
///
/// Means are known to be zero, so the moments are not centered.
pub fn eigenvalue_correlation(
    memory: usize,
    block_length: usize,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let l = block_length;
    if l < 2 {
        return Ok(0.0);
    }
    let mut cross = vec![Complex64::new(0.0, 0.0); l * l];
    for t in 0..trials {
        let mut stream = TrialStream::new(seed, t);
        let fr = frequency_response(&draw_channel(memory, &mut stream), l)?;
        let lam = fr.lambda();
        for i in 0..l {
            for j in i..l {
                cross[i * l + j] += lam[i] * lam[j].conj();
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..l {
        for j in i + 1..l {
            let c = cross[i * l + j].norm() / (cross[i * l + i].re * cross[j * l + j].re).sqrt();
            worst = worst.max(c);
        }
    }
    Ok(worst)
}

/// [`eigenvalue_correlation`] at the minimal block length L = ν+1, where the
/// eigenvalues are independent. Returns 0 for ν = 0.
pub fn remark1_independence_check(memory: usize, trials: u64, seed: u64) -> Result<f64> {
    eigenvalue_correlation(memory, memory + 1, trials, seed)
}

/// Band-limited interpolation of the L samples λ_k to frequency ω:
/// G(ω) = (1/L) Σᵢ λᵢ (1 − e^{−jLω}) / (1 − e^{−j(ω − 2πi/L)}).
pub fn dft_interpolate(fr: &FrequencyResponse, omega: f64) -> Complex64 {
    let l = fr.block_length();
    let numer = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -(l as f64) * omega);
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, lam) in fr.lambda().iter().enumerate() {
        let denom = Complex64::new(1.0, 0.0)
            - Complex64::from_polar(1.0, -(omega - 2.0 * PI * i as f64 / l as f64));
        if denom.norm() < SINGULAR_EPS {
            return *lam;
        }
        acc += lam * numer / denom;
    }
    acc / l as f64
}

/// Coefficients γ with λ̃_k = Σᵢ γ_{k,i} λᵢ mapping L samples onto the T·L grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationWeights {
    base: usize,
    factor: usize,
    gamma: Vec<Complex64>,
}

impl InterpolationWeights {
    pub fn new(base_length: usize, factor: usize) -> Result<Self> {
        if base_length == 0 || factor == 0 {
            return Err(invalid("base length and factor must be positive"));
        }
        let fine = base_length * factor;
        let mut gamma = vec![Complex64::new(0.0, 0.0); fine * base_length];
        for k in 0..fine {
            let row = &mut gamma[k * base_length..(k + 1) * base_length];
            if k % factor == 0 {
                row[k / factor] = Complex64::new(1.0, 0.0);
                continue;
            }
            // ω = 2πk/(TL): e^{−jLω} = e^{−j2πk/T}
            let numer = Complex64::new(1.0, 0.0) - twiddle(k, factor);
            for (i, g) in row.iter_mut().enumerate() {
                let denom =
                    Complex64::new(1.0, 0.0) - twiddle((k + fine - i * factor) % fine, fine);
                *g = numer / denom / base_length as f64;
            }
        }
        Ok(Self {
            base: base_length,
            factor,
            gamma,
        })
    }

    pub fn base_length(&self) -> usize {
        self.base
    }

    pub fn factor(&self) -> usize {
        self.factor
    }

    pub fn gamma(&self, k: usize, i: usize) -> Complex64 {
        self.gamma[k * self.base + i]
    }

    pub fn apply(&self, lambda: &[Complex64]) -> Result<Vec<Complex64>> {
        if lambda.len() != self.base {
            return Err(crate::Error::DimensionMismatch {
                expected: self.base,
                actual: lambda.len(),
            });
        }
        Ok(self
            .gamma
            .chunks_exact(self.base)
            .map(|row| row.iter().zip(lambda).map(|(g, l)| g * l).sum())
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsampleCheck {
    pub passed: bool,
    pub max_error: f64,
}

/// Verifies that every T-th eigenvalue at T·L equals the eigenvalue at L, and
/// that interpolating the L eigenvalues reproduces the T·L spectrum.
pub fn zero_pad_subsample_check(
    taps: &ChannelTaps,
    base_length: usize,
    factor: usize,
) -> Result<SubsampleCheck> {
    if factor == 0 {
        return Err(invalid("factor must be at least 1"));
    }
    let coarse = frequency_response(taps, base_length)?;
    let fine = frequency_response(taps, base_length * factor)?;
    let mut max_error: f64 = 0.0;
    for (k, lam) in coarse.lambda().iter().enumerate() {
        max_error = max_error.max((fine.lambda()[k * factor] - lam).norm());
    }
    let interp = InterpolationWeights::new(base_length, factor)?.apply(coarse.lambda())?;
    for (a, b) in interp.iter().zip(fine.lambda()) {
        max_error = max_error.max((a - b).norm());
    }
    Ok(SubsampleCheck {
        passed: max_error <= 1e-10,
        max_error,
    })
}
