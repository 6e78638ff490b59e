//! Mutual information, outage events and the analytic diversity order of
//! MMSE and ZF SC-FDE. All logarithms are base 2 and rates are in bits per
//! symbol.

use crate::equalizer::{mmse_harmonic_term, zf_noise_enhancement, EqualizerKind};
use crate::error::{invalid, Error, Result};
use crate::spectrum::FrequencyResponse;
use serde::{Deserialize, Serialize};

/// Target rate R in bits per symbol.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RateSpec(f64);

impl RateSpec {
    pub fn new(rate_bits: f64) -> Result<Self> {
        if rate_bits > 0.0 && rate_bits.is_finite() {
            Ok(Self(rate_bits))
        } else {
            Err(invalid(format!(
                "rate must be positive and finite, got {rate_bits}"
            )))
        }
    }

    pub fn bits(self) -> f64 {
        self.0
    }

    /// Bits per symbol as a PSK order exponent, if the rate is a whole number.
    pub fn integer_bits(self) -> Option<u32> {
        (self.0.fract() == 0.0 && self.0 >= 1.0 && self.0 <= 16.0).then_some(self.0 as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    FullDiversity,
    RateLimited,
}

/// Half-open rate interval `(lo, hi]`; `hi == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateInterval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl RateInterval {
    pub fn contains(&self, rate: f64) -> bool {
        rate > self.lo && self.hi.map_or(true, |hi| rate <= hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub d: usize,
    pub regime: Regime,
    pub interval: RateInterval,
}

/// Mutual information of the equalized block in bits per symbol.
///
/// MMSE: `−log₂[(1/L) Σ 1/(SNR|λ_k|²+1)]`; ZF: `log₂(1 + γ_ZF)`.
pub fn mutual_info(fr: &FrequencyResponse, snr: f64, kind: EqualizerKind) -> Result<f64> {
    check_snr(snr)?;
    let gains = fr.gains();
    match kind {
        EqualizerKind::Mmse => Ok(-mmse_harmonic_term(&gains, snr).log2()),
        EqualizerKind::Zf => {
            if let Some(index) = fr.zero_bin() {
                return Err(Error::DegenerateEigenvalue { index });
            }
            Ok((1.0 / zf_noise_enhancement(&gains, snr)).ln_1p() / std::f64::consts::LN_2)
        }
    }
}

/// True when the mutual information falls strictly below the target rate.
pub fn outage_indicator(
    fr: &FrequencyResponse,
    snr: f64,
    rate: RateSpec,
    kind: EqualizerKind,
) -> Result<bool> {
    Ok(mutual_info(fr, snr, kind)? < rate.bits())
}

/// Outage test written without logarithms, on precomputed bin gains:
/// MMSE is in outage iff `(1/L) Σ 1/(1+SNR g_k) > 2^−R`, ZF iff
/// `γ_ZF < 2^R − 1`. This is the form the Monte Carlo loops use.
#[derive(Debug, Clone, Copy)]
pub struct OutageThreshold {
    kind: EqualizerKind,
    threshold: f64,
}

impl OutageThreshold {
    pub fn new(rate: RateSpec, kind: EqualizerKind) -> Self {
        let threshold = match kind {
            EqualizerKind::Mmse => (-rate.bits()).exp2(),
            EqualizerKind::Zf => rate.bits().exp2() - 1.0,
        };
        Self { kind, threshold }
    }

    #[inline]
    pub fn in_outage(&self, gains: &[f64], snr: f64) -> bool {
        self.exceeded_by(Self::statistic(self.kind, gains, snr))
    }

    /// The rate-independent part of the test: the harmonic term for MMSE,
    /// γ_ZF for ZF. Lets several rates share one pass over the gains.
    #[inline]
    pub fn statistic(kind: EqualizerKind, gains: &[f64], snr: f64) -> f64 {
        match kind {
            EqualizerKind::Mmse => mmse_harmonic_term(gains, snr),
            EqualizerKind::Zf => 1.0 / zf_noise_enhancement(gains, snr),
        }
    }

    /// Outage decision for a value returned by [`Self::statistic`].
    #[inline]
    pub fn exceeded_by(&self, statistic: f64) -> bool {
        match self.kind {
            EqualizerKind::Mmse => statistic > self.threshold,
            EqualizerKind::Zf => statistic < self.threshold,
        }
    }

    pub fn kind(&self) -> EqualizerKind {
        self.kind
    }
}

/// Full partition of (0, ∞) into the rate intervals of constant MMSE outage
/// diversity, ordered by increasing rate:
/// d = ν+1 on (0, log₂(L/ν)], d = i on (log₂(L/i), log₂(L/(i−1))] for
/// i = ν … 2, and d = 1 on (log₂ L, ∞).
pub fn rate_intervals(memory: usize, block_length: usize) -> Result<Vec<(usize, RateInterval)>> {
    if memory == 0 {
        return Err(invalid("rate intervals need channel memory nu >= 1"));
    }
    check_block(memory, block_length)?;
    let l = block_length as f64;
    let mut out = Vec::with_capacity(memory + 1);
    out.push((
        memory + 1,
        RateInterval {
            lo: 0.0,
            hi: Some((l / memory as f64).log2()),
        },
    ));
    for i in (2..=memory).rev() {
        out.push((
            i,
            RateInterval {
                lo: (l / i as f64).log2(),
                hi: Some((l / (i - 1) as f64).log2()),
            },
        ));
    }
    out.push((
        1,
        RateInterval {
            lo: l.log2(),
            hi: None,
        },
    ));
    Ok(out)
}

/// Analytic diversity order.
///
/// MMSE: ν+1 for R ≤ log₂(L/ν), ⌊2^−R L⌋+1 otherwise. ZF: always 1.
/// With ν = 0 the channel is flat and d = 1 for either receiver.
pub fn analytic_diversity(
    rate: RateSpec,
    memory: usize,
    block_length: usize,
    kind: EqualizerKind,
) -> Result<DiversityReport> {
    check_block(memory, block_length)?;
    let unbounded = RateInterval { lo: 0.0, hi: None };
    if memory == 0 {
        return Ok(DiversityReport {
            d: 1,
            regime: Regime::FullDiversity,
            interval: unbounded,
        });
    }
    let intervals = rate_intervals(memory, block_length)?;
    let regime = if intervals[0].1.contains(rate.bits()) {
        Regime::FullDiversity
    } else {
        Regime::RateLimited
    };
    match kind {
        EqualizerKind::Zf => Ok(DiversityReport {
            d: 1,
            regime,
            interval: unbounded,
        }),
        EqualizerKind::Mmse => {
            let (d, interval) = intervals
                .into_iter()
                .find(|(_, iv)| iv.contains(rate.bits()))
                .expect("rate intervals cover (0, inf)");
            Ok(DiversityReport {
                d: d.min(memory + 1),
                regime,
                interval,
            })
        }
    }
}

/// R + log₂(L′/L): the rate at block length L′ with the same outage exponent.
pub fn rate_shift(rate: RateSpec, from_block: usize, to_block: usize) -> Result<RateSpec> {
    if from_block == 0 || to_block == 0 {
        return Err(invalid("block lengths must be positive"));
    }
    RateSpec::new(rate.bits() + (to_block as f64 / from_block as f64).log2())
}

/// Union bound on the conditional symbol error probability of MMSE SC-FDE,
/// `2^R exp[−((1/L) Σ SNR|λ_k|²/(SNR|λ_k|²+1)²)⁻¹]`, clamped to [0, 1].
pub fn union_bound_pep(fr: &FrequencyResponse, snr: f64, rate: RateSpec) -> Result<f64> {
    check_snr(snr)?;
    let gains = fr.gains();
    let mean = gains
        .iter()
        .map(|g| {
            let d = snr * g + 1.0;
            snr * g / (d * d)
        })
        .sum::<f64>()
        / gains.len() as f64;
    let raw = rate.bits().exp2() * (-1.0 / mean).exp();
    Ok(raw.clamp(0.0, 1.0))
}

fn check_block(memory: usize, block_length: usize) -> Result<()> {
    if block_length < memory + 1 {
        return Err(invalid(format!(
            "block length {block_length} must be at least nu+1 = {}",
            memory + 1
        )));
    }
    Ok(())
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
