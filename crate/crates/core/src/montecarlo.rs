//! Monte Carlo estimation of outage probability and symbol error rate over an
//! SNR grid, Wilson confidence intervals, and log-log slope fits.
//!
//! Trial `t` of a sweep always uses `TrialStream::new(master_seed, t)`, at
//! every SNR point. Trials are processed in fixed-size chunks whose integer
//! counts are summed, so results do not depend on the number of workers.

use crate::dft::Dft;
use crate::equalizer::{equalize_in_place, fde_coefficients, Constellation, EqualizerKind};
use crate::error::{invalid, Error, Result};
use crate::infotheory::{OutageThreshold, RateSpec};
use crate::rng::TrialStream;
use crate::spectrum::{
    cp_transmit, draw_channel, frequency_response, ChannelTaps, FrequencyResponse, GainKernel,
};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::Range;

const CHUNK: u64 = 4096;

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Successes required for a point to enter the default fit window.
pub const MIN_FIT_SUCCESSES: u64 = 30;

/// Number of grid points in the default fit window.
pub const DEFAULT_WINDOW_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Outage,
    SymbolError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub memory: usize,
    pub block_length: usize,
    pub rate: f64,
    pub kind: EqualizerKind,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub target: Target,
    /// Skip the channel noise (symbol-error sweeps only).
    #[serde(default)]
    pub noiseless: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_length < self.memory + 1 {
            return Err(invalid("block length must be at least nu+1"));
        }
        RateSpec::new(self.rate)?;
        if self.snr_grid_db.is_empty() {
            return Err(invalid("SNR grid is empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(invalid("SNR grid contains a non-finite value"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("SNR grid must be strictly increasing"));
        }
        if self.trials_per_point == 0 {
            return Err(invalid("trials per point must be at least 1"));
        }
        if self.target == Target::SymbolError && self.psk_bits().is_none() {
            return Err(invalid(format!(
                "symbol-error sweeps need an integer rate >= 1 (PSK order), got {}",
                self.rate
            )));
        }
        Ok(())
    }

    fn psk_bits(&self) -> Option<u32> {
        RateSpec::new(self.rate).ok()?.integer_bits()
    }

    fn snr_linear(&self) -> Vec<f64> {
        self.snr_grid_db
            .iter()
            .map(|&db| db_to_linear(db))
            .collect()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One point of an estimated probability curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatePoint {
    pub snr_db: f64,
    pub p_hat: f64,
    pub trials: u64,
    pub successes: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EstimatePoint {
    pub fn from_counts(snr_db: f64, successes: u64, trials: u64) -> Self {
        let p_hat = successes as f64 / trials as f64;
        let (lo, hi) = wilson_interval(successes, trials);
        Self {
            snr_db,
            p_hat,
            trials,
            successes,
            ci_low: lo.min(p_hat),
            ci_high: hi.max(p_hat),
        }
    }

    /// Binomial standard error sqrt(p(1-p)/n) at the estimate.
    pub fn std_error(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials as f64).sqrt()
    }

    /// Zero-count points are kept in the curve but never enter a fit.
    pub fn is_zero(&self) -> bool {
        self.successes == 0
    }
}

/// Anything that can be placed on a log-log probability curve.
pub trait CurvePoint {
    fn snr_db(&self) -> f64;
    fn probability(&self) -> f64;
    /// Number of sampled events behind the estimate.
    fn hits(&self) -> u64;
}

impl CurvePoint for EstimatePoint {
    fn snr_db(&self) -> f64 {
        self.snr_db
    }
    fn probability(&self) -> f64 {
        self.p_hat
    }
    fn hits(&self) -> u64 {
        self.successes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<EstimatePoint>,
    /// ZF trials whose channel had an exactly zero eigenvalue and was redrawn.
    pub degenerate_redraws: u64,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

/// Outage probability per grid point.
pub fn estimate_outage(config: &SweepConfig) -> Result<SweepResult> {
    let mut out = estimate_outage_rates(config, &[config.rate])?;
    Ok(out.remove(0))
}

/// Outage curves for several rates from the same channel draws.
///
/// Identical to calling [`estimate_outage`] once per rate with the rate
/// substituted into `config`, at the cost of a single pass.
pub fn estimate_outage_rates(config: &SweepConfig, rates: &[f64]) -> Result<Vec<SweepResult>> {
    if config.target != Target::Outage {
        return Err(invalid("estimate_outage needs target = outage"));
    }
    config.validate()?;
    let thresholds = rates
        .iter()
        .map(|&r| Ok(OutageThreshold::new(RateSpec::new(r)?, config.kind)))
        .collect::<Result<Vec<_>>>()?;
    let kernel = GainKernel::new(config.memory, config.block_length)?;
    let snrs = config.snr_linear();
    let cells = rates.len() * snrs.len();

    let (counts, redraws) = run_chunks(config.trials_per_point, cells, |trials, counts| {
        let mut gains = vec![0.0; config.block_length];
        let mut redraws = 0;
        for trial in trials {
            let mut stream = TrialStream::new(config.master_seed, trial);
            loop {
                let taps = draw_channel(config.memory, &mut stream);
                kernel.gains_into(taps.taps(), &mut gains);
                if config.kind == EqualizerKind::Zf && gains.contains(&0.0) {
                    redraws += 1;
                    continue;
                }
                break;
            }
            // Outage is monotone in SNR, so stop at the first point where
            // no rate is in outage.
            for (s, &snr) in snrs.iter().enumerate() {
                let stat = OutageThreshold::statistic(config.kind, &gains, snr);
                let mut any = false;
                for (r, th) in thresholds.iter().enumerate() {
                    if th.exceeded_by(stat) {
                        counts[r * snrs.len() + s] += 1;
                        any = true;
                    }
                }
                if !any {
                    break;
                }
            }
        }
        redraws
    });

    Ok((0..rates.len())
        .map(|r| SweepResult {
            points: config
                .snr_grid_db
                .iter()
                .enumerate()
                .map(|(s, &db)| {
                    EstimatePoint::from_counts(
                        db,
                        counts[r * snrs.len() + s],
                        config.trials_per_point,
                    )
                })
                .collect(),
            degenerate_redraws: redraws,
        })
        .collect())
}

/// Symbol error rate per grid point: errors / (trials · L).
pub fn estimate_ser(config: &SweepConfig) -> Result<SweepResult> {
    if config.target != Target::SymbolError {
        return Err(invalid("estimate_ser needs target = symbol_error"));
    }
    config.validate()?;
    let constellation = Constellation::psk(config.psk_bits().expect("validated"))?;
    let snrs = config.snr_linear();
    let block_length = config.block_length;

    let (counts, redraws) = run_chunks(config.trials_per_point, snrs.len(), |trials, counts| {
        let dft = Dft::new(block_length);
        let mut redraws = 0;
        let mut sent = vec![0usize; block_length];
        let mut x = vec![Complex64::new(0.0, 0.0); block_length];
        for trial in trials {
            let mut stream = TrialStream::new(config.master_seed, trial);
            let (taps, fr) = draw_usable_channel(config, &mut stream, &mut redraws);
            for (idx, xi) in sent.iter_mut().zip(x.iter_mut()) {
                *idx = stream.index(constellation.order());
                *xi = constellation.point(*idx);
            }
            for (s, &snr) in snrs.iter().enumerate() {
                let noise = if config.noiseless {
                    None
                } else {
                    Some(&mut stream)
                };
                let mut y = cp_transmit(&taps, &x, snr, noise).expect("block length validated");
                let coeffs =
                    fde_coefficients(&fr, snr, config.kind).expect("degenerate channels redrawn");
                equalize_in_place(&dft, &mut y, &coeffs).expect("lengths match");
                let scale = 1.0 / snr.sqrt();
                counts[s] += y
                    .iter()
                    .zip(&sent)
                    .filter(|(v, &idx)| constellation.nearest(*v * scale) != idx)
                    .count() as u64;
            }
        }
        redraws
    });

    let symbols = config.trials_per_point * block_length as u64;
    Ok(SweepResult {
        points: config
            .snr_grid_db
            .iter()
            .zip(&counts)
            .map(|(&db, &c)| EstimatePoint::from_counts(db, c, symbols))
            .collect(),
        degenerate_redraws: redraws,
    })
}

fn draw_usable_channel(
    config: &SweepConfig,
    stream: &mut TrialStream,
    redraws: &mut u64,
) -> (ChannelTaps, FrequencyResponse) {
    loop {
        let taps = draw_channel(config.memory, stream);
        let fr = frequency_response(&taps, config.block_length).expect("block length validated");
        if config.kind == EqualizerKind::Zf && fr.zero_bin().is_some() {
            *redraws += 1;
            continue;
        }
        return (taps, fr);
    }
}

/// Splits `0..trials` into fixed chunks, runs `body` on each with a zeroed
/// counter vector of length `cells`, and sums the counters.
pub(crate) fn run_chunks<F>(trials: u64, cells: usize, body: F) -> (Vec<u64>, u64)
where
    F: Fn(Range<u64>, &mut [u64]) -> u64 + Sync,
{
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(trials);
            let mut counts = vec![0u64; cells];
            let extra = body(start..end, &mut counts);
            (counts, extra)
        })
        .reduce(
            || (vec![0u64; cells], 0),
            |(mut a, ea), (b, eb)| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                (a, ea + eb)
            },
        )
}

/// Least-squares fit of log₁₀ p against log₁₀ SNR, slope negated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Empirical diversity order (negated log-log slope).
    pub slope: f64,
    /// log₁₀ p at SNR = 1 (0 dB) on the fitted line.
    pub intercept: f64,
    /// Curve indices that entered the fit.
    pub window: Vec<usize>,
    /// Coefficient of determination.
    pub r_squared: f64,
}

/// Fits the points of `window` that have at least one success.
pub fn fit_slope<P: CurvePoint>(curve: &[P], window: Range<usize>) -> Result<SlopeFit> {
    if window.end > curve.len() || window.start > window.end {
        return Err(invalid(format!(
            "window {window:?} outside curve of {} points",
            curve.len()
        )));
    }
    let used: Vec<usize> = window
        .filter(|&i| curve[i].hits() >= 1 && curve[i].probability() > 0.0)
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable point(s) in the fit window, need 2",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|&i| curve[i].snr_db() / 10.0).collect();
    let ys: Vec<f64> = used
        .iter()
        .map(|&i| curve[i].probability().log10())
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData(
            "all fit points share one SNR".into(),
        ));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(SlopeFit {
        slope: -b,
        intercept: a,
        window: used,
        r_squared,
    })
}

/// Highest-SNR run of up to `max_points` contiguous points that each have at
/// least `min_successes` hits.
pub fn default_window<P: CurvePoint>(
    curve: &[P],
    min_successes: u64,
    max_points: usize,
) -> Option<Range<usize>> {
    let top = curve.iter().rposition(|p| p.hits() >= min_successes)?;
    let mut start = top;
    while start > 0 && top + 1 - start < max_points && curve[start - 1].hits() >= min_successes {
        start -= 1;
    }
    Some(start..top + 1)
}

/// Fit over [`default_window`] with the standard thresholds.
pub fn fit_default<P: CurvePoint>(curve: &[P]) -> Result<SlopeFit> {
    let window =
        default_window(curve, MIN_FIT_SUCCESSES, DEFAULT_WINDOW_POINTS).ok_or_else(|| {
            Error::InsufficientData(format!(
                "no point has {MIN_FIT_SUCCESSES} or more successes"
            ))
        })?;
    fit_slope(curve, window)
}

/// Fit over the last `n` grid points.
pub fn fit_top<P: CurvePoint>(curve: &[P], n: usize) -> Result<SlopeFit> {
    fit_slope(curve, curve.len().saturating_sub(n)..curve.len())
}
