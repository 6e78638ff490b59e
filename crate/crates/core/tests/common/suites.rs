//! Property suites returning a summary on success and a reason on failure,
//! so both the regular tests and the acceptance runner can use them.

use scfde_core::infotheory::OutageThreshold;
use scfde_core::oracles::remark1_independence_check;
use scfde_core::{
    decision_sinr, draw_channel, exponential_orders, frequency_response, mutual_info,
    outage_indicator, ChannelTaps, EqualizerKind, FrequencyResponse, RateSpec, TrialStream,
};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

pub type Outcome = Result<String, String>;

pub fn mmse_dominance() -> Outcome {
    let (mut n, mut violations) = (0u64, 0u64);
    for memory in 1..=3usize {
        for l in [4usize, 8, 16] {
            for snr in [1.0, 10.0, 100.0] {
                for t in 0..3704 {
                    let mut s = TrialStream::new((memory * 100 + l) as u64, t);
                    let fr = frequency_response(&draw_channel(memory, &mut s), l).unwrap();
                    let mmse = decision_sinr(&fr, snr, EqualizerKind::Mmse).unwrap();
                    let zf = decision_sinr(&fr, snr, EqualizerKind::Zf).unwrap();
                    if mmse < zf - 1e-12 {
                        violations += 1;
                    }
                    n += 1;
                }
            }
        }
    }
    match violations {
        0 => Ok(format!("{n} realizations, 0 violations")),
        v => Err(format!("{v} of {n} realizations have MMSE SINR below ZF")),
    }
}

pub fn information_monotone() -> Outcome {
    let mut checked = 0;
    for t in 0..2000u64 {
        let mut s = TrialStream::new(7, t);
        let memory = 1 + s.index(3);
        let fr = frequency_response(&draw_channel(memory, &mut s), 4 + s.index(13)).unwrap();
        for kind in [EqualizerKind::Mmse, EqualizerKind::Zf] {
            let mut prev = f64::NEG_INFINITY;
            for db in (-20..=50).map(|d| d as f64) {
                let i = mutual_info(&fr, 10f64.powf(db / 10.0), kind).unwrap();
                if i.is_nan() || i <= prev {
                    return Err(format!(
                        "{kind} information not increasing at {db} dB, channel {t}"
                    ));
                }
                prev = i;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} grid steps strictly increasing"))
}

pub fn outage_form_equivalence() -> Outcome {
    let mut disagreements = 0;
    let n = 100_000u64;
    for t in 0..n {
        let mut s = TrialStream::new(21, t);
        let memory = 1 + s.index(3);
        let fr = frequency_response(&draw_channel(memory, &mut s), 10).unwrap();
        let snr = 10f64.powf(s.uniform() * 3.0);
        let r = RateSpec::new(0.25 + s.uniform() * 4.0).unwrap();
        for kind in [EqualizerKind::Mmse, EqualizerKind::Zf] {
            let a = outage_indicator(&fr, snr, r, kind).unwrap();
            let b = OutageThreshold::new(r, kind).in_outage(&fr.gains(), snr);
            let near_tie = (mutual_info(&fr, snr, kind).unwrap() - r.bits()).abs() < 1e-12;
            if a != b && !near_tie {
                disagreements += 1;
            }
        }
    }
    match disagreements {
        0 => Ok(format!("{n} realizations x 2 equalizers, 0 disagreements")),
        d => Err(format!("{d} disagreements")),
    }
}

pub fn minimal_block_independence() -> Outcome {
    let corr = remark1_independence_check(1, 100_000, 32).map_err(|e| e.to_string())?;
    if corr < 0.01 {
        Ok(format!("max |corr| = {corr:.4} at 1e5 draws"))
    } else {
        Err(format!("max |corr| = {corr:.4} >= 0.01"))
    }
}

/// Eigenvalues scaled by 1/√(ν+1) so each is CN(0, 1), the normalization
/// under which P[α ≤ a] = exp(−SNR^{−a}) holds exactly.
pub fn unit_variance_spectrum(taps: &ChannelTaps, l: usize) -> FrequencyResponse {
    let fr = frequency_response(taps, l).unwrap();
    let scale = 1.0 / ((taps.memory() + 1) as f64).sqrt();
    let lambda = fr.lambda().iter().map(|v| v * scale).collect();
    FrequencyResponse::from_eigenvalues(lambda, taps.memory()).unwrap()
}

pub fn alpha_cdf_dkw() -> Outcome {
    let n = 100_000u64;
    let snr = 100.0f64;
    let mut alphas: Vec<f64> = (0..n)
        .map(|t| {
            let mut s = TrialStream::new(41, t);
            let fr = unit_variance_spectrum(&draw_channel(2, &mut s), 8);
            exponential_orders(&fr, snr).unwrap().alpha[(t % 8) as usize]
        })
        .collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let eps = ((2.0f64 / 1e-3).ln() / (2.0 * n as f64)).sqrt();
    let mut worst: f64 = 0.0;
    for (i, &a) in alphas.iter().enumerate() {
        let f = (-(snr.powf(-a))).exp();
        worst = worst
            .max((f - i as f64 / n as f64).abs())
            .max((f - (i + 1) as f64 / n as f64).abs());
    }
    if worst < eps {
        Ok(format!("sup |F_n - F| = {worst:.5} < DKW band {eps:.5}"))
    } else {
        Err(format!(
            "sup |F_n - F| = {worst:.5} exceeds DKW band {eps:.5}"
        ))
    }
}

pub fn deep_fade_binomial() -> Outcome {
    let n = 100_000u64;
    let mut summary = Vec::new();
    for (memory, snr) in [(2usize, 10.0f64), (3, 3.0)] {
        let dim = memory + 1;
        let mut hist = vec![0u64; dim + 1];
        for t in 0..n {
            let mut s = TrialStream::new(51, t);
            let fr = unit_variance_spectrum(&draw_channel(memory, &mut s), dim);
            hist[exponential_orders(&fr, snr).unwrap().m_count] += 1;
        }
        let binom = Binomial::new(1.0 - (-1.0 / snr).exp(), dim as u64).unwrap();
        // pool the rare upper cells until each expected count is at least 5
        let (mut observed, mut expected) = (Vec::new(), Vec::new());
        let (mut o_acc, mut e_acc) = (0.0, 0.0);
        for k in (0..=dim).rev() {
            o_acc += hist[k] as f64;
            e_acc += binom.pmf(k as u64) * n as f64;
            if e_acc >= 5.0 {
                observed.push(o_acc);
                expected.push(e_acc);
                (o_acc, e_acc) = (0.0, 0.0);
            }
        }
        *observed.last_mut().unwrap() += o_acc;
        *expected.last_mut().unwrap() += e_acc;
        let chi2: f64 = observed
            .iter()
            .zip(&expected)
            .map(|(o, e)| (o - e).powi(2) / e)
            .sum();
        let p_value = 1.0
            - ChiSquared::new((observed.len() - 1) as f64)
                .unwrap()
                .cdf(chi2);
        if p_value <= 1e-3 {
            return Err(format!(
                "nu={memory}: chi2={chi2:.2}, p={p_value:.2e}, counts {hist:?}"
            ));
        }
        summary.push(format!("nu={memory} p={p_value:.3}"));
    }
    Ok(summary.join(", "))
}
