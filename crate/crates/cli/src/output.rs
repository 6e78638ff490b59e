//! File formats. CSV floats carry 17 significant digits and JSON uses
//! shortest round-trip formatting, so both re-read to identical values.

use anyhow::{Context, Result};
use scfde_core::oracles::TailPoint;
use scfde_core::{EstimatePoint, Regime, SlopeFit, SweepConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// A record that can be written as one CSV row.
pub trait CsvRecord {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub snr_db: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
}

impl From<&EstimatePoint> for CurveRow {
    fn from(p: &EstimatePoint) -> Self {
        Self {
            snr_db: p.snr_db,
            p_hat: p.p_hat,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            trials: p.trials,
        }
    }
}

impl CsvRecord for CurveRow {
    const HEADER: &'static [&'static str] = &["snr_db", "p_hat", "ci_low", "ci_high", "trials"];
    fn fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.snr_db),
            fmt_float(self.p_hat),
            fmt_float(self.ci_low),
            fmt_float(self.ci_high),
            self.trials.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub snr_db: f64,
    pub p_hat: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: u64,
    pub trials: u64,
}

impl From<&TailPoint> for TailRow {
    fn from(p: &TailPoint) -> Self {
        Self {
            snr_db: p.snr_db,
            p_hat: p.p_hat,
            std_error: p.std_error,
            ci_low: p.ci_low,
            ci_high: p.ci_high,
            hits: p.hits,
            trials: p.trials,
        }
    }
}

impl CsvRecord for TailRow {
    const HEADER: &'static [&'static str] = &[
        "snr_db",
        "p_hat",
        "std_error",
        "ci_low",
        "ci_high",
        "hits",
        "trials",
    ];
    fn fields(&self) -> Vec<String> {
        vec![
            fmt_float(self.snr_db),
            fmt_float(self.p_hat),
            fmt_float(self.std_error),
            fmt_float(self.ci_low),
            fmt_float(self.ci_high),
            self.hits.to_string(),
            self.trials.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub slope: Option<f64>,
    pub analytic_d: usize,
    pub regime: Regime,
}

impl CsvRecord for BlockRow {
    const HEADER: &'static [&'static str] = &["block", "slope", "analytic_d", "regime"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.block.to_string(),
            fmt_opt(self.slope),
            self.analytic_d.to_string(),
            regime_name(self.regime).into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub nu: usize,
    pub block: usize,
    pub rate: f64,
    pub d: usize,
    pub regime: Regime,
}

impl CsvRecord for TableRow {
    const HEADER: &'static [&'static str] = &["nu", "block", "rate", "d", "regime"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.nu.to_string(),
            self.block.to_string(),
            fmt_float(self.rate),
            self.d.to_string(),
            regime_name(self.regime).into(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpRow {
    pub nu: usize,
    pub block: usize,
    pub factor: usize,
    pub max_error: f64,
    pub passed: bool,
}

impl CsvRecord for InterpRow {
    const HEADER: &'static [&'static str] = &["nu", "block", "factor", "max_error", "passed"];
    fn fields(&self) -> Vec<String> {
        vec![
            self.nu.to_string(),
            self.block.to_string(),
            self.factor.to_string(),
            fmt_float(self.max_error),
            self.passed.to_string(),
        ]
    }
}

pub fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::FullDiversity => "full_diversity",
        Regime::RateLimited => "rate_limited",
    }
}

/// Wall-clock information, left out in deterministic mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_unix_s: u64,
    pub elapsed_s: f64,
}

/// Summary of one Monte Carlo curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub config: SweepConfig,
    pub points: Vec<EstimatePoint>,
    pub slope_fit: Option<SlopeFit>,
    pub analytic_d: usize,
    pub regime: Regime,
    pub degenerate_redraws: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

pub fn write_csv<R: CsvRecord>(path: &Path, rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(R::HEADER)?;
    for r in rows {
        w.write_record(r.fields())?;
    }
    w.flush()
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn read_csv<R: DeserializeOwned>(path: &Path) -> Result<Vec<R>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
