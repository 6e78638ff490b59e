use crate::args::*;
use crate::output::*;
use crate::Failure;
use scfde_core::montecarlo::fit_default;
use scfde_core::oracles::{
    lemma1_tail_probability, lemma2_slope_pair, remark1_independence_check,
    zero_pad_subsample_check, TailCurve, TailMethod,
};
use scfde_core::{
    analytic_diversity, draw_channel, estimate_outage_rates, estimate_ser, rate_intervals,
    DiversityReport, EqualizerKind, RateInterval, RateSpec, SlopeFit, SweepConfig, SweepResult,
    Target, TrialStream,
};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

type Outcome = Result<(), Failure>;

struct Ctx {
    format: Format,
    out: PathBuf,
    deterministic: bool,
    quiet: bool,
    started: Instant,
}

impl Ctx {
    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{stem}.{ext}"))
    }

    fn metadata(&self) -> Option<Metadata> {
        if self.deterministic {
            return None;
        }
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Some(Metadata {
            generated_unix_s: now,
            elapsed_s: self.started.elapsed().as_secs_f64(),
        })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    /// Tabular data as CSV (csv format only) plus the JSON summary.
    fn emit<R: CsvRecord, S: Serialize>(&self, stem: &str, rows: &[R], summary: &S) -> Outcome {
        if self.format == Format::Csv {
            write_csv(&self.path(stem, "csv"), rows)?;
        }
        write_json(&self.path(stem, "json"), summary)?;
        Ok(())
    }
}

pub fn dispatch(cli: Cli) -> Outcome {
    let g = cli.global;
    if let Some(w) = g.workers {
        if w == 0 {
            return Err(Failure::Config("workers must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global();
    }
    fs::create_dir_all(&g.out)
        .map_err(|e| Failure::Config(format!("cannot create {}: {e}", g.out.display())))?;
    let ctx = Ctx {
        format: g.format,
        out: g.out,
        deterministic: g.deterministic,
        quiet: g.quiet,
        started: Instant::now(),
    };
    match cli.command {
        Command::Outage(a) => sweep(&ctx, &a, Target::Outage, "outage"),
        Command::Ser(a) => sweep(&ctx, &a, Target::SymbolError, "ser"),
        Command::Blocklength(a) => blocklength(&ctx, &a),
        Command::Zf(a) => zf(&ctx, &a),
        Command::Oracle(OracleCommand::Lemma1(a)) => lemma1(&ctx, &a),
        Command::Oracle(OracleCommand::Lemma2(a)) => lemma2(&ctx, &a),
        Command::Oracle(OracleCommand::Interp(a)) => interp(&ctx, &a),
        Command::Oracle(OracleCommand::Remark1(a)) => remark1(&ctx, &a),
        Command::Table(a) => table(&ctx, &a),
    }
}

fn check_block(nu: usize, block: usize) -> Outcome {
    if block < nu + 1 {
        return Err(Failure::Config("block length must be at least nu+1".into()));
    }
    Ok(())
}

fn rate_spec(r: f64) -> Result<RateSpec, Failure> {
    RateSpec::new(r).map_err(Failure::from)
}

fn base_config(
    nu: usize,
    block: usize,
    kind: EqualizerKind,
    run: &RunArgs,
    target: Target,
) -> SweepConfig {
    SweepConfig {
        memory: nu,
        block_length: block,
        rate: 1.0,
        kind,
        snr_grid_db: run.snr.0.clone(),
        trials_per_point: run.trials,
        master_seed: run.seed,
        target,
        noiseless: false,
    }
}

fn summarize(ctx: &Ctx, config: SweepConfig, result: SweepResult) -> Result<CurveSummary, Failure> {
    let DiversityReport { d, regime, .. } = analytic_diversity(
        rate_spec(config.rate)?,
        config.memory,
        config.block_length,
        config.kind,
    )?;
    Ok(CurveSummary {
        slope_fit: fit_default(&result.points).ok(),
        points: result.points,
        config,
        analytic_d: d,
        regime,
        degenerate_redraws: result.degenerate_redraws,
        metadata: ctx.metadata(),
    })
}

fn fmt_slope(fit: &Option<SlopeFit>, points: &[scfde_core::EstimatePoint]) -> String {
    match fit {
        Some(f) => {
            let lo = points[f.window[0]].snr_db;
            let hi = points[*f.window.last().unwrap()].snr_db;
            format!("slope {:.3} over {lo}-{hi} dB", f.slope)
        }
        None => "slope n/a (too few successes)".into(),
    }
}

fn emit_curve(ctx: &Ctx, stem: &str, s: &CurveSummary) -> Outcome {
    let rows: Vec<CurveRow> = s.points.iter().map(CurveRow::from).collect();
    ctx.emit(stem, &rows, s)?;
    ctx.say(format!(
        "{stem}: {}, analytic d={} ({})",
        fmt_slope(&s.slope_fit, &s.points),
        s.analytic_d,
        regime_name(s.regime)
    ));
    Ok(())
}

/// Compares every fitted slope with its analytic order.
fn check_slopes<'a>(
    tol: Option<f64>,
    curves: impl IntoIterator<Item = (&'a str, &'a CurveSummary)>,
) -> Outcome {
    let Some(tol) = tol else { return Ok(()) };
    let mut bad = Vec::new();
    for (name, s) in curves {
        match &s.slope_fit {
            Some(f) if (f.slope - s.analytic_d as f64).abs() <= tol => {}
            Some(f) => bad.push(format!(
                "{name}: slope {:.3} vs d={}",
                f.slope, s.analytic_d
            )),
            None => bad.push(format!("{name}: no slope")),
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(bad.join("; ")))
    }
}

fn sweep(ctx: &Ctx, a: &SweepArgs, target: Target, prefix: &str) -> Outcome {
    check_block(a.nu, a.block)?;
    for &r in &a.rates {
        rate_spec(r)?;
    }
    let base = base_config(a.nu, a.block, a.equalizer.into(), &a.run, target);
    let results: Vec<SweepResult> = match target {
        Target::Outage => estimate_outage_rates(&base, &a.rates)?,
        Target::SymbolError => a
            .rates
            .iter()
            .map(|&r| {
                estimate_ser(&SweepConfig {
                    rate: r,
                    ..base.clone()
                })
            })
            .collect::<Result<_, _>>()?,
    };
    let mut curves = Vec::new();
    for (&r, res) in a.rates.iter().zip(results) {
        let stem = format!(
            "{prefix}_{}_nu{}_L{}_R{r}",
            a.equalizer_name(),
            a.nu,
            a.block
        );
        let s = summarize(
            ctx,
            SweepConfig {
                rate: r,
                ..base.clone()
            },
            res,
        )?;
        emit_curve(ctx, &stem, &s)?;
        curves.push((stem, s));
    }
    check_slopes(a.check_tol, curves.iter().map(|(n, s)| (n.as_str(), s)))
}

impl SweepArgs {
    fn equalizer_name(&self) -> &'static str {
        match self.equalizer {
            Equalizer::Mmse => "mmse",
            Equalizer::Zf => "zf",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BlocklengthSummary {
    nu: usize,
    rate: f64,
    rows: Vec<BlockRow>,
}

fn blocklength(ctx: &Ctx, a: &BlocklengthArgs) -> Outcome {
    rate_spec(a.rate)?;
    if a.blocks.is_empty() {
        return Err(Failure::Config("no block lengths given".into()));
    }
    for &l in &a.blocks {
        check_block(a.nu, l)?;
    }
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    for &l in &a.blocks {
        let cfg = SweepConfig {
            rate: a.rate,
            ..base_config(a.nu, l, a.equalizer.into(), &a.run, Target::Outage)
        };
        let res = estimate_outage_rates(&cfg, &[a.rate])?.remove(0);
        let s = summarize(ctx, cfg, res)?;
        let stem = format!("blocklength_nu{}_R{}_L{l}", a.nu, a.rate);
        emit_curve(ctx, &stem, &s)?;
        rows.push(BlockRow {
            block: l,
            slope: s.slope_fit.as_ref().map(|f| f.slope),
            analytic_d: s.analytic_d,
            regime: s.regime,
        });
        curves.push((stem, s));
    }
    let summary = BlocklengthSummary {
        nu: a.nu,
        rate: a.rate,
        rows,
    };
    ctx.emit(
        &format!("blocklength_nu{}_R{}", a.nu, a.rate),
        &summary.rows,
        &summary,
    )?;
    check_slopes(a.check_tol, curves.iter().map(|(n, s)| (n.as_str(), s)))
}

fn zf(ctx: &Ctx, a: &ZfArgs) -> Outcome {
    for &nu in &a.nu {
        check_block(nu, a.block)?;
    }
    for &r in &a.rates {
        rate_spec(r)?;
    }
    let mut curves = Vec::new();
    for &nu in &a.nu {
        let base = base_config(nu, a.block, EqualizerKind::Zf, &a.run, Target::Outage);
        for (&r, res) in a.rates.iter().zip(estimate_outage_rates(&base, &a.rates)?) {
            let stem = format!("zf_nu{nu}_L{}_R{r}", a.block);
            let s = summarize(
                ctx,
                SweepConfig {
                    rate: r,
                    ..base.clone()
                },
                res,
            )?;
            emit_curve(ctx, &stem, &s)?;
            curves.push((stem, s));
        }
    }
    check_slopes(a.check_tol, curves.iter().map(|(n, s)| (n.as_str(), s)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub points: Vec<scfde_core::oracles::TailPoint>,
    pub slope_fit: Option<SlopeFit>,
}

impl From<TailCurve> for TailSummary {
    fn from(c: TailCurve) -> Self {
        Self {
            points: c.points,
            slope_fit: c.fit,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Lemma1Report {
    config: Lemma1Config,
    points: Vec<scfde_core::oracles::TailPoint>,
    slope_fit: Option<SlopeFit>,
    expected_slope: usize,
    tolerance: f64,
    passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Metadata>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Lemma1Config {
    n: usize,
    m: f64,
    snr_grid_db: Vec<f64>,
    trials: u64,
    seed: u64,
    method: TailMethod,
}

fn tail_rows(points: &[scfde_core::oracles::TailPoint]) -> Vec<TailRow> {
    points.iter().map(TailRow::from).collect()
}

fn lemma1(ctx: &Ctx, a: &Lemma1Args) -> Outcome {
    let curve = lemma1_tail_probability(
        a.n,
        a.m,
        &a.run.snr.0,
        a.run.trials,
        a.run.seed,
        a.method.into(),
    )?;
    let expected = a.m.floor() as usize + 1;
    let slope = curve.slope();
    let passed = slope.is_some_and(|s| (s - expected as f64).abs() <= a.tol);
    let report = Lemma1Report {
        config: Lemma1Config {
            n: a.n,
            m: a.m,
            snr_grid_db: a.run.snr.0.clone(),
            trials: a.run.trials,
            seed: a.run.seed,
            method: a.method.into(),
        },
        points: curve.points,
        slope_fit: curve.fit,
        expected_slope: expected,
        tolerance: a.tol,
        passed,
        metadata: ctx.metadata(),
    };
    let stem = format!("lemma1_n{}_m{}", a.n, a.m);
    ctx.emit(&stem, &tail_rows(&report.points), &report)?;
    let shown = slope.map_or("n/a".into(), |s| format!("{s:.3}"));
    ctx.say(format!(
        "{stem}: slope {shown}, expected {expected} +/- {}",
        a.tol
    ));
    if passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "{stem}: slope {shown} not within {} of {expected}",
            a.tol
        )))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Lemma2Report {
    config: Lemma2Config,
    short: TailSummary,
    long: TailSummary,
    slope_difference: Option<f64>,
    tolerance: f64,
    passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Metadata>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Lemma2Config {
    nu: usize,
    block: usize,
    other: usize,
    m: f64,
    snr_grid_db: Vec<f64>,
    trials: u64,
    seed: u64,
    method: TailMethod,
}

fn lemma2(ctx: &Ctx, a: &Lemma2Args) -> Outcome {
    check_block(a.nu, a.block)?;
    check_block(a.nu, a.other)?;
    let pair = lemma2_slope_pair(
        a.nu,
        a.block,
        a.other,
        a.m,
        &a.run.snr.0,
        a.run.trials,
        a.run.seed,
        a.method.into(),
    )?;
    let diff = pair.slope_difference();
    let passed = diff.is_some_and(|d| d <= a.tol);
    let report = Lemma2Report {
        config: Lemma2Config {
            nu: a.nu,
            block: a.block,
            other: a.other,
            m: a.m,
            snr_grid_db: a.run.snr.0.clone(),
            trials: a.run.trials,
            seed: a.run.seed,
            method: a.method.into(),
        },
        short: pair.short.into(),
        long: pair.long.into(),
        slope_difference: diff,
        tolerance: a.tol,
        passed,
        metadata: ctx.metadata(),
    };
    let stem = format!("lemma2_nu{}_L{}_L{}_m{}", a.nu, a.block, a.other, a.m);
    if ctx.format == Format::Csv {
        write_csv(
            &ctx.path(&format!("{stem}_short"), "csv"),
            &tail_rows(&report.short.points),
        )?;
        write_csv(
            &ctx.path(&format!("{stem}_long"), "csv"),
            &tail_rows(&report.long.points),
        )?;
    }
    write_json(&ctx.path(&stem, "json"), &report)?;
    let slope = |s: &TailSummary| {
        s.slope_fit
            .as_ref()
            .map_or("n/a".into(), |f| format!("{:.3}", f.slope))
    };
    let shown = diff.map_or("n/a".into(), |d| format!("{d:.3}"));
    ctx.say(format!(
        "{stem}: slope L={} {}, L={} {}, difference {shown} (tolerance {})",
        a.block,
        slope(&report.short),
        a.other,
        slope(&report.long),
        a.tol
    ));
    if passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "{stem}: slope difference {shown} above {}",
            a.tol
        )))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct InterpReport {
    configs: u64,
    seed: u64,
    max_error: f64,
    failures: usize,
    passed: bool,
}

fn interp(ctx: &Ctx, a: &InterpArgs) -> Outcome {
    if a.max_block < a.max_nu + 1 || a.max_factor == 0 || a.configs == 0 {
        return Err(Failure::Config(
            "need max-block >= max-nu+1, max-factor >= 1 and configs >= 1".into(),
        ));
    }
    let mut rows = Vec::new();
    for t in 0..a.configs {
        let mut s = TrialStream::new(a.seed, t);
        let nu = s.index(a.max_nu + 1);
        let block = nu + 1 + s.index(a.max_block - nu);
        let factor = 1 + s.index(a.max_factor);
        let check = zero_pad_subsample_check(&draw_channel(nu, &mut s), block, factor)?;
        rows.push(InterpRow {
            nu,
            block,
            factor,
            max_error: check.max_error,
            passed: check.passed,
        });
    }
    let failures = rows.iter().filter(|r| !r.passed).count();
    let max_error = rows.iter().map(|r| r.max_error).fold(0.0, f64::max);
    let report = InterpReport {
        configs: a.configs,
        seed: a.seed,
        max_error,
        failures,
        passed: failures == 0,
    };
    ctx.emit("interp", &rows, &report)?;
    ctx.say(format!(
        "interp: {} configs, {failures} failures, max error {max_error:.3e}",
        a.configs
    ));
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "{failures} of {} configurations above 1e-10",
            a.configs
        )))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Remark1Report {
    nu: usize,
    trials: u64,
    seed: u64,
    max_abs_corr: f64,
    tolerance: f64,
    passed: bool,
}

fn remark1(ctx: &Ctx, a: &Remark1Args) -> Outcome {
    let corr = remark1_independence_check(a.nu, a.trials, a.seed)?;
    let tol = a.tol.unwrap_or(3.0 / (a.trials as f64).sqrt());
    let report = Remark1Report {
        nu: a.nu,
        trials: a.trials,
        seed: a.seed,
        max_abs_corr: corr,
        tolerance: tol,
        passed: corr <= tol,
    };
    write_json(&ctx.path(&format!("remark1_nu{}", a.nu), "json"), &report)?;
    ctx.say(format!(
        "remark1 nu={}: max |corr| {corr:.5} (tolerance {tol:.5})",
        a.nu
    ));
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "max |corr| {corr:.5} above {tol:.5}"
        )))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IntervalSet {
    nu: usize,
    block: usize,
    intervals: Vec<(usize, RateInterval)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TableReport {
    rows: Vec<TableRow>,
    intervals: Vec<IntervalSet>,
}

fn table(ctx: &Ctx, a: &TableArgs) -> Outcome {
    let mut rows = Vec::new();
    let mut intervals = Vec::new();
    for &nu in &a.nu {
        for &block in &a.blocks {
            if block < nu + 1 {
                continue;
            }
            if nu >= 1 {
                intervals.push(IntervalSet {
                    nu,
                    block,
                    intervals: rate_intervals(nu, block)?,
                });
            }
            for &rate in &a.rates {
                let rep = analytic_diversity(rate_spec(rate)?, nu, block, EqualizerKind::Mmse)?;
                rows.push(TableRow {
                    nu,
                    block,
                    rate,
                    d: rep.d,
                    regime: rep.regime,
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(Failure::Config(
            "no (nu, block) pair with block length at least nu+1".into(),
        ));
    }
    ctx.say(format!(
        "{:>3} {:>6} {:>6} {:>3}  regime",
        "nu", "block", "rate", "d"
    ));
    for r in &rows {
        ctx.say(format!(
            "{:>3} {:>6} {:>6} {:>3}  {}",
            r.nu,
            r.block,
            r.rate,
            r.d,
            regime_name(r.regime)
        ));
    }
    for set in &intervals {
        let parts: Vec<String> = set
            .intervals
            .iter()
            .map(|(d, iv)| match iv.hi {
                Some(hi) => format!("d={d} on ({:.4}, {hi:.4}]", iv.lo),
                None => format!("d={d} on ({:.4}, inf)", iv.lo),
            })
            .collect();
        ctx.say(format!(
            "nu={} L={}: {}",
            set.nu,
            set.block,
            parts.join(", ")
        ));
    }
    ctx.emit(
        "diversity_table",
        &rows,
        &TableReport {
            rows: rows.clone(),
            intervals,
        },
    )
}
