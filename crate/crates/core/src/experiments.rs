//! Metrics over traces, network-size scaling rules and parameter sweeps.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{PowerScaling, RunConfig};
use crate::energy::{CloudSchedule, EnergyBuckets};
use crate::netsim::{SimError, Simulation, TraceRecord};
use crate::output::format_real;

/// Smallest network a size sweep accepts.
pub const MIN_SWEEP_NODES: usize = 10;
/// Moving-average window for peak detection.
pub const SMOOTHING_WINDOW: usize = 5;
/// Minimum prominence of a counted activity peak.
pub const MIN_PEAK_PROMINENCE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("cannot average an empty set of nodes")]
    EmptyNetwork,
    #[error("trace of {len} periods does not extend past the {warmup}-period warmup")]
    TraceTooShort { len: usize, warmup: u64 },
    #[error("no energy was consumed")]
    NoEnergy,
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
}

/// Fraction of active nodes.
pub fn mean_activity(active: &[bool]) -> Result<f64, MetricsError> {
    if active.is_empty() {
        return Err(MetricsError::EmptyNetwork);
    }
    Ok(active.iter().filter(|&&a| a).count() as f64 / active.len() as f64)
}

/// Average of per-period mean activity after dropping `warmup` periods.
pub fn mean_system_activity(trace: &[TraceRecord], warmup: u64) -> Result<f64, MetricsError> {
    let tail = after_warmup(trace, warmup)?;
    Ok(tail.iter().map(|r| r.mean_activity).sum::<f64>() / tail.len() as f64)
}

fn after_warmup(trace: &[TraceRecord], warmup: u64) -> Result<&[TraceRecord], MetricsError> {
    if (trace.len() as u64) <= warmup {
        return Err(MetricsError::TraceTooShort {
            len: trace.len(),
            warmup,
        });
    }
    Ok(&trace[warmup as usize..])
}

/// Spontaneous-activation probability for a network of `k_new` nodes that
/// keeps `p_a · k` constant. Clamped to `[0, 1]`.
pub fn scale_pa(p_a: f64, k: usize, k_new: usize) -> f64 {
    (p_a * k as f64 / k_new as f64).clamp(0.0, 1.0)
}

/// Radius for `k_new` nodes that keeps the expected neighbour count
/// `π t² k` constant.
pub fn scale_power(t: f64, k: usize, k_new: usize) -> f64 {
    t * (k as f64 / k_new as f64).sqrt()
}

/// `sqrt(2·t·k / k_new)`, kept for comparison with [`scale_power`]. It is not
/// the identity at `k_new = k`.
pub fn scale_power_literal(t: f64, k: usize, k_new: usize) -> f64 {
    (t * 2.0 * k as f64 / k_new as f64).sqrt()
}

/// Copy of `base` resized to `k_new` nodes with `p_a`, `p_min` and `p_max`
/// rescaled from the base size.
pub fn resize_network(base: &RunConfig, k_new: usize) -> RunConfig {
    let k = base.network.nodes;
    let mut cfg = base.clone();
    cfg.network.nodes = k_new;
    cfg.protocol.p_a = scale_pa(base.protocol.p_a, k, k_new);
    let radius = |t| match base.analysis.power_scaling {
        PowerScaling::Quadratic => scale_power(t, k, k_new),
        PowerScaling::Literal => scale_power_literal(t, k, k_new),
    };
    cfg.protocol.p_min = radius(base.protocol.p_min);
    cfg.protocol.p_max = radius(base.protocol.p_max);
    cfg
}

/// Share of consumed energy per bucket, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub tx: f64,
    pub rx: f64,
    pub idle: f64,
    pub active: f64,
    pub app: f64,
}

impl EnergyBreakdown {
    pub fn sum(&self) -> f64 {
        self.tx + self.rx + self.idle + self.active + self.app
    }

    pub fn duty_cycling(&self) -> f64 {
        self.tx + self.rx + self.idle + self.active
    }
}

pub fn energy_breakdown(energy: &EnergyBuckets) -> Result<EnergyBreakdown, MetricsError> {
    let total = energy.total();
    if total.is_nan() || total <= 0.0 {
        return Err(MetricsError::NoEnergy);
    }
    let pct = |v: f64| 100.0 * v / total;
    Ok(EnergyBreakdown {
        tx: pct(energy.tx),
        rx: pct(energy.rx),
        idle: pct(energy.idle),
        active: pct(energy.active),
        app: pct(energy.app),
    })
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// A local maximum of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
}

impl Peak {
    /// Level of the higher of the two bases the prominence is measured from.
    pub fn base(&self) -> f64 {
        self.height - self.prominence
    }
}

/// Local maxima with their topographic prominence. Flat tops report their
/// middle sample; the first and last samples never count as peaks.
pub fn find_peaks(xs: &[f64]) -> Vec<Peak> {
    let n = xs.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if xs[i - 1] < xs[i] {
            let mut j = i;
            while j + 1 < n && xs[j + 1] == xs[i] {
                j += 1;
            }
            if j + 1 < n && xs[j + 1] < xs[i] {
                let index = (i + j) / 2;
                peaks.push(Peak {
                    index,
                    height: xs[index],
                    prominence: prominence(xs, i, j),
                });
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn prominence(xs: &[f64], first: usize, last: usize) -> f64 {
    let h = xs[first];
    let mut left_min = h;
    for &v in xs[..first].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &xs[last + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationStats {
    pub peaks: Vec<Peak>,
    pub peaks_per_day: f64,
    pub mean_peak_height: f64,
    /// Mean base level the peaks rise from.
    pub mean_trough_depth: f64,
    /// Battery level at each peak, aligned with `peaks`.
    pub peak_batteries: Vec<f64>,
}

impl OscillationStats {
    /// Mean trough-to-peak swing.
    pub fn amplitude(&self) -> f64 {
        self.mean_peak_height - self.mean_trough_depth
    }

    /// Pearson correlation between peak height and battery level at the peak.
    pub fn height_battery_correlation(&self) -> Option<f64> {
        let heights: Vec<f64> = self.peaks.iter().map(|p| p.height).collect();
        pearson(&heights, &self.peak_batteries)
    }
}

/// Activity peaks of a trace: smoothed with a 5-period moving average, kept
/// when their prominence is at least 0.2.
pub fn detect_oscillation(trace: &[TraceRecord], day_length: u32) -> OscillationStats {
    let activity: Vec<f64> = trace.iter().map(|r| r.mean_activity).collect();
    let smooth = moving_average(&activity, SMOOTHING_WINDOW);
    let peaks: Vec<Peak> = find_peaks(&smooth)
        .into_iter()
        .filter(|p| p.prominence >= MIN_PEAK_PROMINENCE)
        .collect();
    let days = trace.len() as f64 / day_length as f64;
    let mean = |xs: &mut dyn Iterator<Item = f64>| {
        let (s, c) = xs.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if c == 0 {
            0.0
        } else {
            s / c as f64
        }
    };
    OscillationStats {
        peaks_per_day: if days > 0.0 {
            peaks.len() as f64 / days
        } else {
            0.0
        },
        mean_peak_height: mean(&mut peaks.iter().map(|p| p.height)),
        mean_trough_depth: mean(&mut peaks.iter().map(|p| p.base())),
        peak_batteries: peaks.iter().map(|p| trace[p.index].mean_battery).collect(),
        peaks,
    }
}

/// Sample Pearson correlation; `None` for fewer than two points or zero
/// variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let mx = xs[..n].iter().sum::<f64>() / n as f64;
    let my = ys[..n].iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Ordinary least squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LinearFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub periods: usize,
    pub mean_system_activity: f64,
    pub final_mean_battery: f64,
    pub energy: EnergyBuckets,
    pub breakdown: Option<EnergyBreakdown>,
    pub oscillation: OscillationStats,
}

pub fn summarize(trace: &[TraceRecord], config: &RunConfig) -> Result<RunSummary, MetricsError> {
    let warmup = config.warmup_periods();
    let msa = mean_system_activity(trace, warmup)?;
    let last = trace.last().expect("trace is longer than the warmup");
    Ok(RunSummary {
        periods: trace.len(),
        mean_system_activity: msa,
        final_mean_battery: last.mean_battery,
        energy: last.energy,
        breakdown: energy_breakdown(&last.energy).ok(),
        oscillation: detect_oscillation(
            after_warmup(trace, warmup)?,
            config.environment.day_length,
        ),
    })
}

/// Run one configuration to completion and summarize it.
pub fn run_and_summarize(config: &RunConfig) -> Result<RunSummary, String> {
    let mut sim = Simulation::new(config.clone()).map_err(|e| e.to_string())?;
    let trace = sim.run().map_err(|e: SimError| e.to_string())?;
    summarize(&trace, config).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Packet loss probability.
    Loss,
    /// Constant cloud density.
    Cloud,
    /// Network size, with `p_a` and the radii rescaled.
    Size,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::Loss => "p_loss",
            SweepVariable::Cloud => "cloud",
            SweepVariable::Size => "nodes",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub base: RunConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidSweep(m));
        if self.grid.is_empty() {
            return bad("grid is empty".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        for &v in &self.grid {
            match self.variable {
                SweepVariable::Loss | SweepVariable::Cloud if !(0.0..=1.0).contains(&v) => {
                    return bad(format!("{} value {v} is outside [0, 1]", self.variable));
                }
                SweepVariable::Size if v.fract() != 0.0 || v < MIN_SWEEP_NODES as f64 => {
                    return bad(format!(
                        "node count {v} must be an integer of at least {MIN_SWEEP_NODES}"
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Configuration for one grid point and seed.
    pub fn config_for(&self, value: f64, seed: u64) -> RunConfig {
        let mut cfg = match self.variable {
            SweepVariable::Size => resize_network(&self.base, value as usize),
            _ => self.base.clone(),
        };
        match self.variable {
            SweepVariable::Loss => cfg.network.p_loss = value,
            SweepVariable::Cloud => cfg.environment.cloud = CloudSchedule::constant(value),
            SweepVariable::Size => {}
        }
        cfg.seed = seed;
        cfg
    }
}

/// One sweep run, or the seed average of a grid point (`seed == None`).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: Option<u64>,
    pub mean_system_activity: f64,
    pub final_mean_battery: f64,
    pub breakdown: Option<EnergyBreakdown>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub variable: SweepVariable,
    pub runs: Vec<SweepRow>,
    pub averages: Vec<SweepRow>,
}

/// Run every `(value, seed)` pair on up to `jobs` threads. Failed runs are
/// recorded in `error` and left out of the averages. Row order follows the
/// grid, then the seed list, whatever order the runs finish in.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<SweepResults, MetricsError> {
    spec.validate()?;
    let cases: Vec<(f64, u64)> = spec
        .grid
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let run_case = |&(value, seed): &(f64, u64)| -> SweepRow {
        let cfg = spec.config_for(value, seed);
        match run_and_summarize(&cfg) {
            Ok(s) => SweepRow {
                value,
                seed: Some(seed),
                mean_system_activity: s.mean_system_activity,
                final_mean_battery: s.final_mean_battery,
                breakdown: s.breakdown,
                error: None,
            },
            Err(e) => SweepRow {
                value,
                seed: Some(seed),
                mean_system_activity: f64::NAN,
                final_mean_battery: f64::NAN,
                breakdown: None,
                error: Some(e),
            },
        }
    };
    let runs: Vec<SweepRow> = if jobs <= 1 {
        cases.iter().map(run_case).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| MetricsError::InvalidSweep(e.to_string()))?;
        pool.install(|| cases.par_iter().map(run_case).collect())
    };
    let averages = spec
        .grid
        .iter()
        .enumerate()
        .map(|(gi, &value)| {
            let n_seeds = spec.seeds.len();
            let ok: Vec<&SweepRow> = runs[gi * n_seeds..(gi + 1) * n_seeds]
                .iter()
                .filter(|r| r.error.is_none())
                .collect();
            average_rows(value, &ok)
        })
        .collect();
    Ok(SweepResults {
        variable: spec.variable,
        runs,
        averages,
    })
}

fn average_rows(value: f64, rows: &[&SweepRow]) -> SweepRow {
    if rows.is_empty() {
        return SweepRow {
            value,
            seed: None,
            mean_system_activity: f64::NAN,
            final_mean_battery: f64::NAN,
            breakdown: None,
            error: Some("all runs failed".into()),
        };
    }
    let n = rows.len() as f64;
    let avg = |f: &dyn Fn(&SweepRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
    let breakdown = rows
        .iter()
        .map(|r| r.breakdown)
        .collect::<Option<Vec<_>>>()
        .map(|bs| {
            let m = |f: &dyn Fn(&EnergyBreakdown) -> f64| bs.iter().map(f).sum::<f64>() / n;
            EnergyBreakdown {
                tx: m(&|b| b.tx),
                rx: m(&|b| b.rx),
                idle: m(&|b| b.idle),
                active: m(&|b| b.active),
                app: m(&|b| b.app),
            }
        });
    SweepRow {
        value,
        seed: None,
        mean_system_activity: avg(&|r| r.mean_system_activity),
        final_mean_battery: avg(&|r| r.final_mean_battery),
        breakdown,
        error: None,
    }
}

pub const SWEEP_HEADER: &str = "variable,value,seed,mean_system_activity,final_mean_battery,\
pct_tx,pct_rx,pct_idle,pct_active,pct_app,error";

/// Runs first, then one `seed = mean` row per grid point.
pub fn sweep_csv(results: &SweepResults) -> String {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    wtr.write_record(SWEEP_HEADER.split(','))
        .expect("writing to memory");
    for row in results.runs.iter().chain(&results.averages) {
        let b = row.breakdown;
        let pct =
            |f: fn(&EnergyBreakdown) -> f64| b.as_ref().map(f).map(format_real).unwrap_or_default();
        let value = match results.variable {
            SweepVariable::Size => format!("{}", row.value as u64),
            _ => format_real(row.value),
        };
        wtr.write_record([
            results.variable.name().to_string(),
            value,
            row.seed
                .map_or_else(|| "mean".to_string(), |s| s.to_string()),
            format_real(row.mean_system_activity),
            format_real(row.final_mean_battery),
            pct(|b| b.tx),
            pct(|b| b.rx),
            pct(|b| b.idle),
            pct(|b| b.active),
            pct(|b| b.app),
            row.error.clone().unwrap_or_default(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(wtr.into_inner().expect("flush to memory")).expect("CSV is UTF-8")
}

/// Parse `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let spec = spec.trim();
    if spec.is_empty() {
        return Err("grid is empty".into());
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(format!("range `{spec}` must be start:stop:step"));
        };
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(format!("range `{spec}` needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Values are built from integer multiples and rounded to 12 decimals
        // so 0:1:0.1 yields 0.3 rather than 0.30000000000000004.
        Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(period: u64, a: f64) -> TraceRecord {
        TraceRecord {
            period,
            mean_activity: a,
            mean_battery: 0.5,
            sun: 0.0,
            cloud: 0.0,
            energy: EnergyBuckets::default(),
            messages_sent: 0,
            messages_received: 0,
        }
    }

    #[test]
    fn mean_activity_examples() {
        assert_eq!(mean_activity(&[true; 4]).unwrap(), 1.0);
        assert_eq!(mean_activity(&[false; 3]).unwrap(), 0.0);
        assert_eq!(mean_activity(&[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(mean_activity(&[]), Err(MetricsError::EmptyNetwork));
    }

    #[test]
    fn mean_system_activity_examples() {
        let trace: Vec<_> = (0..20).map(|p| rec(p, 0.6)).collect();
        assert!((mean_system_activity(&trace, 5).unwrap() - 0.6).abs() < 1e-12);
        let dead: Vec<_> = (0..20).map(|p| rec(p, 0.0)).collect();
        assert_eq!(mean_system_activity(&dead, 0).unwrap(), 0.0);
        assert!(matches!(
            mean_system_activity(&trace, 20),
            Err(MetricsError::TraceTooShort { .. })
        ));
    }

    #[test]
    fn scale_pa_examples() {
        assert_eq!(scale_pa(0.001, 120, 120), 0.001);
        assert!((scale_pa(0.001, 120, 240) - 0.0005).abs() < 1e-18);
        assert!((scale_pa(0.001, 120, 60) - 0.002).abs() < 1e-18);
        assert_eq!(scale_pa(0.5, 120, 10), 1.0);
    }

    #[test]
    fn scale_power_examples() {
        assert_eq!(scale_power(0.07, 120, 120), 0.07);
        assert!((scale_power(0.07, 120, 30) - 0.14).abs() < 1e-15);
        assert!((scale_power(0.14, 120, 480) - 0.07).abs() < 1e-15);
        // The literal formula does not reduce to the identity.
        assert!((scale_power_literal(0.07, 120, 120) - 0.14_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn resize_scales_both_radii() {
        let base = RunConfig::default();
        let c = resize_network(&base, 30);
        assert_eq!(c.network.nodes, 30);
        assert!((c.protocol.p_min - 0.14).abs() < 1e-15);
        assert!((c.protocol.p_max - 0.28).abs() < 1e-15);
        assert!((c.protocol.p_a - 0.004).abs() < 1e-15);
    }

    #[test]
    fn breakdown_examples() {
        let only_app = EnergyBuckets {
            app: 3.0,
            ..Default::default()
        };
        let b = energy_breakdown(&only_app).unwrap();
        assert_eq!(b.app, 100.0);
        assert_eq!(b.sum(), 100.0);
        assert_eq!(
            energy_breakdown(&EnergyBuckets::default()),
            Err(MetricsError::NoEnergy)
        );
    }

    #[test]
    fn constant_trace_has_no_peaks() {
        let trace: Vec<_> = (0..200).map(|p| rec(p, 0.4)).collect();
        let s = detect_oscillation(&trace, 100);
        assert!(s.peaks.is_empty());
        assert_eq!(s.peaks_per_day, 0.0);
    }

    #[test]
    fn square_wave_peaks_at_plateau_centres() {
        // 0 for 10 periods, 1 for 10 periods, repeated.
        let trace: Vec<_> = (0..100u64)
            .map(|p| rec(p, if (p / 10) % 2 == 1 { 1.0 } else { 0.0 }))
            .collect();
        let s = detect_oscillation(&trace, 100);
        let centres: Vec<usize> = s.peaks.iter().map(|p| p.index).collect();
        // Smoothed plateaus of 1.0 span 12..=17, 32..=37, ...
        assert_eq!(centres, vec![14, 34, 54, 74]);
        for p in &s.peaks {
            assert_eq!(p.height, 1.0);
            assert_eq!(p.prominence, 1.0);
        }
        assert_eq!(s.amplitude(), 1.0);
        assert_eq!(s.peaks_per_day, 4.0);
    }

    #[test]
    fn prominence_uses_higher_base() {
        let xs = [0.0, 0.5, 0.2, 0.9, 0.1, 0.3, 0.0];
        let p = find_peaks(&xs);
        let got: Vec<(usize, f64)> = p.iter().map(|p| (p.index, p.prominence)).collect();
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].0, 1);
        assert!((got[0].1 - 0.3).abs() < 1e-12);
        assert_eq!(got[1].0, 3);
        assert!((got[1].1 - 0.9).abs() < 1e-12);
        assert!((got[2].1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn fits_and_correlation() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&xs, &ys).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        assert!(pearson(&[1.0], &[2.0]).is_none());
        assert!(pearson(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:1:0.01").unwrap();
        assert_eq!(g.len(), 101);
        assert_eq!(g[30], 0.3);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(parse_grid("0:1:0.1").unwrap().len(), 11);
        assert_eq!(
            parse_grid("120, 200,300").unwrap(),
            vec![120.0, 200.0, 300.0]
        );
        assert!(parse_grid("").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn sweep_spec_validation() {
        let spec = |variable, grid: Vec<f64>| SweepSpec {
            variable,
            grid,
            seeds: vec![1],
            base: RunConfig::default(),
        };
        assert!(spec(SweepVariable::Loss, vec![]).validate().is_err());
        assert!(spec(SweepVariable::Loss, vec![1.2]).validate().is_err());
        assert!(spec(SweepVariable::Size, vec![5.0]).validate().is_err());
        assert!(spec(SweepVariable::Size, vec![50.5]).validate().is_err());
        assert!(spec(SweepVariable::Size, vec![10.0, 300.0])
            .validate()
            .is_ok());
    }
}
