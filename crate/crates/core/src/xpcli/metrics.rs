use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{Algorithm, ScenarioConfig};
use super::trial::{run_trial_with, RunError, Trace, TrialOutcome, TrialPoint};
use crate::analysis::capacity_bound;

/// Points with fewer bit errors than this, summed over trials, are flagged.
pub const MIN_ERRORS_PER_POINT: u64 = 10;

/// z-value of the two-sided 95% normal interval.
const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetricKind {
    BerVsSymbol,
    BerVsSnr,
    BerVsK,
    MseVsSymbol,
}

impl MetricKind {
    pub fn file_stem(self) -> &'static str {
        match self {
            MetricKind::BerVsSymbol => "ber_vs_symbol",
            MetricKind::BerVsSnr => "ber_vs_snr",
            MetricKind::BerVsK => "ber_vs_k",
            MetricKind::MseVsSymbol => "mse_vs_symbol",
        }
    }
}

/// One curve: a metric of one receiver against a sweep axis, averaged over trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub kind: MetricKind,
    pub algorithm: String,
    pub scenario_digest: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ci_halfwidth: Vec<f64>,
    /// BER points resting on fewer than [`MIN_ERRORS_PER_POINT`] errors.
    pub low_confidence: Vec<bool>,
    pub trials: usize,
}

impl MetricSeries {
    pub fn file_name(&self, ext: &str) -> String {
        format!("{}_{}_{}.{ext}", self.kind.file_stem(), self.algorithm, self.scenario_digest)
    }
}

/// Mean and 95% half-width of the mean, independent of the order of `values`.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut dev: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1) as f64;
    (mean, Z95 * (var / n as f64).sqrt())
}

struct Accumulator {
    x: Vec<f64>,
    y: Vec<f64>,
    ci: Vec<f64>,
    low: Vec<bool>,
}

impl Accumulator {
    fn new() -> Self {
        Self {
            x: Vec::new(),
            y: Vec::new(),
            ci: Vec::new(),
            low: Vec::new(),
        }
    }

    fn push(&mut self, x: f64, samples: &[f64], errors: Option<u64>) {
        let (m, c) = mean_ci(samples);
        self.x.push(x);
        self.y.push(m);
        self.ci.push(c);
        self.low.push(errors.is_some_and(|e| e < MIN_ERRORS_PER_POINT));
    }

    fn finish(self, kind: MetricKind, algorithm: &str, digest: &str, trials: usize) -> MetricSeries {
        MetricSeries {
            kind,
            algorithm: algorithm.to_string(),
            scenario_digest: digest.to_string(),
            x: self.x,
            y: self.y,
            ci_halfwidth: self.ci,
            low_confidence: self.low,
            trials,
        }
    }
}

fn traces_of<'a>(outcomes: &'a [TrialOutcome], label: &str) -> Vec<&'a Trace> {
    outcomes.iter().filter_map(|o| o.trace(label)).collect()
}

fn labels(outcomes: &[TrialOutcome]) -> Vec<String> {
    outcomes
        .first()
        .map(|o| o.traces.iter().map(|t| t.label.clone()).collect())
        .unwrap_or_default()
}

/// Windowed BER and per-block channel MSE against the symbol index.
pub fn symbol_series(cfg: &ScenarioConfig, outcomes: &[TrialOutcome]) -> Vec<MetricSeries> {
    let digest = cfg.digest();
    let nt = cfg.layout().tx_antennas();
    let mut out = Vec::new();
    for label in labels(outcomes) {
        let traces = traces_of(outcomes, &label);
        let mut ber = Accumulator::new();
        let window = cfg.ber_window;
        let symbols = traces.first().map_or(0, |t| t.errors.len());
        let mut start = 0;
        while start < symbols {
            let end = (start + window).min(symbols);
            let samples: Vec<f64> = traces.iter().map(|t| t.ber(start, end)).collect();
            let errors = traces.iter().map(|t| t.errors[start..end].iter().map(|&e| u64::from(e)).sum::<u64>()).sum();
            ber.push(end as f64, &samples, Some(errors));
            start = end;
        }
        out.push(ber.finish(MetricKind::BerVsSymbol, &label, &digest, traces.len()));

        let blocks = traces.first().map_or(0, |t| t.mse.len());
        if blocks > 0 {
            let mut mse = Accumulator::new();
            for b in 0..blocks {
                let samples: Vec<f64> = traces.iter().map(|t| t.mse[b]).collect();
                mse.push(((b + 1) * nt) as f64, &samples, None);
            }
            out.push(mse.finish(MetricKind::MseVsSymbol, &label, &digest, traces.len()));
        }
    }
    out
}

/// BER of each receiver at each sweep point, counted from `ber_from_symbol`.
pub fn sweep_series(cfg: &ScenarioConfig, kind: MetricKind, points: &[(f64, Vec<TrialOutcome>)]) -> Vec<MetricSeries> {
    let digest = cfg.digest();
    let mut out = Vec::new();
    let all_labels = points.first().map(|(_, o)| labels(o)).unwrap_or_default();
    for label in all_labels {
        let mut acc = Accumulator::new();
        let mut trials = 0;
        for (x, outcomes) in points {
            let traces = traces_of(outcomes, &label);
            trials = traces.len();
            let from = cfg.ber_from_symbol;
            let samples: Vec<f64> = traces.iter().map(|t| t.ber(from, t.errors.len())).collect();
            let errors = traces
                .iter()
                .map(|t| t.errors[from.min(t.errors.len())..].iter().map(|&e| u64::from(e)).sum::<u64>())
                .sum();
            acc.push(*x, &samples, Some(errors));
        }
        out.push(acc.finish(kind, &label, &digest, trials));
    }
    out
}

/// Runs `cfg.trials` packets at `point`, seeds `base_seed + index`, in parallel
/// when the `parallel` feature is on. The result is ordered by trial index.
pub fn run_point(cfg: &ScenarioConfig, point: TrialPoint, algorithms: &[Algorithm]) -> Result<Vec<TrialOutcome>, RunError> {
    #[cfg(feature = "parallel")]
    let trials = (0..cfg.trials as u64).into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let trials = 0..cfg.trials as u64;
    trials
        .map(|i| run_trial_with(cfg, cfg.base_seed.wrapping_add(i), point, algorithms))
        .collect()
}

/// Runs the whole experiment described by `cfg`.
///
/// A `K_sweep` gives BER against K at the first SNR; several SNR values give
/// BER against SNR; otherwise the curves are against the symbol index.
pub fn run_monte_carlo(cfg: &ScenarioConfig) -> Result<Vec<MetricSeries>, RunError> {
    let algorithms = cfg.algorithms();
    let snr = cfg.snr_points();
    warn_over_capacity(cfg);
    if let Some(sweep) = &cfg.users_sweep {
        let points = sweep
            .iter()
            .map(|&k| {
                let point = TrialPoint { snr_db: snr[0], users: k };
                Ok((k as f64, run_point(cfg, point, &algorithms)?))
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        return Ok(sweep_series(cfg, MetricKind::BerVsK, &points));
    }
    if snr.len() > 1 {
        let points = snr
            .iter()
            .map(|&s| {
                let point = TrialPoint {
                    snr_db: s,
                    users: cfg.users,
                };
                Ok((s, run_point(cfg, point, &algorithms)?))
            })
            .collect::<Result<Vec<_>, RunError>>()?;
        return Ok(sweep_series(cfg, MetricKind::BerVsSnr, &points));
    }
    let outcomes = run_point(cfg, TrialPoint::nominal(cfg), &algorithms)?;
    Ok(symbol_series(cfg, &outcomes))
}

fn warn_over_capacity(cfg: &ScenarioConfig) {
    let Ok(cap) = capacity_bound(cfg.chips, cfg.tx_antennas, cfg.lp) else {
        return;
    };
    let peak = cfg
        .users_sweep
        .as_ref()
        .and_then(|s| s.iter().max().copied())
        .unwrap_or(cfg.users)
        .max(cfg.users)
        + cfg.dynamic_events.iter().map(|e| e.users_added).sum::<usize>();
    if !cap.admits(peak) {
        log::warn!(
            "{peak} users exceed the identifiable load {} for N={}, Nt={}, Lp={}; channel estimates may be ambiguous",
            cap.k_max,
            cfg.chips,
            cfg.tx_antennas,
            cfg.lp
        );
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// CSV body with columns `x,y,ci,algorithm,scenario_digest`.
pub fn to_csv(series: &MetricSeries) -> String {
    let mut s = String::from("x,y,ci,algorithm,scenario_digest\n");
    for ((x, y), c) in series.x.iter().zip(&series.y).zip(&series.ci_halfwidth) {
        s.push_str(&format!("{x},{y},{c},{},{}\n", series.algorithm, series.scenario_digest));
    }
    s
}

/// Writes every series to `outdir`, one file each; returns the paths.
pub fn emit(series: &[MetricSeries], outdir: &Path, format: OutputFormat) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(outdir)?;
    let mut paths = Vec::with_capacity(series.len());
    for s in series {
        let path = outdir.join(s.file_name(format.extension()));
        let body = match format {
            OutputFormat::Csv => to_csv(s),
            OutputFormat::Json => serde_json::to_string_pretty(s).map_err(std::io::Error::other)? + "\n",
        };
        let mut f = fs::File::create(&path)?;
        f.write_all(body.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_ci_examples() {
        assert_eq!(mean_ci(&[0.25]), (0.25, 0.0));
        let (m, c) = mean_ci(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((c - 1.96 * (2.0f64 / 2.0).sqrt()).abs() < 1e-12);
        let (a, ca) = mean_ci(&[0.1, 0.7, 0.3, 0.9]);
        let (b, cb) = mean_ci(&[0.9, 0.3, 0.1, 0.7]);
        assert_eq!((a, ca), (b, cb));
    }

    #[test]
    fn empty_series_is_header_only() {
        let s = MetricSeries {
            kind: MetricKind::BerVsSnr,
            algorithm: "ccm".into(),
            scenario_digest: "abc".into(),
            x: vec![],
            y: vec![],
            ci_halfwidth: vec![],
            low_confidence: vec![],
            trials: 0,
        };
        assert_eq!(to_csv(&s), "x,y,ci,algorithm,scenario_digest\n");
        assert_eq!(s.file_name("csv"), "ber_vs_snr_ccm_abc.csv");
    }
}
