use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::fofe::FofeModel;
use crate::nn::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub repeats: usize,
    /// Queries scored before timing starts; not part of the samples.
    pub warmup: usize,
    pub context_limit: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repeats: 3,
            warmup: 50,
            context_limit: Some(super::DEFAULT_CONTEXT_LIMIT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostInfo {
    pub os: String,
    pub arch: String,
    pub cpus: usize,
    pub cpu_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatStats {
    pub p50_us: f64,
    pub p95_us: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub queries: usize,
    pub warmup: usize,
    /// Per-query latency in microseconds, one vector per repeat.
    pub samples_us: Vec<Vec<f64>>,
    pub repeats: Vec<RepeatStats>,
    pub mean_p50_us: f64,
    pub mean_p95_us: f64,
    pub timer_resolution_ns: f64,
    pub host: HostInfo,
    pub warnings: Vec<String>,
}

impl BenchReport {
    /// `(baseline − self) / baseline` in percent on mean P95; positive
    /// means this model is faster.
    pub fn p95_delta_vs(&self, baseline: &BenchReport) -> f64 {
        relative_delta(baseline.mean_p95_us, self.mean_p95_us)
    }
}

/// Nearest-rank percentile: the value at rank `ceil(p/100 · N)` of the
/// sorted samples (rank 1 for `p = 0`).
pub fn nearest_rank(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() || !(0.0..=100.0).contains(&p) {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Percent change relative to `baseline`; positive means `candidate` is
/// smaller (faster).
pub fn relative_delta(baseline: f64, candidate: f64) -> f64 {
    (baseline - candidate) / baseline * 100.0
}

/// Smallest non-zero step observed between consecutive clock reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

pub fn host_descriptor() -> HostInfo {
    let cpu_model = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|s| {
        s.lines()
            .find(|l| l.starts_with("model name"))
            .and_then(|l| l.split(':').nth(1))
            .map(|m| m.trim().to_string())
    });
    HostInfo {
        os: std::env::consts::OS.into(),
        arch: std::env::consts::ARCH.into(),
        cpus: std::thread::available_parallelism().map_or(1, usize::from),
        cpu_model,
    }
}

/// Times full-query scoring (every position through the softmax) for each
/// query, `repeats` times, on the calling thread.
pub fn bench_latency<F: Scalar>(
    model: &FofeModel<F>,
    model_id: &str,
    queries: &[Query],
    config: &BenchConfig,
) -> Result<BenchReport> {
    if queries.is_empty() {
        return Err(Error::EmptyDev);
    }
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    let score = |q: &Query| model.query_logprob(&q.tokens, q.application, config.context_limit);
    for q in queries.iter().cycle().take(config.warmup) {
        std::hint::black_box(score(q)?);
    }
    let mut samples_us = Vec::with_capacity(config.repeats);
    for _ in 0..config.repeats {
        let mut run = Vec::with_capacity(queries.len());
        for q in queries {
            let t = Instant::now();
            std::hint::black_box(score(q)?);
            run.push(t.elapsed().as_secs_f64() * 1e6);
        }
        samples_us.push(run);
    }
    let repeats: Vec<RepeatStats> = samples_us
        .iter()
        .map(|s| RepeatStats {
            p50_us: nearest_rank(s, 50.0).expect("non-empty"),
            p95_us: nearest_rank(s, 95.0).expect("non-empty"),
        })
        .collect();
    let n = repeats.len() as f64;
    let resolution = timer_resolution();
    let mut warnings = Vec::new();
    if resolution > Duration::from_micros(1) {
        warnings.push(format!("timer resolution {resolution:?} is coarser than 1us"));
    }
    Ok(BenchReport {
        model: model_id.into(),
        queries: queries.len(),
        warmup: config.warmup,
        mean_p50_us: repeats.iter().map(|r| r.p50_us).sum::<f64>() / n,
        mean_p95_us: repeats.iter().map(|r| r.p95_us).sum::<f64>() / n,
        samples_us,
        repeats,
        timer_resolution_ns: resolution.as_secs_f64() * 1e9,
        host: host_descriptor(),
        warnings,
    })
}
