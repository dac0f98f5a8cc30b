use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamStore;
use crate::error::{Error, Result};

/// Gradients below this magnitude are compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// Seeded subsample used when a model has more than `threshold` scalars.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckSample {
    pub threshold: usize,
    pub count: usize,
    pub seed: u64,
}

impl Default for GradCheckSample {
    fn default() -> Self {
        GradCheckSample {
            threshold: 10_000,
            count: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// Compares the analytic gradients already stored in `params` with central
/// differences of `loss`. Relative error is measured against the numeric
/// derivative: `|g − ĝ| / max(|ĝ|, 1e-6)`.
pub fn gradcheck<L>(
    params: &mut ParamStore<f64>,
    step: f64,
    subsample: GradCheckSample,
    mut loss: L,
) -> Result<GradCheckReport>
where
    L: FnMut(&ParamStore<f64>) -> Result<f64>,
{
    let total = params.num_scalars();
    let mut coords: Vec<(usize, usize)> = Vec::with_capacity(total);
    for (pi, p) in params.params().iter().enumerate() {
        coords.extend((0..p.value.len()).map(|j| (pi, j)));
    }
    if total > subsample.threshold {
        let mut rng = ChaCha8Rng::seed_from_u64(subsample.seed);
        let picks = sample(&mut rng, total, subsample.count.min(total)).into_vec();
        let mut picked: Vec<_> = picks.into_iter().map(|i| coords[i]).collect();
        picked.sort_unstable();
        coords = picked;
    }

    let base = loss(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite { op: "gradcheck loss" });
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (pi, j) in coords {
        let original = params.params()[pi].value.as_slice().expect("contiguous")[j];
        let set = |params: &mut ParamStore<f64>, v: f64| {
            params.params_mut()[pi]
                .value
                .as_slice_mut()
                .expect("contiguous")[j] = v;
        };
        set(params, original + step);
        let plus = loss(params)?;
        set(params, original - step);
        let minus = loss(params)?;
        set(params, original);
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite { op: "gradcheck loss" });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let analytic = params.params()[pi].grad.as_slice().expect("contiguous")[j];
        let rel = (analytic - numeric).abs() / numeric.abs().max(REL_FLOOR);
        report.checked += 1;
        if rel > report.max_rel_error || report.worst_param.is_empty() {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst_param = params.params()[pi].name.clone();
            report.worst_index = j;
            report.analytic = analytic;
            report.numeric = numeric;
        }
    }
    Ok(report)
}
