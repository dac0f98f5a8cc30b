use serde::{Deserialize, Serialize};

use super::PerApp;
use crate::corpus::{Query, BOS, EOS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scoring::TokenScorer;

#[derive(Debug, Clone, Copy)]
pub struct EmOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init_va: f64,
    pub exec: Execution,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions {
            tolerance: 1e-6,
            max_iterations: 200,
            init_va: 0.5,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationFit {
    pub beta: PerApp,
    pub iterations: usize,
    pub converged: bool,
    /// Dev log-likelihood at the starting point and after every update.
    pub loglik_trace: Vec<f64>,
    pub dev_tokens: usize,
    pub perplexity: f64,
}

/// Per-token probabilities `(p_va, p_stt)` over the dev set, in query order.
fn token_probs<A, D>(lm_va: &A, lm_stt: &D, dev: &[Query], exec: Execution) -> Vec<(f64, f64)>
where
    A: TokenScorer + ?Sized,
    D: TokenScorer + ?Sized,
{
    exec.map(dev, |q| {
        let mut history = vec![BOS];
        let mut out = Vec::with_capacity(q.tokens.len() + 1);
        for &w in q.tokens.iter().chain(std::iter::once(&EOS)) {
            out.push((
                lm_va.logprob(&history, w).exp(),
                lm_stt.logprob(&history, w).exp(),
            ));
            history.push(w);
        }
        out
    })
    .into_iter()
    .flatten()
    .collect()
}

fn loglik(probs: &[(f64, f64)], beta_va: f64) -> f64 {
    probs
        .iter()
        .map(|&(a, d)| (beta_va * a + (1.0 - beta_va) * d).ln())
        .sum()
}

/// Fits the two-component linear interpolation `β_VA p_VA + β_STT p_STT`
/// to `dev` by EM on the mixture weight.
pub fn optimize_interpolation<A, D>(
    lm_va: &A,
    lm_stt: &D,
    dev: &[Query],
    opts: EmOptions,
) -> Result<InterpolationFit>
where
    A: TokenScorer + ?Sized,
    D: TokenScorer + ?Sized,
{
    if dev.is_empty() {
        return Err(Error::EmptyDev);
    }
    if !(0.0..=1.0).contains(&opts.init_va) {
        return Err(Error::Config("EM initial weight outside [0, 1]".into()));
    }
    let probs = token_probs(lm_va, lm_stt, dev, opts.exec);
    let n = probs.len() as f64;
    let mut beta = opts.init_va;
    let mut trace = vec![loglik(&probs, beta)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let resp: f64 = probs
            .iter()
            .map(|&(a, d)| {
                let num = beta * a;
                let den = num + (1.0 - beta) * d;
                if den > 0.0 {
                    num / den
                } else {
                    beta
                }
            })
            .sum();
        let next = (resp / n).clamp(0.0, 1.0);
        iterations += 1;
        let delta = (next - beta).abs();
        beta = next;
        trace.push(loglik(&probs, beta));
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let ll = *trace.last().expect("trace has the initial point");
    Ok(InterpolationFit {
        beta: PerApp::new(beta, 1.0 - beta),
        iterations,
        converged,
        loglik_trace: trace,
        dev_tokens: probs.len(),
        perplexity: (-ll / n).exp(),
    })
}

/// Dev perplexity of the interpolation at a fixed `β_VA`.
pub fn interpolation_perplexity<A, D>(
    lm_va: &A,
    lm_stt: &D,
    dev: &[Query],
    beta_va: f64,
    exec: Execution,
) -> Result<f64>
where
    A: TokenScorer + ?Sized,
    D: TokenScorer + ?Sized,
{
    if dev.is_empty() {
        return Err(Error::EmptyDev);
    }
    let probs = token_probs(lm_va, lm_stt, dev, exec);
    Ok((-loglik(&probs, beta_va) / probs.len() as f64).exp())
}
