//! Shared log-probability interface for every language model in the crate.

use crate::corpus::{Query, BOS, EOS};
use crate::exec::Execution;

/// A conditional word model. `history` is every token before `word`,
/// starting with `<s>`; implementations truncate it to their own order.
pub trait TokenScorer: Sync {
    fn logprob(&self, history: &[u32], word: u32) -> f64;
}

/// Sum of log-probabilities over a query's words and the closing `</s>`,
/// with the number of predicted tokens.
pub fn query_logprob<S: TokenScorer + ?Sized>(scorer: &S, query: &[u32]) -> (f64, usize) {
    let mut history = Vec::with_capacity(query.len() + 1);
    history.push(BOS);
    let mut sum = 0.0;
    for &w in query.iter().chain(std::iter::once(&EOS)) {
        sum += scorer.logprob(&history, w);
        history.push(w);
    }
    (sum, query.len() + 1)
}

/// Total log-probability and token count, accumulated in query order.
pub fn corpus_logprob<S: TokenScorer + ?Sized>(
    scorer: &S,
    queries: &[Query],
    exec: Execution,
) -> (f64, usize) {
    let per_query = exec.map(queries, |q| query_logprob(scorer, &q.tokens));
    per_query
        .into_iter()
        .fold((0.0, 0), |(s, n), (qs, qn)| (s + qs, n + qn))
}

/// `exp(-(1/T) Σ log p)` with `T` counting `</s>` predictions.
pub fn perplexity<S: TokenScorer + ?Sized>(scorer: &S, queries: &[Query], exec: Execution) -> f64 {
    let (sum, n) = corpus_logprob(scorer, queries, exec);
    if n == 0 {
        return f64::NAN;
    }
    (-sum / n as f64).exp()
}
