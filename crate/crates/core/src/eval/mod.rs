//! Perplexity under the decode-time context limit, and per-query scoring
//! latency with nearest-rank percentiles.

mod bench;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bench::{
    bench_latency, host_descriptor, nearest_rank, relative_delta, timer_resolution, BenchConfig,
    BenchReport, HostInfo, RepeatStats,
};

use crate::corpus::{load_queries, load_tagged_queries, ApplicationId, Query, Vocab, UNK};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fofe::{ExampleSet, FofeModel};
use crate::nn::Scalar;

/// Context limit used at decode time.
pub const DEFAULT_CONTEXT_LIMIT: usize = 8;

const QUERY_CHUNK: usize = 64;

/// Encoded test queries plus the vocabulary they were encoded with.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub name: String,
    pub queries: Vec<Query>,
    pub vocab_hash: u64,
}

impl TestSet {
    pub fn new(name: impl Into<String>, queries: Vec<Query>, vocab: &Vocab) -> Self {
        TestSet {
            name: name.into(),
            queries,
            vocab_hash: vocab.hash(),
        }
    }

    /// Loads a plain corpus whose lines all belong to `app`, or a tagged
    /// corpus (with its `.apps` sidecar) when `app` is `None`.
    pub fn load(vocab: &Vocab, path: impl AsRef<Path>, app: Option<ApplicationId>) -> Result<Self> {
        let path = path.as_ref();
        let queries = match app {
            Some(app) => load_queries(vocab, path, app)?,
            None => load_tagged_queries(vocab, path)?,
        };
        Ok(Self::new(path.display().to_string(), queries, vocab))
    }

    /// Words only; `</s>` is never out of vocabulary.
    pub fn word_count(&self) -> usize {
        self.queries.iter().map(|q| q.tokens.len()).sum()
    }

    pub fn oov_rate(&self) -> f64 {
        let words = self.word_count();
        if words == 0 {
            return 0.0;
        }
        let oov = self.queries.iter().flat_map(|q| &q.tokens).filter(|&&t| t == UNK).count();
        oov as f64 / words as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub test_set: String,
    /// Predicted tokens: words plus one `</s>` per query.
    pub tokens: usize,
    pub queries: usize,
    pub perplexity: f64,
    pub oov_rate: f64,
    pub context_limit: Option<usize>,
}

/// Sum of natural-log probabilities of every word and `</s>` in
/// `queries`, and the token count. Application-dependent models route each
/// query through its own application's path.
pub fn corpus_logprob<F: Scalar>(
    model: &FofeModel<F>,
    queries: &[Query],
    context_limit: Option<usize>,
    exec: Execution,
) -> Result<(f64, usize)> {
    let parts = exec.map_chunks(queries, QUERY_CHUNK, |_, chunk| -> Result<(f64, usize)> {
        let mut total = (0.0, 0);
        for app in ApplicationId::ALL {
            let mut set = ExampleSet::new();
            for q in chunk.iter().filter(|q| q.application == app) {
                set.extend_query(&q.tokens, app, context_limit);
            }
            if set.is_empty() {
                continue;
            }
            let lp = model.target_logprobs(&set)?;
            total.0 += lp.iter().sum::<f64>();
            total.1 += lp.len();
        }
        Ok(total)
    });
    parts.into_iter().try_fold((0.0, 0), |acc, p| {
        let p = p?;
        Ok((acc.0 + p.0, acc.1 + p.1))
    })
}

/// `exp(−mean log p)` over `test`, checking the vocabulary first.
pub fn perplexity<F: Scalar>(
    model: &FofeModel<F>,
    test: &TestSet,
    context_limit: Option<usize>,
    exec: Execution,
) -> Result<EvalReport> {
    if test.vocab_hash != model.vocab_hash() {
        return Err(Error::VocabMismatch {
            found: test.vocab_hash,
            expected: model.vocab_hash(),
        });
    }
    let (lp, n) = corpus_logprob(model, &test.queries, context_limit, exec)?;
    if n == 0 {
        return Err(Error::EmptyDev);
    }
    Ok(EvalReport {
        test_set: test.name.clone(),
        tokens: n,
        queries: test.queries.len(),
        perplexity: (-lp / n as f64).exp(),
        oov_rate: test.oov_rate(),
        context_limit,
    })
}
