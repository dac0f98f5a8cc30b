//! Interpolated absolute-discounting n-gram models.
//!
//! For a context `h` seen `c(h)` times with `N1+(h·)` distinct followers:
//!
//! ```text
//! p(w | h) = max(c(h, w) - D, 0) / c(h)  +  D · N1+(h·) / c(h) · p(w | h')
//! ```
//!
//! where `h'` drops the oldest word. Unseen contexts defer entirely to the
//! lower order, and the recursion bottoms out in a uniform distribution
//! over every predictable id (all ids except `<s>`), so each level sums to 1.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::container::{self, Reader, Writer};
use crate::corpus::{Query, BOS, EOS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::scoring::{self, TokenScorer};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Default, PartialEq)]
struct ContextStats {
    total: u64,
    followers: HashMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramLM {
    order: usize,
    discount: f64,
    vocab_size: usize,
    /// `tables[k]` maps contexts of exactly `k` words to their follower counts.
    tables: Vec<HashMap<Vec<u32>, ContextStats>>,
}

impl NGramLM {
    /// Counts every `(context, word)` pair with context lengths `0..order`,
    /// histories starting at `<s>` and each query closed by `</s>`.
    pub fn train<'a, I>(corpus: I, vocab_size: usize, order: usize, discount: f64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        if order < 1 {
            return Err(Error::Config("n-gram order must be at least 1".into()));
        }
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::Config(format!("discount {discount} outside (0, 1)")));
        }
        if vocab_size < 4 {
            return Err(Error::Config("vocabulary too small".into()));
        }
        let mut tables = vec![HashMap::<Vec<u32>, ContextStats>::new(); order];
        let mut seen = 0usize;
        let mut history = Vec::new();
        for q in corpus {
            seen += 1;
            history.clear();
            history.push(BOS);
            for &w in q.iter().chain(std::iter::once(&EOS)) {
                if w as usize >= vocab_size || w == BOS {
                    return Err(Error::Invalid(format!("token id {w} cannot be predicted")));
                }
                for (k, table) in tables.iter_mut().enumerate() {
                    if k > history.len() {
                        break;
                    }
                    let ctx = &history[history.len() - k..];
                    let stats = match table.get_mut(ctx) {
                        Some(s) => s,
                        None => table.entry(ctx.to_vec()).or_default(),
                    };
                    stats.total += 1;
                    *stats.followers.entry(w).or_default() += 1;
                }
                history.push(w);
            }
        }
        if seen == 0 {
            return Err(Error::NoTokens);
        }
        Ok(NGramLM {
            order,
            discount,
            vocab_size,
            tables,
        })
    }

    pub fn train_queries(
        queries: &[Query],
        vocab_size: usize,
        order: usize,
        discount: f64,
    ) -> Result<Self> {
        Self::train(
            queries.iter().map(|q| q.tokens.as_slice()),
            vocab_size,
            order,
            discount,
        )
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn predictable(&self) -> usize {
        self.vocab_size - 1
    }

    /// Probability of `word` after `history` (full history, `<s>` first).
    pub fn prob(&self, history: &[u32], word: u32) -> f64 {
        if word == BOS || word as usize >= self.vocab_size {
            return 0.0;
        }
        let mut p = 1.0 / self.predictable() as f64;
        for (k, table) in self.tables.iter().enumerate() {
            if k > history.len() {
                break;
            }
            let Some(stats) = table.get(&history[history.len() - k..]) else {
                break;
            };
            let total = stats.total as f64;
            let c = stats.followers.get(&word).copied().unwrap_or(0) as f64;
            let backoff = self.discount * stats.followers.len() as f64 / total;
            p = (c - self.discount).max(0.0) / total + backoff * p;
        }
        p
    }

    /// Interpolation weight given to the next-lower order for the last
    /// `k` words of `history`, or `None` when that context was never seen.
    pub fn backoff_weight(&self, history: &[u32], k: usize) -> Option<f64> {
        if k >= self.order || k > history.len() {
            return None;
        }
        let stats = self.tables[k].get(&history[history.len() - k..])?;
        Some(self.discount * stats.followers.len() as f64 / stats.total as f64)
    }

    /// Count of `word` after the last `k` words of `history`.
    pub fn count(&self, history: &[u32], k: usize, word: u32) -> u64 {
        if k >= self.order || k > history.len() {
            return 0;
        }
        self.tables[k]
            .get(&history[history.len() - k..])
            .and_then(|s| s.followers.get(&word).copied())
            .unwrap_or(0)
    }

    pub fn logprob(&self, history: &[u32], word: u32) -> f64 {
        self.prob(history, word).ln()
    }

    pub fn perplexity(&self, dev: &[Query]) -> Result<f64> {
        if dev.is_empty() {
            return Err(Error::EmptyDev);
        }
        Ok(scoring::perplexity(self, dev, Execution::default()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(container::TAG_NGRAM);
        w.u32(self.order as u32);
        w.f64(self.discount);
        w.u32(self.vocab_size as u32);
        for table in &self.tables {
            let mut contexts: Vec<_> = table.iter().collect();
            contexts.sort_by(|a, b| a.0.cmp(b.0));
            w.u64(contexts.len() as u64);
            for (ctx, stats) in contexts {
                for &t in ctx.iter() {
                    w.u32(t);
                }
                let mut followers: Vec<_> = stats.followers.iter().collect();
                followers.sort();
                w.u32(followers.len() as u32);
                for (&word, &count) in followers {
                    w.u32(word);
                    w.u64(count);
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (mut r, tag) = Reader::open(bytes)?;
        if tag != container::TAG_NGRAM {
            return Err(Error::UnknownArchitecture(tag));
        }
        let order = r.u32()? as usize;
        let discount = r.f64()?;
        let vocab_size = r.u32()? as usize;
        if order == 0 || order > 64 {
            return Err(Error::Invalid(format!("implausible n-gram order {order}")));
        }
        let mut tables = Vec::with_capacity(order);
        for k in 0..order {
            let n = r.u64()?;
            let mut table = HashMap::new();
            for _ in 0..n {
                let ctx = (0..k).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                let nf = r.u32()?;
                let mut stats = ContextStats::default();
                for _ in 0..nf {
                    let word = r.u32()?;
                    let count = r.u64()?;
                    stats.total += count;
                    stats.followers.insert(word, count);
                }
                table.insert(ctx, stats);
            }
            tables.push(table);
        }
        r.expect_end()?;
        Ok(NGramLM {
            order,
            discount,
            vocab_size,
            tables,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

impl TokenScorer for NGramLM {
    fn logprob(&self, history: &[u32], word: u32) -> f64 {
        NGramLM::logprob(self, history, word)
    }
}
