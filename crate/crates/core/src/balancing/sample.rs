use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_lines, tokenize, ApplicationId, SourceSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleProvenance {
    pub seed: u64,
    pub total_tokens: usize,
    pub heldout_fraction: f64,
    pub source_ids: Vec<String>,
    pub lambda: Vec<f64>,
    pub draws_per_source: Vec<usize>,
    pub tokens_per_source: Vec<usize>,
    pub train_lines: usize,
    pub heldout_lines: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCorpus {
    pub train: Vec<(ApplicationId, String)>,
    pub heldout: Vec<(ApplicationId, String)>,
    pub provenance: SampleProvenance,
}

/// Loads each source and draws lines with [`sample_lines`].
pub fn sample_corpus(
    sources: &[SourceSpec],
    lambda: &[f64],
    total_tokens: usize,
    heldout_fraction: f64,
    seed: u64,
) -> Result<SampledCorpus> {
    let mut loaded = Vec::with_capacity(sources.len());
    for (s, &l) in sources.iter().zip(lambda) {
        // sources that can never be drawn are not read
        let lines = if l > 0.0 { read_lines(&s.path)? } else { Vec::new() };
        loaded.push((s.id.clone(), s.application, lines));
    }
    sample_lines(&loaded, lambda, total_tokens, heldout_fraction, seed)
}

/// Draws with replacement: a source with probability `λ_i`, then a
/// uniformly random line of it, until `total_tokens` words are drawn.
/// Each draw independently goes to heldout with `heldout_fraction`.
pub fn sample_lines(
    sources: &[(String, ApplicationId, Vec<String>)],
    lambda: &[f64],
    total_tokens: usize,
    heldout_fraction: f64,
    seed: u64,
) -> Result<SampledCorpus> {
    if sources.len() != lambda.len() {
        return Err(Error::Config(format!(
            "{} sources but {} weights",
            sources.len(),
            lambda.len()
        )));
    }
    if total_tokens == 0 {
        return Err(Error::Config("total_tokens must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&heldout_fraction) {
        return Err(Error::Config("heldout fraction must lie in [0, 1)".into()));
    }
    let sum: f64 = lambda.iter().sum();
    if lambda.iter().any(|&l| l < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "sampling weights must be non-negative and sum to 1, got {sum}"
        )));
    }
    for ((id, _, lines), &l) in sources.iter().zip(lambda) {
        if l > 0.0 && lines.is_empty() {
            return Err(Error::EmptySource(id.clone()));
        }
    }
    let lengths: Vec<Vec<usize>> = sources
        .iter()
        .map(|(_, _, lines)| lines.iter().map(|l| tokenize(l).len()).collect())
        .collect();

    let pick = WeightedIndex::new(lambda).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_4e1d_0u64);
    let mut draws = vec![0usize; sources.len()];
    let mut tokens = vec![0usize; sources.len()];
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    let mut drawn = 0usize;
    while drawn < total_tokens {
        let s = pick.sample(&mut rng);
        let line = rng.random_range(0..sources[s].2.len());
        let len = lengths[s][line];
        draws[s] += 1;
        tokens[s] += len;
        drawn += len;
        let entry = (sources[s].1, sources[s].2[line].clone());
        if split_rng.random::<f64>() < heldout_fraction {
            heldout.push(entry);
        } else {
            train.push(entry);
        }
    }
    let provenance = SampleProvenance {
        seed,
        total_tokens,
        heldout_fraction,
        source_ids: sources.iter().map(|s| s.0.clone()).collect(),
        lambda: lambda.to_vec(),
        draws_per_source: draws,
        tokens_per_source: tokens,
        train_lines: train.len(),
        heldout_lines: heldout.len(),
    };
    Ok(SampledCorpus {
        train,
        heldout,
        provenance,
    })
}
