//! Seeded generator for a two-application corpus: short command-like VA
//! queries and longer, punctuated STT dictation. Each application walks
//! its own sparse first-order Markov chain over a partially shared word
//! inventory, so the two unigram distributions differ and word order
//! carries real information.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Geometric;
use serde::{Deserialize, Serialize};

use super::{ApplicationId, Manifest, SourceSpec};
use crate::error::{Error, Result};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "so", "vi", "pe", "du", "ga", "ho", "ji", "bu", "ze", "fa",
];
const VA_STARTERS: [&str; 8] = [
    "call", "text", "play", "what", "set", "open", "navigate", "remind",
];
const STT_STARTERS: [&str; 10] = ["i", "you", "the", "to", "a", "and", "it", "that", "is", "for"];
const STT_PUNCT: [&str; 2] = [",", "?"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub va_queries: usize,
    pub stt_queries: usize,
    pub va_dev_queries: usize,
    pub stt_dev_queries: usize,
    /// Size of the pseudo-word inventory shared (partially) by both chains.
    pub content_words: usize,
    pub va_mean_len: f64,
    pub stt_mean_len: f64,
    /// Successors per word in each chain.
    pub successors: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            va_queries: 12_000,
            stt_queries: 4_000,
            va_dev_queries: 1_500,
            stt_dev_queries: 500,
            content_words: 470,
            va_mean_len: 4.5,
            stt_mean_len: 13.0,
            successors: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub va_train: Vec<String>,
    pub stt_train: Vec<String>,
    pub va_dev: Vec<String>,
    pub stt_dev: Vec<String>,
}

struct Chain {
    words: Vec<usize>,
    starters: Vec<usize>,
    start_dist: WeightedIndex<f64>,
    next: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>>,
}

fn zipf(n: usize) -> WeightedIndex<f64> {
    WeightedIndex::new((0..n).map(|r| 1.0 / (r as f64 + 1.0))).expect("n >= 1")
}

fn pseudo_word(mut i: usize) -> String {
    let mut w = String::new();
    loop {
        w.push_str(SYLLABLES[i % SYLLABLES.len()]);
        i /= SYLLABLES.len();
        if i == 0 {
            break;
        }
    }
    // keep every pseudo-word at least two syllables so none collide with
    // the fixed English tokens
    if w.len() < 4 {
        w.push_str("n");
    }
    w
}

impl Chain {
    fn new(
        lexicon_len: usize,
        words: Vec<usize>,
        starters: Vec<usize>,
        successors: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let k = successors.min(words.len());
        let mut next = vec![None; lexicon_len];
        for &w in &words {
            let picks: Vec<usize> = sample(rng, words.len(), k)
                .into_iter()
                .map(|j| words[j])
                .collect();
            next[w] = Some((picks, zipf(k)));
        }
        let start_dist = zipf(starters.len());
        Chain {
            words,
            starters,
            start_dist,
            next,
        }
    }

    fn walk(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(len);
        let mut cur = self.starters[self.start_dist.sample(rng)];
        out.push(cur);
        while out.len() < len {
            let (succ, dist) = self.next[cur].as_ref().expect("chain word has successors");
            cur = succ[dist.sample(rng)];
            out.push(cur);
        }
        out
    }
}

/// Deterministic in `(spec, seed)`.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticCorpus> {
    if spec.content_words < 10 || spec.successors == 0 {
        return Err(Error::Config(
            "synthetic spec needs content_words >= 10 and successors >= 1".into(),
        ));
    }
    if spec.va_mean_len < 1.0 || spec.stt_mean_len < 2.0 {
        return Err(Error::Config("mean lengths too small".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut lexicon: Vec<String> = Vec::new();
    let mut add = |w: String| {
        lexicon.push(w);
        lexicon.len() - 1
    };
    let va_start: Vec<usize> = VA_STARTERS.iter().map(|w| add(w.to_string())).collect();
    let stt_start: Vec<usize> = STT_STARTERS.iter().map(|w| add(w.to_string())).collect();
    let punct: Vec<usize> = STT_PUNCT.iter().map(|w| add(w.to_string())).collect();
    let content: Vec<usize> = (0..spec.content_words)
        .map(|i| add(pseudo_word(i + SYLLABLES.len())))
        .collect();
    let period = add(".".to_string());

    let n = content.len();
    let va_words: Vec<usize> = va_start
        .iter()
        .copied()
        .chain(content[..n * 6 / 10].iter().copied())
        .collect();
    let stt_words: Vec<usize> = stt_start
        .iter()
        .chain(&punct)
        .copied()
        .chain(content[n * 3 / 10..].iter().copied())
        .collect();
    let va = Chain::new(lexicon.len(), va_words, va_start, spec.successors, &mut rng);
    let stt = Chain::new(lexicon.len(), stt_words, stt_start, spec.successors, &mut rng);
    debug_assert!(va.words.len() + stt.words.len() > 0);

    let va_len = Geometric::new(1.0 / spec.va_mean_len).expect("valid p");
    let stt_len = Geometric::new(1.0 / (spec.stt_mean_len - 1.0)).expect("valid p");

    let gen_va = |count: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..count)
            .map(|_| {
                let len = (1 + va_len.sample(rng) as usize).min(25);
                let ids = va.walk(len, rng);
                ids.iter().map(|&i| lexicon[i].as_str()).collect::<Vec<_>>().join(" ")
            })
            .collect()
    };
    let va_train = gen_va(spec.va_queries, &mut rng);
    let va_dev = gen_va(spec.va_dev_queries, &mut rng);

    let gen_stt = |count: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
        (0..count)
            .map(|_| {
                let len = (1 + stt_len.sample(rng) as usize).min(60);
                let mut ids = stt.walk(len, rng);
                ids.push(period);
                ids.iter().map(|&i| lexicon[i].as_str()).collect::<Vec<_>>().join(" ")
            })
            .collect()
    };
    let stt_train = gen_stt(spec.stt_queries, &mut rng);
    let stt_dev = gen_stt(spec.stt_dev_queries, &mut rng);

    Ok(SyntheticCorpus {
        va_train,
        stt_train,
        va_dev,
        stt_dev,
    })
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn token_count(lines: &[String]) -> usize {
    lines.iter().map(|l| super::tokenize(l).len()).sum()
}

impl SyntheticCorpus {
    /// Writes `va.txt`, `stt.txt`, `va_dev.txt`, `stt_dev.txt` and a
    /// `manifest.toml` whose alphas are proportional to source word counts.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_lines(&dir.join("va.txt"), &self.va_train)?;
        write_lines(&dir.join("stt.txt"), &self.stt_train)?;
        write_lines(&dir.join("va_dev.txt"), &self.va_dev)?;
        write_lines(&dir.join("stt_dev.txt"), &self.stt_dev)?;

        let va = token_count(&self.va_train) as f64;
        let stt = token_count(&self.stt_train) as f64;
        let va_alpha = va / (va + stt);
        let manifest = Manifest::new(vec![
            SourceSpec {
                id: "va".into(),
                path: "va.txt".into(),
                application: ApplicationId::Va,
                alpha: va_alpha,
            },
            SourceSpec {
                id: "stt".into(),
                path: "stt.txt".into(),
                application: ApplicationId::Stt,
                alpha: 1.0 - va_alpha,
            },
        ])?;
        let path = dir.join("manifest.toml");
        fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn unigram(lines: &[String]) -> HashMap<&str, f64> {
        let mut h = HashMap::new();
        let mut total = 0.0;
        for l in lines {
            for t in super::super::tokenize(l) {
                *h.entry(t).or_insert(0.0) += 1.0;
                total += 1.0;
            }
        }
        h.values_mut().for_each(|v| *v /= total);
        h
    }

    fn mean_len(lines: &[String]) -> f64 {
        token_count(lines) as f64 / lines.len() as f64
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SyntheticSpec {
            va_queries: 200,
            stt_queries: 100,
            ..Default::default()
        };
        let a = generate_synthetic(&spec, 1).unwrap();
        let b = generate_synthetic(&spec, 1).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&spec, 2).unwrap();
        assert_ne!(a.va_train, c.va_train);

        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        a.write(d1.path()).unwrap();
        b.write(d2.path()).unwrap();
        for f in ["va.txt", "stt.txt", "va_dev.txt", "stt_dev.txt", "manifest.toml"] {
            assert_eq!(
                fs::read(d1.path().join(f)).unwrap(),
                fs::read(d2.path().join(f)).unwrap(),
                "{f}"
            );
        }
    }

    #[test]
    fn va_shorter_and_distributions_differ() {
        let c = generate_synthetic(&SyntheticSpec::default(), 1).unwrap();
        assert!(mean_len(&c.va_train) < mean_len(&c.stt_train));

        let pv = unigram(&c.va_train);
        let ps = unigram(&c.stt_train);
        let mut keys: Vec<&str> = pv.keys().chain(ps.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        let tv: f64 = 0.5
            * keys
                .iter()
                .map(|k| (pv.get(k).unwrap_or(&0.0) - ps.get(k).unwrap_or(&0.0)).abs())
                .sum::<f64>();
        assert!(tv > 0.1, "tv distance {tv}");
    }

    #[test]
    fn manifest_written_and_valid() {
        let spec = SyntheticSpec {
            va_queries: 50,
            stt_queries: 20,
            va_dev_queries: 5,
            stt_dev_queries: 5,
            ..Default::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let m = generate_synthetic(&spec, 3).unwrap().write(dir.path()).unwrap();
        let manifest = Manifest::load(m).unwrap();
        assert_eq!(manifest.sources.len(), 2);
    }

    #[test]
    fn pseudo_words_are_unique() {
        let words: std::collections::HashSet<_> = (16..16 + 600).map(pseudo_word).collect();
        assert_eq!(words.len(), 600);
    }
}
