use std::collections::HashMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::tokenize;
use crate::error::{Error, Result};

pub const UNK: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;

const RESERVED: [&str; 3] = ["<unk>", "<s>", "</s>"];

/// Dense word ↔ id mapping. Ids 0..3 are `<unk>`, `<s>`, `</s>`; the rest
/// are ordered by descending corpus frequency, ties by the word itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocab {
    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let mut words: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0; RESERVED.len()];
        for (w, c) in entries {
            if RESERVED.contains(&w.as_str()) {
                continue;
            }
            words.push(w);
            counts.push(c);
        }
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocab {
            words,
            counts,
            index,
        }
    }

    /// Vocabulary over `words` in the given order, with zero counts.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::from_entries(words.into_iter().map(|w| (w.into(), 0)).collect())
    }

    /// The `top_k` most frequent words, ties broken lexicographically.
    pub fn from_counts(counts: HashMap<String, u64>, top_k: usize) -> Self {
        let mut entries: Vec<(String, u64)> = counts
            .into_iter()
            .filter(|(w, _)| !RESERVED.contains(&w.as_str()))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        entries.truncate(top_k);
        Self::from_entries(entries)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id_of(&self, word: &str) -> u32 {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&str> {
        self.words.get(id as usize).map(String::as_str)
    }

    pub fn count_of(&self, id: u32) -> u64 {
        self.counts.get(id as usize).copied().unwrap_or(0)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn encode<'a, I: IntoIterator<Item = &'a str>>(&self, tokens: I) -> Vec<u32> {
        tokens.into_iter().map(|t| self.id_of(t)).collect()
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter()
            .map(|&i| self.word_of(i).unwrap_or("<unk>"))
            .collect()
    }

    /// First 8 bytes (little-endian) of SHA-256 over the newline-joined
    /// word list. Stored in model containers to catch vocab mismatches.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }

    /// One `word<TAB>count` line per id.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (w, c) in self.words.iter().zip(&self.counts) {
            out.push_str(w);
            out.push('\t');
            out.push_str(&c.to_string());
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (word, count) = match line.split_once('\t') {
                Some((w, c)) => (
                    w,
                    c.trim().parse::<u64>().map_err(|_| {
                        Error::Invalid(format!("{}:{}: bad count", path.display(), i + 1))
                    })?,
                ),
                None => (line, 0),
            };
            if i < RESERVED.len() {
                if word != RESERVED[i] {
                    return Err(Error::Invalid(format!(
                        "{}: line {} must be reserved token {}",
                        path.display(),
                        i + 1,
                        RESERVED[i]
                    )));
                }
                continue;
            }
            entries.push((word.to_string(), count));
        }
        Ok(Self::from_entries(entries))
    }
}

/// Counts tokens across all `corpora` and keeps the `top_k` most frequent.
pub fn build_vocab<P: AsRef<Path>>(corpora: &[P], top_k: usize) -> Result<Vocab> {
    let mut texts = Vec::with_capacity(corpora.len());
    for path in corpora {
        let path = path.as_ref();
        texts.push(fs::read_to_string(path).map_err(|e| Error::io(path, e))?);
    }
    vocab_from_lines(texts.iter().flat_map(|t| t.lines()), top_k)
}

/// [`build_vocab`] over in-memory lines.
pub fn vocab_from_lines<'a, I: IntoIterator<Item = &'a str>>(lines: I, top_k: usize) -> Result<Vocab> {
    if top_k == 0 {
        return Err(Error::Config("top_k must be at least 1".into()));
    }
    let mut counts: HashMap<String, u64> = HashMap::new();
    for line in lines {
        for tok in tokenize(line) {
            *counts.entry(tok.to_string()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::NoTokens);
    }
    Ok(Vocab::from_counts(counts, top_k))
}
