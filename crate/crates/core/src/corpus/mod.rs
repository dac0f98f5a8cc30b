//! Tokenization, vocabularies, source manifests and the synthetic
//! two-application corpus used by tests and demos.

mod manifest;
mod synthetic;
mod vocab;

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use manifest::{Manifest, SourceSpec, ALPHA_SUM_TOLERANCE};
pub use synthetic::{generate_synthetic, SyntheticCorpus, SyntheticSpec};
pub use vocab::{build_vocab, vocab_from_lines, Vocab, BOS, EOS, UNK};

/// The two applications served by one model: the virtual assistant and
/// speech-to-text dictation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ApplicationId {
    #[serde(rename = "VA")]
    Va,
    #[serde(rename = "STT")]
    Stt,
}

impl ApplicationId {
    pub const ALL: [ApplicationId; 2] = [ApplicationId::Va, ApplicationId::Stt];

    pub fn index(self) -> usize {
        match self {
            ApplicationId::Va => 0,
            ApplicationId::Stt => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ApplicationId::Va => "VA",
            ApplicationId::Stt => "STT",
        }
    }
}

impl fmt::Display for ApplicationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ApplicationId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "VA" | "va" => Ok(ApplicationId::Va),
            "STT" | "stt" => Ok(ApplicationId::Stt),
            other => Err(Error::Invalid(format!(
                "unknown application `{other}` (expected VA or STT)"
            ))),
        }
    }
}

/// One tokenized query. `tokens` never includes the sentence markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub tokens: Vec<u32>,
    pub application: ApplicationId,
}

/// Splits on Unicode whitespace. Punctuation stays attached as its own
/// token when the text separates it; nothing is case-folded.
pub fn tokenize(line: &str) -> Vec<&str> {
    line.split_whitespace().collect()
}

/// Non-empty lines of a UTF-8 corpus file.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .filter(|l| !tokenize(l).is_empty())
        .map(str::to_owned)
        .collect())
}

pub fn encode_lines<S: AsRef<str>>(
    vocab: &Vocab,
    lines: &[S],
    application: ApplicationId,
) -> Vec<Query> {
    lines
        .iter()
        .filter_map(|l| {
            let tokens = vocab.encode(tokenize(l.as_ref()));
            (!tokens.is_empty()).then_some(Query {
                tokens,
                application,
            })
        })
        .collect()
}

/// Reads a corpus file, tagging every query with `application`.
pub fn load_queries(
    vocab: &Vocab,
    path: impl AsRef<Path>,
    application: ApplicationId,
) -> Result<Vec<Query>> {
    Ok(encode_lines(vocab, &read_lines(path)?, application))
}

/// Path of the application-tag sidecar for a corpus file (`<file>.apps`).
pub fn tags_path(corpus: &Path) -> std::path::PathBuf {
    let mut name = corpus.as_os_str().to_owned();
    name.push(".apps");
    name.into()
}

/// Reads a corpus whose per-line application tags live in the `.apps`
/// sidecar (one `VA`/`STT` per line, aligned with the corpus lines).
pub fn load_tagged_queries(vocab: &Vocab, path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let tag_path = tags_path(path);
    let tags = fs::read_to_string(&tag_path).map_err(|e| Error::io(&tag_path, e))?;
    let mut tag_lines = tags.lines();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let tag = tag_lines.next().ok_or(Error::UntaggedQuery(i))?;
        let tag = tag.trim();
        if tag.is_empty() {
            return Err(Error::UntaggedQuery(i));
        }
        let application: ApplicationId = tag.parse()?;
        let tokens = vocab.encode(tokenize(line));
        if !tokens.is_empty() {
            out.push(Query {
                tokens,
                application,
            });
        }
    }
    Ok(out)
}

/// Writes corpus lines and their `.apps` sidecar.
pub fn write_tagged(path: &Path, lines: &[(ApplicationId, String)]) -> Result<()> {
    let mut text = String::new();
    let mut tags = String::new();
    for (app, line) in lines {
        text.push_str(line);
        text.push('\n');
        tags.push_str(app.as_str());
        tags.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let tag_path = tags_path(path);
    fs::write(&tag_path, tags).map_err(|e| Error::io(&tag_path, e))
}

/// Keeps whole queries from `queries` until `tokens` words have been taken
/// (the last query may overshoot by less than its own length).
pub fn take_tokens(queries: &[Query], tokens: usize) -> Vec<Query> {
    let mut taken = 0;
    let mut out = Vec::new();
    for q in queries {
        if taken >= tokens {
            break;
        }
        taken += q.tokens.len();
        out.push(q.clone());
    }
    out
}

/// Balanced development set: equal word counts of VA and STT data, the
/// larger side truncated to match the smaller within one query.
pub fn balanced_dev(va: &[Query], stt: &[Query]) -> Vec<Query> {
    let count = |qs: &[Query]| qs.iter().map(|q| q.tokens.len()).sum::<usize>();
    let budget = count(va).min(count(stt));
    let mut dev = take_tokens(va, budget);
    dev.extend(take_tokens(stt, budget));
    dev
}
