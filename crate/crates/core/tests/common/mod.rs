#![allow(dead_code)]

use fofe_lm::corpus::{encode_lines, generate_synthetic, vocab_from_lines, ApplicationId, Query, SyntheticSpec, Vocab};
use fofe_lm::fofe::{Architecture, ExampleSet, FofeConfig, FofeMode, FofeModel};

pub fn tiny_config() -> FofeConfig {
    FofeConfig {
        vocab_size: 20,
        embed_dim: 8,
        hidden_dim: 8,
        num_ff_layers: 2,
        context_n: 2,
        forgetting_factor: 0.7,
        mode: FofeMode::Original,
    }
}

pub fn tiny_model(arch: Architecture, seed: u64) -> FofeModel<f64> {
    FofeModel::new(tiny_config(), arch, 0xabc, seed).unwrap()
}

pub fn all_architectures() -> [Architecture; 3] {
    [
        Architecture::Base,
        Architecture::Mixture { experts: 2 },
        Architecture::AppDependent,
    ]
}

/// A handful of short queries over ids 3..20 for one application.
pub fn tiny_examples(app: ApplicationId) -> ExampleSet {
    let qs = [vec![3, 4, 5], vec![9, 10, 11, 12, 13], vec![19], vec![7, 3, 3, 8]];
    let mut set = ExampleSet::new();
    for q in &qs {
        set.extend_query(q, app, None);
    }
    set
}

pub struct Fixture {
    pub vocab: Vocab,
    pub train: Vec<Query>,
    pub va_dev: Vec<Query>,
    pub stt_dev: Vec<Query>,
}

/// Seeded two-application corpus encoded against its own vocabulary.
pub fn synthetic_fixture(va: usize, stt: usize, top_k: usize, seed: u64) -> Fixture {
    let spec = SyntheticSpec {
        va_queries: va,
        stt_queries: stt,
        va_dev_queries: va / 8,
        stt_dev_queries: stt / 8,
        // enough distinct words to fill the requested vocabulary
        content_words: SyntheticSpec::default().content_words.max(top_k + 100),
        ..SyntheticSpec::default()
    };
    let c = generate_synthetic(&spec, seed).unwrap();
    let vocab = vocab_from_lines(
        c.va_train.iter().chain(&c.stt_train).map(String::as_str),
        top_k,
    )
    .unwrap();
    let mut train = encode_lines(&vocab, &c.va_train, ApplicationId::Va);
    train.extend(encode_lines(&vocab, &c.stt_train, ApplicationId::Stt));
    Fixture {
        va_dev: encode_lines(&vocab, &c.va_dev, ApplicationId::Va),
        stt_dev: encode_lines(&vocab, &c.stt_dev, ApplicationId::Stt),
        vocab,
        train,
    }
}
