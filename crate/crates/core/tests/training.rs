mod common;

use common::*;
use fofe_lm::corpus::{ApplicationId, Query};
use fofe_lm::fofe::{self, Architecture, FofeConfig, FofeMode, FofeModel};
use fofe_lm::ngram::NGramLM;
use fofe_lm::training::{train, train_ad, Preset, TrainConfig};
use fofe_lm::{Error, Execution};

fn small_config(v: usize) -> FofeConfig {
    FofeConfig {
        vocab_size: v,
        embed_dim: 16,
        hidden_dim: 32,
        num_ff_layers: 2,
        context_n: 4,
        forgetting_factor: 0.7,
        mode: FofeMode::Original,
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        max_epochs: epochs,
        seed: 5,
        ..TrainConfig::desk(Preset::AaFofe)
    }
}

fn heldout(f: &Fixture) -> Vec<Query> {
    f.va_dev.iter().chain(&f.stt_dev).cloned().collect()
}

#[test]
fn identical_seeds_give_identical_runs() {
    let f = synthetic_fixture(600, 200, 80, 1);
    let v = f.vocab.len();
    let run = |exec| {
        let m = FofeModel::<f32>::new(small_config(v), Architecture::Mixture { experts: 2 }, f.vocab.hash(), 3).unwrap();
        train(m, &f.train, &heldout(&f), &quick(3), exec).unwrap()
    };
    let a = run(Execution::Parallel);
    let b = run(Execution::Parallel);
    let c = run(Execution::Sequential);
    assert_eq!(a.history, b.history);
    assert_eq!(fofe::to_bytes(&a.last), fofe::to_bytes(&b.last));
    assert_eq!(a.history, c.history);
    assert_eq!(fofe::to_bytes(&a.last), fofe::to_bytes(&c.last));
    assert_eq!(fofe::to_bytes(&a.best), fofe::to_bytes(&c.best));
    assert_eq!(a.history.epochs.len(), 3);
}

#[test]
fn va_only_corpus_leaves_stt_subnet_untouched() {
    let f = synthetic_fixture(400, 100, 60, 2);
    let va: Vec<Query> = f.train.iter().filter(|q| q.application == ApplicationId::Va).cloned().collect();
    let m = FofeModel::<f32>::new(small_config(f.vocab.len()), Architecture::AppDependent, f.vocab.hash(), 9).unwrap();
    let init = m.clone();
    let out = train_ad(m, &va, &f.va_dev, &quick(2), Execution::default()).unwrap();
    for id in init.app_parameter_ids(ApplicationId::Stt) {
        assert_eq!(out.last.params().value(id), init.params().value(id));
    }
    for id in init.app_parameter_ids(ApplicationId::Va) {
        assert_ne!(out.last.params().value(id), init.params().value(id));
    }
    assert_ne!(out.last.embedding(), init.embedding());
}

#[test]
fn train_ad_rejects_other_architectures() {
    let f = synthetic_fixture(100, 50, 40, 2);
    let m = FofeModel::<f32>::new(small_config(f.vocab.len()), Architecture::Base, 0, 1).unwrap();
    assert!(train_ad(m, &f.train, &f.va_dev, &quick(1), Execution::Sequential).is_err());
}

#[test]
fn nce_loss_decreases_early() {
    let f = synthetic_fixture(1500, 500, 150, 4);
    let m = FofeModel::<f32>::new(small_config(f.vocab.len()), Architecture::Base, f.vocab.hash(), 2).unwrap();
    let out = train(m, &f.train, &heldout(&f), &quick(5), Execution::default()).unwrap();
    let losses: Vec<f64> = out.history.epochs.iter().map(|e| e.train_loss).collect();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] * 1.05, "{losses:?}");
    }
    assert!(losses[4] < losses[0]);
    // lr is held for the first epochs
    assert!(out.history.epochs.iter().all(|e| e.lr == 0.1));
}

#[test]
fn tiny_base_beats_unigram() {
    // ~50k tokens, V = 200
    let f = synthetic_fixture(4000, 2000, 197, 42);
    let v = f.vocab.len();
    assert_eq!(v, 200);
    let dev = heldout(&f);
    let unigram = NGramLM::train_queries(&f.train, v, 1, 0.75).unwrap().perplexity(&dev).unwrap();
    let m = FofeModel::<f32>::new(small_config(v), Architecture::Base, f.vocab.hash(), 1).unwrap();
    let out = train(m, &f.train, &dev, &quick(20), Execution::default()).unwrap();
    let last = out.history.epochs.last().unwrap().heldout_ppl;
    assert!(last < 0.7 * unigram, "{last} vs unigram {unigram}");
}

#[test]
fn non_finite_parameters_abort_with_coordinates() {
    let f = synthetic_fixture(100, 50, 40, 2);
    let mut m = FofeModel::<f32>::new(small_config(f.vocab.len()), Architecture::Base, 0, 1).unwrap();
    m.embedding_mut().fill(f32::NAN);
    let err = train(m, &f.train, &f.va_dev, &quick(1), Execution::Sequential).unwrap_err();
    assert!(matches!(err, Error::Diverged { epoch: 1, batch: 0 }), "{err:?}");
}

#[test]
fn invalid_config_is_rejected() {
    let f = synthetic_fixture(100, 50, 40, 2);
    let m = FofeModel::<f32>::new(small_config(f.vocab.len()), Architecture::Base, 0, 1).unwrap();
    let bad = TrainConfig {
        decay_factor: 1.5,
        ..quick(1)
    };
    assert!(matches!(
        train(m, &f.train, &f.va_dev, &bad, Execution::Sequential),
        Err(Error::Config(_))
    ));
}
