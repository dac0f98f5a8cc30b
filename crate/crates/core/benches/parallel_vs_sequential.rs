use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fofe_lm::balancing::{optimize_interpolation, EmOptions};
use fofe_lm::corpus::{encode_lines, generate_synthetic, vocab_from_lines, ApplicationId, Query, SyntheticSpec, Vocab};
use fofe_lm::eval::corpus_logprob;
use fofe_lm::fofe::{Architecture, ExampleSet, FofeConfig, FofeMode, FofeModel, NceHead};
use fofe_lm::ngram::NGramLM;
use fofe_lm::training::{minibatch_gradient, target_counts};
use fofe_lm::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

struct Data {
    vocab: Vocab,
    va: Vec<Query>,
    stt: Vec<Query>,
}

fn data() -> Data {
    let spec = SyntheticSpec {
        va_queries: 3000,
        stt_queries: 1000,
        va_dev_queries: 300,
        stt_dev_queries: 100,
        ..SyntheticSpec::default()
    };
    let c = generate_synthetic(&spec, 1).unwrap();
    let vocab = vocab_from_lines(c.va_train.iter().chain(&c.stt_train).map(String::as_str), 1000).unwrap();
    Data {
        va: encode_lines(&vocab, &c.va_train, ApplicationId::Va),
        stt: encode_lines(&vocab, &c.stt_train, ApplicationId::Stt),
        vocab,
    }
}

fn model(v: usize, hash: u64) -> FofeModel<f32> {
    let cfg = FofeConfig {
        vocab_size: v,
        embed_dim: 64,
        hidden_dim: 128,
        num_ff_layers: 2,
        context_n: 4,
        forgetting_factor: 0.7,
        mode: FofeMode::Original,
    };
    FofeModel::new(cfg, Architecture::Base, hash, 1).unwrap()
}

fn bench_gradient(c: &mut Criterion) {
    let d = data();
    let v = d.vocab.len();
    let m = model(v, d.vocab.hash());
    let set = ExampleSet::from_queries(&d.va, Some(8));
    let batch: Vec<usize> = (0..512).collect();
    let head = NceHead::from_counts(&target_counts(&d.va, v), 64).unwrap();
    let mut g = c.benchmark_group("minibatch_gradient");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("softmax", name), |b| {
            b.iter(|| minibatch_gradient(&m, &set, &batch, None, 0, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("nce", name), |b| {
            b.iter(|| minibatch_gradient(&m, &set, &batch, Some(&head), 0, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_perplexity(c: &mut Criterion) {
    let d = data();
    let m = model(d.vocab.len(), d.vocab.hash());
    let queries = &d.stt[..400];
    let mut g = c.benchmark_group("heldout_logprob");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(name, |b| b.iter(|| corpus_logprob(&m, queries, Some(8), exec).unwrap()));
    }
    g.finish();
}

fn bench_em(c: &mut Criterion) {
    let d = data();
    let v = d.vocab.len();
    let lm_va = NGramLM::train_queries(&d.va, v, 3, 0.75).unwrap();
    let lm_stt = NGramLM::train_queries(&d.stt, v, 3, 0.75).unwrap();
    let dev: Vec<Query> = d.va[..500].iter().chain(&d.stt[..200]).cloned().collect();
    let mut g = c.benchmark_group("em_interpolation");
    g.sample_size(20);
    for (name, exec) in MODES {
        g.bench_function(name, |b| {
            b.iter(|| {
                optimize_interpolation(&lm_va, &lm_stt, &dev, EmOptions { exec, ..EmOptions::default() }).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_gradient, bench_perplexity, bench_em);
criterion_main!(benches);
