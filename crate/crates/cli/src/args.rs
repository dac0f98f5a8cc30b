use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fofe_lm::corpus::SyntheticSpec;
use serde::{Deserialize, Serialize};

use crate::config::CommandArgs;

#[derive(Debug, Parser)]
#[command(
    name = "fofelm",
    version,
    about = "FOFE language models with application-balanced training data",
    after_help = "Every subcommand accepts --config <FILE> (TOML, schema_version = 1, one table per \
                  subcommand) and --seed. Flags override the file. Relative output paths are \
                  placed under $FOFELM_OUT_DIR when it is set.\n\nExit codes: 0 success, 1 runtime \
                  error, 2 usage error, 3 invalid configuration."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a vocabulary from the most frequent words of one or more corpora
    BuildVocab(BuildVocabArgs),
    /// Train an absolute-discounting n-gram model
    TrainNgram(TrainNgramArgs),
    /// Fit VA/STT interpolation masses on a balanced dev set by EM
    OptimizeInterpolation(OptimizeInterpolationArgs),
    /// Derive balanced per-source sampling weights from a manifest
    Balance(BalanceArgs),
    /// Sample tagged train and heldout corpora from the manifest sources
    Sample(SampleArgs),
    /// Train a FOFE language model
    Train(TrainArgs),
    /// Report perplexity of a FOFE model on test sets
    EvalPpl(EvalPplArgs),
    /// Measure per-query scoring latency of a FOFE model
    Bench(BenchArgs),
    /// Compare analytic and finite-difference gradients
    Gradcheck(GradcheckArgs),
    /// Print architecture, dimensions and parameters of a model file
    Describe(DescribeArgs),
    /// Count parameters for an architecture and dimensions
    Params(ParamsArgs),
    /// Write a seeded two-application synthetic corpus and manifest
    GenSynthetic(GenSyntheticArgs),
}

pub const COMMAND_NAMES: [&str; 12] = [
    "build-vocab",
    "train-ngram",
    "optimize-interpolation",
    "balance",
    "sample",
    "train",
    "eval-ppl",
    "bench",
    "gradcheck",
    "describe",
    "params",
    "gen-synthetic",
];

macro_rules! command_args {
    ($ty:ty, $name:literal, $defaults:expr) => {
        impl CommandArgs for $ty {
            const NAME: &'static str = $name;

            fn defaults() -> Self {
                $defaults
            }

            fn config_path(&self) -> Option<&Path> {
                self.config.as_deref()
            }

            fn set_config_path(&mut self, path: Option<PathBuf>) {
                self.config = path;
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BuildVocabArgs {
    /// Corpus files to count (repeatable)
    #[arg(long, num_args = 1..)]
    pub corpus: Option<Vec<PathBuf>>,
    /// Number of most frequent words kept besides <unk>, <s> and </s> [default: 99997]
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Output vocabulary file [default: vocab.txt]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded in the run (vocabulary building is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    BuildVocabArgs,
    "build-vocab",
    BuildVocabArgs {
        top_k: Some(99_997),
        out: Some("vocab.txt".into()),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainNgramArgs {
    /// Vocabulary file
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Training corpus files (repeatable)
    #[arg(long, num_args = 1..)]
    pub corpus: Option<Vec<PathBuf>>,
    /// Model order [default: 3]
    #[arg(long)]
    pub order: Option<usize>,
    /// Absolute discount in (0, 1) [default: 0.75]
    #[arg(long)]
    pub discount: Option<f64>,
    /// Optional plain dev corpus to report perplexity on
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Output model file [default: ngram.bin]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded in the run (n-gram training is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    TrainNgramArgs,
    "train-ngram",
    TrainNgramArgs {
        order: Some(3),
        discount: Some(0.75),
        out: Some("ngram.bin".into()),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OptimizeInterpolationArgs {
    /// Vocabulary file shared by both models
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// VA n-gram model
    #[arg(long)]
    pub lm_va: Option<PathBuf>,
    /// STT n-gram model
    #[arg(long)]
    pub lm_stt: Option<PathBuf>,
    /// VA dev corpus
    #[arg(long)]
    pub dev_va: Option<PathBuf>,
    /// STT dev corpus
    #[arg(long)]
    pub dev_stt: Option<PathBuf>,
    /// EM stops when the VA mass moves less than this [default: 1e-6]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// EM iteration cap [default: 200]
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Starting VA mass [default: 0.5]
    #[arg(long)]
    pub init_va: Option<f64>,
    /// Seed recorded in the run (EM is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    OptimizeInterpolationArgs,
    "optimize-interpolation",
    OptimizeInterpolationArgs {
        tolerance: Some(1e-6),
        max_iterations: Some(200),
        init_va: Some(0.5),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BalanceArgs {
    /// Source manifest (TOML, [[source]] entries with id, path, application, alpha)
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// VA dev corpus
    #[arg(long)]
    pub dev_va: Option<PathBuf>,
    /// STT dev corpus
    #[arg(long)]
    pub dev_stt: Option<PathBuf>,
    /// Vocabulary file; built from the manifest sources when absent
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Vocabulary size when building one [default: 99997]
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Order of the per-application n-gram models [default: 3]
    #[arg(long)]
    pub order: Option<usize>,
    /// Absolute discount of the per-application n-gram models [default: 0.75]
    #[arg(long)]
    pub discount: Option<f64>,
    /// Write the balance solution as JSON here (input to `sample --balance`)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded in the run (balancing is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    BalanceArgs,
    "balance",
    BalanceArgs {
        top_k: Some(99_997),
        order: Some(3),
        discount: Some(0.75),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SampleArgs {
    /// Source manifest
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Balance solution written by `balance --out`; weights default to the manifest alphas
    #[arg(long)]
    pub balance: Option<PathBuf>,
    /// Words to draw in total (train plus heldout) [default: 1000000]
    #[arg(long)]
    pub tokens: Option<usize>,
    /// Probability that a draw goes to heldout [default: 0.1]
    #[arg(long)]
    pub heldout_fraction: Option<f64>,
    /// Output directory for train.txt, heldout.txt, their .apps sidecars and provenance.json [default: sampled]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Sampling seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    SampleArgs,
    "sample",
    SampleArgs {
        tokens: Some(1_000_000),
        heldout_fraction: Some(0.1),
        out_dir: Some("sampled".into()),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TrainArgs {
    /// as-fofe, aa-fofe, aa-mixture or ad-fofe [default: aa-fofe]
    #[arg(long)]
    pub preset: Option<String>,
    /// Hyperparameter profile: desk (corpora of ~10^5 words) or full (full-size models and schedule) [default: desk]
    #[arg(long)]
    pub profile: Option<String>,
    /// Vocabulary file
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Tagged training corpus (with a .apps sidecar, as written by `sample`)
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Tagged heldout corpus used for the learning-rate schedule and checkpointing
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Application kept by as-fofe (VA or STT)
    #[arg(long)]
    pub app: Option<String>,
    /// Output model file [default: model.fflm]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Word embedding size [profile default]
    #[arg(long)]
    pub embed: Option<usize>,
    /// Hidden size; mixture and ad-fofe default to the base model's parameter budget [profile default]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Feed-forward layers per sub-network [profile default]
    #[arg(long)]
    pub layers: Option<usize>,
    /// FOFE context order [profile default]
    #[arg(long)]
    pub context_n: Option<usize>,
    /// FOFE forgetting factor in (0, 1] [default: 0.7]
    #[arg(long)]
    pub forgetting: Option<f64>,
    /// Maximum epochs [preset default]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Initial learning rate [preset default]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs before the learning rate may decay [preset default]
    #[arg(long)]
    pub hold: Option<usize>,
    /// Consecutive heldout increases that trigger a decay [preset default]
    #[arg(long)]
    pub patience: Option<usize>,
    /// NCE noise samples; 0 trains with the full softmax [preset default]
    #[arg(long)]
    pub nce_k: Option<usize>,
    /// Minibatch size [preset default]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// parallel or sequential [default: parallel when built with the parallel feature]
    #[arg(long)]
    pub exec: Option<String>,
    /// Seed for initialisation, batch order and noise sampling [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    TrainArgs,
    "train",
    TrainArgs {
        preset: Some("aa-fofe".into()),
        profile: Some("desk".into()),
        out: Some("model.fflm".into()),
        forgetting: Some(0.7),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct EvalPplArgs {
    /// Model file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Vocabulary file the model was trained with
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Test corpora (repeatable); tagged via .apps sidecars unless --app is given
    #[arg(long, num_args = 1..)]
    pub test: Option<Vec<PathBuf>>,
    /// Treat every test line as this application (VA or STT)
    #[arg(long)]
    pub app: Option<String>,
    /// Words of history visible to the model; 0 means unlimited [default: 8]
    #[arg(long)]
    pub context_limit: Option<usize>,
    /// parallel or sequential [default: parallel when built with the parallel feature]
    #[arg(long)]
    pub exec: Option<String>,
    /// Seed recorded in the report (evaluation is deterministic) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    EvalPplArgs,
    "eval-ppl",
    EvalPplArgs {
        context_limit: Some(8),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BenchArgs {
    /// Model file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Vocabulary file the model was trained with
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Query corpus; tagged via its .apps sidecar unless --app is given
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Treat every query as this application (VA or STT)
    #[arg(long)]
    pub app: Option<String>,
    /// Timed passes over the queries [default: 3]
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Untimed queries scored first [default: 50]
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Words of history visible to the model; 0 means unlimited [default: 8]
    #[arg(long)]
    pub context_limit: Option<usize>,
    /// Earlier `bench` report (JSON line) to compute the P95 delta against
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Seed recorded in the report [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    BenchArgs,
    "bench",
    BenchArgs {
        repeats: Some(3),
        warmup: Some(50),
        context_limit: Some(8),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GradcheckArgs {
    /// base, mixture or app-dependent [default: base]
    #[arg(long)]
    pub arch: Option<String>,
    /// Mixture experts [default: 2]
    #[arg(long)]
    pub experts: Option<usize>,
    /// softmax or nce [default: softmax]
    #[arg(long)]
    pub objective: Option<String>,
    /// Noise samples for the nce objective [default: 8]
    #[arg(long)]
    pub nce_k: Option<usize>,
    /// Vocabulary size of the random model [default: 30]
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Embedding size [default: 8]
    #[arg(long)]
    pub embed: Option<usize>,
    /// Hidden size [default: 8]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Feed-forward layers [default: 2]
    #[arg(long)]
    pub layers: Option<usize>,
    /// FOFE context order [default: 3]
    #[arg(long)]
    pub context_n: Option<usize>,
    /// Random examples in the checked batch [default: 16]
    #[arg(long)]
    pub examples: Option<usize>,
    /// Application of the examples (VA or STT) [default: VA]
    #[arg(long)]
    pub app: Option<String>,
    /// Central-difference step; layer biases are drawn from U(-0.1, 0.1) [default: 1e-4]
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest acceptable relative error [default: 1e-4]
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Seed for the model and the examples [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    GradcheckArgs,
    "gradcheck",
    GradcheckArgs {
        arch: Some("base".into()),
        experts: Some(2),
        objective: Some("softmax".into()),
        nce_k: Some(8),
        vocab_size: Some(30),
        embed: Some(8),
        hidden: Some(8),
        layers: Some(2),
        context_n: Some(3),
        examples: Some(16),
        app: Some("VA".into()),
        step: Some(1e-4),
        tolerance: Some(1e-4),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DescribeArgs {
    /// Model file
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Seed recorded in the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    DescribeArgs,
    "describe",
    DescribeArgs {
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ParamsArgs {
    /// base, mixture or app-dependent; all three when absent
    #[arg(long)]
    pub arch: Option<String>,
    /// Mixture experts [default: 2]
    #[arg(long)]
    pub experts: Option<usize>,
    /// Vocabulary size [default: 100000]
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Embedding size [default: 256]
    #[arg(long)]
    pub embed: Option<usize>,
    /// Hidden size [default: 768 for base, 512 otherwise]
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Feed-forward layers [default: 4]
    #[arg(long)]
    pub layers: Option<usize>,
    /// FOFE context order [default: 8]
    #[arg(long)]
    pub context_n: Option<usize>,
    /// Pick the hidden size whose count is closest to this many parameters
    #[arg(long)]
    pub budget: Option<usize>,
    /// Seed recorded in the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    ParamsArgs,
    "params",
    ParamsArgs {
        experts: Some(2),
        vocab_size: Some(100_000),
        embed: Some(256),
        layers: Some(4),
        context_n: Some(8),
        seed: Some(0),
        ..Default::default()
    }
);

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GenSyntheticArgs {
    /// Output directory [default: synthetic]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// VA training queries [default: 12000]
    #[arg(long)]
    pub va_queries: Option<usize>,
    /// STT training queries [default: 4000]
    #[arg(long)]
    pub stt_queries: Option<usize>,
    /// VA dev queries [default: 1500]
    #[arg(long)]
    pub va_dev_queries: Option<usize>,
    /// STT dev queries [default: 500]
    #[arg(long)]
    pub stt_dev_queries: Option<usize>,
    /// Pseudo-word inventory size [default: 470]
    #[arg(long)]
    pub content_words: Option<usize>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run configuration file
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

command_args!(
    GenSyntheticArgs,
    "gen-synthetic",
    {
        let spec = SyntheticSpec::default();
        GenSyntheticArgs {
            out_dir: Some("synthetic".into()),
            va_queries: Some(spec.va_queries),
            stt_queries: Some(spec.stt_queries),
            va_dev_queries: Some(spec.va_dev_queries),
            stt_dev_queries: Some(spec.stt_dev_queries),
            content_words: Some(spec.content_words),
            seed: Some(0),
            config: None,
        }
    }
);
