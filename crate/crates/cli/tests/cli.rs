use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const COMMANDS: [&str; 12] = [
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

fn fofelm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fofelm"))
        .args(args)
        .current_dir(dir)
        .env_remove("FOFELM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn records(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("bad record {l:?}: {e}")))
        .collect()
}

fn of_kind<'a>(recs: &'a [Value], kind: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["record"] == kind).collect()
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .unwrap_or_else(|| panic!("no error record in {stderr}"));
    serde_json::from_str(line).unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Small synthetic corpus, vocabulary and sampled tagged corpora.
fn pipeline(dir: &Path) {
    assert_ok(&fofelm(
        dir,
        &[
            "gen-synthetic", "--out-dir", "syn", "--va-queries", "600", "--stt-queries", "250",
            "--va-dev-queries", "80", "--stt-dev-queries", "30", "--seed", "3",
        ],
    ));
    assert_ok(&fofelm(
        dir,
        &["build-vocab", "--corpus", "syn/va.txt", "syn/stt.txt", "--top-k", "200", "--out", "vocab.txt"],
    ));
    assert_ok(&fofelm(
        dir,
        &[
            "balance", "--manifest", "syn/manifest.toml", "--dev-va", "syn/va_dev.txt",
            "--dev-stt", "syn/stt_dev.txt", "--vocab", "vocab.txt", "--out", "balance.json",
        ],
    ));
    assert_ok(&fofelm(
        dir,
        &[
            "sample", "--manifest", "syn/manifest.toml", "--balance", "balance.json",
            "--tokens", "5000", "--seed", "1", "--out-dir", "sampled",
        ],
    ));
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

#[test]
fn help_output_matches_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut names: Vec<Option<&str>> = vec![None];
    names.extend(COMMANDS.iter().map(|c| Some(*c)));
    for name in names {
        let out = match name {
            Some(c) => fofelm(dir.path(), &[c, "--help"]),
            None => fofelm(dir.path(), &["--help"]),
        };
        assert_ok(&out);
        let text = String::from_utf8(out.stdout).unwrap();
        let file = golden_dir().join(format!("{}.txt", name.unwrap_or("fofelm")));
        if update {
            fs::write(&file, &text).unwrap();
            continue;
        }
        let expected = fs::read_to_string(&file)
            .unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", file.display()));
        assert_eq!(text, expected, "help for {name:?} drifted from {}", file.display());
        // every flag of the subcommand is documented
        if name.is_some() {
            assert!(text.contains("--seed") && text.contains("--config"));
        }
    }
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fofelm(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage:"));
    let err = error_record(&out);
    assert_eq!(err["exit_code"], 2);
    assert_eq!(err["kind"], "usage");
}

#[test]
fn missing_required_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = fofelm(dir.path(), &["balance", "--dev-va", "x.txt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("--manifest"));
}

#[test]
fn balance_prints_weights_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&fofelm(d, &["gen-synthetic", "--out-dir", "syn", "--va-queries", "400", "--stt-queries", "200", "--seed", "5"]));
    let out = fofelm(
        d,
        &["balance", "--manifest", "syn/manifest.toml", "--dev-va", "syn/va_dev.txt", "--dev-stt", "syn/stt_dev.txt"],
    );
    assert_ok(&out);
    let recs = records(&out);
    assert_eq!(recs[0]["record"], "config");
    assert_eq!(recs[0]["config"]["manifest"], "syn/manifest.toml");

    let sources = of_kind(&recs, "source");
    assert_eq!(sources.len(), 2);
    let lambda_sum: f64 = sources.iter().map(|s| s["lambda"].as_f64().unwrap()).sum();
    assert!((lambda_sum - 1.0).abs() < 1e-12);
    let apps = of_kind(&recs, "application");
    assert_eq!(apps.len(), 2);
    for a in &apps {
        let (ab, b, g) = (
            a["alpha_bar"].as_f64().unwrap(),
            a["beta"].as_f64().unwrap(),
            a["gamma"].as_f64().unwrap(),
        );
        assert_eq!(g, b / ab);
    }
    let summary = of_kind(&recs, "balance")[0];
    assert!(summary["em_iterations"].as_u64().unwrap() >= 1);
    assert!(
        summary["dev_perplexity_after"].as_f64().unwrap()
            <= summary["dev_perplexity_before"].as_f64().unwrap() + 1e-9
    );
    let table = String::from_utf8_lossy(&out.stderr);
    for col in ["alpha", "alpha_bar", "beta", "gamma", "lambda"] {
        assert!(table.contains(col), "table lacks {col}:\n{table}");
    }
}

#[test]
fn bad_manifest_alphas_exit_with_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("a.txt"), "call mom\n").unwrap();
    fs::write(d.join("b.txt"), "i will be late .\n").unwrap();
    fs::write(
        d.join("bad.txt"),
        "[[source]]\nid = \"a\"\npath = \"a.txt\"\napplication = \"VA\"\nalpha = 0.5\n\n\
         [[source]]\nid = \"b\"\npath = \"b.txt\"\napplication = \"STT\"\nalpha = 0.4\n",
    )
    .unwrap();
    let out = fofelm(d, &["sample", "--manifest", "bad.txt"]);
    assert_eq!(out.status.code(), Some(3));
    let err = error_record(&out);
    assert_eq!(err["kind"], "config");
    assert!(err["message"].as_str().unwrap().contains("sum to 1"), "{err}");
}

#[test]
fn train_is_reproducible_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let mut hashes = Vec::new();
    for out_name in ["a.fflm", "b.fflm"] {
        let out = fofelm(
            d,
            &[
                "train", "--preset", "ad-fofe", "--seed", "7", "--vocab", "vocab.txt",
                "--train", "sampled/train.txt", "--heldout", "sampled/heldout.txt",
                "--epochs", "2", "--embed", "8", "--hidden", "16", "--out", out_name,
            ],
        );
        assert_ok(&out);
        let recs = records(&out);
        assert_eq!(of_kind(&recs, "epoch").len(), 2);
        let model = of_kind(&recs, "model")[0];
        assert_eq!(model["architecture"]["kind"], "app-dependent");
        hashes.push(model["sha256"].as_str().unwrap().to_string());
    }
    assert_eq!(hashes[0], hashes[1]);
    assert_eq!(fs::read(d.join("a.fflm")).unwrap(), fs::read(d.join("b.fflm")).unwrap());

    // the emitted run file reproduces the model
    let out = fofelm(d, &["train", "--config", "a.fflm.config.toml", "--out", "c.fflm"]);
    assert_ok(&out);
    assert_eq!(of_kind(&records(&out), "model")[0]["sha256"], hashes[0].as_str());

    let out = fofelm(d, &["describe", "--model", "a.fflm"]);
    assert_ok(&out);
    let recs = records(&out);
    assert_eq!(of_kind(&recs, "model")[0]["sha256"], hashes[0].as_str());
    assert!(of_kind(&recs, "param").iter().any(|p| p["name"] == "output.bias.STT"));

    let out = fofelm(
        d,
        &["eval-ppl", "--model", "a.fflm", "--vocab", "vocab.txt", "--test", "sampled/heldout.txt", "--seed", "7"],
    );
    assert_ok(&out);
    let eval = records(&out).into_iter().find(|r| r["record"] == "eval").unwrap();
    assert_eq!(eval["model_sha256"], hashes[0].as_str());
    assert_eq!(eval["seed"], 7);
    assert!(eval["host"]["cpus"].as_u64().unwrap() >= 1);
    assert!(eval["perplexity"].as_f64().unwrap() > 1.0);

    let out = fofelm(
        d,
        &["bench", "--model", "a.fflm", "--vocab", "vocab.txt", "--queries", "sampled/heldout.txt", "--warmup", "2", "--repeats", "2"],
    );
    assert_ok(&out);
    let bench = records(&out).into_iter().find(|r| r["record"] == "bench").unwrap();
    assert_eq!(bench["repeats"].as_array().unwrap().len(), 2);
}

#[test]
fn eval_rejects_a_foreign_vocabulary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    assert_ok(&fofelm(
        d,
        &[
            "train", "--preset", "aa-fofe", "--vocab", "vocab.txt", "--train", "sampled/train.txt",
            "--heldout", "sampled/heldout.txt", "--epochs", "1", "--embed", "8", "--hidden", "8",
        ],
    ));
    assert_ok(&fofelm(d, &["build-vocab", "--corpus", "syn/stt.txt", "--top-k", "50", "--out", "other.txt"]));
    let out = fofelm(
        d,
        &["eval-ppl", "--model", "model.fflm", "--vocab", "other.txt", "--test", "sampled/heldout.txt"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_record(&out)["code"], 53);
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "schema_version = 1\n\n[params]\narch = \"base\"\nvocab-size = 500\nembed = 16\nhidden = 64\n\n\
         [train]\npreset = \"aa-mixture\"\n",
    )
    .unwrap();
    let out = fofelm(d, &["params", "--config", "run.toml", "--hidden", "32", "--layers", "2", "--context-n", "4"]);
    assert_ok(&out);
    let recs = records(&out);
    let cfg = &recs[0]["config"];
    assert_eq!(cfg["vocab-size"], 500);
    assert_eq!(cfg["hidden"], 32);
    let p = of_kind(&recs, "params")[0];
    // V·E + (nE·H + H) + (H² + H) + H·E + E + V
    assert_eq!(p["parameters"], 500 * 16 + (64 * 32 + 32) + (32 * 32 + 32) + 32 * 16 + 16 + 500);
}

#[test]
fn config_file_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cases = [
        ("unknown.toml", "schema_version = 1\n[params]\nwidth = 3\n"),
        ("version.toml", "schema_version = 9\n[params]\nembed = 3\n"),
        ("table.toml", "schema_version = 1\n[paramz]\nembed = 3\n"),
        ("noversion.toml", "[params]\nembed = 3\n"),
    ];
    for (name, text) in cases {
        fs::write(d.join(name), text).unwrap();
        let out = fofelm(d, &["params", "--config", name]);
        assert_eq!(out.status.code(), Some(3), "{name}");
        assert_eq!(error_record(&out)["kind"], "config");
    }
    let out = fofelm(d, &["train", "--preset", "bogus"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn out_dir_variable_relocates_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("c.txt"), "a b b c c c\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fofelm"))
        .args(["build-vocab", "--corpus", "c.txt", "--out", "v.txt"])
        .current_dir(d)
        .env("FOFELM_OUT_DIR", "artifacts")
        .output()
        .unwrap();
    assert_ok(&out);
    assert!(d.join("artifacts/v.txt").exists());
    assert!(d.join("artifacts/v.txt.config.toml").exists());
    assert!(!d.join("v.txt").exists());
}

#[test]
fn gradcheck_passes_on_random_models() {
    let dir = tempfile::tempdir().unwrap();
    for arch in ["base", "mixture", "app-dependent"] {
        for objective in ["softmax", "nce"] {
            let out = fofelm(dir.path(), &["gradcheck", "--arch", arch, "--objective", objective, "--seed", "1"]);
            assert_ok(&out);
            let r = of_kind(&records(&out), "gradcheck")[0].clone();
            assert!(r["max_rel_error"].as_f64().unwrap() < 1e-4);
        }
    }
}
