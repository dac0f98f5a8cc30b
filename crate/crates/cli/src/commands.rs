use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fofe_lm::balancing::{
    application_masses, balanced_weights, empty_applications, interpolation_perplexity,
    optimize_interpolation, sample_corpus, BalanceSolution, EmOptions,
};
use fofe_lm::corpus::{
    balanced_dev, build_vocab, encode_lines, generate_synthetic, load_queries, read_lines,
    vocab_from_lines, write_tagged, ApplicationId, Manifest, SyntheticSpec, Vocab, BOS,
};
use fofe_lm::eval::{
    bench_latency, host_descriptor, perplexity, BenchConfig, BenchReport, TestSet,
};
use fofe_lm::fofe::{
    self, hidden_for_budget, parameter_count, Architecture, ExampleSet, FofeConfig, FofeMode,
    FofeModel, NceHead, Objective,
};
use fofe_lm::ngram::NGramLM;
use fofe_lm::nn::GradCheckSample;
use fofe_lm::training::{train, Preset, TrainConfig};
use fofe_lm::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::args::*;
use crate::config::{prepare_output, resolve, write_run_file, CommandArgs};
use crate::error::{CliError, CliResult};

/// Prints one JSON record to stdout.
pub fn emit(record: &str, body: Value) {
    let mut obj = Map::new();
    obj.insert("record".into(), Value::String(record.into()));
    match body {
        Value::Object(m) => obj.extend(m),
        other => {
            obj.insert("value".into(), other);
        }
    }
    println!("{}", Value::Object(obj));
}

fn start<T: CommandArgs>(flags: T) -> CliResult<T> {
    let args = resolve(flags, &COMMAND_NAMES)?;
    emit(
        "config",
        json!({
            "command": T::NAME,
            "schema_version": crate::config::SCHEMA_VERSION,
            "config": args,
        }),
    );
    Ok(args)
}

fn req<'a, T>(value: &'a Option<T>, flag: &str) -> CliResult<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("missing required --{flag}")))
}

fn parse_app(s: &str) -> CliResult<ApplicationId> {
    ApplicationId::from_str(s).map_err(|e| CliError::Config(e.to_string()))
}

fn parse_exec(s: Option<&str>) -> CliResult<Execution> {
    match s {
        None => Ok(Execution::default()),
        Some("parallel") => Ok(Execution::Parallel),
        Some("sequential") => Ok(Execution::Sequential),
        Some(other) => Err(CliError::Config(format!(
            "unknown execution mode `{other}` (expected parallel or sequential)"
        ))),
    }
}

fn parse_arch(s: &str, experts: usize) -> CliResult<Architecture> {
    match s {
        "base" => Ok(Architecture::Base),
        "mixture" => Ok(Architecture::Mixture { experts }),
        "app-dependent" | "ad" => Ok(Architecture::AppDependent),
        other => Err(CliError::Config(format!(
            "unknown architecture `{other}` (expected base, mixture or app-dependent)"
        ))),
    }
}

fn limit(context_limit: Option<usize>) -> Option<usize> {
    context_limit.filter(|&n| n > 0)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn hex64(v: u64) -> String {
    format!("{v:016x}")
}

pub fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::BuildVocab(a) => build_vocab_cmd(start(a)?),
        Command::TrainNgram(a) => train_ngram_cmd(start(a)?),
        Command::OptimizeInterpolation(a) => optimize_interpolation_cmd(start(a)?),
        Command::Balance(a) => balance_cmd(start(a)?),
        Command::Sample(a) => sample_cmd(start(a)?),
        Command::Train(a) => train_cmd(start(a)?),
        Command::EvalPpl(a) => eval_ppl_cmd(start(a)?),
        Command::Bench(a) => bench_cmd(start(a)?),
        Command::Gradcheck(a) => gradcheck_cmd(start(a)?),
        Command::Describe(a) => describe_cmd(start(a)?),
        Command::Params(a) => params_cmd(start(a)?),
        Command::GenSynthetic(a) => gen_synthetic_cmd(start(a)?),
    }
}

fn build_vocab_cmd(a: BuildVocabArgs) -> CliResult<()> {
    let corpora = req(&a.corpus, "corpus")?;
    let vocab = build_vocab(corpora, *req(&a.top_k, "top-k")?)?;
    let out = prepare_output(req(&a.out, "out")?)?;
    vocab.save(&out)?;
    write_run_file(&out, &a)?;
    emit(
        "vocab",
        json!({"path": out, "size": vocab.len(), "hash": hex64(vocab.hash())}),
    );
    Ok(())
}

fn train_ngram_cmd(a: TrainNgramArgs) -> CliResult<()> {
    let vocab = Vocab::load(req(&a.vocab, "vocab")?)?;
    let mut queries = Vec::new();
    for path in req(&a.corpus, "corpus")? {
        queries.extend(load_queries(&vocab, path, ApplicationId::Va)?);
    }
    let order = *req(&a.order, "order")?;
    let lm = NGramLM::train_queries(&queries, vocab.len(), order, *req(&a.discount, "discount")?)?;
    let out = prepare_output(req(&a.out, "out")?)?;
    lm.save(&out)?;
    write_run_file(&out, &a)?;
    let dev_ppl = match &a.dev {
        Some(dev) => Some(lm.perplexity(&load_queries(&vocab, dev, ApplicationId::Va)?)?),
        None => None,
    };
    emit(
        "ngram",
        json!({
            "path": out,
            "order": order,
            "queries": queries.len(),
            "vocab_hash": hex64(vocab.hash()),
            "dev_perplexity": dev_ppl,
        }),
    );
    Ok(())
}

fn load_dev(vocab: &Vocab, va: &Path, stt: &Path) -> CliResult<Vec<fofe_lm::corpus::Query>> {
    let va = load_queries(vocab, va, ApplicationId::Va)?;
    let stt = load_queries(vocab, stt, ApplicationId::Stt)?;
    Ok(balanced_dev(&va, &stt))
}

fn optimize_interpolation_cmd(a: OptimizeInterpolationArgs) -> CliResult<()> {
    let vocab = Vocab::load(req(&a.vocab, "vocab")?)?;
    let lm_va = NGramLM::load(req(&a.lm_va, "lm-va")?)?;
    let lm_stt = NGramLM::load(req(&a.lm_stt, "lm-stt")?)?;
    let dev = load_dev(&vocab, req(&a.dev_va, "dev-va")?, req(&a.dev_stt, "dev-stt")?)?;
    let opts = EmOptions {
        tolerance: *req(&a.tolerance, "tolerance")?,
        max_iterations: *req(&a.max_iterations, "max-iterations")?,
        init_va: *req(&a.init_va, "init-va")?,
        exec: Execution::default(),
    };
    let fit = optimize_interpolation(&lm_va, &lm_stt, &dev, opts)?;
    emit("interpolation", serde_json::to_value(&fit).expect("fit serializes"));
    Ok(())
}

fn balance_cmd(a: BalanceArgs) -> CliResult<()> {
    let manifest = Manifest::load(req(&a.manifest, "manifest")?)?;
    let mut lines = Vec::with_capacity(manifest.sources.len());
    for s in &manifest.sources {
        lines.push(read_lines(&s.path)?);
    }
    let vocab = match &a.vocab {
        Some(path) => Vocab::load(path)?,
        None => vocab_from_lines(
            lines.iter().flatten().map(String::as_str),
            *req(&a.top_k, "top-k")?,
        )?,
    };
    for app in empty_applications(&manifest.sources) {
        eprintln!("warning: application {app} has no sources");
    }
    let (order, discount) = (*req(&a.order, "order")?, *req(&a.discount, "discount")?);
    let mut lms = Vec::with_capacity(2);
    for app in ApplicationId::ALL {
        let queries: Vec<_> = manifest
            .sources
            .iter()
            .zip(&lines)
            .filter(|(s, _)| s.application == app)
            .flat_map(|(_, l)| encode_lines(&vocab, l, app))
            .collect();
        if queries.is_empty() {
            return Err(fofe_lm::Error::EmptyApplication(app).into());
        }
        lms.push(NGramLM::train_queries(&queries, vocab.len(), order, discount)?);
    }
    let dev = load_dev(&vocab, req(&a.dev_va, "dev-va")?, req(&a.dev_stt, "dev-stt")?)?;
    let fit = optimize_interpolation(&lms[0], &lms[1], &dev, EmOptions::default())?;
    let alpha_bar = application_masses(&manifest.sources);
    let before =
        interpolation_perplexity(&lms[0], &lms[1], &dev, alpha_bar.va, Execution::default())?;
    let solution = balanced_weights(&manifest.sources, fit.beta)?;

    for (s, &lambda) in manifest.sources.iter().zip(&solution.lambda) {
        emit(
            "source",
            json!({"id": s.id, "application": s.application, "alpha": s.alpha, "lambda": lambda}),
        );
    }
    for app in ApplicationId::ALL {
        emit(
            "application",
            json!({
                "application": app,
                "alpha_bar": solution.alpha_bar.get(app),
                "beta": solution.beta.get(app),
                "gamma": solution.gamma.get(app),
            }),
        );
    }
    emit(
        "balance",
        json!({
            "em_iterations": fit.iterations,
            "converged": fit.converged,
            "dev_tokens": fit.dev_tokens,
            "dev_perplexity_before": before,
            "dev_perplexity_after": fit.perplexity,
            "vocab_size": vocab.len(),
            "vocab_hash": hex64(vocab.hash()),
        }),
    );

    eprintln!("{:<16} {:>4} {:>10} {:>10}", "source", "app", "alpha", "lambda");
    for (s, l) in manifest.sources.iter().zip(&solution.lambda) {
        eprintln!("{:<16} {:>4} {:>10.6} {:>10.6}", s.id, s.application.as_str(), s.alpha, l);
    }
    eprintln!("{:<8} {:>10} {:>10} {:>10}", "app", "alpha_bar", "beta", "gamma");
    for app in ApplicationId::ALL {
        eprintln!(
            "{:<8} {:>10.6} {:>10.6} {:>10.6}",
            app.as_str(),
            solution.alpha_bar.get(app),
            solution.beta.get(app),
            solution.gamma.get(app)
        );
    }
    eprintln!(
        "EM iterations {}, dev perplexity {before:.3} -> {:.3}",
        fit.iterations, fit.perplexity
    );

    if let Some(out) = &a.out {
        let out = prepare_output(out)?;
        let text = serde_json::to_string_pretty(&solution).expect("solution serializes");
        fs::write(&out, text).map_err(|e| CliError::io(&out, e))?;
        write_run_file(&out, &a)?;
    }
    Ok(())
}

fn sample_cmd(a: SampleArgs) -> CliResult<()> {
    let manifest = Manifest::load(req(&a.manifest, "manifest")?)?;
    let lambda: Vec<f64> = match &a.balance {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let solution: BalanceSolution = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            manifest
                .sources
                .iter()
                .map(|s| {
                    solution.lambda_of(&s.id).ok_or_else(|| {
                        CliError::Config(format!(
                            "balance solution has no weight for source `{}`",
                            s.id
                        ))
                    })
                })
                .collect::<CliResult<_>>()?
        }
        None => manifest.sources.iter().map(|s| s.alpha).collect(),
    };
    let seed = *req(&a.seed, "seed")?;
    let sampled = sample_corpus(
        &manifest.sources,
        &lambda,
        *req(&a.tokens, "tokens")?,
        *req(&a.heldout_fraction, "heldout-fraction")?,
        seed,
    )?;
    let dir = prepare_output(&req(&a.out_dir, "out-dir")?.join("train.txt"))?
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let (train_path, heldout_path) = (dir.join("train.txt"), dir.join("heldout.txt"));
    write_tagged(&train_path, &sampled.train)?;
    write_tagged(&heldout_path, &sampled.heldout)?;
    let prov_path = dir.join("provenance.json");
    let prov = serde_json::to_string_pretty(&sampled.provenance).expect("provenance serializes");
    fs::write(&prov_path, prov).map_err(|e| CliError::io(&prov_path, e))?;
    write_run_file(&dir.join("sample"), &a)?;
    let mut body = serde_json::to_value(&sampled.provenance).expect("provenance serializes");
    body["train"] = json!(train_path);
    body["heldout"] = json!(heldout_path);
    emit("sample", body);
    Ok(())
}

/// Model dimensions for a preset: the profile's defaults, flag overrides,
/// and for mixture / application-dependent models a hidden size matched to
/// the base model's parameter count unless `--hidden` is given.
fn model_config(a: &TrainArgs, arch: Architecture, vocab_size: usize, full: bool) -> FofeConfig {
    let mut base = if full {
        FofeConfig::full_size(Architecture::Base, vocab_size)
    } else {
        FofeConfig {
            vocab_size,
            embed_dim: 32,
            hidden_dim: 128,
            num_ff_layers: 2,
            context_n: 4,
            forgetting_factor: FofeConfig::DEFAULT_FORGETTING,
            mode: FofeMode::Original,
        }
    };
    base.embed_dim = a.embed.unwrap_or(base.embed_dim);
    base.num_ff_layers = a.layers.unwrap_or(base.num_ff_layers);
    base.context_n = a.context_n.unwrap_or(base.context_n);
    base.forgetting_factor = a.forgetting.unwrap_or(base.forgetting_factor);
    let hidden = match (a.hidden, arch, full) {
        (Some(h), _, _) => h,
        (None, Architecture::Base, _) => base.hidden_dim,
        (None, _, true) => FofeConfig::HIDDEN_SUBNET,
        (None, _, false) => {
            hidden_for_budget(&base, arch, parameter_count(&base, Architecture::Base))
        }
    };
    FofeConfig {
        hidden_dim: hidden,
        ..base
    }
}

fn train_cmd(a: TrainArgs) -> CliResult<()> {
    let preset = Preset::from_str(req(&a.preset, "preset")?)?;
    let full = match req(&a.profile, "profile")?.as_str() {
        "desk" => false,
        "full" => true,
        other => {
            return Err(CliError::Config(format!(
                "unknown profile `{other}` (expected desk or full)"
            )))
        }
    };
    let exec = parse_exec(a.exec.as_deref())?;
    let seed = *req(&a.seed, "seed")?;
    let vocab = Vocab::load(req(&a.vocab, "vocab")?)?;
    let mut train_q = fofe_lm::corpus::load_tagged_queries(&vocab, req(&a.train, "train")?)?;
    let mut heldout_q = fofe_lm::corpus::load_tagged_queries(&vocab, req(&a.heldout, "heldout")?)?;
    match (preset, &a.app) {
        (Preset::AsFofe, Some(app)) => {
            let app = parse_app(app)?;
            train_q.retain(|q| q.application == app);
            heldout_q.retain(|q| q.application == app);
        }
        (Preset::AsFofe, None) => {
            return Err(CliError::Config("as-fofe needs --app VA or --app STT".into()))
        }
        (_, Some(_)) => {
            return Err(CliError::Config(format!(
                "--app only applies to as-fofe, not {preset}"
            )))
        }
        (_, None) => {}
    }

    let arch = preset.architecture();
    let model_cfg = model_config(&a, arch, vocab.len(), full);
    let mut tc = if full {
        TrainConfig::full(preset)
    } else {
        TrainConfig::desk(preset)
    };
    tc.seed = seed;
    tc.max_epochs = a.epochs.unwrap_or(tc.max_epochs);
    tc.initial_lr = a.lr.unwrap_or(tc.initial_lr);
    tc.lr_hold_epochs = a.hold.unwrap_or(tc.lr_hold_epochs);
    tc.patience = a.patience.unwrap_or(tc.patience);
    tc.batch_size = a.batch_size.unwrap_or(tc.batch_size);
    if let Some(k) = a.nce_k {
        tc.nce_k = (k > 0).then_some(k);
    }
    tc.validate()?;

    let model = FofeModel::<f32>::new(model_cfg, arch, vocab.hash(), seed)?;
    let params = model.num_parameters();
    let outcome = train(model, &train_q, &heldout_q, &tc, exec)?;
    for e in &outcome.history.epochs {
        emit("epoch", serde_json::to_value(e).expect("epoch serializes"));
    }
    let out = prepare_output(req(&a.out, "out")?)?;
    fofe::save(&outcome.best, &out)?;
    write_run_file(&out, &a)?;
    emit(
        "model",
        json!({
            "path": out,
            "sha256": file_sha256(&out)?,
            "preset": preset,
            "architecture": arch,
            "model_config": model_cfg,
            "train_config": tc,
            "parameters": params,
            "best_epoch": outcome.history.best_epoch,
            "best_heldout_ppl": outcome.history.best_heldout_ppl,
            "vocab_hash": hex64(vocab.hash()),
        }),
    );
    Ok(())
}

fn load_model(path: &Path, vocab: &Vocab) -> CliResult<(FofeModel<f32>, String)> {
    let model = fofe::load(path, Some(vocab.hash()))?;
    Ok((model, file_sha256(path)?))
}

fn eval_ppl_cmd(a: EvalPplArgs) -> CliResult<()> {
    let vocab = Vocab::load(req(&a.vocab, "vocab")?)?;
    let model_path = req(&a.model, "model")?;
    let (model, sha) = load_model(model_path, &vocab)?;
    let app = a.app.as_deref().map(parse_app).transpose()?;
    let exec = parse_exec(a.exec.as_deref())?;
    let host = host_descriptor();
    let mut rows = Vec::new();
    for path in req(&a.test, "test")? {
        let test = TestSet::load(&vocab, path, app)?;
        let report = perplexity(&model, &test, limit(a.context_limit), exec)?;
        let mut body = serde_json::to_value(&report).expect("report serializes");
        body["model"] = json!(model_path);
        body["model_sha256"] = json!(sha);
        body["seed"] = json!(a.seed);
        body["host"] = serde_json::to_value(&host).expect("host serializes");
        emit("eval", body);
        rows.push(report);
    }
    eprintln!("{:<40} {:>8} {:>12} {:>8}", "test set", "tokens", "perplexity", "oov");
    for r in &rows {
        eprintln!(
            "{:<40} {:>8} {:>12.3} {:>7.2}%",
            r.test_set,
            r.tokens,
            r.perplexity,
            100.0 * r.oov_rate
        );
    }
    Ok(())
}

fn read_bench_report(path: &Path) -> CliResult<BenchReport> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).ok())
        .find(|v| v["record"] == "bench")
        .and_then(|v| serde_json::from_value(v).ok())
        .ok_or_else(|| {
            CliError::Config(format!("{}: no bench record found", path.display()))
        })
}

fn bench_cmd(a: BenchArgs) -> CliResult<()> {
    let vocab = Vocab::load(req(&a.vocab, "vocab")?)?;
    let model_path = req(&a.model, "model")?;
    let (model, sha) = load_model(model_path, &vocab)?;
    let app = a.app.as_deref().map(parse_app).transpose()?;
    let queries = TestSet::load(&vocab, req(&a.queries, "queries")?, app)?.queries;
    let config = BenchConfig {
        repeats: *req(&a.repeats, "repeats")?,
        warmup: *req(&a.warmup, "warmup")?,
        context_limit: limit(a.context_limit),
    };
    let report = bench_latency(&model, &model_path.display().to_string(), &queries, &config)?;
    let delta = match &a.baseline {
        Some(path) => Some(report.p95_delta_vs(&read_bench_report(path)?)),
        None => None,
    };
    let mut body = serde_json::to_value(&report).expect("report serializes");
    body["model_sha256"] = json!(sha);
    body["seed"] = json!(a.seed);
    body["p95_delta_vs_baseline_pct"] = json!(delta);
    emit("bench", body);
    eprintln!(
        "{}: {} queries x {} repeats, mean P50 {:.1} us, mean P95 {:.1} us",
        report.model,
        report.queries,
        report.repeats.len(),
        report.mean_p50_us,
        report.mean_p95_us
    );
    if let Some(d) = delta {
        eprintln!("P95 delta vs baseline: {d:+.1}%");
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn gradcheck_cmd(a: GradcheckArgs) -> CliResult<()> {
    let arch = parse_arch(req(&a.arch, "arch")?, *req(&a.experts, "experts")?)?;
    let seed = *req(&a.seed, "seed")?;
    let v = *req(&a.vocab_size, "vocab-size")?;
    let config = FofeConfig {
        vocab_size: v,
        embed_dim: *req(&a.embed, "embed")?,
        hidden_dim: *req(&a.hidden, "hidden")?,
        num_ff_layers: *req(&a.layers, "layers")?,
        context_n: *req(&a.context_n, "context-n")?,
        forgetting_factor: FofeConfig::DEFAULT_FORGETTING,
        mode: FofeMode::Original,
    };
    let mut model = FofeModel::<f64>::new(config, arch, 0, seed)?;
    let app = parse_app(req(&a.app, "app")?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    // zero-initialised layer biases put whole layers on the ReLU kink
    // whenever the layer below is inactive; check at a generic point
    for p in model.params_mut().params_mut() {
        if p.name.ends_with(".bias") && !p.name.starts_with("output.") {
            p.value.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
    }
    let mut set = ExampleSet::new();
    for _ in 0..*req(&a.examples, "examples")? {
        let len = rng.random_range(0..=config.context_n + 1);
        let mut history = vec![BOS];
        history.extend((0..len).map(|_| rng.random_range(3..v as u32)));
        set.push(&history, rng.random_range(2..v as u32), app);
    }
    if set.is_empty() {
        return Err(CliError::Config("--examples must be at least 1".into()));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let sample = GradCheckSample {
        seed,
        ..GradCheckSample::default()
    };
    let step = *req(&a.step, "step")?;
    let objective_name = req(&a.objective, "objective")?.as_str();
    let report = match objective_name {
        "softmax" => model.gradcheck(&set, &idx, Objective::Softmax, step, sample)?,
        "nce" => {
            let head = NceHead::from_counts(&vec![0; v], *req(&a.nce_k, "nce-k")?)?;
            let noise = head.draw_matrix(set.len(), &mut rng);
            let objective = Objective::Nce {
                head: &head,
                noise: &noise,
            };
            model.gradcheck(&set, &idx, objective, step, sample)?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown objective `{other}` (expected softmax or nce)"
            )))
        }
    };
    let tolerance = *req(&a.tolerance, "tolerance")?;
    let passed = report.max_rel_error <= tolerance;
    emit(
        "gradcheck",
        json!({
            "architecture": arch,
            "objective": objective_name,
            "max_rel_error": report.max_rel_error,
            "worst_param": report.worst_param,
            "worst_index": report.worst_index,
            "analytic": report.analytic,
            "numeric": report.numeric,
            "checked": report.checked,
            "tolerance": tolerance,
            "passed": passed,
        }),
    );
    if !passed {
        return Err(CliError::Failed(format!(
            "gradient check failed: relative error {:.3e} in {} exceeds {tolerance:e} \
             (an error that shrinks with a smaller --step means a ReLU kink lies within one step)",
            report.max_rel_error, report.worst_param
        )));
    }
    Ok(())
}

fn describe_cmd(a: DescribeArgs) -> CliResult<()> {
    let path = req(&a.model, "model")?;
    let model = fofe::load(path, None)?;
    let c = model.config();
    emit(
        "model",
        json!({
            "path": path,
            "sha256": file_sha256(path)?,
            "architecture": model.architecture(),
            "config": c,
            "vocab_hash": hex64(model.vocab_hash()),
            "parameters": model.num_parameters(),
        }),
    );
    for p in model.params().params() {
        emit("param", json!({"name": p.name, "shape": p.value.shape()}));
    }
    eprintln!(
        "{} model: V={} E={} H={} L={} n={} alpha={} ({:?})",
        model.architecture().name(),
        c.vocab_size,
        c.embed_dim,
        c.hidden_dim,
        c.num_ff_layers,
        c.context_n,
        c.forgetting_factor,
        c.mode
    );
    for p in model.params().params() {
        eprintln!("  {:<24} {:?}", p.name, p.value.shape());
    }
    eprintln!("  {} parameters", model.num_parameters());
    Ok(())
}

fn params_cmd(a: ParamsArgs) -> CliResult<()> {
    let experts = *req(&a.experts, "experts")?;
    let archs = match &a.arch {
        Some(s) => vec![parse_arch(s, experts)?],
        None => vec![
            Architecture::Base,
            Architecture::Mixture { experts },
            Architecture::AppDependent,
        ],
    };
    for arch in archs {
        let mut config = FofeConfig::full_size(arch, *req(&a.vocab_size, "vocab-size")?);
        config.embed_dim = *req(&a.embed, "embed")?;
        config.num_ff_layers = *req(&a.layers, "layers")?;
        config.context_n = *req(&a.context_n, "context-n")?;
        config.hidden_dim = a.hidden.unwrap_or(config.hidden_dim);
        config.validate()?;
        if let Some(budget) = a.budget {
            config.hidden_dim = hidden_for_budget(&config, arch, budget);
        }
        let count = parameter_count(&config, arch);
        emit(
            "params",
            json!({"architecture": arch, "config": config, "parameters": count}),
        );
        eprintln!("{:<14} H={:<5} {:>12} parameters", arch.name(), config.hidden_dim, count);
    }
    Ok(())
}

fn gen_synthetic_cmd(a: GenSyntheticArgs) -> CliResult<()> {
    let spec = SyntheticSpec {
        va_queries: *req(&a.va_queries, "va-queries")?,
        stt_queries: *req(&a.stt_queries, "stt-queries")?,
        va_dev_queries: *req(&a.va_dev_queries, "va-dev-queries")?,
        stt_dev_queries: *req(&a.stt_dev_queries, "stt-dev-queries")?,
        content_words: *req(&a.content_words, "content-words")?,
        ..SyntheticSpec::default()
    };
    let corpus = generate_synthetic(&spec, *req(&a.seed, "seed")?)?;
    let dir: PathBuf = crate::config::out_path(req(&a.out_dir, "out-dir")?);
    let manifest = corpus.write(&dir)?;
    write_run_file(&dir.join("gen-synthetic"), &a)?;
    emit(
        "synthetic",
        json!({
            "dir": dir,
            "manifest": manifest,
            "va_train": corpus.va_train.len(),
            "stt_train": corpus.stt_train.len(),
            "va_dev": corpus.va_dev.len(),
            "stt_dev": corpus.stt_dev.len(),
        }),
    );
    Ok(())
}
