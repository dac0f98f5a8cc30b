use ndarray::{s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{nce_loss, parameter_count, Architecture, ExampleSet, FofeConfig, NceHead};
use crate::corpus::ApplicationId;
use crate::error::{Error, Result};
use crate::nn::{
    affine, affine_backward, check_finite, glorot, gradcheck, GradCheckReport, GradCheckSample, relu, relu_backward, softmax_rows,
    softmax_xent, Grads, ParamId, ParamStore, Scalar, Tensor2,
};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// Feed-forward stack (affine + ReLU per layer) followed by a linear
/// projection down to the embedding width.
#[derive(Debug, Clone, PartialEq)]
struct Subnet {
    stack: Vec<Layer>,
    proj: Layer,
}

/// Mixture sub-network: its own stack and a softmax over the experts.
#[derive(Debug, Clone, PartialEq)]
struct Gate {
    stack: Vec<Layer>,
    out: Layer,
}

/// Training objective for [`FofeModel::loss_and_grad`].
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    Softmax,
    /// `noise` holds `k` draws per example of the shard, row-aligned.
    Nce {
        head: &'a NceHead,
        noise: &'a Array2<u32>,
    },
}

/// A FOFE feed-forward language model in one of three shapes.
///
/// All three share the word embedding, which is also the output matrix:
/// logits are `hidden · Embᵀ + bias`.
///
/// * [`Architecture::Base`]: one sub-network and one output bias.
/// * [`Architecture::Mixture`]: `M` parallel sub-networks whose projections
///   are averaged with weights from a softmax-terminated gate stack.
/// * [`Architecture::AppDependent`]: one sub-network and one output bias
///   per application; a batch uses exactly one of each.
#[derive(Debug, Clone, PartialEq)]
pub struct FofeModel<F> {
    config: FofeConfig,
    arch: Architecture,
    vocab_hash: u64,
    params: ParamStore<F>,
    embedding: ParamId,
    subnets: Vec<Subnet>,
    gate: Option<Gate>,
    biases: Vec<ParamId>,
}

struct StackCache<F> {
    /// `inputs[l]` feeds layer `l`; the last entry is the stack output.
    inputs: Vec<Tensor2<F>>,
    pre: Vec<Tensor2<F>>,
}

struct PathCache<F> {
    subnet: usize,
    stack: StackCache<F>,
    proj_out: Tensor2<F>,
}

struct Forward<F> {
    ctx: Tensor2<F>,
    paths: Vec<PathCache<F>>,
    gate: Option<(StackCache<F>, Tensor2<F>)>,
    hidden: Tensor2<F>,
    bias: usize,
}

impl<F: Scalar> FofeModel<F> {
    /// Fresh model with Glorot-uniform weights, zero layer biases and
    /// output bias `-ln V`, deterministic in `seed`.
    pub fn new(config: FofeConfig, arch: Architecture, vocab_hash: u64, seed: u64) -> Result<Self> {
        config.validate()?;
        if let Architecture::Mixture { experts } = arch {
            if experts == 0 {
                return Err(Error::Config("mixture needs at least one expert".into()));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let (v, e, h) = (config.vocab_size, config.embed_dim, config.hidden_dim);

        let embedding = params.add("embedding", glorot(v, e, &mut rng))?;

        let mut layer = |params: &mut ParamStore<F>, name: String, rows: usize, cols: usize| -> Result<Layer> {
            let w = params.add(format!("{name}.weight"), glorot(rows, cols, &mut rng))?;
            let b = params.add(format!("{name}.bias"), Array2::zeros((1, cols)))?;
            Ok(Layer { w, b })
        };
        let stack = |params: &mut ParamStore<F>, prefix: &str, layer: &mut dyn FnMut(&mut ParamStore<F>, String, usize, usize) -> Result<Layer>| -> Result<Vec<Layer>> {
            (0..config.num_ff_layers)
                .map(|l| {
                    let rows = if l == 0 { config.input_dim() } else { h };
                    layer(params, format!("{prefix}.ff{l}"), rows, h)
                })
                .collect()
        };

        let prefixes: Vec<String> = match arch {
            Architecture::Base => vec!["subnet".into()],
            Architecture::Mixture { experts } => (0..experts).map(|k| format!("expert{k}")).collect(),
            Architecture::AppDependent => ApplicationId::ALL.iter().map(|a| a.to_string()).collect(),
        };
        let mut subnets = Vec::new();
        for p in &prefixes {
            let st = stack(&mut params, p, &mut layer)?;
            let proj = layer(&mut params, format!("{p}.proj"), h, e)?;
            subnets.push(Subnet { stack: st, proj });
        }
        let gate = match arch {
            Architecture::Mixture { experts } => {
                let st = stack(&mut params, "gate", &mut layer)?;
                let out = layer(&mut params, "gate.out".into(), h, experts)?;
                Some(Gate { stack: st, out })
            }
            _ => None,
        };
        let bias_init = Array2::from_elem((1, v), F::of(-(v as f64).ln()));
        let biases = match arch {
            Architecture::AppDependent => ApplicationId::ALL
                .iter()
                .map(|a| params.add(format!("output.bias.{a}"), bias_init.clone()))
                .collect::<Result<Vec<_>>>()?,
            _ => vec![params.add("output.bias", bias_init)?],
        };
        let model = FofeModel {
            config,
            arch,
            vocab_hash,
            params,
            embedding,
            subnets,
            gate,
            biases,
        };
        debug_assert_eq!(model.params.num_scalars(), parameter_count(&config, arch));
        Ok(model)
    }

    pub fn config(&self) -> &FofeConfig {
        &self.config
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn vocab_hash(&self) -> u64 {
        self.vocab_hash
    }

    pub fn params(&self) -> &ParamStore<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<F> {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    pub fn embedding(&self) -> &Tensor2<F> {
        self.params.value(self.embedding)
    }

    pub fn embedding_mut(&mut self) -> &mut Tensor2<F> {
        self.params.value_mut(self.embedding)
    }

    /// Parameter names of the sub-network and output bias owned by `app`
    /// (application-dependent models only).
    pub fn app_parameter_ids(&self, app: ApplicationId) -> Vec<ParamId> {
        if self.arch != Architecture::AppDependent {
            return Vec::new();
        }
        let sn = &self.subnets[app.index()];
        let mut ids: Vec<ParamId> = sn.stack.iter().flat_map(|l| [l.w, l.b]).collect();
        ids.extend([sn.proj.w, sn.proj.b, self.biases[app.index()]]);
        ids
    }

    /// Replaces every parameter tensor. Names and shapes must match.
    pub fn set_params(&mut self, params: ParamStore<F>) -> Result<()> {
        let same = params.len() == self.params.len()
            && params
                .params()
                .iter()
                .zip(self.params.params())
                .all(|(a, b)| a.name == b.name && a.value.dim() == b.value.dim());
        if !same {
            return Err(Error::Shape {
                op: "set_params",
                detail: "parameter names or shapes differ from the model layout".into(),
            });
        }
        self.params = params;
        Ok(())
    }

    /// Same model in another precision.
    pub fn cast<G: Scalar>(&self) -> FofeModel<G> {
        FofeModel {
            config: self.config,
            arch: self.arch,
            vocab_hash: self.vocab_hash,
            params: self.params.cast(),
            embedding: self.embedding,
            subnets: self.subnets.clone(),
            gate: self.gate.clone(),
            biases: self.biases.clone(),
        }
    }

    /// Flattened FOFE contexts, one row per example.
    fn contexts(&self, set: &ExampleSet, idx: &[usize]) -> Result<Tensor2<F>> {
        let (n, e) = (self.config.context_n, self.config.embed_dim);
        let (a, b) = self.config.mode.coefficients(self.config.forgetting_factor);
        let (a, b) = (F::of(a), F::of(b));
        let emb = self.embedding();
        let v = self.config.vocab_size;
        let mut ctx = Array2::zeros((idx.len(), n * e));
        let mut z = vec![F::zero(); e];
        for (mut row, &i) in ctx.rows_mut().into_iter().zip(idx) {
            let h = set.history(i);
            let m = h.len();
            let row = row.as_slice_mut().expect("standard layout");
            z.iter_mut().for_each(|x| *x = F::zero());
            for (j, &tok) in h.iter().enumerate() {
                if tok as usize >= v {
                    return Err(Error::Shape {
                        op: "fofe_context",
                        detail: format!("token id {tok} >= vocab size {v}"),
                    });
                }
                let er = emb.row(tok as usize);
                for (zk, &ek) in z.iter_mut().zip(er.iter()) {
                    *zk = a * *zk + b * ek;
                }
                let slot = j as isize + n as isize - m as isize;
                if slot >= 0 {
                    let s = slot as usize * e;
                    row[s..s + e].copy_from_slice(&z);
                }
            }
        }
        Ok(ctx)
    }

    fn contexts_backward(&self, set: &ExampleSet, idx: &[usize], dctx: &Tensor2<F>, g_emb: &mut Tensor2<F>) {
        let (n, e) = (self.config.context_n, self.config.embed_dim);
        let (a, b) = self.config.mode.coefficients(self.config.forgetting_factor);
        let (a, b) = (F::of(a), F::of(b));
        let mut d = vec![F::zero(); e];
        for (row, &i) in dctx.rows().into_iter().zip(idx) {
            let h = set.history(i);
            let m = h.len();
            let row = row.as_slice().expect("standard layout");
            d.iter_mut().for_each(|x| *x = F::zero());
            for (j, &tok) in h.iter().enumerate().rev() {
                let slot = j as isize + n as isize - m as isize;
                if slot >= 0 {
                    let s = slot as usize * e;
                    for (dk, &gk) in d.iter_mut().zip(&row[s..s + e]) {
                        *dk = a * *dk + gk;
                    }
                } else {
                    d.iter_mut().for_each(|dk| *dk = a * *dk);
                }
                let mut ge = g_emb.row_mut(tok as usize);
                for (gk, &dk) in ge.iter_mut().zip(&d) {
                    *gk = *gk + b * dk;
                }
            }
        }
    }

    fn run_stack(&self, layers: &[Layer], x: Tensor2<F>) -> Result<StackCache<F>> {
        let mut inputs = vec![x];
        let mut pre = Vec::with_capacity(layers.len());
        for l in layers {
            let p = affine(
                inputs.last().expect("non-empty").view(),
                self.params.value(l.w).view(),
                self.params.value(l.b).view(),
            )?;
            inputs.push(relu(&p));
            pre.push(p);
        }
        Ok(StackCache { inputs, pre })
    }

    fn back_stack(&self, layers: &[Layer], cache: &StackCache<F>, dout: Tensor2<F>, grads: &mut Grads<F>) -> Tensor2<F> {
        let mut d = dout;
        for (l, layer) in layers.iter().enumerate().rev() {
            let dpre = relu_backward(cache.pre[l].view(), d.view());
            let (dx, dw, db) = affine_backward(cache.inputs[l].view(), self.params.value(layer.w).view(), dpre.view());
            grads[layer.w.index()] += &dw;
            grads[layer.b.index()] += &db;
            d = dx;
        }
        d
    }

    fn run_subnet(&self, k: usize, ctx: &Tensor2<F>) -> Result<PathCache<F>> {
        let sn = &self.subnets[k];
        let stack = self.run_stack(&sn.stack, ctx.clone())?;
        let proj_out = affine(
            stack.inputs.last().expect("non-empty").view(),
            self.params.value(sn.proj.w).view(),
            self.params.value(sn.proj.b).view(),
        )?;
        Ok(PathCache {
            subnet: k,
            stack,
            proj_out,
        })
    }

    /// Resolves which application path a batch takes and checks the
    /// batch is homogeneous for application-dependent models.
    fn route(&self, set: &ExampleSet, idx: &[usize], app: Option<ApplicationId>) -> Result<Option<ApplicationId>> {
        if self.arch != Architecture::AppDependent {
            return Ok(None);
        }
        let app = match app {
            Some(a) => a,
            None => match idx.first() {
                Some(&i) => set.app(i),
                None => ApplicationId::Va,
            },
        };
        if idx.iter().any(|&i| set.app(i) != app) {
            return Err(Error::MixedApplicationBatch { expected: app });
        }
        Ok(Some(app))
    }

    fn forward_hidden(&self, set: &ExampleSet, idx: &[usize], app: Option<ApplicationId>) -> Result<Forward<F>> {
        let ctx = self.contexts(set, idx)?;
        let app = self.route(set, idx, app)?;
        match self.arch {
            Architecture::Base | Architecture::AppDependent => {
                let k = app.map_or(0, ApplicationId::index);
                let path = self.run_subnet(k, &ctx)?;
                let hidden = path.proj_out.clone();
                Ok(Forward {
                    ctx,
                    paths: vec![path],
                    gate: None,
                    hidden,
                    bias: k,
                })
            }
            Architecture::Mixture { experts } => {
                let gate = self.gate.as_ref().expect("mixture has a gate");
                let paths = (0..experts)
                    .map(|k| self.run_subnet(k, &ctx))
                    .collect::<Result<Vec<_>>>()?;
                let gc = self.run_stack(&gate.stack, ctx.clone())?;
                let glog = affine(
                    gc.inputs.last().expect("non-empty").view(),
                    self.params.value(gate.out.w).view(),
                    self.params.value(gate.out.b).view(),
                )?;
                let weights = softmax_rows(&glog);
                let mut hidden = Array2::zeros(paths[0].proj_out.raw_dim());
                for (k, p) in paths.iter().enumerate() {
                    let wk = weights.slice(s![.., k..k + 1]);
                    hidden += &(&p.proj_out * &wk);
                }
                Ok(Forward {
                    ctx,
                    paths,
                    gate: Some((gc, weights)),
                    hidden,
                    bias: 0,
                })
            }
        }
    }

    fn backward_hidden(&self, fwd: &Forward<F>, set: &ExampleSet, idx: &[usize], dhidden: Tensor2<F>, grads: &mut Grads<F>) {
        let mut dctx = Array2::zeros(fwd.ctx.raw_dim());
        match &fwd.gate {
            None => {
                let path = &fwd.paths[0];
                dctx += &self.back_path(path, dhidden, grads);
            }
            Some((gc, weights)) => {
                let gate = self.gate.as_ref().expect("mixture has a gate");
                // d weight_k = <dhidden, p_k> per row
                let mut dweights = Array2::zeros(weights.raw_dim());
                for (k, p) in fwd.paths.iter().enumerate() {
                    let dot = (&dhidden * &p.proj_out).sum_axis(Axis(1));
                    dweights.column_mut(k).assign(&dot);
                }
                // softmax backward: a ⊙ (da − Σ a da)
                let inner = (weights * &dweights).sum_axis(Axis(1)).insert_axis(Axis(1));
                let dglog = weights * &(&dweights - &inner);
                let (dg, dw, db) = affine_backward(
                    gc.inputs.last().expect("non-empty").view(),
                    self.params.value(gate.out.w).view(),
                    dglog.view(),
                );
                grads[gate.out.w.index()] += &dw;
                grads[gate.out.b.index()] += &db;
                dctx += &self.back_stack(&gate.stack, gc, dg, grads);
                for (k, p) in fwd.paths.iter().enumerate() {
                    let dp = &dhidden * &weights.slice(s![.., k..k + 1]);
                    dctx += &self.back_path(p, dp, grads);
                }
            }
        }
        let emb_idx = self.embedding.index();
        let mut g_emb = std::mem::take(&mut grads[emb_idx]);
        self.contexts_backward(set, idx, &dctx, &mut g_emb);
        grads[emb_idx] = g_emb;
    }

    fn back_path(&self, path: &PathCache<F>, dproj: Tensor2<F>, grads: &mut Grads<F>) -> Tensor2<F> {
        let sn = &self.subnets[path.subnet];
        let (dh, dw, db) = affine_backward(
            path.stack.inputs.last().expect("non-empty").view(),
            self.params.value(sn.proj.w).view(),
            dproj.view(),
        );
        grads[sn.proj.w.index()] += &dw;
        grads[sn.proj.b.index()] += &db;
        self.back_stack(&sn.stack, &path.stack, dh, grads)
    }

    fn tied_logits(&self, hidden: ArrayView2<F>, bias: usize) -> Result<Tensor2<F>> {
        let mut logits = hidden.dot(&self.embedding().t());
        logits += self.params.value(self.biases[bias]);
        check_finite("output logits", &logits)?;
        Ok(logits)
    }

    /// Full-vocabulary logits for base and mixture models.
    pub fn forward(&self, set: &ExampleSet) -> Result<Tensor2<F>> {
        if self.arch == Architecture::AppDependent {
            return Err(Error::Config(
                "application-dependent model needs an application (use forward_ad)".into(),
            ));
        }
        let idx: Vec<usize> = (0..set.len()).collect();
        let fwd = self.forward_hidden(set, &idx, None)?;
        self.tied_logits(fwd.hidden.view(), fwd.bias)
    }

    /// Logits through `app`'s sub-network and output bias. Every example
    /// in `set` must be tagged `app`.
    pub fn forward_ad(&self, app: ApplicationId, set: &ExampleSet) -> Result<Tensor2<F>> {
        if self.arch != Architecture::AppDependent {
            return Err(Error::Config("forward_ad needs an application-dependent model".into()));
        }
        let idx: Vec<usize> = (0..set.len()).collect();
        let fwd = self.forward_hidden(set, &idx, Some(app))?;
        self.tied_logits(fwd.hidden.view(), fwd.bias)
    }

    /// Logits for any architecture, routing application-dependent models by
    /// the examples' tags (which must agree).
    pub fn logits(&self, set: &ExampleSet) -> Result<Tensor2<F>> {
        let idx: Vec<usize> = (0..set.len()).collect();
        let fwd = self.forward_hidden(set, &idx, None)?;
        self.tied_logits(fwd.hidden.view(), fwd.bias)
    }

    /// Mixture weights (rows sum to 1) for each example.
    pub fn mixture_weights(&self, set: &ExampleSet) -> Result<Tensor2<F>> {
        if self.gate.is_none() {
            return Err(Error::Config("not a mixture model".into()));
        }
        let idx: Vec<usize> = (0..set.len()).collect();
        let fwd = self.forward_hidden(set, &idx, None)?;
        Ok(fwd.gate.expect("mixture").1)
    }

    /// Loss over the examples `idx` of `set`, divided by `batch_size`, and
    /// the matching gradients. Summing the results of disjoint shards of a
    /// batch gives the batch-mean loss and gradient.
    pub fn loss_and_grad(
        &self,
        set: &ExampleSet,
        idx: &[usize],
        objective: Objective<'_>,
        batch_size: usize,
    ) -> Result<(f64, Grads<F>)> {
        let fwd = self.forward_hidden(set, idx, None)?;
        let mut grads = self.params.zeros_like();
        let targets: Vec<u32> = idx.iter().map(|&i| set.target(i)).collect();
        let emb = self.embedding();
        let bias_id = self.biases[fwd.bias];
        let (loss, dhidden) = match objective {
            Objective::Softmax => {
                let logits = self.tied_logits(fwd.hidden.view(), fwd.bias)?;
                let (mean, mut dlogits) = softmax_xent(&logits, &targets)?;
                let ratio = idx.len() as f64 / batch_size as f64;
                dlogits.mapv_inplace(|g| g * F::of(ratio));
                let dhidden = dlogits.dot(emb);
                grads[self.embedding.index()] += &dlogits.t().dot(&fwd.hidden);
                grads[bias_id.index()] += &dlogits.sum_axis(Axis(0)).insert_axis(Axis(0));
                (mean * ratio, dhidden)
            }
            Objective::Nce { head, noise } => {
                let k = head.k();
                if noise.dim() != (idx.len(), k) {
                    return Err(Error::Shape {
                        op: "nce noise",
                        detail: format!("{:?} draws for {} examples, k = {k}", noise.dim(), idx.len()),
                    });
                }
                let mut ids = Array2::zeros((idx.len(), k + 1));
                ids.column_mut(0).assign(&ndarray::Array1::from(targets.clone()));
                ids.slice_mut(s![.., 1..]).assign(noise);
                let bias = self.params.value(bias_id);
                let mut logits = Array2::zeros(ids.raw_dim());
                for ((mut lr, idr), h) in logits.rows_mut().into_iter().zip(ids.rows()).zip(fwd.hidden.rows()) {
                    for (l, &id) in lr.iter_mut().zip(idr.iter()) {
                        *l = h.dot(&emb.row(id as usize)) + bias[[0, id as usize]];
                    }
                }
                check_finite("nce logits", &logits)?;
                let (loss, dlogits) = nce_loss(head, &logits, &ids, batch_size)?;
                let mut dhidden = Array2::zeros(fwd.hidden.raw_dim());
                let ge = self.embedding.index();
                for (r, (dl, idr)) in dlogits.rows().into_iter().zip(ids.rows()).enumerate() {
                    let h = fwd.hidden.row(r);
                    for (&g, &id) in dl.iter().zip(idr.iter()) {
                        let id = id as usize;
                        dhidden.row_mut(r).scaled_add(g, &emb.row(id));
                        grads[ge].row_mut(id).scaled_add(g, &h);
                        grads[bias_id.index()][[0, id]] = grads[bias_id.index()][[0, id]] + g;
                    }
                }
                (loss, dhidden)
            }
        };
        self.backward_hidden(&fwd, set, idx, dhidden, &mut grads);
        Ok((loss, grads))
    }

    /// Natural-log probability of each example's target under the full
    /// softmax, routing by application for application-dependent models.
    pub fn target_logprobs(&self, set: &ExampleSet) -> Result<Vec<f64>> {
        let logits = self.logits(set)?;
        Ok(logits
            .rows()
            .into_iter()
            .zip(set.targets())
            .map(|(row, &t)| {
                let max = row.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.f64()));
                let lse = max + row.iter().map(|&x| (x.f64() - max).exp()).sum::<f64>().ln();
                row[t as usize].f64() - lse
            })
            .collect())
    }

    /// Sum of log-probabilities of a query's words and `</s>`, and the
    /// number of predicted tokens.
    pub fn query_logprob(&self, tokens: &[u32], app: ApplicationId, context_limit: Option<usize>) -> Result<(f64, usize)> {
        let mut set = ExampleSet::new();
        set.extend_query(tokens, app, context_limit);
        let lp = self.target_logprobs(&set)?;
        Ok((lp.iter().sum(), lp.len()))
    }

    pub(crate) fn from_parts(config: FofeConfig, arch: Architecture, vocab_hash: u64) -> Result<Self> {
        Self::new(config, arch, vocab_hash, 0)
    }
}

impl FofeModel<f64> {
    /// Central-difference check of [`FofeModel::loss_and_grad`] on the
    /// examples `idx`, treating them as one batch.
    pub fn gradcheck(
        &self,
        set: &ExampleSet,
        idx: &[usize],
        objective: Objective<'_>,
        step: f64,
        sample: GradCheckSample,
    ) -> Result<GradCheckReport> {
        let (_, grads) = self.loss_and_grad(set, idx, objective, idx.len())?;
        let mut params = self.params.clone();
        params.set_grads(grads);
        let mut probe = self.clone();
        gradcheck(&mut params, step, sample, |p| {
            probe.params = p.clone();
            Ok(probe.loss_and_grad(set, idx, objective, idx.len())?.0)
        })
    }
}
