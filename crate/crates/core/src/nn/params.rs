use std::collections::HashMap;

use ndarray::Array2;

use super::{Scalar, Tensor2};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub name: String,
    pub value: Tensor2<F>,
    pub grad: Tensor2<F>,
    pub momentum: Tensor2<F>,
}

/// Gradients laid out like a [`ParamStore`], one tensor per parameter.
pub type Grads<F> = Vec<Tensor2<F>>;

/// Named parameters in insertion order, each with a same-shape gradient
/// and momentum buffer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<F> {
    params: Vec<Param<F>>,
    index: HashMap<String, usize>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            params: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor2<F>) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Invalid(format!("duplicate parameter name `{name}`")));
        }
        let id = self.params.len();
        self.index.insert(name.clone(), id);
        self.params.push(Param {
            name,
            grad: Array2::zeros(value.raw_dim()),
            momentum: Array2::zeros(value.raw_dim()),
            value,
        });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn value(&self, id: ParamId) -> &Tensor2<F> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor2<F> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor2<F> {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2<F> {
        &mut self.params[id.0].grad
    }

    pub fn params(&self) -> &[Param<F>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<F>] {
        &mut self.params
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(F::zero());
        }
    }

    pub fn zeros_like(&self) -> Grads<F> {
        self.params
            .iter()
            .map(|p| Array2::zeros(p.value.raw_dim()))
            .collect()
    }

    /// Replaces the stored gradients with `grads`.
    pub fn set_grads(&mut self, grads: Grads<F>) {
        assert_eq!(grads.len(), self.params.len());
        for (p, g) in self.params.iter_mut().zip(grads) {
            debug_assert_eq!(p.grad.dim(), g.dim());
            p.grad = g;
        }
    }

    /// Classical momentum: `v ← μ v + g`, `p ← p − η v`.
    pub fn sgd_momentum_step(&mut self, lr: f64, momentum: f64) {
        let (lr, mu) = (F::of(lr), F::of(momentum));
        for p in &mut self.params {
            ndarray::Zip::from(&mut p.value)
                .and(&mut p.momentum)
                .and(&p.grad)
                .for_each(|w, v, &g| {
                    *v = mu * *v + g;
                    *w = *w - lr * *v;
                });
        }
    }

    /// Converts every tensor to another precision.
    pub fn cast<G: Scalar>(&self) -> ParamStore<G> {
        let conv = |t: &Tensor2<F>| t.mapv(|v| G::of(v.f64()));
        ParamStore {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: conv(&p.value),
                    grad: conv(&p.grad),
                    momentum: conv(&p.momentum),
                })
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Sums `src` into `dst` element-wise.
pub fn accumulate<F: Scalar>(dst: &mut Grads<F>, src: &Grads<F>) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn global_norm<F: Scalar>(store: &ParamStore<F>) -> f64 {
    store
        .params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g.f64() * g.f64())
        .sum::<f64>()
        .sqrt()
}

/// Rescales all gradients by `max_norm / ‖g‖` when the global L2 norm
/// exceeds `max_norm`. Returns the scale applied (1.0 when unchanged).
pub fn clip_global_norm<F: Scalar>(store: &mut ParamStore<F>, max_norm: f64) -> f64 {
    assert!(max_norm > 0.0, "max_norm must be positive");
    let norm = global_norm(store);
    if norm <= max_norm {
        return 1.0;
    }
    let scale = max_norm / norm;
    let s = F::of(scale);
    for p in &mut store.params {
        p.grad.mapv_inplace(|g| g * s);
    }
    scale
}
