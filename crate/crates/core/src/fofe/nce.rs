//! Noise-contrastive estimation head.
//!
//! Each target is scored against `k` ids drawn from a unigram noise
//! distribution `q`. With `s(w) = logit_w − ln(k q(w))` and a fixed
//! normalizer of 1, the per-target loss is
//!
//! ```text
//! −ln σ(s(target)) − Σ_noise ln(1 − σ(s(noise)))
//! ```

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Scalar;

pub const DESK_NOISE_SAMPLES: usize = 64;
pub const FULL_NOISE_SAMPLES: usize = 4096;

#[derive(Debug, Clone)]
pub struct NceHead {
    k: usize,
    probs: Vec<f64>,
    log_kq: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl NceHead {
    /// `probs` need not be normalized; zero entries are allowed but such ids
    /// can never appear as targets.
    pub fn new(probs: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("NCE needs at least one noise sample".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Config("noise probabilities must be finite and >= 0".into()));
        }
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("noise distribution has no mass".into()));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let log_kq = probs.iter().map(|&q| (k as f64 * q).ln()).collect();
        let sampler = WeightedIndex::new(&probs).map_err(|e| Error::Config(e.to_string()))?;
        Ok(NceHead {
            k,
            probs,
            log_kq,
            sampler,
        })
    }

    /// Unigram noise from target counts with one added to every id, so
    /// that `q(w) > 0` everywhere.
    pub fn from_counts(counts: &[u64], k: usize) -> Result<Self> {
        let probs: Vec<f64> = counts.iter().map(|&c| c as f64 + 1.0).collect();
        Self::new(&probs, k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self, id: u32) -> f64 {
        self.probs[id as usize]
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.sampler.sample(rng) as u32
    }

    /// `rows × k` noise ids.
    pub fn draw_matrix<R: Rng + ?Sized>(&self, rows: usize, rng: &mut R) -> Array2<u32> {
        Array2::from_shape_simple_fn((rows, self.k), || self.draw(rng))
    }
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss averaged over `batch` (which may exceed `logits.nrows()` when the
/// caller splits a batch into shards) and its gradient w.r.t. `logits`.
///
/// `logits` and `ids` are `rows × (1 + k)`: column 0 is the target, the
/// rest are noise draws.
pub fn nce_loss<F: Scalar>(
    head: &NceHead,
    logits: &Array2<F>,
    ids: &Array2<u32>,
    batch: usize,
) -> Result<(f64, Array2<F>)> {
    if logits.dim() != ids.dim() || logits.ncols() != head.k + 1 {
        return Err(Error::Shape {
            op: "nce_loss",
            detail: format!("logits {:?}, ids {:?}, k {}", logits.dim(), ids.dim(), head.k),
        });
    }
    let inv = 1.0 / batch as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for ((row, idr), mut g) in logits.rows().into_iter().zip(ids.rows()).zip(grad.rows_mut()) {
        for (j, (&l, &id)) in row.iter().zip(idr.iter()).enumerate() {
            let q = *head.probs.get(id as usize).ok_or(Error::Shape {
                op: "nce_loss",
                detail: format!("id {id} outside noise distribution"),
            })?;
            if q <= 0.0 {
                return Err(Error::ZeroNoiseProbability(id));
            }
            let s = l.f64() - head.log_kq[id as usize];
            if j == 0 {
                loss += softplus(-s);
                g[j] = F::of((sigmoid(s) - 1.0) * inv);
            } else {
                loss += softplus(s);
                g[j] = F::of(sigmoid(s) * inv);
            }
        }
    }
    let loss = loss * inv;
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "nce_loss" });
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_scores_with_one_sample() {
        // q uniform over 2 ids, k = 1: ln(k q) = ln 0.5, so logits = ln 0.5 gives s = 0
        let head = NceHead::new(&[1.0, 1.0], 1).unwrap();
        let l = 0.5f64.ln();
        let (loss, _) = nce_loss(&head, &array![[l, l]], &array![[0, 1]], 1).unwrap();
        assert!((loss - 2.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn separable_limit() {
        let head = NceHead::new(&[1.0, 1.0], 1).unwrap();
        let (loss, _) = nce_loss(&head, &array![[60.0, -60.0]], &array![[0, 1]], 1).unwrap();
        assert!(loss < 1e-20);
    }

    #[test]
    fn zero_probability_draw_errors() {
        let head = NceHead::new(&[1.0, 0.0, 1.0], 1).unwrap();
        let r = nce_loss(&head, &array![[0.0, 0.0]], &array![[0, 1]], 1);
        assert!(matches!(r, Err(Error::ZeroNoiseProbability(1))));
        assert!(NceHead::new(&[0.0, 0.0], 1).is_err());
        assert!(NceHead::new(&[1.0], 0).is_err());
    }

    #[test]
    fn draws_follow_distribution() {
        let head = NceHead::from_counts(&[0, 9, 29], 64).unwrap();
        assert!(head.q(0) > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = head.draw_matrix(500, &mut rng);
        let twos = m.iter().filter(|&&x| x == 2).count() as f64 / m.len() as f64;
        assert!((twos - 0.75).abs() < 0.02, "{twos}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let head = NceHead::new(&[0.1, 0.2, 0.3, 0.4], 3).unwrap();
        let logits = array![[0.3, -1.2, 0.7, 2.0], [-0.4, 0.1, 0.0, -2.5]];
        let ids = array![[2u32, 0, 3, 3], [1, 2, 0, 1]];
        let (_, g) = nce_loss(&head, &logits, &ids, 2).unwrap();
        let h = 1e-6;
        for i in 0..logits.len() {
            let (mut p, mut m) = (logits.clone(), logits.clone());
            p.as_slice_mut().unwrap()[i] += h;
            m.as_slice_mut().unwrap()[i] -= h;
            let n = (nce_loss(&head, &p, &ids, 2).unwrap().0 - nce_loss(&head, &m, &ids, 2).unwrap().0)
                / (2.0 * h);
            let a = g.as_slice().unwrap()[i];
            assert!((a - n).abs() / n.abs().max(1e-6) < 1e-4, "{a} vs {n}");
        }
    }
}
