use ndarray::{Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::{Scalar, Tensor2};
use crate::error::{Error, Result};

pub fn check_finite<F: Scalar>(op: &'static str, t: &Tensor2<F>) -> Result<()> {
    if t.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { op })
    }
}

/// `y = x W + b` for `x: B × in`, `W: in × out`, `b: 1 × out`.
pub fn affine<F: Scalar>(x: ArrayView2<F>, w: ArrayView2<F>, b: ArrayView2<F>) -> Result<Tensor2<F>> {
    if x.ncols() != w.nrows() || b.nrows() != 1 || b.ncols() != w.ncols() {
        return Err(Error::Shape {
            op: "affine",
            detail: format!(
                "x {:?}, W {:?}, b {:?}",
                x.shape(),
                w.shape(),
                b.shape()
            ),
        });
    }
    let mut y = x.dot(&w);
    y += &b;
    check_finite("affine", &y)?;
    Ok(y)
}

/// Returns `(dx, dW, db)` for upstream `dy`.
pub fn affine_backward<F: Scalar>(
    x: ArrayView2<F>,
    w: ArrayView2<F>,
    dy: ArrayView2<F>,
) -> (Tensor2<F>, Tensor2<F>, Tensor2<F>) {
    let dx = dy.dot(&w.t());
    let dw = x.t().dot(&dy);
    let db = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
    (dx, dw, db)
}

pub fn relu<F: Scalar>(x: &Tensor2<F>) -> Tensor2<F> {
    x.mapv(|v| if v > F::zero() { v } else { F::zero() })
}

/// Masks `dy` where the forward input was `<= 0` (subgradient 0 at the kink).
pub fn relu_backward<F: Scalar>(x: ArrayView2<F>, dy: ArrayView2<F>) -> Tensor2<F> {
    let mut dx = dy.to_owned();
    Zip::from(&mut dx).and(&x).for_each(|d, &v| {
        if v <= F::zero() {
            *d = F::zero();
        }
    });
    dx
}

fn softmax_row_into<F: Scalar>(row: ArrayView1<F>, out: &mut [F]) {
    let max = row.iter().fold(F::neg_infinity(), |m, &v| m.max(v));
    let mut sum = F::zero();
    for (o, &v) in out.iter_mut().zip(row.iter()) {
        *o = (v - max).exp();
        sum = sum + *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

pub fn softmax_rows<F: Scalar>(logits: &Tensor2<F>) -> Tensor2<F> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (row, mut o) in logits.rows().into_iter().zip(out.rows_mut()) {
        softmax_row_into(row, o.as_slice_mut().expect("standard layout"));
    }
    out
}

/// Mean negative log-likelihood of `targets` under row-wise softmax, and
/// its gradient `(softmax - onehot) / B`.
pub fn softmax_xent<F: Scalar>(logits: &Tensor2<F>, targets: &[u32]) -> Result<(f64, Tensor2<F>)> {
    let (b, v) = logits.dim();
    if targets.len() != b || targets.iter().any(|&t| t as usize >= v) {
        return Err(Error::Shape {
            op: "softmax_xent",
            detail: format!("{} targets for {b}×{v} logits", targets.len()),
        });
    }
    check_finite("softmax_xent", logits)?;
    let mut grad = Array2::zeros((b, v));
    let inv_b = F::of(1.0 / b as f64);
    let mut loss = 0.0f64;
    for ((row, mut g), &t) in logits.rows().into_iter().zip(grad.rows_mut()).zip(targets) {
        // ln Σ exp(x - max) = ln_1p(Σ_{j != argmax} exp(x_j - max)), exact near 0
        let (arg, max) = row
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(ai, m), (i, &x)| {
                if x.f64() > m {
                    (i, x.f64())
                } else {
                    (ai, m)
                }
            });
        let rest: f64 = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != arg)
            .map(|(_, &x)| (x.f64() - max).exp())
            .sum();
        loss += (max - row[t as usize].f64()) + rest.ln_1p();
        let g = g.as_slice_mut().expect("standard layout");
        softmax_row_into(row, g);
        g[t as usize] = g[t as usize] - F::one();
        for x in g.iter_mut() {
            *x = *x * inv_b;
        }
    }
    let loss = loss / b as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite { op: "softmax_xent" });
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
    fn affine_examples() {
        let y = affine(
            array![[1.0, 2.0]].view(),
            array![[1.0, 0.0], [0.0, 1.0]].view(),
            array![[0.0, 0.0]].view(),
        )
        .unwrap();
        assert_eq!(y, array![[1.0, 2.0]]);
        let y = affine(
            array![[1.0, 1.0]].view(),
            array![[2.0], [3.0]].view(),
            array![[1.0]].view(),
        )
        .unwrap();
        assert_eq!(y, array![[6.0]]);
        assert!(matches!(
            affine(array![[1.0]].view(), array![[1.0, 2.0], [3.0, 4.0]].view(), array![[0.0, 0.0]].view()),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn affine_rejects_non_finite() {
        let r = affine(
            array![[f64::INFINITY]].view(),
            array![[0.0]].view(),
            array![[0.0]].view(),
        );
        assert!(matches!(r, Err(Error::NonFinite { op: "affine" })));
    }

    /// Central differences on `L = Σ dy ⊙ (xW + b)` for every entry of W, x, b.
    #[test]
    fn affine_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Array2<f64> = super::super::glorot(3, 4, &mut rng);
        let w: Array2<f64> = super::super::glorot(4, 5, &mut rng);
        let b: Array2<f64> = super::super::glorot(1, 5, &mut rng);
        let dy: Array2<f64> = super::super::glorot(3, 5, &mut rng);
        let loss = |x: &Array2<f64>, w: &Array2<f64>, b: &Array2<f64>| {
            (&affine(x.view(), w.view(), b.view()).unwrap() * &dy).sum()
        };
        let (dx, dw, db) = affine_backward(x.view(), w.view(), dy.view());
        let h = 1e-3;
        let rel = |a: f64, n: f64| (a - n).abs() / n.abs().max(1e-6);
        let mut worst = 0.0f64;
        for i in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp.as_slice_mut().unwrap()[i] += h;
            wm.as_slice_mut().unwrap()[i] -= h;
            let n = (loss(&x, &wp, &b) - loss(&x, &wm, &b)) / (2.0 * h);
            worst = worst.max(rel(dw.as_slice().unwrap()[i], n));
        }
        for i in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp.as_slice_mut().unwrap()[i] += h;
            xm.as_slice_mut().unwrap()[i] -= h;
            let n = (loss(&xp, &w, &b) - loss(&xm, &w, &b)) / (2.0 * h);
            worst = worst.max(rel(dx.as_slice().unwrap()[i], n));
        }
        for i in 0..b.len() {
            let (mut bp, mut bm) = (b.clone(), b.clone());
            bp.as_slice_mut().unwrap()[i] += h;
            bm.as_slice_mut().unwrap()[i] -= h;
            let n = (loss(&x, &w, &bp) - loss(&x, &w, &bm)) / (2.0 * h);
            worst = worst.max(rel(db.as_slice().unwrap()[i], n));
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(&array![[-1.0, 0.0, 2.0]]), array![[0.0, 0.0, 2.0]]);
        let dx = relu_backward(array![[-1.0, 2.0, 0.0]].view(), array![[5.0, 5.0, 5.0]].view());
        assert_eq!(dx, array![[0.0, 5.0, 0.0]]);
    }

    #[test]
    fn relu_gradcheck_away_from_kink() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Array2<f64> = super::super::glorot(4, 6, &mut rng)
            .mapv(|v: f64| if v.abs() < 1e-2 { v + 0.05 } else { v });
        let dy: Array2<f64> = super::super::glorot(4, 6, &mut rng);
        let dx = relu_backward(x.view(), dy.view());
        let h = 1e-5;
        for i in 0..x.len() {
            let (mut p, mut m) = (x.clone(), x.clone());
            p.as_slice_mut().unwrap()[i] += h;
            m.as_slice_mut().unwrap()[i] -= h;
            let n = ((&relu(&p) * &dy).sum() - (&relu(&m) * &dy).sum()) / (2.0 * h);
            let a = dx.as_slice().unwrap()[i];
            assert!((a - n).abs() / n.abs().max(1e-6) < 1e-4);
        }
    }

    #[test]
    fn softmax_xent_examples() {
        let (loss, _) = softmax_xent(&Array2::<f64>::zeros((2, 4)), &[0, 3]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        // ln(1 + e^-20)
        let (loss, _) = softmax_xent(&array![[10.0f64, -10.0]], &[0]).unwrap();
        let expected = (-20f64).exp().ln_1p();
        assert!((loss - expected).abs() < 1e-12 * expected, "{loss}");
        assert!((loss - 2.06e-9).abs() < 1e-11);
        assert!(softmax_xent(&array![[0.0f64, 1.0]], &[2]).is_err());
    }

    #[test]
    fn softmax_xent_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits: Array2<f64> = super::super::glorot(3, 7, &mut rng).mapv(|v: f64| v * 4.0);
        let targets = [1, 6, 0];
        let (_, g) = softmax_xent(&logits, &targets).unwrap();
        let h = 1e-5;
        for i in 0..logits.len() {
            let (mut p, mut m) = (logits.clone(), logits.clone());
            p.as_slice_mut().unwrap()[i] += h;
            m.as_slice_mut().unwrap()[i] -= h;
            let n = (softmax_xent(&p, &targets).unwrap().0 - softmax_xent(&m, &targets).unwrap().0)
                / (2.0 * h);
            let a = g.as_slice().unwrap()[i];
            assert!((a - n).abs() / n.abs().max(1e-6) < 1e-4, "{a} vs {n}");
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l: Array2<f32> = super::super::glorot(8, 50, &mut rng).mapv(|v: f32| v * 30.0);
        for row in softmax_rows(&l).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-6);
        }
    }
}
