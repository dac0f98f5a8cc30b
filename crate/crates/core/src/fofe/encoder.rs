//! Reference FOFE encoding over explicit embedding sequences.

use ndarray::{Array1, Array2, ArrayView2};

use super::FofeMode;
use crate::nn::Scalar;

/// Codes `z_1..z_m` (one row each) for embeddings `e_1..e_m`, with `z_0 = 0`.
pub fn fofe_encode<F: Scalar>(embeddings: ArrayView2<F>, alpha: f64, mode: FofeMode) -> Array2<F> {
    let (a, b) = mode.coefficients(alpha);
    let (a, b) = (F::of(a), F::of(b));
    let mut z = Array2::zeros(embeddings.raw_dim());
    let mut prev = Array1::<F>::zeros(embeddings.ncols());
    for (e, mut out) in embeddings.rows().into_iter().zip(z.rows_mut()) {
        prev = prev.mapv(|v| v * a) + &e.mapv(|v| v * b);
        out.assign(&prev);
    }
    z
}

/// `[z_{m-n+1}, …, z_m]` flattened, where `m` is 1-based and codes before
/// the start of the sequence are zero vectors.
pub fn fofe_context<F: Scalar>(codes: ArrayView2<F>, n: usize, m: usize) -> Array1<F> {
    let e = codes.ncols();
    let mut out = Array1::zeros(n * e);
    for slot in 0..n {
        // position of this slot, 1-based; may be <= 0
        let pos = m as isize - n as isize + 1 + slot as isize;
        if pos >= 1 {
            out.slice_mut(ndarray::s![slot * e..(slot + 1) * e])
                .assign(&codes.row(pos as usize - 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use std::collections::HashSet;

    #[test]
    fn empty_history() {
        let e = Array2::<f64>::zeros((0, 3));
        assert_eq!(fofe_encode(e.view(), 0.5, FofeMode::Original).nrows(), 0);
        let ctx = fofe_context(Array2::<f64>::zeros((0, 3)).view(), 2, 0);
        assert_eq!(ctx, Array1::zeros(6));
    }

    #[test]
    fn hand_example() {
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let z = fofe_encode(e.view(), 0.5, FofeMode::Original);
        assert_eq!(z, array![[1.0, 0.0], [0.5, 1.0]]);
    }

    #[test]
    fn alpha_one_is_bag_of_words() {
        let e = array![[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]];
        let z = fofe_encode(e.view(), 1.0, FofeMode::Original);
        assert_eq!(z.row(2), array![4.5, 1.5]);
    }

    #[test]
    fn literal_mode_loses_order() {
        let e = array![[1.0, 0.0], [0.0, 1.0]];
        let rev = array![[0.0, 1.0], [1.0, 0.0]];
        let a = fofe_encode(e.view(), 0.5, FofeMode::Literal);
        let b = fofe_encode(rev.view(), 0.5, FofeMode::Literal);
        assert_eq!(a.row(1), b.row(1));
        assert_eq!(a.row(1), array![0.5, 0.5]);
    }

    #[test]
    fn context_padding_and_concat() {
        let z = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [9.0, 10.0]];
        assert_eq!(fofe_context(z.view(), 1, 3), array![5.0, 6.0]);
        assert_eq!(fofe_context(z.view(), 2, 1), array![0.0, 0.0, 1.0, 2.0]);
        assert_eq!(
            fofe_context(z.view(), 3, 5),
            array![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
        );
    }

    /// One-hot codes for every sequence of length `len` over 3 words.
    fn all_codes(len: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for mut k in 0..3usize.pow(len as u32) {
            let mut e = Array2::zeros((len, 3));
            for t in 0..len {
                e[[t, k % 3]] = 1.0;
                k /= 3;
            }
            let z = fofe_encode(e.view(), 0.5, FofeMode::Original);
            out.push(z.row(len - 1).to_vec());
        }
        out
    }

    #[test]
    fn unique_codes_at_half() {
        for len in 1..=5 {
            let codes = all_codes(len);
            let distinct: HashSet<Vec<u64>> = codes
                .iter()
                .map(|c| c.iter().map(|v| v.to_bits()).collect())
                .collect();
            assert_eq!(distinct.len(), 3usize.pow(len as u32), "length {len}");
        }
    }

    proptest! {
        #[test]
        fn recursion_matches_closed_form(
            rows in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 1..12),
            alpha in 0.01f64..=1.0,
        ) {
            let m = rows.len();
            let e = Array2::from_shape_vec((m, 4), rows.concat()).unwrap();
            let z = fofe_encode(e.view(), alpha, FofeMode::Original);
            for pos in 0..m {
                for d in 0..4 {
                    let closed: f64 = (0..=pos).map(|t| alpha.powi((pos - t) as i32) * e[[t, d]]).sum();
                    prop_assert!((z[[pos, d]] - closed).abs() < 1e-6);
                }
            }
        }
    }
}
