//! Dense numeric substrate: the handful of layers the FOFE models need,
//! each with a hand-written backward pass, plus parameter storage,
//! global-norm clipping and a central-difference gradient checker.

mod gradcheck;
mod ops;
mod params;

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::Float;
use rand::Rng;

pub use gradcheck::{gradcheck, GradCheckReport, GradCheckSample};
pub use ops::{
    affine, affine_backward, check_finite, relu, relu_backward, softmax_rows, softmax_xent,
};
pub use params::{accumulate, clip_global_norm, global_norm, Grads, Param, ParamId, ParamStore};

/// Row-major matrix. Vectors (biases) are stored as `1 × n`.
pub type Tensor2<F> = Array2<F>;

/// Floating-point element type. Models train in `f32`; `f64` exists for
/// gradient checking, where single-precision noise would hide errors.
pub trait Scalar:
    LinalgScalar
    + Float
    + ScalarOperand
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(v: f64) -> Self {
        v
    }
    fn f64(self) -> f64 {
        self
    }
}

/// Glorot-uniform: `U(±sqrt(6 / (fan_in + fan_out)))`.
pub fn glorot<F: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor2<F> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || F::of(rng.random_range(-limit..limit)))
}
