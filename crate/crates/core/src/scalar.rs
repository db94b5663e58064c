//! Real-valued arithmetic used by similarity scoring, clustering and noise
//! sampling. Everything that touches ciphertexts or shares is fixed-width
//! integer and lives elsewhere.

use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::Debug;
use std::iter::Sum;

/// Floating-point scalar accepted by the modeling code (`f32` or `f64`).
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static {
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("scalar conversion")
    }

    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("scalar conversion")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Default + Send + Sync + 'static {}
