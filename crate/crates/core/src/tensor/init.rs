use super::matrix::Matrix;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Weight matrix of shape `outputs x inputs` with entries drawn from
/// `N(0, 2 / inputs)`.
pub fn he_normal<T: Scalar, R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Matrix<T> {
    let std = (2.0 / inputs.max(1) as f64).sqrt();
    let normal = Normal::new(0.0, std).expect("positive std");
    Matrix::from_fn(outputs, inputs, |_, _| T::lit(normal.sample(rng)))
}

/// Seeded He-normal initialisation of an `outputs x inputs` weight matrix.
pub fn he_init<T: Scalar>(outputs: usize, inputs: usize, rng_seed: u64) -> Matrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    he_normal(outputs, inputs, &mut rng)
}
