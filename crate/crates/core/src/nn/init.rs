use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Glorot/Xavier uniform initialization of a `fan_in × fan_out` matrix.
pub fn glorot_init<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Result<Tensor> {
    if fan_in == 0 || fan_out == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "glorot_init needs positive fans, got {}x{}",
            fan_in, fan_out
        )));
    }
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data: Vec<f64> = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-bound..=bound))
        .collect();
    Tensor::new(alloc::vec![fan_in, fan_out], data)
}
