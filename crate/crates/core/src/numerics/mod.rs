//! Dense math used by the generative policy and the reward model: a flat
//! parameter MLP with exact reverse-mode gradients, Adam, Gaussian
//! log-densities, a central-difference gradient oracle and a counter-based
//! random source.

mod adam;
mod checkpoint;
mod fd;
mod gaussian;
mod mlp;
mod rng;
mod tensor;

pub use adam::{opt_step, AdamConfig, OptState};
pub use checkpoint::{decode_params, encode_params, read_params, write_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fd::finite_diff_grad;
pub use gaussian::{gaussian_logpdf, gaussian_logpdf_slice, LN_2PI};
pub use mlp::{Activation, ForwardCache, NetParams};
pub use rng::RandomSource;
pub use tensor::Tensor;

/// Euclidean norm of a flat vector.
pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn ensure_finite(v: &[f64], what: &str) -> crate::Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(crate::Error::NonFinite(format!("{what}[{i}] = {}", v[i]))),
        None => Ok(()),
    }
}
