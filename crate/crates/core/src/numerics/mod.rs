//! Dense tensor arithmetic, seeded randomness, and SVD.

mod rng;
mod svd;
mod tensor;

pub use rng::RngStream;
pub use svd::{svd, Svd};
pub use tensor::{lp_norm, sample_sphere, NormOrder, Tensor};

pub(crate) use tensor::{dot, l2_norm_slice};
