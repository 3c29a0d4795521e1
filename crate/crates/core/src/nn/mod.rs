//! Small reverse-mode differentiation engine over sequential 1-D conv nets.

mod adam;
mod gradcheck;
mod layer;
mod network;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{check_params, grad_check, relative_error, GradCheckConfig};
pub use layer::{LayerSpec, Padding, LEAKY_SLOPE};
pub use network::{fingerprint, Network, NetworkState, Tape};
pub use tensor::Tensor;
