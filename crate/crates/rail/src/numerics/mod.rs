//! Dense neural-network core: tanh MLP forward/backward evaluation, a flat
//! parameter view for trust-region vector algebra, and an Adam optimizer.

mod adam;
mod mlp;

pub use adam::{AdamConfig, AdamState, Direction};
pub use mlp::{MlpSpec, ParamVector, DEFAULT_HIDDEN};
