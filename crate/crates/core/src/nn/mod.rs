//! Minimal trainable network stack with hand-written backward passes.

pub mod conv;
pub mod loss;
pub mod model;
pub mod params;
pub mod stack;
pub mod vae;

pub use conv::{conv1d_backward, conv1d_forward, Conv1dLayer, ConvGrads};
pub use loss::{cross_entropy_loss, mse_loss};
pub use model::{recon_loss_acoustic, recon_loss_linguistic, AlignerModel, ModelConfig};
pub use params::{AdamConfig, Gradients, Param, ParamId, ParameterStore};
pub use vae::{kl_standard_normal, kl_standard_normal_grad, reparameterize, reparameterize_backward, VaeHead};
