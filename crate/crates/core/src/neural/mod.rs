//! From-scratch MLP with ReLU hidden layers, a reduced-solver output layer,
//! reverse-mode gradients including the adjoint of the reduced linear solve,
//! and Adam optimization.

pub mod adam;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod model;
pub mod rb_layer;
pub mod train;

pub use adam::AdamState;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use layer::{sigmoid, Activation, DenseLayer};
pub use loss::{mean_absolute_error, mse_loss};
pub use model::{ForwardPass, Gradients, Head, NetworkModel};
pub use rb_layer::{LatentMode, RbOutputLayer, RbSampleCache, ThetaMap};
pub use train::{train, EpochRecord, TrainOptions};
