//! Deep-ensemble neural surrogate.

mod activation;
mod ensemble;
mod mlp;
mod train;

pub use activation::Activation;
pub use ensemble::{
    train_ensemble, EnsembleSurrogate, InputScaler, OutputScaler, Prediction, SurrogateConfig,
    TrainReport, AIRFOIL_HIDDEN_WIDTHS, DEFAULT_ACTIVATIONS, DEFAULT_HIDDEN_WIDTHS,
};
pub use mlp::{Gradients, Layer, Mlp, MlpSpec};
pub use train::TrainConfig;
