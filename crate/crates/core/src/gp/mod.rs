//! Exact Gaussian-process regression with a squared-exponential kernel.

mod kernel;
pub mod linalg;
mod model;
mod serial;

pub use kernel::{distance_matrix, gram_matrix, kernel_se, nlml, nlml_gradient, squared_distance, Hyperparameters, Inputs};
pub use model::{data_scale_theta, subsample_indices, train, GpModel, InputTransform, TrainOptions, TrainingMeta};
pub use serial::{load_model, model_from_json, model_to_json, save_model, GP_FORMAT};
