pub mod autodiff;
pub mod check;
pub mod checkpoint;
pub mod data;
pub mod dropout;
pub mod episodic;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod gates;
pub mod gru;
pub mod model;
pub mod optim;
pub mod params;
pub mod tensor;
pub mod text;
pub mod train;
pub mod visual;
pub mod vocab;

pub use autodiff::{Graph, Var};
pub use error::{Error, Result};
pub use params::{ParamGrads, ParamId, ParamKind, ParamSet};
pub use tensor::Tensor;
pub use model::{Model, ModelConfig, Variant};
pub use train::{TrainConfig, TrainReport};
