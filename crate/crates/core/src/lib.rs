pub mod corpus;
pub mod encoder;
pub mod error;
pub mod featext;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod tensorcore;
pub mod textprep;

pub use corpus::{Annotation, Label, LabelCounts};
pub use encoder::{EncodedExample, TextEncoder, Vocabulary};
pub use error::{Error, Result};
pub use featext::{FeatureVector, PolarityLexicon};
pub use metrics::{ConfusionMatrix, EvaluationReport};
pub use tensorcore::{ModelConfig, ModelParams, Tensor};
pub use textprep::EmoticonTable;
