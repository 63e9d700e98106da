//! Gaussian potential models, mollification and field synthesis.

pub mod covariance;
pub mod empirical;
pub mod model;
pub mod mollifier;
pub mod synthesis;

pub use covariance::{mollified_covariance, MollifiedCovariance};
pub use empirical::{empirical_covariance, CovarianceAccumulator, CovarianceEstimate};
pub use model::{
    covariance, newtonian_coupling, spectral_density, spectral_integrability, PotentialModel,
};
pub use mollifier::{mollifier, mollifier_fourier, Mollifier};
pub use synthesis::{
    parse_model_tag, read_field_dump, synthesize_field, write_field_dump, EmbeddingInfo,
    FieldSample, Synthesizer,
};
