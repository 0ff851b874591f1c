//! Bayesian fitting of double-logistic land surface phenology curves.
//!
//! A seven-parameter curve describes one growing season of a vegetation
//! index. Observations are modelled with a Normal, Truncated Normal or Beta
//! likelihood, and the posterior is explored with a random-walk Metropolis
//! sampler. The [`brick`] module runs independent chains over every pixel of
//! a raster stack.

pub mod brick;
pub mod curve;
pub mod error;
pub mod likelihood;
pub mod posterior;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod special;

pub use curve::{curve_value, CurveParams, IndexBounds};
pub use error::{Error, Result};
pub use likelihood::{LikelihoodKind, NoiseParam, ObservationSeries};
pub use prior::{ParamVector, PriorSpec};
pub use sampler::{run_chain, Chain, ChainConfig, Draw, TuningSpec};
