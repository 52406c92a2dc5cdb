//! Simulation and numerical-optimization toolkit for the hierarchical
//! Dirichlet process: stick-breaking samplers, moment checks, relative
//! entropy, large-deviation rate functions and quadrature experiments.

pub mod entropy;
pub mod error;
pub mod ldp;
pub mod measure;
pub mod moments;
pub mod params;
pub mod quad;
pub mod rates;
pub mod samplers;
pub mod simplex;
pub mod special;
pub mod stats;

pub use entropy::{binary_kl, kl, kl_variational, partition_sup_kl, AscentSettings, VariationalResult};
pub use error::{Error, Result};
pub use ldp::{LdpExperiment, RadiusSchedule, RateRow};
pub use measure::{apply_partition, metric_rho, BaseDistribution, CosineFamily, DiscreteMeasure, Measure, Partition, TestFamily, TestFunction};
pub use moments::{LlnRow, MomentReport};
pub use params::{Params, RateCoefficients};
pub use rates::{OptimizerSettings, RateIInstance, RateIResult, RateISeries, RateJInstance, RateJResult};
pub use samplers::{SamplerConfig, Truncation};
pub use simplex::{metric_d, metric_dm, Certified, StickWeights, SubProbVector};
