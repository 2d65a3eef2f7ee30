//! Joint survival probabilities of firms in a first-passage credit model,
//! with asset correlations treated to first order, a Gaussian-copula
//! comparison and a correlated random-walk Monte Carlo oracle.
//!
//! The numerical code is generic over the scalar type (see
//! [`numerics::Real`]); the `*64` aliases below fix it to `f64`.

pub mod copula;
pub mod error;
pub mod firm_model;
pub mod io;
pub mod mc_oracle;
pub mod numerics;
pub mod perturbation;
pub mod survival_core;

pub use error::{Error, Result};
pub use firm_model::{
    calibrate, validate_correlation, CorrelationSpec, DriftMode, FirmParams, MarketInputs, Rate,
    ValidatedCorrelation,
};
pub use numerics::{QuadratureConfig, Real, RngStream, SquareMatrix};
pub use perturbation::{JointSurvivalResult, Method, PairKernelResult, PairKernels};

pub type FirmParams64 = FirmParams<f64>;
pub type MarketInputs64 = MarketInputs<f64>;
pub type CorrelationSpec64 = CorrelationSpec<f64>;
pub type QuadratureConfig64 = QuadratureConfig<f64>;
pub type JointSurvivalResult64 = JointSurvivalResult<f64>;
pub type PairKernels64 = PairKernels<f64>;
pub type FirmParams32 = FirmParams<f32>;
pub type QuadratureConfig32 = QuadratureConfig<f32>;
