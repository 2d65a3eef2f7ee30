//! Special functions, quadrature and random streams used by the models.

pub mod linalg;
pub mod quadrature;
pub mod real;
pub mod rng;
pub mod special;

pub use quadrature::{
    integrate_1d, integrate_adaptive, integrate_semi_infinite, GaussLegendre, Integral,
    QuadratureConfig,
};
pub use linalg::SquareMatrix;
pub use real::Real;
pub use rng::RngStream;
pub use special::{
    erf, erfc, erfcx, inverse_erf, inverse_normal_cdf, std_normal_cdf, std_normal_pdf,
    std_normal_sf,
};
