//! Scalar special functions and deterministic quadrature used by the
//! Gaussian copula.

pub mod mvn;
pub mod normal;
pub mod quadrature;

pub use normal::{norm_cdf, norm_pdf, norm_quantile};
