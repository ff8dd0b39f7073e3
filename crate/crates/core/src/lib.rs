pub mod census;
pub mod copula;
pub mod error;
pub mod exec;
pub mod finite_oracle;
pub mod latent;
pub mod metrics;
pub mod numeric;
pub mod scores;
pub mod solver;
pub mod tiebreak;

pub use error::{Error, Result};
