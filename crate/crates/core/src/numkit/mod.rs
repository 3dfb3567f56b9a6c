//! Numerical building blocks shared by every estimator: dense linear
//! algebra, special functions, densities, samplers and seeded RNG streams.

pub mod dist;
pub mod linalg;
pub mod optim;
pub mod rng;
pub mod special;
pub mod stats;

pub use dist::{Distribution, Value};
pub use linalg::{chol_logdet, Cholesky, Matrix, Vector};
pub use rng::RngStream;
pub use stats::{log_mean_exp, log_sum_exp};
