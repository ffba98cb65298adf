//! Exact distributions and stochastic simulators for neutral population
//! genetics under the infinitely-many-alleles model.

pub mod coalescent;
pub mod combinatorics;
pub mod error;
pub mod esf;
pub mod eve;
pub mod exact;
pub mod finite;
pub mod gem;
pub mod neutrality;
pub mod partition;
pub mod order_stats;
pub mod quadrature;
pub mod rng;
pub mod stats;
pub mod theta;
pub mod validation;

pub use error::{Error, Result};
pub use exact::{ExactProbability, Formula, Quantity, EXACT_THRESHOLD};
pub use partition::AllelicPartition;
pub use theta::Theta;
