//! Ground-truth game solvers and the static-fusion baseline.

pub mod baseline;
pub mod exact;
pub mod fictitious;
pub mod payoff;

pub use baseline::{beacon_drift_rate, kalman_static_run, worst_grid_action, BaselineAttacker};
pub use exact::{exact_msne_small, Equilibrium, MAX_EXACT_DIM};
pub use fictitious::{fictitious_play, FictitiousPlayResult, FpRecord};
pub use payoff::{expected_payoff_matrix, MixedStrategy, PayoffMatrix};
