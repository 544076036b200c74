//! Two-vehicle car-following simulation under bounded false-data injection.
//!
//! The follower fuses four speed readings of its leader (camera, radar,
//! beacon, roadside sensor) with a weight vector on the simplex, while an
//! attacker adds bounded offsets to the readings. Every estimation error
//! accumulates into a spacing deviation; its square is the follower's
//! regret and the attacker's gain. Both players are trained against each
//! other with LSTM Q-networks, and the [`oracle`] module supplies
//! closed-form baselines and small-game equilibrium solvers to check them.

pub mod adversary;
pub mod dynamics;
pub mod env;
pub mod error;
pub mod fusion;
pub mod oracle;
pub mod rl;
pub mod rng;

pub use error::{Error, Result};
