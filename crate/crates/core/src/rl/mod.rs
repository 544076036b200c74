//! Deep Q-learning self-play for the two players.

pub mod games;
pub mod grid;
pub mod learner;
pub mod lstm;
pub mod qnet;
pub mod replay;
pub mod selfplay;
pub mod tabular;

pub use games::{CarFollowingGame, CarFollowingStep, FeatureMap, MatchingPennies, FEATURES_PER_STEP};
pub use grid::ActionGrid;
pub use learner::{greedy_action, select_action, td_target, LearnerConfig, QLearner};
pub use lstm::{lstm_backward, lstm_forward, LstmParams};
pub use qnet::{LstmQNet, OptimizerKind};
pub use replay::{Experience, ReplayMemory};
pub use selfplay::{rollout, self_play, Controller, EpisodeStats, Exploration, PlateauRule, SelfPlayConfig, TrainingHistory, TwoPlayerGame, UtilityShaping};
