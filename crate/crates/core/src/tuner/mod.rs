//! Tabular Q-learning over (target, interval) settings of the edge AQM.

mod agent;
mod qtable;
mod reward;

pub use agent::{Agent, Decision, TunerConfig};
pub use qtable::{action_to_params, discretize, q_update, select_action, QTable, TunerError, ACTIONS, LEVELS};
pub use reward::{power_reward, raw_power, RewardSample};
