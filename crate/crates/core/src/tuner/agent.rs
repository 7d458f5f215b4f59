use super::qtable::{action_to_params, q_update, select_action, QTable, TunerError};
use crate::num::Scalar;
use crate::simnet::{SimRng, SimTime};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TunerConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub epoch: SimTime,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            alpha: 0.5,
            gamma: 0.8,
            epsilon: 0.5,
            epoch: SimTime::from_secs(1),
        }
    }
}

impl TunerConfig {
    pub fn validate(&self) -> Result<(), TunerError> {
        for (name, value) in [("alpha", self.alpha), ("gamma", self.gamma), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(TunerError::Hyperparameter { name, value });
            }
        }
        Ok(())
    }
}

/// The action chosen at the start of an epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Decision {
    pub state: usize,
    pub action: usize,
    pub target: SimTime,
    pub interval: SimTime,
}

/// Q-learning agent: observed congestion is the current state, predicted
/// congestion the next state.
pub struct Agent<T> {
    cfg: TunerConfig,
    q: QTable<T>,
    rng: SimRng,
    pending: Option<Decision>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(cfg: TunerConfig, rng: SimRng) -> Result<Self, TunerError> {
        cfg.validate()?;
        Ok(Agent {
            cfg,
            q: QTable::new(),
            rng,
            pending: None,
        })
    }

    pub fn config(&self) -> &TunerConfig {
        &self.cfg
    }

    pub fn table(&self) -> &QTable<T> {
        &self.q
    }

    /// Discretizes the observed congestion and picks an action.
    pub fn decide(&mut self, observed: f64) -> Decision {
        let state = self.q.observed_level(T::lit(observed));
        let action = select_action(&self.q, state, self.cfg.epsilon, &mut self.rng);
        let (target, interval) = action_to_params(action).expect("selected action is on the grid");
        let d = Decision {
            state,
            action,
            target,
            interval,
        };
        self.pending = Some(d);
        d
    }

    /// Applies the update for the last decision. Returns the next-state level
    /// derived from `predicted`.
    pub fn learn(&mut self, reward: f64, predicted: f64) -> Result<usize, TunerError> {
        let d = self.pending.take().expect("learn() follows decide()");
        let s_next = self.q.predicted_level(T::lit(predicted));
        q_update(
            &mut self.q,
            d.state,
            d.action,
            T::lit(reward),
            s_next,
            T::lit(self.cfg.alpha),
            T::lit(self.cfg.gamma),
        )?;
        Ok(s_next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::seeded_rng;

    #[test]
    fn first_epoch_exploiting_picks_action_zero() {
        let cfg = TunerConfig {
            epsilon: 0.0,
            ..TunerConfig::default()
        };
        let mut a = Agent::<f64>::new(cfg, seeded_rng(1)).unwrap();
        let d = a.decide(0.0);
        assert_eq!((d.state, d.action), (0, 0));
        assert_eq!(d.target, SimTime::from_micros(50));
        let s_next = a.learn(1.0, 0.0).unwrap();
        assert_eq!(s_next, 0);
        let nonzero = a.table().values().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 1);
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let cfg = TunerConfig {
            gamma: 1.2,
            ..TunerConfig::default()
        };
        assert!(Agent::<f64>::new(cfg, seeded_rng(1)).is_err());
    }
}
