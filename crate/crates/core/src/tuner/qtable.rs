use rand::Rng;
use thiserror::Error;

use crate::num::Scalar;
use crate::simnet::{SimRng, SimTime};

/// Congestion levels for both the observed and the predicted state.
pub const LEVELS: usize = 100;
pub const ACTIONS: usize = 100;
const TARGET_STEP_US: u64 = 50;
const INTERVAL_PER_TARGET: u64 = 20;

#[derive(Debug, Error, PartialEq)]
pub enum TunerError {
    #[error("action {0} outside 0..{ACTIONS}")]
    ActionOutOfRange(usize),
    #[error("state {0} outside 0..{LEVELS}")]
    StateOutOfRange(usize),
    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),
    #[error("measured RTT must be positive, got {0} s")]
    NonPositiveRtt(f64),
    #[error("throughput must be nonnegative, got {0} bit/s")]
    NegativeThroughput(f64),
    #[error("{name} = {value} must lie in [0, 1]")]
    Hyperparameter { name: &'static str, value: f64 },
}

/// `LEVELS x ACTIONS` action values plus the running maxima used to
/// discretize observations and predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    values: Vec<T>,
    max_obs_ref: T,
    max_pred_ref: T,
}

impl<T: Scalar> Default for QTable<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> QTable<T> {
    /// All-zero table; both reference maxima start at 1.
    pub fn new() -> Self {
        QTable {
            values: vec![T::zero(); LEVELS * ACTIONS],
            max_obs_ref: T::one(),
            max_pred_ref: T::one(),
        }
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[s * ACTIONS + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: T) {
        self.values[s * ACTIONS + a] = v;
    }

    pub fn row(&self, s: usize) -> &[T] {
        &self.values[s * ACTIONS..(s + 1) * ACTIONS]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_obs_ref(&self) -> T {
        self.max_obs_ref
    }

    pub fn max_pred_ref(&self) -> T {
        self.max_pred_ref
    }

    /// Raises the observation maximum if needed, then discretizes.
    pub fn observed_level(&mut self, value: T) -> usize {
        let v = value.max(T::zero());
        self.max_obs_ref = self.max_obs_ref.max(v);
        discretize(v, self.max_obs_ref, LEVELS)
    }

    /// Raises the prediction maximum if needed, then discretizes.
    pub fn predicted_level(&mut self, value: T) -> usize {
        let v = value.max(T::zero());
        self.max_pred_ref = self.max_pred_ref.max(v);
        discretize(v, self.max_pred_ref, LEVELS)
    }

    pub fn max_q(&self, s: usize) -> T {
        self.row(s).iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Lowest-index action with the largest value.
    pub fn argmax(&self, s: usize) -> usize {
        let row = self.row(s);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        best
    }
}

/// `floor(levels * value / max_ref)` clamped to `[0, levels - 1]`.
pub fn discretize<T: Scalar>(value: T, max_ref: T, levels: usize) -> usize {
    if max_ref <= T::zero() || levels == 0 {
        return 0;
    }
    let x = (T::lit(levels as f64) * value / max_ref).floor();
    if x.is_nan() || x <= T::zero() {
        return 0;
    }
    x.to_usize().unwrap_or(usize::MAX).min(levels - 1)
}

/// Action `i` sets target `(i + 1) * 50 us` and interval `20 * target`.
pub fn action_to_params(index: usize) -> Result<(SimTime, SimTime), TunerError> {
    if index >= ACTIONS {
        return Err(TunerError::ActionOutOfRange(index));
    }
    let target_us = (index as u64 + 1) * TARGET_STEP_US;
    Ok((
        SimTime::from_micros(target_us),
        SimTime::from_micros(target_us * INTERVAL_PER_TARGET),
    ))
}

/// Epsilon-greedy: uniform random action with probability `epsilon`,
/// otherwise the greedy action (ties to the lowest index).
pub fn select_action<T: Scalar>(q: &QTable<T>, state: usize, epsilon: f64, rng: &mut SimRng) -> usize {
    assert!(state < LEVELS, "state {state} out of range");
    if epsilon > 0.0 && rng.random_bool(epsilon.min(1.0)) {
        rng.random_range(0..ACTIONS)
    } else {
        q.argmax(state)
    }
}

/// `Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))`.
pub fn q_update<T: Scalar>(
    q: &mut QTable<T>,
    s: usize,
    a: usize,
    r: T,
    s_next: usize,
    alpha: T,
    gamma: T,
) -> Result<(), TunerError> {
    for st in [s, s_next] {
        if st >= LEVELS {
            return Err(TunerError::StateOutOfRange(st));
        }
    }
    if a >= ACTIONS {
        return Err(TunerError::ActionOutOfRange(a));
    }
    if !r.is_finite() {
        return Err(TunerError::NonFiniteReward(r.to_f64_lossy()));
    }
    for (name, v) in [("alpha", alpha), ("gamma", gamma)] {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(TunerError::Hyperparameter { name, value: v.to_f64_lossy() });
        }
    }
    let old = q.get(s, a);
    let target = r + gamma * q.max_q(s_next);
    q.set(s, a, old + alpha * (target - old));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::seeded_rng;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(0.0, 200.0, 100), 0);
        assert_eq!(discretize(200.0, 200.0, 100), 99);
        assert_eq!(discretize(100.0, 200.0, 100), 50);
        assert_eq!(discretize(5.0, 0.0, 100), 0);
    }

    #[test]
    fn action_grid_examples() {
        let us = SimTime::from_micros;
        assert_eq!(action_to_params(0).unwrap(), (us(50), us(1000)));
        assert_eq!(action_to_params(99).unwrap(), (us(5000), us(100_000)));
        assert_eq!(action_to_params(9).unwrap(), (us(500), us(10_000)));
        assert_eq!(action_to_params(100), Err(TunerError::ActionOutOfRange(100)));
        for a in 0..ACTIONS {
            let (t, i) = action_to_params(a).unwrap();
            assert!(t < i);
        }
    }

    #[test]
    fn greedy_selection() {
        let mut q = QTable::<f64>::new();
        let mut rng = seeded_rng(1);
        assert_eq!(select_action(&q, 3, 0.0, &mut rng), 0);
        q.set(3, 42, 1.0);
        assert_eq!(select_action(&q, 3, 0.0, &mut rng), 42);
    }

    /// Chi-squared goodness of fit for epsilon = 1 over 10^4 draws.
    #[test]
    fn full_exploration_is_uniform() {
        let q = QTable::<f64>::new();
        let mut rng = seeded_rng(77);
        let mut hist = [0u32; ACTIONS];
        let n = 10_000;
        for _ in 0..n {
            hist[select_action(&q, 0, 1.0, &mut rng)] += 1;
        }
        let e = n as f64 / ACTIONS as f64;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        // 99.9th percentile of chi-squared with 99 degrees of freedom
        assert!(chi2 < 148.2, "chi2 = {chi2}");
    }

    #[test]
    fn update_examples() {
        let mut q = QTable::<f64>::new();
        q_update(&mut q, 0, 0, 1.0, 1, 0.5, 0.8).unwrap();
        assert!((q.get(0, 0) - 0.5).abs() < 1e-12);
        q.set(1, 3, 0.5);
        q_update(&mut q, 0, 0, 1.0, 1, 0.5, 0.8).unwrap();
        assert!((q.get(0, 0) - 0.95).abs() < 1e-12);
        let before = q.clone();
        q_update(&mut q, 0, 0, 1.0, 1, 0.0, 0.8).unwrap();
        assert_eq!(q, before);
        assert!(matches!(q_update(&mut q, 0, 0, f64::NAN, 1, 0.5, 0.8), Err(TunerError::NonFiniteReward(_))));
        assert!(matches!(q_update(&mut q, 0, 0, f64::INFINITY, 1, 0.5, 0.8), Err(TunerError::NonFiniteReward(_))));
        assert!(q_update(&mut q, 0, 100, 1.0, 1, 0.5, 0.8).is_err());
        assert!(q_update(&mut q, 0, 0, 1.0, 1, 1.5, 0.8).is_err());
    }

    #[test]
    fn reference_maxima_only_grow() {
        let mut q = QTable::<f64>::new();
        assert_eq!(q.observed_level(0.5), 50);
        assert_eq!(q.observed_level(200.0), 99);
        assert_eq!(q.observed_level(100.0), 50);
        assert_eq!(q.max_obs_ref(), 200.0);
        assert_eq!(q.predicted_level(-3.0), 0);
        assert_eq!(q.max_pred_ref(), 1.0);
    }

    #[test]
    fn converges_geometrically_on_a_frozen_environment() {
        let mut q = QTable::<f64>::new();
        q.set(7, 0, 2.0);
        let fixed = 1.0 + 0.8 * 2.0;
        let mut gap = fixed;
        for _ in 0..40 {
            q_update(&mut q, 3, 5, 1.0, 7, 0.5, 0.8).unwrap();
            let g = (q.get(3, 5) - fixed).abs();
            assert!(g <= 0.5 * gap + 1e-15);
            gap = g;
        }
        assert!(gap < 1e-10);
    }

    proptest! {
        #[test]
        fn discretize_stays_in_range(v in 0.0f64..1e9, extra in 0.0f64..1e9) {
            let m = v + extra;
            let lvl = discretize(v, m, LEVELS);
            prop_assert!(lvl < LEVELS);
        }

        #[test]
        fn scaling_rewards_scales_q(k in 0.01f64..100.0, seed in 0u64..1000) {
            let mut rng = seeded_rng(seed);
            let mut a = QTable::<f64>::new();
            let mut b = QTable::<f64>::new();
            for _ in 0..200 {
                let (s, act, s2) = (rng.random_range(0..LEVELS), rng.random_range(0..ACTIONS), rng.random_range(0..LEVELS));
                let r: f64 = rng.random_range(0.0..1.0);
                q_update(&mut a, s, act, r, s2, 0.5, 0.8).unwrap();
                q_update(&mut b, s, act, k * r, s2, 0.5, 0.8).unwrap();
            }
            for s in 0..LEVELS {
                for act in 0..ACTIONS {
                    prop_assert!((b.get(s, act) - k * a.get(s, act)).abs() <= 1e-9 * (1.0 + b.get(s, act).abs()));
                }
            }
        }
    }
}
