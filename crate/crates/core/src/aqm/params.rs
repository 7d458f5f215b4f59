use thiserror::Error;

use crate::simnet::SimTime;

pub const DEFAULT_HARD_LIMIT: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum AqmError {
    #[error("target ({target_us} us) must be below interval ({interval_us} us)")]
    TargetNotBelowInterval { target_us: f64, interval_us: f64 },
    #[error("target and interval must be positive")]
    NonPositive,
    #[error("hard limit must be at least one packet")]
    ZeroLimit,
    #[error("{0} has no target/interval parameters")]
    Unsupported(&'static str),
}

/// CoDel/FQ-CoDel parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AqmParams {
    /// Acceptable standing queue delay.
    pub target: SimTime,
    /// Window over which sojourn must stay above target before acting.
    pub interval: SimTime,
    pub hard_limit: usize,
    pub ecn_enabled: bool,
}

impl Default for AqmParams {
    fn default() -> Self {
        AqmParams {
            target: SimTime::from_millis(5),
            interval: SimTime::from_millis(100),
            hard_limit: DEFAULT_HARD_LIMIT,
            ecn_enabled: true,
        }
    }
}

impl AqmParams {
    pub fn new(
        target: SimTime,
        interval: SimTime,
        hard_limit: usize,
        ecn_enabled: bool,
    ) -> Result<Self, AqmError> {
        validate(target, interval)?;
        if hard_limit == 0 {
            return Err(AqmError::ZeroLimit);
        }
        Ok(AqmParams {
            target,
            interval,
            hard_limit,
            ecn_enabled,
        })
    }
}

pub(crate) fn validate(target: SimTime, interval: SimTime) -> Result<(), AqmError> {
    if target == SimTime::ZERO || interval == SimTime::ZERO {
        return Err(AqmError::NonPositive);
    }
    if target >= interval {
        return Err(AqmError::TargetNotBelowInterval {
            target_us: target.as_micros_f64(),
            interval_us: interval.as_micros_f64(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_5ms_and_100ms() {
        let p = AqmParams::default();
        assert_eq!(p.target, SimTime::from_millis(5));
        assert_eq!(p.interval, SimTime::from_millis(100));
        assert_eq!(p.hard_limit, 1000);
    }

    #[test]
    fn target_must_be_below_interval() {
        assert!(AqmParams::new(SimTime::from_millis(5), SimTime::from_millis(4), 1000, true).is_err());
        assert!(AqmParams::new(SimTime::from_millis(5), SimTime::from_millis(5), 1000, true).is_err());
        assert_eq!(
            AqmParams::new(SimTime::ZERO, SimTime::from_millis(5), 1000, true),
            Err(AqmError::NonPositive)
        );
        assert_eq!(
            AqmParams::new(SimTime::from_micros(50), SimTime::from_millis(1), 0, true),
            Err(AqmError::ZeroLimit)
        );
    }
}
