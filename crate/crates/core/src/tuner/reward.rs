use super::qtable::TunerError;

/// Probe measurements over one decision epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RewardSample {
    pub throughput_bps: f64,
    /// Mean probe round-trip time in seconds.
    pub mrtt_s: f64,
}

/// Throughput-to-RTT ratio in bit/s^2.
pub fn raw_power(sample: RewardSample) -> Result<f64, TunerError> {
    if sample.mrtt_s.is_nan() || sample.mrtt_s <= 0.0 {
        return Err(TunerError::NonPositiveRtt(sample.mrtt_s));
    }
    if sample.throughput_bps.is_nan() || sample.throughput_bps < 0.0 {
        return Err(TunerError::NegativeThroughput(sample.throughput_bps));
    }
    Ok(sample.throughput_bps / sample.mrtt_s)
}

/// Power divided by `normalizer` (bottleneck rate over base RTT) so that
/// rewards are of order one.
pub fn power_reward(sample: RewardSample, normalizer: f64) -> Result<f64, TunerError> {
    Ok(raw_power(sample)? / normalizer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = raw_power(RewardSample { throughput_bps: 2e7, mrtt_s: 0.04 }).unwrap();
        assert!((p - 5e8).abs() < 1e-3);
        assert_eq!(power_reward(RewardSample { throughput_bps: 0.0, mrtt_s: 0.04 }, 5e8).unwrap(), 0.0);
        assert!((power_reward(RewardSample { throughput_bps: 2e7, mrtt_s: 0.04 }, 5e8).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            raw_power(RewardSample { throughput_bps: 1.0, mrtt_s: 0.0 }),
            Err(TunerError::NonPositiveRtt(0.0))
        );
        assert!(raw_power(RewardSample { throughput_bps: -1.0, mrtt_s: 0.1 }).is_err());
    }
}
