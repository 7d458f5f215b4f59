/// CUBIC growth constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicParams {
    /// Scaling constant of the cubic term.
    pub c: f64,
    /// Multiplicative decrease factor.
    pub beta: f64,
}

impl Default for CubicParams {
    fn default() -> Self {
        CubicParams { c: 0.4, beta: 0.7 }
    }
}

impl CubicParams {
    pub fn new(c: f64, beta: f64) -> Self {
        assert!(c > 0.0, "CUBIC C must be positive");
        assert!(beta > 0.0 && beta < 1.0, "CUBIC beta must lie in (0, 1)");
        CubicParams { c, beta }
    }
}

/// Time in seconds for the window to climb back to `w_max`.
pub fn cubic_k(w_max: f64, params: CubicParams) -> f64 {
    (w_max * (1.0 - params.beta) / params.c).cbrt()
}

/// `C (t - K)^3 + w_max`, floored at one packet.
pub fn cubic_window(t_since_epoch: f64, w_max: f64, params: CubicParams) -> f64 {
    let k = cubic_k(w_max, params);
    let d = t_since_epoch - k;
    (params.c * d * d * d + w_max).max(1.0)
}

/// Reno-equivalent window used for CUBIC's TCP-friendly region.
pub fn tcp_friendly_window(t_since_epoch: f64, rtt: f64, w_max: f64, params: CubicParams) -> f64 {
    let b = params.beta;
    w_max * b + 3.0 * (1.0 - b) / (1.0 + b) * (t_since_epoch / rtt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: CubicParams = CubicParams { c: 0.4, beta: 0.7 };

    #[test]
    fn equals_w_max_at_k() {
        let k = cubic_k(100.0, P);
        assert!((cubic_window(k, 100.0, P) - 100.0).abs() < 1e-9);
    }

    #[test]
    fn starts_at_beta_times_w_max() {
        assert!((cubic_window(0.0, 100.0, P) - 70.0).abs() < 1e-9);
    }

    #[test]
    fn two_seconds_after_reduction() {
        // K = cbrt(75)
        let k = 75f64.cbrt();
        assert!((cubic_k(100.0, P) - k).abs() < 1e-12);
        assert!((k - 4.217).abs() < 1e-3);
        let w = cubic_window(2.0, 100.0, P);
        assert!((w - (0.4 * (2.0 - k).powi(3) + 100.0)).abs() < 1e-12);
        assert!((w - 95.64).abs() < 0.01, "w = {w}");
    }

    #[test]
    fn never_below_one_packet() {
        assert_eq!(cubic_window(0.0, 1.0, CubicParams::new(0.4, 0.01)), 1.0);
    }

    #[test]
    #[should_panic]
    fn beta_outside_unit_interval_rejected() {
        CubicParams::new(0.4, 1.0);
    }

    proptest! {
        #[test]
        fn increasing_beyond_k(w_max in 1.0f64..10_000.0, dt in 1e-3f64..10.0, step in 1e-3f64..1.0) {
            let k = cubic_k(w_max, P);
            prop_assert!(cubic_window(k + dt + step, w_max, P) > cubic_window(k + dt, w_max, P));
        }

        #[test]
        fn continuous_in_time(w_max in 1.0f64..10_000.0, t in 0.0f64..20.0) {
            let a = cubic_window(t, w_max, P);
            let b = cubic_window(t + 1e-9, w_max, P);
            prop_assert!((a - b).abs() < 1e-3);
        }
    }
}
