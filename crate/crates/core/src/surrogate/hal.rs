//! Hazard-aware loss: a piecewise-linear absolute error whose under- and
//! over-estimation weights depend on whether the true value lies in the safe
//! or the unsafe region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::Direction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HalWeights {
    pub u_safe: f64,
    pub o_safe: f64,
    pub u_unsafe: f64,
    pub o_unsafe: f64,
}

impl Default for HalWeights {
    fn default() -> Self {
        HalWeights {
            u_safe: 1.05,
            o_safe: 1.0,
            u_unsafe: 1.2,
            o_unsafe: 1.1,
        }
    }
}

impl HalWeights {
    pub const UNIT: HalWeights = HalWeights {
        u_safe: 1.0,
        o_safe: 1.0,
        u_unsafe: 1.0,
        o_unsafe: 1.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalParams {
    pub weights: HalWeights,
    /// Threshold and adverse side. `None` means every value is safe.
    pub threshold: Option<(f64, Direction)>,
}

impl HalParams {
    pub fn new(weights: HalWeights, threshold: Option<(f64, Direction)>) -> Result<Self> {
        let p = HalParams { weights, threshold };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.weights;
        let all = [w.u_safe, w.o_safe, w.u_unsafe, w.o_unsafe];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Validation("HAL weights must be finite and >= 0".into()));
        }
        if all.iter().all(|v| *v == 0.0) {
            return Err(Error::Validation("at least one HAL weight must be > 0".into()));
        }
        Ok(())
    }

    /// Region test on the true value. With a lower limit the safe region is
    /// `q > qbar`; with an upper limit it is `q <= qbar`.
    pub fn is_unsafe(&self, q: f64) -> bool {
        match self.threshold {
            None => false,
            Some((qbar, Direction::Below)) => q <= qbar,
            Some((qbar, Direction::Above)) => q > qbar,
        }
    }

    /// (under-estimation weight, over-estimation weight) for true value `q`.
    pub fn weights_for(&self, q: f64) -> (f64, f64) {
        if self.is_unsafe(q) {
            (self.weights.u_unsafe, self.weights.o_unsafe)
        } else {
            (self.weights.u_safe, self.weights.o_safe)
        }
    }

    /// Same weights with the threshold mapped through `x -> (x - mean) / std`.
    pub fn standardized(&self, mean: f64, std: f64) -> Self {
        HalParams {
            weights: self.weights,
            threshold: self.threshold.map(|(q, d)| ((q - mean) / std, d)),
        }
    }
}

/// `w_u * max(q - qhat, 0) + w_o * max(qhat - q, 0)`.
pub fn hal_loss(q: f64, qhat: f64, params: &HalParams) -> f64 {
    let (wu, wo) = params.weights_for(q);
    wu * (q - qhat).max(0.0) + wo * (qhat - q).max(0.0)
}

/// Derivative with respect to the prediction; zero at the kink.
pub fn hal_subgradient(q: f64, qhat: f64, params: &HalParams) -> f64 {
    let (wu, wo) = params.weights_for(q);
    if qhat < q {
        -wu
    } else if qhat > q {
        wo
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> HalParams {
        HalParams::new(HalWeights::default(), Some((500.0, Direction::Below))).unwrap()
    }

    #[test]
    fn exact_prediction_costs_nothing() {
        assert_eq!(hal_loss(600.0, 600.0, &reg()), 0.0);
        assert_eq!(hal_subgradient(600.0, 600.0, &reg()), 0.0);
    }

    #[test]
    fn safe_underestimate() {
        assert!((hal_loss(600.0, 550.0, &reg()) - 52.5).abs() < 1e-12);
        assert_eq!(hal_subgradient(600.0, 550.0, &reg()), -1.05);
    }

    #[test]
    fn unsafe_overestimate() {
        assert!((hal_loss(400.0, 450.0, &reg()) - 55.0).abs() < 1e-12);
        assert_eq!(hal_subgradient(400.0, 450.0, &reg()), 1.1);
    }

    #[test]
    fn above_direction_regions() {
        let shed = HalParams::new(HalWeights::default(), Some((0.0, Direction::Above))).unwrap();
        assert!(!shed.is_unsafe(0.0));
        assert!(shed.is_unsafe(3.0));
        assert!((hal_loss(3.0, 1.0, &shed) - 2.4).abs() < 1e-12);
        let cost = HalParams::new(HalWeights::default(), None).unwrap();
        assert!((hal_loss(10.0, 8.0, &cost) - 2.1).abs() < 1e-12);
    }

    #[test]
    fn invalid_weights_rejected() {
        let zero = HalWeights {
            u_safe: 0.0,
            o_safe: 0.0,
            u_unsafe: 0.0,
            o_unsafe: 0.0,
        };
        assert!(HalParams::new(zero, None).is_err());
        let neg = HalWeights {
            u_safe: -1.0,
            ..HalWeights::default()
        };
        assert!(HalParams::new(neg, None).is_err());
    }

    #[test]
    fn standardizing_moves_the_threshold() {
        let p = reg().standardized(400.0, 50.0);
        assert_eq!(p.threshold, Some((2.0, Direction::Below)));
        assert_eq!(
            hal_loss(600.0, 550.0, &reg()) / 50.0,
            hal_loss(4.0, 3.0, &p)
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn nonnegative_and_zero_only_at_truth(q in -1e4f64..1e4, qhat in -1e4f64..1e4) {
                let l = hal_loss(q, qhat, &reg());
                prop_assert!(l >= 0.0);
                prop_assert_eq!(l == 0.0, q == qhat);
            }

            #[test]
            fn unsafe_errors_cost_more(q in 0.0f64..1000.0, e in 0.001f64..100.0) {
                let p = reg();
                let safe_q = 500.0 + 1.0 + q;
                let unsafe_q = 500.0 - q;
                prop_assert!(hal_loss(unsafe_q, unsafe_q - e, &p) > hal_loss(safe_q, safe_q - e, &p));
                prop_assert!(hal_loss(unsafe_q, unsafe_q + e, &p) > hal_loss(safe_q, safe_q + e, &p));
            }
        }
    }
}
