use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Inputs to the Bayes-rule estimate of a price of error from the cost of
/// an adverse event `M` (a lawsuit, a chargeback, a recall) that errors can
/// trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceOfErrorInputs<T = f64> {
    /// Mean dollar cost given the event, `E[Cost | M]`.
    pub mean_cost_given_event: T,
    /// `P(E | M)`: share of events caused by a genuine error.
    pub p_error_given_event: T,
    /// `P(M)`: probability of the event per decision.
    pub p_event: T,
    /// `P(E)`: probability of an error per decision.
    pub p_error: T,
}

impl<T: Scalar> PriceOfErrorInputs<T> {
    pub fn validate(&self) -> Result<()> {
        let probs = [
            ("p_error_given_event", self.p_error_given_event),
            ("p_event", self.p_event),
            ("p_error", self.p_error),
        ];
        for (name, p) in probs {
            if !p.is_finite_value() || p < T::zero() || p > T::one() {
                return Err(Error::InvalidProbability(format!("{name} must lie in [0, 1], got {p:?}")));
            }
        }
        if self.p_error <= T::zero() {
            return Err(Error::InvalidProbability("p_error must be positive".into()));
        }
        let c = self.mean_cost_given_event;
        if !c.is_finite_value() || c < T::zero() {
            return Err(Error::InvalidProbability(format!(
                "mean_cost_given_event must be non-negative, got {c:?}"
            )));
        }
        Ok(())
    }
}

/// `E[Cost | M] · P(M | E)`, with `P(M | E) = P(E | M) · P(M) / P(E)`.
pub fn estimate_price_of_error<T: Scalar>(inputs: &PriceOfErrorInputs<T>) -> Result<T> {
    inputs.validate()?;
    let p_event_given_error = inputs.p_error_given_event * inputs.p_event / inputs.p_error;
    Ok(inputs.mean_cost_given_event * p_event_given_error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    fn inputs(c: f64, pem: f64, pm: f64, pe: f64) -> PriceOfErrorInputs {
        PriceOfErrorInputs {
            mean_cost_given_event: c,
            p_error_given_event: pem,
            p_event: pm,
            p_error: pe,
        }
    }

    #[test]
    fn malpractice_estimate() {
        let v = estimate_price_of_error(&inputs(500_000.0, 2.0 / 3.0, 1e-5, 1e-2)).unwrap();
        assert!((v - 333.333_333).abs() < 1e-3, "{v}");
        let raw = estimate_price_of_error(&inputs(485_348.0, 2.0 / 3.0, 1e-5, 1e-2)).unwrap();
        assert!((raw - 323.565_333).abs() < 1e-3, "{raw}");
        assert_eq!(estimate_price_of_error(&inputs(500_000.0, 0.0, 1e-5, 1e-2)).unwrap(), 0.0);
    }

    #[test]
    fn exact_with_rationals() {
        let r = |n: i128, d: i128| Ratio::new(n, d);
        let v = estimate_price_of_error(&PriceOfErrorInputs {
            mean_cost_given_event: r(500_000, 1),
            p_error_given_event: r(2, 3),
            p_event: r(1, 100_000),
            p_error: r(1, 100),
        })
        .unwrap();
        assert_eq!(v, r(1000, 3));
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(estimate_price_of_error(&inputs(1.0, 0.5, 0.5, 0.0)).is_err());
        assert!(estimate_price_of_error(&inputs(1.0, 1.5, 0.5, 0.5)).is_err());
        assert!(estimate_price_of_error(&inputs(-1.0, 0.5, 0.5, 0.5)).is_err());
        assert!(estimate_price_of_error(&inputs(1.0, 0.5, f64::NAN, 0.5)).is_err());
    }
}
