use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Per-token API prices for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPricing<T = f64> {
    pub model_id: String,
    pub input_price_per_token: T,
    pub output_price_per_token: T,
}

impl<T: Scalar> TokenPricing<T> {
    /// Builds pricing from the usual "dollars per million tokens" quotes,
    /// given in cents to keep rational scalars exact.
    pub fn from_cents_per_million(model_id: impl Into<String>, input: u32, output: u32) -> Self {
        let scale = T::from_u64(100_000_000).expect("scale fits");
        let cents = |c: u32| T::from_u32(c).expect("price fits") / scale;
        Self {
            model_id: model_id.into(),
            input_price_per_token: cents(input),
            output_price_per_token: cents(output),
        }
    }
}

/// `n_in * input price + n_out * output price`.
pub fn cost_from_tokens<T: Scalar>(n_in: u64, n_out: u64, pricing: &TokenPricing<T>) -> T {
    let count = |n: u64| T::from_u64(n).expect("token count representable");
    count(n_in) * pricing.input_price_per_token + count(n_out) * pricing.output_price_per_token
}

/// API prices (June 2025) for the models of the reference experiments.
pub fn bundled_pricing<T: Scalar>() -> Vec<TokenPricing<T>> {
    [
        ("gpt-4.1-2025-04-14", 200, 800),
        ("o3-2025-04-16", 200, 800),
        ("deepseek-r1-0528", 300, 800),
        ("qwen3-235b-a22b", 22, 88),
        ("llama-v3p3-70b-instruct", 90, 90),
        ("llama-v3p1-405b-instruct", 300, 300),
    ]
    .into_iter()
    .map(|(id, i, o)| TokenPricing::from_cents_per_million(id, i, o))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn gpt41<T: Scalar>() -> TokenPricing<T> {
        bundled_pricing()
            .into_iter()
            .find(|p: &TokenPricing<T>| p.model_id.starts_with("gpt-4.1"))
            .unwrap()
    }

    #[test]
    fn reference_prices() {
        assert_eq!(cost_from_tokens(0, 0, &gpt41::<f64>()), 0.0);
        assert!((cost_from_tokens(1_000_000, 0, &gpt41::<f64>()) - 2.0).abs() < 1e-12);
        assert!((cost_from_tokens(1000, 500, &gpt41::<f64>()) - 0.006).abs() < 1e-15);
        assert_eq!(
            cost_from_tokens(1000, 500, &gpt41::<Ratio<i128>>()),
            Ratio::new(6, 1000)
        );
        let qwen: TokenPricing<Ratio<i128>> = bundled_pricing().swap_remove(3);
        assert_eq!(qwen.output_price_per_token, Ratio::new(88, 100_000_000));
    }

    proptest! {
        #[test]
        fn additive_in_token_counts(a in 0u64..10_000_000, b in 0u64..10_000_000, c in 0u64..10_000_000) {
            // exact under rationals
            let p = gpt41::<Ratio<i128>>();
            prop_assert_eq!(
                cost_from_tokens(a + b, c, &p),
                cost_from_tokens(a, c, &p) + cost_from_tokens(b, 0, &p)
            );
            let q = gpt41::<f64>();
            let lhs = cost_from_tokens(a + b, c, &q);
            let rhs = cost_from_tokens(a, c, &q) + cost_from_tokens(b, 0, &q);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1.0));
        }
    }
}
