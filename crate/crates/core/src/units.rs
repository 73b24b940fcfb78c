//! Price parsing at the input boundary. Internally every price is dollars,
//! or dollars per second for latency.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::EconomicScenario;

/// Parses a dollar amount: `0.5`, `$0.5`, `1e-3`.
pub fn parse_price(input: &str) -> Result<f64> {
    let text = input.trim();
    let text = text.strip_prefix('$').unwrap_or(text).trim();
    let value: f64 = text.parse().map_err(|_| Error::InvalidPrice {
        input: input.to_string(),
        reason: "not a number".into(),
    })?;
    check_price(input, value)
}

/// Parses a latency price into dollars per second. A bare number is already
/// per second; `/s`, `/sec`, `/min`, `/h`, `/hr` and `/hour` suffixes are
/// converted.
pub fn parse_latency_price(input: &str) -> Result<f64> {
    let text = input.trim();
    let (amount, per_seconds) = match text.split_once('/') {
        None => (text, 1.0),
        Some((amount, unit)) => {
            let seconds = match unit.trim().to_ascii_lowercase().as_str() {
                "s" | "sec" | "second" => 1.0,
                "min" | "minute" => 60.0,
                "h" | "hr" | "hour" => 3600.0,
                other => {
                    return Err(Error::InvalidPrice {
                        input: input.to_string(),
                        reason: format!("unknown time unit `{other}`"),
                    })
                }
            };
            (amount, seconds)
        }
    };
    let value = parse_price(amount).map_err(|_| Error::InvalidPrice {
        input: input.to_string(),
        reason: "not a number".into(),
    })?;
    check_price(input, value / per_seconds)
}

fn check_price(input: &str, value: f64) -> Result<f64> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidPrice {
            input: input.to_string(),
            reason: "prices must be finite and non-negative".into(),
        });
    }
    Ok(value)
}

/// A price as written in a scenario file: a number or a string with an
/// optional unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PriceInput {
    Number(f64),
    Text(String),
}

impl PriceInput {
    fn dollars(&self) -> Result<f64> {
        match self {
            PriceInput::Number(v) => check_price(&v.to_string(), *v),
            PriceInput::Text(s) => parse_price(s),
        }
    }

    fn dollars_per_second(&self) -> Result<f64> {
        match self {
            PriceInput::Number(v) => check_price(&v.to_string(), *v),
            PriceInput::Text(s) => parse_latency_price(s),
        }
    }
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub price_of_error: Option<PriceInput>,
    #[serde(default)]
    pub price_of_latency: Option<PriceInput>,
    #[serde(default)]
    pub price_of_abstention: Option<PriceInput>,
    #[serde(default)]
    pub numeric_prices: BTreeMap<String, PriceInput>,
    #[serde(default)]
    pub binary_prices: BTreeMap<String, PriceInput>,
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<EconomicScenario> {
        let or_zero = |p: Option<PriceInput>, f: fn(&PriceInput) -> Result<f64>| {
            p.as_ref().map(f).transpose().map(|v| v.unwrap_or(0.0))
        };
        let scenario = EconomicScenario {
            price_of_error: or_zero(self.price_of_error, PriceInput::dollars)?,
            price_of_latency: or_zero(self.price_of_latency, PriceInput::dollars_per_second)?,
            price_of_abstention: or_zero(self.price_of_abstention, PriceInput::dollars)?,
            numeric_prices: self
                .numeric_prices
                .iter()
                .map(|(k, v)| Ok((k.clone(), v.dollars()?)))
                .collect::<Result<_>>()?,
            binary_prices: self
                .binary_prices
                .iter()
                .map(|(k, v)| Ok((k.clone(), v.dollars()?)))
                .collect::<Result<_>>()?,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Reads a scenario JSON document, normalizing unit-suffixed prices.
pub fn parse_scenario(json: &str) -> Result<EconomicScenario> {
    let file: ScenarioFile =
        serde_json::from_str(json).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    file.into_scenario()
}
