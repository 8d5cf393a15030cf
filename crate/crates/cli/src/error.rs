use std::fmt::Debug;

use bessarb::battery::BatteryError;
use bessarb::economics::EconError;
use bessarb::evaluation::EvaluationError;
use bessarb::forecast_baseline::BaselineError;
use bessarb::market_data::MarketDataError;
use bessarb::strategies::StrategyError;
use serde::Serialize;

/// Exit 2 for configuration and validation problems, 3 for data and I/O.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Config,
    Data,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    #[serde(rename = "error")]
    pub category: Category,
    pub kind: String,
    pub message: String,
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// `Foo { .. }` or `Foo(..)` debug output to `Foo`.
fn variant<T: Debug>(e: &T) -> String {
    let text = format!("{e:?}");
    text.split(|c: char| !c.is_alphanumeric() && c != '_').next().unwrap_or("Error").to_string()
}

impl CliError {
    pub fn config(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            category: Category::Config,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn data(kind: &str, message: impl Into<String>) -> Self {
        CliError {
            category: Category::Data,
            kind: kind.into(),
            message: message.into(),
        }
    }

    fn of<T: Debug + ToString>(category: Category, e: &T) -> Self {
        CliError {
            category,
            kind: variant(e),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.category {
            Category::Config => 2,
            Category::Data => 3,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("error serializes")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data("Io", e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data("Io", e.to_string())
    }
}

impl From<MarketDataError> for CliError {
    fn from(e: MarketDataError) -> Self {
        CliError::of(Category::Data, &e)
    }
}

impl From<BatteryError> for CliError {
    fn from(e: BatteryError) -> Self {
        let category = match e {
            BatteryError::InvalidSpec(_) => Category::Config,
            _ => Category::Data,
        };
        CliError::of(category, &e)
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::InvalidPair(_) => CliError::of(Category::Config, &e),
            StrategyError::Market(m) => m.into(),
            _ => CliError::of(Category::Data, &e),
        }
    }
}

impl From<EvaluationError> for CliError {
    fn from(e: EvaluationError) -> Self {
        match e {
            EvaluationError::InvalidSweep(_) => CliError::of(Category::Config, &e),
            EvaluationError::Strategy(s) => s.into(),
            EvaluationError::Market(m) => m.into(),
            _ => CliError::of(Category::Data, &e),
        }
    }
}

impl From<EconError> for CliError {
    fn from(e: EconError) -> Self {
        match e {
            EconError::ZeroSpan => CliError::of(Category::Data, &e),
            EconError::Battery(b) => b.into(),
            _ => CliError::of(Category::Config, &e),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::InvalidPlan(_) | BaselineError::KTooLarge { .. } => CliError::of(Category::Config, &e),
            BaselineError::Market(m) => m.into(),
            _ => CliError::of(Category::Data, &e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_and_codes() {
        let e: CliError = StrategyError::InvalidPair("x".into()).into();
        assert_eq!((e.kind.as_str(), e.exit_code()), ("InvalidPair", 2));
        let e: CliError = MarketDataError::NonMonotonicTimestamps { line: 4 }.into();
        assert_eq!((e.kind.as_str(), e.exit_code()), ("NonMonotonicTimestamps", 3));
        assert_eq!(
            e.to_json(),
            r#"{"error":"data","kind":"NonMonotonicTimestamps","message":"line 4: timestamps must be strictly increasing"}"#
        );
    }
}
