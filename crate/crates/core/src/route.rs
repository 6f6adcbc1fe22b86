use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Which part of a hybrid model produced a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    PositiveRules,
    NegativeRules,
    Linear,
    BlackBox,
}

impl Route {
    /// True for every route except the black-box.
    pub fn is_interpretable(self) -> bool {
        self != Route::BlackBox
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Route::PositiveRules => "positive_rules",
            Route::NegativeRules => "negative_rules",
            Route::Linear => "linear",
            Route::BlackBox => "blackbox",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Route {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "positive_rules" => Ok(Route::PositiveRules),
            "negative_rules" => Ok(Route::NegativeRules),
            "linear" => Ok(Route::Linear),
            "blackbox" => Ok(Route::BlackBox),
            other => Err(Error::invalid(format!("unknown route `{other}`"))),
        }
    }
}
