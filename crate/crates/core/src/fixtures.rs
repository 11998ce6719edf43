//! Bundled scenarios, also available as files under `fixtures/`.

use crate::error::{Error, Result};
use crate::model::ProblemInstance;

pub const FIVE_KEYWORD_TOML: &str = include_str!("../fixtures/five_keyword.toml");
pub const SHORT_TERM_TOML: &str = include_str!("../fixtures/short_term.toml");
pub const REVENUE_SMALL_TOML: &str = include_str!("../fixtures/revenue_small.toml");

/// Parameters of the five-keyword click-through scenario.
pub const FIVE_KEYWORD_EPSILON: f64 = 1e-4;
pub const FIVE_KEYWORD_Q_MAX: f64 = 20.0 / FIVE_KEYWORD_EPSILON;
pub const FIVE_KEYWORD_QUEUEING_CYCLES: usize = 24;
pub const FIVE_KEYWORD_CYCLES: usize = 1000;

/// Names accepted by [`by_name`].
pub const NAMES: [&str; 4] = [
    "five-keyword",
    "five-keyword-budgeted",
    "short-term",
    "revenue-small",
];

/// Five keywords, ten clients, two slots, `N = 1440`, with customised
/// requirements.
pub fn five_keyword() -> ProblemInstance {
    ProblemInstance::from_toml(FIVE_KEYWORD_TOML).expect("bundled fixture parses")
}

/// [`five_keyword`] with a 24-period daily arrival profile and two short-term
/// client types.
pub fn short_term() -> ProblemInstance {
    ProblemInstance::from_toml(SHORT_TERM_TOML).expect("bundled fixture parses")
}

/// Per-cycle budget of every client in [`five_keyword_budgeted`].
pub const FIVE_KEYWORD_BUDGET: f64 = 60.0;

/// [`five_keyword`] with unit bids and a budget of [`FIVE_KEYWORD_BUDGET`] per client,
/// for running the revenue algorithm on the same arrival model.
pub fn five_keyword_budgeted() -> ProblemInstance {
    let mut inst = five_keyword().with_budget(vec![FIVE_KEYWORD_BUDGET; 10]);
    inst.requirement = None;
    inst
}

/// Two keywords, three budgeted clients, one slot, `N = 10`.
pub fn revenue_small() -> ProblemInstance {
    ProblemInstance::from_toml(REVENUE_SMALL_TOML).expect("bundled fixture parses")
}

pub fn by_name(name: &str) -> Result<ProblemInstance> {
    match name {
        "five-keyword" => Ok(five_keyword()),
        "five-keyword-budgeted" => Ok(five_keyword_budgeted()),
        "short-term" => Ok(short_term()),
        "revenue-small" => Ok(revenue_small()),
        _ => Err(Error::InvalidArgument(format!(
            "unknown fixture {name:?}; expected one of {}",
            NAMES.join(", ")
        ))),
    }
}
