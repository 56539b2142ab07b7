//! Named simulation presets shipped with the binary.

use snowfrost_simnet::SimConfig;

use crate::error::CliError;

/// `(name, JSON)` for every preset.
pub const PRESETS: [(&str, &str); 7] = [
    (
        "snowflake-unanimous",
        include_str!("../presets/snowflake-unanimous.json"),
    ),
    (
        "snowflake-error-driven",
        include_str!("../presets/snowflake-error-driven.json"),
    ),
    (
        "snowflake-split-keeper",
        include_str!("../presets/snowflake-split-keeper.json"),
    ),
    (
        "snowflake-opposite-color",
        include_str!("../presets/snowflake-opposite-color.json"),
    ),
    ("snowman-fork", include_str!("../presets/snowman-fork.json")),
    ("frosty-splitkeeper", include_str!("../presets/frosty-splitkeeper.json")),
    ("frosty-equivocator", include_str!("../presets/frosty-equivocator.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> Result<SimConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::Usage(format!(
            "unknown preset {name:?}; known: {}",
            names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    Ok(SimConfig::from_json(text)?)
}
