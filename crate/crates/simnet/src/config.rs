//! Run configuration: JSON document, defaults and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use snowfrost_core::frosty::FrostyParams;
use snowfrost_core::sampling::MAX_PROCESSORS;
use snowfrost_core::snowflake::SnowflakeParams;
use snowfrost_core::snowman::SnowmanParams;

use crate::error::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Snowflake,
    Snowman,
    Frosty,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Snowflake => "snowflake",
            Protocol::Snowman => "snowman",
            Protocol::Frosty => "frosty",
        }
    }

    /// Slots per protocol round.
    pub fn round_slots(self) -> u64 {
        match self {
            Protocol::Snowflake | Protocol::Snowman => 2,
            Protocol::Frosty => 3,
        }
    }
}

/// Behaviour of the corrupted processors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Corrupted processors behave like crashed ones.
    #[default]
    Crash,
    /// Answer so as to keep correct processors from converging.
    SplitKeeper,
    /// Snowflake only: answer each querier with the opposite of its value.
    OppositeColor,
    /// Produce and advertise conflicting blocks and proposals.
    Equivocator,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Crash => "crash",
            Strategy::SplitKeeper => "split-keeper",
            Strategy::OppositeColor => "opposite-color",
            Strategy::Equivocator => "equivocator",
        }
    }
}

/// Which processors are corrupted (fixed at slot 0).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    /// A uniformly random subset of size `f`.
    #[default]
    Random,
    /// Processors `0..f`.
    First,
    /// Processors `n-f..n`.
    Last,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default)]
    pub corruption: Corruption,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockPolicy {
    /// No blocks beyond genesis.
    #[default]
    Silent,
    /// One new block per period, extending the longest correct final's chain.
    SingleChain,
    /// Two sibling blocks per period.
    Forking,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockGenConfig {
    #[serde(default)]
    pub policy: BlockPolicy,
    /// Rounds between generation events.
    #[serde(default = "one_u32")]
    pub period: u32,
}

impl Default for BlockGenConfig {
    fn default() -> Self {
        BlockGenConfig {
            policy: BlockPolicy::Silent,
            period: 1,
        }
    }
}

/// Snowflake inputs of the correct processors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Inputs {
    Unanimous {
        value: bool,
    },
    /// The first `ones` correct processors (by id) start with 1, the rest
    /// with 0; `ones` defaults to half.
    Split {
        #[serde(default)]
        ones: Option<u32>,
    },
    /// Independent fair coins.
    Random,
}

impl Default for Inputs {
    fn default() -> Self {
        Inputs::Unanimous { value: true }
    }
}

/// How a Snowflake⁺ sample is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// `k` uniform indices per query.
    #[default]
    Indices,
    /// Response counts drawn directly from the multinomial over response
    /// classes, which has the same distribution as `Indices`.
    Counts,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceLevel {
    /// State changes, certificates and per-round summaries.
    #[default]
    Summary,
    /// Also every processor's per-round tally.
    Full,
}

fn one_u32() -> u32 {
    1
}

fn one_u64() -> u64 {
    1
}

fn default_label_width() -> u32 {
    16
}

/// A simulation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub name: String,
    pub protocol: Protocol,
    pub n: u32,
    pub f: u32,
    #[serde(default)]
    pub seed: u64,
    pub max_timeslots: u64,
    /// Message delay bound in slots; only 1 is supported.
    #[serde(default = "one_u64")]
    pub delta: u64,
    /// Protocol parameters; missing fields take their defaults.
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub adversary: AdversaryConfig,
    #[serde(default)]
    pub block_gen: BlockGenConfig,
    #[serde(default)]
    pub inputs: Inputs,
    #[serde(default)]
    pub sampling: SamplingMode,
    #[serde(default = "default_label_width")]
    pub label_width: u32,
    /// Frosty: stop once every correct processor has reached this epoch.
    #[serde(default)]
    pub stop_epoch: Option<u64>,
    #[serde(default)]
    pub trace: TraceLevel,
    #[serde(default)]
    pub halt_on_violation: bool,
}

/// Typed protocol parameters.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ProtocolParams {
    Snowflake(SnowflakeParams),
    Snowman(SnowmanParams),
    Frosty(FrostyParams),
}

impl ProtocolParams {
    pub fn k(&self) -> u32 {
        match self {
            ProtocolParams::Snowflake(p) => p.k,
            ProtocolParams::Snowman(p) => p.k,
            ProtocolParams::Frosty(p) => p.k,
        }
    }
}

fn overlay<T>(defaults: T, given: &Value) -> Result<T, SimError>
where
    T: Serialize + serde::de::DeserializeOwned,
{
    let mut base = serde_json::to_value(defaults).map_err(|e| SimError::Config(e.to_string()))?;
    match given {
        Value::Null => {}
        Value::Object(map) => {
            let obj = base.as_object_mut().expect("params serialize as objects");
            for (k, v) in map {
                obj.insert(k.clone(), v.clone());
            }
        }
        _ => return Err(SimError::Config("params: expected an object".into())),
    }
    serde_path_to_error::deserialize(base).map_err(|e| SimError::Config(format!("params.{}: {}", e.path(), e.inner())))
}

impl SimConfig {
    /// Parses a JSON document, reporting the path of any offending field.
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                SimError::Config(e.inner().to_string())
            } else {
                SimError::Config(format!("{path}: {}", e.inner()))
            }
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimConfig { seed, ..self.clone() }
    }

    /// Typed parameters with defaults filled in.
    pub fn protocol_params(&self) -> Result<ProtocolParams, SimError> {
        Ok(match self.protocol {
            Protocol::Snowflake => ProtocolParams::Snowflake(overlay(SnowflakeParams::default(), &self.params)?),
            Protocol::Snowman => ProtocolParams::Snowman(overlay(SnowmanParams::default(), &self.params)?),
            Protocol::Frosty => ProtocolParams::Frosty(overlay(FrostyParams::default(), &self.params)?),
        })
    }

    /// Checks the configuration and returns typed parameters plus any
    /// warnings about settings outside the analysed regime.
    pub fn validate(&self) -> Result<(ProtocolParams, Vec<String>), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if self.n < 2 {
            return bad(format!(
                "n={} is too small: quorum thresholds need at least 2 processors",
                self.n
            ));
        }
        if self.n > MAX_PROCESSORS {
            return bad(format!("n={} exceeds {}", self.n, MAX_PROCESSORS));
        }
        if self.f >= self.n {
            return bad(format!("f={} must be below n={}", self.f, self.n));
        }
        if self.delta != 1 {
            return bad(format!("delta={} unsupported: one slot per message delay", self.delta));
        }
        if self.max_timeslots == 0 {
            return bad("max_timeslots must be positive".into());
        }
        if self.block_gen.period == 0 {
            return bad("block_gen.period must be positive".into());
        }
        if self.label_width == 0 || self.label_width > 64 {
            return bad(format!("label_width={} outside 1..=64", self.label_width));
        }
        let params = self.protocol_params()?;
        match &params {
            ProtocolParams::Snowflake(p) => p.validate()?,
            ProtocolParams::Snowman(p) => p.validate()?,
            ProtocolParams::Frosty(p) => p.validate()?,
        }
        if self.protocol != Protocol::Snowflake && self.sampling == SamplingMode::Counts {
            return bad("sampling=counts is only available for snowflake".into());
        }
        if self.protocol != Protocol::Snowflake && self.adversary.strategy == Strategy::OppositeColor {
            return bad("opposite-color is only defined for snowflake".into());
        }
        if let Inputs::Split { ones: Some(o) } = self.inputs {
            if o > self.n - self.f {
                return bad(format!(
                    "inputs.ones={o} exceeds the {} correct processors",
                    self.n - self.f
                ));
            }
        }
        let mut warnings = Vec::new();
        if self.n < 500 {
            warnings.push(format!(
                "n={} is below 500; the probabilistic bounds assume n ≥ 500",
                self.n
            ));
        }
        if 5 * self.f >= self.n {
            warnings.push(format!("f={} is not below n/5", self.f));
        }
        Ok((params, warnings))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{"protocol": "snowflake", "n": 10, "f": 1, "max_timeslots": 40}"#;

    #[test]
    fn defaults_fill_in() {
        let c = SimConfig::from_json(BASE).unwrap();
        assert_eq!(c.delta, 1);
        assert_eq!(c.adversary.strategy, Strategy::Crash);
        let (p, warnings) = c.validate().unwrap();
        assert_eq!(p, ProtocolParams::Snowflake(SnowflakeParams::default()));
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn partial_params_overlay_defaults() {
        let c = SimConfig::from_json(
            r#"{"protocol": "frosty", "n": 10, "f": 1, "max_timeslots": 40, "params": {"gamma": 5}}"#,
        )
        .unwrap();
        let (p, _) = c.validate().unwrap();
        assert_eq!(
            p,
            ProtocolParams::Frosty(FrostyParams {
                gamma: 5,
                ..Default::default()
            })
        );
    }

    #[test]
    fn errors_carry_field_paths() {
        let e = SimConfig::from_json(r#"{"protocol": "snowflake", "n": "x", "f": 1, "max_timeslots": 4}"#).unwrap_err();
        assert!(e.to_string().contains("n:"), "{e}");
        let e = SimConfig::from_json(
            r#"{"protocol": "snowflake", "n": 5, "f": 1, "max_timeslots": 4, "adversary": {"strategy": "sneaky"}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("adversary.strategy"), "{e}");
        let e = SimConfig::from_json(r#"{"protocol": "snowflake", "n": 5, "f": 1, "max_timeslots": 4, "extra": 1}"#)
            .unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
        let c = SimConfig::from_json(
            r#"{"protocol": "snowflake", "n": 5, "f": 1, "max_timeslots": 4, "params": {"alpha9": 1}}"#,
        )
        .unwrap();
        let e = c.validate().unwrap_err();
        assert!(e.to_string().contains("params"), "{e}");
    }

    #[test]
    fn degenerate_population_rejected() {
        let c = SimConfig::from_json(r#"{"protocol": "snowflake", "n": 1, "f": 0, "max_timeslots": 4}"#).unwrap();
        assert!(matches!(c.validate(), Err(SimError::Invalid(_))));
        let c = SimConfig::from_json(r#"{"protocol": "snowflake", "n": 4, "f": 4, "max_timeslots": 4}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn round_trips() {
        let c = SimConfig::from_json(BASE).unwrap();
        assert_eq!(SimConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
