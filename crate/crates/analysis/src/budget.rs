//! Union-bound error budgets over a deployment horizon.

use num::{BigInt, BigRational, Signed, Zero};

use crate::error::AnalysisError;
use crate::rational::{parse_rational, pow10};
use crate::tail::check_probability;

/// Julian year in seconds.
pub const SECONDS_PER_YEAR: u64 = 31_557_600;

/// A deployment: how many processors run for how long at what round rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Horizon {
    pub processors: u64,
    pub years: u64,
    pub rounds_per_second: u64,
}

impl Default for Horizon {
    /// 10⁴ processors, 1000 years, 5 rounds per second.
    fn default() -> Self {
        Horizon {
            processors: 10_000,
            years: 1000,
            rounds_per_second: 5,
        }
    }
}

impl Horizon {
    pub fn rounds(&self) -> BigInt {
        BigInt::from(self.years) * SECONDS_PER_YEAR * self.rounds_per_second
    }
}

/// Union bound over `rounds` (times `processors` when the event is per
/// processor) opportunities for an event of probability `per_event`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorBudget {
    pub processors: u64,
    pub rounds: BigInt,
    pub per_processor: bool,
    pub per_event: BigRational,
    pub cumulative: BigRational,
}

impl ErrorBudget {
    pub fn below(&self, target: &BigRational) -> bool {
        self.cumulative < *target
    }
}

pub fn error_budget(
    per_event: &BigRational,
    processors: u64,
    rounds: &BigInt,
    per_processor: bool,
) -> Result<ErrorBudget, AnalysisError> {
    check_probability(per_event)?;
    if processors == 0 {
        return Err(AnalysisError::NonPositive("processors"));
    }
    if !rounds.is_positive() {
        return Err(AnalysisError::NonPositive("rounds"));
    }
    let mut opportunities = rounds.clone();
    if per_processor {
        opportunities *= processors;
    }
    Ok(ErrorBudget {
        processors,
        rounds: rounds.clone(),
        per_processor,
        per_event: per_event.clone(),
        cumulative: per_event * BigRational::from_integer(opportunities),
    })
}

/// One failure mode in the agreement argument with its published target.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetPart {
    pub name: &'static str,
    pub budget: ErrorBudget,
    pub target: BigRational,
}

impl BudgetPart {
    pub fn holds(&self) -> bool {
        self.budget.below(&self.target)
    }
}

/// The three failure modes of the Snowflake⁺ agreement argument and their
/// sum, evaluated over a horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct DeploymentBudget {
    pub horizon: Horizon,
    pub rounds: BigInt,
    pub parts: Vec<BudgetPart>,
    /// Sum of the computed cumulative bounds.
    pub total: BigRational,
    /// Sum of the per-part targets.
    pub targets_total: BigRational,
    pub total_target: BigRational,
}

impl DeploymentBudget {
    pub fn holds(&self) -> bool {
        self.parts.iter().all(BudgetPart::holds)
            && self.total < self.total_target
            && self.targets_total < self.total_target
    }
}

fn lit(s: &str) -> BigRational {
    parse_rational(s).expect("literal")
}

/// Per-event constants and targets:
/// - population majority fails to spread: `1.59e-20` per round, target `3e-9`;
/// - a processor samples a minority value at `α₂`: `1.18e-20` per processor
///   per round, target `2e-5`;
/// - twelve consecutive confirming samples: `10⁻²²` per processor per
///   round, target `2e-7`;
///
/// with a total target of `3e-5`.
pub fn deployment_budget(horizon: Horizon) -> Result<DeploymentBudget, AnalysisError> {
    let rounds = horizon.rounds();
    let spec: [(&'static str, &str, bool, &str); 3] = [
        ("population-majority", "1.59e-20", false, "3e-9"),
        ("minority-confirmation", "1.18e-20", true, "2e-5"),
        ("repeated-confirmation", "1e-22", true, "2e-7"),
    ];
    let mut parts = Vec::new();
    let mut total = BigRational::zero();
    let mut targets_total = BigRational::zero();
    for (name, per_event, per_processor, target) in spec {
        let budget = error_budget(&lit(per_event), horizon.processors, &rounds, per_processor)?;
        total += &budget.cumulative;
        targets_total += lit(target);
        parts.push(BudgetPart {
            name,
            budget,
            target: lit(target),
        });
    }
    Ok(DeploymentBudget {
        horizon,
        rounds,
        parts,
        total,
        targets_total,
        total_target: lit("3") * pow10(-5),
    })
}
