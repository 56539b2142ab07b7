//! Recomputation of the quoted numeric inequalities behind the safety and
//! liveness arguments.

use std::fmt;

use num::{BigRational, One};

use crate::budget::Horizon;
use crate::error::AnalysisError;
use crate::rational::{parse_rational, ratio};
use crate::tail::{population_tail, tail_at_least, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Less,
    Greater,
    AtLeast,
}

impl Relation {
    pub fn holds(self, value: &BigRational, target: &BigRational) -> bool {
        match self {
            Relation::Less => value < target,
            Relation::Greater => value > target,
            Relation::AtLeast => value >= target,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Less => "<",
            Relation::Greater => ">",
            Relation::AtLeast => "≥",
        })
    }
}

/// One recomputed inequality `value relation target`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub id: &'static str,
    pub statement: &'static str,
    pub value: BigRational,
    pub relation: Relation,
    pub target: BigRational,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.relation.holds(&self.value, &self.target)
    }
}

/// Identifiers of the six headline inequalities.
pub const HEADLINE_BOUNDS: [&str; 6] = [
    "pref-spread-sample",
    "minority-sample",
    "majority-sample",
    "twelve-round-run",
    "population-spread",
    "byzantine-sample",
];

fn lit(s: &str) -> BigRational {
    parse_rational(s).expect("literal")
}

/// Values for the stuck-window argument: after more than 3n/5 correct
/// processors finalize past the stuck value, a sample shows `≥ α₃ = 48`
/// such finals with probability `q`, two consecutive rounds with `q²`, and
/// 150 disjoint round pairs all fail with probability `(1 − q²)^150`.
#[derive(Clone, Debug, PartialEq)]
pub struct StuckWindow {
    pub per_round: BigRational,
    pub per_pair: BigRational,
    pub exact_failure: BigRational,
    /// `0.71^150`, the constant as printed.
    pub printed_failure: BigRational,
    /// `0.7^150`, the constant implied by a pair success of at least 0.3.
    pub implied_failure: BigRational,
}

pub fn stuck_window() -> Result<StuckWindow, AnalysisError> {
    let per_round = tail_at_least(80, &ratio(3, 5), 48)?;
    let per_pair = &per_round * &per_round;
    let exact_failure = num::pow(BigRational::one() - &per_pair, 150);
    Ok(StuckWindow {
        per_round,
        per_pair,
        exact_failure,
        printed_failure: num::pow(lit("0.71"), 150),
        implied_failure: num::pow(lit("0.7"), 150),
    })
}

/// Every quoted inequality, recomputed exactly.
pub fn quoted_bounds() -> Result<Vec<BoundCheck>, AnalysisError> {
    use Relation::*;
    let mut out = Vec::new();
    let mut push = |id, statement, value: BigRational, relation, target: &str| {
        out.push(BoundCheck {
            id,
            statement,
            value,
            relation,
            target: lit(target),
        });
    };
    let year_rounds = lit("1.6e11");
    let processors = lit("1e4");

    push(
        "pref-spread-sample",
        "Bin(80, 0.8·0.75, ≥41) > 0.9555",
        tail_at_least(80, &ratio(3, 5), 41)?,
        Greater,
        "0.9555",
    );
    push(
        "minority-sample",
        "Bin(80, 0.2 + 0.8·0.25, ≥72) < 1.18e-20",
        tail_at_least(80, &ratio(2, 5), 72)?,
        Less,
        "1.18e-20",
    );
    let majority = tail_at_least(80, &ratio(4, 5), 72)?;
    push(
        "majority-sample",
        "Bin(80, 0.75·0.8 + 0.2, ≥72) < 0.0131",
        majority.clone(),
        Less,
        "0.0131",
    );
    push(
        "majority-sample-fine",
        "Bin(80, 0.75·0.8 + 0.2, ≥72) < 0.01309",
        majority,
        Less,
        "0.01309",
    );
    push(
        "half-sample",
        "Bin(80, 0.5·0.8 + 0.2, ≥72) < 3e-9",
        tail_at_least(80, &ratio(3, 5), 72)?,
        Less,
        "3e-9",
    );
    push(
        "twelve-round-run",
        "0.0131^12 < 1e-22",
        num::pow(lit("0.0131"), 12),
        Less,
        "1e-22",
    );
    push(
        "population-spread",
        "Bin(400, 0.9555, ≤⌊5·400/6⌋) < 1.59e-20",
        population_tail(400, &lit("0.9555"), &ratio(5, 6), Direction::AtMost)?,
        Less,
        "1.59e-20",
    );
    let byzantine = tail_at_least(80, &ratio(1, 5), 48)?;
    push(
        "byzantine-sample",
        "Bin(80, 1/5, ≥48) < 1e-14",
        byzantine.clone(),
        Less,
        "1e-14",
    );
    push(
        "byzantine-two-rounds",
        "Bin(80, 1/5, ≥48)^2 < 1e-28",
        &byzantine * &byzantine,
        Less,
        "1e-28",
    );

    push(
        "horizon-rounds",
        "1000 years at 5 rounds/s < 1.6e11 rounds",
        BigRational::from_integer(Horizon::default().rounds()),
        Less,
        "1.6e11",
    );
    push(
        "population-majority-budget",
        "1.6e11 · 1.59e-20 < 3e-9",
        &year_rounds * lit("1.59e-20"),
        Less,
        "3e-9",
    );
    push(
        "minority-confirmation-budget",
        "1.18e-20 · 1e4 · 1.6e11 < 2e-5",
        lit("1.18e-20") * &processors * &year_rounds,
        Less,
        "2e-5",
    );
    push(
        "repeated-confirmation-budget",
        "1e-22 · 1e4 · 1.6e11 < 2e-7",
        lit("1e-22") * &processors * &year_rounds,
        Less,
        "2e-7",
    );
    push(
        "total-budget",
        "3e-9 + 2e-5 + 2e-7 < 3e-5",
        lit("3e-9") + lit("2e-5") + lit("2e-7"),
        Less,
        "3e-5",
    );

    // Spread from 5/6 to 11/12 of correct processors. The per-processor
    // probability is rounded down before the population tail; the tail is
    // decreasing in it, so the result is an upper bound.
    let tight = tail_at_least(80, &ratio(2, 3), 41)?;
    push(
        "tight-spread-sample",
        "Bin(80, 0.8·5/6, ≥41) > 0.99849",
        tight,
        Greater,
        "0.99849",
    );
    let tight_population = population_tail(400, &lit("0.99849"), &ratio(11, 12), Direction::AtMost)?;
    push(
        "tight-spread-population",
        "Bin(400, 0.99849, ≤⌊11·400/12⌋) < 2e-47",
        tight_population,
        Less,
        "2e-47",
    );
    push(
        "tight-spread-budget",
        "2e-47 · 1.6e11 < 4e-36",
        lit("2e-47") * &year_rounds,
        Less,
        "4e-36",
    );
    push(
        "primed-budget",
        "1e-28 · 1e4 · 1.6e11 < 2e-13",
        lit("1e-28") * &processors * &year_rounds,
        Less,
        "2e-13",
    );

    let w = stuck_window()?;
    push(
        "stuck-window-round",
        "Bin(80, 3/5, ≥48) ≥ 0.548",
        w.per_round,
        AtLeast,
        "0.548",
    );
    push(
        "stuck-window-pair",
        "Bin(80, 3/5, ≥48)^2 ≥ 0.3",
        w.per_pair,
        AtLeast,
        "0.3",
    );
    push(
        "stuck-window-printed",
        "0.71^150 < 1e-22",
        w.printed_failure,
        Less,
        "1e-22",
    );
    push(
        "stuck-window-implied",
        "0.7^150 < 1e-22",
        w.implied_failure,
        Less,
        "1e-22",
    );
    push(
        "stuck-window-exact",
        "(1 − Bin(80, 3/5, ≥48)^2)^150 < 1e-22",
        w.exact_failure,
        Less,
        "1e-22",
    );
    Ok(out)
}
