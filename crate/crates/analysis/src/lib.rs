//! Exact-arithmetic binomial tails, β schedules for error-driven
//! Snowflake⁺, quoted-bound recomputation and union-bound budgets.
//!
//! All probabilities are `BigRational`s; nothing passes through floating
//! point except the starting estimate of a long β scan.

pub mod bounds;
pub mod budget;
pub mod error;
pub mod rational;
pub mod table;
pub mod tail;

pub use bounds::{quoted_bounds, stuck_window, BoundCheck, Relation, StuckWindow, HEADLINE_BOUNDS};
pub use budget::{deployment_budget, error_budget, DeploymentBudget, ErrorBudget, Horizon};
pub use error::AnalysisError;
pub use rational::{parse_rational, render, DEFAULT_PRECISION};
pub use table::{beta_for, beta_for_tip, table1, ParameterRow};
pub use tail::{binomial_tail, population_tail, tail_at_least, tail_at_most, Direction, TailQuery};
