//! Text reports for the analysis targets. Numbers are rendered from exact
//! rationals.

use std::fmt::Write;

use snowfrost_analysis::{deployment_budget, quoted_bounds, render, stuck_window, table1, Horizon};

use crate::error::CliError;

/// A rendered report and whether every recomputed value agrees with its
/// published counterpart.
#[derive(Clone, Debug)]
pub struct Report {
    pub text: String,
    pub ok: bool,
}

pub fn table1_report(precision: usize) -> Result<Report, CliError> {
    let rows = table1()?;
    let mut text = String::new();
    writeln!(
        text,
        "{:>4} {:>8} {:>5} {:>8}  {:<6} Bin(80, 4/5, >= alpha2)",
        "α₂", "ε", "β", "printed", "match"
    )
    .unwrap();
    let mut matched = 0;
    for r in &rows {
        matched += r.matches() as usize;
        writeln!(
            text,
            "{:>4} {:>8} {:>5} {:>8}  {:<6} {}",
            r.alpha2,
            format!("1e{}", r.epsilon_exponent),
            r.beta,
            r.printed,
            if r.matches() { "ok" } else { "DIFF" },
            render(&r.probability, precision)
        )
        .unwrap();
    }
    writeln!(text, "{matched}/{} match", rows.len()).unwrap();
    Ok(Report {
        ok: matched == rows.len(),
        text,
    })
}

pub fn bounds_report(precision: usize) -> Result<Report, CliError> {
    let checks = quoted_bounds()?;
    let mut text = String::new();
    let mut ok = true;
    for c in &checks {
        ok &= c.holds();
        writeln!(
            text,
            "{:<4} {:<26} {} {} {}  [{}]",
            if c.holds() { "ok" } else { "FAIL" },
            c.id,
            render(&c.value, precision),
            c.relation,
            render(&c.target, precision),
            c.statement
        )
        .unwrap();
    }
    let w = stuck_window()?;
    writeln!(
        text,
        "stuck window: per-round {}, per-pair {}",
        render(&w.per_round, precision),
        render(&w.per_pair, precision)
    )
    .unwrap();
    writeln!(
        text,
        "stuck window: 150-pair failure {} (0.71^150 = {}, 0.7^150 = {})",
        render(&w.exact_failure, precision),
        render(&w.printed_failure, precision),
        render(&w.implied_failure, precision)
    )
    .unwrap();
    let passed = checks.iter().filter(|c| c.holds()).count();
    writeln!(text, "{passed}/{} hold", checks.len()).unwrap();
    Ok(Report { text, ok })
}

pub fn budget_report(horizon: Horizon, precision: usize) -> Result<Report, CliError> {
    let b = deployment_budget(horizon)?;
    let mut text = String::new();
    writeln!(
        text,
        "horizon: {} processors, {} years, {} rounds/s = {} rounds",
        horizon.processors, horizon.years, horizon.rounds_per_second, b.rounds
    )
    .unwrap();
    for p in &b.parts {
        writeln!(
            text,
            "{:<4} {:<24} {} < {}",
            if p.holds() { "ok" } else { "FAIL" },
            p.name,
            render(&p.budget.cumulative, precision),
            render(&p.target, precision)
        )
        .unwrap();
    }
    writeln!(
        text,
        "{:<4} {:<24} {} < {} (targets sum {})",
        if b.holds() { "ok" } else { "FAIL" },
        "total",
        render(&b.total, precision),
        render(&b.total_target, precision),
        render(&b.targets_total, precision)
    )
    .unwrap();
    Ok(Report { ok: b.holds(), text })
}
