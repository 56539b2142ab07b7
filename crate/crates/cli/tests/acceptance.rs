//! Acceptance gate: runs every primary criterion and prints one line each.
//! Exits nonzero if any criterion fails.

use std::time::Instant;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};

use snowfrost_analysis::{
    binomial_tail, deployment_budget, quoted_bounds, table1, Direction, Horizon, TailQuery, HEADLINE_BOUNDS,
};
use snowfrost_cli::presets::preset;
use snowfrost_cli::simulate::sweep;
use snowfrost_core::frosty::FrostyParams;
use snowfrost_core::snowflake::{Rule, SnowflakeParams};
use snowfrost_simnet::search::brute_force_n7;
use snowfrost_simnet::{run_traced, RunOutput, SimConfig, Strategy, ViolationKind};

type Outcome = Result<String, String>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `m · 10^e` exactly.
fn sci(m: i64, e: i32) -> BigRational {
    let ten = BigRational::from_integer(BigInt::from(10));
    let p = num::pow(ten, e.unsigned_abs() as usize);
    let m = BigRational::from_integer(BigInt::from(m));
    if e >= 0 {
        m * p
    } else {
        m / p
    }
}

fn binom(k: u64, c: u64) -> BigInt {
    let mut r = BigInt::one();
    for i in 0..c {
        r = r * BigInt::from(k - i) / BigInt::from(i + 1);
    }
    r
}

/// Plain term-by-term binomial tail, independent of the analysis crate.
fn tail(k: u64, p: &BigRational, lo: u64, hi: u64) -> BigRational {
    let mut s = BigRational::zero();
    let one_minus = BigRational::one() - p;
    for c in lo..=hi.min(k) {
        s += BigRational::from_integer(binom(k, c))
            * num::pow(p.clone(), c as usize)
            * num::pow(one_minus.clone(), (k - c) as usize);
    }
    s
}

fn at_least(k: u64, p: &BigRational, m: u64) -> BigRational {
    tail(k, p, m, k)
}

fn at_most(k: u64, p: &BigRational, m: u64) -> BigRational {
    tail(k, p, 0, m)
}

const TABLE1_EXPECTED: [(u64, [u32; 3]); 16] = [
    (80, [3, 2, 1]),
    (79, [4, 3, 1]),
    (78, [5, 3, 2]),
    (77, [5, 4, 2]),
    (76, [6, 4, 2]),
    (75, [7, 5, 2]),
    (74, [9, 6, 3]),
    (73, [10, 7, 3]),
    (72, [12, 8, 4]),
    (71, [15, 10, 4]),
    (70, [18, 12, 5]),
    (69, [23, 15, 7]),
    (68, [29, 18, 8]),
    (67, [37, 24, 10]),
    (66, [48, 31, 14]),
    (65, [65, 41, 18]),
];

fn table_reproduction() -> Outcome {
    let start = Instant::now();
    let rows = table1().map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if rows.len() != 48 {
        return Err(format!("{} cells", rows.len()));
    }
    let mut matched = 0;
    for (alpha2, betas) in TABLE1_EXPECTED {
        for (col, e) in [-22, -14, -6].into_iter().enumerate() {
            let cell = rows
                .iter()
                .find(|r| r.alpha2 == alpha2 && r.epsilon_exponent == e)
                .ok_or(format!("missing ({alpha2}, 1e{e})"))?;
            if cell.beta != betas[col] {
                return Err(format!("α₂={alpha2} ε=1e{e}: β={} expected {}", cell.beta, betas[col]));
            }
            // β is the least power of the per-round probability below ε.
            let p = at_least(80, &(q(1, 5) + q(4, 5) * q(3, 4)), alpha2);
            let eps = sci(1, e);
            let b = cell.beta as usize;
            if !(num::pow(p.clone(), b) < eps && (b == 1 || num::pow(p, b - 1) >= eps)) {
                return Err(format!("α₂={alpha2} ε=1e{e}: β={b} not minimal"));
            }
            matched += 1;
        }
    }
    if elapsed.as_secs_f64() >= 10.0 {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{matched}/48 cells in {:.2?}", elapsed))
}

fn quoted_bounds_hold() -> Outcome {
    let third = q(1, 5) + q(4, 5) * q(1, 4);
    let majority = q(3, 4) * q(4, 5) + q(1, 5);
    let oracle = [
        ("pref-spread-sample", at_least(80, &q(3, 5), 41) > sci(9555, -4)),
        ("minority-sample", at_least(80, &third, 72) < sci(118, -22)),
        ("majority-sample", at_least(80, &majority, 72) < sci(131, -4)),
        ("twelve-round-run", num::pow(sci(131, -4), 12) < sci(1, -22)),
        (
            "population-spread",
            at_most(400, &sci(9555, -4), 5 * 400 / 6) < sci(159, -22),
        ),
        ("byzantine-sample", at_least(80, &q(1, 5), 48) < sci(1, -14)),
    ];
    let checks = quoted_bounds().map_err(|e| e.to_string())?;
    for (id, holds) in oracle {
        if !HEADLINE_BOUNDS.contains(&id) {
            return Err(format!("{id} is not a headline bound"));
        }
        let c = checks.iter().find(|c| c.id == id).ok_or(format!("{id} missing"))?;
        if !holds || !c.holds() {
            return Err(format!("{id}: oracle {holds}, library {}", c.holds()));
        }
    }
    Ok(format!(
        "6/6 hold exactly ({} inequalities checked in total)",
        checks.len()
    ))
}

fn budgets_hold() -> Outcome {
    let b = deployment_budget(Horizon::default()).map_err(|e| e.to_string())?;
    let rounds = BigRational::from_integer(BigInt::from(1000u64 * 31_557_600 * 5));
    let procs = BigRational::from_integer(BigInt::from(10_000));
    let expected = [
        ("population-majority", sci(159, -22) * &rounds, sci(3, -9)),
        ("minority-confirmation", sci(118, -22) * &rounds * &procs, sci(2, -5)),
        ("repeated-confirmation", sci(1, -22) * &rounds * &procs, sci(2, -7)),
    ];
    let mut sum = BigRational::zero();
    for (name, value, target) in &expected {
        let part = b
            .parts
            .iter()
            .find(|p| p.name == *name)
            .ok_or(format!("{name} missing"))?;
        if &part.budget.cumulative != value || value >= target || !part.holds() {
            return Err(format!(
                "{name}: {} vs target {}",
                value.to_f64().unwrap(),
                target.to_f64().unwrap()
            ));
        }
        sum += value;
    }
    if sum != b.total || sum >= sci(3, -5) || !b.holds() {
        return Err(format!("total {}", sum.to_f64().unwrap()));
    }
    Ok(format!("total {:.4e} < 3e-5", sum.to_f64().unwrap()))
}

fn oracle_equivalence() -> Outcome {
    let mut compared = 0u64;
    for k in 0..=20u64 {
        // Count every one of the 2^k outcomes by its number of successes.
        let mut by_count = vec![0u64; k as usize + 1];
        for outcome in 0u64..(1 << k) {
            by_count[outcome.count_ones() as usize] += 1;
        }
        for x in [q(1, 5), q(2, 5), q(3, 5), q(4, 5)] {
            let weights: Vec<BigRational> = (0..=k)
                .map(|c| {
                    BigRational::from_integer(BigInt::from(by_count[c as usize]))
                        * num::pow(x.clone(), c as usize)
                        * num::pow(BigRational::one() - &x, (k - c) as usize)
                })
                .collect();
            for m in 0..=k {
                let ge: BigRational = weights.iter().skip(m as usize).sum();
                let le: BigRational = weights.iter().take(m as usize + 1).sum();
                let lib_ge = binomial_tail(&TailQuery {
                    k,
                    x: x.clone(),
                    m,
                    direction: Direction::AtLeast,
                })
                .map_err(|e| e.to_string())?;
                let lib_le = binomial_tail(&TailQuery {
                    k,
                    x: x.clone(),
                    m,
                    direction: Direction::AtMost,
                })
                .map_err(|e| e.to_string())?;
                if lib_ge != ge || lib_le != le {
                    return Err(format!("k={k} x={x} m={m}"));
                }
                compared += 2;
            }
        }
    }
    Ok(format!("{compared} tails equal brute force"))
}

fn runs(name: &str, seeds: u64) -> Result<(SimConfig, Vec<RunOutput>), String> {
    let cfg = preset(name).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..seeds).collect();
    let out = sweep(&cfg, &seeds, None).map_err(|e| e.to_string())?;
    Ok((cfg, out))
}

fn snowflake_validity() -> Outcome {
    let (cfg, out) = runs("snowflake-unanimous", 100)?;
    if (cfg.n, cfg.f) != (500, 0) {
        return Err("preset is not n=500, f=0".into());
    }
    for r in &out {
        let m = &r.metrics;
        if !r.verdicts.is_clean()
            || m.decided != 500
            || m.decided_ones != 500
            || m.first_decision_round != Some(12)
            || m.last_decision_round != Some(12)
        {
            return Err(format!("seed {}: {m:?}", m.seed));
        }
    }
    Ok(format!("{} seeds, all 500 decide 1 at round 12", out.len()))
}

fn snowflake_agreement() -> Outcome {
    let mut lines = Vec::new();
    for name in ["snowflake-split-keeper", "snowflake-opposite-color"] {
        let (cfg, out) = runs(name, 1000)?;
        if (cfg.n, cfg.f, cfg.max_timeslots / 2) != (500, 99, 5000) {
            return Err(format!("{name}: wrong scale"));
        }
        let bad: usize = out.iter().map(|r| r.verdicts.violations.len()).sum();
        let agreement: usize = out.iter().map(|r| r.verdicts.count(ViolationKind::Agreement)).sum();
        if bad > 0 {
            return Err(format!("{name}: {bad} violations"));
        }
        let decided: u64 = out.iter().map(|r| r.metrics.decided as u64).sum();
        lines.push(format!(
            "{name}: {} seeds, {agreement} agreement violations, {decided} decisions",
            out.len()
        ));
    }
    Ok(lines.join("; "))
}

fn snowman_consistency() -> Outcome {
    let (_, out) = runs("snowman-fork", 500)?;
    let mut min_bits = usize::MAX;
    for r in &out {
        let v = &r.verdicts;
        let c = v.count(ViolationKind::FinalRegressed) + v.count(ViolationKind::FinalsIncomparable);
        if c > 0 || !v.is_clean() {
            return Err(format!("seed {}: {:?}", r.metrics.seed, v.violations.first()));
        }
        min_bits = min_bits.min(r.metrics.min_final_bits.unwrap_or(0));
    }
    if min_bits == 0 {
        return Err("some seed finalized nothing".into());
    }
    let changes: u64 = out.iter().map(|r| r.verdicts.stats.final_changes).sum();
    Ok(format!(
        "{} seeds, {changes} final updates checked, every final ≥ {min_bits} bits",
        out.len()
    ))
}

fn frosty_liveness(out: &[RunOutput], cfg: &SimConfig) -> Outcome {
    let params: FrostyParams = serde_json::from_value(cfg.params.clone()).map_err(|e| e.to_string())?;
    if (
        cfg.n,
        cfg.f,
        cfg.adversary.strategy,
        params.gamma,
        params.beta,
        params.alpha3,
    ) != (500, 99, Strategy::SplitKeeper, 300, 14, 48)
    {
        return Err("preset does not match the criterion's parameters".into());
    }
    let stuck_bound = 6 * cfg.delta * params.gamma as u64;
    let odd_bound = 3 * cfg.delta * (cfg.f as u64 + 2);
    let mut worst_stuck = 0;
    let mut worst_odd = 0;
    for r in out {
        let v = &r.verdicts;
        let s = &v.stats;
        let seed = r.metrics.seed;
        if !v.is_clean() {
            return Err(format!("seed {seed}: {:?}", v.violations.first()));
        }
        // The run stops on reaching its final even epoch, which opens one
        // last obligation whose window never elapses.
        if s.obligations_met == 0
            || s.obligations_met + s.obligations_inconclusive != s.obligations
            || s.obligations_inconclusive > 1
        {
            return Err(format!(
                "seed {seed}: stuck obligations {} met {} open at end {}",
                s.obligations, s.obligations_met, s.obligations_inconclusive
            ));
        }
        if s.odd_epochs_completed == 0 || s.odd_epochs_unfinished != 0 || r.metrics.confirmed_epochs == 0 {
            return Err(format!(
                "seed {seed}: odd epochs {} unfinished {}",
                s.odd_epochs_completed, s.odd_epochs_unfinished
            ));
        }
        let odd = s.odd_epoch_max_duration.unwrap_or(u64::MAX);
        if odd > odd_bound {
            return Err(format!("seed {seed}: odd epoch lasted {odd} > {odd_bound}"));
        }
        let stuck = s.claim3_max_latency.unwrap_or(u64::MAX);
        if stuck > stuck_bound {
            return Err(format!(
                "seed {seed}: progress {stuck} slots after a stuck condition > {stuck_bound}"
            ));
        }
        worst_stuck = worst_stuck.max(stuck);
        worst_odd = worst_odd.max(odd);
    }
    Ok(format!(
        "{} seeds; worst stuck-to-progress {worst_stuck} ≤ {} slots; worst odd epoch {worst_odd} ≤ {odd_bound} slots",
        out.len(),
        stuck_bound
    ))
}

fn frosty_quorum_safety(sets: &[(&str, &[RunOutput])]) -> Outcome {
    let mut equivocations = 0;
    let mut qcs = 0;
    for (name, out) in sets {
        for r in out.iter() {
            let v = &r.verdicts;
            let c = v.count(ViolationKind::ConflictingQc) + v.count(ViolationKind::ConflictingConfirm);
            if c > 0 {
                return Err(format!("{name} seed {}: {c} quorum violations", r.metrics.seed));
            }
            qcs += v.stats.stage1_qcs;
            equivocations += r.metrics.proposals.saturating_sub(r.metrics.confirmed_epochs);
        }
    }
    if equivocations == 0 {
        return Err("no odd epoch saw more than one proposal".into());
    }
    let report = brute_force_n7().map_err(|e| e.to_string())?;
    if !report.violations.is_empty() || report.unconfirmed != 0 {
        return Err(format!("n=7 search: {:?}", report.violations.first()));
    }
    Ok(format!(
        "{qcs} stage-1 QCs, {equivocations} extra proposals, no conflicts; n=7 search: {} schedules clean",
        report.cases
    ))
}

fn determinism() -> Outcome {
    for (name, _) in snowfrost_cli::presets::PRESETS {
        let cfg = preset(name).map_err(|e| e.to_string())?.with_seed(11);
        let (a, ma) = run_traced(&cfg).map_err(|e| e.to_string())?;
        let (b, mb) = run_traced(&cfg).map_err(|e| e.to_string())?;
        if a != b || ma != mb {
            return Err(format!("{name} differs"));
        }
    }
    Ok(format!(
        "{} presets byte-identical",
        snowfrost_cli::presets::PRESETS.len()
    ))
}

fn error_driven_latency() -> Outcome {
    let (cfg, out) = runs("snowflake-error-driven", 100)?;
    let params: SnowflakeParams = serde_json::from_value(cfg.params.clone()).map_err(|e| e.to_string())?;
    // The rules must be the ε = 1e-22 column.
    let column: Vec<Rule> = table1()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|r| r.epsilon_exponent == -22)
        .map(|r| Rule {
            alpha2: r.alpha2 as u32,
            beta: r.beta,
        })
        .collect();
    if params.rules != column {
        return Err("preset rules differ from the 1e-22 column".into());
    }
    let fast = params
        .rules
        .iter()
        .position(|r| *r == Rule { alpha2: 80, beta: 3 })
        .ok_or("no (80, 3) rule")?;
    for r in &out {
        let m = &r.metrics;
        if !r.verdicts.is_clean()
            || m.decided != 500
            || m.first_decision_round != Some(3)
            || m.last_decision_round != Some(3)
            || m.min_rule != Some(fast)
            || m.max_rule != Some(fast)
        {
            return Err(format!("seed {}: {m:?}", m.seed));
        }
    }
    Ok(format!("{} seeds, all decide at round 3 by (80, 3)", out.len()))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, f: &dyn Fn() -> Outcome| {
        let start = Instant::now();
        let r = f();
        let took = start.elapsed();
        match r {
            Ok(msg) => println!("PASS {name}: {msg} [{took:.1?}]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name}: {msg} [{took:.1?}]");
            }
        }
    };
    report("table1-reproduction", &table_reproduction);
    report("quoted-bounds", &quoted_bounds_hold);
    report("union-bound-budgets", &budgets_hold);
    report("analysis-oracle-equivalence", &oracle_equivalence);
    report("snowflake-validity", &snowflake_validity);
    report("snowflake-agreement-under-attack", &snowflake_agreement);
    report("snowman-consistency", &snowman_consistency);

    let frosty = || -> Result<_, String> {
        let (cfg, live) = runs("frosty-splitkeeper", 10)?;
        let (_, equiv) = runs("frosty-equivocator", 10)?;
        Ok((cfg, live, equiv))
    };
    match frosty() {
        Ok((cfg, live, equiv)) => {
            report("frosty-liveness", &|| frosty_liveness(&live, &cfg));
            report("frosty-quorum-safety", &|| {
                frosty_quorum_safety(&[("frosty-splitkeeper", &live), ("frosty-equivocator", &equiv)])
            });
        }
        Err(e) => {
            report("frosty-liveness", &|| Err(e.clone()));
            report("frosty-quorum-safety", &|| Err(e.clone()));
        }
    }
    report("determinism", &determinism);
    report("error-driven-latency", &error_driven_latency);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
