//! Seed sweeps over a configuration, and trace replay.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use snowfrost_simnet::{read_trace, replay, run, write_csv, Metrics, RunOutput, SimConfig, Verdicts};

use crate::error::CliError;

/// Parses `N` (seeds `0..N`), `A..B` (half-open range) or `a,b,c`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list {text:?}: expected N, A..B or a,b,c"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a >= b {
            return Err(bad());
        }
        Ok((a..b).collect())
    } else if text.contains(',') {
        text.split(',').map(num).collect()
    } else {
        let n = num(text)?;
        if n == 0 {
            return Err(bad());
        }
        Ok((0..n).collect())
    }
}

fn run_name(cfg: &SimConfig) -> &str {
    if cfg.name.is_empty() {
        "run"
    } else {
        &cfg.name
    }
}

/// Runs `cfg` once per seed on the worker pool. With `out`, writes one
/// trace per seed plus `metrics.csv` and `verdicts.json` into it. Results
/// are in seed order.
pub fn sweep(cfg: &SimConfig, seeds: &[u64], out: Option<&Path>) -> Result<Vec<RunOutput>, CliError> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let c = cfg.with_seed(seed);
            match out {
                None => Ok(run(&c, None)?),
                Some(dir) => {
                    let path = dir.join(format!("{}-{seed}.jsonl", run_name(cfg)));
                    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
                    let mut w = BufWriter::new(file);
                    Ok(run(&c, Some(&mut w))?)
                }
            }
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    if let Some(dir) = out {
        let path = dir.join("metrics.csv");
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let rows: Vec<Metrics> = runs.iter().map(|r| r.metrics.clone()).collect();
        write_csv(file, &rows)?;
        let path = dir.join("verdicts.json");
        let verdicts: Vec<&Verdicts> = runs.iter().map(|r| &r.verdicts).collect();
        let mut file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        serde_json::to_writer_pretty(&mut file, &verdicts)?;
        file.write_all(b"\n").map_err(|e| CliError::io(&path, e))?;
    }
    Ok(runs)
}

/// One line per run plus a total.
pub fn summary(runs: &[RunOutput]) -> String {
    let mut text = String::new();
    let mut dirty = 0;
    for r in runs {
        let m = &r.metrics;
        let v = &r.verdicts;
        if v.is_clean() {
            text += &format!(
                "seed {}: clean ({} slots{})\n",
                m.seed,
                m.slots,
                if m.halted { ", halted" } else { "" }
            );
        } else {
            dirty += 1;
            text += &format!("seed {}: {} violations\n", m.seed, v.violations.len());
            for x in v.violations.iter().take(5) {
                text += &format!("  t={} {:?} procs={:?}: {}\n", x.t, x.kind, x.procs, x.detail);
            }
        }
    }
    text += &format!("{} runs, {} with violations\n", runs.len(), dirty);
    text
}

/// Re-checks a trace file with the monitors only.
pub fn replay_file(path: &Path) -> Result<RunOutput, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let records = read_trace(BufReader::new(file))?;
    Ok(replay(&records))
}

/// Stable JSON rendering of verdicts.
pub fn verdicts_json(v: &Verdicts) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("5..8").unwrap(), vec![5, 6, 7]);
        assert_eq!(parse_seeds("9, 4").unwrap(), vec![9, 4]);
        for bad in ["0", "x", "4..4", "1,,2"] {
            assert!(parse_seeds(bad).is_err(), "{bad}");
        }
    }
}
