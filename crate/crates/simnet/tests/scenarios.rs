use std::sync::Arc;

use snowfrost_core::frosty::{Message, StuckMsg};
use snowfrost_core::BitString;
use snowfrost_simnet::frosty_sim::Network;
use snowfrost_simnet::search::brute_force_n7;
use snowfrost_simnet::trace::{Bits, Recipients};
use snowfrost_simnet::{
    read_trace, replay, run, run_traced, Event, Record, Recorder, SimConfig, SimError, TraceLevel, ViolationKind,
};

fn cfg(json: &str) -> SimConfig {
    SimConfig::from_json(json).unwrap()
}

fn small_snowflake() -> SimConfig {
    cfg(r#"{"protocol": "snowflake", "n": 60, "f": 11, "max_timeslots": 400,
            "adversary": {"strategy": "split-keeper"}, "inputs": {"kind": "random"}, "trace": "full"}"#)
}

fn small_snowman() -> SimConfig {
    cfg(r#"{"protocol": "snowman", "n": 40, "f": 7, "max_timeslots": 40,
            "adversary": {"strategy": "equivocator"}, "block_gen": {"policy": "forking", "period": 2},
            "label_width": 8}"#)
}

fn small_frosty() -> SimConfig {
    cfg(r#"{"protocol": "frosty", "n": 40, "f": 7, "max_timeslots": 3000,
            "params": {"gamma": 10},
            "adversary": {"strategy": "equivocator"}, "block_gen": {"policy": "forking", "period": 4},
            "label_width": 8, "stop_epoch": 6}"#)
}

#[test]
fn same_seed_gives_identical_bytes() {
    for c in [small_snowflake(), small_snowman(), small_frosty()] {
        let c = c.with_seed(7);
        let (a, ma) = run_traced(&c).unwrap();
        let (b, mb) = run_traced(&c).unwrap();
        assert!(a == b, "{:?} traces differ", c.protocol);
        assert_eq!(ma.metrics, mb.metrics);
        let (other, _) = run_traced(&c.with_seed(8)).unwrap();
        assert!(a != other, "{:?} ignores the seed", c.protocol);
    }
}

#[test]
fn replay_reproduces_verdicts_and_metrics() {
    for c in [small_snowflake(), small_snowman(), small_frosty()] {
        let (bytes, live) = run_traced(&c.with_seed(3)).unwrap();
        let records = read_trace(&bytes[..]).unwrap();
        let first = replay(&records);
        let second = replay(&records);
        assert_eq!(first, second);
        assert_eq!(first.verdicts, live.verdicts);
        assert_eq!(first.metrics, live.metrics);
        assert!(
            live.verdicts.is_clean(),
            "{:?}: {:?}",
            c.protocol,
            live.verdicts.violations
        );
    }
}

/// With no faults and unanimous inputs every sample is all-agreeing, so
/// every processor decides at round β exactly.
#[test]
fn unanimous_runs_decide_at_beta() {
    for beta in [1u32, 5, 12] {
        let c = cfg(&format!(
            r#"{{"protocol": "snowflake", "n": 50, "f": 0, "max_timeslots": 100,
                "params": {{"k": 80, "alpha1": 41, "alpha2": 72, "beta": {beta}}},
                "inputs": {{"kind": "unanimous", "value": false}}}}"#
        ));
        let out = run(&c, None).unwrap();
        assert!(out.verdicts.is_clean());
        assert_eq!(out.metrics.decided, 50);
        assert_eq!(out.metrics.decided_zeros, 50);
        assert_eq!(out.metrics.first_decision_round, Some(beta as u64));
        assert_eq!(out.metrics.last_decision_round, Some(beta as u64));
    }
}

#[test]
fn degenerate_population_is_rejected() {
    let c = cfg(r#"{"protocol": "snowflake", "n": 1, "f": 0, "max_timeslots": 10}"#);
    assert!(matches!(run(&c, None), Err(SimError::Invalid(_))));
}

#[test]
fn honest_snowman_is_clean() {
    let c = cfg(r#"{"protocol": "snowman", "n": 30, "f": 0, "max_timeslots": 60,
                   "block_gen": {"policy": "single-chain", "period": 2}, "label_width": 8}"#);
    let out = run(&c, None).unwrap();
    assert!(out.verdicts.is_clean(), "{:?}", out.verdicts.violations);
    assert!(out.metrics.min_final_bits.unwrap() > 0);
}

fn retarget_final(records: &mut [Record], pick: impl Fn(&Event) -> bool, value: BitString) {
    let r = records
        .iter_mut()
        .rev()
        .find(|r| pick(&r.event))
        .expect("a final event");
    if let Event::Final { value: v, .. } = &mut r.event {
        *v = Bits(value);
    }
}

/// A single edited final makes two correct finals incomparable.
#[test]
fn tampered_final_is_flagged() {
    let c = cfg(r#"{"protocol": "snowman", "n": 30, "f": 0, "max_timeslots": 60,
                   "block_gen": {"policy": "single-chain", "period": 2}, "label_width": 8}"#);
    let (bytes, _) = run_traced(&c).unwrap();
    let mut records = read_trace(&bytes[..]).unwrap();
    let Some(Event::Final { value, .. }) = records
        .iter()
        .rev()
        .map(|r| &r.event)
        .find(|e| matches!(e, Event::Final { .. }))
    else {
        panic!("no final");
    };
    let mut flipped = value.0.clone();
    let last = flipped.len() - 1;
    let bit = flipped.get(last).unwrap();
    flipped.truncate(last);
    flipped.push(!bit);
    retarget_final(&mut records, |e| matches!(e, Event::Final { .. }), flipped);
    let v = replay(&records).verdicts;
    assert!(v.count(ViolationKind::FinalsIncomparable) > 0, "{:?}", v.violations);
}

#[test]
fn forged_relay_is_refused_and_flagged() {
    let correct = vec![true, false, true];
    let mut rec = Recorder::new(None, TraceLevel::Summary, false);
    let mut net = Network::default();
    let msg = Message::Stuck(StuckMsg {
        epoch: 0,
        final_value: Arc::new(BitString::new()),
        signer: 0,
    });
    assert!(!net.send(&mut rec, 4, 1, Recipients::all(), msg.clone(), &correct));
    assert!(net.send(&mut rec, 5, 0, Recipients::all(), msg.clone(), &correct));
    assert!(net.send(&mut rec, 6, 1, Recipients::all(), msg, &correct));

    // The monitor flags the same relay if it ever reaches a trace.
    let (bytes, _) = run_traced(&small_frosty()).unwrap();
    let mut records = read_trace(&bytes[..]).unwrap();
    let finish = records.pop().unwrap();
    let t = finish.t;
    let victim = records
        .iter()
        .find_map(|r| match &r.event {
            Event::RunStart { corrupt, config, .. } => (0..config.n).find(|i| !corrupt.contains(i)),
            _ => None,
        })
        .unwrap();
    let relay = (victim + 1) % 40;
    records.push(Record {
        t,
        event: Event::Envelope {
            signer: Some(victim),
            relay,
            kind: "stuck".into(),
            payload: "999:0:".into(),
            to: Recipients::all(),
            sent: t,
            deliver: t + 1,
        },
    });
    records.push(finish);
    let v = replay(&records).verdicts;
    assert_eq!(v.count(ViolationKind::Forgery), 1, "{:?}", v.violations);
}

#[test]
fn late_delivery_is_flagged() {
    let (bytes, _) = run_traced(&small_frosty()).unwrap();
    let mut records = read_trace(&bytes[..]).unwrap();
    let r = records
        .iter_mut()
        .find(|r| matches!(r.event, Event::Envelope { .. }))
        .unwrap();
    if let Event::Envelope { deliver, .. } = &mut r.event {
        *deliver += 1;
    }
    assert_eq!(replay(&records).verdicts.count(ViolationKind::LateDelivery), 1);
}

#[test]
fn truncated_trace_is_rejected() {
    let (bytes, _) = run_traced(&small_snowman()).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let cut: Vec<&str> = text.lines().collect();
    let partial = cut[..cut.len() - 1].join("\n");
    assert!(matches!(read_trace(partial.as_bytes()), Err(SimError::TruncatedTrace)));
}

#[test]
fn exhaustive_small_schedule_search_is_clean() {
    let report = brute_force_n7().unwrap();
    assert_eq!(report.cases, 4096 * 4);
    assert!(
        report.violations.is_empty(),
        "{:?}",
        &report.violations[..report.violations.len().min(5)]
    );
    assert_eq!(report.unconfirmed, 0);
    assert!(report.confirmed_in_first_round > 0);
    assert!(report.confirmed_in_first_round < report.cases);
}
