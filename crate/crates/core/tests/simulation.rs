use std::path::PathBuf;

use proptest::prelude::*;

use num_rational::BigRational;
use ssbpr::metrics::{analyze, cover_len_at, PhaseReplay};
use ssbpr::params::{check_constraints, derive_params, solve_params, Choice};
use ssbpr::rational::{rat, Exact};
use ssbpr::sim::scenario::{DriftMode, InitialPreset, Strategy};
use ssbpr::sim::{run, simulate, RunOptions, Scenario, Trace, TraceRecord};
use ssbpr::Error;

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::from_path(&path).unwrap()
}

fn quick(name: &str) -> Scenario {
    let mut s = scenario(name);
    s.rounds = 4;
    s
}

fn horizon(t: &Trace) -> u64 {
    match t.header().unwrap() {
        TraceRecord::Header { horizon, .. } => *horizon,
        _ => unreachable!(),
    }
}

#[test]
fn metrics_survive_a_round_trip_through_jsonl() {
    let s = quick("n5_r_keeper.toml");
    let (p, trace) = simulate(&s, &RunOptions { trace_messages: true }).unwrap();
    let back = Trace::read_jsonl(&trace.to_jsonl()[..]).unwrap();
    assert_eq!(back, trace);
    assert_eq!(analyze(&back, &p).unwrap(), analyze(&trace, &p).unwrap());
}

#[test]
fn replayed_pulses_match_recorded_pulses() {
    for name in ["n5_r_keeper.toml", "n7_a_keeper.toml"] {
        let s = quick(name);
        let (_, trace) = simulate(&s, &RunOptions::default()).unwrap();
        let replay = PhaseReplay::from_trace(&trace).unwrap();
        let end = horizon(&trace);
        let mut cursor = replay.cursor();
        cursor.seek(end, false).unwrap();
        let mut replayed: Vec<(u64, usize)> = cursor.pulses.iter().copied().filter(|p| p.0 < end).collect();
        let mut recorded: Vec<(u64, usize)> = trace
            .records
            .iter()
            .filter_map(|r| match r {
                TraceRecord::Pulse { time, node } => Some((*time, *node)),
                _ => None,
            })
            .collect();
        replayed.sort();
        recorded.sort();
        assert_eq!(replayed, recorded, "{name}");
        assert!(!recorded.is_empty());
    }
}

#[test]
fn adjust_records_are_consistent() {
    let s = quick("n7_a_keeper.toml");
    let (_, trace) = simulate(&s, &RunOptions::default()).unwrap();
    for r in &trace.records {
        if let TraceRecord::Adjust { theta_before, delta, theta_after, .. } = r {
            let t = s.period as i64;
            assert_eq!((*theta_before as i64 + delta).rem_euclid(t) as u64, *theta_after);
        }
    }
}

#[test]
fn cover_queries_outside_the_horizon_fail() {
    let s = quick("n5_r_keeper.toml");
    let (_, trace) = simulate(&s, &RunOptions::default()).unwrap();
    let end = horizon(&trace);
    assert!(cover_len_at(&trace, end).is_ok());
    assert!(matches!(cover_len_at(&trace, end + 1), Err(Error::OutsideHorizon { .. })));
}

#[test]
fn unanimous_crash_run_has_zero_precision_width() {
    let mut s = quick("n5_r_keeper.toml");
    s.adversary.strategy = Strategy::Crash;
    s.adversary.drift = DriftMode::None;
    s.igc_skew = 0;
    s.initial.preset = InitialPreset::Unanimous;
    s.initial.garbage = false;
    let (p, trace) = simulate(&s, &RunOptions::default()).unwrap();
    let res = analyze(&trace, &p).unwrap();
    assert_eq!(res.stabilization_round, Some(1));
    assert_eq!(res.precision_max, Some(0));
    assert_eq!(res.accuracy_violations, 0);
}

#[test]
fn synchronized_crash_run_is_clean() {
    let mut s = quick("n31_r_keeper.toml");
    s.adversary.strategy = Strategy::Crash;
    s.initial.preset = InitialPreset::Synchronized;
    s.initial.garbage = false;
    s.rounds = 2;
    let (p, trace) = simulate(&s, &RunOptions::default()).unwrap();
    let d = trace.diagnostics().unwrap();
    assert_eq!(d.skew_violations, 0);
    assert_eq!(d.late_nonfaulty, 0);
    assert_eq!(d.missing_nonfaulty, 0);
    assert_eq!(d.malformed + d.duplicates + d.unknown_sender, 0);
    let res = analyze(&trace, &p).unwrap();
    assert!(res.rounds.iter().all(|r| r.synchronized_before && r.success));
}

#[test]
fn out_of_range_target_error_is_rejected_or_flagged() {
    let mut s = quick("n5_r_keeper.toml");
    s.protocol.epsilon1 = Some(Exact(rat(1, 4)));
    let err = simulate(&s, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Unsolvable { .. } | Error::Constraint(_)), "{err}");
    // running anyway marks the trace
    s.protocol.epsilon1 = None;
    let solved = solve_params(&s).unwrap();
    let choice = Choice { target_error: BigRational::new(1.into(), 4.into()), ..solved.choice() };
    let p = derive_params(&s, &choice).unwrap();
    assert!(check_constraints(&p).contains(&"error_ceiling"));
    let trace = run(&s, &p, &RunOptions::default()).unwrap();
    assert!(matches!(trace.header().unwrap(), TraceRecord::Header { constraints_ok: false, .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn timing_assumptions_hold_under_any_strategy(seed in 0u64..1_000_000, strategy in 0usize..4, rushing: bool) {
        let mut s = quick("n5_r_keeper.toml");
        s.seed = seed;
        s.adversary.strategy = Strategy::ALL[strategy];
        s.adversary.rushing = rushing;
        let (p, trace) = simulate(&s, &RunOptions::default()).unwrap();
        let d = trace.diagnostics().unwrap();
        prop_assert_eq!(d.skew_violations, 0);
        prop_assert_eq!(d.late_nonfaulty, 0);
        prop_assert_eq!(d.overlaps, 0);
        let res = analyze(&trace, &p).unwrap();
        for r in &res.rounds {
            prop_assert!(r.cover_after.0 <= rat(1, 2));
            if r.synchronized_before {
                prop_assert!(r.continuity_ok || !r.success);
            }
        }
    }
}
