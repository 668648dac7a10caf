//! Property coverage for ingestion and discovery: permutation-insensitive
//! trace grouping, replay fitness of mined trees, and the conformance
//! symmetry oracle.

use proptest::prelude::*;

use tiltbpm::conformance::{build_observed, check};
use tiltbpm::discovery::{build_dfg, inductive_mine, variants};
use tiltbpm::eventlog::{ingest_str, EventLog};

fn activity() -> impl Strategy<Value = String> {
    proptest::sample::select(vec![
        "A".to_string(),
        "B".to_string(),
        "C".to_string(),
        "D".to_string(),
        "E".to_string(),
    ])
}

fn traces() -> impl Strategy<Value = Vec<Vec<String>>> {
    proptest::collection::vec(proptest::collection::vec(activity(), 0..8), 1..12)
}

fn log_lines(traces: &[Vec<String>]) -> Vec<String> {
    let mut lines = Vec::new();
    for (case, trace) in traces.iter().enumerate() {
        for (step, activity) in trace.iter().enumerate() {
            lines.push(format!(
                r#"{{"ident:eid":{step}, "time:timestamp":"10:{:02}:{:02}", "case:concept:name":"case-{case}", "concept:name":"{activity}"}}"#,
                (step / 60) % 60,
                step % 60,
            ));
        }
    }
    lines
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ingest_is_insensitive_to_line_order(traces in traces(), seed in any::<u64>()) {
        let lines = log_lines(&traces);
        let forward = ingest_str(&lines.join("\n"));

        // Deterministic shuffle driven by the seed.
        let mut shuffled = lines.clone();
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let reordered = ingest_str(&shuffled.join("\n"));
        prop_assert_eq!(forward.log, reordered.log);
    }

    #[test]
    fn event_totals_match_accepted_lines(traces in traces()) {
        let lines = log_lines(&traces);
        let result = ingest_str(&lines.join("\n"));
        prop_assert_eq!(result.accepted, lines.len());
        prop_assert_eq!(result.log.event_count(), result.accepted);
    }

    #[test]
    fn mined_trees_replay_every_variant(traces in traces()) {
        let log = EventLog::from_activity_traces(&traces);
        prop_assume!(log.traces.values().any(|t| !t.is_empty()));
        let tree = inductive_mine(&log).expect("minable");
        for (variant, _) in variants(&log) {
            prop_assert!(tree.accepts(&variant), "{} misses {:?}", tree, variant);
        }
    }

    #[test]
    fn dfg_start_end_totals_balance(traces in traces()) {
        let log = EventLog::from_activity_traces(&traces);
        let dfg = build_dfg(&log);
        let non_empty = traces.iter().filter(|t| !t.is_empty()).count() as u64;
        prop_assert_eq!(dfg.total_starts(), non_empty);
        prop_assert_eq!(dfg.total_ends(), non_empty);
    }

    #[test]
    fn observations_conform_to_themselves(traces in traces()) {
        let lines: Vec<String> = traces
            .iter()
            .enumerate()
            .flat_map(|(case, trace)| {
                trace.iter().enumerate().map(move |(step, activity)| {
                    format!(
                        r#"{{"ident:eid":{step}, "time:timestamp":"10:00:{:02}", "case:concept:name":"case-{case}", "concept:name":"{activity}", "tilt:categories":["cat-{activity}"], "tilt:legalBases":["GDPR-6-1-b"]}}"#,
                        step % 60,
                    )
                })
            })
            .collect();
        let log = ingest_str(&lines.join("\n")).log;
        let normative = build_observed(&log).to_normative();
        let report = check(&normative, &log);
        prop_assert_eq!(report.summary.missing, 0);
        prop_assert_eq!(report.summary.undeclared, 0);
        prop_assert!(report.entries.iter().all(|e| e.attribute_diffs.is_none()));
    }
}
