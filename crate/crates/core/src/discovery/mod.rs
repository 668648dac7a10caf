//! Control-flow discovery from transparency event logs: directly-follows
//! graphs, inductive mining into process trees, and BPMN conversion.

mod miner;
mod to_bpmn;
mod tree;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::eventlog::EventLog;

pub use miner::{inductive_mine, MineError};
pub use to_bpmn::tree_to_bpmn;
pub use tree::ProcessTree;

/// Directly-follows statistics of a log.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dfg {
    pub edge_counts: BTreeMap<(String, String), u64>,
    pub start_counts: BTreeMap<String, u64>,
    pub end_counts: BTreeMap<String, u64>,
    pub activity_counts: BTreeMap<String, u64>,
    /// Traces without events, counted separately.
    pub empty_traces: u64,
}

impl Dfg {
    pub fn total_starts(&self) -> u64 {
        self.start_counts.values().sum()
    }

    pub fn total_ends(&self) -> u64 {
        self.end_counts.values().sum()
    }
}

/// Count consecutive activity pairs, starts, and ends over all traces.
pub fn build_dfg(log: &EventLog) -> Dfg {
    dfg_of_variants(&variants(log))
}

pub(crate) fn dfg_of_variants(variants: &BTreeMap<Vec<String>, u64>) -> Dfg {
    let mut dfg = Dfg::default();
    for (trace, count) in variants {
        match (trace.first(), trace.last()) {
            (Some(first), Some(last)) => {
                *dfg.start_counts.entry(first.clone()).or_insert(0) += count;
                *dfg.end_counts.entry(last.clone()).or_insert(0) += count;
            }
            _ => {
                dfg.empty_traces += count;
                continue;
            }
        }
        for activity in trace {
            *dfg.activity_counts.entry(activity.clone()).or_insert(0) += count;
        }
        for pair in trace.windows(2) {
            let key = (pair[0].clone(), pair[1].clone());
            *dfg.edge_counts.entry(key).or_insert(0) += count;
        }
    }
    dfg
}

/// The exact multiset of distinct activity sequences.
pub fn variants(log: &EventLog) -> BTreeMap<Vec<String>, u64> {
    let mut variants = BTreeMap::new();
    for sequence in log.activity_sequences() {
        *variants.entry(sequence).or_insert(0) += 1;
    }
    variants
}

/// DOT rendering of a directly-follows graph for inspection.
pub fn dfg_to_dot(dfg: &Dfg) -> String {
    fn quoted(s: &str) -> String {
        format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
    }

    let mut out = String::from("digraph dfg {\n  rankdir=LR;\n");
    out.push_str("  __start [shape=point, label=\"\"];\n");
    out.push_str("  __end [shape=doublecircle, label=\"\"];\n");
    for (activity, count) in &dfg.activity_counts {
        let _ = writeln!(out, "  {} [shape=box, label={}];", quoted(activity), {
            quoted(&format!("{activity} ({count})"))
        });
    }
    for (activity, count) in &dfg.start_counts {
        let _ = writeln!(out, "  __start -> {} [label=\"{count}\"];", quoted(activity));
    }
    for ((from, to), count) in &dfg.edge_counts {
        let _ = writeln!(out, "  {} -> {} [label=\"{count}\"];", quoted(from), quoted(to));
    }
    for (activity, count) in &dfg.end_counts {
        let _ = writeln!(out, "  {} -> __end [label=\"{count}\"];", quoted(activity));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_of(traces: &[&[&str]]) -> EventLog {
        let traces: Vec<Vec<&str>> = traces.iter().map(|t| t.to_vec()).collect();
        EventLog::from_activity_traces(&traces)
    }

    #[test]
    fn counts_consecutive_pairs() {
        let log = log_of(&[&["A", "B", "C"], &["A", "C"]]);
        let dfg = build_dfg(&log);
        let edge = |a: &str, b: &str| dfg.edge_counts.get(&(a.into(), b.into())).copied();
        assert_eq!(edge("A", "B"), Some(1));
        assert_eq!(edge("B", "C"), Some(1));
        assert_eq!(edge("A", "C"), Some(1));
        assert_eq!(dfg.edge_counts.len(), 3);
        assert_eq!(dfg.start_counts.get("A"), Some(&2));
        assert_eq!(dfg.end_counts.get("C"), Some(&2));
    }

    #[test]
    fn empty_log_has_empty_maps() {
        let dfg = build_dfg(&EventLog::default());
        assert!(dfg.edge_counts.is_empty());
        assert!(dfg.start_counts.is_empty());
        assert!(dfg.end_counts.is_empty());
        assert!(dfg.activity_counts.is_empty());
    }

    #[test]
    fn self_loop_counts_as_edge() {
        let log = log_of(&[&["A", "A"]]);
        let dfg = build_dfg(&log);
        assert_eq!(dfg.edge_counts.get(&("A".into(), "A".into())), Some(&1));
    }

    #[test]
    fn starts_and_ends_balance_non_empty_traces() {
        let log = log_of(&[&["A", "B"], &["B"], &[], &["A"]]);
        let dfg = build_dfg(&log);
        assert_eq!(dfg.total_starts(), 3);
        assert_eq!(dfg.total_ends(), 3);
        assert_eq!(dfg.empty_traces, 1);
    }

    #[test]
    fn variants_count_distinct_sequences() {
        let log = log_of(&[&["A", "B"], &["A", "B"], &["A", "C"]]);
        let variants = variants(&log);
        assert_eq!(variants.len(), 2);
        assert_eq!(variants[&vec!["A".to_string(), "B".to_string()]], 2);
        assert_eq!(variants[&vec!["A".to_string(), "C".to_string()]], 1);
    }

    #[test]
    fn variants_of_empty_log_is_empty() {
        assert!(variants(&EventLog::default()).is_empty());
    }

    #[test]
    fn identical_traces_collapse_to_one_variant() {
        let traces: Vec<Vec<&str>> = (0..7).map(|_| vec!["A", "B"]).collect();
        let log = EventLog::from_activity_traces(&traces);
        let variants = variants(&log);
        assert_eq!(variants.len(), 1);
        assert_eq!(variants.values().next(), Some(&7));
    }

    #[test]
    fn dot_export_names_all_edges() {
        let log = log_of(&[&["A", "B"]]);
        let dot = dfg_to_dot(&build_dfg(&log));
        assert!(dot.contains("\"A\" -> \"B\" [label=\"1\"]"));
        assert!(dot.contains("__start -> \"A\""));
        assert!(dot.contains("\"B\" -> __end"));
    }
}
