//! Basic inductive miner.
//!
//! Recursively detects exclusive-choice, sequence, parallel, and loop cuts
//! on the directly-follows graph, splits the log accordingly, and falls
//! through to a flower model when no cut applies. Every cut is verified
//! against the conditions its split relies on, which preserves the replay
//! fitness guarantee of the basic miner.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::discovery::{dfg_of_variants, Dfg, ProcessTree};
use crate::eventlog::EventLog;

type Variants = BTreeMap<Vec<String>, u64>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MineError {
    #[error("event log has no non-empty trace")]
    EmptyLog,
}

/// Discover a process tree whose language contains every trace variant of
/// the log.
pub fn inductive_mine(log: &EventLog) -> Result<ProcessTree, MineError> {
    let variants = crate::discovery::variants(log);
    if !variants.keys().any(|trace| !trace.is_empty()) {
        return Err(MineError::EmptyLog);
    }
    Ok(mine_variants(&variants))
}

fn mine_variants(variants: &Variants) -> ProcessTree {
    if variants.is_empty() {
        return ProcessTree::Tau;
    }

    // Peel empty traces into a skip branch.
    if variants.keys().any(Vec::is_empty) {
        let non_empty: Variants =
            variants.iter().filter(|(t, _)| !t.is_empty()).map(|(t, c)| (t.clone(), *c)).collect();
        if non_empty.is_empty() {
            return ProcessTree::Tau;
        }
        return ProcessTree::ExclusiveChoice(vec![ProcessTree::Tau, mine_variants(&non_empty)]);
    }

    let alphabet: BTreeSet<String> =
        variants.keys().flat_map(|t| t.iter().cloned()).collect();

    if alphabet.len() == 1 {
        let activity = alphabet.into_iter().next().expect("one activity");
        let max_len = variants.keys().map(Vec::len).max().unwrap_or(1);
        if max_len == 1 {
            return ProcessTree::Leaf(activity);
        }
        // Repetitions of a single activity: a one-or-more-times loop.
        return ProcessTree::Loop(vec![ProcessTree::Leaf(activity), ProcessTree::Tau]);
    }

    let dfg = dfg_of_variants(variants);

    if let Some(parts) = exclusive_choice_cut(&dfg, &alphabet) {
        let sublogs = split_by_membership(variants, &parts, false);
        let children = sublogs.iter().map(mine_variants).collect();
        return ProcessTree::ExclusiveChoice(children);
    }

    if let Some(parts) = sequence_cut(&dfg, &alphabet) {
        let sublogs = split_by_membership(variants, &parts, true);
        let children = sublogs.iter().map(mine_variants).collect();
        return ProcessTree::Sequence(children);
    }

    if let Some(parts) = parallel_cut(&dfg, &alphabet) {
        let sublogs = split_by_membership(variants, &parts, true);
        let children = sublogs.iter().map(mine_variants).collect();
        return ProcessTree::Parallel(children);
    }

    if let Some(parts) = loop_cut(&dfg, &alphabet) {
        if let Some(sublogs) = split_loop(variants, &parts) {
            let children = sublogs.iter().map(mine_variants).collect();
            return ProcessTree::Loop(children);
        }
    }

    flower(&alphabet)
}

/// Fall-through: a loop over the exclusive choice of all activities.
fn flower(alphabet: &BTreeSet<String>) -> ProcessTree {
    let leaves: Vec<ProcessTree> =
        alphabet.iter().map(|a| ProcessTree::Leaf(a.clone())).collect();
    let redo = if leaves.len() == 1 {
        leaves.into_iter().next().expect("one leaf")
    } else {
        ProcessTree::ExclusiveChoice(leaves)
    };
    ProcessTree::Loop(vec![ProcessTree::Tau, redo])
}

/// Deterministic part ordering: by smallest member activity.
fn sort_parts(mut parts: Vec<BTreeSet<String>>) -> Vec<BTreeSet<String>> {
    parts.sort_by(|a, b| a.iter().next().cmp(&b.iter().next()));
    parts
}

/// Connected components of the undirected directly-follows relation.
fn exclusive_choice_cut(dfg: &Dfg, alphabet: &BTreeSet<String>) -> Option<Vec<BTreeSet<String>>> {
    let components = components_of(alphabet, |a, b| {
        dfg.edge_counts.contains_key(&(a.to_string(), b.to_string()))
            || dfg.edge_counts.contains_key(&(b.to_string(), a.to_string()))
    });
    (components.len() >= 2).then(|| sort_parts(components))
}

/// Maximal ordered partition with all directly-follows edges pointing
/// forward. Built from strongly connected components; mutually unreachable
/// groups merge into one part.
#[allow(clippy::needless_range_loop)]
fn sequence_cut(dfg: &Dfg, alphabet: &BTreeSet<String>) -> Option<Vec<BTreeSet<String>>> {
    let activities: Vec<&String> = alphabet.iter().collect();
    let index: BTreeMap<&str, usize> =
        activities.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let n = activities.len();

    // Transitive reachability over the directly-follows edges.
    let mut reach = vec![vec![false; n]; n];
    for (a, b) in dfg.edge_counts.keys() {
        reach[index[a.as_str()]][index[b.as_str()]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }

    // Union activities in the same SCC, then merge mutually unreachable
    // groups until the order is total.
    let mut group: Vec<usize> = (0..n).collect();
    fn find(group: &mut [usize], mut i: usize) -> usize {
        while group[i] != i {
            group[i] = group[group[i]];
            i = group[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let cyclic = reach[i][j] && reach[j][i];
            let unordered = !reach[i][j] && !reach[j][i];
            if cyclic || unordered {
                let (ri, rj) = (find(&mut group, i), find(&mut group, j));
                group[ri.max(rj)] = ri.min(rj);
            }
        }
    }

    let mut parts_by_root: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut group, i);
        parts_by_root.entry(root).or_default().insert(activities[i].clone());
    }
    if parts_by_root.len() < 2 {
        return None;
    }

    // Order parts by reachability between representatives.
    let mut parts: Vec<BTreeSet<String>> = parts_by_root.into_values().collect();
    parts.sort_by(|a, b| {
        let ia = index[a.iter().next().expect("non-empty part").as_str()];
        let ib = index[b.iter().next().expect("non-empty part").as_str()];
        if reach[ia][ib] {
            std::cmp::Ordering::Less
        } else if reach[ib][ia] {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });

    // The projection split needs part indexes to be non-decreasing along
    // every trace: verify no backward or in-part-skipping edge exists.
    let part_of: BTreeMap<&str, usize> = parts
        .iter()
        .enumerate()
        .flat_map(|(i, p)| p.iter().map(move |a| (a.as_str(), i)))
        .collect();
    for (a, b) in dfg.edge_counts.keys() {
        if part_of[a.as_str()] > part_of[b.as_str()] {
            return None;
        }
    }
    Some(parts)
}

/// Partition where every cross-part activity pair is doubly connected and
/// every part sees both a start and an end activity.
fn parallel_cut(dfg: &Dfg, alphabet: &BTreeSet<String>) -> Option<Vec<BTreeSet<String>>> {
    // Two activities must share a part unless they are connected in both
    // directions.
    let components = components_of(alphabet, |a, b| {
        !(dfg.edge_counts.contains_key(&(a.to_string(), b.to_string()))
            && dfg.edge_counts.contains_key(&(b.to_string(), a.to_string())))
    });
    if components.len() < 2 {
        return None;
    }

    let has_boundary = |part: &BTreeSet<String>| {
        part.iter().any(|a| dfg.start_counts.contains_key(a))
            && part.iter().any(|a| dfg.end_counts.contains_key(a))
    };
    let (mut valid, invalid): (Vec<_>, Vec<_>) =
        components.into_iter().partition(has_boundary);
    if valid.len() < 2 {
        return None;
    }
    // Parts without both boundaries cannot stand alone; fold them into the
    // first valid part.
    for part in invalid {
        valid[0].extend(part);
    }
    Some(sort_parts(valid))
}

/// Body holds all start and end activities; redo parts are components of the
/// rest whose entries are reached from every end activity and whose exits
/// reach every start activity.
fn loop_cut(dfg: &Dfg, alphabet: &BTreeSet<String>) -> Option<Vec<BTreeSet<String>>> {
    let starts: BTreeSet<&String> = dfg.start_counts.keys().collect();
    let ends: BTreeSet<&String> = dfg.end_counts.keys().collect();
    let mut body: BTreeSet<String> =
        alphabet.iter().filter(|a| starts.contains(a) || ends.contains(a)).cloned().collect();
    let rest: BTreeSet<String> = alphabet.difference(&body).cloned().collect();
    if rest.is_empty() {
        return None;
    }

    let has_edge =
        |a: &str, b: &str| dfg.edge_counts.contains_key(&(a.to_string(), b.to_string()));

    let candidates = components_of(&rest, |a, b| has_edge(a, b) || has_edge(b, a));
    let mut redos: Vec<BTreeSet<String>> = Vec::new();
    for component in candidates {
        let entries: BTreeSet<&String> = component
            .iter()
            .filter(|b| alphabet.iter().any(|a| !component.contains(a) && has_edge(a, b)))
            .collect();
        let exits: BTreeSet<&String> = component
            .iter()
            .filter(|a| alphabet.iter().any(|b| !component.contains(b) && has_edge(a, b)))
            .collect();

        let entries_ok = entries
            .iter()
            .all(|b| ends.iter().all(|e| has_edge(e, b)));
        let exits_ok = exits
            .iter()
            .all(|a| starts.iter().all(|s| has_edge(a, s)));
        // Boundary edges may only connect to log ends (inbound) and log
        // starts (outbound).
        let boundaries_ok = dfg.edge_counts.keys().all(|(a, b)| {
            let a_in = component.contains(a);
            let b_in = component.contains(b);
            match (a_in, b_in) {
                (false, true) => ends.contains(a),
                (true, false) => starts.contains(b),
                _ => true,
            }
        });

        if !entries.is_empty() && entries_ok && exits_ok && boundaries_ok {
            redos.push(component);
        } else {
            body.extend(component);
        }
    }

    if redos.is_empty() {
        return None;
    }
    let mut parts = vec![body];
    parts.extend(sort_parts(redos));
    Some(parts)
}

/// Connected components of `alphabet` under a symmetric adjacency predicate.
fn components_of<F: Fn(&str, &str) -> bool>(
    alphabet: &BTreeSet<String>,
    adjacent: F,
) -> Vec<BTreeSet<String>> {
    let mut remaining: BTreeSet<&String> = alphabet.iter().collect();
    let mut components = Vec::new();
    while let Some(seed) = remaining.iter().next().copied() {
        let mut component: BTreeSet<String> = BTreeSet::from([seed.clone()]);
        remaining.remove(seed);
        let mut frontier = vec![seed.clone()];
        while let Some(current) = frontier.pop() {
            let next: Vec<&String> = remaining
                .iter()
                .filter(|other| adjacent(&current, other) || adjacent(other, &current))
                .copied()
                .collect();
            for other in next {
                remaining.remove(other);
                component.insert(other.clone());
                frontier.push(other.clone());
            }
        }
        components.push(component);
    }
    components
}

/// Split for exclusive-choice (whole trace to one part) and for sequence and
/// parallel cuts (projection onto each part).
fn split_by_membership(
    variants: &Variants,
    parts: &[BTreeSet<String>],
    project: bool,
) -> Vec<Variants> {
    let mut sublogs: Vec<Variants> = vec![Variants::new(); parts.len()];
    for (trace, count) in variants {
        if project {
            for (part, sublog) in parts.iter().zip(&mut sublogs) {
                let projection: Vec<String> =
                    trace.iter().filter(|a| part.contains(*a)).cloned().collect();
                *sublog.entry(projection).or_insert(0) += count;
            }
        } else {
            let home = parts
                .iter()
                .position(|part| trace.first().map(|a| part.contains(a)).unwrap_or(false))
                .unwrap_or(0);
            *sublogs[home].entry(trace.clone()).or_insert(0) += count;
        }
    }
    sublogs
}

/// Split traces into alternating body and redo runs. Returns `None` when a
/// trace does not alternate properly, which abandons the loop cut.
fn split_loop(variants: &Variants, parts: &[BTreeSet<String>]) -> Option<Vec<Variants>> {
    let part_of = |activity: &str| parts.iter().position(|p| p.contains(activity));
    let mut sublogs: Vec<Variants> = vec![Variants::new(); parts.len()];

    for (trace, count) in variants {
        let mut runs: Vec<(usize, Vec<String>)> = Vec::new();
        for activity in trace {
            let part = part_of(activity)?;
            match runs.last_mut() {
                Some((current, run)) if *current == part => run.push(activity.clone()),
                _ => runs.push((part, vec![activity.clone()])),
            }
        }
        // A fitting trace starts and ends in the body and alternates
        // body/redo.
        if runs.first().map(|(p, _)| *p) != Some(0) || runs.last().map(|(p, _)| *p) != Some(0) {
            return None;
        }
        for (index, (part, _)) in runs.iter().enumerate() {
            let body_turn = index % 2 == 0;
            if body_turn != (*part == 0) {
                return None;
            }
        }
        for (part, run) in runs {
            *sublogs[part].entry(run).or_insert(0) += count;
        }
    }
    Some(sublogs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_of(traces: &[&[&str]]) -> EventLog {
        let traces: Vec<Vec<&str>> = traces.iter().map(|t| t.to_vec()).collect();
        EventLog::from_activity_traces(&traces)
    }

    fn repeated<'a>(trace: &[&'a str], times: usize) -> Vec<Vec<&'a str>> {
        (0..times).map(|_| trace.to_vec()).collect()
    }

    #[test]
    fn sequence_log_mines_to_sequence() {
        let log = EventLog::from_activity_traces(&repeated(&["A", "B"], 100));
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(
            tree,
            ProcessTree::Sequence(vec![ProcessTree::leaf("A"), ProcessTree::leaf("B")])
        );
    }

    #[test]
    fn choice_log_mines_to_exclusive_choice() {
        let mut traces = repeated(&["A"], 5);
        traces.extend(repeated(&["B"], 5));
        let log = EventLog::from_activity_traces(&traces);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(
            tree,
            ProcessTree::ExclusiveChoice(vec![ProcessTree::leaf("A"), ProcessTree::leaf("B")])
        );
    }

    #[test]
    fn interleaved_log_mines_to_parallel() {
        let log = log_of(&[&["A", "B"], &["B", "A"]]);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(
            tree,
            ProcessTree::Parallel(vec![ProcessTree::leaf("A"), ProcessTree::leaf("B")])
        );
    }

    #[test]
    fn repetition_log_mines_to_loop() {
        let log = log_of(&[&["A"], &["A", "B", "A"], &["A", "B", "A", "B", "A"]]);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(tree, ProcessTree::Loop(vec![ProcessTree::leaf("A"), ProcessTree::leaf("B")]));
    }

    #[test]
    fn empty_log_is_an_error() {
        let log = EventLog::default();
        assert_eq!(inductive_mine(&log), Err(MineError::EmptyLog));
        let empty_traces = log_of(&[&[], &[]]);
        assert_eq!(inductive_mine(&empty_traces), Err(MineError::EmptyLog));
    }

    #[test]
    fn empty_traces_peel_into_a_skip() {
        let log = log_of(&[&[], &["A"]]);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(
            tree,
            ProcessTree::ExclusiveChoice(vec![ProcessTree::Tau, ProcessTree::leaf("A")])
        );
    }

    #[test]
    fn single_activity_repetition_loops() {
        let log = log_of(&[&["A"], &["A", "A"]]);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(tree, ProcessTree::Loop(vec![ProcessTree::leaf("A"), ProcessTree::Tau]));
        assert!(tree.accepts(&["A", "A", "A"]));
    }

    #[test]
    fn unstructured_log_falls_through_to_flower() {
        // Cycles through every activity defeat xor/sequence/parallel cuts,
        // and the missing C->B edge invalidates the loop redo component.
        let log = log_of(&[&["A", "B", "C"], &["A", "B", "A", "C"], &["A", "C", "A", "C"]]);
        let tree = inductive_mine(&log).unwrap();
        assert_eq!(
            tree,
            ProcessTree::Loop(vec![
                ProcessTree::Tau,
                ProcessTree::ExclusiveChoice(vec![
                    ProcessTree::leaf("A"),
                    ProcessTree::leaf("B"),
                    ProcessTree::leaf("C"),
                ]),
            ])
        );
        // The flower replays everything in the log.
        for trace in log.activity_sequences() {
            assert!(tree.accepts(&trace));
        }
    }

    #[test]
    fn every_variant_replays_in_the_mined_tree() {
        let logs: Vec<Vec<Vec<&str>>> = vec![
            vec![vec!["A", "B", "C"], vec!["A", "C"]],
            vec![vec!["A", "B", "B", "C"], vec!["A", "C"], vec!["A", "B", "C"]],
            vec![vec!["A", "B", "C", "D"], vec!["A", "C", "B", "D"]],
            vec![vec!["A"], vec!["B", "C"], vec!["C", "B"]],
        ];
        for traces in logs {
            let log = EventLog::from_activity_traces(&traces);
            let tree = inductive_mine(&log).unwrap();
            for trace in &traces {
                assert!(
                    tree.accepts(trace),
                    "{tree} does not replay {trace:?}"
                );
            }
        }
    }

    #[test]
    fn skippable_middle_step_stays_fit() {
        let log = log_of(&[&["A", "B", "C"], &["A", "C"]]);
        let tree = inductive_mine(&log).unwrap();
        assert!(tree.accepts(&["A", "B", "C"]));
        assert!(tree.accepts(&["A", "C"]));
    }
}
