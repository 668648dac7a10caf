//! Block-structured process trees and their trace language.

use std::collections::BTreeSet;
use std::fmt;

/// A process tree node. `Loop` children are body first, then one or more
/// redo parts: the language is body (redo body)*.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ProcessTree {
    Leaf(String),
    Tau,
    Sequence(Vec<ProcessTree>),
    ExclusiveChoice(Vec<ProcessTree>),
    Parallel(Vec<ProcessTree>),
    Loop(Vec<ProcessTree>),
}

impl fmt::Display for ProcessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(children: &[ProcessTree]) -> String {
            children.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
        }
        match self {
            ProcessTree::Leaf(a) => write!(f, "'{a}'"),
            ProcessTree::Tau => write!(f, "tau"),
            ProcessTree::Sequence(c) => write!(f, "->({})", join(c)),
            ProcessTree::ExclusiveChoice(c) => write!(f, "X({})", join(c)),
            ProcessTree::Parallel(c) => write!(f, "+({})", join(c)),
            ProcessTree::Loop(c) => write!(f, "*({})", join(c)),
        }
    }
}

impl ProcessTree {
    pub fn leaf(activity: &str) -> ProcessTree {
        ProcessTree::Leaf(activity.to_string())
    }

    pub fn children(&self) -> &[ProcessTree] {
        match self {
            ProcessTree::Leaf(_) | ProcessTree::Tau => &[],
            ProcessTree::Sequence(c)
            | ProcessTree::ExclusiveChoice(c)
            | ProcessTree::Parallel(c)
            | ProcessTree::Loop(c) => c,
        }
    }

    /// Operator nodes need at least two children; leaves non-empty labels.
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ProcessTree::Leaf(a) if a.is_empty() => Err("leaf with empty activity".into()),
            ProcessTree::Leaf(_) | ProcessTree::Tau => Ok(()),
            node => {
                let children = node.children();
                if children.len() < 2 {
                    return Err(format!("operator node with {} child(ren): {node}", children.len()));
                }
                children.iter().try_for_each(ProcessTree::validate)
            }
        }
    }

    pub fn alphabet(&self) -> BTreeSet<&str> {
        let mut set = BTreeSet::new();
        self.collect_alphabet(&mut set);
        set
    }

    fn collect_alphabet<'a>(&'a self, set: &mut BTreeSet<&'a str>) {
        match self {
            ProcessTree::Leaf(a) => {
                set.insert(a.as_str());
            }
            ProcessTree::Tau => {}
            node => node.children().iter().for_each(|c| c.collect_alphabet(set)),
        }
    }

    /// Whether `trace` is in the tree's language.
    pub fn accepts<S: AsRef<str>>(&self, trace: &[S]) -> bool {
        let trace: Vec<&str> = trace.iter().map(AsRef::as_ref).collect();
        self.accepts_span(&trace, 0, trace.len())
    }

    fn accepts_span(&self, trace: &[&str], start: usize, end: usize) -> bool {
        match self {
            ProcessTree::Leaf(a) => end == start + 1 && trace[start] == a,
            ProcessTree::Tau => start == end,
            ProcessTree::ExclusiveChoice(children) => {
                children.iter().any(|c| c.accepts_span(trace, start, end))
            }
            ProcessTree::Sequence(children) => {
                self.accepts_sequence(children, trace, start, end)
            }
            ProcessTree::Parallel(children) => {
                self.accepts_parallel(children, trace, start, end)
            }
            ProcessTree::Loop(children) => {
                let (body, redos) = children.split_first().expect("loop has a body");
                for mid in start..=end {
                    if body.accepts_span(trace, start, mid)
                        && self.accepts_redo_chain(body, redos, trace, mid, end)
                    {
                        return true;
                    }
                }
                false
            }
        }
    }

    fn accepts_sequence(
        &self,
        children: &[ProcessTree],
        trace: &[&str],
        start: usize,
        end: usize,
    ) -> bool {
        match children.split_first() {
            None => start == end,
            Some((head, rest)) => (start..=end).any(|mid| {
                head.accepts_span(trace, start, mid)
                    && self.accepts_sequence(rest, trace, mid, end)
            }),
        }
    }

    fn accepts_parallel(
        &self,
        children: &[ProcessTree],
        trace: &[&str],
        start: usize,
        end: usize,
    ) -> bool {
        // Mined trees have pairwise disjoint child alphabets, which makes
        // interleaving membership a per-child projection check.
        let alphabets: Vec<BTreeSet<&str>> = children.iter().map(|c| c.alphabet()).collect();
        let disjoint = alphabets.iter().enumerate().all(|(i, a)| {
            alphabets[i + 1..].iter().all(|b| a.intersection(b).next().is_none())
        });
        if disjoint {
            let span = &trace[start..end];
            if !span
                .iter()
                .all(|event| alphabets.iter().any(|alphabet| alphabet.contains(event)))
            {
                return false;
            }
            return children.iter().zip(&alphabets).all(|(child, alphabet)| {
                let projection: Vec<&str> =
                    span.iter().copied().filter(|e| alphabet.contains(e)).collect();
                child.accepts_span(&projection, 0, projection.len())
            });
        }
        // Overlapping alphabets (hand-built trees): enumerate bounded language.
        let span: Vec<String> = trace[start..end].iter().map(|s| s.to_string()).collect();
        self.language_upto(span.len()).contains(&span)
    }

    fn accepts_redo_chain(
        &self,
        body: &ProcessTree,
        redos: &[ProcessTree],
        trace: &[&str],
        start: usize,
        end: usize,
    ) -> bool {
        if start == end {
            return true;
        }
        for redo in redos {
            for mid in start..=end {
                if !redo.accepts_span(trace, start, mid) {
                    continue;
                }
                for next in mid..=end {
                    if body.accepts_span(trace, mid, next)
                        && self.accepts_redo_chain(body, redos, trace, next, end)
                    {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// All traces of length at most `max_len`, by bounded enumeration. Loops
    /// unroll until no new trace fits the bound.
    pub fn language_upto(&self, max_len: usize) -> BTreeSet<Vec<String>> {
        match self {
            ProcessTree::Leaf(a) => {
                let mut set = BTreeSet::new();
                if max_len >= 1 {
                    set.insert(vec![a.clone()]);
                }
                set
            }
            ProcessTree::Tau => BTreeSet::from([Vec::new()]),
            ProcessTree::ExclusiveChoice(children) => children
                .iter()
                .flat_map(|c| c.language_upto(max_len))
                .collect(),
            ProcessTree::Sequence(children) => {
                let mut acc = BTreeSet::from([Vec::new()]);
                for child in children {
                    acc = concat_bounded(&acc, &child.language_upto(max_len), max_len);
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            ProcessTree::Parallel(children) => {
                let mut acc = BTreeSet::from([Vec::new()]);
                for child in children {
                    let child_language = child.language_upto(max_len);
                    let mut next = BTreeSet::new();
                    for left in &acc {
                        for right in &child_language {
                            if left.len() + right.len() <= max_len {
                                shuffles(left, right, &mut next);
                            }
                        }
                    }
                    acc = next;
                    if acc.is_empty() {
                        break;
                    }
                }
                acc
            }
            ProcessTree::Loop(children) => {
                let (body, redos) = children.split_first().expect("loop has a body");
                let body_language = body.language_upto(max_len);
                let redo_language: BTreeSet<Vec<String>> =
                    redos.iter().flat_map(|r| r.language_upto(max_len)).collect();
                let mut acc = body_language.clone();
                loop {
                    let extended = concat_bounded(
                        &concat_bounded(&acc, &redo_language, max_len),
                        &body_language,
                        max_len,
                    );
                    let before = acc.len();
                    acc.extend(extended);
                    if acc.len() == before {
                        return acc;
                    }
                }
            }
        }
    }
}

fn concat_bounded(
    left: &BTreeSet<Vec<String>>,
    right: &BTreeSet<Vec<String>>,
    max_len: usize,
) -> BTreeSet<Vec<String>> {
    let mut out = BTreeSet::new();
    for a in left {
        for b in right {
            if a.len() + b.len() <= max_len {
                let mut joined = a.clone();
                joined.extend(b.iter().cloned());
                out.insert(joined);
            }
        }
    }
    out
}

/// All interleavings of `left` and `right` into `out`.
fn shuffles(left: &[String], right: &[String], out: &mut BTreeSet<Vec<String>>) {
    fn go(left: &[String], right: &[String], prefix: &mut Vec<String>, out: &mut BTreeSet<Vec<String>>) {
        if left.is_empty() && right.is_empty() {
            out.insert(prefix.clone());
            return;
        }
        if let Some((head, rest)) = left.split_first() {
            prefix.push(head.clone());
            go(rest, right, prefix, out);
            prefix.pop();
        }
        if let Some((head, rest)) = right.split_first() {
            prefix.push(head.clone());
            go(left, rest, prefix, out);
            prefix.pop();
        }
    }
    go(left, right, &mut Vec::new(), out);
}
