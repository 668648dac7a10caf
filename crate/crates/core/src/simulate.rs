//! Deterministic playout of an annotated model into a synthetic
//! transparency event log, with configurable deviation injection. Stands in
//! for an instrumented microservice deployment when exercising the
//! discovery and conformance tooling end to end.

use std::collections::BTreeMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::bpmn::{BpmnModel, ElementClass, FlowKind};
use crate::conformance::extract_normative;
use crate::eventlog::format_timestamp;
use crate::label::normalize_label;

/// xorshift64*; deterministic and stable across platforms. Not for secrets.
#[derive(Debug, Clone)]
pub struct SimRng {
    state: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        // A zero seed would lock xorshift into the all-zero state.
        let state = if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed };
        SimRng { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DeviationKind {
    DropCategory,
    AddCategory,
    SwapLegalBasis,
}

/// An injected deviation: with probability `rate`, events of `activity`
/// have `category` dropped, added, or their legal bases swapped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DeviationSpec {
    pub kind: DeviationKind,
    pub activity: String,
    pub category: String,
    pub rate: f64,
    /// Replacement legal basis for swaps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
}

const DEFAULT_SWAP_BASIS: &str = "GDPR-6-1-f";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
#[derive(Default)]
pub struct SimulationConfig {
    pub trace_count: u64,
    pub seed: u64,
    /// Per-gateway outgoing flow distribution; unlisted gateways branch
    /// uniformly.
    pub branch_probabilities: BTreeMap<String, BTreeMap<String, f64>>,
    pub deviations: Vec<DeviationSpec>,
}


#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimulateError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("model is not sound for playout: {0}")]
    UnsoundModel(String),
}

fn validate_config(model: &BpmnModel, config: &SimulationConfig) -> Result<(), SimulateError> {
    for deviation in &config.deviations {
        if !(0.0..=1.0).contains(&deviation.rate) {
            return Err(SimulateError::InvalidConfig(format!(
                "deviation rate {} out of [0, 1]",
                deviation.rate
            )));
        }
    }
    for (gateway_id, distribution) in &config.branch_probabilities {
        let Some(gateway) = model.element(gateway_id) else {
            return Err(SimulateError::InvalidConfig(format!(
                "branch probabilities reference unknown gateway '{gateway_id}'"
            )));
        };
        if gateway.class != ElementClass::Gateway {
            return Err(SimulateError::InvalidConfig(format!(
                "'{gateway_id}' is not a gateway"
            )));
        }
        let outgoing: Vec<&str> = model
            .flows_of_kind(FlowKind::SequenceFlow)
            .filter(|f| f.source_id == *gateway_id)
            .map(|f| f.id.as_str())
            .collect();
        let mut total = 0.0;
        for (flow_id, probability) in distribution {
            if !outgoing.contains(&flow_id.as_str()) {
                return Err(SimulateError::InvalidConfig(format!(
                    "'{flow_id}' is not an outgoing flow of '{gateway_id}'"
                )));
            }
            if *probability < 0.0 {
                return Err(SimulateError::InvalidConfig("negative probability".into()));
            }
            total += probability;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(SimulateError::InvalidConfig(format!(
                "probabilities for '{gateway_id}' sum to {total}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Normative grouped payload of one activity, merged over its disclosures.
#[derive(Debug, Clone, Default)]
struct ActivityPayload {
    categories: Vec<String>,
    purposes: Vec<String>,
    legal_bases: Vec<String>,
    recipients: Vec<String>,
    storage: Vec<String>,
}

/// Play the model out trace by trace and render JSON lines (with one header
/// comment naming generator and seed). Identical seeds produce
/// byte-identical output.
pub fn simulate(model: &BpmnModel, config: &SimulationConfig) -> Result<String, SimulateError> {
    validate_config(model, config)?;

    let normative = extract_normative(model);
    let mut payloads: BTreeMap<String, ActivityPayload> = BTreeMap::new();
    for (label, disclosures) in &normative.disclosures {
        let mut payload = ActivityPayload::default();
        let mut purposes = std::collections::BTreeSet::new();
        let mut bases = std::collections::BTreeSet::new();
        let mut recipients = std::collections::BTreeSet::new();
        let mut storage = std::collections::BTreeSet::new();
        let mut categories = std::collections::BTreeSet::new();
        for disclosed in disclosures {
            categories.insert(disclosed.category.clone());
            purposes.extend(disclosed.purposes.iter().cloned());
            bases.extend(disclosed.legal_bases.iter().cloned());
            recipients.extend(disclosed.recipients.iter().cloned());
            storage.extend(disclosed.storage.iter().cloned());
        }
        payload.categories = categories.into_iter().collect();
        payload.purposes = purposes.into_iter().collect();
        payload.legal_bases = bases.into_iter().collect();
        payload.recipients = recipients.into_iter().collect();
        payload.storage = storage.into_iter().collect();
        payloads.insert(label.clone(), payload);
    }

    let mut rng = SimRng::new(config.seed);
    let mut out = String::new();
    out.push_str(&format!(
        "# transparency event log generator=xorshift64star seed={} traces={}\n",
        config.seed, config.trace_count
    ));

    let base_time = NaiveDateTime::parse_from_str("2024-01-01T00:00:00", "%Y-%m-%dT%H:%M:%S")
        .expect("constant parses");
    let mut eid = 0u64;

    for trace_index in 0..config.trace_count {
        let case_id = format!("0x{:016x}", rng.next_u64());
        let trace_start = base_time + chrono::Duration::minutes(trace_index as i64);
        let mut steps = 0i64;

        let mut walker = Walker {
            model,
            config,
            rng: &mut rng,
            budget: 100 + 10 * (model.elements.len() + model.flows.len()),
            visited_activities: Vec::new(),
        };
        for scope_index in 0..model.processes.len() {
            walker.walk_process(scope_index)?;
        }
        let visited = walker.visited_activities;

        for label in visited {
            steps += 1;
            let Some(payload) = payloads.get(&label) else { continue };
            let mut categories = payload.categories.clone();
            let mut legal_bases = payload.legal_bases.clone();
            for deviation in &config.deviations {
                if normalize_label(&deviation.activity) != label {
                    continue;
                }
                if rng.next_f64() >= deviation.rate {
                    continue;
                }
                match deviation.kind {
                    DeviationKind::DropCategory => {
                        categories.retain(|c| c != &deviation.category);
                    }
                    DeviationKind::AddCategory => {
                        if !categories.contains(&deviation.category) {
                            categories.push(deviation.category.clone());
                        }
                    }
                    DeviationKind::SwapLegalBasis => {
                        legal_bases = vec![deviation
                            .replacement
                            .clone()
                            .unwrap_or_else(|| DEFAULT_SWAP_BASIS.to_string())];
                    }
                }
            }

            let timestamp = trace_start + chrono::Duration::seconds(steps);
            let line = json!({
                "ident:eid": eid,
                "time:timestamp": format_timestamp(&timestamp),
                "case:concept:name": case_id,
                "concept:name": label,
                "tilt:categories": categories,
                "tilt:purposes": payload.purposes,
                "tilt:legalBases": legal_bases,
                "tilt:recipients": payload.recipients,
                "tilt:storage": payload.storage,
            });
            out.push_str(&line.to_string());
            out.push('\n');
            eid += 1;
        }
    }
    Ok(out)
}

struct Walker<'a> {
    model: &'a BpmnModel,
    config: &'a SimulationConfig,
    rng: &'a mut SimRng,
    budget: usize,
    visited_activities: Vec<String>,
}

impl<'a> Walker<'a> {
    fn outgoing(&self, node_id: &str) -> Vec<&'a crate::bpmn::Flow> {
        self.model
            .flows
            .iter()
            .filter(|f| f.kind == FlowKind::SequenceFlow && f.source_id == node_id)
            .collect()
    }

    fn incoming_count(&self, node_id: &str) -> usize {
        self.model
            .flows
            .iter()
            .filter(|f| f.kind == FlowKind::SequenceFlow && f.target_id == node_id)
            .count()
    }

    fn walk_process(&mut self, scope_index: usize) -> Result<(), SimulateError> {
        let scope_id = self.model.processes[scope_index].id.clone();
        let nodes: Vec<&crate::bpmn::BpmnElement> = self
            .model
            .elements
            .iter()
            .filter(|e| {
                e.process_id.as_deref() == Some(scope_id.as_str())
                    && e.class != ElementClass::Lane
            })
            .collect();
        if nodes.is_empty() {
            return Ok(());
        }
        let start = nodes
            .iter()
            .find(|e| e.class == ElementClass::StartEvent)
            .or_else(|| {
                nodes.iter().find(|e| {
                    self.incoming_count(&e.id) == 0
                        && !matches!(
                            e.class,
                            ElementClass::DataStoreReference | ElementClass::DataObjectReference
                        )
                })
            })
            .ok_or_else(|| {
                SimulateError::UnsoundModel(format!("process '{scope_id}' has no start node"))
            })?;
        self.walk_from(&start.id.clone(), false)?;
        Ok(())
    }

    /// Walk until an end event. Inside a parallel branch the walk stops at
    /// the first parallel join gateway and returns its id.
    fn walk_from(
        &mut self,
        start_id: &str,
        in_branch: bool,
    ) -> Result<Option<String>, SimulateError> {
        let mut current = start_id.to_string();
        loop {
            if self.budget == 0 {
                return Err(SimulateError::UnsoundModel(
                    "step budget exceeded; no path to an end event".into(),
                ));
            }
            self.budget -= 1;

            let element = self
                .model
                .element(&current)
                .ok_or_else(|| SimulateError::UnsoundModel(format!("unknown node '{current}'")))?;

            if element.class == ElementClass::Activity {
                self.visited_activities.push(normalize_label(&element.name));
            }
            if element.class == ElementClass::EndEvent {
                return Ok(None);
            }
            if in_branch
                && element.tag == "parallelGateway"
                && self.incoming_count(&current) > 1
            {
                return Ok(Some(current));
            }

            let outgoing = self.outgoing(&current);
            if outgoing.is_empty() {
                // Implicit terminal node (activity without outgoing flow).
                return Ok(None);
            }

            let parallel_split = element.tag == "parallelGateway" && outgoing.len() > 1;
            if parallel_split {
                // Play branches sequentially; a structured model funnels
                // every branch into the same join.
                let mut join = None;
                for flow in &outgoing {
                    let branch_join = self.walk_from(&flow.target_id, true)?;
                    match (&join, branch_join) {
                        (None, Some(j)) => join = Some(j),
                        (Some(expected), Some(j)) if *expected == j => {}
                        (_, None) => {}
                        (Some(expected), Some(j)) => {
                            return Err(SimulateError::UnsoundModel(format!(
                                "parallel branches join at both '{expected}' and '{j}'"
                            )));
                        }
                    }
                }
                match join {
                    Some(j) => {
                        // Continue past the join so the branch-stop check
                        // does not immediately trigger on it again.
                        let join_outgoing = self.outgoing(&j);
                        if join_outgoing.is_empty() {
                            return Ok(None);
                        }
                        let chosen = if join_outgoing.len() == 1 {
                            join_outgoing[0]
                        } else {
                            self.choose_flow(&j, &join_outgoing)?
                        };
                        current = chosen.target_id.clone();
                        continue;
                    }
                    None => return Ok(None),
                }
            }

            let chosen = if outgoing.len() == 1 {
                outgoing[0]
            } else {
                self.choose_flow(&current, &outgoing)?
            };
            current = chosen.target_id.clone();
        }
    }

    fn choose_flow<'f>(
        &mut self,
        node_id: &str,
        outgoing: &[&'f crate::bpmn::Flow],
    ) -> Result<&'f crate::bpmn::Flow, SimulateError> {
        let roll = self.rng.next_f64();
        if let Some(distribution) = self.config.branch_probabilities.get(node_id) {
            let mut cumulative = 0.0;
            for flow in outgoing {
                cumulative += distribution.get(&flow.id).copied().unwrap_or(0.0);
                if roll < cumulative {
                    return Ok(flow);
                }
            }
            return Ok(outgoing.last().expect("outgoing is non-empty"));
        }
        let index = ((roll * outgoing.len() as f64) as usize).min(outgoing.len() - 1);
        Ok(outgoing[index])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{BpmnElement, Flow, ProcessScope};
    use crate::conformance::{check, Classification};
    use crate::eventlog::ingest_str;
    use crate::tilt::{attach, DataDisclosed, TiltAnnotation, TiltPayload};

    fn chain_model() -> BpmnModel {
        let mut model = BpmnModel::default();
        model.processes.push(ProcessScope::new("P1"));
        let nodes = [
            ("start", ElementClass::StartEvent, "startEvent", ""),
            ("collect", ElementClass::Activity, "task", "Collect user data"),
            ("confirm", ElementClass::Activity, "task", "Send confirmation"),
            ("end", ElementClass::EndEvent, "endEvent", ""),
        ];
        for (id, class, tag, name) in nodes {
            let mut element = BpmnElement::new(id, class, tag, name);
            element.process_id = Some("P1".into());
            model.elements.push(element);
        }
        for (id, source, target) in
            [("f1", "start", "collect"), ("f2", "collect", "confirm"), ("f3", "confirm", "end")]
        {
            let mut flow = Flow::new(id, FlowKind::SequenceFlow, source, target);
            flow.process_id = Some("P1".into());
            model.flows.push(flow);
        }
        attach(
            &mut model,
            "collect",
            TiltAnnotation::manual(TiltPayload::DataDisclosed(DataDisclosed {
                id: "d1".into(),
                category: "postcode".into(),
                purposes: vec!["rightToAccess".into()],
                legal_bases: vec!["GDPR-15-1".into()],
                recipients: vec![],
                storage: vec![],
            })),
        )
        .unwrap();
        attach(
            &mut model,
            "confirm",
            TiltAnnotation::manual(TiltPayload::DataDisclosed(DataDisclosed {
                id: "d2".into(),
                category: "email".into(),
                purposes: vec!["notification".into()],
                legal_bases: vec!["GDPR-6-1-b".into()],
                recipients: vec![],
                storage: vec![],
            })),
        )
        .unwrap();
        model
    }

    fn config(traces: u64, seed: u64) -> SimulationConfig {
        SimulationConfig { trace_count: traces, seed, ..Default::default() }
    }

    #[test]
    fn zero_traces_is_header_only() {
        let output = simulate(&chain_model(), &config(0, 42)).unwrap();
        assert_eq!(output.lines().count(), 1);
        assert!(output.starts_with('#'));
    }

    #[test]
    fn identical_seeds_give_byte_identical_output() {
        let model = chain_model();
        let a = simulate(&model, &config(50, 42)).unwrap();
        let b = simulate(&model, &config(50, 42)).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, &config(50, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn every_line_ingests_without_rejects() {
        let model = chain_model();
        let output = simulate(&model, &config(100, 42)).unwrap();
        let result = ingest_str(&output);
        assert!(result.rejects.is_empty(), "rejects: {:?}", result.rejects);
        assert_eq!(result.accepted, 200);
        assert_eq!(result.log.trace_count(), 100);
    }

    #[test]
    fn clean_simulation_checks_all_conforming() {
        let model = chain_model();
        let output = simulate(&model, &config(100, 42)).unwrap();
        let log = ingest_str(&output).log;
        let report = check(&extract_normative(&model), &log);
        assert_eq!(report.summary.missing, 0);
        assert_eq!(report.summary.undeclared, 0);
        assert!(report.summary.conforming > 0);
    }

    #[test]
    fn add_category_at_rate_one_is_always_present() {
        let model = chain_model();
        let mut config = config(50, 42);
        config.deviations.push(DeviationSpec {
            kind: DeviationKind::AddCategory,
            activity: "Collect user data".into(),
            category: "email".into(),
            rate: 1.0,
            replacement: None,
        });
        let output = simulate(&model, &config).unwrap();
        let log = ingest_str(&output).log;
        for trace in log.traces.values() {
            for event in trace.iter().filter(|e| e.activity == "Collect user data") {
                assert!(event.disclosed.categories.contains(&"email".to_string()));
            }
        }
        let report = check(&extract_normative(&model), &log);
        let undeclared = report.entries_of(Classification::Undeclared);
        assert_eq!(undeclared.len(), 1);
        assert_eq!(undeclared[0].activity, "Collect user data");
        assert_eq!(undeclared[0].category, "email");
    }

    #[test]
    fn drop_category_at_rate_one_goes_missing() {
        let model = chain_model();
        let mut config = config(50, 42);
        config.deviations.push(DeviationSpec {
            kind: DeviationKind::DropCategory,
            activity: "Collect user data".into(),
            category: "postcode".into(),
            rate: 1.0,
            replacement: None,
        });
        let output = simulate(&model, &config).unwrap();
        let log = ingest_str(&output).log;
        let report = check(&extract_normative(&model), &log);
        let missing = report.entries_of(Classification::Missing);
        assert_eq!(missing.len(), 1);
        assert_eq!(missing[0].category, "postcode");
    }

    #[test]
    fn swap_legal_basis_surfaces_as_attribute_diff() {
        let model = chain_model();
        let mut config = config(20, 42);
        config.deviations.push(DeviationSpec {
            kind: DeviationKind::SwapLegalBasis,
            activity: "Collect user data".into(),
            category: "postcode".into(),
            rate: 1.0,
            replacement: Some("GDPR-6-1-f".into()),
        });
        let output = simulate(&model, &config).unwrap();
        let log = ingest_str(&output).log;
        let report = check(&extract_normative(&model), &log);
        let conforming = report.entries_of(Classification::Conforming);
        let postcode = conforming.iter().find(|e| e.category == "postcode").unwrap();
        let diffs = postcode.attribute_diffs.as_ref().unwrap();
        assert_eq!(diffs.legal_bases_undeclared, vec!["GDPR-6-1-f"]);
        assert_eq!(diffs.legal_bases_missing, vec!["GDPR-15-1"]);
    }

    #[test]
    fn deviation_rate_is_realized_within_binomial_bounds() {
        let model = chain_model();
        let rate = 0.3;
        let mut config = config(1000, 7);
        config.deviations.push(DeviationSpec {
            kind: DeviationKind::DropCategory,
            activity: "Collect user data".into(),
            category: "postcode".into(),
            rate,
            replacement: None,
        });
        let output = simulate(&model, &config).unwrap();
        let log = ingest_str(&output).log;
        let mut emissions = 0usize;
        let mut dropped = 0usize;
        for trace in log.traces.values() {
            for event in trace.iter().filter(|e| e.activity == "Collect user data") {
                emissions += 1;
                if !event.disclosed.categories.contains(&"postcode".to_string()) {
                    dropped += 1;
                }
            }
        }
        assert!(emissions >= 1000);
        let observed = dropped as f64 / emissions as f64;
        let sigma = (rate * (1.0 - rate) / emissions as f64).sqrt();
        assert!(
            (observed - rate).abs() <= 5.0 * sigma,
            "observed {observed}, expected {rate} +- {}",
            5.0 * sigma
        );
    }

    #[test]
    fn gateway_distributions_are_validated() {
        let model = chain_model();
        let mut bad = config(1, 1);
        bad.branch_probabilities
            .insert("nonexistent".into(), BTreeMap::from([("f1".into(), 1.0)]));
        assert!(matches!(
            simulate(&model, &bad),
            Err(SimulateError::InvalidConfig(_))
        ));

        let mut bad_rate = config(1, 1);
        bad_rate.deviations.push(DeviationSpec {
            kind: DeviationKind::AddCategory,
            activity: "x".into(),
            category: "y".into(),
            rate: 1.5,
            replacement: None,
        });
        assert!(matches!(
            simulate(&model, &bad_rate),
            Err(SimulateError::InvalidConfig(_))
        ));
    }

    #[test]
    fn dead_end_model_is_unsound() {
        let mut model = chain_model();
        // Remove the path to the end event.
        model.flows.retain(|f| f.id != "f3");
        // A dead end without an end event terminates the walk gracefully,
        // so instead create an endless loop.
        let mut back = Flow::new("f4", FlowKind::SequenceFlow, "confirm", "collect");
        back.process_id = Some("P1".into());
        model.flows.push(back);
        let err = simulate(&model, &config(1, 1)).unwrap_err();
        assert!(matches!(err, SimulateError::UnsoundModel(_)));
    }

    #[test]
    fn parallel_gateways_play_out_each_branch() {
        use crate::discovery::{tree_to_bpmn, ProcessTree};
        let model = tree_to_bpmn(&ProcessTree::Sequence(vec![
            ProcessTree::leaf("Collect user data"),
            ProcessTree::Parallel(vec![
                ProcessTree::leaf("Validate cart"),
                ProcessTree::leaf("Process payment"),
            ]),
            ProcessTree::leaf("Send confirmation"),
        ]));
        let mut with_disclosure = model.clone();
        for id in ["Activity_1", "Activity_2", "Activity_3", "Activity_4"] {
            attach(
                &mut with_disclosure,
                id,
                TiltAnnotation::manual(TiltPayload::DataDisclosed(DataDisclosed {
                    id: id.into(),
                    category: format!("cat-{id}"),
                    purposes: vec![],
                    legal_bases: vec!["GDPR-6-1-b".into()],
                    recipients: vec![],
                    storage: vec![],
                })),
            )
            .unwrap();
        }
        let output = simulate(&with_disclosure, &config(5, 9)).unwrap();
        let log = ingest_str(&output).log;
        // Every trace saw all four activities.
        for trace in log.traces.values() {
            assert_eq!(trace.len(), 4);
        }
    }

    #[test]
    fn case_ids_are_synthetic_hex_tokens() {
        let output = simulate(&chain_model(), &config(3, 42)).unwrap();
        let log = ingest_str(&output).log;
        for case_id in log.traces.keys() {
            assert!(case_id.starts_with("0x"));
            assert!(case_id[2..].chars().all(|c| c.is_ascii_hexdigit()));
        }
    }
}
