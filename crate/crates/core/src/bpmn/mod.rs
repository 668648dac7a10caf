//! A practical subset of BPMN 2.0: process and collaboration diagrams with
//! TILT transparency annotations, parsed from and serialized to standard
//! BPMN XML with lossless preservation of unrecognized content.

mod layout;
mod parse;
mod serialize;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tilt::TiltAnnotation;

pub use layout::generate_layout;
pub use parse::{parse_bpmn, ParseError};
pub use serialize::serialize_bpmn;

/// BPMN 2.0 model namespace.
pub const BPMN_NS: &str = "http://www.omg.org/spec/BPMN/20100524/MODEL";
/// BPMN diagram interchange namespace.
pub const BPMNDI_NS: &str = "http://www.omg.org/spec/BPMN/20100524/DI";
/// Diagram common (bounds) namespace.
pub const DC_NS: &str = "http://www.omg.org/spec/DD/20100524/DC";
/// Diagram interchange (waypoints) namespace.
pub const DI_NS: &str = "http://www.omg.org/spec/DD/20100524/DI";
/// TILT extension namespace, bound to the reserved prefix `tilt`.
pub const TILT_NS: &str = "http://tilt-bpmn.org/schema/v1";
/// bpmn.io element coloring namespace used for conformance highlights.
pub const BIOC_NS: &str = "http://bpmn.io/schema/bpmn/biocolor/1.0";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DiagramKind {
    Process,
    Collaboration,
}

/// Element classes of the placement table. Message flows are kept in
/// [`Flow`], not here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ElementClass {
    Activity,
    StartEvent,
    EndEvent,
    Gateway,
    DataStoreReference,
    DataObjectReference,
    Participant,
    Lane,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FlowKind {
    SequenceFlow,
    MessageFlow,
    DataAssociation,
}

/// One recognized BPMN node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpmnElement {
    pub id: String,
    pub class: ElementClass,
    /// XML local name, preserving the concrete subtype (`userTask`,
    /// `parallelGateway`, ...) across round trips.
    pub tag: String,
    pub name: String,
    /// Attributes beyond the dedicated fields, keyed by qualified name.
    pub attributes: BTreeMap<String, String>,
    pub annotations: Vec<TiltAnnotation>,
    /// Lane or participant membership, if any.
    pub container: Option<String>,
    /// ISO-3166-1 alpha-2 code; participants only.
    pub country: Option<String>,
    /// Owning process id; `None` for participants.
    pub process_id: Option<String>,
    /// Raw non-TILT `extensionElements` children.
    pub extension_extra: Vec<String>,
    /// Raw unrecognized child elements.
    pub extra_xml: Vec<String>,
}

impl BpmnElement {
    pub fn new(id: &str, class: ElementClass, tag: &str, name: &str) -> Self {
        BpmnElement {
            id: id.to_string(),
            class,
            tag: tag.to_string(),
            name: name.to_string(),
            attributes: BTreeMap::new(),
            annotations: Vec::new(),
            container: None,
            country: None,
            process_id: None,
            extension_extra: Vec::new(),
            extra_xml: Vec::new(),
        }
    }
}

/// One recognized connection: sequence flow, message flow, or data
/// association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub id: String,
    pub kind: FlowKind,
    pub source_id: String,
    pub target_id: String,
    pub name: String,
    pub attributes: BTreeMap<String, String>,
    pub annotations: Vec<TiltAnnotation>,
    /// Owning process id; `None` for message flows (collaboration level).
    pub process_id: Option<String>,
    pub extension_extra: Vec<String>,
    pub extra_xml: Vec<String>,
}

impl Flow {
    pub fn new(id: &str, kind: FlowKind, source_id: &str, target_id: &str) -> Self {
        Flow {
            id: id.to_string(),
            kind,
            source_id: source_id.to_string(),
            target_id: target_id.to_string(),
            name: String::new(),
            attributes: BTreeMap::new(),
            annotations: Vec::new(),
            process_id: None,
            extension_extra: Vec::new(),
            extra_xml: Vec::new(),
        }
    }
}

/// Bookkeeping for one `<process>` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessScope {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub lane_set_id: Option<String>,
    /// Raw unrecognized process children (`dataObject`, vendor elements, ...).
    pub preserved: Vec<String>,
}

impl ProcessScope {
    pub fn new(id: &str) -> Self {
        ProcessScope {
            id: id.to_string(),
            attributes: BTreeMap::new(),
            lane_set_id: None,
            preserved: Vec::new(),
        }
    }
}

/// Bookkeeping for the `<collaboration>` section.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CollaborationScope {
    pub id: String,
    pub attributes: BTreeMap<String, String>,
    pub preserved: Vec<String>,
}

/// In-memory BPMN model. Immutable value semantics: operations that change a
/// model take `&mut` or return an updated copy; nothing is shared.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpmnModel {
    pub diagram_kind: DiagramKind,
    pub definitions_id: Option<String>,
    pub definitions_attributes: BTreeMap<String, String>,
    /// Prefix (possibly empty for the default namespace) to URI bindings on
    /// the definitions root.
    pub source_namespaces: BTreeMap<String, String>,
    pub collaboration: Option<CollaborationScope>,
    pub processes: Vec<ProcessScope>,
    pub elements: Vec<BpmnElement>,
    pub flows: Vec<Flow>,
    /// Raw `bpmndi:BPMNDiagram` subtrees, preserved verbatim.
    pub diagram_interchange: Vec<String>,
    /// Raw unrecognized children of `<definitions>`.
    pub preserved_definitions: Vec<String>,
    /// Ids of opaquely preserved subtrees. Flow references into these are
    /// legal even though no model element carries them.
    pub foreign_ids: BTreeSet<String>,
}

impl Default for BpmnModel {
    fn default() -> Self {
        BpmnModel {
            diagram_kind: DiagramKind::Process,
            definitions_id: None,
            definitions_attributes: BTreeMap::new(),
            source_namespaces: BTreeMap::new(),
            collaboration: None,
            processes: Vec::new(),
            elements: Vec::new(),
            flows: Vec::new(),
            diagram_interchange: Vec::new(),
            preserved_definitions: Vec::new(),
            foreign_ids: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("duplicate id '{0}'")]
    DuplicateId(String),
    #[error("flow '{flow}' references unknown {side} '{id}'")]
    DanglingFlowRef { flow: String, side: &'static str, id: String },
    #[error("diagram kind is {kind:?} but model has {participants} participant(s)")]
    InconsistentDiagramKind { kind: DiagramKind, participants: usize },
    #[error("message flow '{0}' endpoints belong to the same participant")]
    MessageFlowWithinParticipant(String),
    #[error("invalid country code '{code}' on participant '{id}'")]
    InvalidCountry { id: String, code: String },
    #[error("flow '{0}' carries annotations but is not a message flow")]
    AnnotatedNonMessageFlow(String),
}

impl BpmnModel {
    pub fn element(&self, id: &str) -> Option<&BpmnElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn element_mut(&mut self, id: &str) -> Option<&mut BpmnElement> {
        self.elements.iter_mut().find(|e| e.id == id)
    }

    pub fn flow(&self, id: &str) -> Option<&Flow> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn flow_mut(&mut self, id: &str) -> Option<&mut Flow> {
        self.flows.iter_mut().find(|f| f.id == id)
    }

    pub fn elements_of_class(&self, class: ElementClass) -> impl Iterator<Item = &BpmnElement> {
        self.elements.iter().filter(move |e| e.class == class)
    }

    pub fn flows_of_kind(&self, kind: FlowKind) -> impl Iterator<Item = &Flow> {
        self.flows.iter().filter(move |f| f.kind == kind)
    }

    pub fn participants(&self) -> impl Iterator<Item = &BpmnElement> {
        self.elements_of_class(ElementClass::Participant)
    }

    pub fn activities(&self) -> impl Iterator<Item = &BpmnElement> {
        self.elements_of_class(ElementClass::Activity)
    }

    /// The participant owning `id` (an element or flow endpoint), resolved
    /// through lane membership and process references. A participant owns
    /// itself.
    pub fn owning_participant(&self, id: &str) -> Option<&BpmnElement> {
        let element = self.element(id)?;
        if element.class == ElementClass::Participant {
            return Some(element);
        }
        // Containers lead to a lane or directly to a participant.
        let mut current = element;
        for _ in 0..self.elements.len() {
            match current.container.as_deref().and_then(|c| self.element(c)) {
                Some(parent) if parent.class == ElementClass::Participant => return Some(parent),
                Some(parent) => current = parent,
                None => break,
            }
        }
        // Fall back to the participant referencing the owning process.
        let process_id = current.process_id.as_deref().or(element.process_id.as_deref())?;
        self.participants()
            .find(|p| p.attributes.get("processRef").map(String::as_str) == Some(process_id))
    }

    /// The process a participant points at, if it is not a black box.
    pub fn process_of_participant(&self, participant: &BpmnElement) -> Option<&ProcessScope> {
        let process_ref = participant.attributes.get("processRef")?;
        self.processes.iter().find(|p| &p.id == process_ref)
    }

    /// Total number of annotations anywhere in the model.
    pub fn annotation_count(&self) -> usize {
        self.elements.iter().map(|e| e.annotations.len()).sum::<usize>()
            + self.flows.iter().map(|f| f.annotations.len()).sum::<usize>()
    }

    /// Record the reserved `tilt` prefix binding. Annotation-adding paths
    /// call this so in-memory models match their re-parsed form.
    pub fn ensure_tilt_namespace(&mut self) {
        self.source_namespaces.entry("tilt".into()).or_insert_with(|| TILT_NS.into());
    }

    /// Check the structural invariants. Parsing performs the same checks for
    /// its own error reporting; builders call this before serialization.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut seen = BTreeSet::new();
        for id in self
            .elements
            .iter()
            .map(|e| e.id.as_str())
            .chain(self.flows.iter().map(|f| f.id.as_str()))
            .chain(self.processes.iter().map(|p| p.id.as_str()))
        {
            if !seen.insert(id) {
                return Err(ModelError::DuplicateId(id.to_string()));
            }
        }

        for flow in &self.flows {
            for (side, id) in [("source", &flow.source_id), ("target", &flow.target_id)] {
                if self.element(id).is_none() && !self.foreign_ids.contains(id) {
                    return Err(ModelError::DanglingFlowRef {
                        flow: flow.id.clone(),
                        side,
                        id: id.clone(),
                    });
                }
            }
            if !flow.annotations.is_empty() && flow.kind != FlowKind::MessageFlow {
                return Err(ModelError::AnnotatedNonMessageFlow(flow.id.clone()));
            }
        }

        let participants = self.participants().count();
        let consistent = match self.diagram_kind {
            DiagramKind::Collaboration => participants > 0,
            DiagramKind::Process => participants == 0,
        };
        if !consistent {
            return Err(ModelError::InconsistentDiagramKind {
                kind: self.diagram_kind,
                participants,
            });
        }

        for flow in self.flows_of_kind(FlowKind::MessageFlow) {
            let source = self.owning_participant(&flow.source_id).map(|p| p.id.clone());
            let target = self.owning_participant(&flow.target_id).map(|p| p.id.clone());
            if source.is_some() && source == target {
                return Err(ModelError::MessageFlowWithinParticipant(flow.id.clone()));
            }
        }

        for participant in self.participants() {
            if let Some(code) = &participant.country {
                if !crate::country::is_valid_country_code(code) {
                    return Err(ModelError::InvalidCountry {
                        id: participant.id.clone(),
                        code: code.clone(),
                    });
                }
            }
        }

        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_participant_model() -> BpmnModel {
        let mut model = BpmnModel {
            diagram_kind: DiagramKind::Collaboration,
            collaboration: Some(CollaborationScope { id: "Collab_1".into(), ..Default::default() }),
            ..Default::default()
        };
        let mut shop = BpmnElement::new("P_shop", ElementClass::Participant, "participant", "Shop");
        shop.attributes.insert("processRef".into(), "Proc_shop".into());
        shop.country = Some("DE".into());
        let mut pay = BpmnElement::new("P_pay", ElementClass::Participant, "participant", "Payments");
        pay.country = Some("US".into());
        model.elements.push(shop);
        model.elements.push(pay);
        model.processes.push(ProcessScope::new("Proc_shop"));
        let mut task = BpmnElement::new("T1", ElementClass::Activity, "task", "Charge");
        task.process_id = Some("Proc_shop".into());
        model.elements.push(task);
        model
    }

    #[test]
    fn models_transfer_between_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<BpmnModel>();
        assert_send_sync::<BpmnElement>();
        assert_send_sync::<Flow>();
    }

    #[test]
    fn owning_participant_follows_process_ref() {
        let model = two_participant_model();
        assert_eq!(model.owning_participant("T1").map(|p| p.id.as_str()), Some("P_shop"));
        assert_eq!(model.owning_participant("P_pay").map(|p| p.id.as_str()), Some("P_pay"));
    }

    #[test]
    fn validate_rejects_duplicate_ids() {
        let mut model = two_participant_model();
        model
            .elements
            .push(BpmnElement::new("T1", ElementClass::Activity, "task", "Dup"));
        assert_eq!(model.validate(), Err(ModelError::DuplicateId("T1".into())));
    }

    #[test]
    fn validate_rejects_dangling_flow() {
        let mut model = two_participant_model();
        model.flows.push(Flow::new("F1", FlowKind::SequenceFlow, "T1", "nowhere"));
        assert!(matches!(
            model.validate(),
            Err(ModelError::DanglingFlowRef { side: "target", .. })
        ));
    }

    #[test]
    fn validate_rejects_same_participant_message_flow() {
        let mut model = two_participant_model();
        model.flows.push(Flow::new("MF", FlowKind::MessageFlow, "T1", "P_shop"));
        assert_eq!(
            model.validate(),
            Err(ModelError::MessageFlowWithinParticipant("MF".into()))
        );
    }

    #[test]
    fn validate_accepts_cross_participant_message_flow() {
        let mut model = two_participant_model();
        model.flows.push(Flow::new("MF", FlowKind::MessageFlow, "T1", "P_pay"));
        assert_eq!(model.validate(), Ok(()));
    }

    #[test]
    fn validate_checks_country_shape() {
        let mut model = two_participant_model();
        model.element_mut("P_pay").unwrap().country = Some("usa".into());
        assert!(matches!(model.validate(), Err(ModelError::InvalidCountry { .. })));
    }

    #[test]
    fn diagram_kind_must_match_participants() {
        let mut model = two_participant_model();
        model.diagram_kind = DiagramKind::Process;
        assert!(matches!(
            model.validate(),
            Err(ModelError::InconsistentDiagramKind { participants: 2, .. })
        ));
    }
}
