//! Deterministic BPMN 2.0 XML output.
//!
//! Identical models produce byte-identical documents: namespace bindings and
//! attributes are emitted in sorted order, model content in document order,
//! preserved subtrees verbatim.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::bpmn::{
    BpmnElement, BpmnModel, DiagramKind, ElementClass, Flow, FlowKind, BPMN_NS, TILT_NS,
};
use crate::tilt::xml::encode_annotation;

/// Serialize a model to BPMN 2.0 XML. Serialization of a valid model cannot
/// fail.
pub fn serialize_bpmn(model: &BpmnModel) -> String {
    let namespaces = effective_namespaces(model);
    let bpmn_prefix = namespaces
        .iter()
        .filter(|(_, uri)| uri.as_str() == BPMN_NS)
        .map(|(prefix, _)| prefix.clone())
        .reduce(|best, candidate| {
            if candidate == "bpmn" {
                candidate
            } else {
                best
            }
        })
        .unwrap_or_else(|| "bpmn".to_string());

    let writer = Writer { model, bpmn_prefix };
    writer.document(&namespaces)
}

fn effective_namespaces(model: &BpmnModel) -> BTreeMap<String, String> {
    let mut namespaces = model.source_namespaces.clone();
    if !namespaces.values().any(|uri| uri == BPMN_NS) {
        namespaces.insert("bpmn".into(), BPMN_NS.into());
    }
    let needs_tilt = model.annotation_count() > 0
        || model.elements.iter().any(|e| e.country.is_some());
    if needs_tilt {
        namespaces.entry("tilt".into()).or_insert_with(|| TILT_NS.into());
    }
    namespaces
}

struct Writer<'a> {
    model: &'a BpmnModel,
    bpmn_prefix: String,
}

impl<'a> Writer<'a> {
    fn q(&self, local: &str) -> String {
        if self.bpmn_prefix.is_empty() {
            local.to_string()
        } else {
            format!("{}:{local}", self.bpmn_prefix)
        }
    }

    fn document(&self, namespaces: &BTreeMap<String, String>) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");

        let mut root_attrs = String::new();
        if let Some(uri) = namespaces.get("") {
            push_attr(&mut root_attrs, "xmlns", uri);
        }
        for (prefix, uri) in namespaces {
            if !prefix.is_empty() {
                push_attr(&mut root_attrs, &format!("xmlns:{prefix}"), uri);
            }
        }
        if let Some(id) = &self.model.definitions_id {
            push_attr(&mut root_attrs, "id", id);
        }
        for (key, value) in &self.model.definitions_attributes {
            push_attr(&mut root_attrs, key, value);
        }

        let definitions = self.q("definitions");
        let mut body = String::new();
        self.collaboration(&mut body);
        for scope_index in 0..self.model.processes.len() {
            self.process(&mut body, scope_index);
        }
        for raw in &self.model.preserved_definitions {
            let _ = writeln!(body, "  {raw}");
        }
        for raw in &self.model.diagram_interchange {
            let _ = writeln!(body, "  {raw}");
        }

        if body.is_empty() {
            let _ = writeln!(out, "<{definitions}{root_attrs} />");
        } else {
            let _ = writeln!(out, "<{definitions}{root_attrs}>");
            out.push_str(&body);
            let _ = writeln!(out, "</{definitions}>");
        }
        out
    }

    fn collaboration(&self, out: &mut String) {
        let participants: Vec<&BpmnElement> = self
            .model
            .elements
            .iter()
            .filter(|e| e.class == ElementClass::Participant)
            .collect();
        let message_flows: Vec<&Flow> = self
            .model
            .flows
            .iter()
            .filter(|f| f.kind == FlowKind::MessageFlow)
            .collect();
        let scope = self.model.collaboration.as_ref();

        let has_content = !participants.is_empty() || !message_flows.is_empty();
        if scope.is_none() && !has_content && self.model.diagram_kind == DiagramKind::Process {
            return;
        }

        let id = scope
            .map(|s| s.id.clone())
            .filter(|id| !id.is_empty())
            .unwrap_or_else(|| "Collaboration_1".to_string());
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &id);
        if let Some(scope) = scope {
            for (key, value) in &scope.attributes {
                push_attr(&mut attrs, key, value);
            }
        }

        let tag = self.q("collaboration");
        let preserved = scope.map(|s| s.preserved.as_slice()).unwrap_or_default();
        if !has_content && preserved.is_empty() {
            let _ = writeln!(out, "  <{tag}{attrs} />");
            return;
        }

        let _ = writeln!(out, "  <{tag}{attrs}>");
        for participant in participants {
            self.participant(out, participant);
        }
        for flow in message_flows {
            self.edge(out, flow, "messageFlow", "    ");
        }
        for raw in preserved {
            let _ = writeln!(out, "    {raw}");
        }
        let _ = writeln!(out, "  </{tag}>");
    }

    fn participant(&self, out: &mut String, element: &BpmnElement) {
        let tag = self.q("participant");
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &element.id);
        if !element.name.is_empty() {
            push_attr(&mut attrs, "name", &element.name);
        }
        if let Some(process_ref) = element.attributes.get("processRef") {
            push_attr(&mut attrs, "processRef", process_ref);
        }
        if let Some(country) = &element.country {
            push_attr(&mut attrs, "tilt:country", country);
        }
        for (key, value) in &element.attributes {
            if key != "processRef" {
                push_attr(&mut attrs, key, value);
            }
        }

        let inner = self.node_children(element, "      ", &[]);
        if inner.is_empty() {
            let _ = writeln!(out, "    <{tag}{attrs} />");
        } else {
            let _ = writeln!(out, "    <{tag}{attrs}>");
            out.push_str(&inner);
            let _ = writeln!(out, "    </{tag}>");
        }
    }

    fn process(&self, out: &mut String, scope_index: usize) {
        let scope = &self.model.processes[scope_index];
        let tag = self.q("process");
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &scope.id);
        for (key, value) in &scope.attributes {
            push_attr(&mut attrs, key, value);
        }

        let lanes: Vec<&BpmnElement> = self
            .model
            .elements
            .iter()
            .filter(|e| {
                e.class == ElementClass::Lane && e.process_id.as_deref() == Some(&scope.id)
            })
            .collect();
        let nodes: Vec<&BpmnElement> = self
            .model
            .elements
            .iter()
            .filter(|e| {
                e.process_id.as_deref() == Some(&scope.id)
                    && e.class != ElementClass::Lane
                    && e.class != ElementClass::Participant
            })
            .collect();
        let sequence_flows: Vec<&Flow> = self
            .model
            .flows
            .iter()
            .filter(|f| {
                f.kind == FlowKind::SequenceFlow && f.process_id.as_deref() == Some(&scope.id)
            })
            .collect();

        let empty = lanes.is_empty()
            && nodes.is_empty()
            && sequence_flows.is_empty()
            && scope.preserved.is_empty();
        if empty {
            let _ = writeln!(out, "  <{tag}{attrs} />");
            return;
        }

        let _ = writeln!(out, "  <{tag}{attrs}>");
        if !lanes.is_empty() {
            let lane_set_tag = self.q("laneSet");
            let lane_set_id = scope
                .lane_set_id
                .clone()
                .unwrap_or_else(|| format!("LaneSet_{}", scope.id));
            let _ = writeln!(out, "    <{lane_set_tag} id=\"{}\">", escape(&lane_set_id));
            for lane in &lanes {
                self.lane(out, lane);
            }
            let _ = writeln!(out, "    </{lane_set_tag}>");
        }
        for node in &nodes {
            self.flow_node(out, node);
        }
        for flow in sequence_flows {
            self.edge(out, flow, "sequenceFlow", "    ");
        }
        for raw in &scope.preserved {
            let _ = writeln!(out, "    {raw}");
        }
        let _ = writeln!(out, "  </{tag}>");
    }

    fn lane(&self, out: &mut String, lane: &BpmnElement) {
        let tag = self.q("lane");
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &lane.id);
        if !lane.name.is_empty() {
            push_attr(&mut attrs, "name", &lane.name);
        }
        for (key, value) in &lane.attributes {
            push_attr(&mut attrs, key, value);
        }

        let mut inner = self.node_children(lane, "        ", &[]);
        let ref_tag = self.q("flowNodeRef");
        for member in &self.model.elements {
            if member.container.as_deref() == Some(&lane.id) {
                let _ = writeln!(inner, "        <{ref_tag}>{}</{ref_tag}>", escape(&member.id));
            }
        }

        if inner.is_empty() {
            let _ = writeln!(out, "      <{tag}{attrs} />");
        } else {
            let _ = writeln!(out, "      <{tag}{attrs}>");
            out.push_str(&inner);
            let _ = writeln!(out, "      </{tag}>");
        }
    }

    fn flow_node(&self, out: &mut String, element: &BpmnElement) {
        let tag = self.q(&element.tag);
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &element.id);
        if !element.name.is_empty() {
            push_attr(&mut attrs, "name", &element.name);
        }
        for (key, value) in &element.attributes {
            push_attr(&mut attrs, key, value);
        }

        let associations: Vec<&Flow> = self
            .model
            .flows
            .iter()
            .filter(|f| f.kind == FlowKind::DataAssociation && self.association_host(f) == element.id)
            .collect();

        let inner = self.node_children(element, "      ", &associations);
        if inner.is_empty() {
            let _ = writeln!(out, "    <{tag}{attrs} />");
        } else {
            let _ = writeln!(out, "    <{tag}{attrs}>");
            out.push_str(&inner);
            let _ = writeln!(out, "    </{tag}>");
        }
    }

    /// The activity a data association nests in.
    fn association_host(&self, flow: &Flow) -> String {
        let source_is_activity = self
            .model
            .element(&flow.source_id)
            .map(|e| e.class == ElementClass::Activity)
            .unwrap_or(false);
        if source_is_activity {
            flow.source_id.clone()
        } else {
            flow.target_id.clone()
        }
    }

    /// extensionElements + preserved children + nested data associations.
    fn node_children(
        &self,
        element: &BpmnElement,
        indent: &str,
        associations: &[&Flow],
    ) -> String {
        let mut inner = String::new();
        if !element.annotations.is_empty() || !element.extension_extra.is_empty() {
            let ext_tag = self.q("extensionElements");
            let _ = writeln!(inner, "{indent}<{ext_tag}>");
            let child_indent = format!("{indent}  ");
            for annotation in &element.annotations {
                inner.push_str(&encode_annotation(annotation, &child_indent));
            }
            for raw in &element.extension_extra {
                let _ = writeln!(inner, "{child_indent}{raw}");
            }
            let _ = writeln!(inner, "{indent}</{ext_tag}>");
        }
        for raw in &element.extra_xml {
            let _ = writeln!(inner, "{indent}{raw}");
        }
        for association in associations {
            self.data_association(&mut inner, association, element, indent);
        }
        inner
    }

    fn data_association(&self, out: &mut String, flow: &Flow, host: &BpmnElement, indent: &str) {
        let input = flow.target_id == host.id;
        let tag = self.q(if input { "dataInputAssociation" } else { "dataOutputAssociation" });
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &flow.id);
        if !flow.name.is_empty() {
            push_attr(&mut attrs, "name", &flow.name);
        }
        for (key, value) in &flow.attributes {
            push_attr(&mut attrs, key, value);
        }
        let _ = writeln!(out, "{indent}<{tag}{attrs}>");
        let child_indent = format!("{indent}  ");
        let (ref_tag, referenced) = if input {
            (self.q("sourceRef"), &flow.source_id)
        } else {
            (self.q("targetRef"), &flow.target_id)
        };
        let _ = writeln!(out, "{child_indent}<{ref_tag}>{}</{ref_tag}>", escape(referenced));
        for raw in &flow.extra_xml {
            let _ = writeln!(out, "{child_indent}{raw}");
        }
        let _ = writeln!(out, "{indent}</{tag}>");
    }

    /// Message and sequence flows share the attribute-based reference shape.
    fn edge(&self, out: &mut String, flow: &Flow, local: &str, indent: &str) {
        let tag = self.q(local);
        let mut attrs = String::new();
        push_attr(&mut attrs, "id", &flow.id);
        if !flow.name.is_empty() {
            push_attr(&mut attrs, "name", &flow.name);
        }
        push_attr(&mut attrs, "sourceRef", &flow.source_id);
        push_attr(&mut attrs, "targetRef", &flow.target_id);
        for (key, value) in &flow.attributes {
            push_attr(&mut attrs, key, value);
        }

        let mut inner = String::new();
        let child_indent = format!("{indent}  ");
        if !flow.annotations.is_empty() || !flow.extension_extra.is_empty() {
            let ext_tag = self.q("extensionElements");
            let _ = writeln!(inner, "{child_indent}<{ext_tag}>");
            let ext_indent = format!("{child_indent}  ");
            for annotation in &flow.annotations {
                inner.push_str(&encode_annotation(annotation, &ext_indent));
            }
            for raw in &flow.extension_extra {
                let _ = writeln!(inner, "{ext_indent}{raw}");
            }
            let _ = writeln!(inner, "{child_indent}</{ext_tag}>");
        }
        for raw in &flow.extra_xml {
            let _ = writeln!(inner, "{child_indent}{raw}");
        }

        if inner.is_empty() {
            let _ = writeln!(out, "{indent}<{tag}{attrs} />");
        } else {
            let _ = writeln!(out, "{indent}<{tag}{attrs}>");
            out.push_str(&inner);
            let _ = writeln!(out, "{indent}</{tag}>");
        }
    }
}

fn push_attr(out: &mut String, name: &str, value: &str) {
    let _ = write!(out, " {name}=\"{}\"", escape(value));
}
