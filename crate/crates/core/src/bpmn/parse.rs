//! BPMN 2.0 XML parsing.
//!
//! Recognized elements and flows become model values; TILT-namespaced
//! `extensionElements` children become annotations; everything else is kept
//! as raw XML slices so serialization can re-emit it verbatim.

use std::collections::{BTreeMap, BTreeSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::name::QName;
use quick_xml::Reader;
use thiserror::Error;

use crate::bpmn::{
    BpmnElement, BpmnModel, CollaborationScope, DiagramKind, ElementClass, Flow, FlowKind,
    ModelError, ProcessScope, BPMNDI_NS, BPMN_NS, TILT_NS,
};
use crate::tilt::xml::{decode_annotation, DecodeError, TiltNode};
use crate::tilt::TiltAnnotation;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("unknown TILT field '{tag}' on '{element_id}'")]
    UnknownTiltField { element_id: String, tag: String },
    #[error("invalid '{field}' annotation on '{element_id}': {reason}")]
    InvalidAnnotation { element_id: String, field: String, reason: String },
}

impl From<ModelError> for ParseError {
    fn from(err: ModelError) -> Self {
        ParseError::SchemaViolation(err.to_string())
    }
}

/// Parse a BPMN 2.0 document into a model.
pub fn parse_bpmn(xml: &str) -> Result<BpmnModel, ParseError> {
    Parser::new(xml).parse_document()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ns {
    Bpmn,
    Tilt,
    BpmnDi,
    Other,
}

struct Parser<'a> {
    src: &'a str,
    reader: Reader<&'a [u8]>,
    ns_stack: Vec<Vec<(String, String)>>,
}

/// Start tag plus whether it is self-closing.
fn start_of<'e, 'a>(event: &'e Event<'a>) -> Option<(&'e BytesStart<'a>, bool)> {
    match event {
        Event::Start(s) => Some((s, false)),
        Event::Empty(s) => Some((s, true)),
        _ => None,
    }
}

fn split_qname(raw: &[u8]) -> (Option<String>, String) {
    let raw = String::from_utf8_lossy(raw).into_owned();
    match raw.split_once(':') {
        Some((prefix, local)) => (Some(prefix.to_string()), local.to_string()),
        None => (None, raw),
    }
}

fn activity_tag(local: &str) -> bool {
    matches!(
        local,
        "task"
            | "userTask"
            | "serviceTask"
            | "sendTask"
            | "receiveTask"
            | "scriptTask"
            | "businessRuleTask"
            | "manualTask"
            | "callActivity"
            | "subProcess"
            | "transaction"
    )
}

fn gateway_tag(local: &str) -> bool {
    matches!(
        local,
        "exclusiveGateway"
            | "parallelGateway"
            | "inclusiveGateway"
            | "eventBasedGateway"
            | "complexGateway"
    )
}

fn element_class_of(local: &str) -> Option<ElementClass> {
    if activity_tag(local) {
        return Some(ElementClass::Activity);
    }
    if gateway_tag(local) {
        return Some(ElementClass::Gateway);
    }
    match local {
        "startEvent" => Some(ElementClass::StartEvent),
        "endEvent" => Some(ElementClass::EndEvent),
        "dataStoreReference" => Some(ElementClass::DataStoreReference),
        "dataObjectReference" => Some(ElementClass::DataObjectReference),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, reader: Reader::from_str(src), ns_stack: Vec::new() }
    }

    fn pos(&self) -> usize {
        self.reader.buffer_position() as usize
    }

    fn next_event(&mut self) -> Result<(usize, Event<'a>), ParseError> {
        let pos = self.pos();
        let event = self
            .reader
            .read_event()
            .map_err(|e| ParseError::MalformedXml(e.to_string()))?;
        Ok((pos, event))
    }

    /// Namespace declarations carried by this start tag.
    fn scope_of(&self, start: &BytesStart) -> Result<Vec<(String, String)>, ParseError> {
        let mut scope = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| ParseError::MalformedXml(e.to_string()))?;
            let key = attr.key.as_ref();
            let value = attr
                .unescape_value()
                .map_err(|e| ParseError::MalformedXml(e.to_string()))?
                .into_owned();
            if key == b"xmlns" {
                scope.push((String::new(), value));
            } else if let Some(prefix) = key.strip_prefix(b"xmlns:") {
                scope.push((String::from_utf8_lossy(prefix).into_owned(), value));
            }
        }
        Ok(scope)
    }

    fn resolve(&self, prefix: &str) -> Option<&str> {
        for scope in self.ns_stack.iter().rev() {
            for (p, uri) in scope.iter().rev() {
                if p == prefix {
                    if uri.is_empty() {
                        return None;
                    }
                    return Some(uri);
                }
            }
        }
        None
    }

    fn classify(&self, raw_name: &[u8]) -> (Ns, String) {
        let (prefix, local) = split_qname(raw_name);
        let prefix_str = prefix.as_deref().unwrap_or("");
        match self.resolve(prefix_str) {
            Some(BPMN_NS) => (Ns::Bpmn, local),
            Some(TILT_NS) => (Ns::Tilt, local),
            Some(BPMNDI_NS) => (Ns::BpmnDi, local),
            Some(_) => (Ns::Other, local),
            // Lenient fallback for fragments without namespace declarations.
            None => match prefix_str {
                "bpmn" | "" => (Ns::Bpmn, local),
                "tilt" => (Ns::Tilt, local),
                "bpmndi" => (Ns::BpmnDi, local),
                _ => (Ns::Other, local),
            },
        }
    }

    /// Non-xmlns attributes as (qualified name, unescaped value) pairs.
    fn attrs_of(&self, start: &BytesStart) -> Result<Vec<(String, String)>, ParseError> {
        let mut attrs = Vec::new();
        for attr in start.attributes() {
            let attr = attr.map_err(|e| ParseError::MalformedXml(e.to_string()))?;
            let key = attr.key.as_ref();
            if key == b"xmlns" || key.starts_with(b"xmlns:") {
                continue;
            }
            let value = attr
                .unescape_value()
                .map_err(|e| ParseError::MalformedXml(e.to_string()))?
                .into_owned();
            attrs.push((String::from_utf8_lossy(key).into_owned(), value));
        }
        Ok(attrs)
    }

    /// True when the qualified attribute name resolves into the TILT namespace.
    fn is_tilt_attr(&self, qualified: &str) -> bool {
        match qualified.split_once(':') {
            Some((prefix, _)) => match self.resolve(prefix) {
                Some(uri) => uri == TILT_NS,
                None => prefix == "tilt",
            },
            None => false,
        }
    }

    /// Consume the rest of `start`'s subtree and return the verbatim source
    /// slice covering the whole element. `pos` is the offset of `<`.
    fn capture_raw(
        &mut self,
        pos: usize,
        start: &BytesStart,
        empty: bool,
    ) -> Result<String, ParseError> {
        if !empty {
            let name = start.name().as_ref().to_vec();
            self.reader
                .read_to_end(QName(&name))
                .map_err(|e| ParseError::MalformedXml(e.to_string()))?;
        }
        Ok(self.src[pos..self.pos()].to_string())
    }

    fn record_foreign_id(&self, start: &BytesStart, model: &mut BpmnModel) {
        if let Ok(attrs) = self.attrs_of(start) {
            if let Some((_, id)) = attrs.iter().find(|(k, _)| k == "id") {
                model.foreign_ids.insert(id.clone());
            }
        }
    }

    fn skip_subtree(&mut self, start: &BytesStart) -> Result<(), ParseError> {
        let name = start.name().as_ref().to_vec();
        self.reader
            .read_to_end(QName(&name))
            .map_err(|e| ParseError::MalformedXml(e.to_string()))?;
        Ok(())
    }

    fn parse_document(&mut self) -> Result<BpmnModel, ParseError> {
        let mut model = None;
        loop {
            let (_pos, event) = self.next_event()?;
            if let Some((start, is_empty)) = start_of(&event) {
                if model.is_some() {
                    return Err(ParseError::MalformedXml("multiple root elements".into()));
                }
                let scope = self.scope_of(start)?;
                self.ns_stack.push(scope);
                let (ns, local) = self.classify(start.name().as_ref());
                if ns != Ns::Bpmn || local != "definitions" {
                    return Err(ParseError::SchemaViolation(format!(
                        "root element must be a BPMN definitions element, found '{local}'"
                    )));
                }
                let parsed = self.parse_definitions(start, is_empty)?;
                self.ns_stack.pop();
                model = Some(parsed);
                continue;
            }
            match event {
                Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
                Event::Text(t) => {
                    let text = t.unescape().map_err(|e| ParseError::MalformedXml(e.to_string()))?;
                    if !text.trim().is_empty() {
                        return Err(ParseError::MalformedXml("text outside root element".into()));
                    }
                }
                Event::End(_) => {
                    return Err(ParseError::MalformedXml("unexpected end tag".into()))
                }
                Event::CData(_) => {
                    return Err(ParseError::MalformedXml("unexpected CDATA outside root".into()))
                }
                Event::Eof => break,
                Event::Start(_) | Event::Empty(_) => unreachable!(),
            }
        }
        let mut model =
            model.ok_or_else(|| ParseError::MalformedXml("no root element found".into()))?;
        finalize(&mut model)?;
        Ok(model)
    }

    fn parse_definitions(
        &mut self,
        start: &BytesStart,
        empty: bool,
    ) -> Result<BpmnModel, ParseError> {
        let mut model = BpmnModel::default();
        for (prefix, uri) in self.ns_stack.last().cloned().unwrap_or_default() {
            model.source_namespaces.insert(prefix, uri);
        }
        for (key, value) in self.attrs_of(start)? {
            if key == "id" {
                model.definitions_id = Some(value);
            } else {
                model.definitions_attributes.insert(key, value);
            }
        }
        if empty {
            return Ok(model);
        }

        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let scope = self.scope_of(child)?;
                self.ns_stack.push(scope);
                let (ns, local) = self.classify(child.name().as_ref());
                match (ns, local.as_str()) {
                    (Ns::Bpmn, "process") => {
                        self.parse_process(child, is_empty, &mut model)?;
                        self.ns_stack.pop();
                    }
                    (Ns::Bpmn, "collaboration") => {
                        self.parse_collaboration(child, is_empty, &mut model)?;
                        self.ns_stack.pop();
                    }
                    (Ns::BpmnDi, "BPMNDiagram") => {
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        model.diagram_interchange.push(raw);
                    }
                    _ => {
                        self.record_foreign_id(child, &mut model);
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        model.preserved_definitions.push(raw);
                    }
                }
                continue;
            }
            match event {
                Event::End(_) => break,
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated definitions".into()))
                }
                _ => {}
            }
        }
        Ok(model)
    }

    fn parse_collaboration(
        &mut self,
        start: &BytesStart,
        empty: bool,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        let mut scope = CollaborationScope::default();
        for (key, value) in self.attrs_of(start)? {
            if key == "id" {
                scope.id = value;
            } else {
                scope.attributes.insert(key, value);
            }
        }
        if empty {
            model.collaboration = Some(scope);
            return Ok(());
        }

        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let (ns, local) = self.classify(child.name().as_ref());
                match (ns, local.as_str()) {
                    (Ns::Bpmn, "participant") => {
                        self.parse_participant(child, is_empty, model)?;
                        self.ns_stack.pop();
                    }
                    (Ns::Bpmn, "messageFlow") => {
                        let flow = self.parse_flow(child, is_empty, FlowKind::MessageFlow, None)?;
                        model.flows.push(flow);
                        self.ns_stack.pop();
                    }
                    _ => {
                        self.record_foreign_id(child, model);
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        scope.preserved.push(raw);
                    }
                }
                continue;
            }
            match event {
                Event::End(_) => break,
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated collaboration".into()))
                }
                _ => {}
            }
        }
        model.collaboration = Some(scope);
        Ok(())
    }

    fn parse_participant(
        &mut self,
        start: &BytesStart,
        empty: bool,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        let mut element =
            BpmnElement::new("", ElementClass::Participant, "participant", "");
        for (key, value) in self.attrs_of(start)? {
            if key == "id" {
                element.id = value;
            } else if key == "name" {
                element.name = value;
            } else if self.is_tilt_attr(&key) && key.ends_with(":country") {
                element.country = Some(value);
            } else {
                element.attributes.insert(key, value);
            }
        }
        if element.id.is_empty() {
            return Err(ParseError::SchemaViolation("participant without id".into()));
        }
        if !empty {
            self.parse_node_children(&mut element, model)?;
        }
        model.elements.push(element);
        Ok(())
    }

    fn parse_process(
        &mut self,
        start: &BytesStart,
        empty: bool,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        let mut scope = ProcessScope::new("");
        for (key, value) in self.attrs_of(start)? {
            if key == "id" {
                scope.id = value;
            } else {
                scope.attributes.insert(key, value);
            }
        }
        if scope.id.is_empty() {
            return Err(ParseError::SchemaViolation("process without id".into()));
        }
        let process_id = scope.id.clone();
        // node id -> lane id memberships gathered from laneSet
        let mut memberships: Vec<(String, String)> = Vec::new();

        if !empty {
            loop {
                let (pos, event) = self.next_event()?;
                if let Some((child, is_empty)) = start_of(&event) {
                    let child_scope = self.scope_of(child)?;
                    self.ns_stack.push(child_scope);
                    let (ns, local) = self.classify(child.name().as_ref());
                    if ns == Ns::Bpmn && local == "laneSet" {
                        self.parse_lane_set(
                            child,
                            is_empty,
                            &process_id,
                            &mut scope,
                            &mut memberships,
                            model,
                        )?;
                        self.ns_stack.pop();
                    } else if ns == Ns::Bpmn && local == "sequenceFlow" {
                        let flow = self.parse_flow(
                            child,
                            is_empty,
                            FlowKind::SequenceFlow,
                            Some(&process_id),
                        )?;
                        model.flows.push(flow);
                        self.ns_stack.pop();
                    } else if let Some(class) = element_class_of(&local).filter(|_| ns == Ns::Bpmn)
                    {
                        self.parse_flow_node(child, is_empty, class, &local, &process_id, model)?;
                        self.ns_stack.pop();
                    } else {
                        self.record_foreign_id(child, model);
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        scope.preserved.push(raw);
                    }
                    continue;
                }
                match event {
                    Event::End(_) => break,
                    Event::Eof => {
                        return Err(ParseError::MalformedXml("unterminated process".into()))
                    }
                    _ => {}
                }
            }
        }

        for (node_id, lane_id) in memberships {
            if let Some(element) = model.element_mut(&node_id) {
                element.container = Some(lane_id);
            }
        }
        model.processes.push(scope);
        Ok(())
    }

    fn parse_lane_set(
        &mut self,
        start: &BytesStart,
        empty: bool,
        process_id: &str,
        scope: &mut ProcessScope,
        memberships: &mut Vec<(String, String)>,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        for (key, value) in self.attrs_of(start)? {
            if key == "id" {
                scope.lane_set_id = Some(value);
            }
        }
        if empty {
            return Ok(());
        }
        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let (ns, local) = self.classify(child.name().as_ref());
                if ns == Ns::Bpmn && local == "lane" {
                    self.parse_lane(child, is_empty, process_id, memberships, model)?;
                    self.ns_stack.pop();
                } else {
                    self.record_foreign_id(child, model);
                    self.ns_stack.pop();
                    let raw = self.capture_raw(pos, child, is_empty)?;
                    scope.preserved.push(raw);
                }
                continue;
            }
            match event {
                Event::End(_) => break,
                Event::Eof => return Err(ParseError::MalformedXml("unterminated laneSet".into())),
                _ => {}
            }
        }
        Ok(())
    }

    fn parse_lane(
        &mut self,
        start: &BytesStart,
        empty: bool,
        process_id: &str,
        memberships: &mut Vec<(String, String)>,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        let mut element = BpmnElement::new("", ElementClass::Lane, "lane", "");
        element.process_id = Some(process_id.to_string());
        for (key, value) in self.attrs_of(start)? {
            match key.as_str() {
                "id" => element.id = value,
                "name" => element.name = value,
                _ => {
                    element.attributes.insert(key, value);
                }
            }
        }
        if element.id.is_empty() {
            return Err(ParseError::SchemaViolation("lane without id".into()));
        }

        if !empty {
            loop {
                let (pos, event) = self.next_event()?;
                if let Some((child, is_empty)) = start_of(&event) {
                    let child_scope = self.scope_of(child)?;
                    self.ns_stack.push(child_scope);
                    let (ns, local) = self.classify(child.name().as_ref());
                    if ns == Ns::Bpmn && local == "flowNodeRef" {
                        self.ns_stack.pop();
                        if !is_empty {
                            let text = self.read_text(child)?;
                            let node_id = text.trim().to_string();
                            if !node_id.is_empty() {
                                memberships.push((node_id, element.id.clone()));
                            }
                        }
                    } else if ns == Ns::Bpmn && local == "extensionElements" {
                        let (annotations, extra) =
                            self.parse_extension_elements(child, is_empty, &element.id)?;
                        element.annotations.extend(annotations);
                        element.extension_extra.extend(extra);
                        self.ns_stack.pop();
                    } else {
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        element.extra_xml.push(raw);
                    }
                    continue;
                }
                match event {
                    Event::End(_) => break,
                    Event::Eof => {
                        return Err(ParseError::MalformedXml("unterminated lane".into()))
                    }
                    _ => {}
                }
            }
        }
        model.elements.push(element);
        Ok(())
    }

    fn parse_flow_node(
        &mut self,
        start: &BytesStart,
        empty: bool,
        class: ElementClass,
        tag: &str,
        process_id: &str,
        model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        let mut element = BpmnElement::new("", class, tag, "");
        element.process_id = Some(process_id.to_string());
        for (key, value) in self.attrs_of(start)? {
            match key.as_str() {
                "id" => element.id = value,
                "name" => element.name = value,
                _ => {
                    element.attributes.insert(key, value);
                }
            }
        }
        if element.id.is_empty() {
            return Err(ParseError::SchemaViolation(format!("{tag} element without id")));
        }
        let mut data_flows = Vec::new();
        if !empty {
            self.parse_flow_node_children(&mut element, &mut data_flows, process_id, model)?;
        }
        model.elements.push(element);
        model.flows.extend(data_flows);
        Ok(())
    }

    /// Children of participants: extensionElements plus raw extras.
    fn parse_node_children(
        &mut self,
        element: &mut BpmnElement,
        _model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let (ns, local) = self.classify(child.name().as_ref());
                if ns == Ns::Bpmn && local == "extensionElements" {
                    let (annotations, extra) =
                        self.parse_extension_elements(child, is_empty, &element.id)?;
                    element.annotations.extend(annotations);
                    element.extension_extra.extend(extra);
                    self.ns_stack.pop();
                } else {
                    self.ns_stack.pop();
                    let raw = self.capture_raw(pos, child, is_empty)?;
                    element.extra_xml.push(raw);
                }
                continue;
            }
            match event {
                Event::End(_) => return Ok(()),
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated element".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_flow_node_children(
        &mut self,
        element: &mut BpmnElement,
        data_flows: &mut Vec<Flow>,
        process_id: &str,
        _model: &mut BpmnModel,
    ) -> Result<(), ParseError> {
        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let (ns, local) = self.classify(child.name().as_ref());
                match (ns, local.as_str()) {
                    (Ns::Bpmn, "extensionElements") => {
                        let (annotations, extra) =
                            self.parse_extension_elements(child, is_empty, &element.id)?;
                        element.annotations.extend(annotations);
                        element.extension_extra.extend(extra);
                        self.ns_stack.pop();
                    }
                    // Redundant with the sequence flow list; regenerated on write.
                    (Ns::Bpmn, "incoming") | (Ns::Bpmn, "outgoing") => {
                        self.ns_stack.pop();
                        if !is_empty {
                            self.skip_subtree(child)?;
                        }
                    }
                    (Ns::Bpmn, "dataInputAssociation")
                        if element.class == ElementClass::Activity =>
                    {
                        let flow =
                            self.parse_data_association(child, is_empty, element, true, process_id)?;
                        data_flows.push(flow);
                        self.ns_stack.pop();
                    }
                    (Ns::Bpmn, "dataOutputAssociation")
                        if element.class == ElementClass::Activity =>
                    {
                        let flow = self
                            .parse_data_association(child, is_empty, element, false, process_id)?;
                        data_flows.push(flow);
                        self.ns_stack.pop();
                    }
                    _ => {
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        element.extra_xml.push(raw);
                    }
                }
                continue;
            }
            match event {
                Event::End(_) => return Ok(()),
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated element".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_data_association(
        &mut self,
        start: &BytesStart,
        empty: bool,
        host: &BpmnElement,
        input: bool,
        process_id: &str,
    ) -> Result<Flow, ParseError> {
        let mut flow = Flow::new("", FlowKind::DataAssociation, "", "");
        flow.process_id = Some(process_id.to_string());
        for (key, value) in self.attrs_of(start)? {
            match key.as_str() {
                "id" => flow.id = value,
                "name" => flow.name = value,
                _ => {
                    flow.attributes.insert(key, value);
                }
            }
        }
        if flow.id.is_empty() {
            return Err(ParseError::SchemaViolation(format!(
                "data association on '{}' without id",
                host.id
            )));
        }
        let mut other_end = String::new();
        if !empty {
            loop {
                let (pos, event) = self.next_event()?;
                if let Some((child, is_empty)) = start_of(&event) {
                    let child_scope = self.scope_of(child)?;
                    self.ns_stack.push(child_scope);
                    let (ns, local) = self.classify(child.name().as_ref());
                    let want = if input { "sourceRef" } else { "targetRef" };
                    if ns == Ns::Bpmn && local == want {
                        self.ns_stack.pop();
                        if !is_empty {
                            other_end = self.read_text(child)?.trim().to_string();
                        }
                    } else {
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        flow.extra_xml.push(raw);
                    }
                    continue;
                }
                match event {
                    Event::End(_) => break,
                    Event::Eof => {
                        return Err(ParseError::MalformedXml(
                            "unterminated data association".into(),
                        ))
                    }
                    _ => {}
                }
            }
        }
        if other_end.is_empty() {
            return Err(ParseError::SchemaViolation(format!(
                "data association '{}' lacks a data reference",
                flow.id
            )));
        }
        if input {
            flow.source_id = other_end;
            flow.target_id = host.id.clone();
        } else {
            flow.source_id = host.id.clone();
            flow.target_id = other_end;
        }
        Ok(flow)
    }

    fn parse_flow(
        &mut self,
        start: &BytesStart,
        empty: bool,
        kind: FlowKind,
        process_id: Option<&str>,
    ) -> Result<Flow, ParseError> {
        let mut flow = Flow::new("", kind, "", "");
        flow.process_id = process_id.map(str::to_string);
        for (key, value) in self.attrs_of(start)? {
            match key.as_str() {
                "id" => flow.id = value,
                "name" => flow.name = value,
                "sourceRef" => flow.source_id = value,
                "targetRef" => flow.target_id = value,
                _ => {
                    flow.attributes.insert(key, value);
                }
            }
        }
        if flow.id.is_empty() {
            return Err(ParseError::SchemaViolation("flow without id".into()));
        }
        if flow.source_id.is_empty() || flow.target_id.is_empty() {
            return Err(ParseError::SchemaViolation(format!(
                "flow '{}' lacks sourceRef or targetRef",
                flow.id
            )));
        }
        if !empty {
            loop {
                let (pos, event) = self.next_event()?;
                if let Some((child, is_empty)) = start_of(&event) {
                    let child_scope = self.scope_of(child)?;
                    self.ns_stack.push(child_scope);
                    let (ns, local) = self.classify(child.name().as_ref());
                    if ns == Ns::Bpmn && local == "extensionElements" {
                        let (annotations, extra) =
                            self.parse_extension_elements(child, is_empty, &flow.id)?;
                        flow.annotations.extend(annotations);
                        flow.extension_extra.extend(extra);
                        self.ns_stack.pop();
                    } else {
                        self.ns_stack.pop();
                        let raw = self.capture_raw(pos, child, is_empty)?;
                        flow.extra_xml.push(raw);
                    }
                    continue;
                }
                match event {
                    Event::End(_) => break,
                    Event::Eof => {
                        return Err(ParseError::MalformedXml("unterminated flow".into()))
                    }
                    _ => {}
                }
            }
        }
        Ok(flow)
    }

    fn parse_extension_elements(
        &mut self,
        _start: &BytesStart,
        empty: bool,
        owner_id: &str,
    ) -> Result<(Vec<TiltAnnotation>, Vec<String>), ParseError> {
        let mut annotations = Vec::new();
        let mut extra = Vec::new();
        if empty {
            return Ok((annotations, extra));
        }
        loop {
            let (pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let (ns, _local) = self.classify(child.name().as_ref());
                if ns == Ns::Tilt {
                    let node = self.parse_tilt_node(child, is_empty)?;
                    self.ns_stack.pop();
                    let annotation = decode_annotation(&node).map_err(|e| match e {
                        DecodeError::UnknownField { tag } => ParseError::UnknownTiltField {
                            element_id: owner_id.to_string(),
                            tag,
                        },
                        DecodeError::Invalid { field, reason } => ParseError::InvalidAnnotation {
                            element_id: owner_id.to_string(),
                            field,
                            reason,
                        },
                    })?;
                    annotations.push(annotation);
                } else {
                    self.ns_stack.pop();
                    let raw = self.capture_raw(pos, child, is_empty)?;
                    extra.push(raw);
                }
                continue;
            }
            match event {
                Event::End(_) => return Ok((annotations, extra)),
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated extensionElements".into()))
                }
                _ => {}
            }
        }
    }

    fn parse_tilt_node(&mut self, start: &BytesStart, empty: bool) -> Result<TiltNode, ParseError> {
        let (_, local) = split_qname(start.name().as_ref());
        let mut node = TiltNode { local, ..Default::default() };
        for (key, value) in self.attrs_of(start)? {
            // Attributes on TILT elements are plain or tilt-prefixed names.
            let name = match key.split_once(':') {
                Some((_, local)) => local.to_string(),
                None => key,
            };
            node.attrs.insert(name, value);
        }
        if empty {
            return Ok(node);
        }
        loop {
            let (_pos, event) = self.next_event()?;
            if let Some((child, is_empty)) = start_of(&event) {
                let child_scope = self.scope_of(child)?;
                self.ns_stack.push(child_scope);
                let parsed = self.parse_tilt_node(child, is_empty)?;
                self.ns_stack.pop();
                node.children.push(parsed);
                continue;
            }
            match event {
                Event::Text(t) => {
                    let text = t.unescape().map_err(|e| ParseError::MalformedXml(e.to_string()))?;
                    node.text.push_str(&text);
                }
                Event::CData(c) => {
                    node.text.push_str(&String::from_utf8_lossy(c.as_ref()));
                }
                Event::End(_) => return Ok(node),
                Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated TILT element".into()))
                }
                _ => {}
            }
        }
    }

    fn read_text(&mut self, start: &BytesStart) -> Result<String, ParseError> {
        let mut text = String::new();
        let name = start.name().as_ref().to_vec();
        loop {
            let (_, event) = self.next_event()?;
            match event {
                Event::Text(t) => {
                    text.push_str(
                        &t.unescape().map_err(|e| ParseError::MalformedXml(e.to_string()))?,
                    );
                }
                Event::CData(c) => text.push_str(&String::from_utf8_lossy(c.as_ref())),
                Event::End(end) if end.name().as_ref() == name.as_slice() => return Ok(text),
                Event::End(_) | Event::Eof => {
                    return Err(ParseError::MalformedXml("unterminated text element".into()))
                }
                Event::Start(child) => {
                    // Nested markup inside a text-only element: skip it.
                    self.skip_subtree(&child)?;
                }
                _ => {}
            }
        }
    }
}

/// Container resolution, diagram kind, namespace normalization, validation.
fn finalize(model: &mut BpmnModel) -> Result<(), ParseError> {
    // Map processes to their referencing participants.
    let mut process_to_participant: BTreeMap<String, String> = BTreeMap::new();
    for participant in model.participants() {
        if let Some(process_ref) = participant.attributes.get("processRef") {
            process_to_participant.insert(process_ref.clone(), participant.id.clone());
        }
    }
    for element in &mut model.elements {
        if element.class == ElementClass::Participant {
            continue;
        }
        if (element.container.is_none() || element.class == ElementClass::Lane)
            && element.container.is_none() {
                if let Some(pid) = element
                    .process_id
                    .as_ref()
                    .and_then(|p| process_to_participant.get(p))
                {
                    element.container = Some(pid.clone());
                }
            }
    }

    model.diagram_kind = if model.participants().count() > 0 {
        DiagramKind::Collaboration
    } else {
        DiagramKind::Process
    };

    let needs_tilt = model.annotation_count() > 0
        || model.elements.iter().any(|e| e.country.is_some());
    if needs_tilt {
        match model.source_namespaces.get("tilt") {
            Some(uri) if uri != TILT_NS => {
                return Err(ParseError::SchemaViolation(format!(
                    "prefix 'tilt' is reserved for {TILT_NS}, found '{uri}'"
                )));
            }
            Some(_) => {}
            None => {
                model.source_namespaces.insert("tilt".into(), TILT_NS.into());
            }
        }
    }
    if !model.source_namespaces.values().any(|uri| uri == BPMN_NS) {
        model.source_namespaces.insert("bpmn".into(), BPMN_NS.into());
    }

    parse_validate(model)?;
    Ok(())
}

/// The same invariants as [`BpmnModel::validate`], but tolerant of flow
/// references into opaquely preserved subtrees.
fn parse_validate(model: &BpmnModel) -> Result<(), ParseError> {
    let mut seen = BTreeSet::new();
    for id in model
        .elements
        .iter()
        .map(|e| e.id.as_str())
        .chain(model.flows.iter().map(|f| f.id.as_str()))
        .chain(model.processes.iter().map(|p| p.id.as_str()))
    {
        if !seen.insert(id) {
            return Err(ParseError::SchemaViolation(format!("duplicate id '{id}'")));
        }
    }

    for flow in &model.flows {
        for (side, id) in [("source", &flow.source_id), ("target", &flow.target_id)] {
            if model.element(id).is_none() && !model.foreign_ids.contains(id) {
                return Err(ParseError::SchemaViolation(format!(
                    "flow '{}' references unknown {side} '{id}'",
                    flow.id
                )));
            }
        }
        if !flow.annotations.is_empty() && flow.kind != FlowKind::MessageFlow {
            return Err(ParseError::SchemaViolation(format!(
                "flow '{}' carries annotations but is not a message flow",
                flow.id
            )));
        }
    }

    for flow in model.flows_of_kind(FlowKind::MessageFlow) {
        let source = model.owning_participant(&flow.source_id).map(|p| p.id.clone());
        let target = model.owning_participant(&flow.target_id).map(|p| p.id.clone());
        if source.is_some() && source == target {
            return Err(ParseError::SchemaViolation(format!(
                "message flow '{}' endpoints belong to the same participant",
                flow.id
            )));
        }
    }

    for participant in model.participants() {
        if let Some(code) = &participant.country {
            if !crate::country::is_valid_country_code(code) {
                return Err(ParseError::SchemaViolation(format!(
                    "invalid country code '{code}' on participant '{}'",
                    participant.id
                )));
            }
        }
    }

    Ok(())
}
