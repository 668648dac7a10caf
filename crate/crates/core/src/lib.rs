//! Transparency-extended business process tooling.
//!
//! This crate connects BPMN 2.0 process models carrying machine-readable
//! transparency annotations (TILT) with transparency-focused event logs:
//! it parses and serializes annotated models, lints and auto-completes
//! them, exports process-centric TILT policy documents, ingests JSON-lines
//! event logs, discovers control-flow models with an inductive miner, and
//! conformance-checks declared against observed personal-data processing.

pub mod bpmn;
pub mod conformance;
pub mod country;
pub mod discovery;
pub mod eventlog;
pub mod export;
pub mod fixtures;
pub mod label;
pub mod lint;
pub mod simulate;
pub mod tilt;

pub use bpmn::{
    parse_bpmn, serialize_bpmn, BpmnElement, BpmnModel, DiagramKind, ElementClass, Flow, FlowKind,
};
pub use tilt::{allowed_fields, TiltAnnotation, TiltFieldKind, TiltPayload};
