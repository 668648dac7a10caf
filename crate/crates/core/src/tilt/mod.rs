//! TILT transparency information fields and their BPMN placement rules.
//!
//! Defines the annotation payload shapes, the ten information-field columns,
//! and the legality matrix that says which field may sit on which BPMN
//! element class in which diagram kind.

mod matrix;
pub(crate) mod xml;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpmn::{BpmnModel, DiagramKind, ElementClass, FlowKind};

pub use matrix::{allowed_fields, placement_mark, Mark, PlacementClass};

/// One TILT information field kind. The abbreviated `rightTo{...}` mapping
/// column expands to the five `RightTo*` kinds, which share its placement
/// rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TiltFieldKind {
    Meta,
    Controller,
    DataProtectionOfficer,
    DataDisclosed,
    ThirdCountryTransfers,
    AccessAndDataPortability,
    Sources,
    RightToInformation,
    RightToRectificationOrDeletion,
    RightToDataPortability,
    RightToWithdrawConsent,
    RightToComplain,
    AutomatedDecisionMaking,
    ChangesOfPurpose,
}

impl TiltFieldKind {
    pub const ALL: [TiltFieldKind; 14] = [
        TiltFieldKind::Meta,
        TiltFieldKind::Controller,
        TiltFieldKind::DataProtectionOfficer,
        TiltFieldKind::DataDisclosed,
        TiltFieldKind::ThirdCountryTransfers,
        TiltFieldKind::AccessAndDataPortability,
        TiltFieldKind::Sources,
        TiltFieldKind::RightToInformation,
        TiltFieldKind::RightToRectificationOrDeletion,
        TiltFieldKind::RightToDataPortability,
        TiltFieldKind::RightToWithdrawConsent,
        TiltFieldKind::RightToComplain,
        TiltFieldKind::AutomatedDecisionMaking,
        TiltFieldKind::ChangesOfPurpose,
    ];

    /// The camelCase name used both as XML tag and JSON key.
    pub fn name(&self) -> &'static str {
        match self {
            TiltFieldKind::Meta => "meta",
            TiltFieldKind::Controller => "controller",
            TiltFieldKind::DataProtectionOfficer => "dataProtectionOfficer",
            TiltFieldKind::DataDisclosed => "dataDisclosed",
            TiltFieldKind::ThirdCountryTransfers => "thirdCountryTransfers",
            TiltFieldKind::AccessAndDataPortability => "accessAndDataPortability",
            TiltFieldKind::Sources => "sources",
            TiltFieldKind::RightToInformation => "rightToInformation",
            TiltFieldKind::RightToRectificationOrDeletion => "rightToRectificationOrDeletion",
            TiltFieldKind::RightToDataPortability => "rightToDataPortability",
            TiltFieldKind::RightToWithdrawConsent => "rightToWithdrawConsent",
            TiltFieldKind::RightToComplain => "rightToComplain",
            TiltFieldKind::AutomatedDecisionMaking => "automatedDecisionMaking",
            TiltFieldKind::ChangesOfPurpose => "changesOfPurpose",
        }
    }

    pub fn from_name(name: &str) -> Option<TiltFieldKind> {
        TiltFieldKind::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn is_right(&self) -> bool {
        matches!(
            self,
            TiltFieldKind::RightToInformation
                | TiltFieldKind::RightToRectificationOrDeletion
                | TiltFieldKind::RightToDataPortability
                | TiltFieldKind::RightToWithdrawConsent
                | TiltFieldKind::RightToComplain
        )
    }

    /// The mapping column this kind belongs to (rights collapse into one).
    pub fn column(&self) -> FieldColumn {
        match self {
            TiltFieldKind::Meta => FieldColumn::Meta,
            TiltFieldKind::Controller => FieldColumn::Controller,
            TiltFieldKind::DataProtectionOfficer => FieldColumn::DataProtectionOfficer,
            TiltFieldKind::DataDisclosed => FieldColumn::DataDisclosed,
            TiltFieldKind::ThirdCountryTransfers => FieldColumn::ThirdCountryTransfers,
            TiltFieldKind::AccessAndDataPortability => FieldColumn::AccessAndDataPortability,
            TiltFieldKind::Sources => FieldColumn::Sources,
            k if k.is_right() => FieldColumn::Rights,
            TiltFieldKind::AutomatedDecisionMaking => FieldColumn::AutomatedDecisionMaking,
            TiltFieldKind::ChangesOfPurpose => FieldColumn::ChangesOfPurpose,
            _ => unreachable!(),
        }
    }
}

/// One of the ten information-field columns of the BPMN-TILT mapping table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FieldColumn {
    Meta,
    Controller,
    DataProtectionOfficer,
    DataDisclosed,
    ThirdCountryTransfers,
    AccessAndDataPortability,
    Sources,
    Rights,
    AutomatedDecisionMaking,
    ChangesOfPurpose,
}

impl FieldColumn {
    pub const ALL: [FieldColumn; 10] = [
        FieldColumn::Meta,
        FieldColumn::Controller,
        FieldColumn::DataProtectionOfficer,
        FieldColumn::DataDisclosed,
        FieldColumn::ThirdCountryTransfers,
        FieldColumn::AccessAndDataPortability,
        FieldColumn::Sources,
        FieldColumn::Rights,
        FieldColumn::AutomatedDecisionMaking,
        FieldColumn::ChangesOfPurpose,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FieldColumn::Rights => "rightTo{inf, del, por, con, com}",
            other => other.field_kinds()[0].name(),
        }
    }

    /// The field kinds occupying this column.
    pub fn field_kinds(&self) -> &'static [TiltFieldKind] {
        match self {
            FieldColumn::Meta => &[TiltFieldKind::Meta],
            FieldColumn::Controller => &[TiltFieldKind::Controller],
            FieldColumn::DataProtectionOfficer => &[TiltFieldKind::DataProtectionOfficer],
            FieldColumn::DataDisclosed => &[TiltFieldKind::DataDisclosed],
            FieldColumn::ThirdCountryTransfers => &[TiltFieldKind::ThirdCountryTransfers],
            FieldColumn::AccessAndDataPortability => &[TiltFieldKind::AccessAndDataPortability],
            FieldColumn::Sources => &[TiltFieldKind::Sources],
            FieldColumn::Rights => &[
                TiltFieldKind::RightToInformation,
                TiltFieldKind::RightToRectificationOrDeletion,
                TiltFieldKind::RightToDataPortability,
                TiltFieldKind::RightToWithdrawConsent,
                TiltFieldKind::RightToComplain,
            ],
            FieldColumn::AutomatedDecisionMaking => &[TiltFieldKind::AutomatedDecisionMaking],
            FieldColumn::ChangesOfPurpose => &[TiltFieldKind::ChangesOfPurpose],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RightKind {
    Information,
    RectificationOrDeletion,
    DataPortability,
    WithdrawConsent,
    Complain,
}

impl RightKind {
    pub fn field(&self) -> TiltFieldKind {
        match self {
            RightKind::Information => TiltFieldKind::RightToInformation,
            RightKind::RectificationOrDeletion => TiltFieldKind::RightToRectificationOrDeletion,
            RightKind::DataPortability => TiltFieldKind::RightToDataPortability,
            RightKind::WithdrawConsent => TiltFieldKind::RightToWithdrawConsent,
            RightKind::Complain => TiltFieldKind::RightToComplain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Representative {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Controller {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub division: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representative: Option<Representative>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataProtectionOfficer {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
}

/// Document identity annotation. Timestamps are ISO-8601 strings and kept
/// verbatim so models round-trip byte-stable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Meta {
    pub name: String,
    pub created: String,
    pub modified: String,
    pub version: u32,
}

/// One personal-data category plus its processing context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataDisclosed {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub id: String,
    pub category: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub purposes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub legal_bases: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub recipients: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub storage: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ThirdCountryTransfer {
    pub country: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adequacy_decision: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safeguards: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SourceInfo {
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessAndDataPortability {
    pub available: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RightEntry {
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AutomatedDecisionMaking {
    pub in_use: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logic_involved: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChangesOfPurpose {
    pub description: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affected_data_categories: Vec<String>,
}

/// Field-specific annotation payload. The payload shape matches the field
/// kind by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TiltPayload {
    Meta(Meta),
    Controller(Controller),
    DataProtectionOfficer(DataProtectionOfficer),
    DataDisclosed(DataDisclosed),
    ThirdCountryTransfers(ThirdCountryTransfer),
    AccessAndDataPortability(AccessAndDataPortability),
    Sources(SourceInfo),
    Right { kind: RightKind, entry: RightEntry },
    AutomatedDecisionMaking(AutomatedDecisionMaking),
    ChangesOfPurpose(ChangesOfPurpose),
}

impl TiltPayload {
    pub fn field(&self) -> TiltFieldKind {
        match self {
            TiltPayload::Meta(_) => TiltFieldKind::Meta,
            TiltPayload::Controller(_) => TiltFieldKind::Controller,
            TiltPayload::DataProtectionOfficer(_) => TiltFieldKind::DataProtectionOfficer,
            TiltPayload::DataDisclosed(_) => TiltFieldKind::DataDisclosed,
            TiltPayload::ThirdCountryTransfers(_) => TiltFieldKind::ThirdCountryTransfers,
            TiltPayload::AccessAndDataPortability(_) => TiltFieldKind::AccessAndDataPortability,
            TiltPayload::Sources(_) => TiltFieldKind::Sources,
            TiltPayload::Right { kind, .. } => kind.field(),
            TiltPayload::AutomatedDecisionMaking(_) => TiltFieldKind::AutomatedDecisionMaking,
            TiltPayload::ChangesOfPurpose(_) => TiltFieldKind::ChangesOfPurpose,
        }
    }
}

/// How an annotation came to be. Auto-filled annotations carry a marker in
/// the XML so tooling may regenerate them; manual ones are never touched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    Manual,
    AutoFilled,
}

/// One TILT information field instance attached to a BPMN element or flow.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TiltAnnotation {
    pub payload: TiltPayload,
    pub origin: Origin,
}

impl TiltAnnotation {
    pub fn manual(payload: TiltPayload) -> Self {
        TiltAnnotation { payload, origin: Origin::Manual }
    }

    pub fn auto_filled(payload: TiltPayload) -> Self {
        TiltAnnotation { payload, origin: Origin::AutoFilled }
    }

    pub fn field(&self) -> TiltFieldKind {
        self.payload.field()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TiltError {
    #[error("no element or flow with id '{0}' in model")]
    UnknownElement(String),
    #[error("field {field:?} is not allowed on {class:?} in a {kind:?} diagram")]
    PlacementViolation {
        element_id: String,
        class: PlacementClass,
        field: TiltFieldKind,
        kind: DiagramKind,
    },
}

/// Append `annotation` to the element or flow with id `element_id`, enforcing
/// the placement rules for the model's diagram kind. Multiple
/// annotations of the same kind on one element are permitted.
pub fn attach(
    model: &mut BpmnModel,
    element_id: &str,
    annotation: TiltAnnotation,
) -> Result<(), TiltError> {
    let kind = model.diagram_kind;
    let field = annotation.field();

    if let Some(element) = model.elements.iter_mut().find(|e| e.id == element_id) {
        let class = PlacementClass::from(element.class);
        if !allowed_fields(class, kind).contains(&field) {
            return Err(TiltError::PlacementViolation {
                element_id: element_id.to_string(),
                class,
                field,
                kind,
            });
        }
        element.annotations.push(annotation);
        model.ensure_tilt_namespace();
        return Ok(());
    }

    if let Some(flow) = model.flows.iter_mut().find(|f| f.id == element_id) {
        // Only message flows have a placement column; other flow kinds accept nothing.
        if flow.kind != FlowKind::MessageFlow
            || !allowed_fields(PlacementClass::MessageFlow, kind).contains(&field)
        {
            return Err(TiltError::PlacementViolation {
                element_id: element_id.to_string(),
                class: PlacementClass::MessageFlow,
                field,
                kind,
            });
        }
        flow.annotations.push(annotation);
        model.ensure_tilt_namespace();
        return Ok(());
    }

    Err(TiltError::UnknownElement(element_id.to_string()))
}

/// All annotations of `field` in the model, in document order (elements
/// before flows, each in model order).
pub fn extract(
    model: &BpmnModel,
    field: TiltFieldKind,
) -> Vec<(&str, &TiltAnnotation)> {
    let mut found = Vec::new();
    for element in &model.elements {
        for annotation in &element.annotations {
            if annotation.field() == field {
                found.push((element.id.as_str(), annotation));
            }
        }
    }
    for flow in &model.flows {
        for annotation in &flow.annotations {
            if annotation.field() == field {
                found.push((flow.id.as_str(), annotation));
            }
        }
    }
    found
}

/// Convenience: which element classes may legally carry `field` in `kind`
/// diagrams. Used by the lint completeness rule to anchor findings.
pub fn legal_placements(field: TiltFieldKind, kind: DiagramKind) -> BTreeSet<PlacementClass> {
    PlacementClass::ALL
        .into_iter()
        .filter(|class| allowed_fields(*class, kind).contains(&field))
        .collect()
}

impl ElementClass {
    pub fn placement(self) -> PlacementClass {
        PlacementClass::from(self)
    }
}
