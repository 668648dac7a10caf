//! Process-centric TILT document export.
//!
//! Walks an annotated model in document order, collapses structural
//! duplicates, and assembles a machine-readable transparency policy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpmn::BpmnModel;
use crate::tilt::{
    legal_placements, AccessAndDataPortability, AutomatedDecisionMaking, ChangesOfPurpose,
    Controller, DataDisclosed, DataProtectionOfficer, Meta, RightEntry, RightKind, SourceInfo,
    FieldColumn, ThirdCountryTransfer, TiltPayload,
};

/// One exported data-disclosed entry plus the ids of the model elements it
/// came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisclosedEntry {
    #[serde(flatten)]
    pub disclosed: DataDisclosed,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RightsSection {
    #[serde(rename = "rightToInformation")]
    pub information: Vec<RightEntry>,
    #[serde(rename = "rightToRectificationOrDeletion")]
    pub rectification_or_deletion: Vec<RightEntry>,
    #[serde(rename = "rightToDataPortability")]
    pub data_portability: Vec<RightEntry>,
    #[serde(rename = "rightToWithdrawConsent")]
    pub withdraw_consent: Vec<RightEntry>,
    #[serde(rename = "rightToComplain")]
    pub complain: Vec<RightEntry>,
}

impl RightsSection {
    fn list_mut(&mut self, kind: RightKind) -> &mut Vec<RightEntry> {
        match kind {
            RightKind::Information => &mut self.information,
            RightKind::RectificationOrDeletion => &mut self.rectification_or_deletion,
            RightKind::DataPortability => &mut self.data_portability,
            RightKind::WithdrawConsent => &mut self.withdraw_consent,
            RightKind::Complain => &mut self.complain,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &RightEntry> {
        self.information
            .iter()
            .chain(&self.rectification_or_deletion)
            .chain(&self.data_portability)
            .chain(&self.withdraw_consent)
            .chain(&self.complain)
    }
}

/// The assembled transparency policy. Keys follow the TILT field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiltDocument {
    pub meta: Meta,
    pub controller: Vec<Controller>,
    #[serde(rename = "dataProtectionOfficer")]
    pub data_protection_officer: Vec<DataProtectionOfficer>,
    #[serde(rename = "dataDisclosed")]
    pub data_disclosed: Vec<DisclosedEntry>,
    #[serde(rename = "thirdCountryTransfers")]
    pub third_country_transfers: Vec<ThirdCountryTransfer>,
    #[serde(rename = "accessAndDataPortability")]
    pub access_and_data_portability: Vec<AccessAndDataPortability>,
    pub sources: Vec<SourceInfo>,
    pub rights: RightsSection,
    #[serde(rename = "automatedDecisionMaking")]
    pub automated_decision_making: Vec<AutomatedDecisionMaking>,
    #[serde(rename = "changesOfPurpose")]
    pub changes_of_purpose: Vec<ChangesOfPurpose>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExportError {
    #[error("model carries no meta annotation; document identity cannot be established")]
    MissingMeta,
}

fn push_unique<T: PartialEq + Clone>(list: &mut Vec<T>, value: &T) {
    if !list.contains(value) {
        list.push(value.clone());
    }
}

/// Collect every annotation into a deduplicated document. Traversal is in
/// document order; output lists are sorted for stable serialization.
pub fn export_tilt(model: &BpmnModel) -> Result<TiltDocument, ExportError> {
    let mut meta: Option<Meta> = None;
    let mut controller = Vec::new();
    let mut dpo = Vec::new();
    let mut disclosed: Vec<DisclosedEntry> = Vec::new();
    let mut transfers = Vec::new();
    let mut access = Vec::new();
    let mut sources = Vec::new();
    let mut rights = RightsSection::default();
    let mut adm = Vec::new();
    let mut changes = Vec::new();

    let annotated = model
        .elements
        .iter()
        .map(|e| (e.id.as_str(), &e.annotations))
        .chain(model.flows.iter().map(|f| (f.id.as_str(), &f.annotations)));

    for (owner_id, annotations) in annotated {
        for annotation in annotations {
            match &annotation.payload {
                TiltPayload::Meta(m) => {
                    if meta.is_none() {
                        meta = Some(m.clone());
                    }
                }
                TiltPayload::Controller(c) => push_unique(&mut controller, c),
                TiltPayload::DataProtectionOfficer(d) => push_unique(&mut dpo, d),
                TiltPayload::DataDisclosed(d) => {
                    match disclosed.iter_mut().find(|entry| &entry.disclosed == d) {
                        Some(entry) => {
                            if !entry.provenance.iter().any(|p| p == owner_id) {
                                entry.provenance.push(owner_id.to_string());
                            }
                        }
                        None => disclosed.push(DisclosedEntry {
                            disclosed: d.clone(),
                            provenance: vec![owner_id.to_string()],
                        }),
                    }
                }
                TiltPayload::ThirdCountryTransfers(t) => push_unique(&mut transfers, t),
                TiltPayload::AccessAndDataPortability(a) => push_unique(&mut access, a),
                TiltPayload::Sources(s) => push_unique(&mut sources, s),
                TiltPayload::Right { kind, entry } => push_unique(rights.list_mut(*kind), entry),
                TiltPayload::AutomatedDecisionMaking(a) => push_unique(&mut adm, a),
                TiltPayload::ChangesOfPurpose(c) => push_unique(&mut changes, c),
            }
        }
    }

    let meta = meta.ok_or(ExportError::MissingMeta)?;

    controller.sort();
    dpo.sort();
    for entry in &mut disclosed {
        entry.provenance.sort();
    }
    disclosed.sort_by(|a, b| {
        (&a.disclosed.category, &a.disclosed.id, &a.provenance).cmp(&(
            &b.disclosed.category,
            &b.disclosed.id,
            &b.provenance,
        ))
    });
    transfers.sort();
    access.sort();
    sources.sort();
    rights.information.sort();
    rights.rectification_or_deletion.sort();
    rights.data_portability.sort();
    rights.withdraw_consent.sort();
    rights.complain.sort();
    adm.sort();
    changes.sort();

    Ok(TiltDocument {
        meta,
        controller,
        data_protection_officer: dpo,
        data_disclosed: disclosed,
        third_country_transfers: transfers,
        access_and_data_portability: access,
        sources,
        rights,
        automated_decision_making: adm,
        changes_of_purpose: changes,
    })
}

/// Two-space indented UTF-8 JSON, newline-terminated.
pub fn document_to_json(document: &TiltDocument) -> String {
    let mut json = serde_json::to_string_pretty(document).expect("document serializes");
    json.push('\n');
    json
}

/// Presence of one field column in a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletenessEntry {
    pub column: FieldColumn,
    /// Whether the column has at least one legal placement for the model's
    /// diagram kind.
    pub applicable: bool,
    pub present: bool,
}

/// A model is fully annotated once every applicable column is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CompletenessReport {
    pub entries: Vec<CompletenessEntry>,
}

impl CompletenessReport {
    pub fn missing_applicable(&self) -> Vec<FieldColumn> {
        self.entries
            .iter()
            .filter(|e| e.applicable && !e.present)
            .map(|e| e.column)
            .collect()
    }

    pub fn fully_annotated(&self) -> bool {
        self.missing_applicable().is_empty()
    }

    pub fn entry(&self, column: FieldColumn) -> &CompletenessEntry {
        self.entries.iter().find(|e| e.column == column).expect("all columns reported")
    }
}

/// For each of the ten field columns: is it applicable for this diagram
/// kind, and does at least one annotation of it exist anywhere in the model.
pub fn completeness(model: &BpmnModel) -> CompletenessReport {
    let entries = FieldColumn::ALL
        .into_iter()
        .map(|column| {
            let applicable = column
                .field_kinds()
                .iter()
                .any(|kind| !legal_placements(*kind, model.diagram_kind).is_empty());
            let present = model
                .elements
                .iter()
                .flat_map(|e| &e.annotations)
                .chain(model.flows.iter().flat_map(|f| &f.annotations))
                .any(|a| a.field().column() == column);
            CompletenessEntry { column, applicable, present }
        })
        .collect();
    CompletenessReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bpmn::{BpmnElement, BpmnModel, ElementClass, ProcessScope};
    use crate::tilt::{attach, Representative, TiltAnnotation};

    fn meta_annotation() -> TiltAnnotation {
        TiltAnnotation::manual(TiltPayload::Meta(Meta {
            name: "checkout".into(),
            created: "2024-01-01T00:00:00".into(),
            modified: "2024-01-01T00:00:00".into(),
            version: 1,
        }))
    }

    fn process_model() -> BpmnModel {
        let mut model = BpmnModel::default();
        model.processes.push(ProcessScope::new("P1"));
        for (id, class, tag) in [
            ("start", ElementClass::StartEvent, "startEvent"),
            ("a1", ElementClass::Activity, "task"),
            ("a2", ElementClass::Activity, "task"),
            ("end", ElementClass::EndEvent, "endEvent"),
        ] {
            let mut element = BpmnElement::new(id, class, tag, id);
            element.process_id = Some("P1".into());
            model.elements.push(element);
        }
        model
    }

    fn disclosed(category: &str) -> DataDisclosed {
        DataDisclosed {
            id: "d1".into(),
            category: category.into(),
            purposes: vec!["rightToAccess".into()],
            legal_bases: vec!["GDPR-15-1".into()],
            recipients: vec![],
            storage: vec![],
        }
    }

    #[test]
    fn collects_controller_values() {
        let mut model = process_model();
        attach(&mut model, "start", meta_annotation()).unwrap();
        attach(
            &mut model,
            "start",
            TiltAnnotation::manual(TiltPayload::Controller(Controller {
                name: "Chocolate Factory".into(),
                division: Some("Compliance".into()),
                country: Some("DE".into()),
                representative: Some(Representative { name: "Charlie".into(), email: None }),
            })),
        )
        .unwrap();

        let document = export_tilt(&model).unwrap();
        assert_eq!(document.controller.len(), 1);
        assert_eq!(document.controller[0].name, "Chocolate Factory");
        assert_eq!(document.controller[0].representative.as_ref().unwrap().name, "Charlie");
    }

    #[test]
    fn duplicate_disclosed_merges_provenance() {
        let mut model = process_model();
        attach(&mut model, "start", meta_annotation()).unwrap();
        let payload = TiltPayload::DataDisclosed(disclosed("postcode"));
        attach(&mut model, "a1", TiltAnnotation::manual(payload.clone())).unwrap();
        attach(&mut model, "a2", TiltAnnotation::manual(payload)).unwrap();

        let document = export_tilt(&model).unwrap();
        assert_eq!(document.data_disclosed.len(), 1);
        assert_eq!(document.data_disclosed[0].provenance, vec!["a1", "a2"]);
    }

    #[test]
    fn meta_only_document_has_empty_sections() {
        let mut model = process_model();
        attach(&mut model, "start", meta_annotation()).unwrap();
        let document = export_tilt(&model).unwrap();
        assert!(document.controller.is_empty());
        assert!(document.data_disclosed.is_empty());
        assert!(document.rights.all().next().is_none());
        assert_eq!(document.meta.name, "checkout");
    }

    #[test]
    fn missing_meta_is_an_error() {
        let model = process_model();
        assert_eq!(export_tilt(&model), Err(ExportError::MissingMeta));
    }

    #[test]
    fn export_is_byte_stable() {
        let mut model = process_model();
        attach(&mut model, "start", meta_annotation()).unwrap();
        attach(
            &mut model,
            "a1",
            TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("postcode"))),
        )
        .unwrap();
        let first = document_to_json(&export_tilt(&model).unwrap());
        let second = document_to_json(&export_tilt(&model).unwrap());
        assert_eq!(first, second);
        assert!(first.ends_with('\n'));
    }

    #[test]
    fn no_annotation_is_dropped() {
        let mut model = process_model();
        attach(&mut model, "start", meta_annotation()).unwrap();
        attach(
            &mut model,
            "a1",
            TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("postcode"))),
        )
        .unwrap();
        attach(
            &mut model,
            "a2",
            TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("street"))),
        )
        .unwrap();
        attach(
            &mut model,
            "end",
            TiltAnnotation::manual(TiltPayload::Right {
                kind: RightKind::Complain,
                entry: RightEntry { description: "complain".into(), contact: None },
            }),
        )
        .unwrap();

        let document = export_tilt(&model).unwrap();
        // Every annotation appears exactly once: no duplicates were attached.
        let entries = document.controller.len()
            + document.data_protection_officer.len()
            + document.data_disclosed.len()
            + document.third_country_transfers.len()
            + document.access_and_data_portability.len()
            + document.sources.len()
            + document.rights.all().count()
            + document.automated_decision_making.len()
            + document.changes_of_purpose.len()
            + 1; // meta
        assert_eq!(entries, model.annotation_count());
    }

    #[test]
    fn completeness_on_empty_model() {
        let model = process_model();
        let report = completeness(&model);
        assert_eq!(report.entries.len(), 10);
        assert!(report.entries.iter().all(|e| !e.present));
        // Every column has at least one legal placement in both diagram kinds.
        assert!(report.entries.iter().all(|e| e.applicable));
    }
}
