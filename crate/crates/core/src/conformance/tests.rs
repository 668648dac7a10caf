use super::*;
use crate::bpmn::{serialize_bpmn, BpmnElement, Flow, ProcessScope};
use crate::discovery::{tree_to_bpmn, ProcessTree};
use crate::eventlog::ingest_str;
use crate::tilt::{attach, TiltAnnotation};

fn disclosed(category: &str, purposes: &[&str], bases: &[&str]) -> DataDisclosed {
    DataDisclosed {
        id: category.to_string(),
        category: category.to_string(),
        purposes: purposes.iter().map(|s| s.to_string()).collect(),
        legal_bases: bases.iter().map(|s| s.to_string()).collect(),
        recipients: vec![],
        storage: vec![],
    }
}

fn annotated_model() -> BpmnModel {
    let mut model = BpmnModel::default();
    model.processes.push(ProcessScope::new("P1"));
    for (id, name) in [("a_collect", "Collect user data"), ("a_bill", "Update billing address")] {
        let mut element = BpmnElement::new(id, ElementClass::Activity, "task", name);
        element.process_id = Some("P1".into());
        model.elements.push(element);
    }
    attach(
        &mut model,
        "a_collect",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed(
            "postcode",
            &["rightToAccess"],
            &["GDPR-15-1"],
        ))),
    )
    .unwrap();
    model
}

fn log_line(activity: &str, categories: &[&str]) -> String {
    format!(
        r#"{{"time:timestamp":"10:00:00", "case:concept:name":"c1", "concept:name":"{activity}", "tilt:categories":[{}], "tilt:purposes":["rightToAccess"], "tilt:legalBases":["GDPR-15-1"]}}"#,
        categories.iter().map(|c| format!("\"{c}\"")).collect::<Vec<_>>().join(",")
    )
}

#[test]
fn extract_collects_direct_activity_annotations() {
    let mut model = annotated_model();
    attach(
        &mut model,
        "a_collect",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed(
            "street",
            &["rightToAccess"],
            &["GDPR-15-1"],
        ))),
    )
    .unwrap();
    let map = extract_normative(&model);
    assert_eq!(map.disclosures["Collect user data"].len(), 2);
    assert!(map.model_activities.contains("Update billing address"));
}

#[test]
fn extract_of_unannotated_model_is_empty() {
    let mut model = annotated_model();
    for element in &mut model.elements {
        element.annotations.clear();
    }
    let map = extract_normative(&model);
    assert!(map.disclosures.is_empty());
    assert_eq!(map.model_activities.len(), 2);
}

#[test]
fn data_object_disclosures_attach_to_associated_activities() {
    let mut model = annotated_model();
    let mut data_object =
        BpmnElement::new("do_order", ElementClass::DataObjectReference, "dataObjectReference", "Order");
    data_object.process_id = Some("P1".into());
    model.elements.push(data_object);
    model.flows.push(Flow::new("da1", FlowKind::DataAssociation, "do_order", "a_collect"));
    model.flows.push(Flow::new("da2", FlowKind::DataAssociation, "a_bill", "do_order"));
    attach(
        &mut model,
        "do_order",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("order.items", &[], &["GDPR-6-1-b"]))),
    )
    .unwrap();

    let map = extract_normative(&model);
    assert!(map.disclosures["Collect user data"].iter().any(|d| d.category == "order.items"));
    assert!(map.disclosures["Update billing address"].iter().any(|d| d.category == "order.items"));
}

#[test]
fn undeclared_category_is_classified_orange() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let report = check(&normative, &log);

    assert_eq!(report.summary.conforming, 1);
    assert_eq!(report.summary.undeclared, 1);
    assert_eq!(report.summary.missing, 0);
    let undeclared = report.entries_of(Classification::Undeclared);
    assert_eq!(undeclared[0].category, "email");
    assert_eq!(undeclared[0].observations, 1);
}

#[test]
fn missing_category_is_classified_blue() {
    let mut model = annotated_model();
    attach(
        &mut model,
        "a_collect",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed(
            "street",
            &["rightToAccess"],
            &["GDPR-15-1"],
        ))),
    )
    .unwrap();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode"])).log;
    let report = check(&normative, &log);

    assert_eq!(report.summary.missing, 1);
    assert_eq!(report.entries_of(Classification::Missing)[0].category, "street");
}

#[test]
fn exact_match_yields_zero_deviations() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode"])).log;
    let report = check(&normative, &log);
    assert_eq!(report.summary.missing, 0);
    assert_eq!(report.summary.undeclared, 0);
    assert!(!report.has_deviations());
    assert!(report.entries_of(Classification::Conforming)[0].attribute_diffs.is_none());
}

#[test]
fn attribute_diffs_surface_on_conforming_categories() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let line = r#"{"time:timestamp":"10:00:00", "case:concept:name":"c1", "concept:name":"Collect user data", "tilt:categories":["postcode"], "tilt:purposes":["marketing"], "tilt:legalBases":["GDPR-15-1"]}"#;
    let log = ingest_str(line).log;
    let report = check(&normative, &log);

    let conforming = report.entries_of(Classification::Conforming);
    let diffs = conforming[0].attribute_diffs.as_ref().unwrap();
    assert_eq!(diffs.purposes_missing, vec!["rightToAccess"]);
    assert_eq!(diffs.purposes_undeclared, vec!["marketing"]);
    assert!(diffs.legal_bases_missing.is_empty());
}

#[test]
fn every_pair_gets_exactly_one_classification() {
    let mut model = annotated_model();
    attach(
        &mut model,
        "a_bill",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("iban", &[], &["GDPR-6-1-b"]))),
    )
    .unwrap();
    let normative = extract_normative(&model);
    let lines = [
        log_line("Collect user data", &["postcode", "email"]),
        log_line("Unknown activity", &["phone"]),
    ]
    .join("\n");
    let log = ingest_str(&lines).log;
    let report = check(&normative, &log);

    let mut seen = BTreeSet::new();
    for entry in &report.entries {
        assert!(seen.insert((entry.activity.clone(), entry.category.clone())));
    }
    assert_eq!(
        report.summary.conforming + report.summary.missing + report.summary.undeclared,
        report.entries.len()
    );
    assert_eq!(report.unmodeled_activities, vec!["Unknown activity"]);
    assert_eq!(report.unobserved_activities, vec!["Update billing address"]);
}

#[test]
fn checking_observations_against_themselves_conforms() {
    let lines = [
        log_line("Collect user data", &["postcode", "street"]),
        log_line("Update billing address", &["iban"]),
    ]
    .join("\n");
    let log = ingest_str(&lines).log;
    let normative = build_observed(&log).to_normative();
    let report = check(&normative, &log);
    assert_eq!(report.summary.missing, 0);
    assert_eq!(report.summary.undeclared, 0);
    assert_eq!(report.summary.conforming, 3);
    assert!(report.entries.iter().all(|e| e.attribute_diffs.is_none()));
}

#[test]
fn new_categories_never_remove_undeclared_entries() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let base_log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let base_undeclared: Vec<(String, String)> = check(&normative, &base_log)
        .entries_of(Classification::Undeclared)
        .iter()
        .map(|e| (e.activity.clone(), e.category.clone()))
        .collect();

    let grown = [
        log_line("Collect user data", &["postcode", "email"]),
        log_line("Collect user data", &["phone"]),
    ]
    .join("\n");
    let grown_report = check(&normative, &ingest_str(&grown).log);
    let grown_undeclared: Vec<(String, String)> = grown_report
        .entries_of(Classification::Undeclared)
        .iter()
        .map(|e| (e.activity.clone(), e.category.clone()))
        .collect();
    for pair in base_undeclared {
        assert!(grown_undeclared.contains(&pair));
    }
}

/// A discovered-style model (with layout) for annotation tests.
fn discovered_model() -> BpmnModel {
    tree_to_bpmn(&ProcessTree::Sequence(vec![
        ProcessTree::leaf("Collect user data"),
        ProcessTree::leaf("Update billing address"),
    ]))
}

#[test]
fn undeclared_activities_are_painted_orange() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let report = check(&normative, &log);

    let base = discovered_model();
    let annotated = annotate_diagram(&base, &report, AnnotateMode::AttachObserved).unwrap();
    let xml = serialize_bpmn(&annotated);

    let shape_id = format!("{}_di", base.activities().next().unwrap().id);
    let di = &annotated.diagram_interchange[0];
    assert!(di.contains(&format!("id=\"{shape_id}\"")));
    assert!(di.contains(ORANGE_FILL));
    assert!(!di.contains(BLUE_FILL));
    assert!(xml.contains("xmlns:bioc"));
    // Observed disclosures were attached to the discovered activity.
    let collect = annotated.activities().find(|a| a.name == "Collect user data").unwrap();
    assert_eq!(collect.annotations.len(), 2);
    assert!(collect.annotations.iter().all(|a| a.origin == Origin::AutoFilled));
}

#[test]
fn missing_activities_are_painted_blue() {
    let mut model = annotated_model();
    attach(
        &mut model,
        "a_bill",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed("iban", &[], &["GDPR-6-1-b"]))),
    )
    .unwrap();
    let normative = extract_normative(&model);
    // Billing runs but discloses nothing.
    let log = ingest_str(
        &[log_line("Collect user data", &["postcode"]), log_line("Update billing address", &[])]
            .join("\n"),
    )
    .log;
    let report = check(&normative, &log);
    assert_eq!(report.summary.missing, 1);

    let base = discovered_model();
    let annotated = annotate_diagram(&base, &report, AnnotateMode::AttachObserved).unwrap();
    let di = &annotated.diagram_interchange[0];
    assert!(di.contains(BLUE_FILL));
    assert!(!di.contains(ORANGE_FILL));
}

#[test]
fn mixed_classification_paints_orange() {
    let mut model = annotated_model();
    attach(
        &mut model,
        "a_collect",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed(
            "street",
            &["rightToAccess"],
            &["GDPR-15-1"],
        ))),
    )
    .unwrap();
    let normative = extract_normative(&model);
    // street missing, email undeclared, on the same activity.
    let log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let report = check(&normative, &log);

    let base = discovered_model();
    let annotated = annotate_diagram(&base, &report, AnnotateMode::AttachObserved).unwrap();
    let di = &annotated.diagram_interchange[0];
    let collect_shape = format!(
        "bpmnElement=\"{}\"",
        base.activities().find(|a| a.name == "Collect user data").unwrap().id
    );
    let shape_line = di.lines().find(|l| l.contains(&collect_shape)).unwrap();
    assert!(shape_line.contains(ORANGE_FILL));
}

#[test]
fn empty_report_is_a_no_op() {
    let base = discovered_model();
    let report = ConformanceReport::default();
    let annotated = annotate_diagram(&base, &report, AnnotateMode::ColorsOnly).unwrap();
    assert_eq!(serialize_bpmn(&base), serialize_bpmn(&annotated));
}

#[test]
fn colors_only_mode_preserves_model_content() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let report = check(&normative, &log);

    // Paint a parsed model that carries layout. Give the base the normative
    // annotations so content comparison is meaningful.
    let mut base = discovered_model();
    let first_activity = base.activities().next().unwrap().id.clone();
    attach(
        &mut base,
        &first_activity,
        TiltAnnotation::manual(TiltPayload::DataDisclosed(disclosed(
            "postcode",
            &["rightToAccess"],
            &["GDPR-15-1"],
        ))),
    )
    .unwrap();

    let annotated = annotate_diagram(&base, &report, AnnotateMode::ColorsOnly).unwrap();
    // Everything except the diagram section and the bioc binding is
    // byte-identical.
    let mut base_stripped = base.clone();
    let mut annotated_stripped = annotated.clone();
    base_stripped.diagram_interchange.clear();
    annotated_stripped.diagram_interchange.clear();
    annotated_stripped.source_namespaces.remove("bioc");
    assert_eq!(base_stripped, annotated_stripped);
    assert_eq!(serialize_bpmn(&base_stripped), serialize_bpmn(&annotated_stripped));
}

#[test]
fn unknown_activity_signals_label_drift() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode"])).log;
    let report = check(&normative, &log);

    // A base that shares no labels with the report.
    let base = tree_to_bpmn(&ProcessTree::leaf("Something else"));
    let err = annotate_diagram(&base, &report, AnnotateMode::ColorsOnly).unwrap_err();
    assert_eq!(err, AnnotateError::UnknownActivity("Collect user data".into()));
}

#[test]
fn report_json_round_trips() {
    let model = annotated_model();
    let normative = extract_normative(&model);
    let log = ingest_str(&log_line("Collect user data", &["postcode", "email"])).log;
    let report = check(&normative, &log);
    let json = report_to_json(&report);
    let parsed: ConformanceReport = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed, report);

    let text = report_to_text(&report);
    assert!(text.contains("undeclared (orange)"));
    assert!(text.contains("conforming: 1"));
}
