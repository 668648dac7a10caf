//! The shopping-checkout fixture: a two-participant collaboration with five
//! activities, eight sequence flows, two message flows, one exclusive
//! gateway, two lanes, a data store, and a data object, annotated with every
//! transparency field column. Ships together with simulated logs and an
//! expected conformance report.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bpmn::{
    generate_layout, BpmnElement, BpmnModel, CollaborationScope, DiagramKind, ElementClass, Flow,
    FlowKind, ProcessScope, BPMN_NS,
};
use crate::conformance::{check, extract_normative, report_to_json};
use crate::eventlog::ingest_str;
use crate::simulate::{simulate, DeviationKind, DeviationSpec, SimulationConfig};
use crate::tilt::{
    attach, AccessAndDataPortability, AutomatedDecisionMaking, ChangesOfPurpose, Controller,
    DataDisclosed, DataProtectionOfficer, Meta, Representative, RightEntry, RightKind,
    SourceInfo, ThirdCountryTransfer, TiltAnnotation, TiltPayload,
};

pub const FIXTURE_SEED: u64 = 42;
pub const FIXTURE_TRACES: u64 = 100;

fn manual(payload: TiltPayload) -> TiltAnnotation {
    TiltAnnotation::manual(payload)
}

fn disclosed(id: &str, category: &str, purposes: &[&str], bases: &[&str]) -> TiltPayload {
    TiltPayload::DataDisclosed(DataDisclosed {
        id: id.into(),
        category: category.into(),
        purposes: purposes.iter().map(|s| s.to_string()).collect(),
        legal_bases: bases.iter().map(|s| s.to_string()).collect(),
        recipients: vec![],
        storage: vec![],
    })
}

/// Build the annotated shopping-checkout collaboration in memory.
pub fn shopping_checkout_model() -> BpmnModel {
    let mut model = BpmnModel {
        diagram_kind: DiagramKind::Collaboration,
        collaboration: Some(CollaborationScope {
            id: "Collaboration_Checkout".into(),
            ..Default::default()
        }),
        ..Default::default()
    };
    model.source_namespaces.insert("bpmn".into(), BPMN_NS.into());

    let mut shop = BpmnElement::new(
        "Participant_Shop",
        ElementClass::Participant,
        "participant",
        "Chocolate Factory",
    );
    shop.attributes.insert("processRef".into(), "Process_Shop".into());
    shop.country = Some("DE".into());
    model.elements.push(shop);

    // The payment provider stays a black box: message flows target the pool.
    let mut pay = BpmnElement::new(
        "Participant_Pay",
        ElementClass::Participant,
        "participant",
        "Payment Provider",
    );
    pay.country = Some("US".into());
    model.elements.push(pay);

    let mut process = ProcessScope::new("Process_Shop");
    process.lane_set_id = Some("LaneSet_Shop".into());
    model.processes.push(process);

    for (id, name) in [
        ("Lane_Storefront", "Storefront"),
        ("Lane_Fulfillment", "Fulfillment"),
    ] {
        let mut lane = BpmnElement::new(id, ElementClass::Lane, "lane", name);
        lane.process_id = Some("Process_Shop".into());
        lane.container = Some("Participant_Shop".into());
        model.elements.push(lane);
    }

    let nodes: [(&str, ElementClass, &str, &str, &str); 8] = [
        ("StartEvent_Checkout", ElementClass::StartEvent, "startEvent", "Checkout started", "Lane_Storefront"),
        ("Activity_Collect", ElementClass::Activity, "task", "Collect user data", "Lane_Storefront"),
        ("Activity_Validate", ElementClass::Activity, "task", "Validate cart", "Lane_Storefront"),
        ("Gateway_CartValid", ElementClass::Gateway, "exclusiveGateway", "Cart valid?", "Lane_Storefront"),
        ("Activity_Payment", ElementClass::Activity, "task", "Process payment", "Lane_Fulfillment"),
        ("Activity_Billing", ElementClass::Activity, "task", "Update billing address", "Lane_Fulfillment"),
        ("Activity_Confirm", ElementClass::Activity, "task", "Send confirmation", "Lane_Fulfillment"),
        ("EndEvent_Done", ElementClass::EndEvent, "endEvent", "Checkout completed", "Lane_Fulfillment"),
    ];
    for (id, class, tag, name, lane) in nodes {
        let mut element = BpmnElement::new(id, class, tag, name);
        element.process_id = Some("Process_Shop".into());
        element.container = Some(lane.into());
        model.elements.push(element);
    }

    let mut store = BpmnElement::new(
        "DataStore_Customers",
        ElementClass::DataStoreReference,
        "dataStoreReference",
        "Customer database",
    );
    store.process_id = Some("Process_Shop".into());
    store.container = Some("Lane_Storefront".into());
    model.elements.push(store);

    let mut order = BpmnElement::new(
        "DataObject_Order",
        ElementClass::DataObjectReference,
        "dataObjectReference",
        "Order record",
    );
    order.process_id = Some("Process_Shop".into());
    order.container = Some("Lane_Storefront".into());
    model.elements.push(order);

    // Flows in document order: the collaboration's message flows come
    // first, data associations nest in their host activities, sequence
    // flows close the process section.
    for (id, source, target, name) in [
        ("MessageFlow_Charge", "Activity_Payment", "Participant_Pay", "Charge request"),
        ("MessageFlow_Result", "Participant_Pay", "Activity_Payment", "Charge result"),
    ] {
        let mut flow = Flow::new(id, FlowKind::MessageFlow, source, target);
        flow.name = name.into();
        model.flows.push(flow);
    }

    // Writing collected customer data into the store, reading the order
    // record during validation.
    let mut store_write =
        Flow::new("DataAssoc_Store", FlowKind::DataAssociation, "Activity_Collect", "DataStore_Customers");
    store_write.process_id = Some("Process_Shop".into());
    model.flows.push(store_write);
    let mut order_read =
        Flow::new("DataAssoc_Order", FlowKind::DataAssociation, "DataObject_Order", "Activity_Validate");
    order_read.process_id = Some("Process_Shop".into());
    model.flows.push(order_read);

    let sequence_flows = [
        ("Flow_Start", "StartEvent_Checkout", "Activity_Collect", ""),
        ("Flow_Collect", "Activity_Collect", "Activity_Validate", ""),
        ("Flow_Validate", "Activity_Validate", "Gateway_CartValid", ""),
        ("Flow_Valid", "Gateway_CartValid", "Activity_Payment", "valid"),
        ("Flow_Invalid", "Gateway_CartValid", "EndEvent_Done", "invalid"),
        ("Flow_Payment", "Activity_Payment", "Activity_Billing", ""),
        ("Flow_Billing", "Activity_Billing", "Activity_Confirm", ""),
        ("Flow_Confirm", "Activity_Confirm", "EndEvent_Done", ""),
    ];
    for (id, source, target, name) in sequence_flows {
        let mut flow = Flow::new(id, FlowKind::SequenceFlow, source, target);
        flow.name = name.into();
        flow.process_id = Some("Process_Shop".into());
        model.flows.push(flow);
    }

    annotate(&mut model);
    model.validate().expect("fixture invariants hold");
    generate_layout(&mut model);
    model
}

fn annotate(model: &mut BpmnModel) {
    let mut place = |element_id: &str, payload: TiltPayload| {
        attach(model, element_id, manual(payload)).expect("fixture placement is legal");
    };

    place(
        "StartEvent_Checkout",
        TiltPayload::Meta(Meta {
            name: "shopping checkout".into(),
            created: "2024-01-01T00:00:00".into(),
            modified: "2024-01-01T00:00:00".into(),
            version: 1,
        }),
    );
    place(
        "Participant_Shop",
        TiltPayload::Controller(Controller {
            name: "Chocolate Factory".into(),
            division: Some("Compliance".into()),
            country: Some("DE".into()),
            representative: Some(Representative { name: "Charlie".into(), email: None }),
        }),
    );
    place(
        "Participant_Shop",
        TiltPayload::DataProtectionOfficer(DataProtectionOfficer {
            name: "Willy Wonka".into(),
            email: None,
            country: None,
        }),
    );

    place(
        "Activity_Collect",
        disclosed("dd-postcode", "postcode", &["rightToAccess"], &["GDPR-15-1"]),
    );
    place(
        "Activity_Collect",
        disclosed("dd-street-no", "street.no", &["rightToAccess"], &["GDPR-15-1"]),
    );
    place(
        "Activity_Collect",
        disclosed("dd-street", "street", &["rightToAccess"], &["GDPR-15-1"]),
    );
    place(
        "Activity_Payment",
        TiltPayload::DataDisclosed(DataDisclosed {
            id: "dd-card".into(),
            category: "card.number".into(),
            purposes: vec!["payment".into()],
            legal_bases: vec!["GDPR-6-1-b".into()],
            recipients: vec!["Payment Provider".into()],
            storage: vec!["90 days".into()],
        }),
    );
    place(
        "Activity_Billing",
        TiltPayload::DataDisclosed(DataDisclosed {
            id: "dd-billing".into(),
            category: "billing.address".into(),
            purposes: vec!["invoicing".into()],
            legal_bases: vec!["GDPR-6-1-b".into()],
            recipients: vec![],
            storage: vec!["10 years".into()],
        }),
    );
    place(
        "Activity_Confirm",
        disclosed("dd-email", "email", &["notification"], &["GDPR-6-1-b"]),
    );
    place(
        "DataObject_Order",
        disclosed("dd-order", "order.items", &["orderProcessing"], &["GDPR-6-1-b"]),
    );

    place(
        "MessageFlow_Charge",
        TiltPayload::ThirdCountryTransfers(ThirdCountryTransfer {
            country: "US".into(),
            adequacy_decision: Some(false),
            safeguards: Some("Standard contractual clauses (EU 2021/914)".into()),
        }),
    );

    place(
        "DataStore_Customers",
        TiltPayload::Sources(SourceInfo {
            description: "Customer master data collected at checkout".into(),
            url: None,
        }),
    );
    place(
        "Gateway_CartValid",
        TiltPayload::AutomatedDecisionMaking(AutomatedDecisionMaking {
            in_use: true,
            logic_involved: Some("Rule-based cart validation".into()),
        }),
    );
    place(
        "EndEvent_Done",
        TiltPayload::AccessAndDataPortability(AccessAndDataPortability {
            available: true,
            description: Some("Account data export in the customer portal".into()),
        }),
    );
    place(
        "EndEvent_Done",
        TiltPayload::Right {
            kind: RightKind::Complain,
            entry: RightEntry {
                description: "Lodge a complaint with the Berlin supervisory authority".into(),
                contact: Some("complaints@chocolate-factory.example".into()),
            },
        },
    );
    place(
        "EndEvent_Done",
        TiltPayload::Right {
            kind: RightKind::WithdrawConsent,
            entry: RightEntry {
                description: "Withdraw consent at any time in the customer portal".into(),
                contact: None,
            },
        },
    );
    place(
        "EndEvent_Done",
        TiltPayload::ChangesOfPurpose(ChangesOfPurpose {
            description: "Purpose changes are announced 30 days in advance".into(),
            affected_data_categories: vec!["email".into()],
        }),
    );
}

/// Simulation config for the shipped clean log.
pub fn clean_log_config() -> SimulationConfig {
    SimulationConfig {
        trace_count: FIXTURE_TRACES,
        seed: FIXTURE_SEED,
        ..Default::default()
    }
}

/// Simulation config for the shipped deviation log: every execution of
/// "Collect user data" additionally discloses "email".
pub fn deviation_log_config() -> SimulationConfig {
    SimulationConfig {
        trace_count: FIXTURE_TRACES,
        seed: FIXTURE_SEED,
        deviations: vec![DeviationSpec {
            kind: DeviationKind::AddCategory,
            activity: "Collect user data".into(),
            category: "email".into(),
            rate: 1.0,
            replacement: None,
        }],
        ..Default::default()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct PlacementNote {
    element: &'static str,
    field: &'static str,
    note: &'static str,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
struct Manifest {
    name: &'static str,
    description: &'static str,
    model: &'static str,
    clean_log: &'static str,
    deviation_log: &'static str,
    expected_report: &'static str,
    seed: u64,
    traces: u64,
    placements: Vec<PlacementNote>,
}

/// Files produced by [`build_fixtures`], relative to its directory.
pub const FIXTURE_FILES: [&str; 5] = [
    "shopping-checkout.bpmn",
    "logs/clean.jsonl",
    "logs/deviation-add-email.jsonl",
    "reports/deviation-add-email.report.json",
    "manifest.json",
];

/// Generate the fixture set on disk. Output is deterministic: regenerating
/// into a fresh directory yields byte-identical files.
pub fn build_fixtures(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let model = shopping_checkout_model();
    let model_xml = crate::bpmn::serialize_bpmn(&model);

    let clean_log = simulate(&model, &clean_log_config())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
    let deviation_log = simulate(&model, &deviation_log_config())
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;

    let normative = extract_normative(&model);
    let report = check(&normative, &ingest_str(&deviation_log).log);
    let report_json = report_to_json(&report);

    let manifest = Manifest {
        name: "shopping-checkout",
        description: "Annotated shopping checkout collaboration with simulated \
                      transparency event logs and the expected conformance report \
                      for the deviation log.",
        model: FIXTURE_FILES[0],
        clean_log: FIXTURE_FILES[1],
        deviation_log: FIXTURE_FILES[2],
        expected_report: FIXTURE_FILES[3],
        seed: FIXTURE_SEED,
        traces: FIXTURE_TRACES,
        placements: placement_notes(),
    };
    let mut manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_json.push('\n');

    fs::create_dir_all(dir.join("logs"))?;
    fs::create_dir_all(dir.join("reports"))?;
    let outputs = [
        (FIXTURE_FILES[0], model_xml),
        (FIXTURE_FILES[1], clean_log),
        (FIXTURE_FILES[2], deviation_log),
        (FIXTURE_FILES[3], report_json),
        (FIXTURE_FILES[4], manifest_json),
    ];
    let mut written = Vec::new();
    for (name, content) in outputs {
        let path = dir.join(name);
        fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

fn placement_notes() -> Vec<PlacementNote> {
    vec![
        PlacementNote {
            element: "StartEvent_Checkout",
            field: "meta",
            note: "document identity on the start event (legal in both diagram kinds)",
        },
        PlacementNote {
            element: "Participant_Shop",
            field: "controller",
            note: "collaboration diagrams carry the controller on the participant",
        },
        PlacementNote {
            element: "Participant_Shop",
            field: "dataProtectionOfficer",
            note: "DPO follows the controller onto the participant",
        },
        PlacementNote {
            element: "Activity_Collect",
            field: "dataDisclosed",
            note: "postcode, street.no, and street as three distinct disclosures",
        },
        PlacementNote {
            element: "DataObject_Order",
            field: "dataDisclosed",
            note: "order items disclosed via the data object, inherited by Validate cart",
        },
        PlacementNote {
            element: "MessageFlow_Charge",
            field: "thirdCountryTransfers",
            note: "outbound charge request crosses from DE into US",
        },
        PlacementNote {
            element: "DataStore_Customers",
            field: "sources",
            note: "the customer database is the source of collected data",
        },
        PlacementNote {
            element: "Gateway_CartValid",
            field: "automatedDecisionMaking",
            note: "the cart validation branch decides automatically",
        },
        PlacementNote {
            element: "EndEvent_Done",
            field: "accessAndDataPortability / rightTo* / changesOfPurpose",
            note: "ex-post transparency sits on the end event",
        },
    ]
}
