use super::*;
use crate::bpmn::{serialize_bpmn, BpmnElement, CollaborationScope, DiagramKind, ElementClass, Flow, FlowKind, ProcessScope};
use crate::tilt::{attach, DataDisclosed, Origin, ThirdCountryTransfer, TiltPayload};

/// Collaboration with one task per participant and a message flow between
/// them. The payment side sits in `target_country`.
fn cross_border_model(target_country: &str) -> BpmnModel {
    let mut model = BpmnModel {
        diagram_kind: DiagramKind::Collaboration,
        collaboration: Some(CollaborationScope { id: "Collab".into(), ..Default::default() }),
        ..Default::default()
    };
    model.processes.push(ProcessScope::new("Proc_shop"));

    let mut shop = BpmnElement::new("P_shop", ElementClass::Participant, "participant", "Shop");
    shop.attributes.insert("processRef".into(), "Proc_shop".into());
    shop.country = Some("DE".into());
    model.elements.push(shop);

    let mut pay = BpmnElement::new("P_pay", ElementClass::Participant, "participant", "Payments");
    pay.country = Some(target_country.into());
    model.elements.push(pay);

    let mut task = BpmnElement::new("T_charge", ElementClass::Activity, "task", "Charge");
    task.process_id = Some("Proc_shop".into());
    task.container = Some("P_shop".into());
    model.elements.push(task);

    model.flows.push(Flow::new("MF_charge", FlowKind::MessageFlow, "T_charge", "P_pay"));
    model
}

fn fixable_errors(findings: &[Finding]) -> Vec<&Finding> {
    findings.iter().filter(|f| f.fixable && f.severity == Severity::Error).collect()
}

#[test]
fn cross_border_flow_without_annotation_is_one_fixable_error() {
    let model = cross_border_model("US");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);

    let fixable = fixable_errors(&findings);
    assert_eq!(fixable.len(), 1);
    assert_eq!(fixable[0].rule_id, RULE_THIRD_COUNTRY_MISSING);
    assert_eq!(fixable[0].element_id, "MF_charge");
}

#[test]
fn autofix_adds_auto_filled_transfer_annotation() {
    let model = cross_border_model("US");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    let fixed = autofix(&model, &findings, &registry, &config).unwrap();

    let flow = fixed.flow("MF_charge").unwrap();
    assert_eq!(flow.annotations.len(), 1);
    let annotation = &flow.annotations[0];
    assert_eq!(annotation.origin, Origin::AutoFilled);
    match &annotation.payload {
        TiltPayload::ThirdCountryTransfers(t) => assert_eq!(t.country, "US"),
        other => panic!("wrong payload: {other:?}"),
    }

    // Fixpoint: a second lint run has nothing fixable left.
    let again = lint(&fixed, &registry, &config);
    assert!(again.iter().all(|f| !f.fixable), "still fixable: {again:?}");
}

#[test]
fn stale_auto_filled_annotation_is_regenerated() {
    // A participant country edit from US to GB leaves a stale auto-filled
    // annotation carrying "US" behind.
    let mut model = cross_border_model("GB");
    model.flow_mut("MF_charge").unwrap().annotations.push(TiltAnnotation::auto_filled(
        TiltPayload::ThirdCountryTransfers(ThirdCountryTransfer {
            country: "US".into(),
            adequacy_decision: None,
            safeguards: None,
        }),
    ));

    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    assert_eq!(fixable_errors(&findings).len(), 1);

    let fixed = autofix(&model, &findings, &registry, &config).unwrap();
    let annotations = &fixed.flow("MF_charge").unwrap().annotations;
    assert_eq!(annotations.len(), 1);
    match &annotations[0].payload {
        TiltPayload::ThirdCountryTransfers(t) => assert_eq!(t.country, "GB"),
        other => panic!("wrong payload: {other:?}"),
    }
}

#[test]
fn manual_transfer_annotation_is_never_modified() {
    let mut model = cross_border_model("US");
    let manual = TiltAnnotation::manual(TiltPayload::ThirdCountryTransfers(
        ThirdCountryTransfer {
            country: "CA".into(),
            adequacy_decision: Some(true),
            safeguards: None,
        },
    ));
    model.flow_mut("MF_charge").unwrap().annotations.push(manual.clone());

    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    assert!(findings.iter().all(|f| f.rule_id != RULE_THIRD_COUNTRY_MISSING));

    let fixed = autofix(&model, &findings, &registry, &config).unwrap();
    assert_eq!(fixed.flow("MF_charge").unwrap().annotations, vec![manual]);
}

#[test]
fn home_to_home_flow_is_clean() {
    let model = cross_border_model("FR");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    assert!(findings.iter().all(|f| f.rule_id != RULE_THIRD_COUNTRY_MISSING));
    assert!(findings.iter().all(|f| f.rule_id != RULE_SANCTIONED_COUNTRY));
}

#[test]
fn sanctioned_country_is_flagged_and_not_fixable() {
    let model = cross_border_model("KP");
    let registry = RuleRegistry::builtin();
    let mut config = LintConfig::default();
    config.sanctioned_countries.insert("KP".into());
    let findings = lint(&model, &registry, &config);

    let sanctioned: Vec<_> =
        findings.iter().filter(|f| f.rule_id == RULE_SANCTIONED_COUNTRY).collect();
    assert_eq!(sanctioned.len(), 1);
    assert!(!sanctioned[0].fixable);
    assert_eq!(sanctioned[0].severity, Severity::Error);
}

#[test]
fn no_findings_means_no_changes() {
    let model = cross_border_model("FR");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings: Vec<Finding> = lint(&model, &registry, &config)
        .into_iter()
        .filter(|f| f.fixable)
        .collect();
    let fixed = autofix(&model, &findings, &registry, &config).unwrap();
    assert_eq!(serialize_bpmn(&model), serialize_bpmn(&fixed));
}

#[test]
fn autofix_touches_only_finding_targets() {
    let model = cross_border_model("US");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    let fixed = autofix(&model, &findings, &registry, &config).unwrap();

    let changed: Vec<&str> = findings.iter().map(|f| f.element_id.as_str()).collect();
    for (before, after) in model.elements.iter().zip(&fixed.elements) {
        if !changed.contains(&before.id.as_str()) {
            assert_eq!(before, after);
        }
    }
    for (before, after) in model.flows.iter().zip(&fixed.flows) {
        if !changed.contains(&before.id.as_str()) {
            assert_eq!(before, after);
        }
    }
}

#[test]
fn placement_findings_match_attach_violations() {
    // Construct a misplaced annotation directly, bypassing attach's guard.
    let mut model = cross_border_model("FR");
    let misplaced = TiltAnnotation::manual(TiltPayload::ThirdCountryTransfers(
        ThirdCountryTransfer { country: "US".into(), adequacy_decision: None, safeguards: None },
    ));
    model.element_mut("T_charge").unwrap().annotations.push(misplaced.clone());

    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    let placement: Vec<_> =
        findings.iter().filter(|f| f.rule_id == RULE_PLACEMENT).collect();
    assert_eq!(placement.len(), 1);
    assert_eq!(placement[0].element_id, "T_charge");

    // attach rejects the same (element, field) pair.
    let mut fresh = cross_border_model("FR");
    assert!(attach(&mut fresh, "T_charge", misplaced).is_err());
}

#[test]
fn registering_custom_rule_extends_linting() {
    struct ForbiddenCategory;
    impl LintRule for ForbiddenCategory {
        fn id(&self) -> &str {
            "org/no-health-data"
        }
        fn default_severity(&self) -> Severity {
            Severity::Error
        }
        fn scope(&self) -> Vec<PlacementClass> {
            vec![PlacementClass::Activity]
        }
        fn check(&self, model: &BpmnModel, _config: &LintConfig) -> Vec<Finding> {
            let mut findings = Vec::new();
            for element in model.activities() {
                for annotation in &element.annotations {
                    if let TiltPayload::DataDisclosed(d) = &annotation.payload {
                        if d.category == "health" {
                            findings.push(Finding {
                                rule_id: self.id().to_string(),
                                element_id: element.id.clone(),
                                severity: self.default_severity(),
                                message: "health data must not be disclosed here".into(),
                                fixable: false,
                            });
                        }
                    }
                }
            }
            findings
        }
    }

    let mut model = cross_border_model("FR");
    attach(
        &mut model,
        "T_charge",
        TiltAnnotation::manual(TiltPayload::DataDisclosed(DataDisclosed {
            id: String::new(),
            category: "health".into(),
            purposes: vec![],
            legal_bases: vec![],
            recipients: vec![],
            storage: vec![],
        })),
    )
    .unwrap();

    let mut registry = RuleRegistry::builtin();
    registry.register(Box::new(ForbiddenCategory)).unwrap();
    assert!(registry.len() >= 5);

    let findings = lint(&model, &registry, &LintConfig::default());
    assert!(findings.iter().any(|f| f.rule_id == "org/no-health-data"));
}

#[test]
fn builtin_registry_has_at_least_four_rules() {
    let registry = RuleRegistry::builtin();
    assert!(registry.len() >= 4);
    for id in [
        RULE_PLACEMENT,
        RULE_COMPLETENESS,
        RULE_THIRD_COUNTRY_MISSING,
        RULE_SANCTIONED_COUNTRY,
    ] {
        assert!(registry.rule(id).is_some(), "missing builtin {id}");
    }
}

#[test]
fn duplicate_rule_id_is_rejected() {
    let mut registry = RuleRegistry::builtin();
    let err = registry.register(Box::new(PlacementRule)).unwrap_err();
    assert_eq!(err, LintError::DuplicateRuleId(RULE_PLACEMENT.into()));
}

#[test]
fn disabled_rules_and_severity_overrides_apply() {
    let model = cross_border_model("US");
    let registry = RuleRegistry::builtin();

    let mut config = LintConfig::default();
    config.disabled_rules.insert(RULE_THIRD_COUNTRY_MISSING.into());
    let findings = lint(&model, &registry, &config);
    assert!(findings.iter().all(|f| f.rule_id != RULE_THIRD_COUNTRY_MISSING));

    let mut config = LintConfig::default();
    config.severity_overrides.insert(RULE_THIRD_COUNTRY_MISSING.into(), Severity::Info);
    let findings = lint(&model, &registry, &config);
    let finding = findings.iter().find(|f| f.rule_id == RULE_THIRD_COUNTRY_MISSING).unwrap();
    assert_eq!(finding.severity, Severity::Info);
}

#[test]
fn lint_runs_are_deterministic() {
    let model = cross_border_model("US");
    let registry = RuleRegistry::builtin();
    let config = LintConfig::default();
    assert_eq!(lint(&model, &registry, &config), lint(&model, &registry, &config));
}

#[test]
fn findings_sort_errors_before_warnings() {
    // The cross-border model misses most field columns (warnings) and the
    // transfer annotation (error).
    let model = cross_border_model("US");
    let findings = lint(&model, &RuleRegistry::builtin(), &LintConfig::default());
    assert!(findings.len() > 1);
    let severities: Vec<Severity> = findings.iter().map(|f| f.severity).collect();
    let mut sorted = severities.clone();
    sorted.sort();
    assert_eq!(severities, sorted);
    assert_eq!(findings[0].severity, Severity::Error);
}

#[test]
fn conflicting_fixes_for_one_slot_are_rejected() {
    // Two rules planning different payloads for the same annotation slot.
    struct FixedCountry(&'static str, &'static str);
    impl LintRule for FixedCountry {
        fn id(&self) -> &str {
            self.0
        }
        fn default_severity(&self) -> Severity {
            Severity::Error
        }
        fn scope(&self) -> Vec<PlacementClass> {
            vec![PlacementClass::MessageFlow]
        }
        fn check(&self, model: &BpmnModel, _config: &LintConfig) -> Vec<Finding> {
            model
                .flows_of_kind(crate::bpmn::FlowKind::MessageFlow)
                .map(|flow| Finding {
                    rule_id: self.id().to_string(),
                    element_id: flow.id.clone(),
                    severity: Severity::Error,
                    message: "needs a transfer annotation".into(),
                    fixable: true,
                })
                .collect()
        }
        fn plan_fix(
            &self,
            _model: &BpmnModel,
            finding: &Finding,
            _config: &LintConfig,
        ) -> Option<PlannedFix> {
            Some(PlannedFix {
                target_id: finding.element_id.clone(),
                field: TiltFieldKind::ThirdCountryTransfers,
                annotation: TiltAnnotation::auto_filled(TiltPayload::ThirdCountryTransfers(
                    ThirdCountryTransfer {
                        country: self.1.into(),
                        adequacy_decision: None,
                        safeguards: None,
                    },
                )),
            })
        }
    }

    let model = cross_border_model("US");
    let mut registry = RuleRegistry::empty();
    registry.register(Box::new(FixedCountry("org/fix-us", "US"))).unwrap();
    registry.register(Box::new(FixedCountry("org/fix-gb", "GB"))).unwrap();
    let config = LintConfig::default();
    let findings = lint(&model, &registry, &config);
    let err = autofix(&model, &findings, &registry, &config).unwrap_err();
    assert_eq!(
        err,
        LintError::ConflictingFix {
            target_id: "MF_charge".into(),
            field: TiltFieldKind::ThirdCountryTransfers,
        }
    );

    // Identical proposals do not conflict.
    let mut agreeing = RuleRegistry::empty();
    agreeing.register(Box::new(FixedCountry("org/fix-a", "US"))).unwrap();
    agreeing.register(Box::new(FixedCountry("org/fix-b", "US"))).unwrap();
    let findings = lint(&model, &agreeing, &config);
    let fixed = autofix(&model, &findings, &agreeing, &config).unwrap();
    assert_eq!(fixed.flow("MF_charge").unwrap().annotations.len(), 1);
}

#[test]
fn config_parses_from_json_and_toml() {
    let json = r#"{"homeCountries":["DE"],"sanctionedCountries":["KP"],"disabledRules":[],"severityOverrides":{"tilt/completeness":"info"}}"#;
    let config: LintConfig = serde_json::from_str(json).unwrap();
    assert!(config.is_home("DE"));
    assert!(!config.is_home("FR"));
    assert_eq!(config.severity_overrides["tilt/completeness"], Severity::Info);

    let toml_text = "homeCountries = [\"DE\"]\nsanctionedCountries = [\"KP\"]\n";
    let config: LintConfig = toml::from_str(toml_text).unwrap();
    assert!(config.sanctioned_countries.contains("KP"));
    assert!(config.disabled_rules.is_empty());
}
