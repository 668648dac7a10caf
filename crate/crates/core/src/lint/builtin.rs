//! The built-in transparency rules.

use crate::bpmn::{BpmnModel, FlowKind};
use crate::export::completeness;
use crate::lint::{Finding, LintConfig, LintRule, PlannedFix, Severity};
use crate::tilt::{
    allowed_fields, legal_placements, Origin, PlacementClass, ThirdCountryTransfer,
    TiltAnnotation, TiltFieldKind, TiltPayload,
};

pub const RULE_PLACEMENT: &str = "tilt/placement";
pub const RULE_COMPLETENESS: &str = "tilt/completeness";
pub const RULE_THIRD_COUNTRY_MISSING: &str = "tilt/third-country-missing";
pub const RULE_SANCTIONED_COUNTRY: &str = "tilt/sanctioned-country";

/// Annotations must sit on element classes their field maps to.
pub struct PlacementRule;

impl LintRule for PlacementRule {
    fn id(&self) -> &str {
        RULE_PLACEMENT
    }

    fn default_severity(&self) -> Severity {
        Severity::Error
    }

    fn scope(&self) -> Vec<PlacementClass> {
        PlacementClass::ALL.to_vec()
    }

    fn check(&self, model: &BpmnModel, _config: &LintConfig) -> Vec<Finding> {
        let kind = model.diagram_kind;
        let mut findings = Vec::new();
        for element in &model.elements {
            let allowed = allowed_fields(element.class.placement(), kind);
            for annotation in &element.annotations {
                if !allowed.contains(&annotation.field()) {
                    findings.push(Finding {
                        rule_id: self.id().to_string(),
                        element_id: element.id.clone(),
                        severity: self.default_severity(),
                        message: format!(
                            "'{}' is not allowed on a {:?} in a {kind:?} diagram",
                            annotation.field().name(),
                            element.class,
                        ),
                        fixable: false,
                    });
                }
            }
        }
        for flow in &model.flows {
            let allowed = match flow.kind {
                FlowKind::MessageFlow => allowed_fields(PlacementClass::MessageFlow, kind),
                _ => Default::default(),
            };
            for annotation in &flow.annotations {
                if !allowed.contains(&annotation.field()) {
                    findings.push(Finding {
                        rule_id: self.id().to_string(),
                        element_id: flow.id.clone(),
                        severity: self.default_severity(),
                        message: format!(
                            "'{}' is not allowed on a {:?}",
                            annotation.field().name(),
                            flow.kind,
                        ),
                        fixable: false,
                    });
                }
            }
        }
        findings
    }
}

/// Every applicable field column should appear somewhere in the model.
pub struct CompletenessRule;

impl CompletenessRule {
    /// Anchor a missing-column finding to the first element that could
    /// legally host one of its fields.
    fn anchor(
        model: &BpmnModel,
        column: crate::tilt::FieldColumn,
    ) -> Option<&crate::bpmn::BpmnElement> {
        let hosts: Vec<PlacementClass> = column
            .field_kinds()
            .iter()
            .flat_map(|kind| legal_placements(*kind, model.diagram_kind))
            .collect();
        model
            .elements
            .iter()
            .find(|e| hosts.contains(&e.class.placement()))
            .or_else(|| model.elements.first())
    }
}

impl LintRule for CompletenessRule {
    fn id(&self) -> &str {
        RULE_COMPLETENESS
    }

    fn default_severity(&self) -> Severity {
        Severity::Warning
    }

    fn scope(&self) -> Vec<PlacementClass> {
        PlacementClass::ALL.to_vec()
    }

    fn check(&self, model: &BpmnModel, _config: &LintConfig) -> Vec<Finding> {
        if model.elements.is_empty() {
            return Vec::new();
        }
        completeness(model)
            .missing_applicable()
            .into_iter()
            .filter_map(|column| {
                Self::anchor(model, column).map(|anchor| Finding {
                    rule_id: self.id().to_string(),
                    element_id: anchor.id.clone(),
                    severity: self.default_severity(),
                    message: format!("no '{}' annotation anywhere in the model", column.name()),
                    fixable: false,
                })
            })
            .collect()
    }
}

/// State of a message flow with respect to third-country annotations.
fn cross_border_target(model: &BpmnModel, flow_id: &str, config: &LintConfig) -> Option<String> {
    let flow = model.flow(flow_id)?;
    if flow.kind != FlowKind::MessageFlow {
        return None;
    }
    let source = model.owning_participant(&flow.source_id)?.country.clone()?;
    let target = model.owning_participant(&flow.target_id)?.country.clone()?;
    (config.is_home(&source) && !config.is_home(&target)).then_some(target)
}

/// Message flows leaving the home jurisdiction must carry a third-country
/// transfer annotation naming the target participant's country. Fixable:
/// the annotation is added or regenerated automatically.
pub struct ThirdCountryRule;

impl LintRule for ThirdCountryRule {
    fn id(&self) -> &str {
        RULE_THIRD_COUNTRY_MISSING
    }

    fn default_severity(&self) -> Severity {
        Severity::Error
    }

    fn scope(&self) -> Vec<PlacementClass> {
        vec![PlacementClass::MessageFlow]
    }

    fn check(&self, model: &BpmnModel, config: &LintConfig) -> Vec<Finding> {
        let mut findings = Vec::new();
        for flow in model.flows_of_kind(FlowKind::MessageFlow) {
            let Some(target_country) = cross_border_target(model, &flow.id, config) else {
                continue;
            };
            let manual_present = flow.annotations.iter().any(|a| {
                a.origin == Origin::Manual && a.field() == TiltFieldKind::ThirdCountryTransfers
            });
            if manual_present {
                continue;
            }
            let current_ok = flow.annotations.iter().any(|a| match &a.payload {
                TiltPayload::ThirdCountryTransfers(t) => t.country == target_country,
                _ => false,
            });
            if current_ok {
                continue;
            }
            findings.push(Finding {
                rule_id: self.id().to_string(),
                element_id: flow.id.clone(),
                severity: self.default_severity(),
                message: format!(
                    "message flow crosses into {target_country} without a matching \
                     thirdCountryTransfers annotation"
                ),
                fixable: true,
            });
        }
        findings
    }

    fn plan_fix(
        &self,
        model: &BpmnModel,
        finding: &Finding,
        config: &LintConfig,
    ) -> Option<PlannedFix> {
        let target_country = cross_border_target(model, &finding.element_id, config)?;
        Some(PlannedFix {
            target_id: finding.element_id.clone(),
            field: TiltFieldKind::ThirdCountryTransfers,
            annotation: TiltAnnotation::auto_filled(TiltPayload::ThirdCountryTransfers(
                ThirdCountryTransfer {
                    country: target_country,
                    adequacy_decision: None,
                    safeguards: None,
                },
            )),
        })
    }
}

/// Message flows must not target participants in sanctioned countries.
pub struct SanctionedCountryRule;

impl LintRule for SanctionedCountryRule {
    fn id(&self) -> &str {
        RULE_SANCTIONED_COUNTRY
    }

    fn default_severity(&self) -> Severity {
        Severity::Error
    }

    fn scope(&self) -> Vec<PlacementClass> {
        vec![PlacementClass::MessageFlow, PlacementClass::Participant]
    }

    fn check(&self, model: &BpmnModel, config: &LintConfig) -> Vec<Finding> {
        let mut findings = Vec::new();
        for flow in model.flows_of_kind(FlowKind::MessageFlow) {
            let Some(target) = model.owning_participant(&flow.target_id) else {
                continue;
            };
            let Some(country) = &target.country else { continue };
            if config.sanctioned_countries.contains(country) {
                findings.push(Finding {
                    rule_id: self.id().to_string(),
                    element_id: flow.id.clone(),
                    severity: self.default_severity(),
                    message: format!(
                        "message flow targets participant '{}' in sanctioned country {country}",
                        target.id
                    ),
                    fixable: false,
                });
            }
        }
        findings
    }
}

