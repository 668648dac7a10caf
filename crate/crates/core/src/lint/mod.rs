//! Transparency lint engine: registered rules with alert levels, element-
//! specific findings, and deterministic auto-fixes.

mod builtin;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bpmn::BpmnModel;
use crate::country::EEA_COUNTRIES;
use crate::tilt::{PlacementClass, TiltAnnotation, TiltFieldKind};

pub use builtin::{
    CompletenessRule, PlacementRule, SanctionedCountryRule, ThirdCountryRule,
    RULE_COMPLETENESS, RULE_PLACEMENT, RULE_SANCTIONED_COUNTRY, RULE_THIRD_COUNTRY_MISSING,
};

/// Alert level. Ordering puts errors first when findings are sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
            Severity::Info => "info",
        };
        f.write_str(label)
    }
}

/// One rule match against a concrete element or flow.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    #[serde(rename = "ruleId")]
    pub rule_id: String,
    #[serde(rename = "elementId")]
    pub element_id: String,
    pub severity: Severity,
    pub message: String,
    pub fixable: bool,
}

/// A deterministic auto-fix: replace the auto-filled annotations of `field`
/// on `target_id` with `annotation`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannedFix {
    pub target_id: String,
    pub field: TiltFieldKind,
    pub annotation: TiltAnnotation,
}

/// A transparency lint rule. Checks are pure; fixes are planned against the
/// unmodified model and applied by the engine.
pub trait LintRule {
    fn id(&self) -> &str;
    fn default_severity(&self) -> Severity;
    /// Element classes this rule inspects (informational).
    fn scope(&self) -> Vec<PlacementClass>;
    fn check(&self, model: &BpmnModel, config: &LintConfig) -> Vec<Finding>;
    fn plan_fix(
        &self,
        _model: &BpmnModel,
        _finding: &Finding,
        _config: &LintConfig,
    ) -> Option<PlannedFix> {
        None
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LintError {
    #[error("rule id '{0}' is already registered")]
    DuplicateRuleId(String),
    #[error("finding references unregistered rule '{0}'")]
    UnknownRule(String),
    #[error("conflicting fixes for {field:?} on '{target_id}'")]
    ConflictingFix { target_id: String, field: TiltFieldKind },
    #[error("fix could not be applied: {0}")]
    FixFailed(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(String),
}

/// Engine configuration. The home-jurisdiction set defaults to the EEA; the
/// sanctioned list is empty unless an organization provides one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct LintConfig {
    pub home_countries: BTreeSet<String>,
    pub sanctioned_countries: BTreeSet<String>,
    pub disabled_rules: BTreeSet<String>,
    pub severity_overrides: BTreeMap<String, Severity>,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            home_countries: EEA_COUNTRIES.iter().map(|c| c.to_string()).collect(),
            sanctioned_countries: BTreeSet::new(),
            disabled_rules: BTreeSet::new(),
            severity_overrides: BTreeMap::new(),
        }
    }
}

impl LintConfig {
    /// Load from a JSON or TOML file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
        } else {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
        }
    }

    pub fn is_home(&self, country: &str) -> bool {
        self.home_countries.contains(country)
    }
}

/// An ordered collection of rules with unique ids.
pub struct RuleRegistry {
    rules: Vec<Box<dyn LintRule>>,
}

impl RuleRegistry {
    pub fn empty() -> Self {
        RuleRegistry { rules: Vec::new() }
    }

    /// The built-in rule set: placement, completeness, third-country
    /// auto-annotation, sanctioned-country.
    pub fn builtin() -> Self {
        let mut registry = RuleRegistry::empty();
        registry.register(Box::new(PlacementRule)).expect("fresh registry");
        registry.register(Box::new(CompletenessRule)).expect("fresh registry");
        registry.register(Box::new(ThirdCountryRule)).expect("fresh registry");
        registry.register(Box::new(SanctionedCountryRule)).expect("fresh registry");
        registry
    }

    pub fn register(&mut self, rule: Box<dyn LintRule>) -> Result<(), LintError> {
        if self.rules.iter().any(|r| r.id() == rule.id()) {
            return Err(LintError::DuplicateRuleId(rule.id().to_string()));
        }
        self.rules.push(rule);
        Ok(())
    }

    pub fn rule(&self, id: &str) -> Option<&dyn LintRule> {
        self.rules.iter().find(|r| r.id() == id).map(Box::as_ref)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.rules.iter().map(|r| r.id()).collect()
    }
}

/// Run every enabled rule. Findings are sorted by (severity, element
/// document order, rule id); two runs over the same model yield identical
/// output.
pub fn lint(model: &BpmnModel, registry: &RuleRegistry, config: &LintConfig) -> Vec<Finding> {
    let order: BTreeMap<&str, usize> = model
        .elements
        .iter()
        .map(|e| e.id.as_str())
        .chain(model.flows.iter().map(|f| f.id.as_str()))
        .enumerate()
        .map(|(index, id)| (id, index))
        .collect();

    let mut findings = Vec::new();
    for rule in &registry.rules {
        if config.disabled_rules.contains(rule.id()) {
            continue;
        }
        let severity = config
            .severity_overrides
            .get(rule.id())
            .copied()
            .unwrap_or_else(|| rule.default_severity());
        for mut finding in rule.check(model, config) {
            finding.severity = severity;
            findings.push(finding);
        }
    }

    findings.sort_by(|a, b| {
        let a_pos = order.get(a.element_id.as_str()).copied().unwrap_or(usize::MAX);
        let b_pos = order.get(b.element_id.as_str()).copied().unwrap_or(usize::MAX);
        (a.severity, a_pos, &a.rule_id, &a.element_id).cmp(&(
            b.severity,
            b_pos,
            &b.rule_id,
            &b.element_id,
        ))
    });
    findings
}

/// Apply every fixable finding's fix. Cross-country message flows gain an
/// auto-filled third-country annotation; stale auto-filled annotations are
/// regenerated. Manual annotations are never modified.
pub fn autofix(
    model: &BpmnModel,
    findings: &[Finding],
    registry: &RuleRegistry,
    config: &LintConfig,
) -> Result<BpmnModel, LintError> {
    // Plan all fixes against the unmodified model, then detect slot
    // conflicts before touching anything.
    let mut planned: Vec<PlannedFix> = Vec::new();
    for finding in findings.iter().filter(|f| f.fixable) {
        let rule = registry
            .rule(&finding.rule_id)
            .ok_or_else(|| LintError::UnknownRule(finding.rule_id.clone()))?;
        if let Some(fix) = rule.plan_fix(model, finding, config) {
            planned.push(fix);
        }
    }

    let mut slots: BTreeMap<(String, TiltFieldKind), &TiltAnnotation> = BTreeMap::new();
    for fix in &planned {
        let key = (fix.target_id.clone(), fix.field);
        match slots.get(&key) {
            Some(existing) if **existing != fix.annotation => {
                return Err(LintError::ConflictingFix {
                    target_id: fix.target_id.clone(),
                    field: fix.field,
                });
            }
            Some(_) => {}
            None => {
                slots.insert(key, &fix.annotation);
            }
        }
    }

    let mut fixed = model.clone();
    for ((target_id, field), annotation) in slots {
        let annotations = if let Some(element) = fixed.element_mut(&target_id) {
            &mut element.annotations
        } else if let Some(flow) = fixed.flow_mut(&target_id) {
            &mut flow.annotations
        } else {
            return Err(LintError::FixFailed(format!("no element or flow '{target_id}'")));
        };
        annotations.retain(|a| {
            !(a.field() == field && a.origin == crate::tilt::Origin::AutoFilled)
        });
        annotations.push(annotation.clone());
        fixed.ensure_tilt_namespace();
    }
    Ok(fixed)
}

#[cfg(test)]
mod tests;
