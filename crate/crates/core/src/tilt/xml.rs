//! XML encoding of TILT annotations: scalar fields as attributes, records
//! and lists as nested child elements.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::tilt::{
    AccessAndDataPortability, AutomatedDecisionMaking, ChangesOfPurpose, Controller,
    DataDisclosed, DataProtectionOfficer, Meta, Origin, Representative, RightEntry, RightKind,
    SourceInfo, ThirdCountryTransfer, TiltAnnotation, TiltFieldKind, TiltPayload,
};

/// Marker attribute for machine-generated annotations.
pub const AUTO_FILLED_ATTR: &str = "autoFilled";

/// A decoded TILT subtree, namespace-resolved by the BPMN parser.
#[derive(Debug, Clone, Default)]
pub struct TiltNode {
    pub local: String,
    pub attrs: BTreeMap<String, String>,
    pub text: String,
    pub children: Vec<TiltNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    UnknownField { tag: String },
    Invalid { field: String, reason: String },
}

impl TiltNode {
    fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    fn require_attr(&self, name: &str) -> Result<String, DecodeError> {
        self.attr(name).map(str::to_string).ok_or_else(|| DecodeError::Invalid {
            field: self.local.clone(),
            reason: format!("missing required attribute '{name}'"),
        })
    }

    fn opt_attr(&self, name: &str) -> Option<String> {
        self.attr(name).map(str::to_string)
    }

    fn bool_attr(&self, name: &str) -> Result<bool, DecodeError> {
        match self.require_attr(name)?.as_str() {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(DecodeError::Invalid {
                field: self.local.clone(),
                reason: format!("attribute '{name}' must be true or false, got '{other}'"),
            }),
        }
    }

    fn opt_bool_attr(&self, name: &str) -> Result<Option<bool>, DecodeError> {
        match self.attr(name) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(other) => Err(DecodeError::Invalid {
                field: self.local.clone(),
                reason: format!("attribute '{name}' must be true or false, got '{other}'"),
            }),
        }
    }

    /// Texts of all children with the given local name, trimmed.
    fn child_texts(&self, local: &str) -> Vec<String> {
        self.children
            .iter()
            .filter(|c| c.local == local)
            .map(|c| c.text.trim().to_string())
            .collect()
    }

    fn child(&self, local: &str) -> Option<&TiltNode> {
        self.children.iter().find(|c| c.local == local)
    }
}

fn non_empty_tokens(
    node: &TiltNode,
    child_local: &str,
    what: &str,
) -> Result<Vec<String>, DecodeError> {
    let tokens = node.child_texts(child_local);
    if tokens.iter().any(String::is_empty) {
        return Err(DecodeError::Invalid {
            field: node.local.clone(),
            reason: format!("empty {what} entry"),
        });
    }
    Ok(tokens)
}

/// Decode one TILT-namespaced `extensionElements` child.
pub fn decode_annotation(node: &TiltNode) -> Result<TiltAnnotation, DecodeError> {
    let kind = TiltFieldKind::from_name(&node.local)
        .ok_or_else(|| DecodeError::UnknownField { tag: node.local.clone() })?;

    let payload = match kind {
        TiltFieldKind::Meta => TiltPayload::Meta(Meta {
            name: node.require_attr("name")?,
            created: node.require_attr("created")?,
            modified: node.require_attr("modified")?,
            version: node.require_attr("version")?.parse().map_err(|_| DecodeError::Invalid {
                field: node.local.clone(),
                reason: "version must be a non-negative integer".into(),
            })?,
        }),
        TiltFieldKind::Controller => {
            let representative = match node.child("representative") {
                Some(rep) => Some(Representative {
                    name: rep.require_attr("name")?,
                    email: rep.opt_attr("email"),
                }),
                None => None,
            };
            TiltPayload::Controller(Controller {
                name: node.require_attr("name")?,
                division: node.opt_attr("division"),
                country: node.opt_attr("country"),
                representative,
            })
        }
        TiltFieldKind::DataProtectionOfficer => {
            TiltPayload::DataProtectionOfficer(DataProtectionOfficer {
                name: node.require_attr("name")?,
                email: node.opt_attr("email"),
                country: node.opt_attr("country"),
            })
        }
        TiltFieldKind::DataDisclosed => {
            let category = node.require_attr("category")?;
            if category.trim().is_empty() {
                return Err(DecodeError::Invalid {
                    field: node.local.clone(),
                    reason: "category must be non-empty".into(),
                });
            }
            TiltPayload::DataDisclosed(DataDisclosed {
                id: node.opt_attr("id").unwrap_or_default(),
                category,
                purposes: node.child_texts("purpose"),
                legal_bases: non_empty_tokens(node, "legalBasis", "legal basis")?,
                recipients: node.child_texts("recipient"),
                storage: node.child_texts("storage"),
            })
        }
        TiltFieldKind::ThirdCountryTransfers => {
            TiltPayload::ThirdCountryTransfers(ThirdCountryTransfer {
                country: node.require_attr("country")?,
                adequacy_decision: node.opt_bool_attr("adequacyDecision")?,
                safeguards: node.opt_attr("safeguards"),
            })
        }
        TiltFieldKind::AccessAndDataPortability => {
            TiltPayload::AccessAndDataPortability(AccessAndDataPortability {
                available: node.bool_attr("available")?,
                description: node.opt_attr("description"),
            })
        }
        TiltFieldKind::Sources => TiltPayload::Sources(SourceInfo {
            description: node.require_attr("description")?,
            url: node.opt_attr("url"),
        }),
        TiltFieldKind::AutomatedDecisionMaking => {
            TiltPayload::AutomatedDecisionMaking(AutomatedDecisionMaking {
                in_use: node.bool_attr("inUse")?,
                logic_involved: node.opt_attr("logicInvolved"),
            })
        }
        TiltFieldKind::ChangesOfPurpose => TiltPayload::ChangesOfPurpose(ChangesOfPurpose {
            description: node.require_attr("description")?,
            affected_data_categories: node.child_texts("affectedDataCategory"),
        }),
        right => {
            let kind = match right {
                TiltFieldKind::RightToInformation => RightKind::Information,
                TiltFieldKind::RightToRectificationOrDeletion => RightKind::RectificationOrDeletion,
                TiltFieldKind::RightToDataPortability => RightKind::DataPortability,
                TiltFieldKind::RightToWithdrawConsent => RightKind::WithdrawConsent,
                TiltFieldKind::RightToComplain => RightKind::Complain,
                _ => unreachable!(),
            };
            TiltPayload::Right {
                kind,
                entry: RightEntry {
                    description: node.require_attr("description")?,
                    contact: node.opt_attr("contact"),
                },
            }
        }
    };

    let origin = if node.attr(AUTO_FILLED_ATTR) == Some("true") {
        Origin::AutoFilled
    } else {
        Origin::Manual
    };

    Ok(TiltAnnotation { payload, origin })
}

fn push_attr(out: &mut String, name: &str, value: &str) {
    let _ = write!(out, " {name}=\"{}\"", escape(value));
}

fn push_opt_attr(out: &mut String, name: &str, value: &Option<String>) {
    if let Some(value) = value {
        push_attr(out, name, value);
    }
}

fn push_list(out: &mut String, indent: &str, child: &str, items: &[String]) {
    for item in items {
        let _ = writeln!(out, "{indent}<tilt:{child}>{}</tilt:{child}>", escape(item.as_str()));
    }
}

/// Encode one annotation as an indented XML fragment using the reserved
/// `tilt` prefix. `indent` is the indentation of the annotation element
/// itself; children go one level deeper.
pub fn encode_annotation(annotation: &TiltAnnotation, indent: &str) -> String {
    let tag = annotation.field().name();
    let inner_indent = format!("{indent}  ");
    let mut attrs = String::new();
    let mut children = String::new();

    match &annotation.payload {
        TiltPayload::Meta(m) => {
            push_attr(&mut attrs, "name", &m.name);
            push_attr(&mut attrs, "created", &m.created);
            push_attr(&mut attrs, "modified", &m.modified);
            push_attr(&mut attrs, "version", &m.version.to_string());
        }
        TiltPayload::Controller(c) => {
            push_attr(&mut attrs, "name", &c.name);
            push_opt_attr(&mut attrs, "division", &c.division);
            push_opt_attr(&mut attrs, "country", &c.country);
            if let Some(rep) = &c.representative {
                let mut rep_attrs = String::new();
                push_attr(&mut rep_attrs, "name", &rep.name);
                push_opt_attr(&mut rep_attrs, "email", &rep.email);
                let _ = writeln!(children, "{inner_indent}<tilt:representative{rep_attrs} />");
            }
        }
        TiltPayload::DataProtectionOfficer(d) => {
            push_attr(&mut attrs, "name", &d.name);
            push_opt_attr(&mut attrs, "email", &d.email);
            push_opt_attr(&mut attrs, "country", &d.country);
        }
        TiltPayload::DataDisclosed(d) => {
            if !d.id.is_empty() {
                push_attr(&mut attrs, "id", &d.id);
            }
            push_attr(&mut attrs, "category", &d.category);
            push_list(&mut children, &inner_indent, "purpose", &d.purposes);
            push_list(&mut children, &inner_indent, "legalBasis", &d.legal_bases);
            push_list(&mut children, &inner_indent, "recipient", &d.recipients);
            push_list(&mut children, &inner_indent, "storage", &d.storage);
        }
        TiltPayload::ThirdCountryTransfers(t) => {
            push_attr(&mut attrs, "country", &t.country);
            if let Some(adequacy) = t.adequacy_decision {
                push_attr(&mut attrs, "adequacyDecision", if adequacy { "true" } else { "false" });
            }
            push_opt_attr(&mut attrs, "safeguards", &t.safeguards);
        }
        TiltPayload::AccessAndDataPortability(a) => {
            push_attr(&mut attrs, "available", if a.available { "true" } else { "false" });
            push_opt_attr(&mut attrs, "description", &a.description);
        }
        TiltPayload::Sources(s) => {
            push_attr(&mut attrs, "description", &s.description);
            push_opt_attr(&mut attrs, "url", &s.url);
        }
        TiltPayload::Right { entry, .. } => {
            push_attr(&mut attrs, "description", &entry.description);
            push_opt_attr(&mut attrs, "contact", &entry.contact);
        }
        TiltPayload::AutomatedDecisionMaking(a) => {
            push_attr(&mut attrs, "inUse", if a.in_use { "true" } else { "false" });
            push_opt_attr(&mut attrs, "logicInvolved", &a.logic_involved);
        }
        TiltPayload::ChangesOfPurpose(c) => {
            push_attr(&mut attrs, "description", &c.description);
            push_list(&mut children, &inner_indent, "affectedDataCategory", &c.affected_data_categories);
        }
    }

    if annotation.origin == Origin::AutoFilled {
        push_attr(&mut attrs, AUTO_FILLED_ATTR, "true");
    }

    if children.is_empty() {
        format!("{indent}<tilt:{tag}{attrs} />\n")
    } else {
        format!("{indent}<tilt:{tag}{attrs}>\n{children}{indent}</tilt:{tag}>\n")
    }
}
