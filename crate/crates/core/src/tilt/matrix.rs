//! The BPMN-TILT placement matrix.
//!
//! Nine BPMN element classes by ten information-field columns. A cell is
//! legal always (X), only in process diagrams (P), only in collaboration
//! diagrams (C), or never (dash).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bpmn::{DiagramKind, ElementClass};
use crate::tilt::{FieldColumn, TiltFieldKind};

/// The nine element classes the placement matrix knows about. Unlike
/// [`ElementClass`], this includes `MessageFlow`, which the model keeps in
/// [`crate::bpmn::Flow`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlacementClass {
    Activity,
    StartEvent,
    EndEvent,
    Gateway,
    DataStoreReference,
    DataObjectReference,
    MessageFlow,
    Participant,
    Lane,
}

impl PlacementClass {
    pub const ALL: [PlacementClass; 9] = [
        PlacementClass::Activity,
        PlacementClass::StartEvent,
        PlacementClass::EndEvent,
        PlacementClass::Gateway,
        PlacementClass::DataStoreReference,
        PlacementClass::DataObjectReference,
        PlacementClass::MessageFlow,
        PlacementClass::Participant,
        PlacementClass::Lane,
    ];
}

impl From<ElementClass> for PlacementClass {
    fn from(class: ElementClass) -> Self {
        match class {
            ElementClass::Activity => PlacementClass::Activity,
            ElementClass::StartEvent => PlacementClass::StartEvent,
            ElementClass::EndEvent => PlacementClass::EndEvent,
            ElementClass::Gateway => PlacementClass::Gateway,
            ElementClass::DataStoreReference => PlacementClass::DataStoreReference,
            ElementClass::DataObjectReference => PlacementClass::DataObjectReference,
            ElementClass::Participant => PlacementClass::Participant,
            ElementClass::Lane => PlacementClass::Lane,
        }
    }
}

/// One matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    /// "X": legal in both diagram kinds.
    Both,
    /// "P": legal only in process diagrams.
    ProcessOnly,
    /// "C": legal only in collaboration diagrams.
    CollaborationOnly,
    /// Dash: never legal.
    None,
}

impl Mark {
    pub fn permits(&self, kind: DiagramKind) -> bool {
        match self {
            Mark::Both => true,
            Mark::ProcessOnly => kind == DiagramKind::Process,
            Mark::CollaborationOnly => kind == DiagramKind::Collaboration,
            Mark::None => false,
        }
    }
}

/// The matrix cell for one (element class, column) pair.
pub fn placement_mark(class: PlacementClass, column: FieldColumn) -> Mark {
    use Mark::{Both as X, CollaborationOnly as C, None as D, ProcessOnly as P};
    use PlacementClass::*;
    use FieldColumn::*;

    match (class, column) {
        (Activity, DataDisclosed) => X,
        (Activity, AutomatedDecisionMaking) => X,
        (Activity, _) => D,

        (StartEvent, Meta) => X,
        (StartEvent, Controller) => P,
        (StartEvent, DataProtectionOfficer) => P,
        (StartEvent, _) => D,

        (EndEvent, AccessAndDataPortability) => X,
        (EndEvent, Rights) => X,
        (EndEvent, ChangesOfPurpose) => X,
        (EndEvent, _) => D,

        (Gateway, AutomatedDecisionMaking) => X,
        (Gateway, _) => D,

        (DataStoreReference, Sources) => X,
        (DataStoreReference, _) => D,

        (DataObjectReference, DataDisclosed) => X,
        (DataObjectReference, _) => D,

        (MessageFlow, ThirdCountryTransfers) => X,
        (MessageFlow, _) => D,

        (Participant, Controller) => C,
        (Participant, DataProtectionOfficer) => C,
        (Participant, Sources) => C,
        (Participant, _) => D,

        (Lane, DataProtectionOfficer) => C,
        (Lane, _) => D,
    }
}

/// The set of field kinds that may legally be attached to `class` in a
/// diagram of `kind`.
pub fn allowed_fields(class: PlacementClass, kind: DiagramKind) -> BTreeSet<TiltFieldKind> {
    let mut fields = BTreeSet::new();
    for column in FieldColumn::ALL {
        if placement_mark(class, column).permits(kind) {
            fields.extend(column.field_kinds().iter().copied());
        }
    }
    fields
}
