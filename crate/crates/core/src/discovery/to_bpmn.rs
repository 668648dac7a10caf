//! Process tree to BPMN conversion.
//!
//! Sequences chain with sequence flows, choices become exclusive gateway
//! pairs, parallels become parallel gateway pairs, and loops become
//! exclusive gateways with back edges. The result is sound by construction:
//! every path leads from the single start event to the single end event.

use crate::bpmn::{generate_layout, BpmnElement, BpmnModel, ElementClass, Flow, FlowKind, ProcessScope};
use crate::discovery::ProcessTree;

struct Builder {
    model: BpmnModel,
    activity_count: usize,
    gateway_count: usize,
    flow_count: usize,
}

/// Connection points of a built subtree; `None` means the fragment is
/// silent and callers wire straight through.
type Fragment = Option<(String, String)>;

impl Builder {
    fn new() -> Self {
        let mut model = BpmnModel::default();
        model
            .source_namespaces
            .insert("bpmn".into(), crate::bpmn::BPMN_NS.into());
        model.processes.push(ProcessScope::new("Process_1"));
        Builder { model, activity_count: 0, gateway_count: 0, flow_count: 0 }
    }

    fn add_node(&mut self, id: String, class: ElementClass, tag: &str, name: &str) -> String {
        let mut element = BpmnElement::new(&id, class, tag, name);
        element.process_id = Some("Process_1".into());
        self.model.elements.push(element);
        id
    }

    fn task(&mut self, name: &str) -> String {
        self.activity_count += 1;
        self.add_node(format!("Activity_{}", self.activity_count), ElementClass::Activity, "task", name)
    }

    fn gateway(&mut self, tag: &str) -> String {
        self.gateway_count += 1;
        self.add_node(format!("Gateway_{}", self.gateway_count), ElementClass::Gateway, tag, "")
    }

    fn flow(&mut self, source: &str, target: &str) {
        self.flow_count += 1;
        let mut flow =
            Flow::new(&format!("Flow_{}", self.flow_count), FlowKind::SequenceFlow, source, target);
        flow.process_id = Some("Process_1".into());
        self.model.flows.push(flow);
    }

    fn build(&mut self, tree: &ProcessTree) -> Fragment {
        match tree {
            ProcessTree::Tau => None,
            ProcessTree::Leaf(activity) => {
                let id = self.task(activity);
                Some((id.clone(), id))
            }
            ProcessTree::Sequence(children) => {
                let fragments: Vec<(String, String)> =
                    children.iter().filter_map(|c| self.build(c)).collect();
                match fragments.split_first() {
                    None => None,
                    Some(((first_entry, first_exit), rest)) => {
                        let mut last_exit = first_exit.clone();
                        for (entry, exit) in rest {
                            self.flow(&last_exit, entry);
                            last_exit = exit.clone();
                        }
                        Some((first_entry.clone(), last_exit))
                    }
                }
            }
            ProcessTree::ExclusiveChoice(children) => {
                self.branching(children, "exclusiveGateway")
            }
            ProcessTree::Parallel(children) => self.branching(children, "parallelGateway"),
            ProcessTree::Loop(children) => {
                let entry = self.gateway("exclusiveGateway");
                let exit = self.gateway("exclusiveGateway");
                let (body, redos) = children.split_first().expect("loop has a body");
                match self.build(body) {
                    Some((body_entry, body_exit)) => {
                        self.flow(&entry, &body_entry);
                        self.flow(&body_exit, &exit);
                    }
                    None => self.flow(&entry, &exit),
                }
                for redo in redos {
                    match self.build(redo) {
                        Some((redo_entry, redo_exit)) => {
                            self.flow(&exit, &redo_entry);
                            self.flow(&redo_exit, &entry);
                        }
                        None => self.flow(&exit, &entry),
                    }
                }
                Some((entry, exit))
            }
        }
    }

    fn branching(&mut self, children: &[ProcessTree], gateway_tag: &str) -> Fragment {
        let split = self.gateway(gateway_tag);
        let join = self.gateway(gateway_tag);
        for child in children {
            match self.build(child) {
                Some((entry, exit)) => {
                    self.flow(&split, &entry);
                    self.flow(&exit, &join);
                }
                None => self.flow(&split, &join),
            }
        }
        Some((split, join))
    }
}

/// Convert a process tree into a single-process BPMN model with one start
/// and one end event, plus generated layout.
pub fn tree_to_bpmn(tree: &ProcessTree) -> BpmnModel {
    let mut builder = Builder::new();
    let start =
        builder.add_node("StartEvent_1".into(), ElementClass::StartEvent, "startEvent", "");
    let fragment = builder.build(tree);
    let end = builder.add_node("EndEvent_1".into(), ElementClass::EndEvent, "endEvent", "");
    match fragment {
        Some((entry, exit)) => {
            builder.flow(&start, &entry);
            builder.flow(&exit, &end);
        }
        None => builder.flow(&start, &end),
    }

    let mut model = builder.model;
    generate_layout(&mut model);
    model
}
