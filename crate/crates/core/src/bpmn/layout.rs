//! Best-effort diagram interchange generation for models built in memory
//! (discovered models, fixtures). Parsed models keep their original layout;
//! this never overwrites an existing diagram section.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use quick_xml::escape::escape;

use crate::bpmn::{
    BpmnElement, BpmnModel, ElementClass, FlowKind, BPMNDI_NS, DC_NS, DI_NS,
};

const CELL_W: i64 = 160;
const CELL_H: i64 = 120;
const ORIGIN_X: i64 = 180;

fn node_size(element: &BpmnElement) -> (i64, i64) {
    match element.class {
        ElementClass::Activity => (100, 80),
        ElementClass::StartEvent | ElementClass::EndEvent => (36, 36),
        ElementClass::Gateway => (50, 50),
        ElementClass::DataStoreReference => (50, 50),
        ElementClass::DataObjectReference => (36, 50),
        ElementClass::Participant | ElementClass::Lane => (0, 0),
    }
}

#[derive(Debug, Clone, Copy)]
struct Rect {
    x: i64,
    y: i64,
    w: i64,
    h: i64,
}

impl Rect {
    fn center(&self) -> (i64, i64) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }
}

/// Compute and attach a generated diagram section. No-op when the model
/// already carries one.
pub fn generate_layout(model: &mut BpmnModel) {
    if !model.diagram_interchange.is_empty() {
        return;
    }

    let mut shapes: BTreeMap<String, Rect> = BTreeMap::new();
    let mut shape_order: Vec<String> = Vec::new();
    let mut y_cursor: i64 = 60;

    for scope_index in 0..model.processes.len() {
        let scope_id = model.processes[scope_index].id.clone();
        let nodes: Vec<usize> = model
            .elements
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                e.process_id.as_deref() == Some(scope_id.as_str())
                    && e.class != ElementClass::Lane
                    && e.class != ElementClass::Participant
            })
            .map(|(i, _)| i)
            .collect();
        if nodes.is_empty() {
            continue;
        }

        let layers = layer_assignment(model, &nodes);
        let lanes: Vec<String> = model
            .elements
            .iter()
            .filter(|e| {
                e.class == ElementClass::Lane && e.process_id.as_deref() == Some(scope_id.as_str())
            })
            .map(|e| e.id.clone())
            .collect();
        let lane_of = |element: &BpmnElement| -> usize {
            element
                .container
                .as_deref()
                .and_then(|c| lanes.iter().position(|l| l == c))
                .unwrap_or(0)
        };
        let lane_count = lanes.len().max(1);

        // Stack nodes per (lane, layer) cell.
        let mut cell_fill: BTreeMap<(usize, i64), i64> = BTreeMap::new();
        let mut lane_rows: Vec<i64> = vec![1; lane_count];
        let mut placements: Vec<(usize, usize, i64, i64)> = Vec::new(); // element, lane, layer, slot
        for &index in &nodes {
            let element = &model.elements[index];
            let lane = lane_of(element);
            let layer = layers.get(&element.id).copied().unwrap_or(0);
            let slot = cell_fill.entry((lane, layer)).or_insert(0);
            placements.push((index, lane, layer, *slot));
            *slot += 1;
            lane_rows[lane] = lane_rows[lane].max(*slot);
        }

        let mut lane_tops: Vec<i64> = Vec::with_capacity(lane_count);
        let mut lane_y = y_cursor;
        for rows in &lane_rows {
            lane_tops.push(lane_y);
            lane_y += rows * CELL_H;
        }
        let process_bottom = lane_y;
        let max_layer = layers.values().copied().max().unwrap_or(0);
        let process_right = ORIGIN_X + (max_layer + 1) * CELL_W + 40;

        for (index, lane, layer, slot) in placements {
            let element = &model.elements[index];
            let (w, h) = node_size(element);
            let rect = Rect {
                x: ORIGIN_X + layer * CELL_W + (CELL_W - 30 - w) / 2,
                y: lane_tops[lane] + slot * CELL_H + (CELL_H - h) / 2,
                w,
                h,
            };
            shapes.insert(element.id.clone(), rect);
            shape_order.push(element.id.clone());
        }

        for (lane_index, lane_id) in lanes.iter().enumerate() {
            let top = lane_tops[lane_index];
            let height = lane_rows[lane_index] * CELL_H;
            shapes.insert(
                lane_id.clone(),
                Rect { x: 150, y: top, w: process_right - 150, h: height },
            );
            shape_order.push(lane_id.clone());
        }

        // Pool rectangle for the owning participant, if any.
        let participant = model
            .participants()
            .find(|p| p.attributes.get("processRef").map(String::as_str) == Some(&scope_id))
            .map(|p| p.id.clone());
        if let Some(pid) = participant {
            shapes.insert(
                pid.clone(),
                Rect { x: 120, y: y_cursor, w: process_right - 120, h: process_bottom - y_cursor },
            );
            shape_order.push(pid);
        }

        y_cursor = process_bottom + 60;
    }

    // Black-box participants: a plain pool without content.
    let black_boxes: Vec<String> = model
        .participants()
        .filter(|p| {
            p.attributes
                .get("processRef")
                .map(|r| !model.processes.iter().any(|s| &s.id == r))
                .unwrap_or(true)
        })
        .map(|p| p.id.clone())
        .collect();
    for pid in black_boxes {
        shapes.insert(pid.clone(), Rect { x: 120, y: y_cursor, w: 600, h: 80 });
        shape_order.push(pid);
        y_cursor += 140;
    }

    let plane_element = match &model.collaboration {
        Some(scope) if !scope.id.is_empty() => scope.id.clone(),
        _ => model
            .processes
            .first()
            .map(|p| p.id.clone())
            .unwrap_or_else(|| "Process_1".into()),
    };

    let mut xml = String::new();
    let _ = writeln!(xml, "<bpmndi:BPMNDiagram id=\"BPMNDiagram_1\">");
    let _ = writeln!(
        xml,
        "    <bpmndi:BPMNPlane id=\"BPMNPlane_1\" bpmnElement=\"{}\">",
        escape(&plane_element)
    );
    for id in &shape_order {
        let rect = shapes[id];
        let element = model.element(id);
        let horizontal = element
            .map(|e| matches!(e.class, ElementClass::Participant | ElementClass::Lane))
            .unwrap_or(false);
        let horizontal_attr = if horizontal { " isHorizontal=\"true\"" } else { "" };
        let _ = write!(
            xml,
            "      <bpmndi:BPMNShape id=\"{id}_di\" bpmnElement=\"{id}\"{horizontal_attr}>\n        \
             <dc:Bounds x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" />\n      </bpmndi:BPMNShape>\n",
            rect.x, rect.y, rect.w, rect.h,
        );
    }
    for flow in &model.flows {
        let (Some(source), Some(target)) =
            (shapes.get(&flow.source_id), shapes.get(&flow.target_id))
        else {
            continue;
        };
        let (sx, sy) = source.center();
        let (tx, ty) = target.center();
        let _ = write!(
            xml,
            "      <bpmndi:BPMNEdge id=\"{}_di\" bpmnElement=\"{}\">\n        \
             <di:waypoint x=\"{sx}\" y=\"{sy}\" />\n        <di:waypoint x=\"{tx}\" y=\"{ty}\" />\n      \
             </bpmndi:BPMNEdge>\n",
            flow.id, flow.id,
        );
    }
    let _ = write!(xml, "    </bpmndi:BPMNPlane>\n  </bpmndi:BPMNDiagram>");

    model.diagram_interchange.push(xml);
    model.source_namespaces.entry("bpmndi".into()).or_insert_with(|| BPMNDI_NS.into());
    model.source_namespaces.entry("dc".into()).or_insert_with(|| DC_NS.into());
    model.source_namespaces.entry("di".into()).or_insert_with(|| DI_NS.into());
}

/// Longest-path layering along sequence flows, bounded for cyclic graphs.
/// Data nodes sit in the layer of their first associated activity.
fn layer_assignment(model: &BpmnModel, nodes: &[usize]) -> BTreeMap<String, i64> {
    let ids: Vec<&str> = nodes.iter().map(|&i| model.elements[i].id.as_str()).collect();
    let mut layers: BTreeMap<String, i64> = ids.iter().map(|id| (id.to_string(), 0)).collect();

    let edges: Vec<(&str, &str)> = model
        .flows
        .iter()
        .filter(|f| f.kind == FlowKind::SequenceFlow)
        .filter(|f| ids.contains(&f.source_id.as_str()) && ids.contains(&f.target_id.as_str()))
        .map(|f| (f.source_id.as_str(), f.target_id.as_str()))
        .collect();

    for _ in 0..=nodes.len() {
        let mut changed = false;
        for (source, target) in &edges {
            let source_layer = layers[*source];
            let candidate = source_layer + 1;
            if candidate > layers[*target] && candidate <= nodes.len() as i64 {
                layers.insert(target.to_string(), candidate);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    for flow in model.flows.iter().filter(|f| f.kind == FlowKind::DataAssociation) {
        for (data_side, activity_side) in
            [(&flow.source_id, &flow.target_id), (&flow.target_id, &flow.source_id)]
        {
            let is_data = model
                .element(data_side)
                .map(|e| {
                    matches!(
                        e.class,
                        ElementClass::DataStoreReference | ElementClass::DataObjectReference
                    )
                })
                .unwrap_or(false);
            if is_data && layers.contains_key(data_side.as_str()) {
                if let Some(activity_layer) = layers.get(activity_side.as_str()).copied() {
                    layers.insert(data_side.to_string(), activity_layer);
                }
            }
        }
    }

    layers
}
