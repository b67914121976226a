//! Search DAG exports for post-hoc review: DOT text, a lossless JSON
//! document, and a self-contained static HTML page.
//!
//! Styling legend (shared by DOT and HTML): Open nodes are boxes, Error
//! nodes red ellipses, ProofFinished nodes green ellipses; dashed edges mark
//! re-arrivals at already-known states.

use crate::dag::{EdgeKind, NodeStatus, SearchDag, SearchEdge, SearchNode};
use crate::state::{ErrorKind, ProofState, ProofStep};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

// ---------------------------------------------------------------------------
// DOT
// ---------------------------------------------------------------------------

fn dot_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

/// Graphviz DOT rendering of a finalized search DAG.
pub fn export_dot(dag: &SearchDag) -> String {
    let mut out = String::from("digraph search {\n  rankdir=TB;\n  node [fontname=\"monospace\"];\n");
    for node in dag.nodes() {
        let label = format!("id={}\\nscore={}", node.id, node.score);
        let style = match node.status {
            NodeStatus::Open => "shape=box".to_string(),
            NodeStatus::Error(kind) => format!(
                "shape=ellipse, style=filled, fillcolor=red, tooltip=\"{}\"",
                dot_escape(&error_kind_word(kind))
            ),
            NodeStatus::ProofFinished => {
                "shape=ellipse, style=filled, fillcolor=green".to_string()
            }
        };
        let _ = writeln!(out, "  n{} [{style}, label=\"{label}\"];", node.id);
    }
    for edge in dag.edges() {
        let label = format!("{}\\n{}", dot_escape(&edge.step.full_text), edge.beam_prob);
        let dashed = if edge.kind == EdgeKind::Back { ", style=dashed" } else { "" };
        let _ = writeln!(out, "  n{} -> n{} [label=\"{label}\"{dashed}];", edge.from, edge.to);
    }
    out.push_str("}\n");
    out
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

fn error_kind_word(kind: ErrorKind) -> String {
    match serde_json::to_value(kind).expect("error kinds serialize") {
        serde_json::Value::String(s) => s,
        other => panic!("unexpected error kind encoding {other}"),
    }
}

fn status_to_wire(status: NodeStatus) -> String {
    match status {
        NodeStatus::Open => "open".to_string(),
        NodeStatus::ProofFinished => "finished".to_string(),
        NodeStatus::Error(kind) => format!("error:{}", error_kind_word(kind)),
    }
}

fn status_from_wire(text: &str) -> Result<NodeStatus, String> {
    match text {
        "open" => Ok(NodeStatus::Open),
        "finished" => Ok(NodeStatus::ProofFinished),
        other => {
            let kind = other
                .strip_prefix("error:")
                .ok_or_else(|| format!("unknown node status {other:?}"))?;
            let kind: ErrorKind = serde_json::from_value(serde_json::Value::String(kind.into()))
                .map_err(|e| format!("unknown error kind {kind:?}: {e}"))?;
            Ok(NodeStatus::Error(kind))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: usize,
    status: String,
    score: f64,
    expansion_order: Option<u32>,
    goal: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct JsonEdge {
    from: usize,
    to: usize,
    step: String,
    beam_prob: f64,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct JsonDag {
    nodes: Vec<JsonNode>,
    edges: Vec<JsonEdge>,
}

/// Lossless JSON document for a search DAG: every node's id, status, score,
/// expansion order, and goal; every edge's endpoints, step, beam logprob,
/// and kind.
pub fn export_json(dag: &SearchDag) -> String {
    let doc = JsonDag {
        nodes: dag
            .nodes()
            .iter()
            .map(|n| JsonNode {
                id: n.id,
                status: status_to_wire(n.status),
                score: n.score,
                expansion_order: n.expansion_order,
                goal: n.state.as_ref().map(|s| s.goal_text.clone()),
            })
            .collect(),
        edges: dag
            .edges()
            .iter()
            .map(|e| JsonEdge {
                from: e.from,
                to: e.to,
                step: e.step.full_text.clone(),
                beam_prob: e.beam_prob,
                kind: match e.kind {
                    EdgeKind::Tree => "tree".to_string(),
                    EdgeKind::Back => "back".to_string(),
                },
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("DAG document serializes")
}

/// Rebuild a DAG from its JSON export.
pub fn import_json(text: &str) -> Result<SearchDag, String> {
    let doc: JsonDag = serde_json::from_str(text).map_err(|e| format!("bad DAG JSON: {e}"))?;
    if doc.nodes.is_empty() {
        return Err("DAG document has no nodes".into());
    }
    for (i, node) in doc.nodes.iter().enumerate() {
        if node.id != i {
            return Err(format!("node ids must be dense and ordered; found {} at {i}", node.id));
        }
    }

    // Recover tree depths (not stored on the wire) from the tree edges.
    let mut depth = vec![0u32; doc.nodes.len()];
    let mut tree_parent: Vec<Option<usize>> = vec![None; doc.nodes.len()];
    for e in &doc.edges {
        if e.from >= doc.nodes.len() || e.to >= doc.nodes.len() {
            return Err(format!("edge {} -> {} references an unknown node", e.from, e.to));
        }
        if e.kind == "tree" {
            tree_parent[e.to] = Some(e.from);
        }
    }
    // Node ids are assigned in creation order, so a parent's id is always
    // smaller than its children's and one forward pass settles all depths.
    for id in 0..doc.nodes.len() {
        if let Some(parent) = tree_parent[id] {
            if parent >= id {
                return Err(format!("tree edge {parent} -> {id} is not creation-ordered"));
            }
            depth[id] = depth[parent] + 1;
        }
    }

    let mut next_expansion = 0u32;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        let status = status_from_wire(&n.status)?;
        if let Some(order) = n.expansion_order {
            next_expansion = next_expansion.max(order + 1);
        }
        nodes.push(SearchNode {
            id: n.id,
            state: n.goal.map(|g| ProofState::new(n.id as u64, g, depth[n.id])),
            status,
            score: n.score,
            depth: depth[n.id],
            expansion_order: n.expansion_order,
        });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in doc.edges {
        let kind = match e.kind.as_str() {
            "tree" => EdgeKind::Tree,
            "back" => EdgeKind::Back,
            other => return Err(format!("unknown edge kind {other:?}")),
        };
        edges.push(SearchEdge {
            from: e.from,
            to: e.to,
            step: ProofStep::from_full_text(&e.step),
            beam_prob: e.beam_prob,
            kind,
        });
    }
    SearchDag::from_parts(nodes, edges, next_expansion).map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// HTML
// ---------------------------------------------------------------------------

fn html_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

const NODE_W: f64 = 120.0;
const NODE_H: f64 = 44.0;
const GAP_X: f64 = 40.0;
const GAP_Y: f64 = 90.0;
const MARGIN: f64 = 30.0;

/// Render a search DAG as a single self-contained HTML page: an inline SVG
/// with the standard legend, no scripts, no external fetches.
pub fn render_html(dag_json: &str) -> Result<String, String> {
    let dag = import_json(dag_json)?;
    Ok(render_html_from_dag(&dag))
}

/// [`render_html`] over an in-memory DAG.
pub fn render_html_from_dag(dag: &SearchDag) -> String {
    // Layered layout: row = tree depth, column = position within the row.
    let mut layers: Vec<Vec<usize>> = Vec::new();
    for node in dag.nodes() {
        let d = node.depth as usize;
        if layers.len() <= d {
            layers.resize(d + 1, Vec::new());
        }
        layers[d].push(node.id);
    }
    let widest = layers.iter().map(Vec::len).max().unwrap_or(1);
    let width = MARGIN * 2.0 + widest as f64 * (NODE_W + GAP_X) - GAP_X;
    let height = MARGIN * 2.0 + layers.len() as f64 * (NODE_H + GAP_Y) - GAP_Y;

    let mut pos = vec![(0.0f64, 0.0f64); dag.nodes().len()];
    for (row, layer) in layers.iter().enumerate() {
        let row_width = layer.len() as f64 * (NODE_W + GAP_X) - GAP_X;
        let x0 = (width - row_width) / 2.0;
        for (col, &id) in layer.iter().enumerate() {
            pos[id] = (
                x0 + col as f64 * (NODE_W + GAP_X) + NODE_W / 2.0,
                MARGIN + row as f64 * (NODE_H + GAP_Y) + NODE_H / 2.0,
            );
        }
    }

    let mut svg = String::new();
    for edge in dag.edges() {
        let (x1, y1) = pos[edge.from];
        let (x2, y2) = pos[edge.to];
        let dash = if edge.kind == EdgeKind::Back {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#666\"{dash}><title>{} ({})</title></line>",
            x1,
            y1 + NODE_H / 2.0,
            x2,
            y2 - NODE_H / 2.0,
            html_escape(&edge.step.full_text),
            edge.beam_prob
        );
        if edge.kind == EdgeKind::Tree {
            let _ = writeln!(
                svg,
                "  <text x=\"{:.1}\" y=\"{:.1}\" class=\"edge\">{}</text>",
                (x1 + x2) / 2.0 + 4.0,
                (y1 + y2) / 2.0,
                html_escape(&edge.step.full_text)
            );
        }
    }
    for node in dag.nodes() {
        let (x, y) = pos[node.id];
        let (shape, title) = match node.status {
            NodeStatus::Open => (
                format!(
                    "<rect class=\"open\" x=\"{:.1}\" y=\"{:.1}\" width=\"{NODE_W}\" height=\"{NODE_H}\"/>",
                    x - NODE_W / 2.0,
                    y - NODE_H / 2.0
                ),
                node.state
                    .as_ref()
                    .map(|s| s.goal_text.clone())
                    .unwrap_or_else(|| "open".into()),
            ),
            NodeStatus::Error(kind) => (
                format!(
                    "<ellipse class=\"error\" cx=\"{x:.1}\" cy=\"{y:.1}\" rx=\"{:.1}\" ry=\"{:.1}\"/>",
                    NODE_W / 2.0,
                    NODE_H / 2.0
                ),
                error_kind_word(kind),
            ),
            NodeStatus::ProofFinished => (
                format!(
                    "<ellipse class=\"finished\" cx=\"{x:.1}\" cy=\"{y:.1}\" rx=\"{:.1}\" ry=\"{:.1}\"/>",
                    NODE_W / 2.0,
                    NODE_H / 2.0
                ),
                "proof finished".into(),
            ),
        };
        let _ = writeln!(
            svg,
            "  <g>\n    <title>{}</title>\n    {shape}\n    <text x=\"{x:.1}\" y=\"{:.1}\">id={}</text>\n    <text x=\"{x:.1}\" y=\"{:.1}\">score={}</text>\n  </g>",
            html_escape(&title),
            y - 4.0,
            node.id,
            y + 14.0,
            node.score
        );
    }

    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>Search DAG</title>
<style>
  body {{ font-family: monospace; background: #fafafa; margin: 1em; }}
  svg {{ background: white; border: 1px solid #ddd; }}
  rect.open {{ fill: #fff; stroke: #333; }}
  ellipse.error {{ fill: #e57373; stroke: #b71c1c; }}
  ellipse.finished {{ fill: #81c784; stroke: #1b5e20; }}
  text {{ font-size: 12px; text-anchor: middle; }}
  text.edge {{ font-size: 10px; fill: #888; text-anchor: start; }}
</style>
</head>
<body>
<h1>Search DAG</h1>
<p class="legend">box = open &middot; red ellipse = error &middot; green ellipse = proof finished &middot; dashed = revisit</p>
<svg width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" xmlns="http://www.w3.org/2000/svg">
{svg}</svg>
</body>
</html>
"#
    )
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
