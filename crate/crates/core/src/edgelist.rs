//! CSV edge lists (`layer,source,target,flow`) and flow trimming.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{FlowEdge, LayerId, MultiplexNetwork, NodeTable};

/// Column names of an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSchema {
    pub layer: String,
    pub source: String,
    pub target: String,
    pub flow: String,
}

impl Default for EdgeSchema {
    fn default() -> Self {
        Self {
            layer: "layer".into(),
            source: "source".into(),
            target: "target".into(),
            flow: "flow".into(),
        }
    }
}

/// Parses an edge list, interning labels into `nodes` in first-appearance order.
///
/// Blank values, non-numeric or negative flows, wrong arity and self-loops are
/// reported with the offending line number. A header that lacks a schema
/// column or carries an extra one is a schema error.
pub fn parse_edge_list<R: Read>(
    source: R,
    schema: &EdgeSchema,
    nodes: &mut NodeTable,
) -> Result<Vec<FlowEdge>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let wanted = [&schema.layer, &schema.source, &schema.target, &schema.flow];
    if let Some(extra) = headers.iter().find(|h| !wanted.iter().any(|w| w == h)) {
        return Err(Error::Schema(format!("unknown column `{extra}`")));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (c_layer, c_source, c_target, c_flow) = (
        column(&schema.layer)?,
        column(&schema.source)?,
        column(&schema.target)?,
        column(&schema.flow)?,
    );

    let mut edges = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != headers.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let layer: usize = record[c_layer]
            .parse()
            .map_err(|_| bad(format!("layer `{}` is not a non-negative integer", &record[c_layer])))?;
        let flow: f64 = record[c_flow]
            .parse()
            .map_err(|_| bad(format!("flow `{}` is not a number", &record[c_flow])))?;
        if !flow.is_finite() || flow < 0.0 {
            return Err(bad(format!("flow {flow} must be finite and non-negative")));
        }
        let (s, t) = (&record[c_source], &record[c_target]);
        if s.is_empty() || t.is_empty() {
            return Err(bad("empty node label".into()));
        }
        if s == t {
            return Err(bad(format!("self-loop on `{s}`")));
        }
        edges.push(FlowEdge {
            source: nodes.intern(s),
            target: nodes.intern(t),
            layer: LayerId(layer),
            flow,
        });
    }
    Ok(edges)
}

/// Writes edges in the canonical four-column format.
pub fn write_edges<W: Write>(sink: W, edges: &[FlowEdge], nodes: &NodeTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["layer", "source", "target", "flow"])?;
    for e in edges {
        writer.write_record([
            e.layer.to_string(),
            nodes.label(e.source).to_owned(),
            nodes.label(e.target).to_owned(),
            e.flow.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<edge list>", e))?;
    Ok(())
}

pub fn write_network<W: Write>(sink: W, net: &MultiplexNetwork) -> Result<()> {
    write_edges(sink, &net.to_edges(), net.nodes())
}

/// Scope of the maximum used by [`trim_edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrimScope {
    #[default]
    PerLayer,
    Global,
}

/// Keeps edges with `flow >= ratio * max_flow`, the maximum taken per layer or
/// over the whole list. Order is preserved.
pub fn trim_edges(edges: &[FlowEdge], ratio: f64, scope: TrimScope) -> Result<Vec<FlowEdge>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "trim ratio {ratio} must lie in (0, 1]"
        )));
    }
    let n_layers = edges.iter().map(|e| e.layer.0 + 1).max().unwrap_or(0);
    let mut max_flow = vec![f64::NEG_INFINITY; n_layers.max(1)];
    for e in edges {
        let slot = match scope {
            TrimScope::PerLayer => e.layer.0,
            TrimScope::Global => 0,
        };
        max_flow[slot] = max_flow[slot].max(e.flow);
    }
    Ok(edges
        .iter()
        .filter(|e| {
            let slot = match scope {
                TrimScope::PerLayer => e.layer.0,
                TrimScope::Global => 0,
            };
            e.flow >= ratio * max_flow[slot]
        })
        .copied()
        .collect())
}
