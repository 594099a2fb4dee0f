//! The `.knet.json` knowledge-base format.
//!
//! A document is a JSON object:
//!
//! ```json
//! {
//!   "format": "knet-kb",
//!   "version": 1,
//!   "name": "chain",
//!   "kind": "belief",
//!   "nodes": [
//!     {
//!       "id": "A",
//!       "kind": "chance",
//!       "states": ["t", "f"],
//!       "parents": [],
//!       "cpt": [
//!         [0.3, 0.7]
//!       ],
//!       "meta": {
//!         "name": "A",
//!         "question": "",
//!         "description": "",
//!         "display": {"x": 0, "y": 0, "color": [0, 0, 0], "shade": 0}
//!       }
//!     }
//!   ]
//! }
//! ```
//!
//! Decision nodes carry `alternatives` instead of `states` and no table;
//! value nodes carry `utilities` and no states. `parents` and `meta` (and
//! every field inside `meta`) may be omitted. CPT rows and utilities are
//! listed in [`config_index`](crate::model::config_index) order.
//!
//! [`serialize`] writes the canonical form: keys in the order above,
//! nodes sorted by id, numbers as the shortest decimal that reads back to
//! the same `f64`, and any preserved unknown keys after the known ones in
//! sorted order.

use std::collections::HashMap;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{
    config_count, validate, ChanceNode, Cpt, DecisionNode, Display, Extensions, Network, NetworkKind, Node,
    NodeId, NodeMeta, UtilityTable, ValidationReport, ValueNode,
};

pub const FORMAT: &str = "knet-kb";
pub const VERSION: u64 = 1;
pub const FILE_EXTENSION: &str = ".knet.json";

const TOP_KEYS: &[&str] = &["format", "version", "name", "kind", "nodes"];
const CHANCE_KEYS: &[&str] = &["id", "kind", "states", "parents", "cpt", "meta"];
const DECISION_KEYS: &[&str] = &["id", "kind", "alternatives", "parents", "meta"];
const VALUE_KEYS: &[&str] = &["id", "kind", "parents", "utilities", "meta"];
const KIND_SPECIFIC_KEYS: &[&str] = &["states", "alternatives", "cpt", "utilities"];
const META_KEYS: &[&str] = &["name", "question", "description", "display"];
const DISPLAY_KEYS: &[&str] = &["x", "y", "color", "shade"];

/// How unknown top-level and node-level keys are treated. Unknown keys
/// inside `meta` are rejected in both modes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Mode {
    /// Reject them.
    #[default]
    Strict,
    /// Keep them in the network's or node's `extensions`.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KbError {
    #[error("syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported format version {found} (expected {VERSION})")]
    Version { found: String },
    #[error("document does not describe a valid network:\n{0}")]
    Validation(ValidationReport),
}

impl KbError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        KbError::Schema { path: path.into(), message: message.into() }
    }
}

/// Parses a document in strict mode.
pub fn parse(text: &str) -> Result<Network, KbError> {
    parse_with(text, Mode::Strict)
}

pub fn parse_with(text: &str, mode: Mode) -> Result<Network, KbError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| KbError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let network = from_value(&doc, mode)?;
    let report = validate(&network);
    if !report.is_valid() {
        return Err(KbError::Validation(report));
    }
    Ok(network)
}

/// Reformats a document into canonical form.
pub fn canonicalize(text: &str, mode: Mode) -> Result<String, KbError> {
    Ok(serialize(&parse_with(text, mode)?))
}

/// The network with its nodes sorted by id, the order [`serialize`] uses.
pub fn canonical_order(network: &Network) -> Network {
    let mut out = network.clone();
    out.nodes.sort_by(|a, b| a.id().cmp(b.id()));
    out
}

fn from_value(doc: &Value, mode: Mode) -> Result<Network, KbError> {
    let top = object(doc, "$")?;
    let format = string(required(top, "format", "$")?, "$.format")?;
    if format != FORMAT {
        return Err(KbError::schema("$.format", format!("expected {FORMAT:?}, found {format:?}")));
    }
    let version = required(top, "version", "$")?;
    match version.as_u64() {
        Some(VERSION) => {}
        _ if version.is_number() => return Err(KbError::Version { found: version.to_string() }),
        _ => return Err(KbError::schema("$.version", "expected an integer")),
    }
    let name = match top.get("name") {
        Some(v) => string(v, "$.name")?.to_owned(),
        None => String::new(),
    };
    let kind = match string(required(top, "kind", "$")?, "$.kind")? {
        "belief" => NetworkKind::BeliefNetwork,
        "decision" => NetworkKind::DecisionNetwork,
        other => {
            return Err(KbError::schema(
                "$.kind",
                format!("expected \"belief\" or \"decision\", found {other:?}"),
            ))
        }
    };
    let list = array(required(top, "nodes", "$")?, "$.nodes")?;
    let extensions = extras(top, TOP_KEYS, &[], "$", mode)?;
    let nodes = list
        .iter()
        .enumerate()
        .map(|(i, v)| node(v, &format!("$.nodes[{i}]"), mode))
        .collect::<Result<Vec<_>, _>>()?;
    check_table_shapes(&nodes)?;
    Ok(Network { name, kind, nodes, extensions })
}

fn node(v: &Value, path: &str, mode: Mode) -> Result<Node, KbError> {
    let obj = object(v, path)?;
    let id = NodeId::new(string(required(obj, "id", path)?, &format!("{path}.id"))?);
    let kind = string(required(obj, "kind", path)?, &format!("{path}.kind"))?;
    let parents: Vec<NodeId> = match obj.get("parents") {
        Some(v) => strings(v, &format!("{path}.parents"))?.into_iter().map(NodeId::new).collect(),
        None => Vec::new(),
    };
    let meta = match obj.get("meta") {
        Some(v) => meta(v, &id, &format!("{path}.meta"))?,
        None => NodeMeta::for_id(&id),
    };
    let node = match kind {
        "chance" => {
            let states = strings(required(obj, "states", path)?, &format!("{path}.states"))?;
            let cpt_path = format!("{path}.cpt");
            let rows = array(required(obj, "cpt", path)?, &cpt_path)?
                .iter()
                .enumerate()
                .map(|(r, row)| numbers(row, &format!("{cpt_path}[{r}]")))
                .collect::<Result<Vec<_>, _>>()?;
            let extensions = extras(obj, CHANCE_KEYS, KIND_SPECIFIC_KEYS, path, mode)?;
            Node::Chance(ChanceNode { id, states, parents, cpt: Cpt::new(rows), meta, extensions })
        }
        "decision" => {
            let alternatives =
                strings(required(obj, "alternatives", path)?, &format!("{path}.alternatives"))?;
            let extensions = extras(obj, DECISION_KEYS, KIND_SPECIFIC_KEYS, path, mode)?;
            Node::Decision(DecisionNode { id, alternatives, parents, meta, extensions })
        }
        "value" => {
            let utilities = numbers(required(obj, "utilities", path)?, &format!("{path}.utilities"))?;
            let extensions = extras(obj, VALUE_KEYS, KIND_SPECIFIC_KEYS, path, mode)?;
            Node::Value(ValueNode { id, parents, utilities: UtilityTable::new(utilities), meta, extensions })
        }
        other => {
            return Err(KbError::schema(
                format!("{path}.kind"),
                format!("expected \"chance\", \"decision\" or \"value\", found {other:?}"),
            ))
        }
    };
    Ok(node)
}

fn meta(v: &Value, id: &NodeId, path: &str) -> Result<NodeMeta, KbError> {
    let obj = object(v, path)?;
    reject_unknown(obj, META_KEYS, path)?;
    let mut meta = NodeMeta::for_id(id);
    if let Some(v) = obj.get("name") {
        meta.name = string(v, &format!("{path}.name"))?.to_owned();
    }
    if let Some(v) = obj.get("question") {
        meta.question = string(v, &format!("{path}.question"))?.to_owned();
    }
    if let Some(v) = obj.get("description") {
        meta.description = string(v, &format!("{path}.description"))?.to_owned();
    }
    if let Some(v) = obj.get("display") {
        meta.display = display(v, &format!("{path}.display"))?;
    }
    Ok(meta)
}

fn display(v: &Value, path: &str) -> Result<Display, KbError> {
    let obj = object(v, path)?;
    reject_unknown(obj, DISPLAY_KEYS, path)?;
    let mut d = Display::default();
    if let Some(v) = obj.get("x") {
        d.x = number(v, &format!("{path}.x"))?;
    }
    if let Some(v) = obj.get("y") {
        d.y = number(v, &format!("{path}.y"))?;
    }
    if let Some(v) = obj.get("color") {
        let cpath = format!("{path}.color");
        let items = array(v, &cpath)?;
        if items.len() != 3 {
            return Err(KbError::schema(cpath, "expected [r, g, b]"));
        }
        for (slot, item) in d.color.iter_mut().zip(items) {
            *slot = item
                .as_u64()
                .and_then(|c| u8::try_from(c).ok())
                .ok_or_else(|| KbError::schema(&cpath, "color channels are integers in 0..=255"))?;
        }
    }
    if let Some(v) = obj.get("shade") {
        d.shade = number(v, &format!("{path}.shade"))?;
    }
    Ok(d)
}

/// Table sizes follow from the parents' cardinalities, so a mismatch is a
/// schema error. Skipped when ids are ambiguous or parents unresolved;
/// validation reports those.
fn check_table_shapes(nodes: &[Node]) -> Result<(), KbError> {
    let mut card: HashMap<&str, Option<usize>> = HashMap::new();
    for n in nodes {
        if card.insert(n.id().as_str(), n.cardinality()).is_some() {
            return Ok(());
        }
    }
    for (i, n) in nodes.iter().enumerate() {
        let parent_cards: Option<Vec<usize>> =
            n.parents().iter().map(|p| card.get(p.as_str()).copied().flatten()).collect();
        let Some(parent_cards) = parent_cards else { continue };
        let expected = config_count(&parent_cards);
        match n {
            Node::Chance(c) => {
                let path = format!("$.nodes[{i}].cpt");
                if c.cpt.rows.len() != expected {
                    return Err(KbError::schema(
                        path,
                        format!(
                            "expected {expected} {} (one per parent configuration), found {}",
                            if expected == 1 { "row" } else { "rows" },
                            c.cpt.rows.len()
                        ),
                    ));
                }
                if let Some(r) = c.cpt.rows.iter().position(|row| row.len() != c.states.len()) {
                    return Err(KbError::schema(
                        format!("{path}[{r}]"),
                        format!(
                            "expected {} entries (one per state), found {}",
                            c.states.len(),
                            c.cpt.rows[r].len()
                        ),
                    ));
                }
            }
            Node::Value(v) if v.utilities.entries.len() != expected => {
                return Err(KbError::schema(
                    format!("$.nodes[{i}].utilities"),
                    format!(
                        "expected {expected} {} (one per parent configuration), found {}",
                        if expected == 1 { "entry" } else { "entries" },
                        v.utilities.entries.len()
                    ),
                ));
            }
            _ => {}
        }
    }
    Ok(())
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, KbError> {
    obj.get(key).ok_or_else(|| KbError::schema(path, format!("missing required key {key:?}")))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, KbError> {
    v.as_object().ok_or_else(|| KbError::schema(path, "expected an object"))
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>, KbError> {
    v.as_array().ok_or_else(|| KbError::schema(path, "expected an array"))
}

fn string<'a>(v: &'a Value, path: &str) -> Result<&'a str, KbError> {
    v.as_str().ok_or_else(|| KbError::schema(path, "expected a string"))
}

fn number(v: &Value, path: &str) -> Result<f64, KbError> {
    v.as_f64().ok_or_else(|| KbError::schema(path, "expected a number"))
}

fn strings(v: &Value, path: &str) -> Result<Vec<String>, KbError> {
    array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, s)| string(s, &format!("{path}[{i}]")).map(str::to_owned))
        .collect()
}

fn numbers(v: &Value, path: &str) -> Result<Vec<f64>, KbError> {
    array(v, path)?.iter().enumerate().map(|(i, x)| number(x, &format!("{path}[{i}]"))).collect()
}

fn reject_unknown(obj: &Map<String, Value>, known: &[&str], path: &str) -> Result<(), KbError> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(KbError::schema(path, format!("unknown key {k:?}"))),
        None => Ok(()),
    }
}

/// Keys outside `known`. Keys in `misplaced` belong to another node kind
/// and are always an error.
fn extras(
    obj: &Map<String, Value>,
    known: &[&str],
    misplaced: &[&str],
    path: &str,
    mode: Mode,
) -> Result<Extensions, KbError> {
    let mut out = Extensions::new();
    for (k, v) in obj {
        if known.contains(&k.as_str()) {
            continue;
        }
        if misplaced.contains(&k.as_str()) || mode == Mode::Strict {
            let why = if misplaced.contains(&k.as_str()) { "not allowed here" } else { "unknown key" };
            return Err(KbError::schema(path, format!("{why} {k:?}")));
        }
        out.insert(k.clone(), v.clone());
    }
    Ok(out)
}

/// Canonical text of a network. Never fails; invalid networks are written
/// as they are.
pub fn serialize(network: &Network) -> String {
    let mut nodes: Vec<&Node> = network.nodes.iter().collect();
    nodes.sort_by(|a, b| a.id().cmp(b.id()));

    let mut top = vec![
        ("format".to_owned(), quote(FORMAT)),
        ("version".to_owned(), VERSION.to_string()),
        ("name".to_owned(), quote(&network.name)),
        ("kind".to_owned(), quote(&network.kind.to_string())),
        ("nodes".to_owned(), block('[', ']', nodes.iter().map(|n| node_text(n, 4)).collect(), 2)),
    ];
    top.extend(extension_entries(&network.extensions));
    let mut out = object_text(top, 0);
    out.push('\n');
    out
}

fn node_text(node: &Node, indent: usize) -> String {
    let kind = match node {
        Node::Chance(_) => "chance",
        Node::Decision(_) => "decision",
        Node::Value(_) => "value",
    };
    let mut entries = vec![("id".to_owned(), quote(node.id().as_str())), ("kind".to_owned(), quote(kind))];
    match node {
        Node::Chance(c) => entries.push(("states".to_owned(), inline(c.states.iter().map(|s| quote(s))))),
        Node::Decision(d) => {
            entries.push(("alternatives".to_owned(), inline(d.alternatives.iter().map(|s| quote(s)))))
        }
        Node::Value(_) => {}
    }
    entries.push(("parents".to_owned(), inline(node.parents().iter().map(|p| quote(p.as_str())))));
    match node {
        Node::Chance(c) => {
            let rows = c.cpt.rows.iter().map(|row| inline(row.iter().map(|&p| number_text(p)))).collect();
            entries.push(("cpt".to_owned(), block('[', ']', rows, indent + 2)));
        }
        Node::Value(v) => entries
            .push(("utilities".to_owned(), inline(v.utilities.entries.iter().map(|&u| number_text(u))))),
        Node::Decision(_) => {}
    }
    let meta = node.meta();
    let d = &meta.display;
    let display = format!(
        "{{\"x\": {}, \"y\": {}, \"color\": {}, \"shade\": {}}}",
        number_text(d.x),
        number_text(d.y),
        inline(d.color.iter().map(u8::to_string)),
        number_text(d.shade),
    );
    let meta_entries = vec![
        ("name".to_owned(), quote(&meta.name)),
        ("question".to_owned(), quote(&meta.question)),
        ("description".to_owned(), quote(&meta.description)),
        ("display".to_owned(), display),
    ];
    entries.push(("meta".to_owned(), object_text(meta_entries, indent + 2)));
    entries.extend(extension_entries(node.extensions()));
    object_text(entries, indent)
}

fn extension_entries(extensions: &Extensions) -> impl Iterator<Item = (String, String)> + '_ {
    extensions.iter().map(|(k, v)| (k.clone(), serde_json::to_string(v).expect("JSON values serialize")))
}

/// `{ "key": value, ... }` across lines, closing brace at `indent`.
fn object_text(entries: Vec<(String, String)>, indent: usize) -> String {
    let items = entries.into_iter().map(|(k, v)| format!("{}: {v}", quote(&k))).collect();
    block('{', '}', items, indent)
}

fn block(open: char, close: char, items: Vec<String>, indent: usize) -> String {
    if items.is_empty() {
        return format!("{open}{close}");
    }
    let pad = " ".repeat(indent + 2);
    let body: Vec<String> = items.into_iter().map(|item| format!("{pad}{item}")).collect();
    format!("{open}\n{}\n{}{close}", body.join(",\n"), " ".repeat(indent))
}

fn inline(items: impl Iterator<Item = String>) -> String {
    format!("[{}]", items.collect::<Vec<_>>().join(", "))
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Shortest decimal that reads back to `x`; integral values drop the
/// trailing `.0`. Negative zero keeps it so its sign survives.
pub fn number_text(x: f64) -> String {
    let s = serde_json::to_string(&x).expect("floats serialize");
    match s.strip_suffix(".0") {
        Some(int) if s != "-0.0" => int.to_owned(),
        _ => s,
    }
}
