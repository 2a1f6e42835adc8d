//! JSON readers and writers for complexes and maps.
//!
//! Complex: `{"vertices": [..], "simplices": [[..], ..], "edge_lengths": {"a|b": len, ..}}`.
//! Map: `{"ambient_dim": N, "vertex_images": {"a": [..], ..}}`.
//! Writers are deterministic: vertices, simplices and length keys are sorted by id,
//! so writing a parsed file reproduces it byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::complex::{EdgeLengths, SimplicialComplex};
use crate::error::{Error, Result};
use crate::plmap::PLMap;

fn schema(path: &str, element: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), element: element.into() }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| schema(&path.display().to_string(), format!("unreadable file ({e})")))
}

fn parse_value(text: &str, path: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(schema(path, "top level must be an object")),
        Err(e) => Err(schema(path, format!("invalid JSON at line {} column {}", e.line(), e.column()))),
    }
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key).ok_or_else(|| schema(path, format!("missing `{key}`")))
}

fn string_list(v: &Value, path: &str, element: &str) -> Result<Vec<String>> {
    let arr = v.as_array().ok_or_else(|| schema(path, format!("`{element}` must be an array of strings")))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| x.as_str().map(str::to_string).ok_or_else(|| schema(path, format!("{element}[{i}] must be a string"))))
        .collect()
}

fn number(v: &Value, path: &str, element: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| schema(path, format!("{element} must be a number")))
}

/// Parses a complex; `path` names the source in error messages.
pub fn parse_complex(text: &str, path: &str) -> Result<SimplicialComplex> {
    let obj = parse_value(text, path)?;
    let vertices = string_list(field(&obj, "vertices", path)?, path, "vertices")?;
    let tops = field(&obj, "simplices", path)?
        .as_array()
        .ok_or_else(|| schema(path, "`simplices` must be an array"))?
        .iter()
        .enumerate()
        .map(|(i, s)| string_list(s, path, &format!("simplices[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    let raw = field(&obj, "edge_lengths", path)?.as_object().ok_or_else(|| schema(path, "`edge_lengths` must be an object"))?;
    let mut lengths = EdgeLengths::new();
    for (key, v) in raw {
        let element = format!("edge_lengths.{key}");
        let (a, b) = key.split_once('|').ok_or_else(|| schema(path, format!("{element}: key must be `a|b`")))?;
        if b.contains('|') {
            return Err(schema(path, format!("{element}: key must be `a|b`")));
        }
        let len = number(v, path, &element)?;
        let pair = if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
        if lengths.insert(pair, len).is_some() {
            return Err(schema(path, format!("{element}: duplicate edge")));
        }
    }
    SimplicialComplex::build(&vertices, &tops, &lengths)
}

pub fn read_complex(path: &Path) -> Result<Arc<SimplicialComplex>> {
    let text = read_text(path)?;
    Ok(Arc::new(parse_complex(&text, &path.display().to_string())?))
}

pub fn complex_to_value(c: &SimplicialComplex) -> Value {
    let mut vertices = c.ids().to_vec();
    vertices.sort();
    let mut simplices: Vec<Vec<String>> = c
        .maximal_simplices()
        .iter()
        .map(|s| {
            let mut ids = c.simplex_ids(s);
            ids.sort();
            ids
        })
        .collect();
    simplices.sort();
    let lengths: BTreeMap<String, f64> = c
        .edges()
        .iter()
        .map(|e| {
            let (a, b) = (c.id(e[0]), c.id(e[1]));
            let key = if a <= b { format!("{a}|{b}") } else { format!("{b}|{a}") };
            (key, c.length(e[0], e[1]))
        })
        .collect();
    json!({ "vertices": vertices, "simplices": simplices, "edge_lengths": lengths })
}

pub fn complex_to_json(c: &SimplicialComplex) -> String {
    let mut s = serde_json::to_string_pretty(&complex_to_value(c)).expect("complex serializes");
    s.push('\n');
    s
}

/// Parses a map on `domain`; every vertex needs exactly one image of length `ambient_dim`.
pub fn parse_map(text: &str, path: &str, domain: Arc<SimplicialComplex>) -> Result<PLMap> {
    let obj = parse_value(text, path)?;
    let n = field(&obj, "ambient_dim", path)?
        .as_u64()
        .ok_or_else(|| schema(path, "`ambient_dim` must be a non-negative integer"))? as usize;
    let raw = field(&obj, "vertex_images", path)?.as_object().ok_or_else(|| schema(path, "`vertex_images` must be an object"))?;
    let mut images = HashMap::with_capacity(raw.len());
    for (id, v) in raw {
        let element = format!("vertex_images.{id}");
        if domain.vertex_index(id).is_err() {
            return Err(schema(path, format!("{element}: vertex not in the complex")));
        }
        let coords = v.as_array().ok_or_else(|| schema(path, format!("{element} must be an array")))?;
        if coords.len() != n {
            return Err(schema(path, format!("{element} has {} coordinates, expected {n}", coords.len())));
        }
        let p = coords
            .iter()
            .enumerate()
            .map(|(i, x)| number(x, path, &format!("{element}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        images.insert(id.clone(), p);
    }
    if let Some(id) = domain.ids().iter().find(|id| !images.contains_key(*id)) {
        return Err(schema(path, format!("vertex_images.{id}: missing")));
    }
    PLMap::from_ids(domain, n, &images)
}

pub fn read_map(path: &Path, domain: Arc<SimplicialComplex>) -> Result<PLMap> {
    let text = read_text(path)?;
    parse_map(&text, &path.display().to_string(), domain)
}

pub fn map_to_value(f: &PLMap) -> Value {
    let dom = f.domain();
    let images: BTreeMap<&str, &[f64]> = (0..dom.vertex_count()).map(|v| (dom.id(v), f.image(v))).collect();
    json!({ "ambient_dim": f.ambient_dim(), "vertex_images": images })
}

pub fn map_to_json(f: &PLMap) -> String {
    let mut s = serde_json::to_string_pretty(&map_to_value(f)).expect("map serializes");
    s.push('\n');
    s
}
