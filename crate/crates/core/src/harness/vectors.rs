// SPDX-License-Identifier: Apache-2.0
//! Reading test-input sequences out of model responses.

use serde_json::Value;
use thiserror::Error;

use crate::model::{BitVec, ProblemSpec, StimulusVector};

/// Longest input sequence accepted from a response.
pub const MAX_VECTORS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorError {
    #[error("test inputs are not valid JSON: {0}")]
    Json(String),
    #[error("test inputs must be a nonempty JSON list")]
    NotAList,
    #[error("too many test vectors ({0}, limit {MAX_VECTORS})")]
    TooMany(usize),
    #[error("vector {index}: {reason}")]
    Bad { index: usize, reason: String },
}

fn lenient(text: &str) -> String {
    let swapped = text.replace('\'', "\"").replace("True", "true").replace("False", "false");
    // drop trailing commas before a closing bracket
    let mut out = String::with_capacity(swapped.len());
    let chars: Vec<char> = swapped.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some(']') | Some('}')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

fn int_value(v: &Value) -> Option<u64> {
    match v {
        Value::Bool(b) => Some(*b as u64),
        Value::Number(n) => n.as_u64(),
        Value::String(s) => crate::model::BitVec::parse(s, 64).ok().map(|b| b.value()),
        _ => None,
    }
}

/// Parses a JSON list of per-cycle input maps.
///
/// Python-flavoured literals (single quotes, `True`, trailing commas) are
/// tolerated. With exactly one data input a flat list of integers is also
/// accepted.
pub fn parse_vectors(text: &str, spec: &ProblemSpec) -> Result<Vec<StimulusVector>, VectorError> {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => serde_json::from_str(&lenient(text)).map_err(|_| VectorError::Json(e.to_string()))?,
    };
    let Value::Array(items) = value else {
        return Err(VectorError::NotAList);
    };
    if items.is_empty() {
        return Err(VectorError::NotAList);
    }
    if items.len() > MAX_VECTORS {
        return Err(VectorError::TooMany(items.len()));
    }
    let inputs: Vec<_> = spec.inputs().collect();
    let mut out = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let bad = |reason: String| VectorError::Bad { index, reason };
        let mut vec = StimulusVector::new();
        match item {
            Value::Object(map) => {
                for key in map.keys() {
                    if !inputs.iter().any(|p| &p.name == key) {
                        return Err(bad(format!("`{key}` is not a data input")));
                    }
                }
                for port in &inputs {
                    let raw = map.get(&port.name).ok_or_else(|| bad(format!("missing input `{}`", port.name)))?;
                    let v = int_value(raw).ok_or_else(|| bad(format!("`{}` is not a non-negative integer", port.name)))?;
                    let bits = BitVec::new(port.width, v).map_err(|e| bad(format!("`{}`: {e}", port.name)))?;
                    vec.insert(port.name.clone(), bits);
                }
            }
            scalar if inputs.len() == 1 => {
                let port = inputs[0];
                let v = int_value(scalar).ok_or_else(|| bad("not a non-negative integer".into()))?;
                let bits = BitVec::new(port.width, v).map_err(|e| bad(format!("`{}`: {e}", port.name)))?;
                vec.insert(port.name.clone(), bits);
            }
            _ => return Err(bad("expected an object mapping input names to integers".into())),
        }
        out.push(vec);
    }
    Ok(out)
}
