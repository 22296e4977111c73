//! JSON Hamiltonian files:
//!
//! ```json
//! {"n": 2, "name": "tfim", "terms": [{"coeff": -1.0, "pauli": "ZZ"}, {"coeff": -0.5, "pauli": "XI"}]}
//! ```
//!
//! Pauli strings are read leftmost character = qubit 0. Duplicate strings are
//! merged, keeping the position of the first occurrence.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{QiteError, Result};
use crate::pauli::{PauliString, WeightedPauliSum};

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianFile {
    pub hamiltonian: WeightedPauliSum,
    pub name: Option<String>,
    pub description: Option<String>,
}

fn file_error(location: impl Into<String>, message: impl Into<String>) -> QiteError {
    QiteError::HamiltonianFile { location: location.into(), message: message.into() }
}

fn optional_string(obj: &Map<String, Value>, key: &str) -> Result<Option<String>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(file_error(format!("field \"{key}\""), "expected a string")),
    }
}

pub fn parse_hamiltonian_file(text: &str) -> Result<HamiltonianFile> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root.as_object().ok_or_else(|| file_error("top level", "expected a JSON object"))?;
    let n = match obj.get("n") {
        Some(v) => v
            .as_u64()
            .ok_or_else(|| file_error("field \"n\"", format!("expected a positive integer, found {v}")))?
            as usize,
        None => return Err(file_error("field \"n\"", "missing qubit count")),
    };
    let terms = obj
        .get("terms")
        .ok_or_else(|| file_error("field \"terms\"", "missing term list"))?
        .as_array()
        .ok_or_else(|| file_error("field \"terms\"", "expected an array"))?;

    let mut labels = Vec::with_capacity(terms.len());
    for (index, entry) in terms.iter().enumerate() {
        let at = |field: &str| format!("term {index}, field \"{field}\"");
        let entry = entry.as_object().ok_or_else(|| file_error(format!("term {index}"), "expected an object"))?;
        let coeff = match entry.get("coeff") {
            Some(Value::Number(num)) => num.as_f64().ok_or_else(|| file_error(at("coeff"), "not representable as f64"))?,
            Some(other) => {
                return Err(file_error(at("coeff"), format!("coefficient must be a real number, found {other}")))
            }
            None => return Err(file_error(at("coeff"), "missing coefficient")),
        };
        if !coeff.is_finite() {
            return Err(file_error(at("coeff"), "coefficient must be finite"));
        }
        let label = match entry.get("pauli") {
            Some(Value::String(s)) => s,
            Some(other) => return Err(file_error(at("pauli"), format!("expected a string, found {other}"))),
            None => return Err(file_error(at("pauli"), "missing Pauli string")),
        };
        if label.chars().count() != n {
            return Err(file_error(
                at("pauli"),
                format!("string {label:?} has length {} but n = {n}", label.chars().count()),
            ));
        }
        let string: PauliString = label.parse().map_err(|e| match e {
            QiteError::InvalidPauliChar { ch, position } => {
                file_error(at("pauli"), format!("unknown Pauli character {ch:?} at position {position} in {label:?}"))
            }
            other => other,
        })?;
        labels.push((coeff, string));
    }
    Ok(HamiltonianFile {
        hamiltonian: WeightedPauliSum::new(n, labels)?,
        name: optional_string(obj, "name")?,
        description: optional_string(obj, "description")?,
    })
}

pub fn parse_hamiltonian(text: &str) -> Result<WeightedPauliSum> {
    Ok(parse_hamiltonian_file(text)?.hamiltonian)
}

pub fn load_hamiltonian(path: &Path) -> Result<HamiltonianFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_hamiltonian_file(&text)
}

pub fn render_hamiltonian(h: &WeightedPauliSum, name: Option<&str>) -> String {
    let terms: Vec<Value> =
        h.terms().iter().map(|t| json!({ "coeff": t.coeff, "pauli": t.string.to_string() })).collect();
    let mut root = json!({ "n": h.qubit_count(), "terms": terms });
    if let Some(name) = name {
        root["name"] = json!(name);
    }
    serde_json::to_string_pretty(&root).expect("JSON values always serialize")
}
