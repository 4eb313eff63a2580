//! JSON forms: `{ "axes": [...], "values": nested row-major arrays }`, entries
//! as numbers or `"num/den"` strings.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::alphabet::Alphabet;
use super::num::{format_rational, parse_rational, Prob, Rational};
use super::pmf::JointPmf;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmfJson {
    pub axes: Vec<Alphabet>,
    pub values: Value,
}

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_string(), message: message.into() }
}

/// Reads one scalar entry exactly. Numbers are read from their decimal text.
pub fn entry_to_rational(v: &Value, path: &str) -> Result<Rational> {
    match v {
        Value::Number(n) => parse_rational(&n.to_string())
            .ok_or_else(|| parse_err(path, format!("unreadable number {n}"))),
        Value::String(s) => {
            parse_rational(s).ok_or_else(|| parse_err(path, format!("expected \"num/den\", got \"{s}\"")))
        }
        other => Err(parse_err(path, format!("expected a number, found {}", kind(other)))),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Flattens a nested array of the given shape (row-major). A flat array of the
/// right total length is also accepted.
pub fn flatten_nested(v: &Value, shape: &[usize], path: &str) -> Result<Vec<Rational>> {
    let total: usize = shape.iter().product();
    if let Value::Array(items) = v {
        if shape.len() > 1 && items.len() == total && items.iter().all(|x| !x.is_array()) {
            return items
                .iter()
                .enumerate()
                .map(|(i, x)| entry_to_rational(x, &format!("{path}[{i}]")))
                .collect();
        }
    }
    let mut out = Vec::with_capacity(total);
    walk(v, shape, path, &mut out)?;
    Ok(out)
}

fn walk(v: &Value, shape: &[usize], path: &str, out: &mut Vec<Rational>) -> Result<()> {
    match shape.split_first() {
        None => {
            out.push(entry_to_rational(v, path)?);
            Ok(())
        }
        Some((&n, rest)) => {
            let items = v
                .as_array()
                .ok_or_else(|| parse_err(path, format!("expected an array, found {}", kind(v))))?;
            if items.len() != n {
                return Err(parse_err(path, format!("expected {n} entries, found {}", items.len())));
            }
            for (i, x) in items.iter().enumerate() {
                walk(x, rest, &format!("{path}[{i}]"), out)?;
            }
            Ok(())
        }
    }
}

impl PmfJson {
    pub fn from_value(v: &Value) -> Result<Self> {
        serde_json::from_value(v.clone()).map_err(|e| parse_err("$", e.to_string()))
    }

    /// Exact pmf; entries must sum to exactly one.
    pub fn to_exact(&self) -> Result<JointPmf<Rational>> {
        for (i, a) in self.axes.iter().enumerate() {
            a.validate().map_err(|e| parse_err(&format!("$.axes[{i}]"), e.to_string()))?;
        }
        let shape: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        let vals = flatten_nested(&self.values, &shape, "$.values")?;
        JointPmf::new(self.axes.clone(), vals).map_err(|e| parse_err("$.values", e.to_string()))
    }

    /// Float pmf; entries must sum to one within 1e-12.
    pub fn to_float(&self) -> Result<JointPmf<f64>> {
        for (i, a) in self.axes.iter().enumerate() {
            a.validate().map_err(|e| parse_err(&format!("$.axes[{i}]"), e.to_string()))?;
        }
        let shape: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        let vals: Vec<f64> = flatten_nested(&self.values, &shape, "$.values")?
            .iter()
            .map(|r| r.to_f64())
            .collect();
        JointPmf::new(self.axes.clone(), vals).map_err(|e| parse_err("$.values", e.to_string()))
    }

    pub fn from_pmf<T: Prob + JsonEntry>(p: &JointPmf<T>) -> Self {
        Self { axes: p.axes().to_vec(), values: nest(p.values(), &p.shape()) }
    }
}

/// Scalar serialization: floats as numbers, rationals as `"num/den"`.
pub trait JsonEntry {
    fn to_json(&self) -> Value;
}

impl JsonEntry for f64 {
    fn to_json(&self) -> Value {
        serde_json::Number::from_f64(*self).map_or(Value::Null, Value::Number)
    }
}

impl JsonEntry for Rational {
    fn to_json(&self) -> Value {
        Value::String(format_rational(self))
    }
}

/// Nests a flat row-major slice into arrays of `shape`.
pub fn nest<T: JsonEntry>(values: &[T], shape: &[usize]) -> Value {
    match shape.split_first() {
        None => values[0].to_json(),
        Some((&n, rest)) => {
            let chunk: usize = rest.iter().product();
            Value::Array((0..n).map(|i| nest(&values[i * chunk..(i + 1) * chunk], rest)).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reads_nested_and_rational_strings() {
        let v = json!({
            "axes": [{"name": "X", "size": 2}, {"name": "Y", "size": 2}],
            "values": [["1/4", 0.25], [0.25, "1/4"]]
        });
        let p = PmfJson::from_value(&v).unwrap().to_exact().unwrap();
        assert_eq!(p.values()[1], Rational::from_ratio(1, 4));
        let back = PmfJson::from_pmf(&p);
        assert_eq!(back.values, json!([["1/4", "1/4"], ["1/4", "1/4"]]));
    }

    #[test]
    fn decimal_entries_are_exact() {
        let v = json!({"axes": [{"name": "X", "size": 3}], "values": [0.1, 0.2, 0.7]});
        assert!(PmfJson::from_value(&v).unwrap().to_exact().is_ok());
    }

    #[test]
    fn error_names_the_path() {
        let v = json!({
            "axes": [{"name": "X", "size": 2}, {"name": "Y", "size": 2}],
            "values": [[0.5, 0.0], [0.0, true]]
        });
        match PmfJson::from_value(&v).unwrap().to_exact() {
            Err(Error::Parse { path, .. }) => assert_eq!(path, "$.values[1][1]"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
