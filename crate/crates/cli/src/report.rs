//! Tabular results with a JSON summary; rendered as JSON or CSV.

use oqrw_core::linalg::CMat;
use oqrw_core::model::matrix_to_document;
use serde_json::{json, Map, Value};

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Scalar results and metadata; CSV output drops it.
    pub summary: Value,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new(), summary: json!({}) }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// The summary object with the rows added under `"rows"`.
    pub fn to_json(&self) -> serde_json::Result<String> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect::<Map<_, _>>()))
            .collect();
        let mut out = match &self.summary {
            Value::Object(m) => m.clone(),
            other => Map::from_iter([("summary".to_string(), other.clone())]),
        };
        out.insert("rows".into(), Value::Array(rows));
        let mut text = serde_json::to_string_pretty(&Value::Object(out))?;
        text.push('\n');
        Ok(text)
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Rows of `[re, im]` pairs.
pub fn matrix_json(m: &CMat) -> Value {
    serde_json::to_value(matrix_to_document(m)).expect("matrices always serialize")
}
