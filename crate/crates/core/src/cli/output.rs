//! Serialization of reports as CSV or JSON.
//!
//! Finite numbers use the shortest decimal form that parses back to the
//! same double. Infinities become the string `inf`. Information columns
//! are stored in nats and converted to bits here and nowhere else.

use serde_json::{Map, Number, Value};

pub const CSV_SCHEMA_LINE: &str = "# schema=1";

/// Shortest round-trip decimal form, or `inf`, `-inf`, `nan`.
pub fn fmt_num(x: f64) -> String {
    match Number::from_f64(x) {
        Some(n) => n.to_string(),
        None if x == f64::INFINITY => "inf".into(),
        None if x == f64::NEG_INFINITY => "-inf".into(),
        None => "nan".into(),
    }
}

pub fn json_num(x: f64) -> Value {
    match Number::from_f64(x) {
        Some(n) => Value::Number(n),
        None => Value::String(fmt_num(x)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Units {
    pub bits: bool,
}

impl Units {
    /// Converts an information value given in nats.
    pub fn info(&self, nats: f64) -> f64 {
        if self.bits {
            nats / std::f64::consts::LN_2
        } else {
            nats
        }
    }

    /// Renames a `*_nats` key for the active unit.
    pub fn key(&self, name: &str) -> String {
        match name.strip_suffix("_nats") {
            Some(stem) if self.bits => format!("{stem}_bits"),
            _ => name.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    /// Information quantity in nats.
    Info(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn to_csv(&self, units: Units) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Info(x) => fmt_num(units.info(*x)),
            Cell::Int(i) => i.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn to_json(&self, units: Units) -> Value {
        match self {
            Cell::Num(x) => json_num(*x),
            Cell::Info(x) => json_num(units.info(*x)),
            Cell::Int(i) => Value::from(*i),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

/// Rows under a fixed column order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, units: Units) -> String {
        let mut out = String::from(CSV_SCHEMA_LINE);
        out.push('\n');
        let header: Vec<String> = self.columns.iter().map(|c| units.key(c)).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| c.to_csv(units)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn row_object(&self, i: usize, units: Units) -> Value {
        let mut obj = Map::new();
        for (c, cell) in self.columns.iter().zip(&self.rows[i]) {
            obj.insert(units.key(c), cell.to_json(units));
        }
        Value::Object(obj)
    }

    pub fn to_json_rows(&self, units: Units) -> Value {
        Value::Array((0..self.rows.len()).map(|i| self.row_object(i, units)).collect())
    }
}

/// Pretty JSON with a trailing newline.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}
