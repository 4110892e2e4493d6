//! Scalar values and the canonical tabular interchange format.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Int,
    Real,
    Text,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Int => "int",
            Tag::Real => "real",
            Tag::Text => "text",
        }
    }

    pub fn parse(s: &str) -> Option<Tag> {
        match s {
            "int" => Some(Tag::Int),
            "real" => Some(Tag::Real),
            "text" => Some(Tag::Text),
            _ => None,
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Tag::Int | Tag::Real)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum Value {
    Null,
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    pub fn tag(&self) -> Option<Tag> {
        match self {
            Value::Null => None,
            Value::Int(_) => Some(Tag::Int),
            Value::Real(_) => Some(Tag::Real),
            Value::Text(_) => Some(Tag::Text),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            _ => None,
        }
    }

    pub fn text(s: impl Into<String>) -> Value {
        Value::Text(s.into())
    }

    /// Comparison with query semantics: null sorts below everything, integers
    /// and reals compare numerically, any other cross-tag pair is an error.
    pub fn compare(&self, other: &Value) -> Result<Ordering> {
        match (self, other) {
            (Value::Null, Value::Null) => Ok(Ordering::Equal),
            (Value::Null, _) => Ok(Ordering::Less),
            (_, Value::Null) => Ok(Ordering::Greater),
            (Value::Int(a), Value::Int(b)) => Ok(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Ok(a.cmp(b)),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(x.total_cmp(&y)),
                _ => Err(Error::Type(format!(
                    "cannot compare {} with {}",
                    a.tag().map_or("null", Tag::as_str),
                    b.tag().map_or("null", Tag::as_str)
                ))),
            },
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Int(_) | Value::Real(_) => 1,
            Value::Text(_) => 2,
        }
    }

    /// Literal lexeme as written in the query languages.
    pub fn lexeme(&self) -> String {
        match self {
            Value::Null => "NULL".to_string(),
            Value::Int(i) => i.to_string(),
            Value::Real(r) => format_real(*r),
            Value::Text(s) => format!("'{}'", s.replace('\'', "''")),
        }
    }
}

/// Shortest round-tripping representation that still lexes as a decimal.
pub fn format_real(r: f64) -> String {
    let s = format!("{r:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Total order used for sorting and keys: null < numbers < text. Integers and
// reals interleave numerically; equal magnitudes order Int before Real so the
// order stays consistent with Eq.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => normalize_zero(*a).total_cmp(&normalize_zero(*b)),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Int(a), Value::Real(b)) => (*a as f64).total_cmp(&normalize_zero(*b)).then(Ordering::Less),
            (Value::Real(a), Value::Int(b)) => normalize_zero(*a).total_cmp(&(*b as f64)).then(Ordering::Greater),
            (a, b) => a.rank().cmp(&b.rank()),
        }
    }
}

fn normalize_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Null => 0u8.hash(state),
            Value::Int(i) => {
                1u8.hash(state);
                i.hash(state);
            }
            Value::Real(r) => {
                2u8.hash(state);
                normalize_zero(*r).to_bits().hash(state);
            }
            Value::Text(s) => {
                3u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => f.write_str(&format_real(*r)),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub tag: Tag,
}

impl Column {
    pub fn new(name: impl Into<String>, tag: Tag) -> Self {
        Column { name: name.into(), tag }
    }
}

pub type Row = Vec<Value>;

/// Schema plus rows; the value every engine, cast and plan step exchanges.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTable {
    pub schema: Vec<Column>,
    pub rows: Vec<Row>,
}

impl CanonicalTable {
    pub fn new(schema: Vec<Column>, rows: Vec<Row>) -> Self {
        CanonicalTable { schema, rows }
    }

    pub fn empty(schema: Vec<Column>) -> Self {
        CanonicalTable {
            schema,
            rows: Vec::new(),
        }
    }

    /// Build from `(name, tag)` pairs.
    pub fn with_columns(cols: &[(&str, Tag)], rows: Vec<Row>) -> Self {
        let schema = cols.iter().map(|(n, t)| Column::new(*n, *t)).collect();
        CanonicalTable { schema, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.schema.iter().map(|c| c.name.as_str()).collect()
    }

    /// Every row has one value per column, of the column's tag or null, and
    /// no real is NaN.
    pub fn check_conformance(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.schema.len() {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {} columns",
                    row.len(),
                    self.schema.len()
                )));
            }
            for (v, col) in row.iter().zip(&self.schema) {
                if let Value::Real(r) = v {
                    if r.is_nan() {
                        return Err(Error::Schema(format!("NaN in column `{}`", col.name)));
                    }
                }
                if let Some(t) = v.tag() {
                    if t != col.tag {
                        return Err(Error::Schema(format!(
                            "row {i}: column `{}` expects {}, found {}",
                            col.name, col.tag, t
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    pub fn sort(&mut self) {
        self.rows.sort();
    }

    /// Multiset equality of rows (schema tags must agree, names may differ).
    pub fn bag_eq(&self, other: &CanonicalTable) -> bool {
        self.tags() == other.tags() && self.sorted_rows() == other.sorted_rows()
    }

    /// Multiset equality with reals compared at a relative tolerance.
    /// Column names are ignored; integer and real columns are interchangeable.
    pub fn bag_eq_approx(&self, other: &CanonicalTable, rel_tol: f64) -> bool {
        if self.schema.len() != other.schema.len() || self.rows.len() != other.rows.len() {
            return false;
        }
        let a = self.sorted_rows();
        let b = other.sorted_rows();
        a.iter()
            .zip(&b)
            .all(|(ra, rb)| ra.iter().zip(rb).all(|(x, y)| values_approx_eq(x, y, rel_tol)))
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.schema.iter().map(|c| c.tag).collect()
    }
}

pub fn values_approx_eq(x: &Value, y: &Value, rel_tol: f64) -> bool {
    match (x, y) {
        (Value::Real(_), _) | (_, Value::Real(_)) => match (x.as_f64(), y.as_f64()) {
            (Some(a), Some(b)) => {
                let scale = a.abs().max(b.abs());
                (a - b).abs() <= rel_tol * scale || a == b
            }
            _ => false,
        },
        _ => x == y,
    }
}

impl fmt::Display for CanonicalTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header: Vec<String> = self.schema.iter().map(|c| format!("{}:{}", c.name, c.tag)).collect();
        writeln!(f, "{}", header.join(" | "))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "{}", cells.join(" | "))?;
        }
        Ok(())
    }
}
