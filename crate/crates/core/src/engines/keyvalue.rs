//! Sorted key-value store of associative arrays with D4M-style algebra.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Bound;

use crate::error::{Error, Result};
use crate::lexer::{Cursor, TokenKind};
use crate::value::{CanonicalTable, Column, Tag, Value};

use super::{EngineModel, LoadOptions, NativeResult, ObjectMeta, StorageEngine};

/// Map from `(row, col)` to a value; all values share `val_tag`.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociativeArray {
    pub val_tag: Tag,
    pub entries: BTreeMap<(String, String), Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Semiring {
    PlusTimes,
    MinPlus,
    MaxTimes,
}

impl Semiring {
    pub fn parse(s: &str) -> Option<Semiring> {
        match s.to_ascii_lowercase().as_str() {
            "plus.times" => Some(Semiring::PlusTimes),
            "min.plus" => Some(Semiring::MinPlus),
            "max.times" => Some(Semiring::MaxTimes),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Semiring::PlusTimes => "plus.times",
            Semiring::MinPlus => "min.plus",
            Semiring::MaxTimes => "max.times",
        }
    }
}

impl fmt::Display for Semiring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EwiseOp {
    Plus,
    Min,
    Max,
}

impl EwiseOp {
    pub fn parse(s: &str) -> Option<EwiseOp> {
        match s.to_ascii_lowercase().as_str() {
            "plus" => Some(EwiseOp::Plus),
            "min" => Some(EwiseOp::Min),
            "max" => Some(EwiseOp::Max),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EwiseOp::Plus => "plus",
            EwiseOp::Min => "min",
            EwiseOp::Max => "max",
        }
    }
}

impl fmt::Display for EwiseOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl AssociativeArray {
    pub fn new(val_tag: Tag) -> Self {
        AssociativeArray {
            val_tag,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, row: &str, col: &str, v: Value) {
        self.entries.insert((row.to_string(), col.to_string()), v);
    }

    pub fn get(&self, row: &str, col: &str) -> Option<&Value> {
        self.entries.get(&(row.to_string(), col.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Build from a `(row:text, col:text, val)` table, whatever its column names.
    pub fn from_triples(table: &CanonicalTable) -> Result<Self> {
        if table.schema.len() != 3 || table.schema[0].tag != Tag::Text || table.schema[1].tag != Tag::Text {
            return Err(Error::Schema(
                "associative arrays need a (row:text, col:text, val) table".into(),
            ));
        }
        let mut a = AssociativeArray::new(table.schema[2].tag);
        for row in &table.rows {
            let (Value::Text(r), Value::Text(c)) = (&row[0], &row[1]) else {
                return Err(Error::Schema("null key in associative array".into()));
            };
            if r.is_empty() || c.is_empty() {
                return Err(Error::Schema("associative array keys must be non-empty".into()));
            }
            if row[2].is_null() {
                return Err(Error::Schema(format!("null value at ({r}, {c})")));
            }
            if a.entries.insert((r.clone(), c.clone()), row[2].clone()).is_some() {
                return Err(Error::Schema(format!("duplicate entry ({r}, {c})")));
            }
        }
        Ok(a)
    }

    pub fn to_table(&self) -> CanonicalTable {
        self.to_table_named("row", "col", "val")
    }

    pub fn to_table_named(&self, r: &str, c: &str, v: &str) -> CanonicalTable {
        CanonicalTable::new(
            vec![
                Column::new(r, Tag::Text),
                Column::new(c, Tag::Text),
                Column::new(v, self.val_tag),
            ],
            self.entries
                .iter()
                .map(|((r, c), v)| vec![Value::Text(r.clone()), Value::Text(c.clone()), v.clone()])
                .collect(),
        )
    }

    fn filtered(&self, keep: impl Fn(&str, &str, &Value) -> bool) -> AssociativeArray {
        AssociativeArray {
            val_tag: self.val_tag,
            entries: self
                .entries
                .iter()
                .filter(|((r, c), v)| keep(r, c, v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

fn numeric_result_tag(a: Tag, b: Tag) -> Tag {
    if a == Tag::Int && b == Tag::Int {
        Tag::Int
    } else {
        Tag::Real
    }
}

fn non_numeric(v: &Value) -> Error {
    Error::Type(format!("non-numeric value `{v}` in associative array operation"))
}

pub(crate) fn semiring_mul(s: Semiring, a: &Value, b: &Value) -> Result<Value> {
    let plus = s == Semiring::MinPlus;
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            let r = if plus { x.checked_add(*y) } else { x.checked_mul(*y) };
            r.map(Value::Int).ok_or_else(|| Error::Type("integer overflow".into()))
        }
        _ => {
            let x = a.as_f64().ok_or_else(|| non_numeric(a))?;
            let y = b.as_f64().ok_or_else(|| non_numeric(b))?;
            Ok(Value::Real(if plus { x + y } else { x * y }))
        }
    }
}

pub(crate) fn semiring_add(s: Semiring, acc: Value, v: Value) -> Result<Value> {
    match s {
        Semiring::PlusTimes => add_values(&acc, &v),
        Semiring::MinPlus => Ok(if v < acc { v } else { acc }),
        Semiring::MaxTimes => Ok(if v > acc { v } else { acc }),
    }
}

fn add_values(a: &Value, b: &Value) -> Result<Value> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x
            .checked_add(*y)
            .map(Value::Int)
            .ok_or_else(|| Error::Type("integer overflow".into())),
        _ => Ok(Value::Real(
            a.as_f64().ok_or_else(|| non_numeric(a))? + b.as_f64().ok_or_else(|| non_numeric(b))?,
        )),
    }
}

fn promote(v: Value, tag: Tag) -> Value {
    match (v, tag) {
        (Value::Int(i), Tag::Real) => Value::Real(i as f64),
        (v, _) => v,
    }
}

/// `C(r,c) = ⊕_k A(r,k) ⊗ B(k,c)` over inner keys present on both sides.
/// Contributions are reduced in ascending inner-key order.
pub fn assoc_matmul(a: &AssociativeArray, b: &AssociativeArray, s: Semiring) -> Result<AssociativeArray> {
    let tag = numeric_result_tag(a.val_tag, b.val_tag);
    let mut out = AssociativeArray::new(tag);
    let mut current_row: Option<&str> = None;
    let mut acc: BTreeMap<String, Value> = BTreeMap::new();
    let flush = |row: &str, acc: &mut BTreeMap<String, Value>, out: &mut AssociativeArray| {
        for (c, v) in std::mem::take(acc) {
            out.entries.insert((row.to_string(), c), promote(v, tag));
        }
    };
    for ((r, k), av) in &a.entries {
        if current_row != Some(r.as_str()) {
            if let Some(prev) = current_row {
                flush(prev, &mut acc, &mut out);
            }
            current_row = Some(r);
        }
        let lo = Bound::Included((k.clone(), String::new()));
        for ((bk, c), bv) in b.entries.range((lo, Bound::Unbounded)) {
            if bk != k {
                break;
            }
            let p = semiring_mul(s, av, bv)?;
            let next = match acc.remove(c) {
                None => p,
                Some(prev) => semiring_add(s, prev, p)?,
            };
            acc.insert(c.clone(), next);
        }
    }
    if let Some(prev) = current_row {
        flush(prev, &mut acc, &mut out);
    }
    Ok(out)
}

/// Union of entries; overlapping keys are combined with `op`.
pub fn assoc_ewise(a: &AssociativeArray, b: &AssociativeArray, op: EwiseOp) -> Result<AssociativeArray> {
    let tag = if a.val_tag == b.val_tag {
        a.val_tag
    } else if a.val_tag.is_numeric() && b.val_tag.is_numeric() {
        Tag::Real
    } else if a.is_empty() {
        b.val_tag
    } else if b.is_empty() {
        a.val_tag
    } else {
        return Err(Error::Type(format!(
            "cannot combine {} and {} associative arrays",
            a.val_tag, b.val_tag
        )));
    };
    let mut out = AssociativeArray::new(tag);
    for (k, v) in &a.entries {
        out.entries.insert(k.clone(), promote(v.clone(), tag));
    }
    for (k, bv) in &b.entries {
        let merged = match out.entries.get(k) {
            None => promote(bv.clone(), tag),
            Some(av) => {
                if !av.tag().is_some_and(Tag::is_numeric) {
                    return Err(non_numeric(av));
                }
                if !bv.tag().is_some_and(Tag::is_numeric) {
                    return Err(non_numeric(bv));
                }
                let v = match op {
                    EwiseOp::Plus => add_values(av, bv)?,
                    EwiseOp::Min => {
                        if bv < av {
                            bv.clone()
                        } else {
                            av.clone()
                        }
                    }
                    EwiseOp::Max => {
                        if bv > av {
                            bv.clone()
                        } else {
                            av.clone()
                        }
                    }
                };
                promote(v, tag)
            }
        };
        out.entries.insert(k.clone(), merged);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct KeyValueEngine {
    arrays: BTreeMap<String, AssociativeArray>,
}

enum KvQuery {
    Scan {
        obj: String,
        rows: Option<(String, String)>,
        cols: Option<(String, String)>,
    },
    Grep {
        obj: String,
        needle: String,
    },
    MatMul {
        a: String,
        b: String,
        semiring: Semiring,
    },
    Ewise {
        a: String,
        b: String,
        op: EwiseOp,
    },
}

fn parse_range(cur: &mut Cursor) -> Result<(String, String)> {
    let lo = cur.expect_dq_string()?;
    cur.expect(TokenKind::Colon)?;
    let hi = cur.expect_dq_string()?;
    Ok((lo, hi))
}

fn parse_kv(text: &str) -> Result<KvQuery> {
    let mut cur = Cursor::new(text)?;
    let q = if cur.eat_keyword("scan") {
        let (obj, _) = cur.expect_ident()?;
        let mut rows = None;
        let mut cols = None;
        if cur.eat_keyword("rows") {
            rows = Some(parse_range(&mut cur)?);
        }
        if cur.eat_keyword("cols") {
            cols = Some(parse_range(&mut cur)?);
        }
        KvQuery::Scan { obj, rows, cols }
    } else if cur.eat_keyword("grep") {
        let (obj, _) = cur.expect_ident()?;
        let needle = cur.expect_dq_string()?;
        KvQuery::Grep { obj, needle }
    } else if cur.eat_keyword("matmul") {
        let (a, _) = cur.expect_ident()?;
        let (b, _) = cur.expect_ident()?;
        let semiring = if cur.eat_keyword("semiring") {
            parse_semiring(&mut cur)?
        } else {
            Semiring::PlusTimes
        };
        KvQuery::MatMul { a, b, semiring }
    } else if cur.eat_keyword("ewise") {
        let (a, _) = cur.expect_ident()?;
        let (b, _) = cur.expect_ident()?;
        let span = cur.peek().span;
        let (name, _) = cur.expect_ident()?;
        let op = EwiseOp::parse(&name).ok_or_else(|| {
            Error::syntax(
                span,
                format!("unknown element-wise op `{name}`"),
                vec!["plus".into(), "min".into(), "max".into()],
            )
        })?;
        KvQuery::Ewise { a, b, op }
    } else {
        return Err(cur.unexpected(&["SCAN", "GREP", "MATMUL", "EWISE"]));
    };
    cur.expect_eof()?;
    Ok(q)
}

/// `plus.times`, `min.plus` or `max.times`.
pub(crate) fn parse_semiring(cur: &mut Cursor) -> Result<Semiring> {
    let start = cur.peek().span;
    let (a, _) = cur.expect_ident()?;
    cur.expect(TokenKind::Dot)?;
    let (b, _) = cur.expect_ident()?;
    let text = format!("{a}.{b}");
    Semiring::parse(&text).ok_or_else(|| {
        Error::syntax(
            start.join(cur.prev_span()),
            format!("unknown semiring `{text}`"),
            vec!["plus.times".into(), "min.plus".into(), "max.times".into()],
        )
    })
}

impl KeyValueEngine {
    pub fn array(&self, name: &str) -> Result<&AssociativeArray> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    fn run(&self, q: &KvQuery) -> Result<AssociativeArray> {
        match q {
            KvQuery::Scan { obj, rows, cols } => {
                let a = self.array(obj)?;
                let within = |k: &str, r: &Option<(String, String)>| {
                    r.as_ref().is_none_or(|(lo, hi)| lo.as_str() <= k && k <= hi.as_str())
                };
                Ok(a.filtered(|r, c, _| within(r, rows) && within(c, cols)))
            }
            KvQuery::Grep { obj, needle } => {
                let a = self.array(obj)?;
                Ok(a.filtered(|_, _, v| matches!(v, Value::Text(s) if s.contains(needle.as_str()))))
            }
            KvQuery::MatMul { a, b, semiring } => assoc_matmul(self.array(a)?, self.array(b)?, *semiring),
            KvQuery::Ewise { a, b, op } => assoc_ewise(self.array(a)?, self.array(b)?, *op),
        }
    }
}

impl StorageEngine for KeyValueEngine {
    fn model(&self) -> EngineModel {
        EngineModel::KeyValue
    }

    fn load(&mut self, name: &str, table: &CanonicalTable, options: &LoadOptions) -> Result<()> {
        if options.key.is_some() || options.dims.is_some() {
            return Err(Error::Schema("keyvalue objects take no load options".into()));
        }
        let names = table.column_names();
        if names != ["row", "col", "val"] {
            return Err(Error::Schema(format!(
                "keyvalue objects need schema (row:text, col:text, val:any), got ({})",
                names.join(", ")
            )));
        }
        let a = AssociativeArray::from_triples(table)?;
        self.arrays.insert(name.to_string(), a);
        Ok(())
    }

    fn export(&self, name: &str) -> Result<CanonicalTable> {
        Ok(self.array(name)?.to_table())
    }

    fn execute(&self, query: &str) -> Result<NativeResult> {
        let q = parse_kv(query)?;
        Ok(NativeResult::table(self.run(&q)?.to_table()))
    }

    fn drop_object(&mut self, name: &str) -> Result<()> {
        self.arrays
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    fn meta(&self, name: &str) -> Option<ObjectMeta> {
        self.arrays.get(name).map(|a| ObjectMeta::Assoc { val_tag: a.val_tag })
    }

    fn stored_options(&self, name: &str) -> Option<LoadOptions> {
        self.arrays.get(name).map(|_| LoadOptions::none())
    }
}
