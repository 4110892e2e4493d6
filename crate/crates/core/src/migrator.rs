//! CAST mechanics. Every conversion goes through a [`CanonicalTable`]:
//! six rules between the relational, associative-array and array models,
//! plus the per-engine encodings of associative data.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::engines::{ArrayLayout, Catalog, DimSpec, EngineId, EngineModel, LoadOptions, NDArray, TEMP_PREFIX};
use crate::error::{Error, Result};
use crate::hashing::stable_hash;
use crate::value::{format_real, CanonicalTable, Column, Tag, Value};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CastSpec {
    pub from: Option<EngineModel>,
    pub to: Option<EngineModel>,
    /// Relation to associative array: columns forming the row key.
    pub key: Option<Vec<String>>,
    /// Relation to array: dimension columns. Array sources: their dimension
    /// columns (leading columns of the table).
    pub dim_cols: Option<Vec<String>>,
    /// Sorted, duplicate-free key list per axis.
    pub dim_maps: Option<Vec<Vec<String>>>,
    /// Schema to restore when inverting a lossless cast.
    pub columns: Option<Vec<Column>>,
}

impl CastSpec {
    pub fn new(from: EngineModel, to: EngineModel) -> Self {
        CastSpec {
            from: Some(from),
            to: Some(to),
            ..Default::default()
        }
    }

    pub fn with_key(mut self, key: &[&str]) -> Self {
        self.key = Some(key.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_dims(mut self, dims: &[&str]) -> Self {
        self.dim_cols = Some(dims.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_maps(mut self, maps: Vec<Vec<String>>) -> Self {
        self.dim_maps = Some(maps);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CastOutput {
    pub table: CanonicalTable,
    /// Spec turning `table` back into the input, when the cast is lossless.
    pub inverse: Option<CastSpec>,
    /// Options for loading `table` on an engine of the target model.
    pub options: LoadOptions,
    /// Null values that produced no triple.
    pub dropped_nulls: usize,
}

fn cast_err(msg: impl Into<String>) -> Error {
    Error::Cast(msg.into())
}

pub fn cast_table(t: &CanonicalTable, spec: &CastSpec) -> Result<CastOutput> {
    use EngineModel::*;
    let (Some(from), Some(to)) = (spec.from, spec.to) else {
        return Err(cast_err("cast spec needs source and target models"));
    };
    match (from, to) {
        (Relational, KeyValue) => match (&spec.key, &spec.columns) {
            (None, _) => triples_to_assoc(t),
            (Some(key), _) => relation_to_assoc(t, key),
        },
        (KeyValue, Relational) => match (&spec.key, &spec.columns) {
            (Some(key), Some(cols)) => pivot_to_relation(t, key, cols),
            (_, cols) => assoc_to_triples(t, cols.as_deref()),
        },
        (Relational, Array) => {
            let dims = spec
                .dim_cols
                .as_ref()
                .ok_or_else(|| cast_err("relation to array cast needs dim-cols"))?;
            relation_to_array(t, dims)
        }
        (Array, Relational) => array_to_relation(t, spec),
        (KeyValue, Array) => assoc_to_array(t, spec.dim_maps.as_deref(), spec.columns.as_deref()),
        (Array, KeyValue) => array_to_assoc(t, spec),
        _ if from == to => Ok(CastOutput {
            table: t.clone(),
            inverse: Some(spec.clone()),
            options: LoadOptions::none(),
            dropped_nulls: 0,
        }),
        _ => unreachable!("three models"),
    }
}

fn escape_key(s: &str) -> String {
    s.replace('\\', "\\\\").replace('|', "\\|")
}

fn key_part(v: &Value, col: &str) -> Result<String> {
    Ok(match v {
        Value::Null => return Err(cast_err(format!("null in key column `{col}`"))),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => format_real(*r),
        Value::Text(s) => escape_key(s),
    })
}

fn split_key(k: &str) -> Vec<String> {
    let mut parts = vec![String::new()];
    let mut chars = k.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(n) = chars.next() {
                    parts.last_mut().expect("non-empty").push(n);
                }
            }
            '|' => parts.push(String::new()),
            c => parts.last_mut().expect("non-empty").push(c),
        }
    }
    parts
}

fn parse_part(s: &str, tag: Tag) -> Result<Value> {
    let bad = || cast_err(format!("key part `{s}` is not a valid {tag}"));
    Ok(match tag {
        Tag::Int => Value::Int(s.parse().map_err(|_| bad())?),
        Tag::Real => Value::Real(s.parse().map_err(|_| bad())?),
        Tag::Text => Value::Text(s.to_string()),
    })
}

fn assoc_schema(val: Tag) -> Vec<Column> {
    vec![
        Column::new("row", Tag::Text),
        Column::new("col", Tag::Text),
        Column::new("val", val),
    ]
}

fn check_triples(t: &CanonicalTable) -> Result<()> {
    if t.schema.len() != 3 || t.schema[0].tag != Tag::Text || t.schema[1].tag != Tag::Text {
        return Err(cast_err(format!(
            "associative data needs (text, text, value) columns, got ({})",
            t.column_names().join(", ")
        )));
    }
    Ok(())
}

/// Sorted triples, rejecting empty and duplicate keys.
fn build_assoc(val: Tag, triples: impl IntoIterator<Item = (String, String, Value)>) -> Result<CanonicalTable> {
    let mut map = BTreeMap::new();
    for (r, c, v) in triples {
        if r.is_empty() || c.is_empty() {
            return Err(cast_err("associative array keys must be non-empty"));
        }
        if map.insert((r.clone(), c.clone()), v).is_some() {
            return Err(cast_err(format!("duplicate entry ({r}, {c})")));
        }
    }
    Ok(CanonicalTable::new(
        assoc_schema(val),
        map.into_iter()
            .map(|((r, c), v)| vec![Value::Text(r), Value::Text(c), v])
            .collect(),
    ))
}

fn text(v: &Value) -> Result<String> {
    match v {
        Value::Text(s) => Ok(s.clone()),
        _ => Err(cast_err("null key in associative data")),
    }
}

/// Rule (a) without a key: a relation that already holds triples.
fn triples_to_assoc(t: &CanonicalTable) -> Result<CastOutput> {
    check_triples(t).map_err(|_| {
        cast_err("relation to associative array cast needs key=(columns) unless the relation holds (text, text, value) triples")
    })?;
    let mut dropped = 0;
    let mut triples = Vec::new();
    for row in &t.rows {
        if row[2].is_null() {
            dropped += 1;
            continue;
        }
        triples.push((text(&row[0])?, text(&row[1])?, row[2].clone()));
    }
    let table = build_assoc(t.schema[2].tag, triples)?;
    let mut inverse = CastSpec::new(EngineModel::KeyValue, EngineModel::Relational);
    inverse.columns = Some(t.schema.clone());
    Ok(CastOutput {
        table,
        inverse: Some(inverse),
        options: LoadOptions::none(),
        dropped_nulls: dropped,
    })
}

/// Rule (a).
fn relation_to_assoc(t: &CanonicalTable, key: &[String]) -> Result<CastOutput> {
    if key.is_empty() {
        return Err(cast_err("key must name at least one column"));
    }
    let mut key_idx = Vec::new();
    for k in key {
        let i = t
            .column_index(k)
            .ok_or_else(|| cast_err(format!("key column `{k}` not in ({})", t.column_names().join(", "))))?;
        key_idx.push(i);
    }
    let attrs: Vec<usize> = (0..t.schema.len()).filter(|i| !key_idx.contains(i)).collect();
    let Some(&first) = attrs.first() else {
        return Err(cast_err("relation has no columns outside the key"));
    };
    let val = t.schema[first].tag;
    if let Some(&odd) = attrs.iter().find(|&&i| t.schema[i].tag != val) {
        return Err(cast_err(format!(
            "mixed-tag attribute columns cannot form a single-typed associative array (`{}` is {}, `{}` is {})",
            t.schema[first].name, val, t.schema[odd].name, t.schema[odd].tag
        )));
    }
    let mut dropped = 0;
    let mut triples = Vec::new();
    for row in &t.rows {
        let parts: Vec<String> = key_idx
            .iter()
            .map(|&i| key_part(&row[i], &t.schema[i].name))
            .collect::<Result<_>>()?;
        let r = parts.join("|");
        for &i in &attrs {
            if row[i].is_null() {
                dropped += 1;
                continue;
            }
            triples.push((r.clone(), t.schema[i].name.clone(), row[i].clone()));
        }
    }
    let table = build_assoc(val, triples)?;
    let mut inverse = CastSpec::new(EngineModel::KeyValue, EngineModel::Relational);
    inverse.key = Some(key.to_vec());
    inverse.columns = Some(t.schema.clone());
    Ok(CastOutput {
        table,
        inverse: Some(inverse),
        options: LoadOptions::none(),
        dropped_nulls: dropped,
    })
}

/// Rule (b): triples as a relation `(r, c, v)`, or under the names in
/// `names` when restoring a triple relation.
fn assoc_to_triples(t: &CanonicalTable, names: Option<&[Column]>) -> Result<CastOutput> {
    check_triples(t)?;
    let name = |i: usize, d: &str| match names {
        Some(n) if n.len() == 3 => n[i].name.clone(),
        _ => d.to_string(),
    };
    let table = CanonicalTable::new(
        vec![
            Column::new(name(0, "r"), Tag::Text),
            Column::new(name(1, "c"), Tag::Text),
            Column::new(name(2, "v"), t.schema[2].tag),
        ],
        t.rows.clone(),
    );
    Ok(CastOutput {
        table,
        inverse: Some(CastSpec::new(EngineModel::Relational, EngineModel::KeyValue)),
        options: LoadOptions::none(),
        dropped_nulls: 0,
    })
}

/// Inverse of rule (a): rebuild the original relation from its triples.
fn pivot_to_relation(t: &CanonicalTable, key: &[String], cols: &[Column]) -> Result<CastOutput> {
    check_triples(t)?;
    let pos = |name: &str| cols.iter().position(|c| c.name == name);
    let key_idx: Vec<usize> = key
        .iter()
        .map(|k| pos(k).ok_or_else(|| cast_err(format!("key column `{k}` not in target schema"))))
        .collect::<Result<_>>()?;
    let mut rows: BTreeMap<String, Vec<Value>> = BTreeMap::new();
    for tr in &t.rows {
        let r = text(&tr[0])?;
        let c = text(&tr[1])?;
        let ci = pos(&c)
            .filter(|i| !key_idx.contains(i))
            .ok_or_else(|| cast_err(format!("column key `{c}` not in target schema")))?;
        let row = match rows.get_mut(&r) {
            Some(row) => row,
            None => {
                let parts = split_key(&r);
                if parts.len() != key_idx.len() {
                    return Err(cast_err(format!(
                        "row key `{r}` has {} parts, expected {}",
                        parts.len(),
                        key_idx.len()
                    )));
                }
                let mut row = vec![Value::Null; cols.len()];
                for (p, &i) in parts.iter().zip(&key_idx) {
                    row[i] = parse_part(p, cols[i].tag)?;
                }
                rows.entry(r.clone()).or_insert(row)
            }
        };
        row[ci] = tr[2].clone();
    }
    let table = CanonicalTable::new(cols.to_vec(), rows.into_values().collect());
    table.check_conformance()?;
    let mut inverse = CastSpec::new(EngineModel::Relational, EngineModel::KeyValue);
    inverse.key = Some(key.to_vec());
    Ok(CastOutput {
        table,
        inverse: Some(inverse),
        options: LoadOptions::none(),
        dropped_nulls: 0,
    })
}

/// Rule (c).
fn relation_to_array(t: &CanonicalTable, dims: &[String]) -> Result<CastOutput> {
    if dims.is_empty() {
        return Err(cast_err("dim-cols must name at least one column"));
    }
    let mut order = Vec::new();
    for d in dims {
        let i = t.column_index(d).ok_or_else(|| {
            cast_err(format!(
                "dimension column `{d}` not in ({})",
                t.column_names().join(", ")
            ))
        })?;
        if t.schema[i].tag != Tag::Int {
            return Err(cast_err(format!(
                "dimension column `{d}` must be int, found {}",
                t.schema[i].tag
            )));
        }
        if order.contains(&i) {
            return Err(cast_err(format!("dimension column `{d}` repeated")));
        }
        order.push(i);
    }
    let rest: Vec<usize> = (0..t.schema.len()).filter(|i| !order.contains(i)).collect();
    order.extend(rest);
    let table = CanonicalTable::new(
        order.iter().map(|&i| t.schema[i].clone()).collect(),
        t.rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect(),
    );
    let arr = NDArray::from_table(
        &table,
        &LoadOptions {
            key: None,
            dims: Some(dims.iter().map(|d| DimSpec::named(d.clone())).collect()),
        },
    )
    .map_err(|e| cast_err(e.to_string()))?;
    let layout = arr.layout();
    let mut inverse = CastSpec::new(EngineModel::Array, EngineModel::Relational);
    inverse.dim_cols = Some(dims.to_vec());
    inverse.columns = Some(t.schema.clone());
    Ok(CastOutput {
        table: arr.to_table(),
        inverse: Some(inverse),
        options: layout.load_options(),
        dropped_nulls: 0,
    })
}

/// Number of leading dimension columns; `default` when the spec names none.
fn array_dims(t: &CanonicalTable, spec: &CastSpec, default: Option<usize>) -> Result<usize> {
    let n = match (&spec.dim_cols, default) {
        (Some(d), _) => {
            for (i, name) in d.iter().enumerate() {
                if t.schema.get(i).map(|c| &c.name) != Some(name) {
                    return Err(cast_err(format!("array data must lead with dimension `{name}`")));
                }
            }
            d.len()
        }
        (None, Some(n)) => n,
        (None, None) => return Err(cast_err("array cast needs dim-cols naming the dimensions")),
    };
    if t.schema.len() < n || t.schema[..n].iter().any(|c| c.tag != Tag::Int) {
        return Err(cast_err("array dimensions must be int columns"));
    }
    Ok(n)
}

/// Rule (d).
fn array_to_relation(t: &CanonicalTable, spec: &CastSpec) -> Result<CastOutput> {
    let n = array_dims(t, spec, None)?;
    let dims: Vec<String> = t.schema[..n].iter().map(|c| c.name.clone()).collect();
    let table = match &spec.columns {
        None => t.clone(),
        Some(cols) => {
            let idx: Vec<usize> = cols
                .iter()
                .map(|c| {
                    t.column_index(&c.name)
                        .ok_or_else(|| cast_err(format!("column `{}` missing from array data", c.name)))
                })
                .collect::<Result<_>>()?;
            if idx.len() != t.schema.len() {
                return Err(cast_err("target schema does not cover the array's columns"));
            }
            CanonicalTable::new(
                idx.iter().map(|&i| t.schema[i].clone()).collect(),
                t.rows
                    .iter()
                    .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                    .collect(),
            )
        }
    };
    let mut inverse = CastSpec::new(EngineModel::Relational, EngineModel::Array);
    inverse.dim_cols = Some(dims);
    Ok(CastOutput {
        table,
        inverse: Some(inverse),
        options: LoadOptions::none(),
        dropped_nulls: 0,
    })
}

fn check_map(m: &[String]) -> Result<()> {
    if m.windows(2).any(|w| w[0] >= w[1]) {
        return Err(cast_err("dimension maps must be sorted and duplicate-free"));
    }
    Ok(())
}

/// Rule (e): coordinates are key ranks in the per-axis maps.
fn assoc_to_array(t: &CanonicalTable, maps: Option<&[Vec<String>]>, names: Option<&[Column]>) -> Result<CastOutput> {
    check_triples(t)?;
    // Restores the array's own column names when inverting rule (f).
    let name = |i: usize, d: &str| match names {
        Some(n) if n.len() == 3 => n[i].name.clone(),
        _ => d.to_string(),
    };
    let dims = [name(0, "row"), name(1, "col")];
    let maps: Vec<Vec<String>> = match maps {
        Some(m) => {
            if m.len() != 2 {
                return Err(cast_err("associative data needs exactly two dimension maps"));
            }
            m.iter().try_for_each(|x| check_map(x))?;
            m.to_vec()
        }
        None => (0..2)
            .map(|axis| {
                t.rows
                    .iter()
                    .filter_map(|r| match &r[axis] {
                        Value::Text(s) => Some(s.clone()),
                        _ => None,
                    })
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect()
            })
            .collect(),
    };
    let rank = |axis: usize, v: &Value| -> Result<i64> {
        let k = text(v)?;
        maps[axis]
            .binary_search(&k)
            .map(|i| i as i64)
            .map_err(|_| cast_err(format!("key `{k}` missing from dimension map")))
    };
    let mut rows = Vec::with_capacity(t.rows.len());
    for r in &t.rows {
        rows.push(vec![
            Value::Int(rank(0, &r[0])?),
            Value::Int(rank(1, &r[1])?),
            r[2].clone(),
        ]);
    }
    let table = CanonicalTable::new(
        vec![
            Column::new(dims[0].clone(), Tag::Int),
            Column::new(dims[1].clone(), Tag::Int),
            Column::new(name(2, "val"), t.schema[2].tag),
        ],
        rows,
    );
    let options = LoadOptions {
        key: None,
        dims: Some(
            dims.iter()
                .zip(&maps)
                .map(|(n, m)| DimSpec {
                    column: n.to_string(),
                    length: None,
                    labels: Some(m.clone()),
                })
                .collect(),
        ),
    };
    let arr = NDArray::from_table(&table, &options).map_err(|e| cast_err(e.to_string()))?;
    let inverse = CastSpec::new(EngineModel::Array, EngineModel::KeyValue)
        .with_dims(&[&dims[0], &dims[1]])
        .with_maps(maps);
    Ok(CastOutput {
        table: arr.to_table(),
        inverse: Some(inverse),
        options,
        dropped_nulls: 0,
    })
}

/// Rule (f).
fn array_to_assoc(t: &CanonicalTable, spec: &CastSpec) -> Result<CastOutput> {
    let n = array_dims(t, spec, Some(2))?;
    if n != 2 || t.schema.len() != 3 || !t.schema[2].tag.is_numeric() {
        return Err(cast_err(
            "array to associative array cast needs 2 dimensions and 1 numeric attribute",
        ));
    }
    if let Some(m) = &spec.dim_maps {
        if m.len() != 2 {
            return Err(cast_err("two dimension maps expected"));
        }
        m.iter().try_for_each(|x| check_map(x))?;
    }
    let key = |axis: usize, v: &Value| -> Result<String> {
        let Value::Int(c) = v else {
            return Err(cast_err("null coordinate"));
        };
        match &spec.dim_maps {
            Some(m) => m[axis]
                .get(*c as usize)
                .cloned()
                .ok_or_else(|| cast_err(format!("coordinate {c} outside dimension map"))),
            None => Ok(c.to_string()),
        }
    };
    let mut dropped = 0;
    let mut triples = Vec::new();
    for r in &t.rows {
        if r[2].is_null() {
            dropped += 1;
            continue;
        }
        triples.push((key(0, &r[0])?, key(1, &r[1])?, r[2].clone()));
    }
    let table = build_assoc(t.schema[2].tag, triples)?;
    let inverse = spec.dim_maps.clone().map(|m| CastSpec {
        columns: Some(t.schema.clone()),
        ..CastSpec::new(EngineModel::KeyValue, EngineModel::Array).with_maps(m)
    });
    Ok(CastOutput {
        table,
        inverse,
        options: LoadOptions::none(),
        dropped_nulls: dropped,
    })
}

/// A node's value in its logical model. Associative data is held as
/// `(row, col, val)` triples; array data carries its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    pub model: EngineModel,
    pub table: CanonicalTable,
    pub layout: Option<ArrayLayout>,
}

fn layout_spec(from: EngineModel, to: EngineModel, layout: Option<&ArrayLayout>) -> CastSpec {
    let mut spec = CastSpec::new(from, to);
    if let Some(l) = layout {
        spec.dim_cols = Some(l.dims.iter().map(|d| d.name.clone()).collect());
        if l.dims.iter().all(|d| d.labels.is_some()) {
            spec.dim_maps = Some(l.dims.iter().map(|d| d.labels.clone().unwrap_or_default()).collect());
        }
    }
    spec
}

/// Read an engine-native result as data of `logical` model.
pub fn decode(
    engine_model: EngineModel,
    logical: EngineModel,
    table: CanonicalTable,
    layout: Option<ArrayLayout>,
) -> Result<ModelData> {
    use EngineModel::*;
    let table = match (logical, engine_model) {
        (KeyValue, Relational) => triples_to_assoc(&table)?.table,
        (KeyValue, Array) => cast_table(&table, &layout_spec(Array, KeyValue, layout.as_ref()))?.table,
        (KeyValue, KeyValue) => CanonicalTable::new(assoc_schema(table.schema[2].tag), table.rows),
        (l, e) if l == e => table,
        (l, e) => return Err(Error::Plan(format!("{e} engine cannot hold {l} data"))),
    };
    let layout = if logical == Array { layout } else { None };
    Ok(ModelData {
        model: logical,
        table,
        layout,
    })
}

/// Apply a user cast between logical models. Returns the number of
/// dropped nulls alongside.
pub fn convert(data: &ModelData, to: EngineModel, key: Option<&[String]>) -> Result<(ModelData, usize)> {
    use EngineModel::*;
    if data.model == to {
        return Ok((data.clone(), 0));
    }
    let mut spec = layout_spec(data.model, to, data.layout.as_ref());
    match (data.model, to) {
        (Relational, KeyValue) => spec.key = key.map(<[String]>::to_vec),
        (Relational, Array) => {
            spec.dim_cols = Some(
                key.ok_or_else(|| cast_err("relation to array cast needs key=(dimension columns)"))?
                    .to_vec(),
            )
        }
        _ => {}
    }
    let out = cast_table(&data.table, &spec)?;
    let layout = if to == Array {
        let arr = NDArray::from_table(&out.table, &out.options)?;
        Some(arr.layout())
    } else {
        None
    };
    Ok((
        ModelData {
            model: to,
            table: out.table,
            layout,
        },
        out.dropped_nulls,
    ))
}

/// Engine-native table and load options for `data` on an engine.
pub fn encode(data: &ModelData, engine_model: EngineModel) -> Result<(CanonicalTable, LoadOptions)> {
    use EngineModel::*;
    match (data.model, engine_model) {
        (KeyValue, KeyValue) => Ok((data.table.clone(), LoadOptions::none())),
        (KeyValue, Relational) => Ok((assoc_to_triples(&data.table, None)?.table, LoadOptions::none())),
        (KeyValue, Array) => {
            let out = assoc_to_array(&data.table, None, None)?;
            Ok((out.table, out.options))
        }
        (Relational, Relational) => Ok((data.table.clone(), LoadOptions::none())),
        (Array, Array) => {
            let layout = data
                .layout
                .as_ref()
                .ok_or_else(|| Error::Plan("array data without a layout".into()))?;
            Ok((data.table.clone(), layout.load_options()))
        }
        (m, e) => Err(Error::Plan(format!("{e} engine cannot hold {m} data"))),
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Fresh `__mig_<16 hex>` name; `seed` makes names reproducible per run.
pub fn temp_name(seed: &str) -> String {
    let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
    format!("{TEMP_PREFIX}{}", stable_hash(&[seed, &n.to_string()]))
}

/// Load `data` onto `to` as a temporary object and return its name.
pub fn migrate(catalog: &Catalog, data: &ModelData, to: &EngineId, seed: &str) -> Result<String> {
    let (table, options) = encode(data, catalog.engine_model(to)?)?;
    let name = temp_name(seed);
    catalog.load(to, &name, &table, &options)?;
    Ok(name)
}
