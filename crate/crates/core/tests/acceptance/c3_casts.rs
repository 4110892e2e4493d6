//! Lossless casts invert exactly: 500 random tables per direction pair.

use std::collections::BTreeSet;

use polydawg::engines::EngineModel::{self, *};
use polydawg::migrator::{cast_table, CastSpec};
use polydawg::{CanonicalTable, Column, Tag, Value};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TABLES: usize = 500;

fn word(rng: &mut ChaCha8Rng) -> String {
    // Separator and escape characters show up in keys on purpose.
    const CHARS: &[char] = &['a', 'b', 'z', '0', '7', '|', '\\', ' ', '-', 'é'];
    (0..rng.gen_range(1..6)).map(|_| *CHARS.choose(rng).unwrap()).collect()
}

fn value(rng: &mut ChaCha8Rng, tag: Tag) -> Value {
    match tag {
        Tag::Int => Value::Int(rng.gen_range(-1000..1000)),
        Tag::Real => Value::Real(rng.gen_range(-1e6..1e6)),
        Tag::Text => Value::text(word(rng)),
    }
}

fn any_tag(rng: &mut ChaCha8Rng) -> Tag {
    *[Tag::Int, Tag::Real, Tag::Text].choose(rng).unwrap()
}

/// Relation with a unique key over `key` columns and single-tag attributes.
fn keyed_relation(rng: &mut ChaCha8Rng) -> (CanonicalTable, Vec<String>) {
    let nkey = rng.gen_range(1..=2);
    let nattr = rng.gen_range(1..=3);
    let attr_tag = any_tag(rng);
    let mut schema: Vec<Column> = (0..nkey)
        .map(|i| Column::new(format!("k{i}"), if rng.gen_bool(0.5) { Tag::Int } else { Tag::Text }))
        .collect();
    schema.extend((0..nattr).map(|i| Column::new(format!("a{i}"), attr_tag)));
    schema.shuffle(rng);
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for _ in 0..rng.gen_range(0..30) {
        let row: Vec<Value> = schema.iter().map(|c| value(rng, c.tag)).collect();
        let key: Vec<String> = schema
            .iter()
            .zip(&row)
            .filter(|(c, _)| c.name.starts_with('k'))
            .map(|(_, v)| v.lexeme())
            .collect();
        if seen.insert(key) {
            rows.push(row);
        }
    }
    let key = (0..nkey).map(|i| format!("k{i}")).collect();
    (CanonicalTable::new(schema, rows), key)
}

fn triples(rng: &mut ChaCha8Rng, val: Tag) -> CanonicalTable {
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for _ in 0..rng.gen_range(0..40) {
        let (r, c) = (word(rng), word(rng));
        if seen.insert((r.clone(), c.clone())) {
            rows.push(vec![Value::text(r), Value::text(c), value(rng, val)]);
        }
    }
    CanonicalTable::with_columns(&[("row", Tag::Text), ("col", Tag::Text), ("val", val)], rows)
}

/// Cells with unique int coordinates; dimension columns lead.
fn cells(rng: &mut ChaCha8Rng, ndims: usize, attrs: &[Tag], extent: i64) -> CanonicalTable {
    let mut schema: Vec<Column> = (0..ndims).map(|i| Column::new(format!("d{i}"), Tag::Int)).collect();
    schema.extend(attrs.iter().enumerate().map(|(i, t)| Column::new(format!("v{i}"), *t)));
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for _ in 0..rng.gen_range(0..40) {
        let coord: Vec<i64> = (0..ndims).map(|_| rng.gen_range(0..extent)).collect();
        if seen.insert(coord.clone()) {
            let mut row: Vec<Value> = coord.into_iter().map(Value::Int).collect();
            row.extend(attrs.iter().map(|t| value(rng, *t)));
            rows.push(row);
        }
    }
    CanonicalTable::new(schema, rows)
}

fn dim_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("d{i}")).collect()
}

/// Cast with `spec`, invert, and require the original bag with its schema.
fn round_trip(label: &str, t: &CanonicalTable, spec: &CastSpec, to: EngineModel) -> Result<(), String> {
    let out = cast_table(t, spec).map_err(|e| format!("{label}: {e}\n{t}"))?;
    ensure!(out.dropped_nulls == 0, "{label}: dropped nulls");
    let inverse = out.inverse.as_ref().ok_or_else(|| format!("{label}: no inverse"))?;
    ensure!(
        inverse.from == Some(to),
        "{label}: inverse starts from {:?}",
        inverse.from
    );
    let back = cast_table(&out.table, inverse).map_err(|e| format!("{label} inverse: {e}"))?;
    ensure!(
        back.table.schema == t.schema && back.table.bag_eq(t),
        "{label}: round trip changed the table\n{t}\nbecame\n{}",
        back.table
    );
    Ok(())
}

pub fn run() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    for _ in 0..TABLES {
        // Relation <-> associative array.
        let (rel, key) = keyed_relation(&mut rng);
        let key: Vec<&str> = key.iter().map(String::as_str).collect();
        round_trip("a", &rel, &CastSpec::new(Relational, KeyValue).with_key(&key), KeyValue)?;
        let tag = any_tag(&mut rng);
        round_trip(
            "b",
            &triples(&mut rng, tag),
            &CastSpec::new(KeyValue, Relational),
            Relational,
        )?;

        // Relation <-> array.
        let ndims = rng.gen_range(1..=3);
        let attrs: Vec<Tag> = (0..rng.gen_range(1..=3)).map(|_| any_tag(&mut rng)).collect();
        let arr = cells(&mut rng, ndims, &attrs, 6);
        let mut shuffled = arr.clone();
        let mut order: Vec<usize> = (0..arr.schema.len()).collect();
        order.shuffle(&mut rng);
        shuffled.schema = order.iter().map(|&i| arr.schema[i].clone()).collect();
        shuffled.rows = arr
            .rows
            .iter()
            .map(|r| order.iter().map(|&i| r[i].clone()).collect())
            .collect();
        let dims = dim_names(ndims);
        let dims: Vec<&str> = dims.iter().map(String::as_str).collect();
        round_trip(
            "c",
            &shuffled,
            &CastSpec::new(Relational, Array).with_dims(&dims),
            Array,
        )?;
        round_trip(
            "d",
            &arr,
            &CastSpec::new(Array, Relational).with_dims(&dims),
            Relational,
        )?;

        // Associative array <-> array.
        let tag = if rng.gen_bool(0.5) { Tag::Int } else { Tag::Real };
        round_trip("e", &triples(&mut rng, tag), &CastSpec::new(KeyValue, Array), Array)?;
        let extent = rng.gen_range(1..8);
        let grid = cells(&mut rng, 2, &[tag], extent);
        let maps: Vec<Vec<String>> = (0..2)
            .map(|_| {
                let mut m = BTreeSet::new();
                while m.len() < extent as usize {
                    m.insert(word(&mut rng));
                }
                m.into_iter().collect()
            })
            .collect();
        round_trip(
            "f",
            &grid,
            &CastSpec::new(Array, KeyValue).with_dims(&["d0", "d1"]).with_maps(maps),
            KeyValue,
        )?;
    }
    Ok(())
}
