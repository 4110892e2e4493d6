//! Sparse n-dimensional array engine. Cells are addressed by integer
//! coordinates; a dimension may carry sorted labels naming each coordinate.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::lexer::{Cursor, TokenKind};
use crate::sql::{self, AggFunc, Expr};
use crate::value::{CanonicalTable, Column, Row, Tag, Value};

use super::keyvalue::{assoc_matmul, parse_semiring, AssociativeArray, Semiring};
use super::relational::{Compiler, Scope, Ty};
use super::{ArrayLayout, EngineModel, LoadOptions, NativeResult, ObjectMeta, StorageEngine};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dim {
    pub name: String,
    pub len: u64,
    pub labels: Option<Vec<String>>,
}

impl Dim {
    /// Key used to match coordinates across arrays: the label if any,
    /// otherwise the decimal coordinate.
    pub fn key(&self, coord: i64) -> String {
        match &self.labels {
            Some(l) => l[coord as usize].clone(),
            None => coord.to_string(),
        }
    }

    fn coord_of(&self, key: &str) -> Option<i64> {
        match &self.labels {
            Some(l) => l.binary_search_by(|x| x.as_str().cmp(key)).ok().map(|i| i as i64),
            None => key.parse().ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NDArray {
    pub dims: Vec<Dim>,
    pub attrs: Vec<Column>,
    pub cells: BTreeMap<Vec<i64>, Vec<Value>>,
}

impl NDArray {
    pub fn layout(&self) -> ArrayLayout {
        ArrayLayout {
            dims: self.dims.clone(),
            attrs: self.attrs.clone(),
        }
    }

    fn schema(&self) -> Vec<Column> {
        self.dims
            .iter()
            .map(|d| Column::new(&d.name, Tag::Int))
            .chain(self.attrs.iter().cloned())
            .collect()
    }

    pub fn to_table(&self) -> CanonicalTable {
        CanonicalTable::new(
            self.schema(),
            self.cells
                .iter()
                .map(|(k, v)| k.iter().map(|c| Value::Int(*c)).chain(v.iter().cloned()).collect())
                .collect(),
        )
    }

    fn with_cells(&self, cells: BTreeMap<Vec<i64>, Vec<Value>>) -> NDArray {
        NDArray {
            dims: self.dims.clone(),
            attrs: self.attrs.clone(),
            cells,
        }
    }

    fn dim_index(&self, name: &str) -> Result<usize> {
        self.dims
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownColumn(format!("dimension `{name}`")))
    }

    /// Build from a table whose dimension columns are named in `options`.
    pub fn from_table(table: &CanonicalTable, options: &LoadOptions) -> Result<NDArray> {
        if options.key.is_some() {
            return Err(Error::Schema("array objects take dimensions, not a key".into()));
        }
        let specs = options
            .dims
            .as_ref()
            .filter(|d| !d.is_empty())
            .ok_or_else(|| Error::Schema("array objects need at least one dimension".into()))?;
        let mut dim_cols = Vec::new();
        for spec in specs {
            let i = table
                .column_index(&spec.column)
                .ok_or_else(|| Error::UnknownColumn(spec.column.clone()))?;
            if table.schema[i].tag != Tag::Int {
                return Err(Error::Schema(format!(
                    "dimension `{}` must be int, found {}",
                    spec.column, table.schema[i].tag
                )));
            }
            if dim_cols.contains(&i) {
                return Err(Error::Schema(format!("dimension `{}` repeated", spec.column)));
            }
            dim_cols.push(i);
        }
        let attr_cols: Vec<usize> = (0..table.schema.len()).filter(|i| !dim_cols.contains(i)).collect();
        let attrs: Vec<Column> = attr_cols.iter().map(|i| table.schema[*i].clone()).collect();

        let mut cells = BTreeMap::new();
        let mut max = vec![-1i64; specs.len()];
        for row in &table.rows {
            let mut key = Vec::with_capacity(dim_cols.len());
            for (d, &i) in dim_cols.iter().enumerate() {
                let c = match &row[i] {
                    Value::Int(c) => *c,
                    _ => {
                        return Err(Error::Schema(format!(
                            "null coordinate in dimension `{}`",
                            specs[d].column
                        )))
                    }
                };
                if c < 0 {
                    return Err(Error::OutOfBounds(format!(
                        "coordinate {c} in dimension `{}`",
                        specs[d].column
                    )));
                }
                max[d] = max[d].max(c);
                key.push(c);
            }
            let vals: Vec<Value> = attr_cols.iter().map(|i| row[*i].clone()).collect();
            if cells.insert(key.clone(), vals).is_some() {
                return Err(Error::Schema(format!("duplicate cell at {key:?}")));
            }
        }

        let mut dims = Vec::with_capacity(specs.len());
        for (d, spec) in specs.iter().enumerate() {
            if let Some(labels) = &spec.labels {
                if labels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!(
                        "labels of dimension `{}` must be sorted and unique",
                        spec.column
                    )));
                }
            }
            let len = match (spec.length, &spec.labels) {
                (Some(n), Some(l)) if n != (l.len() as u64).max(1) => {
                    return Err(Error::Schema(format!(
                        "dimension `{}` has length {n} but {} labels",
                        spec.column,
                        l.len()
                    )))
                }
                (Some(n), _) => n,
                // an empty key map still gives a length-1 axis
                (None, Some(l)) => (l.len() as u64).max(1),
                (None, None) => (max[d] + 1).max(1) as u64,
            };
            if max[d] >= 0 && max[d] as u64 >= len {
                return Err(Error::OutOfBounds(format!(
                    "coordinate {} outside dimension `{}` of length {len}",
                    max[d], spec.column
                )));
            }
            dims.push(Dim {
                name: spec.column.clone(),
                len,
                labels: spec.labels.clone(),
            });
        }
        Ok(NDArray { dims, attrs, cells })
    }
}

/// 2-D product; inner coordinates are matched by key.
pub(crate) fn array_matmul(a: &NDArray, b: &NDArray, s: Semiring) -> Result<NDArray> {
    let check = |x: &NDArray| -> Result<()> {
        if x.dims.len() != 2 || x.attrs.len() != 1 || !x.attrs[0].tag.is_numeric() {
            return Err(Error::Schema(
                "matrix product needs 2-D arrays with one numeric attribute".into(),
            ));
        }
        Ok(())
    };
    check(a)?;
    check(b)?;
    let to_assoc = |x: &NDArray| {
        let mut out = AssociativeArray::new(x.attrs[0].tag);
        for (k, v) in &x.cells {
            if !v[0].is_null() {
                out.insert(&x.dims[0].key(k[0]), &x.dims[1].key(k[1]), v[0].clone());
            }
        }
        out
    };
    let prod = assoc_matmul(&to_assoc(a), &to_assoc(b), s)?;
    let row_dim = a.dims[0].clone();
    let mut col_dim = b.dims[1].clone();
    if col_dim.name == row_dim.name {
        col_dim.name = format!("{}_2", col_dim.name);
    }
    let mut cells = BTreeMap::new();
    for ((r, c), v) in prod.entries {
        let (Some(i), Some(j)) = (row_dim.coord_of(&r), col_dim.coord_of(&c)) else {
            return Err(Error::OutOfBounds(format!("product key ({r}, {c})")));
        };
        cells.insert(vec![i, j], vec![v]);
    }
    Ok(NDArray {
        dims: vec![row_dim, col_dim],
        attrs: vec![Column::new(&a.attrs[0].name, prod.val_tag)],
        cells,
    })
}

enum ArrQuery {
    Subarray {
        obj: String,
        ranges: Vec<(String, i64, i64)>,
    },
    Filter {
        obj: String,
        pred: Expr,
    },
    Agg {
        func: AggFunc,
        attr: Option<String>,
        obj: String,
        by: Vec<String>,
    },
    MatMul {
        a: String,
        b: String,
        semiring: Semiring,
    },
}

fn parse_arr(text: &str) -> Result<ArrQuery> {
    let mut cur = Cursor::new(text)?;
    let q = if cur.eat_keyword("subarray") {
        let (obj, _) = cur.expect_ident()?;
        let mut ranges = Vec::new();
        while !cur.at_eof() {
            if !ranges.is_empty() {
                cur.expect(TokenKind::Comma)?;
            }
            let (dim, _) = cur.expect_ident()?;
            cur.expect(TokenKind::Eq)?;
            let lo = cur.expect_int()?;
            cur.expect(TokenKind::Colon)?;
            let hi = cur.expect_int()?;
            ranges.push((dim, lo, hi));
        }
        ArrQuery::Subarray { obj, ranges }
    } else if cur.eat_keyword("filter") {
        let (obj, _) = cur.expect_ident()?;
        let pred = sql::parse_expr(&mut cur)?;
        ArrQuery::Filter { obj, pred }
    } else if cur.eat_keyword("agg") {
        let span = cur.peek().span;
        let (fname, _) = cur.expect_ident()?;
        let func = AggFunc::parse(&fname)
            .ok_or_else(|| Error::syntax(span, format!("unknown aggregate `{fname}`"), vec!["aggregate".into()]))?;
        cur.expect(TokenKind::LParen)?;
        let attr = if func == AggFunc::Count && cur.eat(&TokenKind::Star) {
            None
        } else {
            Some(cur.expect_ident()?.0)
        };
        cur.expect(TokenKind::RParen)?;
        let (obj, _) = cur.expect_ident()?;
        cur.expect_keyword("by")?;
        cur.expect(TokenKind::LParen)?;
        let mut by = Vec::new();
        while !cur.eat(&TokenKind::RParen) {
            if !by.is_empty() {
                cur.expect(TokenKind::Comma)?;
            }
            by.push(cur.expect_ident()?.0);
        }
        ArrQuery::Agg { func, attr, obj, by }
    } else if cur.eat_keyword("matmul") {
        let (a, _) = cur.expect_ident()?;
        let (b, _) = cur.expect_ident()?;
        let semiring = if cur.eat_keyword("semiring") {
            parse_semiring(&mut cur)?
        } else {
            Semiring::PlusTimes
        };
        ArrQuery::MatMul { a, b, semiring }
    } else {
        return Err(cur.unexpected(&["SUBARRAY", "FILTER", "AGG", "MATMUL"]));
    };
    cur.expect_eof()?;
    Ok(q)
}

#[derive(Debug, Default)]
pub struct ArrayEngine {
    arrays: BTreeMap<String, NDArray>,
}

impl ArrayEngine {
    pub fn array(&self, name: &str) -> Result<&NDArray> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    fn run(&self, q: &ArrQuery) -> Result<NDArray> {
        match q {
            ArrQuery::Subarray { obj, ranges } => {
                let a = self.array(obj)?;
                let mut bounds: Vec<(usize, i64, i64)> = Vec::new();
                for (dim, lo, hi) in ranges {
                    let d = a.dim_index(dim)?;
                    if bounds.iter().any(|b| b.0 == d) {
                        return Err(Error::Validation(format!("dimension `{dim}` restricted twice")));
                    }
                    bounds.push((d, *lo, *hi));
                }
                let cells = a
                    .cells
                    .iter()
                    .filter(|(k, _)| bounds.iter().all(|(d, lo, hi)| *lo <= k[*d] && k[*d] <= *hi))
                    .map(|(k, v)| (k.clone(), v.clone()))
                    .collect();
                Ok(a.with_cells(cells))
            }
            ArrQuery::Filter { obj, pred } => {
                let a = self.array(obj)?;
                let scope = Scope::from_schema(None, &a.schema());
                let (c, ty) = Compiler::new(&scope, false).compile(pred)?;
                if ty != Ty::Bool {
                    return Err(Error::Type("FILTER needs a boolean predicate".into()));
                }
                let mut cells = BTreeMap::new();
                for (k, v) in &a.cells {
                    let row: Row = k.iter().map(|c| Value::Int(*c)).chain(v.iter().cloned()).collect();
                    if c.eval_pred(&row)? {
                        cells.insert(k.clone(), v.clone());
                    }
                }
                Ok(a.with_cells(cells))
            }
            ArrQuery::Agg { func, attr, obj, by } => {
                let a = self.array(obj)?;
                let mut by_idx = Vec::new();
                for d in by {
                    let i = a.dim_index(d)?;
                    if by_idx.contains(&i) {
                        return Err(Error::Validation(format!("dimension `{d}` grouped twice")));
                    }
                    by_idx.push(i);
                }
                let attr_idx = match attr {
                    None => None,
                    Some(n) => Some(
                        a.attrs
                            .iter()
                            .position(|c| &c.name == n)
                            .ok_or_else(|| Error::UnknownColumn(format!("attribute `{n}`")))?,
                    ),
                };
                let expr = Expr::Agg {
                    func: *func,
                    arg: attr_idx.map(|_| Box::new(Expr::col(attr.as_deref().unwrap_or("")))),
                };
                let scope = Scope::from_schema(None, &a.attrs);
                let mut compiler = Compiler::new(&scope, true);
                let (_, ty) = compiler.compile(&expr)?;
                let slot = compiler.aggs.pop().expect("aggregate slot");
                let out_name = match attr {
                    Some(n) => format!("{}_{n}", func.name()),
                    None => func.name().to_string(),
                };
                let tag = ty.tag().expect("aggregates are not boolean");

                let mut groups: BTreeMap<Vec<i64>, Vec<&Row>> = BTreeMap::new();
                if by_idx.is_empty() {
                    groups.insert(Vec::new(), Vec::new());
                }
                for (k, v) in &a.cells {
                    let g: Vec<i64> = by_idx.iter().map(|i| k[*i]).collect();
                    groups.entry(g).or_default().push(v);
                }
                let mut cells = BTreeMap::new();
                for (g, rows) in groups {
                    let v = slot.compute(rows.into_iter())?;
                    cells.insert(g, vec![v]);
                }
                Ok(NDArray {
                    dims: by_idx.iter().map(|i| a.dims[*i].clone()).collect(),
                    attrs: vec![Column::new(out_name, tag)],
                    cells,
                })
            }
            ArrQuery::MatMul { a, b, semiring } => array_matmul(self.array(a)?, self.array(b)?, *semiring),
        }
    }
}

impl StorageEngine for ArrayEngine {
    fn model(&self) -> EngineModel {
        EngineModel::Array
    }

    fn load(&mut self, name: &str, table: &CanonicalTable, options: &LoadOptions) -> Result<()> {
        let a = NDArray::from_table(table, options)?;
        self.arrays.insert(name.to_string(), a);
        Ok(())
    }

    fn export(&self, name: &str) -> Result<CanonicalTable> {
        Ok(self.array(name)?.to_table())
    }

    fn execute(&self, query: &str) -> Result<NativeResult> {
        let out = self.run(&parse_arr(query)?)?;
        Ok(NativeResult {
            table: out.to_table(),
            layout: Some(out.layout()),
        })
    }

    fn drop_object(&mut self, name: &str) -> Result<()> {
        self.arrays
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    fn meta(&self, name: &str) -> Option<ObjectMeta> {
        self.arrays.get(name).map(|a| ObjectMeta::Array(a.layout()))
    }

    fn stored_options(&self, name: &str) -> Option<LoadOptions> {
        self.arrays.get(name).map(|a| a.layout().load_options())
    }
}
