//! Islands of information: a data model, a closed operator set and member
//! engines, plus the shims translating island operators to native text.

use std::collections::BTreeMap;
use std::fmt;

use crate::engines::{Catalog, EngineId, EngineModel, EwiseOp, ObjectMeta, Semiring};
use crate::error::{Error, Result};
use crate::sql::{self, AggFunc, Expr, SelectStmt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OperatorId {
    Select,
    Scan,
    Grep,
    Subarray,
    Filter,
    Agg,
    MatMul,
    Ewise,
    Transpose,
    NativePassthrough,
}

impl OperatorId {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorId::Select => "select",
            OperatorId::Scan => "scan",
            OperatorId::Grep => "grep",
            OperatorId::Subarray => "subarray",
            OperatorId::Filter => "filter",
            OperatorId::Agg => "agg",
            OperatorId::MatMul => "matmul",
            OperatorId::Ewise => "ewise",
            OperatorId::Transpose => "transpose",
            OperatorId::NativePassthrough => "native-passthrough",
        }
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Inclusive key range; `None` on an axis means all keys.
pub type KeyRange = (String, String);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimRange {
    pub dim: String,
    pub lo: i64,
    pub hi: i64,
}

/// One island operator applied to sources of type `S`: object names when
/// translating, AST sources when parsing, node slots in a logical plan.
#[derive(Debug, Clone, PartialEq)]
pub enum IslandOp<S> {
    /// The relational island's SELECT.
    Query(SelectStmt<S>),
    Scan {
        src: S,
        rows: Option<KeyRange>,
        cols: Option<KeyRange>,
    },
    Grep {
        src: S,
        pattern: String,
    },
    Subarray {
        src: S,
        ranges: Vec<DimRange>,
    },
    Filter {
        src: S,
        pred: Expr,
    },
    Agg {
        src: S,
        func: AggFunc,
        attr: Option<String>,
        by: Vec<String>,
    },
    /// D4M `select(src, rows, cols)`.
    Select {
        src: S,
        rows: Option<KeyRange>,
        cols: Option<KeyRange>,
    },
    MatMul {
        a: S,
        b: S,
        semiring: Semiring,
    },
    Ewise {
        a: S,
        b: S,
        op: EwiseOp,
    },
    Transpose {
        src: S,
    },
    /// Raw body of a degenerate island, kept byte-for-byte.
    Native(String),
}

impl<S> IslandOp<S> {
    pub fn operator(&self) -> OperatorId {
        match self {
            IslandOp::Query(_) | IslandOp::Select { .. } => OperatorId::Select,
            IslandOp::Scan { .. } => OperatorId::Scan,
            IslandOp::Grep { .. } => OperatorId::Grep,
            IslandOp::Subarray { .. } => OperatorId::Subarray,
            IslandOp::Filter { .. } => OperatorId::Filter,
            IslandOp::Agg { .. } => OperatorId::Agg,
            IslandOp::MatMul { .. } => OperatorId::MatMul,
            IslandOp::Ewise { .. } => OperatorId::Ewise,
            IslandOp::Transpose { .. } => OperatorId::Transpose,
            IslandOp::Native(_) => OperatorId::NativePassthrough,
        }
    }

    /// Sources in textual order.
    pub fn sources(&self) -> Vec<&S> {
        match self {
            IslandOp::Query(q) => q.tables().map(|t| &t.source).collect(),
            IslandOp::Scan { src, .. }
            | IslandOp::Grep { src, .. }
            | IslandOp::Subarray { src, .. }
            | IslandOp::Filter { src, .. }
            | IslandOp::Agg { src, .. }
            | IslandOp::Select { src, .. }
            | IslandOp::Transpose { src } => vec![src],
            IslandOp::MatMul { a, b, .. } | IslandOp::Ewise { a, b, .. } => vec![a, b],
            IslandOp::Native(_) => Vec::new(),
        }
    }

    pub fn try_map_sources<T, E>(
        self,
        mut f: impl FnMut(S) -> std::result::Result<T, E>,
    ) -> std::result::Result<IslandOp<T>, E> {
        Ok(match self {
            IslandOp::Query(q) => IslandOp::Query(q.try_map_sources(|s, _| f(s))?),
            IslandOp::Scan { src, rows, cols } => IslandOp::Scan {
                src: f(src)?,
                rows,
                cols,
            },
            IslandOp::Grep { src, pattern } => IslandOp::Grep { src: f(src)?, pattern },
            IslandOp::Subarray { src, ranges } => IslandOp::Subarray { src: f(src)?, ranges },
            IslandOp::Filter { src, pred } => IslandOp::Filter { src: f(src)?, pred },
            IslandOp::Agg { src, func, attr, by } => IslandOp::Agg {
                src: f(src)?,
                func,
                attr,
                by,
            },
            IslandOp::Select { src, rows, cols } => IslandOp::Select {
                src: f(src)?,
                rows,
                cols,
            },
            IslandOp::MatMul { a, b, semiring } => {
                let a = f(a)?;
                IslandOp::MatMul { a, b: f(b)?, semiring }
            }
            IslandOp::Ewise { a, b, op } => {
                let a = f(a)?;
                IslandOp::Ewise { a, b: f(b)?, op }
            }
            IslandOp::Transpose { src } => IslandOp::Transpose { src: f(src)? },
            IslandOp::Native(t) => IslandOp::Native(t),
        })
    }

    pub fn map_sources<T>(self, mut f: impl FnMut(S) -> T) -> IslandOp<T> {
        self.try_map_sources(|s| Ok::<T, std::convert::Infallible>(f(s)))
            .unwrap_or_else(|e| match e {})
    }

    /// Literal lexemes in textual order: predicate constants, ranges,
    /// bounds, patterns and LIMIT.
    pub fn literals(&self) -> Vec<String> {
        let mut out = Vec::new();
        let range = |out: &mut Vec<String>, r: &Option<KeyRange>| {
            if let Some((lo, hi)) = r {
                out.push(dq(lo));
                out.push(dq(hi));
            }
        };
        match self {
            IslandOp::Query(q) => out.extend(q.literals().iter().map(|v| v.lexeme())),
            IslandOp::Scan { rows, cols, .. } | IslandOp::Select { rows, cols, .. } => {
                range(&mut out, rows);
                range(&mut out, cols);
            }
            IslandOp::Grep { pattern, .. } => out.push(dq(pattern)),
            IslandOp::Subarray { ranges, .. } => {
                for r in ranges {
                    out.push(r.lo.to_string());
                    out.push(r.hi.to_string());
                }
            }
            IslandOp::Filter { pred, .. } => pred.for_each_literal(&mut |v| out.push(v.lexeme())),
            IslandOp::Agg { .. }
            | IslandOp::MatMul { .. }
            | IslandOp::Ewise { .. }
            | IslandOp::Transpose { .. }
            | IslandOp::Native(_) => {}
        }
        out
    }

    /// Operator text with literals replaced by `?` and each source by `source`.
    pub fn shape(&self, source: &dyn Fn(&S) -> String) -> String {
        let range = |r: &Option<KeyRange>| if r.is_some() { "?:?" } else { "*" };
        match self {
            IslandOp::Query(q) => sql::select_shape(q, source),
            IslandOp::Scan { src, rows, cols } => {
                format!("scan({}, rows {}, cols {})", source(src), range(rows), range(cols))
            }
            IslandOp::Grep { src, .. } => format!("grep({}, ?)", source(src)),
            IslandOp::Subarray { src, ranges } => {
                let dims: Vec<String> = ranges.iter().map(|r| format!("{}=?:?", r.dim)).collect();
                format!("subarray({}, {})", source(src), dims.join(", "))
            }
            IslandOp::Filter { src, pred } => format!("filter({}, {})", source(src), pred.to_shape()),
            IslandOp::Agg { src, func, attr, by } => format!(
                "agg({}, {}({}), {})",
                source(src),
                func.name(),
                attr.as_deref().unwrap_or("*"),
                by.join(", ")
            ),
            IslandOp::Select { src, rows, cols } => {
                format!("select({}, {}, {})", source(src), range(rows), range(cols))
            }
            IslandOp::MatMul { a, b, semiring } => {
                format!("matmul({}, {}, {semiring})", source(a), source(b))
            }
            IslandOp::Ewise { a, b, op } => format!("ewise({}, {}, {op})", source(a), source(b)),
            IslandOp::Transpose { src } => format!("transpose({})", source(src)),
            IslandOp::Native(_) => "native(?)".to_string(),
        }
    }
}

/// Double-quoted string with `""` escaping.
pub fn dq(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn sq(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Island {
    pub name: String,
    pub model: EngineModel,
    pub operators: Vec<OperatorId>,
    pub members: Vec<EngineId>,
}

impl Island {
    pub fn is_degenerate(&self) -> bool {
        self.operators == [OperatorId::NativePassthrough]
    }

    /// First member; used when nothing else picks a site.
    pub fn default_engine(&self) -> &EngineId {
        &self.members[0]
    }

    pub fn has_operator(&self, op: OperatorId) -> bool {
        self.operators.contains(&op)
    }
}

/// Operators one (island, engine) pair can translate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shim {
    pub island: String,
    pub engine: EngineId,
    pub operators: Vec<OperatorId>,
}

#[derive(Debug, Clone)]
pub struct IslandRegistry {
    islands: BTreeMap<String, Island>,
    shims: BTreeMap<(String, EngineId), Shim>,
}

impl IslandRegistry {
    pub fn register_defaults(catalog: &Catalog) -> Result<Self> {
        for e in [EngineId::rel(), EngineId::kv(), EngineId::arr()] {
            if !catalog.has_engine(&e) {
                return Err(Error::UnknownEngine(format!("{e} (required by the default islands)")));
            }
        }
        use OperatorId::*;
        let mut r = IslandRegistry {
            islands: BTreeMap::new(),
            shims: BTreeMap::new(),
        };
        r.add(
            "relational",
            EngineModel::Relational,
            &[Select],
            &[(EngineId::rel(), &[Select])],
        );
        r.add(
            "text",
            EngineModel::KeyValue,
            &[Scan, Grep],
            &[(EngineId::kv(), &[Scan, Grep])],
        );
        r.add(
            "array",
            EngineModel::Array,
            &[Subarray, Filter, Agg],
            &[(EngineId::arr(), &[Subarray, Filter, Agg])],
        );
        r.add(
            "d4m",
            EngineModel::KeyValue,
            &[Select, MatMul, Ewise, Transpose],
            &[
                (EngineId::rel(), &[Select, MatMul, Transpose]),
                (EngineId::kv(), &[Select, MatMul, Ewise]),
                (EngineId::arr(), &[Select, MatMul]),
            ],
        );
        for e in [EngineId::rel(), EngineId::kv(), EngineId::arr()] {
            let model = catalog.engine_model(&e)?;
            r.add(
                &format!("raw.{e}"),
                model,
                &[NativePassthrough],
                &[(e.clone(), &[NativePassthrough])],
            );
        }
        Ok(r)
    }

    fn add(&mut self, name: &str, model: EngineModel, operators: &[OperatorId], shims: &[(EngineId, &[OperatorId])]) {
        self.islands.insert(
            name.to_string(),
            Island {
                name: name.to_string(),
                model,
                operators: operators.to_vec(),
                members: shims.iter().map(|(e, _)| e.clone()).collect(),
            },
        );
        for (e, ops) in shims {
            self.shims.insert(
                (name.to_string(), e.clone()),
                Shim {
                    island: name.to_string(),
                    engine: e.clone(),
                    operators: ops.to_vec(),
                },
            );
        }
    }

    pub fn island(&self, name: &str) -> Result<&Island> {
        self.islands
            .get(name)
            .ok_or_else(|| Error::UnknownIsland(name.to_string()))
    }

    pub fn islands(&self) -> impl Iterator<Item = &Island> {
        self.islands.values()
    }

    pub fn supports(&self, island: &str, engine: &EngineId, op: OperatorId) -> Result<bool> {
        self.island(island)?;
        Ok(self
            .shims
            .get(&(island.to_string(), engine.clone()))
            .is_some_and(|s| s.operators.contains(&op)))
    }

    /// Members of `island` able to run `op`, in member order.
    pub fn sites(&self, island: &str, op: OperatorId) -> Result<Vec<EngineId>> {
        let isl = self.island(island)?;
        Ok(isl
            .members
            .iter()
            .filter(|e| self.supports(island, e, op).unwrap_or(false))
            .cloned()
            .collect())
    }

    /// Native text for `op` on `engine`. Sources are object names already
    /// resident on that engine in the island's encoding for it.
    pub fn translate(
        &self,
        catalog: &Catalog,
        island: &str,
        op: &IslandOp<String>,
        engine: &EngineId,
    ) -> Result<String> {
        let operator = op.operator();
        if !self.island(island)?.has_operator(operator) {
            return Err(Error::OperatorNotInIsland {
                island: island.to_string(),
                operator: operator.to_string(),
            });
        }
        if !self.supports(island, engine, operator)? {
            return Err(unsupported(island, engine, operator));
        }
        let model = catalog.engine_model(engine)?;
        Ok(match (op, model) {
            (IslandOp::Native(text), _) => text.clone(),
            (IslandOp::Query(q), EngineModel::Relational) => sql::print_select(q, &|s| s.clone()),
            (IslandOp::Scan { src, rows, cols } | IslandOp::Select { src, rows, cols }, EngineModel::KeyValue) => {
                let mut s = format!("SCAN {src}");
                if let Some((lo, hi)) = rows {
                    s += &format!(" ROWS {}:{}", dq(lo), dq(hi));
                }
                if let Some((lo, hi)) = cols {
                    s += &format!(" COLS {}:{}", dq(lo), dq(hi));
                }
                s
            }
            (IslandOp::Grep { src, pattern }, EngineModel::KeyValue) => {
                format!("GREP {src} {}", dq(pattern))
            }
            (IslandOp::Subarray { src, ranges }, EngineModel::Array) => {
                let r: Vec<String> = ranges.iter().map(|r| format!("{}={}:{}", r.dim, r.lo, r.hi)).collect();
                format!("SUBARRAY {src} {}", r.join(", ")).trim_end().to_string()
            }
            (IslandOp::Filter { src, pred }, EngineModel::Array) => {
                format!("FILTER {src} {}", sql::print_expr(pred))
            }
            (IslandOp::Agg { src, func, attr, by }, EngineModel::Array) => format!(
                "AGG {}({}) {src} BY ({})",
                func.name(),
                attr.as_deref().unwrap_or("*"),
                by.join(", ")
            ),
            (IslandOp::MatMul { a, b, semiring }, EngineModel::KeyValue | EngineModel::Array) => {
                format!("MATMUL {a} {b} SEMIRING {semiring}")
            }
            (IslandOp::Ewise { a, b, op }, EngineModel::KeyValue) => format!("EWISE {a} {b} {op}"),
            (IslandOp::Select { src, rows, cols }, EngineModel::Relational) => {
                let mut preds = Vec::new();
                for (col, r) in [("r", rows), ("c", cols)] {
                    if let Some((lo, hi)) = r {
                        preds.push(format!("{col} >= {} AND {col} <= {}", sq(lo), sq(hi)));
                    }
                }
                let mut s = format!("SELECT r, c, v FROM {src}");
                if !preds.is_empty() {
                    s += &format!(" WHERE {}", preds.join(" AND "));
                }
                s
            }
            (IslandOp::MatMul { a, b, semiring }, EngineModel::Relational) => {
                let (reduce, combine) = match semiring {
                    Semiring::PlusTimes => ("SUM", "*"),
                    Semiring::MinPlus => ("MIN", "+"),
                    Semiring::MaxTimes => ("MAX", "*"),
                };
                format!(
                    "SELECT x.r AS r, y.c AS c, {reduce}(x.v {combine} y.v) AS v \
                     FROM {a} x JOIN {b} y ON x.c = y.r GROUP BY x.r, y.c"
                )
            }
            (IslandOp::Transpose { src }, EngineModel::Relational) => {
                format!("SELECT c AS r, r AS c, v FROM {src}")
            }
            (IslandOp::Select { src, rows, cols }, EngineModel::Array) => {
                let Some((_, ObjectMeta::Array(layout))) = catalog.meta(src) else {
                    return Err(Error::UnknownObject(format!("{engine}.{src}")));
                };
                if layout.dims.len() != 2 {
                    return Err(Error::ModelMismatch(format!(
                        "d4m data on the array engine must be 2-D, `{src}` has {} dimensions",
                        layout.dims.len()
                    )));
                }
                let mut parts = Vec::new();
                for (dim, r) in layout.dims.iter().zip([rows, cols]) {
                    let Some((lo, hi)) = r else { continue };
                    let labels = dim.labels.as_ref().ok_or_else(|| {
                        Error::ModelMismatch(format!("dimension `{}` of `{src}` has no key map", dim.name))
                    })?;
                    let first = labels.partition_point(|l| l.as_str() < lo.as_str()) as i64;
                    let last = labels.partition_point(|l| l.as_str() <= hi.as_str()) as i64 - 1;
                    parts.push(format!("{}={}:{}", dim.name, first, last));
                }
                format!("SUBARRAY {src} {}", parts.join(", ")).trim_end().to_string()
            }
            _ => return Err(unsupported(island, engine, operator)),
        })
    }
}

fn unsupported(island: &str, engine: &EngineId, op: OperatorId) -> Error {
    Error::Unsupported {
        island: island.to_string(),
        engine: engine.to_string(),
        operator: op.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> (Catalog, IslandRegistry) {
        let c = Catalog::with_default_engines();
        let r = IslandRegistry::register_defaults(&c).unwrap();
        (c, r)
    }

    #[test]
    fn default_islands() {
        let (_, r) = reg();
        let d4m = r.island("d4m").unwrap();
        assert_eq!(d4m.members, [EngineId::rel(), EngineId::kv(), EngineId::arr()]);
        assert_eq!(d4m.default_engine(), &EngineId::rel());
        let raw = r.island("raw.kv").unwrap();
        assert!(raw.is_degenerate());
        assert_eq!(raw.members.len(), 1);
        assert!(r.supports("d4m", &EngineId::kv(), OperatorId::MatMul).unwrap());
        assert!(!r.supports("d4m", &EngineId::arr(), OperatorId::Grep).unwrap());
        assert!(r
            .supports("raw.rel", &EngineId::rel(), OperatorId::NativePassthrough)
            .unwrap());
        assert!(r.supports("nope", &EngineId::kv(), OperatorId::Scan).is_err());
    }

    #[test]
    fn missing_engine_is_named() {
        let mut c = Catalog::empty();
        c.add_engine(EngineId::rel(), Box::new(crate::engines::RelationalEngine::default()));
        c.add_engine(EngineId::kv(), Box::new(crate::engines::KeyValueEngine::default()));
        let err = IslandRegistry::register_defaults(&c).unwrap_err();
        assert!(err.to_string().contains("arr"), "{err}");
    }

    #[test]
    fn translations() {
        let (c, r) = reg();
        let mm = IslandOp::MatMul {
            a: "A".to_string(),
            b: "B".to_string(),
            semiring: Semiring::PlusTimes,
        };
        assert_eq!(
            r.translate(&c, "d4m", &mm, &EngineId::kv()).unwrap(),
            "MATMUL A B SEMIRING plus.times"
        );
        let sql = r.translate(&c, "d4m", &mm, &EngineId::rel()).unwrap();
        assert!(
            sql.starts_with("SELECT x.r AS r, y.c AS c, SUM(x.v * y.v) AS v"),
            "{sql}"
        );
        let q = IslandOp::Query(sql::parse_native("SELECT id FROM patients").unwrap());
        assert!(matches!(
            r.translate(&c, "relational", &q, &EngineId::arr()),
            Err(Error::Unsupported { .. })
        ));
        let native = IslandOp::Native("SCAN  notes".to_string());
        assert_eq!(
            r.translate(&c, "raw.kv", &native, &EngineId::kv()).unwrap(),
            "SCAN  notes"
        );
    }
}
