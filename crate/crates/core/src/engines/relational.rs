//! In-memory relational engine executing the SELECT mini-language.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::error::{Error, Result};
use crate::sql::{self, AggFunc, BinOp, Expr, SelectItem, SelectStmt, UnaryOp};
use crate::value::{CanonicalTable, Column, Row, Tag, Value};

use super::{EngineModel, LoadOptions, NativeResult, ObjectMeta, StorageEngine};

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub schema: Vec<Column>,
    pub key: Option<Vec<String>>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Default)]
pub struct RelationalEngine {
    tables: BTreeMap<String, Relation>,
}

impl RelationalEngine {
    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.tables.get(name)
    }

    pub fn execute_stmt(&self, stmt: &SelectStmt<String>) -> Result<CanonicalTable> {
        let lookup = |name: &str| {
            self.tables
                .get(name)
                .map(|r| (r.schema.as_slice(), r.rows.as_slice()))
                .ok_or_else(|| Error::UnknownObject(name.to_string()))
        };
        execute_select(stmt, &lookup)
    }
}

impl StorageEngine for RelationalEngine {
    fn model(&self) -> EngineModel {
        EngineModel::Relational
    }

    fn load(&mut self, name: &str, table: &CanonicalTable, options: &LoadOptions) -> Result<()> {
        if options.dims.is_some() {
            return Err(Error::Schema(
                "relational objects take key columns, not dimensions".into(),
            ));
        }
        let mut seen = HashSet::new();
        for c in &table.schema {
            if !super::is_identifier(&c.name) || sql::is_reserved(&c.name) {
                return Err(Error::Schema(format!("`{}` is not a valid column name", c.name)));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        if let Some(key) = &options.key {
            let idx: Vec<usize> = key
                .iter()
                .map(|k| {
                    table
                        .column_index(k)
                        .ok_or_else(|| Error::Schema(format!("key column `{k}` not in schema")))
                })
                .collect::<Result<_>>()?;
            let mut keys = HashSet::new();
            for row in &table.rows {
                let k: Vec<&Value> = idx.iter().map(|&i| &row[i]).collect();
                if k.iter().any(|v| v.is_null()) {
                    return Err(Error::Schema("null in key column".into()));
                }
                if !keys.insert(k) {
                    return Err(Error::Schema(format!("duplicate key in `{name}`")));
                }
            }
        }
        self.tables.insert(
            name.to_string(),
            Relation {
                schema: table.schema.clone(),
                key: options.key.clone(),
                rows: table.rows.clone(),
            },
        );
        Ok(())
    }

    fn export(&self, name: &str) -> Result<CanonicalTable> {
        let r = self
            .tables
            .get(name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))?;
        Ok(CanonicalTable::new(r.schema.clone(), r.rows.clone()))
    }

    fn execute(&self, query: &str) -> Result<NativeResult> {
        let stmt = sql::parse_native(query)?;
        Ok(NativeResult::table(self.execute_stmt(&stmt)?))
    }

    fn drop_object(&mut self, name: &str) -> Result<()> {
        self.tables
            .remove(name)
            .map(|_| ())
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    fn meta(&self, name: &str) -> Option<ObjectMeta> {
        self.tables.get(name).map(|r| ObjectMeta::Relation {
            schema: r.schema.clone(),
            key: r.key.clone(),
        })
    }

    fn stored_options(&self, name: &str) -> Option<LoadOptions> {
        self.tables.get(name).map(|r| LoadOptions {
            key: r.key.clone(),
            dims: None,
        })
    }
}

/// Static expression type. Booleans exist only inside predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Ty {
    Int,
    Real,
    Text,
    Bool,
}

impl Ty {
    fn of(tag: Tag) -> Ty {
        match tag {
            Tag::Int => Ty::Int,
            Tag::Real => Ty::Real,
            Tag::Text => Ty::Text,
        }
    }

    pub(crate) fn tag(self) -> Option<Tag> {
        match self {
            Ty::Int => Some(Tag::Int),
            Ty::Real => Some(Tag::Real),
            Ty::Text => Some(Tag::Text),
            Ty::Bool => None,
        }
    }

    fn numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Real)
    }

    fn name(self) -> &'static str {
        match self {
            Ty::Int => "int",
            Ty::Real => "real",
            Ty::Text => "text",
            Ty::Bool => "boolean",
        }
    }
}

/// Column namespace: `(qualifier, name, tag)` per position.
#[derive(Debug, Clone, Default)]
pub(crate) struct Scope {
    pub cols: Vec<(Option<String>, String, Tag)>,
}

impl Scope {
    pub(crate) fn from_schema(qualifier: Option<&str>, schema: &[Column]) -> Self {
        Scope {
            cols: schema
                .iter()
                .map(|c| (qualifier.map(str::to_string), c.name.clone(), c.tag))
                .collect(),
        }
    }

    fn resolve(&self, qualifier: Option<&str>, name: &str) -> Result<usize> {
        let mut hits = self
            .cols
            .iter()
            .enumerate()
            .filter(|(_, (q, n, _))| n == name && qualifier.is_none_or(|want| q.as_deref() == Some(want)));
        let display = || match qualifier {
            Some(q) => format!("{q}.{name}"),
            None => name.to_string(),
        };
        let first = hits.next().ok_or_else(|| Error::UnknownColumn(display()))?;
        if hits.next().is_some() {
            return Err(Error::AmbiguousColumn(display()));
        }
        Ok(first.0)
    }
}

/// Expression with columns resolved to positions.
#[derive(Debug, Clone)]
pub(crate) enum CExpr {
    Col(usize),
    Lit(Value),
    Not(Box<CExpr>),
    Neg(Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    /// Index into the aggregate slot vector.
    Agg(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct AggSlot {
    func: AggFunc,
    arg: Option<CExpr>,
    arg_ty: Option<Ty>,
}

pub(crate) struct Compiler<'a> {
    scope: &'a Scope,
    pub aggs: Vec<AggSlot>,
    allow_agg: bool,
}

impl<'a> Compiler<'a> {
    pub(crate) fn new(scope: &'a Scope, allow_agg: bool) -> Self {
        Compiler {
            scope,
            aggs: Vec::new(),
            allow_agg,
        }
    }

    pub(crate) fn compile(&mut self, e: &Expr) -> Result<(CExpr, Ty)> {
        match e {
            Expr::Column { qualifier, name } => {
                let i = self.scope.resolve(qualifier.as_deref(), name)?;
                Ok((CExpr::Col(i), Ty::of(self.scope.cols[i].2)))
            }
            Expr::Literal(v) => {
                let ty = match v {
                    Value::Int(_) => Ty::Int,
                    Value::Real(_) => Ty::Real,
                    Value::Text(_) => Ty::Text,
                    Value::Null => return Err(Error::Type("NULL literal".into())),
                };
                Ok((CExpr::Lit(v.clone()), ty))
            }
            Expr::Unary { op, expr } => {
                let (c, ty) = self.compile(expr)?;
                match op {
                    UnaryOp::Not if ty == Ty::Bool => Ok((CExpr::Not(Box::new(c)), Ty::Bool)),
                    UnaryOp::Neg if ty.numeric() => Ok((CExpr::Neg(Box::new(c)), ty)),
                    _ => Err(Error::Type(format!("cannot apply {op:?} to {}", ty.name()))),
                }
            }
            Expr::Binary { op, left, right } => {
                let (l, lt) = self.compile(left)?;
                let (r, rt) = self.compile(right)?;
                let ty = match op {
                    BinOp::And | BinOp::Or => {
                        if lt != Ty::Bool || rt != Ty::Bool {
                            return Err(Error::Type(format!("{} needs boolean operands", op.symbol())));
                        }
                        Ty::Bool
                    }
                    op if op.is_comparison() => {
                        let ok = (lt.numeric() && rt.numeric()) || (lt == Ty::Text && rt == Ty::Text);
                        if !ok {
                            return Err(Error::Type(format!("cannot compare {} with {}", lt.name(), rt.name())));
                        }
                        Ty::Bool
                    }
                    BinOp::Div => {
                        if !lt.numeric() || !rt.numeric() {
                            return Err(Error::Type("division needs numeric operands".into()));
                        }
                        Ty::Real
                    }
                    _ => {
                        if !lt.numeric() || !rt.numeric() {
                            return Err(Error::Type(format!(
                                "arithmetic `{}` on {} and {}",
                                op.symbol(),
                                lt.name(),
                                rt.name()
                            )));
                        }
                        if lt == Ty::Int && rt == Ty::Int {
                            Ty::Int
                        } else {
                            Ty::Real
                        }
                    }
                };
                Ok((CExpr::Bin(*op, Box::new(l), Box::new(r)), ty))
            }
            Expr::Agg { func, arg } => {
                if !self.allow_agg {
                    return Err(Error::Type(format!(
                        "aggregate {} not allowed here",
                        func.name().to_uppercase()
                    )));
                }
                let (carg, arg_ty) = match arg {
                    None => (None, None),
                    Some(a) => {
                        let mut inner = Compiler::new(self.scope, false);
                        let (c, t) = inner.compile(a)?;
                        (Some(c), Some(t))
                    }
                };
                let ty = match (func, arg_ty) {
                    (AggFunc::Count, _) => Ty::Int,
                    (_, Some(Ty::Bool)) => return Err(Error::Type("aggregate over boolean".into())),
                    (AggFunc::Sum, Some(t)) if t.numeric() => t,
                    (AggFunc::Avg, Some(t)) if t.numeric() => Ty::Real,
                    (AggFunc::Min | AggFunc::Max, Some(t)) => t,
                    (f, t) => {
                        return Err(Error::Type(format!(
                            "{} over {}",
                            f.name().to_uppercase(),
                            t.map_or("*", Ty::name)
                        )))
                    }
                };
                self.aggs.push(AggSlot {
                    func: *func,
                    arg: carg,
                    arg_ty,
                });
                Ok((CExpr::Agg(self.aggs.len() - 1), ty))
            }
        }
    }
}

fn bool_value(b: Option<bool>) -> Value {
    match b {
        Some(true) => Value::Int(1),
        Some(false) => Value::Int(0),
        None => Value::Null,
    }
}

fn as_bool(v: &Value) -> Option<bool> {
    match v {
        Value::Int(i) => Some(*i != 0),
        _ => None,
    }
}

fn overflow() -> Error {
    Error::Type("integer overflow".into())
}

impl CExpr {
    pub(crate) fn eval(&self, row: &[Value], aggs: &[Value]) -> Result<Value> {
        match self {
            CExpr::Col(i) => Ok(row[*i].clone()),
            CExpr::Lit(v) => Ok(v.clone()),
            CExpr::Agg(i) => Ok(aggs[*i].clone()),
            CExpr::Not(e) => Ok(bool_value(as_bool(&e.eval(row, aggs)?).map(|b| !b))),
            CExpr::Neg(e) => Ok(match e.eval(row, aggs)? {
                Value::Int(i) => Value::Int(i.checked_neg().ok_or_else(overflow)?),
                Value::Real(r) => Value::Real(-r),
                _ => Value::Null,
            }),
            CExpr::Bin(op, l, r) => {
                let lv = l.eval(row, aggs)?;
                match op {
                    BinOp::And => {
                        let a = as_bool(&lv);
                        if a == Some(false) {
                            return Ok(Value::Int(0));
                        }
                        let b = as_bool(&r.eval(row, aggs)?);
                        Ok(bool_value(match (a, b) {
                            (_, Some(false)) => Some(false),
                            (Some(true), Some(true)) => Some(true),
                            _ => None,
                        }))
                    }
                    BinOp::Or => {
                        let a = as_bool(&lv);
                        if a == Some(true) {
                            return Ok(Value::Int(1));
                        }
                        let b = as_bool(&r.eval(row, aggs)?);
                        Ok(bool_value(match (a, b) {
                            (_, Some(true)) => Some(true),
                            (Some(false), Some(false)) => Some(false),
                            _ => None,
                        }))
                    }
                    op => {
                        let rv = r.eval(row, aggs)?;
                        if lv.is_null() || rv.is_null() {
                            return Ok(Value::Null);
                        }
                        if op.is_comparison() {
                            let ord = lv.compare(&rv)?;
                            use std::cmp::Ordering::*;
                            let b = match op {
                                BinOp::Eq => ord == Equal,
                                BinOp::NotEq => ord != Equal,
                                BinOp::Lt => ord == Less,
                                BinOp::LtEq => ord != Greater,
                                BinOp::Gt => ord == Greater,
                                _ => ord != Less,
                            };
                            return Ok(bool_value(Some(b)));
                        }
                        arith(*op, &lv, &rv)
                    }
                }
            }
        }
    }

    pub(crate) fn eval_pred(&self, row: &[Value]) -> Result<bool> {
        Ok(as_bool(&self.eval(row, &[])?) == Some(true))
    }
}

fn arith(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    if let (Value::Int(x), Value::Int(y), false) = (a, b, op == BinOp::Div) {
        let r = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            _ => x.checked_mul(*y),
        };
        return r.map(Value::Int).ok_or_else(overflow);
    }
    let (x, y) = match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::Type("arithmetic on non-numeric value".into())),
    };
    let r = match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        _ => {
            if y == 0.0 {
                return Err(Error::Type("division by zero".into()));
            }
            x / y
        }
    };
    Ok(Value::Real(r))
}

impl AggSlot {
    pub(crate) fn compute<'r>(&self, rows: impl Iterator<Item = &'r Row>) -> Result<Value> {
        let mut count: i64 = 0;
        let mut int_sum: i64 = 0;
        let mut real_sum = 0.0;
        let mut best: Option<Value> = None;
        for row in rows {
            let v = match &self.arg {
                None => {
                    count += 1;
                    continue;
                }
                Some(e) => e.eval(row, &[])?,
            };
            if v.is_null() {
                continue;
            }
            count += 1;
            match self.func {
                AggFunc::Count => {}
                AggFunc::Sum | AggFunc::Avg => match v {
                    Value::Int(i) if self.func == AggFunc::Sum && self.arg_ty == Some(Ty::Int) => {
                        int_sum = int_sum.checked_add(i).ok_or_else(overflow)?
                    }
                    other => real_sum += other.as_f64().unwrap_or(0.0),
                },
                AggFunc::Min => {
                    if best.as_ref().is_none_or(|b| v < *b) {
                        best = Some(v);
                    }
                }
                AggFunc::Max => {
                    if best.as_ref().is_none_or(|b| v > *b) {
                        best = Some(v);
                    }
                }
            }
        }
        Ok(match self.func {
            AggFunc::Count => Value::Int(count),
            _ if count == 0 => Value::Null,
            AggFunc::Sum if self.arg_ty == Some(Ty::Int) => Value::Int(int_sum),
            AggFunc::Sum => Value::Real(real_sum),
            AggFunc::Avg => Value::Real(real_sum / count as f64),
            AggFunc::Min | AggFunc::Max => best.unwrap_or(Value::Null),
        })
    }
}

type Lookup<'a> = dyn Fn(&str) -> Result<(&'a [Column], &'a [Row])> + 'a;

fn output_name(item_expr: &Expr, alias: &Option<String>, pos: usize) -> String {
    if let Some(a) = alias {
        return a.clone();
    }
    match item_expr {
        Expr::Column { name, .. } => name.clone(),
        Expr::Agg { func, arg: None } => func.name().to_string(),
        Expr::Agg { func, arg: Some(a) } => match a.as_ref() {
            Expr::Column { name, .. } => format!("{}_{}", func.name(), name),
            _ => format!("{}{}", func.name(), pos),
        },
        _ => format!("expr{pos}"),
    }
}

/// Evaluate a SELECT over tables supplied by `lookup`.
pub(crate) fn execute_select<'a>(stmt: &SelectStmt<String>, lookup: &Lookup<'a>) -> Result<CanonicalTable> {
    // FROM and JOINs
    let mut qualifiers = HashSet::new();
    let mut scope = Scope::default();
    let mut rows: Vec<Row> = Vec::new();
    for (i, tref) in stmt.tables().enumerate() {
        let (schema, trows) = lookup(&tref.source)?;
        let q = tref.alias.clone().unwrap_or_else(|| tref.source.clone());
        if !qualifiers.insert(q.clone()) {
            return Err(Error::Validation(format!("table reference `{q}` appears twice")));
        }
        let right = Scope::from_schema(Some(&q), schema);
        if i == 0 {
            scope = right;
            rows = trows.to_vec();
            continue;
        }
        let on = &stmt.joins[i - 1].on;
        let mut joined = scope.clone();
        joined.cols.extend(right.cols.iter().cloned());
        let (pred, ty) = Compiler::new(&joined, false).compile(on)?;
        if ty != Ty::Bool {
            return Err(Error::Type("JOIN condition must be boolean".into()));
        }
        rows = join_rows(&rows, trows, &scope, &right, on, &pred)?;
        scope = joined;
    }

    if let Some(f) = &stmt.filter {
        let (pred, ty) = Compiler::new(&scope, false).compile(f)?;
        if ty != Ty::Bool {
            return Err(Error::Type("WHERE condition must be boolean".into()));
        }
        let mut kept = Vec::with_capacity(rows.len());
        for r in rows {
            if pred.eval_pred(&r)? {
                kept.push(r);
            }
        }
        rows = kept;
    }

    // projection list
    let mut compiler = Compiler::new(&scope, true);
    let mut out_exprs: Vec<CExpr> = Vec::new();
    let mut out_schema = Vec::new();
    let mut has_agg = false;
    let mut plain_cols: Vec<usize> = Vec::new();
    for (pos, item) in stmt.items.iter().enumerate() {
        match item {
            SelectItem::Wildcard => {
                for (i, (_, name, tag)) in scope.cols.iter().enumerate() {
                    out_exprs.push(CExpr::Col(i));
                    out_schema.push(Column::new(name.clone(), *tag));
                    plain_cols.push(i);
                }
            }
            SelectItem::Expr { expr, alias } => {
                let (c, ty) = compiler.compile(expr)?;
                let tag = ty
                    .tag()
                    .ok_or_else(|| Error::Type("boolean expression in select list".into()))?;
                has_agg |= expr.contains_agg();
                collect_cols_outside_agg(&c, &mut plain_cols);
                out_exprs.push(c);
                out_schema.push(Column::new(output_name(expr, alias, pos), tag));
            }
        }
    }
    let aggs = compiler.aggs;

    let grouped = has_agg || !stmt.group_by.is_empty();
    let mut out_rows: Vec<Row> = Vec::new();
    if grouped {
        let mut gcomp = Compiler::new(&scope, false);
        let mut group_exprs = Vec::new();
        let mut group_cols = HashSet::new();
        for g in &stmt.group_by {
            let (c, ty) = gcomp.compile(g)?;
            if ty == Ty::Bool {
                return Err(Error::Type("GROUP BY on boolean expression".into()));
            }
            if let CExpr::Col(i) = c {
                group_cols.insert(i);
            }
            group_exprs.push(c);
        }
        if let Some(bad) = plain_cols.iter().find(|i| !group_cols.contains(i)) {
            return Err(Error::Validation(format!(
                "column `{}` must appear in GROUP BY or inside an aggregate",
                scope.cols[*bad].1
            )));
        }
        let mut order: Vec<Vec<Value>> = Vec::new();
        let mut groups: HashMap<Vec<Value>, Vec<usize>> = HashMap::new();
        for (ri, r) in rows.iter().enumerate() {
            let key = group_exprs.iter().map(|g| g.eval(r, &[])).collect::<Result<Vec<_>>>()?;
            groups
                .entry(key.clone())
                .or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                })
                .push(ri);
        }
        if stmt.group_by.is_empty() && order.is_empty() {
            order.push(Vec::new());
            groups.insert(Vec::new(), Vec::new());
        }
        for key in order {
            let members = &groups[&key];
            let agg_vals = aggs
                .iter()
                .map(|a| a.compute(members.iter().map(|&i| &rows[i])))
                .collect::<Result<Vec<_>>>()?;
            let empty = vec![Value::Null; scope.cols.len()];
            let rep = members.first().map_or(&empty, |&i| &rows[i]);
            out_rows.push(
                out_exprs
                    .iter()
                    .map(|e| e.eval(rep, &agg_vals))
                    .collect::<Result<_>>()?,
            );
        }
    } else {
        for r in &rows {
            out_rows.push(out_exprs.iter().map(|e| e.eval(r, &[])).collect::<Result<_>>()?);
        }
    }

    if !stmt.order_by.is_empty() {
        let mut keys = Vec::new();
        for o in &stmt.order_by {
            keys.push((order_column(stmt, &out_schema, &o.expr)?, o.desc));
        }
        out_rows.sort_by(|a, b| {
            for &(i, desc) in &keys {
                let ord = a[i].cmp(&b[i]);
                let ord = if desc { ord.reverse() } else { ord };
                if ord.is_ne() {
                    return ord;
                }
            }
            a.cmp(b)
        });
    }
    if let Some(l) = stmt.limit {
        out_rows.truncate(l as usize);
    }
    Ok(CanonicalTable::new(out_schema, out_rows))
}

fn collect_cols_outside_agg(e: &CExpr, out: &mut Vec<usize>) {
    match e {
        CExpr::Col(i) => out.push(*i),
        CExpr::Lit(_) | CExpr::Agg(_) => {}
        CExpr::Not(x) | CExpr::Neg(x) => collect_cols_outside_agg(x, out),
        CExpr::Bin(_, l, r) => {
            collect_cols_outside_agg(l, out);
            collect_cols_outside_agg(r, out);
        }
    }
}

/// ORDER BY items name an output column, or repeat a selected expression.
fn order_column(stmt: &SelectStmt<String>, out: &[Column], e: &Expr) -> Result<usize> {
    if let Expr::Column { qualifier: None, name } = e {
        if let Some(i) = out.iter().position(|c| &c.name == name) {
            return Ok(i);
        }
    }
    let mut pos = 0;
    for item in &stmt.items {
        match item {
            SelectItem::Wildcard => {
                return Err(Error::Validation(
                    "ORDER BY with `*` must use output column names".into(),
                ))
            }
            SelectItem::Expr { expr, .. } => {
                if expr == e {
                    return Ok(pos);
                }
                pos += 1;
            }
        }
    }
    Err(Error::Validation(format!(
        "ORDER BY `{}` must reference a selected column",
        sql::print_expr(e)
    )))
}

fn join_rows(left: &[Row], right: &[Row], lscope: &Scope, rscope: &Scope, on: &Expr, pred: &CExpr) -> Result<Vec<Row>> {
    // Equi-join on two same-tagged columns, one from each side: hash join.
    if let Expr::Binary {
        op: BinOp::Eq,
        left: a,
        right: b,
    } = on
    {
        if let (
            Expr::Column {
                qualifier: qa,
                name: na,
            },
            Expr::Column {
                qualifier: qb,
                name: nb,
            },
        ) = (a.as_ref(), b.as_ref())
        {
            let sides = [
                (lscope.resolve(qa.as_deref(), na), rscope.resolve(qb.as_deref(), nb)),
                (lscope.resolve(qb.as_deref(), nb), rscope.resolve(qa.as_deref(), na)),
            ];
            for (l, r) in sides {
                if let (Ok(li), Ok(ri)) = (l, r) {
                    if lscope.cols[li].2 == rscope.cols[ri].2 {
                        let mut index: HashMap<&Value, Vec<usize>> = HashMap::new();
                        for (i, row) in right.iter().enumerate() {
                            if !row[ri].is_null() {
                                index.entry(&row[ri]).or_default().push(i);
                            }
                        }
                        let mut out = Vec::new();
                        for lrow in left {
                            if let Some(ms) = index.get(&lrow[li]) {
                                for &m in ms {
                                    let mut row = lrow.clone();
                                    row.extend(right[m].iter().cloned());
                                    out.push(row);
                                }
                            }
                        }
                        return Ok(out);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for lrow in left {
        for rrow in right {
            let mut row = lrow.clone();
            row.extend(rrow.iter().cloned());
            if pred.eval_pred(&row)? {
                out.push(row);
            }
        }
    }
    Ok(out)
}
