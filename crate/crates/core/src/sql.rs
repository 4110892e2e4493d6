//! The relational mini-language: AST, recursive-descent parser, printer.
//!
//! The statement type is generic over its table source so the same grammar
//! serves the relational engine (sources are object names) and the
//! relational island of the polystore language (sources may be casts).

use std::fmt::Write as _;

use crate::error::{Error, Result, Span};
use crate::lexer::{Cursor, TokenKind};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Or,
    And,
    Eq,
    NotEq,
    Lt,
    LtEq,
    Gt,
    GtEq,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::NotEq | BinOp::Lt | BinOp::LtEq | BinOp::Gt | BinOp::GtEq => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Or => "OR",
            BinOp::And => "AND",
            BinOp::Eq => "=",
            BinOp::NotEq => "!=",
            BinOp::Lt => "<",
            BinOp::LtEq => "<=",
            BinOp::Gt => ">",
            BinOp::GtEq => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn is_comparison(self) -> bool {
        self.precedence() == 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn parse(s: &str) -> Option<AggFunc> {
        match s.to_ascii_lowercase().as_str() {
            "count" => Some(AggFunc::Count),
            "sum" => Some(AggFunc::Sum),
            "avg" => Some(AggFunc::Avg),
            "min" => Some(AggFunc::Min),
            "max" => Some(AggFunc::Max),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count => "count",
            AggFunc::Sum => "sum",
            AggFunc::Avg => "avg",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Column {
        qualifier: Option<String>,
        name: String,
    },
    Literal(Value),
    Unary {
        op: UnaryOp,
        expr: Box<Expr>,
    },
    Binary {
        op: BinOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// `arg = None` is `COUNT(*)`.
    Agg {
        func: AggFunc,
        arg: Option<Box<Expr>>,
    },
}

impl Expr {
    pub fn col(name: &str) -> Expr {
        Expr::Column {
            qualifier: None,
            name: name.to_string(),
        }
    }

    pub fn qcol(q: &str, name: &str) -> Expr {
        Expr::Column {
            qualifier: Some(q.to_string()),
            name: name.to_string(),
        }
    }

    pub fn lit(v: impl Into<Value>) -> Expr {
        Expr::Literal(v.into())
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Expr {
        Expr::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn and(self, other: Expr) -> Expr {
        Expr::binary(BinOp::And, self, other)
    }

    pub fn contains_agg(&self) -> bool {
        match self {
            Expr::Agg { .. } => true,
            Expr::Column { .. } | Expr::Literal(_) => false,
            Expr::Unary { expr, .. } => expr.contains_agg(),
            Expr::Binary { left, right, .. } => left.contains_agg() || right.contains_agg(),
        }
    }

    /// Visit every literal in evaluation order.
    pub fn for_each_literal(&self, f: &mut dyn FnMut(&Value)) {
        match self {
            Expr::Literal(v) => f(v),
            Expr::Column { .. } => {}
            Expr::Unary { expr, .. } => expr.for_each_literal(f),
            Expr::Binary { left, right, .. } => {
                left.for_each_literal(f);
                right.for_each_literal(f);
            }
            Expr::Agg { arg, .. } => {
                if let Some(a) = arg {
                    a.for_each_literal(f)
                }
            }
        }
    }

    /// Same expression with every literal replaced by a `?` marker.
    pub fn to_shape(&self) -> String {
        let mut s = String::new();
        print_expr_with(&mut s, self, 0, true);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SelectItem {
    Wildcard,
    Expr { expr: Expr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRef<S> {
    pub source: S,
    pub alias: Option<String>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Join<S> {
    pub table: TableRef<S>,
    pub on: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderItem {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectStmt<S> {
    pub items: Vec<SelectItem>,
    pub from: TableRef<S>,
    pub joins: Vec<Join<S>>,
    pub filter: Option<Expr>,
    pub group_by: Vec<Expr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub span: Span,
}

impl<S> SelectStmt<S> {
    pub fn tables(&self) -> impl Iterator<Item = &TableRef<S>> {
        std::iter::once(&self.from).chain(self.joins.iter().map(|j| &j.table))
    }

    pub fn try_map_sources<T, E>(
        self,
        mut f: impl FnMut(S, &Option<String>) -> std::result::Result<T, E>,
    ) -> std::result::Result<SelectStmt<T>, E> {
        let mut map_ref = |r: TableRef<S>| -> std::result::Result<TableRef<T>, E> {
            let source = f(r.source, &r.alias)?;
            Ok(TableRef {
                source,
                alias: r.alias,
                span: r.span,
            })
        };
        let from = map_ref(self.from)?;
        let mut joins = Vec::with_capacity(self.joins.len());
        for j in self.joins {
            joins.push(Join {
                table: map_ref(j.table)?,
                on: j.on,
            });
        }
        Ok(SelectStmt {
            items: self.items,
            from,
            joins,
            filter: self.filter,
            group_by: self.group_by,
            order_by: self.order_by,
            limit: self.limit,
            span: self.span,
        })
    }

    pub fn map_sources<T>(self, mut f: impl FnMut(S, &Option<String>) -> T) -> SelectStmt<T> {
        self.try_map_sources(|s, a| Ok::<T, std::convert::Infallible>(f(s, a)))
            .unwrap_or_else(|e| match e {})
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        for item in &self.items {
            if let SelectItem::Expr { expr, .. } = item {
                out.push(expr);
            }
        }
        for j in &self.joins {
            out.push(&j.on);
        }
        out.extend(self.filter.iter());
        out.extend(self.group_by.iter());
        out.extend(self.order_by.iter().map(|o| &o.expr));
        out
    }

    /// Literal values in textual order, including LIMIT.
    pub fn literals(&self) -> Vec<Value> {
        let mut out = Vec::new();
        for e in self.exprs() {
            e.for_each_literal(&mut |v| out.push(v.clone()));
        }
        if let Some(l) = self.limit {
            out.push(Value::Int(l as i64));
        }
        out
    }
}

const RESERVED: &[&str] = &[
    "select", "from", "join", "on", "where", "group", "order", "by", "limit", "as", "and", "or", "not", "asc", "desc",
    "inner",
];

pub fn is_reserved(s: &str) -> bool {
    RESERVED.iter().any(|k| k.eq_ignore_ascii_case(s))
}

pub type SourceFn<'a, S> = dyn FnMut(&mut Cursor) -> Result<S> + 'a;

pub fn parse_select<S>(cur: &mut Cursor, source: &mut SourceFn<'_, S>) -> Result<SelectStmt<S>> {
    let start = cur.expect_keyword("select")?;
    let mut items = Vec::new();
    loop {
        if cur.eat(&TokenKind::Star) {
            items.push(SelectItem::Wildcard);
        } else {
            let expr = parse_expr(cur)?;
            let alias = if cur.eat_keyword("as") {
                Some(parse_alias(cur)?)
            } else {
                None
            };
            items.push(SelectItem::Expr { expr, alias });
        }
        if !cur.eat(&TokenKind::Comma) {
            break;
        }
    }
    cur.expect_keyword("from")?;
    let from = parse_table_ref(cur, source)?;
    let mut joins = Vec::new();
    loop {
        if cur.is_keyword("inner") && cur.is_keyword_at(1, "join") {
            cur.advance();
        }
        if !cur.eat_keyword("join") {
            break;
        }
        let table = parse_table_ref(cur, source)?;
        cur.expect_keyword("on")?;
        let on = parse_expr(cur)?;
        joins.push(Join { table, on });
    }
    let filter = if cur.eat_keyword("where") {
        Some(parse_expr(cur)?)
    } else {
        None
    };
    let mut group_by = Vec::new();
    if cur.eat_keyword("group") {
        cur.expect_keyword("by")?;
        loop {
            group_by.push(parse_expr(cur)?);
            if !cur.eat(&TokenKind::Comma) {
                break;
            }
        }
    }
    let mut order_by = Vec::new();
    if cur.eat_keyword("order") {
        cur.expect_keyword("by")?;
        loop {
            let expr = parse_expr(cur)?;
            let desc = if cur.eat_keyword("desc") {
                true
            } else {
                cur.eat_keyword("asc");
                false
            };
            order_by.push(OrderItem { expr, desc });
            if !cur.eat(&TokenKind::Comma) {
                break;
            }
        }
    }
    let limit = if cur.eat_keyword("limit") {
        let span = cur.peek().span;
        let n = cur.expect_int()?;
        Some(u64::try_from(n).map_err(|_| Error::syntax(span, "LIMIT must be non-negative", vec![]))?)
    } else {
        None
    };
    Ok(SelectStmt {
        items,
        from,
        joins,
        filter,
        group_by,
        order_by,
        limit,
        span: start.join(cur.prev_span()),
    })
}

fn parse_alias(cur: &mut Cursor) -> Result<String> {
    match &cur.peek().kind {
        TokenKind::Ident(s) if !is_reserved(s) => {
            let s = s.clone();
            cur.advance();
            Ok(s)
        }
        _ => Err(cur.unexpected(&["alias"])),
    }
}

fn parse_table_ref<S>(cur: &mut Cursor, source: &mut SourceFn<'_, S>) -> Result<TableRef<S>> {
    let start = cur.peek().span;
    let src = source(cur)?;
    let alias = if cur.eat_keyword("as") {
        Some(parse_alias(cur)?)
    } else {
        match &cur.peek().kind {
            TokenKind::Ident(s) if !is_reserved(s) => {
                let s = s.clone();
                cur.advance();
                Some(s)
            }
            _ => None,
        }
    };
    Ok(TableRef {
        source: src,
        alias,
        span: start.join(cur.prev_span()),
    })
}

/// Plain object-name source for the engine's native dialect.
pub fn parse_object_name(cur: &mut Cursor) -> Result<String> {
    match &cur.peek().kind {
        TokenKind::Ident(s) if !is_reserved(s) => {
            let s = s.clone();
            cur.advance();
            Ok(s)
        }
        _ => Err(cur.unexpected(&["table name"])),
    }
}

pub fn parse_native(text: &str) -> Result<SelectStmt<String>> {
    let mut cur = Cursor::new(text)?;
    let stmt = parse_select(&mut cur, &mut parse_object_name)?;
    cur.expect_eof()?;
    Ok(stmt)
}

pub fn parse_expr(cur: &mut Cursor) -> Result<Expr> {
    parse_or(cur)
}

fn parse_or(cur: &mut Cursor) -> Result<Expr> {
    let mut left = parse_and(cur)?;
    while cur.eat_keyword("or") {
        let right = parse_and(cur)?;
        left = Expr::binary(BinOp::Or, left, right);
    }
    Ok(left)
}

fn parse_and(cur: &mut Cursor) -> Result<Expr> {
    let mut left = parse_not(cur)?;
    while cur.eat_keyword("and") {
        let right = parse_not(cur)?;
        left = Expr::binary(BinOp::And, left, right);
    }
    Ok(left)
}

fn parse_not(cur: &mut Cursor) -> Result<Expr> {
    if cur.eat_keyword("not") {
        let inner = parse_not(cur)?;
        return Ok(Expr::Unary {
            op: UnaryOp::Not,
            expr: Box::new(inner),
        });
    }
    parse_comparison(cur)
}

fn parse_comparison(cur: &mut Cursor) -> Result<Expr> {
    let left = parse_additive(cur)?;
    let op = match cur.peek().kind {
        TokenKind::Eq => BinOp::Eq,
        TokenKind::NotEq => BinOp::NotEq,
        TokenKind::Lt => BinOp::Lt,
        TokenKind::LtEq => BinOp::LtEq,
        TokenKind::Gt => BinOp::Gt,
        TokenKind::GtEq => BinOp::GtEq,
        _ => return Ok(left),
    };
    cur.advance();
    let right = parse_additive(cur)?;
    Ok(Expr::binary(op, left, right))
}

fn parse_additive(cur: &mut Cursor) -> Result<Expr> {
    let mut left = parse_multiplicative(cur)?;
    loop {
        let op = match cur.peek().kind {
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            _ => return Ok(left),
        };
        cur.advance();
        let right = parse_multiplicative(cur)?;
        left = Expr::binary(op, left, right);
    }
}

fn parse_multiplicative(cur: &mut Cursor) -> Result<Expr> {
    let mut left = parse_unary(cur)?;
    loop {
        let op = match cur.peek().kind {
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            _ => return Ok(left),
        };
        cur.advance();
        let right = parse_unary(cur)?;
        left = Expr::binary(op, left, right);
    }
}

fn parse_unary(cur: &mut Cursor) -> Result<Expr> {
    if cur.peek().kind == TokenKind::Minus {
        match &cur.peek_at(1).kind {
            TokenKind::Int(_) => {
                let v = cur.expect_int()?;
                return Ok(Expr::Literal(Value::Int(v)));
            }
            TokenKind::Real(s) => {
                let r: f64 = s.parse().map_err(|_| cur.unexpected(&["number"]))?;
                cur.advance();
                cur.advance();
                return Ok(Expr::Literal(Value::Real(-r)));
            }
            _ => {
                cur.advance();
                let inner = parse_unary(cur)?;
                return Ok(Expr::Unary {
                    op: UnaryOp::Neg,
                    expr: Box::new(inner),
                });
            }
        }
    }
    parse_primary(cur)
}

fn parse_primary(cur: &mut Cursor) -> Result<Expr> {
    let tok = cur.peek().clone();
    match &tok.kind {
        TokenKind::Int(_) => Ok(Expr::Literal(Value::Int(cur.expect_int()?))),
        TokenKind::Real(s) => {
            let r: f64 = s
                .parse()
                .map_err(|_| Error::syntax(tok.span, "bad decimal literal", vec![]))?;
            cur.advance();
            Ok(Expr::Literal(Value::Real(r)))
        }
        TokenKind::SqString(s) => {
            cur.advance();
            Ok(Expr::Literal(Value::Text(s.clone())))
        }
        TokenKind::LParen => {
            cur.advance();
            let e = parse_expr(cur)?;
            cur.expect(TokenKind::RParen)?;
            Ok(e)
        }
        TokenKind::Ident(name) if !is_reserved(name) => {
            cur.advance();
            if cur.peek().kind == TokenKind::LParen {
                let func = AggFunc::parse(name)
                    .ok_or_else(|| Error::syntax(tok.span, format!("unknown function `{name}`"), vec![]))?;
                cur.advance();
                let arg = if cur.eat(&TokenKind::Star) {
                    if func != AggFunc::Count {
                        return Err(Error::syntax(cur.prev_span(), "only COUNT accepts `*`", vec![]));
                    }
                    None
                } else {
                    Some(Box::new(parse_expr(cur)?))
                };
                cur.expect(TokenKind::RParen)?;
                return Ok(Expr::Agg { func, arg });
            }
            if cur.eat(&TokenKind::Dot) {
                let (col, _) = cur.expect_ident()?;
                return Ok(Expr::Column {
                    qualifier: Some(name.clone()),
                    name: col,
                });
            }
            Ok(Expr::Column {
                qualifier: None,
                name: name.clone(),
            })
        }
        _ => Err(cur.unexpected(&["expression"])),
    }
}

fn expr_precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Unary { op: UnaryOp::Not, .. } => 3,
        _ => 10,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    print_expr_with(&mut s, e, 0, false);
    s
}

fn print_expr_with(out: &mut String, e: &Expr, min_prec: u8, shape: bool) {
    let prec = expr_precedence(e);
    let paren = prec < min_prec;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Column { qualifier, name } => {
            if let Some(q) = qualifier {
                let _ = write!(out, "{q}.");
            }
            out.push_str(name);
        }
        Expr::Literal(v) => {
            if shape {
                out.push('?');
            } else {
                out.push_str(&v.lexeme());
            }
        }
        Expr::Unary { op: UnaryOp::Not, expr } => {
            out.push_str("NOT ");
            print_expr_with(out, expr, 3, shape);
        }
        Expr::Unary { op: UnaryOp::Neg, expr } => {
            out.push_str("-(");
            print_expr_with(out, expr, 0, shape);
            out.push(')');
        }
        Expr::Binary { op, left, right } => {
            let p = op.precedence();
            let left_min = if op.is_comparison() { p + 1 } else { p };
            print_expr_with(out, left, left_min, shape);
            let _ = write!(out, " {} ", op.symbol());
            print_expr_with(out, right, p + 1, shape);
        }
        Expr::Agg { func, arg } => {
            out.push_str(&func.name().to_ascii_uppercase());
            out.push('(');
            match arg {
                None => out.push('*'),
                Some(a) => print_expr_with(out, a, 0, shape),
            }
            out.push(')');
        }
    }
    if paren {
        out.push(')');
    }
}

pub fn print_select<S>(stmt: &SelectStmt<S>, source: &dyn Fn(&S) -> String) -> String {
    print_select_impl(stmt, source, false)
}

/// Printed form with literals replaced by `?` and sources rendered by `source`.
pub fn select_shape<S>(stmt: &SelectStmt<S>, source: &dyn Fn(&S) -> String) -> String {
    print_select_impl(stmt, source, true)
}

fn print_select_impl<S>(stmt: &SelectStmt<S>, source: &dyn Fn(&S) -> String, shape: bool) -> String {
    let mut out = String::from("SELECT ");
    for (i, item) in stmt.items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        match item {
            SelectItem::Wildcard => out.push('*'),
            SelectItem::Expr { expr, alias } => {
                print_expr_with(&mut out, expr, 0, shape);
                if let Some(a) = alias {
                    let _ = write!(out, " AS {a}");
                }
            }
        }
    }
    let print_ref = |out: &mut String, r: &TableRef<S>| {
        out.push_str(&source(&r.source));
        if let Some(a) = &r.alias {
            let _ = write!(out, " {a}");
        }
    };
    out.push_str(" FROM ");
    print_ref(&mut out, &stmt.from);
    for j in &stmt.joins {
        out.push_str(" JOIN ");
        print_ref(&mut out, &j.table);
        out.push_str(" ON ");
        print_expr_with(&mut out, &j.on, 0, shape);
    }
    if let Some(f) = &stmt.filter {
        out.push_str(" WHERE ");
        print_expr_with(&mut out, f, 0, shape);
    }
    if !stmt.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        for (i, g) in stmt.group_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            print_expr_with(&mut out, g, 0, shape);
        }
    }
    if !stmt.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, o) in stmt.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            print_expr_with(&mut out, &o.expr, 0, shape);
            if o.desc {
                out.push_str(" DESC");
            }
        }
    }
    if let Some(l) = stmt.limit {
        if shape {
            out.push_str(" LIMIT ?");
        } else {
            let _ = write!(out, " LIMIT {l}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(s: &str) -> String {
        let stmt = parse_native(s).unwrap();
        let printed = print_select(&stmt, &|n: &String| n.clone());
        let again = parse_native(&printed).unwrap();
        assert_eq!(stmt, again, "{printed}");
        printed
    }

    #[test]
    fn parses_join_group_order() {
        let p = roundtrip(
            "select a.r, b.c, sum(a.v*b.v) as v from A a join B b on a.c = b.r group by a.r, b.c order by v desc limit 3",
        );
        assert_eq!(
            p,
            "SELECT a.r, b.c, SUM(a.v * b.v) AS v FROM A a JOIN B b ON a.c = b.r GROUP BY a.r, b.c ORDER BY v DESC LIMIT 3"
        );
    }

    #[test]
    fn precedence_and_parens() {
        assert_eq!(
            roundtrip("SELECT x FROM t WHERE (a OR b) AND NOT c = 1 - (2 - 3)"),
            "SELECT x FROM t WHERE (a OR b) AND NOT c = 1 - (2 - 3)"
        );
        assert_eq!(
            roundtrip("SELECT -x, - 5, 2 - -5 FROM t"),
            "SELECT -(x), -5, 2 - -5 FROM t"
        );
    }

    #[test]
    fn reserved_words_are_not_columns() {
        assert!(parse_native("SELECT FROM t").is_err());
        assert!(parse_native("SELECT a FROM").is_err());
        assert!(parse_native("SELECT a FROM t LIMIT -1").is_err());
        assert!(parse_native("SELECT SUM(*) FROM t").is_err());
    }

    #[test]
    fn shape_hides_literals() {
        let s = parse_native("SELECT id FROM patients WHERE age > 60 LIMIT 2").unwrap();
        assert_eq!(
            select_shape(&s, &|_| "?".into()),
            "SELECT id FROM ? WHERE age > ? LIMIT ?"
        );
        assert_eq!(s.literals(), vec![Value::Int(60), Value::Int(2)]);
    }
}
