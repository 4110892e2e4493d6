//! Recursive-descent parser. Island bodies are parsed by operator syntax;
//! whether an operator belongs to its island is left to validation.

use crate::engines::{EwiseOp, Semiring};
use crate::error::{Error, Result, Span};
use crate::island::{DimRange, IslandOp, KeyRange};
use crate::lexer::{Cursor, TokenKind};
use crate::sql::{self, AggFunc};

use super::ast::{CastExpr, Query, Scope, Source};

pub fn parse(text: &str) -> Result<Query> {
    let mut p = Parser {
        src: text,
        cur: Cursor::new(text)?,
    };
    let root = p.scope()?;
    p.cur.expect_eof()?;
    Ok(Query { root })
}

struct Parser<'a> {
    src: &'a str,
    cur: Cursor,
}

const OPERATORS: &[&str] = &[
    "scan",
    "grep",
    "subarray",
    "filter",
    "agg",
    "select",
    "matmul",
    "ewise",
    "transpose",
];

impl Parser<'_> {
    fn scope(&mut self) -> Result<Scope> {
        let (mut island, start) = self.cur.expect_ident()?;
        while self.cur.eat(&TokenKind::Dot) {
            island.push('.');
            island.push_str(&self.cur.expect_ident()?.0);
        }
        let open = self.cur.expect(TokenKind::LParen)?;
        let body = if island.starts_with("raw.") {
            IslandOp::Native(self.raw_body(open)?)
        } else if self.cur.is_keyword("select")
            && (island == "relational" || self.cur.peek_at(1).kind != TokenKind::LParen)
        {
            let src = self.src;
            IslandOp::Query(sql::parse_select(&mut self.cur, &mut |c: &mut Cursor| {
                sql_source(src, c)
            })?)
        } else {
            self.op_call()?.0
        };
        let close = self.cur.expect(TokenKind::RParen)?;
        Ok(Scope {
            island,
            body,
            span: start.join(close),
        })
    }

    /// Text up to the parenthesis matching `open`, verbatim.
    fn raw_body(&mut self, open: Span) -> Result<String> {
        let mut depth = 0usize;
        loop {
            let tok = self.cur.peek().clone();
            match tok.kind {
                TokenKind::Eof => return Err(Error::syntax(tok.span, "unterminated raw scope", vec!["`)`".into()])),
                TokenKind::LParen => depth += 1,
                TokenKind::RParen if depth == 0 => {
                    let body = &self.src[open.end..tok.span.start];
                    if body.trim().is_empty() {
                        return Err(Error::syntax(tok.span, "empty raw scope", vec!["native query".into()]));
                    }
                    return Ok(body.to_string());
                }
                TokenKind::RParen => depth -= 1,
                _ => {}
            }
            self.cur.advance();
        }
    }

    fn op_call(&mut self) -> Result<(IslandOp<Source>, Span)> {
        let (name, start) = self.cur.expect_ident()?;
        let lower = name.to_ascii_lowercase();
        if !OPERATORS.contains(&lower.as_str()) {
            return Err(Error::syntax(
                start,
                format!("unknown operator `{name}`"),
                OPERATORS.iter().map(|s| s.to_string()).collect(),
            ));
        }
        self.cur.expect(TokenKind::LParen)?;
        let src = self.source()?;
        let op = match lower.as_str() {
            "scan" => {
                let mut rows = None;
                let mut cols = None;
                while self.cur.eat(&TokenKind::Comma) {
                    if rows.is_none() && cols.is_none() && self.cur.eat_keyword("rows") {
                        rows = Some(self.key_range()?);
                    } else if cols.is_none() && self.cur.eat_keyword("cols") {
                        cols = Some(self.key_range()?);
                    } else {
                        return Err(self.cur.unexpected(&["rows", "cols"]));
                    }
                }
                IslandOp::Scan { src, rows, cols }
            }
            "grep" => {
                self.cur.expect(TokenKind::Comma)?;
                IslandOp::Grep {
                    src,
                    pattern: self.cur.expect_dq_string()?,
                }
            }
            "subarray" => {
                let mut ranges = Vec::new();
                while self.cur.eat(&TokenKind::Comma) {
                    let (dim, _) = self.cur.expect_ident()?;
                    self.cur.expect(TokenKind::Eq)?;
                    let lo = self.cur.expect_int()?;
                    self.cur.expect(TokenKind::Colon)?;
                    let hi = self.cur.expect_int()?;
                    ranges.push(DimRange { dim, lo, hi });
                }
                IslandOp::Subarray { src, ranges }
            }
            "filter" => {
                self.cur.expect(TokenKind::Comma)?;
                IslandOp::Filter {
                    src,
                    pred: sql::parse_expr(&mut self.cur)?,
                }
            }
            "agg" => {
                self.cur.expect(TokenKind::Comma)?;
                let fspan = self.cur.peek().span;
                let (fname, _) = self.cur.expect_ident()?;
                let func = AggFunc::parse(&fname).ok_or_else(|| {
                    Error::syntax(
                        fspan,
                        format!("unknown aggregate `{fname}`"),
                        vec!["count".into(), "sum".into(), "avg".into(), "min".into(), "max".into()],
                    )
                })?;
                self.cur.expect(TokenKind::LParen)?;
                let attr = if func == AggFunc::Count && self.cur.eat(&TokenKind::Star) {
                    None
                } else {
                    Some(self.cur.expect_ident()?.0)
                };
                self.cur.expect(TokenKind::RParen)?;
                let mut by = Vec::new();
                while self.cur.eat(&TokenKind::Comma) {
                    by.push(self.cur.expect_ident()?.0);
                }
                IslandOp::Agg { src, func, attr, by }
            }
            "select" => {
                self.cur.expect(TokenKind::Comma)?;
                let rows = self.range_or_star()?;
                self.cur.expect(TokenKind::Comma)?;
                let cols = self.range_or_star()?;
                IslandOp::Select { src, rows, cols }
            }
            "matmul" => {
                self.cur.expect(TokenKind::Comma)?;
                let b = self.source()?;
                let semiring = if self.cur.eat(&TokenKind::Comma) {
                    crate::engines::parse_semiring(&mut self.cur)?
                } else {
                    Semiring::PlusTimes
                };
                IslandOp::MatMul { a: src, b, semiring }
            }
            "ewise" => {
                self.cur.expect(TokenKind::Comma)?;
                let b = self.source()?;
                self.cur.expect(TokenKind::Comma)?;
                let span = self.cur.peek().span;
                let (name, _) = self.cur.expect_ident()?;
                let op = EwiseOp::parse(&name).ok_or_else(|| {
                    Error::syntax(
                        span,
                        format!("unknown element-wise op `{name}`"),
                        vec!["plus".into(), "min".into(), "max".into()],
                    )
                })?;
                IslandOp::Ewise { a: src, b, op }
            }
            _ => IslandOp::Transpose { src },
        };
        let end = self.cur.expect(TokenKind::RParen)?;
        Ok((op, start.join(end)))
    }

    fn key_range(&mut self) -> Result<KeyRange> {
        let lo = self.cur.expect_dq_string()?;
        self.cur.expect(TokenKind::Colon)?;
        let hi = self.cur.expect_dq_string()?;
        Ok((lo, hi))
    }

    fn range_or_star(&mut self) -> Result<Option<KeyRange>> {
        if self.cur.eat(&TokenKind::Star) {
            Ok(None)
        } else if matches!(self.cur.peek().kind, TokenKind::DqString(_)) {
            Ok(Some(self.key_range()?))
        } else {
            Err(self.cur.unexpected(&["key range", "`*`"]))
        }
    }

    /// Operand of an operator: cast, nested operator, or object name.
    fn source(&mut self) -> Result<Source> {
        if is_cast_start(&self.cur) {
            return Ok(Source::Cast(Box::new(cast(self.src, &mut self.cur)?)));
        }
        if matches!(self.cur.peek().kind, TokenKind::Ident(_)) && self.cur.peek_at(1).kind == TokenKind::LParen {
            let (op, span) = self.op_call()?;
            return Ok(Source::Op { op: Box::new(op), span });
        }
        let (name, span) = self.cur.expect_ident()?;
        Ok(Source::Object { name, span })
    }
}

fn is_cast_start(cur: &Cursor) -> bool {
    cur.is_keyword("cast") && cur.peek_at(1).kind == TokenKind::LParen
}

fn sql_source(src: &str, cur: &mut Cursor) -> Result<Source> {
    if is_cast_start(cur) {
        return Ok(Source::Cast(Box::new(cast(src, cur)?)));
    }
    let span = cur.peek().span;
    let name = sql::parse_object_name(cur)?;
    Ok(Source::Object { name, span })
}

fn cast(src: &str, cur: &mut Cursor) -> Result<CastExpr> {
    let start = cur.expect_keyword("cast")?;
    cur.expect(TokenKind::LParen)?;
    let mut p = Parser { src, cur: cur.clone() };
    let scope = p.scope()?;
    *cur = p.cur;
    cur.expect(TokenKind::Comma)?;
    let (mut target, _) = cur.expect_ident()?;
    while cur.eat(&TokenKind::Dot) {
        target.push('.');
        target.push_str(&cur.expect_ident()?.0);
    }
    let mut alias = None;
    let mut key = None;
    while cur.eat(&TokenKind::Comma) {
        if key.is_none() && cur.is_keyword("key") && cur.peek_at(1).kind == TokenKind::Eq {
            cur.advance();
            cur.advance();
            key = Some(if cur.eat(&TokenKind::LParen) {
                let mut cols = vec![cur.expect_ident()?.0];
                while cur.eat(&TokenKind::Comma) {
                    cols.push(cur.expect_ident()?.0);
                }
                cur.expect(TokenKind::RParen)?;
                cols
            } else {
                vec![cur.expect_ident()?.0]
            });
        } else if alias.is_none() && key.is_none() {
            alias = Some(cur.expect_ident()?.0);
        } else {
            return Err(cur.unexpected(&["key="]));
        }
    }
    let end = cur.expect(TokenKind::RParen)?;
    Ok(CastExpr {
        scope,
        target,
        alias,
        key,
        span: start.join(end),
    })
}
