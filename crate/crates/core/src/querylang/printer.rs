use crate::island::{dq, IslandOp, KeyRange};
use crate::sql;

use super::ast::{CastExpr, Query, Scope, Source};

/// Canonical text: uppercase SQL keywords, lowercase operators, `, `
/// between arguments, semirings always spelled out.
pub fn pretty_print(q: &Query) -> String {
    scope(&q.root)
}

fn scope(s: &Scope) -> String {
    format!("{}({})", s.island, op(&s.body))
}

fn range(r: &Option<KeyRange>) -> String {
    match r {
        Some((lo, hi)) => format!("{}:{}", dq(lo), dq(hi)),
        None => "*".to_string(),
    }
}

fn op(o: &IslandOp<Source>) -> String {
    match o {
        IslandOp::Native(text) => text.clone(),
        IslandOp::Query(q) => sql::print_select(q, &source),
        IslandOp::Scan { src, rows, cols } => {
            let mut s = format!("scan({}", source(src));
            if rows.is_some() {
                s += &format!(", rows {}", range(rows));
            }
            if cols.is_some() {
                s += &format!(", cols {}", range(cols));
            }
            s + ")"
        }
        IslandOp::Grep { src, pattern } => format!("grep({}, {})", source(src), dq(pattern)),
        IslandOp::Subarray { src, ranges } => {
            let mut s = format!("subarray({}", source(src));
            for r in ranges {
                s += &format!(", {}={}:{}", r.dim, r.lo, r.hi);
            }
            s + ")"
        }
        IslandOp::Filter { src, pred } => format!("filter({}, {})", source(src), sql::print_expr(pred)),
        IslandOp::Agg { src, func, attr, by } => {
            let mut s = format!(
                "agg({}, {}({})",
                source(src),
                func.name(),
                attr.as_deref().unwrap_or("*")
            );
            for d in by {
                s += &format!(", {d}");
            }
            s + ")"
        }
        IslandOp::Select { src, rows, cols } => {
            format!("select({}, {}, {})", source(src), range(rows), range(cols))
        }
        IslandOp::MatMul { a, b, semiring } => {
            format!("matmul({}, {}, {semiring})", source(a), source(b))
        }
        IslandOp::Ewise { a, b, op } => format!("ewise({}, {}, {op})", source(a), source(b)),
        IslandOp::Transpose { src } => format!("transpose({})", source(src)),
    }
}

fn source(s: &Source) -> String {
    match s {
        Source::Object { name, .. } => name.clone(),
        Source::Op { op: o, .. } => op(o),
        Source::Cast(c) => cast(c),
    }
}

fn cast(c: &CastExpr) -> String {
    let mut s = format!("cast({}, {}", scope(&c.scope), c.target);
    if let Some(a) = &c.alias {
        s += &format!(", {a}");
    }
    match c.key.as_deref() {
        Some([k]) => s += &format!(", key={k}"),
        Some(ks) => s += &format!(", key=({})", ks.join(", ")),
        None => {}
    }
    s + ")"
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn round(s: &str) -> String {
        let q = parse(s).unwrap();
        let printed = pretty_print(&q);
        assert_eq!(parse(&printed).unwrap(), q, "{printed}");
        printed
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(
            round("relational(select id from patients where age>60)"),
            "relational(SELECT id FROM patients WHERE age > 60)"
        );
        assert_eq!(round("d4m(matmul(a,b))"), "d4m(matmul(a, b, plus.times))");
        assert_eq!(
            round("relational(SELECT * FROM cast(text(scan(notes, rows \"p1\":\"p2\")), relational))"),
            "relational(SELECT * FROM cast(text(scan(notes, rows \"p1\":\"p2\")), relational))"
        );
        assert_eq!(
            round("d4m(transpose(cast(relational(SELECT id, age FROM p), d4m, x, key=(id, age))))"),
            "d4m(transpose(cast(relational(SELECT id, age FROM p), d4m, x, key=(id, age))))"
        );
        round("raw.rel( SELECT  1 FROM t )");
        round("array(filter(waveform, v > 0.5 AND NOT t < 3))");
        round("d4m(select(cast(relational(SELECT * FROM t), d4m, key=k), \"a\":\"b\", *))");
    }
}
