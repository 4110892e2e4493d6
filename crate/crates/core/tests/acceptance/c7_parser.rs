//! Generated query texts reach a print/parse fixpoint, and malformed input
//! fails with a span inside the text.

use polydawg::querylang::{parse, pretty_print};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GENERATED: usize = 1000;

const IDENTS: &[&str] = &["patients", "dose", "t1", "obj_2", "w", "notes", "x"];
const COLS: &[&str] = &["id", "age", "v", "r", "c", "patient", "k"];
const ISLANDS: &[&str] = &["relational", "text", "array", "d4m"];

struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(&mut self.rng).unwrap()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn scope(&mut self, island: &str, depth: u32) -> String {
        let body = match island {
            "relational" => self.select(depth),
            "text" => self.text_op(depth),
            "array" => self.array_op(depth),
            _ => self.d4m_op(depth),
        };
        format!("{island}({body})")
    }

    fn any_scope(&mut self, depth: u32) -> String {
        if self.chance(0.1) {
            return "raw.rel(SELECT id FROM t1 WHERE (age > 3))".into();
        }
        let island = self.pick(ISLANDS);
        self.scope(island, depth)
    }

    fn cast(&mut self, target: &str, depth: u32, alias: bool) -> String {
        let inner = self.any_scope(depth - 1);
        let mut s = format!("cast({inner}, {target}");
        if alias {
            s += &format!(", {}", self.pick(&["a", "b", "pz"]));
        }
        if self.chance(0.3) {
            if self.chance(0.5) {
                s += &format!(", key={}", self.pick(COLS));
            } else {
                s += &format!(", key=({}, {})", self.pick(COLS), self.pick(COLS));
            }
        }
        s + ")"
    }

    /// Operand inside a non-relational island.
    fn operand(&mut self, island: &str, depth: u32) -> String {
        let roll = if depth == 0 { 0 } else { self.rng.gen_range(0..3) };
        match roll {
            0 => self.pick(IDENTS).to_string(),
            1 => {
                let alias = self.chance(0.5);
                self.cast(island, depth, alias)
            }
            _ => match island {
                "text" => self.text_op(depth - 1),
                "array" => self.array_op(depth - 1),
                _ => self.d4m_op(depth - 1),
            },
        }
    }

    fn key_range(&mut self) -> String {
        let a = self.rng.gen_range(0..50);
        format!("\"k{a}\":\"k{}\"", a + self.rng.gen_range(0..50))
    }

    fn text_op(&mut self, depth: u32) -> String {
        let src = self.operand("text", depth);
        if self.chance(0.2) {
            return format!("grep({src}, \"stable\")");
        }
        let mut s = format!("scan({src}");
        if self.chance(0.5) {
            s += &format!(", rows {}", self.key_range());
        }
        if self.chance(0.5) {
            s += &format!(", cols {}", self.key_range());
        }
        s + ")"
    }

    fn array_op(&mut self, depth: u32) -> String {
        let src = self.operand("array", depth);
        match self.rng.gen_range(0..3) {
            0 => {
                let mut s = format!("subarray({src}");
                for d in ["patient", "t"].iter().take(self.rng.gen_range(0..=2)) {
                    let lo = self.rng.gen_range(-5..20);
                    s += &format!(", {d}={lo}:{}", lo + self.rng.gen_range(0..20));
                }
                s + ")"
            }
            1 => format!("filter({src}, {})", self.expr(2, false)),
            _ => {
                let f = self.pick(&["sum", "avg", "min", "max", "count"]);
                let arg = if f == "count" && self.chance(0.5) {
                    "*".to_string()
                } else {
                    self.pick(COLS).to_string()
                };
                let mut s = format!("agg({src}, {f}({arg})");
                for _ in 0..self.rng.gen_range(0..=2) {
                    s += &format!(", {}", self.pick(COLS));
                }
                s + ")"
            }
        }
    }

    fn d4m_op(&mut self, depth: u32) -> String {
        let src = self.operand("d4m", depth);
        match self.rng.gen_range(0..4) {
            0 => {
                let rows = if self.chance(0.5) { self.key_range() } else { "*".into() };
                let cols = if self.chance(0.5) { self.key_range() } else { "*".into() };
                format!("select({src}, {rows}, {cols})")
            }
            1 => {
                let b = self.operand("d4m", depth);
                let ring = match self.rng.gen_range(0..4) {
                    0 => ", min.plus",
                    1 => ", max.times",
                    2 => ", plus.times",
                    _ => "",
                };
                format!("matmul({src}, {b}{ring})")
            }
            2 => {
                let b = self.operand("d4m", depth);
                format!("ewise({src}, {b}, {})", self.pick(&["plus", "min", "max"]))
            }
            _ => format!("transpose({src})"),
        }
    }

    fn literal(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(-100..1000).to_string(),
            1 => format!("{}.{}", self.rng.gen_range(0..100), self.rng.gen_range(1..10)),
            2 => format!("'{}'", self.pick(&["F", "n1", "it''s", ""])),
            _ => "-2.5".into(),
        }
    }

    fn column(&mut self) -> String {
        if self.chance(0.4) {
            format!("{}.{}", self.pick(&["p", "a", "n"]), self.pick(COLS))
        } else {
            self.pick(COLS).to_string()
        }
    }

    fn expr(&mut self, depth: u32, aggs: bool) -> String {
        if depth == 0 {
            return if self.chance(0.5) {
                self.column()
            } else {
                self.literal()
            };
        }
        match self.rng.gen_range(0..7) {
            0 => format!("(NOT {})", self.expr(depth - 1, aggs)),
            1 => format!("({})", self.expr(depth - 1, aggs)),
            2 if aggs => {
                let f = self.pick(&["SUM", "AVG", "MIN", "MAX", "COUNT"]);
                if f == "COUNT" && self.chance(0.5) {
                    "COUNT(*)".into()
                } else {
                    format!("{f}({})", self.expr(depth - 1, false))
                }
            }
            3 => format!("-{}", self.column()),
            _ => {
                let op = self.pick(&["+", "-", "*", "/", "=", "<>", "<", "<=", ">", ">=", "AND", "OR"]);
                // Comparisons do not chain, so compound operands get parentheses.
                let side = |g: &mut Gen| {
                    let e = g.expr(depth - 1, aggs);
                    if e.contains(' ') {
                        format!("({e})")
                    } else {
                        e
                    }
                };
                let (l, r) = (side(self), side(self));
                format!("{l} {op} {r}")
            }
        }
    }

    fn table_ref(&mut self, depth: u32) -> String {
        if depth > 0 && self.chance(0.4) {
            format!(
                "{} {}",
                self.cast("relational", depth, false),
                self.pick(&["p", "a", "n"])
            )
        } else if self.chance(0.5) {
            format!("{} AS {}", self.pick(IDENTS), self.pick(&["p", "a", "n"]))
        } else {
            self.pick(IDENTS).to_string()
        }
    }

    fn select(&mut self, depth: u32) -> String {
        let mut items = Vec::new();
        if self.chance(0.2) {
            items.push("*".to_string());
        } else {
            for _ in 0..self.rng.gen_range(1..4) {
                let e = self.expr(2, true);
                items.push(if self.chance(0.3) {
                    format!("{e} AS {}", self.pick(&["k", "total", "m"]))
                } else {
                    e
                });
            }
        }
        let mut s = format!("SELECT {} FROM {}", items.join(", "), self.table_ref(depth));
        for _ in 0..self.rng.gen_range(0..=2) {
            let join = if self.chance(0.3) { "INNER JOIN" } else { "JOIN" };
            s += &format!(
                " {join} {} ON {} = {}",
                self.table_ref(depth),
                self.column(),
                self.column()
            );
        }
        if self.chance(0.5) {
            s += &format!(" WHERE {}", self.expr(3, false));
        }
        if self.chance(0.3) {
            s += &format!(" GROUP BY {}, {}", self.column(), self.column());
        }
        if self.chance(0.3) {
            let dir = self.pick(&["", " ASC", " DESC"]);
            s += &format!(" ORDER BY {}{dir}", self.column());
        }
        if self.chance(0.3) {
            s += &format!(" LIMIT {}", self.rng.gen_range(0..100));
        }
        s
    }
}

const MALFORMED: &[&str] = &[
    "",
    "relational",
    "relational(",
    "relational()",
    "relational(SELECT)",
    "relational(SELECT FROM t)",
    "relational(SELECT a FROM)",
    "relational(SELECT a FROM t WHERE)",
    "relational(SELECT a FROM t GROUP a)",
    "relational(SELECT a FROM t ORDER BY)",
    "relational(SELECT a FROM t LIMIT x)",
    "relational(SELECT a FROM t LIMIT -1)",
    "relational(SELECT a FROM t JOIN u)",
    "relational(SELECT a FROM t JOIN u ON)",
    "relational(SELECT a, FROM t)",
    "relational(SELECT a AS FROM t)",
    "relational(SELECT SUM(*) FROM t)",
    "relational(SELECT foo(a) FROM t)",
    "relational(SELECT a FROM t WHERE a > 'open)",
    "relational(SELECT a FROM t WHERE (a > 1)",
    "relational(SELECT a FROM t))",
    "relational(SELECT a FROM t) extra",
    "relational(SELECT a FROM select)",
    "relational(SELECT a FROM t WHERE a ! 1)",
    "relational(SELECT a FROM cast(text(scan(n)), relational)",
    "text(scan())",
    "text(scan(n, rows))",
    "text(scan(n, rows \"a\"))",
    "text(scan(n, rows \"a\":))",
    "text(scan(n, cols \"a\":\"b\", rows \"a\":\"b\"))",
    "text(scan(n, sideways \"a\":\"b\"))",
    "text(grep(n))",
    "text(grep(n, stable))",
    "text(frobnicate(n))",
    "array(subarray(w, patient=1))",
    "array(subarray(w, patient=a:b))",
    "array(subarray(w, =1:2))",
    "array(filter(w))",
    "array(filter(w, v >))",
    "array(agg(w, median(v)))",
    "array(agg(w, sum(*)))",
    "array(agg(w, sum v))",
    "d4m(select(a, \"x\":\"y\"))",
    "d4m(select(a, x, *))",
    "d4m(matmul(a))",
    "d4m(matmul(a, b, plus))",
    "d4m(matmul(a, b, plus.minus))",
    "d4m(ewise(a, b, times))",
    "d4m(transpose(a, b))",
    "d4m(cast(relational(SELECT a FROM t), d4m, key=))",
    "d4m(transpose(cast(relational(SELECT a FROM t), d4m, key=(a b))))",
    "raw.rel(",
    "raw.rel()",
    "text(scan(n, rows \"a\":\"b",
    "relational(SELECT a FROM t WHERE a = \u{1F600})",
];

pub fn run() -> Result<(), String> {
    let mut g = Gen {
        rng: ChaCha8Rng::seed_from_u64(0xC7),
    };
    for i in 0..GENERATED {
        let depth = g.rng.gen_range(0..=3);
        let text = g.any_scope(depth.max(1));
        let q1 = parse(&text).map_err(|e| format!("generated text {i} rejected: {e}\n{text}"))?;
        let printed = pretty_print(&q1);
        let q2 = parse(&printed).map_err(|e| format!("printed text rejected: {e}\n{printed}"))?;
        let reprinted = pretty_print(&q2);
        ensure!(q1 == q2, "tree changed through printing:\n{text}\n{printed}");
        ensure!(printed == reprinted, "no fixpoint:\n{text}\n{printed}\n{reprinted}");
    }
    ensure!(MALFORMED.len() >= 50, "only {} malformed inputs", MALFORMED.len());
    for bad in MALFORMED {
        match parse(bad) {
            Ok(q) => return Err(format!("accepted `{bad}` as {}", pretty_print(&q))),
            Err(e) => {
                let span = e.span().ok_or_else(|| format!("`{bad}`: no span on {e}"))?;
                ensure!(
                    span.start <= span.end && span.end <= bad.len(),
                    "`{bad}`: span {span} outside the text"
                );
            }
        }
    }
    Ok(())
}
