use std::collections::BTreeMap;
use std::fmt;

use crate::engines::Catalog;
use crate::hashing::stable_hash;
use crate::island::IslandOp;
use crate::lexer::{tokenize, TokenKind};
use crate::querylang::{LogicalNode, LogicalPlan, NodeId};

use super::decompose::{raw_objects, Decomposition, RemainderNode};

/// Query fingerprint keying the monitor database.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Signature {
    /// Hex hash of the remainder with objects and constants abstracted.
    pub structure: String,
    /// Fully qualified object names, sorted.
    pub objects: Vec<String>,
    /// Literal lexemes, sorted (a multiset).
    pub constants: Vec<String>,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] [{}]",
            self.structure,
            self.objects.join(", "),
            self.constants.join(", ")
        )
    }
}

pub(crate) const EMPTY_DAG: &str = "<empty>";

pub fn signature_of(d: &Decomposition, logical: &LogicalPlan, catalog: &Catalog) -> Signature {
    let structure = if d.remainder.is_empty() {
        stable_hash(&[EMPTY_DAG])
    } else {
        stable_hash(&[serialize(d, logical, d.root)])
    };
    let mut objects: Vec<String> = logical.objects().into_iter().collect();
    let mut constants = Vec::new();
    for n in &logical.nodes {
        if let LogicalNode::Op(o) = n {
            if let IslandOp::Native(text) = &o.op {
                let island_engine = d
                    .containers
                    .iter()
                    .find(|c| c.island == o.island)
                    .map(|c| c.engine.clone());
                if let Some(e) = island_engine {
                    objects.extend(raw_objects(text, &e, catalog));
                }
                constants.extend(raw_constants(text));
            } else {
                constants.extend(o.op.literals());
            }
        }
    }
    objects.sort();
    objects.dedup();
    constants.sort();
    Signature {
        structure,
        objects,
        constants,
    }
}

fn raw_constants(text: &str) -> Vec<String> {
    let Ok(tokens) = tokenize(text) else {
        return Vec::new();
    };
    tokens
        .into_iter()
        .filter_map(|t| match t.kind {
            TokenKind::Int(s) | TokenKind::Real(s) => Some(s),
            TokenKind::SqString(s) => Some(format!("'{}'", s.replace('\'', "''"))),
            TokenKind::DqString(s) => Some(crate::island::dq(&s)),
            _ => None,
        })
        .collect()
}

/// (operator id, alias) used to order children canonically.
fn sort_key(d: &Decomposition, logical: &LogicalPlan, node: NodeId) -> (String, String) {
    if d.container(node).is_some() {
        // Identity containers have ids past the logical plan.
        let op = match logical.nodes.get(node.0) {
            Some(LogicalNode::Op(o)) => o.op.operator().as_str().to_string(),
            _ => "ident".to_string(),
        };
        return (op, String::new());
    }
    match d.remainder_node(node) {
        Some(RemainderNode::CrossOp(x)) => (x.op.operator().as_str().to_string(), String::new()),
        Some(RemainderNode::Cast { cast, .. }) => ("cast".into(), cast.alias.clone().unwrap_or_default()),
        None => (String::new(), String::new()),
    }
}

fn serialize(d: &Decomposition, logical: &LogicalPlan, node: NodeId) -> String {
    if let Some(c) = d.container(node) {
        return format!("C[{}:{}]", c.island, c.shape);
    }
    match d.remainder_node(node) {
        Some(RemainderNode::Cast { cast, .. }) => format!(
            "cast[{}->{}|{}]({})",
            cast.from,
            cast.target,
            cast.key.as_deref().unwrap_or(&[]).join(","),
            serialize(d, logical, cast.input)
        ),
        Some(RemainderNode::CrossOp(x)) => {
            let children: Vec<NodeId> = x.op.sources().into_iter().copied().collect();
            let mut keyed: Vec<((String, String), String, NodeId)> = children
                .iter()
                .map(|&c| (sort_key(d, logical, c), serialize(d, logical, c), c))
                .collect();
            keyed.sort();
            let slot: BTreeMap<NodeId, usize> = keyed.iter().enumerate().map(|(i, k)| (k.2, i)).collect();
            // Shape from the query as written, so defaulted aliases (which
            // are object names) stay out of the structure.
            let shape = match logical.node(x.node) {
                LogicalNode::Op(o) => {
                    let mut it = children.iter();
                    let placed = o.op.clone().map_sources(|_| *it.next().expect("same arity"));
                    placed.shape(&|n| format!("${}", slot[n]))
                }
                LogicalNode::Cast(_) => unreachable!("cross op is an op node"),
            };
            let parts: Vec<String> = keyed.into_iter().map(|k| k.1).collect();
            format!("X[{}:{}:{}]({})", x.island, x.op.operator(), shape, parts.join(";"))
        }
        None => String::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::super::prepare;
    use super::*;
    use crate::engines::{EngineId, LoadOptions};
    use crate::island::IslandRegistry;
    use crate::value::{CanonicalTable, Tag, Value};

    fn setup() -> (Catalog, IslandRegistry) {
        let c = Catalog::with_default_engines();
        for n in ["patients", "staff"] {
            c.load(
                &EngineId::rel(),
                n,
                &CanonicalTable::with_columns(
                    &[("id", Tag::Int), ("age", Tag::Int)],
                    vec![vec![Value::Int(1), Value::Int(70)]],
                ),
                &LoadOptions::key(&["id"]),
            )
            .unwrap();
        }
        let assoc = CanonicalTable::with_columns(
            &[("row", Tag::Text), ("col", Tag::Text), ("val", Tag::Real)],
            vec![vec![Value::text("1"), Value::text("t1"), Value::Real(0.5)]],
        );
        for n in ["N", "T"] {
            c.load(&EngineId::kv(), n, &assoc, &LoadOptions::none()).unwrap();
        }
        let r = IslandRegistry::register_defaults(&c).unwrap();
        (c, r)
    }

    fn sig(q: &str) -> Signature {
        let (c, r) = setup();
        prepare(q, &r, &c).unwrap().signature
    }

    #[test]
    fn constants_do_not_change_structure() {
        let a = sig("relational(SELECT id FROM patients WHERE age > 60)");
        let b = sig("relational(SELECT id FROM patients WHERE age > 70)");
        assert_eq!(a.structure, b.structure);
        assert_eq!(a.objects, b.objects);
        assert_eq!(a.constants, ["60"]);
        assert_eq!(b.constants, ["70"]);
        assert_eq!(a.structure, stable_hash(&[EMPTY_DAG]));
    }

    #[test]
    fn same_shape_other_tables() {
        let q = |t: &str| {
            format!(
                "relational(SELECT x.id FROM {t} x JOIN cast(d4m(matmul(N, T)), relational, m) ON x.id = m.v WHERE x.age > 3)"
            )
        };
        let a = sig(&q("patients"));
        let b = sig(&q("staff"));
        assert_ne!(a.structure, stable_hash(&[EMPTY_DAG]));
        assert_eq!(a.structure, b.structure);
        assert_ne!(a.objects, b.objects);
        assert_eq!(a.objects, ["kv.N", "kv.T", "rel.patients"]);
    }

    #[test]
    fn raw_queries_scan_tokens() {
        let s = sig("raw.rel(SELECT id FROM patients WHERE age > 60 AND id = 'a')");
        assert_eq!(s.objects, ["rel.patients"]);
        assert_eq!(s.constants, ["'a'", "60"]);
    }
}
