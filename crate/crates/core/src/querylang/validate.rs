//! Resolve a parsed query against the registry and catalog into a DAG of
//! island operators and casts, children before parents.

use std::collections::BTreeSet;
use std::fmt;

use crate::engines::{Catalog, EngineId, EngineModel, ObjectMeta};
use crate::error::{Error, Result};
use crate::island::{IslandOp, IslandRegistry};
use crate::value::Tag;

use super::ast::{CastExpr, Query, Scope, Source};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// A base object as found in the catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectRef {
    pub name: String,
    pub engine: EngineId,
    pub meta: ObjectMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Object(ObjectRef),
    Node(NodeId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpNode {
    pub island: String,
    /// Data model of the island, and so of this node's result.
    pub model: EngineModel,
    pub op: IslandOp<Input>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CastNode {
    pub input: NodeId,
    pub from: EngineModel,
    pub target: String,
    pub to: EngineModel,
    pub alias: Option<String>,
    pub key: Option<Vec<String>>,
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
pub enum LogicalNode {
    Op(OpNode),
    Cast(CastNode),
}

impl LogicalNode {
    pub fn model(&self) -> EngineModel {
        match self {
            LogicalNode::Op(o) => o.model,
            LogicalNode::Cast(c) => c.to,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogicalPlan {
    pub nodes: Vec<LogicalNode>,
    pub root: NodeId,
}

impl LogicalPlan {
    pub fn node(&self, id: NodeId) -> &LogicalNode {
        &self.nodes[id.0]
    }

    /// Base objects referenced anywhere, as `engine.name`.
    pub fn objects(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for n in &self.nodes {
            if let LogicalNode::Op(o) = n {
                for i in o.op.sources() {
                    if let Input::Object(r) = i {
                        out.insert(format!("{}.{}", r.engine, r.name));
                    }
                }
            }
        }
        out
    }
}

pub fn validate(q: &Query, registry: &IslandRegistry, catalog: &Catalog) -> Result<LogicalPlan> {
    let mut v = Validator {
        registry,
        catalog,
        nodes: Vec::new(),
    };
    let root = v.scope(&q.root)?;
    Ok(LogicalPlan { nodes: v.nodes, root })
}

struct Validator<'a> {
    registry: &'a IslandRegistry,
    catalog: &'a Catalog,
    nodes: Vec<LogicalNode>,
}

/// Whether a relation is the triple encoding of associative-array data.
pub(crate) fn is_triple_schema(schema: &[crate::value::Column]) -> bool {
    schema.len() == 3
        && schema[0].name == "r"
        && schema[1].name == "c"
        && schema[2].name == "v"
        && schema[0].tag == Tag::Text
        && schema[1].tag == Tag::Text
        && schema[2].tag.is_numeric()
}

impl Validator<'_> {
    fn push(&mut self, n: LogicalNode) -> NodeId {
        self.nodes.push(n);
        NodeId(self.nodes.len() - 1)
    }

    fn scope(&mut self, s: &Scope) -> Result<NodeId> {
        let island = self.registry.island(&s.island)?;
        let (name, model) = (island.name.clone(), island.model);
        self.op(&name, model, &s.body)
    }

    fn op(&mut self, island: &str, model: EngineModel, body: &IslandOp<Source>) -> Result<NodeId> {
        let isl = self.registry.island(island)?;
        let operator = body.operator();
        let allowed = match body {
            IslandOp::Query(_) => model == EngineModel::Relational && !isl.is_degenerate(),
            IslandOp::Select { .. } => model != EngineModel::Relational,
            IslandOp::Native(_) => isl.is_degenerate(),
            _ => true,
        } && isl.has_operator(operator);
        if !allowed {
            let operator = match body {
                IslandOp::Query(_) => "SELECT statement".to_string(),
                _ => operator.to_string(),
            };
            return Err(Error::OperatorNotInIsland {
                island: island.to_string(),
                operator,
            });
        }
        if let IslandOp::Query(q) = body {
            let mut names = BTreeSet::new();
            for t in q.tables() {
                let name = t.alias.as_deref().or(t.source.default_name());
                if let Some(n) = name {
                    if !names.insert(n.to_string()) {
                        return Err(Error::Validation(format!(
                            "table name `{n}` is used twice in one SELECT"
                        )));
                    }
                }
            }
        }
        let op = body.clone().try_map_sources(|src| self.source(island, model, &src))?;
        Ok(self.push(LogicalNode::Op(OpNode {
            island: island.to_string(),
            model,
            op,
        })))
    }

    fn source(&mut self, island: &str, model: EngineModel, src: &Source) -> Result<Input> {
        match src {
            Source::Object { name, .. } => {
                let (engine, meta) = self
                    .catalog
                    .meta(name)
                    .ok_or_else(|| Error::UnknownObject(name.clone()))?;
                let members = &self.registry.island(island)?.members;
                if !members.contains(&engine) || !leaf_fits(island, model, &meta) {
                    return Err(Error::ModelMismatch(format!(
                        "object `{name}` on engine `{engine}` cannot be used in island `{island}`"
                    )));
                }
                Ok(Input::Object(ObjectRef {
                    name: name.clone(),
                    engine,
                    meta,
                }))
            }
            Source::Op { op, .. } => Ok(Input::Node(self.op(island, model, op)?)),
            Source::Cast(c) => Ok(Input::Node(self.cast(island, model, c)?)),
        }
    }

    fn cast(&mut self, island: &str, usage: EngineModel, c: &CastExpr) -> Result<NodeId> {
        let target = self.registry.island(&c.target)?;
        let to = target.model;
        if to != usage {
            return Err(Error::ModelMismatch(format!(
                "cast to `{}` yields {to} data but island `{island}` expects {usage} data",
                c.target
            )));
        }
        let target = target.name.clone();
        let from_island = self.registry.island(&c.scope.island)?;
        let from = from_island.model;
        match (&c.key, from, to) {
            (None, EngineModel::Relational, EngineModel::Array) => {
                return Err(Error::Cast(
                    "cast from relational to array data needs key=(dimension columns)".into(),
                ))
            }
            (Some(_), f, _) if f != EngineModel::Relational => {
                return Err(Error::Cast("key= only applies to casts of relational data".into()))
            }
            _ => {}
        }
        let input = self.scope(&c.scope)?;
        Ok(self.push(LogicalNode::Cast(CastNode {
            input,
            from,
            target,
            to,
            alias: c.alias.clone(),
            key: c.key.clone(),
        })))
    }
}

/// Whether a stored object can serve as a leaf of an island using `model`.
fn leaf_fits(island: &str, model: EngineModel, meta: &ObjectMeta) -> bool {
    match (model, meta) {
        (EngineModel::Relational, ObjectMeta::Relation { .. }) => true,
        (EngineModel::Array, ObjectMeta::Array(_)) => true,
        (EngineModel::KeyValue, ObjectMeta::Assoc { .. }) => true,
        // Associative data held by the other d4m members.
        (EngineModel::KeyValue, ObjectMeta::Relation { schema, .. }) if island == "d4m" => is_triple_schema(schema),
        (EngineModel::KeyValue, ObjectMeta::Array(l)) if island == "d4m" => {
            l.dims.len() == 2
                && l.dims.iter().all(|d| d.labels.is_some())
                && l.attrs.len() == 1
                && l.attrs[0].tag.is_numeric()
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;
    use crate::engines::LoadOptions;
    use crate::value::{CanonicalTable, Value};

    fn setup() -> (Catalog, IslandRegistry) {
        let c = Catalog::with_default_engines();
        c.load(
            &EngineId::rel(),
            "patients",
            &CanonicalTable::with_columns(
                &[("id", Tag::Int), ("age", Tag::Int)],
                vec![vec![Value::Int(1), Value::Int(70)]],
            ),
            &LoadOptions::key(&["id"]),
        )
        .unwrap();
        c.load(
            &EngineId::kv(),
            "notes",
            &CanonicalTable::with_columns(&[("row", Tag::Text), ("col", Tag::Text), ("val", Tag::Text)], vec![]),
            &LoadOptions::none(),
        )
        .unwrap();
        let r = IslandRegistry::register_defaults(&c).unwrap();
        (c, r)
    }

    fn check(q: &str) -> Result<LogicalPlan> {
        let (c, r) = setup();
        validate(&parse(q).unwrap(), &r, &c)
    }

    #[test]
    fn single_scope_annotated_with_rel() {
        let p = check("relational(SELECT id FROM patients WHERE age > 60)").unwrap();
        assert_eq!(p.nodes.len(), 1);
        assert_eq!(p.objects().into_iter().collect::<Vec<_>>(), ["rel.patients"]);
    }

    #[test]
    fn grep_in_relational_rejected() {
        assert!(matches!(
            check(r#"relational(grep(notes, "x"))"#),
            Err(Error::OperatorNotInIsland { .. })
        ));
        assert!(matches!(
            check(r#"d4m(SELECT id FROM patients)"#),
            Err(Error::OperatorNotInIsland { .. })
        ));
    }

    #[test]
    fn cast_model_must_match_usage() {
        let err = check("relational(SELECT * FROM cast(d4m(transpose(notes)), array, x))").unwrap_err();
        assert!(matches!(err, Error::ModelMismatch(_)), "{err}");
        let ok = check("relational(SELECT * FROM cast(text(scan(notes)), relational, n))").unwrap();
        assert!(matches!(ok.node(NodeId(1)), LogicalNode::Cast(_)));
        assert_eq!(ok.root, NodeId(2));
    }

    #[test]
    fn unknown_names() {
        assert!(matches!(
            check("relational(SELECT * FROM nope)"),
            Err(Error::UnknownObject(_))
        ));
        assert!(matches!(check("graph(transpose(x))"), Err(Error::UnknownIsland(_))));
        assert!(matches!(check("text(scan(patients))"), Err(Error::ModelMismatch(_))));
        assert!(check("relational(SELECT * FROM patients JOIN patients ON id = id)").is_err());
    }
}
