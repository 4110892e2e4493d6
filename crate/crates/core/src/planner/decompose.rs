use std::collections::BTreeSet;

use crate::engines::{Catalog, EngineId, EngineModel};
use crate::error::{Error, Result};
use crate::hashing::stable_hash;
use crate::island::{IslandOp, IslandRegistry};
use crate::querylang::{CastNode, Input, LogicalNode, LogicalPlan, NodeId, ObjectRef, OpNode};

/// A query fragment run wholly on one engine.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    /// Hash of engine and native text.
    pub id: String,
    pub node: NodeId,
    pub engine: EngineId,
    pub island: String,
    pub model: EngineModel,
    pub native: String,
    /// Operator text with objects and literals as placeholders.
    pub shape: String,
    /// Base objects read, as `engine.name`.
    pub objects: BTreeSet<String>,
}

/// An island operator whose inputs come from other steps.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossOp {
    pub node: NodeId,
    pub island: String,
    pub model: EngineModel,
    pub op: IslandOp<NodeId>,
    /// Engines able to run the operator, in island member order.
    pub sites: Vec<EngineId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RemainderNode {
    CrossOp(CrossOp),
    Cast { node: NodeId, cast: CastNode },
}

impl RemainderNode {
    pub fn node(&self) -> NodeId {
        match self {
            RemainderNode::CrossOp(x) => x.node,
            RemainderNode::Cast { node, .. } => *node,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub containers: Vec<Container>,
    /// Children before parents.
    pub remainder: Vec<RemainderNode>,
    pub root: NodeId,
}

impl Decomposition {
    pub fn container(&self, node: NodeId) -> Option<&Container> {
        self.containers.iter().find(|c| c.node == node)
    }

    pub fn remainder_node(&self, node: NodeId) -> Option<&RemainderNode> {
        self.remainder.iter().find(|r| r.node() == node)
    }
}

fn identity_native(engine_model: EngineModel, name: &str) -> String {
    match engine_model {
        EngineModel::Relational => format!("SELECT * FROM {name}"),
        EngineModel::KeyValue => format!("SCAN {name}"),
        EngineModel::Array => format!("SUBARRAY {name}"),
    }
}

fn container(
    node: NodeId,
    engine: EngineId,
    island: &str,
    model: EngineModel,
    native: String,
    shape: String,
    objects: BTreeSet<String>,
) -> Container {
    Container {
        id: stable_hash(&[engine.as_str(), &native]),
        node,
        engine,
        island: island.to_string(),
        model,
        native,
        shape,
        objects,
    }
}

/// Split a validated query into maximal single-engine containers and the
/// remainder. Operators whose inputs are all base objects on one engine
/// that supports them become containers; anything consuming another
/// operator's output stays in the remainder, since the native languages
/// do not nest. Base objects read by remainder operators get identity
/// containers of their own.
pub fn decompose(plan: &LogicalPlan, registry: &IslandRegistry, catalog: &Catalog) -> Result<Decomposition> {
    let mut containers = Vec::new();
    let mut remainder = Vec::new();
    let mut next_id = plan.nodes.len();
    for (i, node) in plan.nodes.iter().enumerate() {
        let id = NodeId(i);
        let o = match node {
            LogicalNode::Cast(c) => {
                remainder.push(RemainderNode::Cast {
                    node: id,
                    cast: c.clone(),
                });
                continue;
            }
            LogicalNode::Op(o) => o,
        };
        let island = registry.island(&o.island)?;
        let operator = o.op.operator();
        if let IslandOp::Native(text) = &o.op {
            let engine = island.default_engine().clone();
            containers.push(container(
                id,
                engine.clone(),
                &o.island,
                o.model,
                text.clone(),
                "native".into(),
                raw_objects(text, &engine, catalog),
            ));
            continue;
        }
        let leaf_engines: BTreeSet<&EngineId> =
            o.op.sources()
                .into_iter()
                .map(|s| match s {
                    Input::Object(r) => Some(&r.engine),
                    Input::Node(_) => None,
                })
                .collect::<Option<_>>()
                .unwrap_or_default();
        if leaf_engines.len() == 1 {
            let engine = (*leaf_engines.iter().next().expect("one engine")).clone();
            if registry.supports(&o.island, &engine, operator)? {
                let named = o.op.clone().map_sources(|s| match s {
                    Input::Object(r) => r.name,
                    Input::Node(_) => unreachable!("all inputs are objects"),
                });
                let native = registry.translate(catalog, &o.island, &named, &engine)?;
                let objects =
                    o.op.sources()
                        .into_iter()
                        .filter_map(|s| match s {
                            Input::Object(r) => Some(format!("{}.{}", r.engine, r.name)),
                            Input::Node(_) => None,
                        })
                        .collect();
                containers.push(container(
                    id,
                    engine,
                    &o.island,
                    o.model,
                    native,
                    o.op.shape(&|_| "?".to_string()),
                    objects,
                ));
                continue;
            }
        }
        let sites = registry.sites(&o.island, operator)?;
        if sites.is_empty() {
            return Err(Error::Plan(format!(
                "no engine supports `{operator}` in island `{}`",
                o.island
            )));
        }
        let op = with_default_aliases(o, plan).try_map_sources(|s| -> Result<NodeId> {
            Ok(match s {
                Input::Node(n) => n,
                Input::Object(r) => {
                    let node = NodeId(next_id);
                    next_id += 1;
                    containers.push(identity_container(node, &r, o, catalog)?);
                    node
                }
            })
        })?;
        remainder.push(RemainderNode::CrossOp(CrossOp {
            node: id,
            island: o.island.clone(),
            model: o.model,
            op,
            sites,
        }));
    }
    Ok(Decomposition {
        containers,
        remainder,
        root: plan.root,
    })
}

fn identity_container(node: NodeId, r: &ObjectRef, user: &OpNode, catalog: &Catalog) -> Result<Container> {
    let native = identity_native(catalog.engine_model(&r.engine)?, &r.name);
    Ok(container(
        node,
        r.engine.clone(),
        &user.island,
        user.model,
        native,
        "ident".into(),
        BTreeSet::from([format!("{}.{}", r.engine, r.name)]),
    ))
}

/// Tables keep the name they were written with once their source becomes
/// a temporary object, so qualified columns still resolve.
fn with_default_aliases(o: &OpNode, plan: &LogicalPlan) -> IslandOp<Input> {
    let mut op = o.op.clone();
    if let IslandOp::Query(q) = &mut op {
        let name = |i: &Input| match i {
            Input::Object(r) => Some(r.name.clone()),
            Input::Node(n) => match plan.node(*n) {
                LogicalNode::Cast(c) => c.alias.clone(),
                LogicalNode::Op(_) => None,
            },
        };
        if q.from.alias.is_none() {
            q.from.alias = name(&q.from.source);
        }
        for j in &mut q.joins {
            if j.table.alias.is_none() {
                j.table.alias = name(&j.table.source);
            }
        }
    }
    op
}

/// Identifiers in native text naming objects on `engine`.
pub(crate) fn raw_objects(text: &str, engine: &EngineId, catalog: &Catalog) -> BTreeSet<String> {
    let Ok(tokens) = crate::lexer::tokenize(text) else {
        return BTreeSet::new();
    };
    tokens
        .into_iter()
        .filter_map(|t| match t.kind {
            crate::lexer::TokenKind::Ident(s) if catalog.locate(&s).as_ref() == Some(engine) => {
                Some(format!("{engine}.{s}"))
            }
            _ => None,
        })
        .collect()
}
