use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::engines::{EngineId, EngineModel};
use crate::error::{Error, Result};
use crate::hashing::stable_hash;
use crate::querylang::NodeId;

use super::decompose::{Container, Decomposition, RemainderNode};

pub const DEFAULT_PLAN_CAP: usize = 16;

/// Model change applied while moving data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CastTarget {
    pub from: EngineModel,
    pub to: EngineModel,
    pub key: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MigrateStep {
    pub from: EngineId,
    pub to: EngineId,
    /// Step whose output is moved.
    pub source: NodeId,
    /// Slot the moved data fills: the cast node, or `source` itself.
    pub produces: NodeId,
    pub alias: Option<String>,
    pub cast: Option<CastTarget>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    ExecuteContainer(Container),
    Migrate(MigrateStep),
    CrossOp { node: NodeId, site: EngineId },
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::ExecuteContainer(c) => write!(f, "execute {} on {} -> {}", c.id, c.engine, c.node),
            Step::Migrate(m) => {
                write!(f, "migrate {} {}->{}", m.source, m.from, m.to)?;
                if let Some(c) = &m.cast {
                    write!(f, " cast {}->{}", c.from, c.to)?;
                    if let Some(k) = &c.key {
                        write!(f, " key=({})", k.join(", "))?;
                    }
                }
                if let Some(a) = &m.alias {
                    write!(f, " as {a}")?;
                }
                write!(f, " -> {}", m.produces)
            }
            Step::CrossOp { node, site } => write!(f, "cross-op {node} at {site}"),
        }
    }
}

impl Step {
    /// Engines and node slots only, so plans for queries differing in
    /// constants or object names share ids.
    fn normalized(&self) -> String {
        match self {
            Step::ExecuteContainer(c) => format!("E|{}|{}|{}|{}", c.engine, c.island, c.shape, c.node),
            Step::Migrate(m) => format!(
                "M|{}|{}|{}|{}|{}",
                m.from,
                m.to,
                m.source,
                m.produces,
                m.cast
                    .as_ref()
                    .map(|c| format!("{}>{}", c.from, c.to))
                    .unwrap_or_default()
            ),
            Step::CrossOp { node, site } => format!("X|{node}|{site}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePlan {
    pub id: String,
    pub steps: Vec<Step>,
    pub estimated_moves: usize,
}

impl CandidatePlan {
    fn new(steps: Vec<Step>) -> Self {
        let parts: Vec<String> = steps.iter().map(Step::normalized).collect();
        let estimated_moves = steps.iter().filter(|s| matches!(s, Step::Migrate(_))).count();
        CandidatePlan {
            id: stable_hash(&parts),
            steps,
            estimated_moves,
        }
    }

    /// Engine each cross op runs on, in step order.
    pub fn sites(&self) -> Vec<(NodeId, EngineId)> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                Step::CrossOp { node, site } => Some((*node, site.clone())),
                _ => None,
            })
            .collect()
    }
}

/// One plan per assignment of remainder operators to supporting engines,
/// with a Migrate wherever an input is not already on the chosen site.
/// Casts always migrate, even between the same engine. Keeps the `cap`
/// plans with fewest moves, ordered by (moves, id).
pub fn enumerate_plans(d: &Decomposition, cap: usize) -> Result<Vec<CandidatePlan>> {
    let crosses: Vec<_> = d
        .remainder
        .iter()
        .filter_map(|r| match r {
            RemainderNode::CrossOp(x) => Some(x),
            RemainderNode::Cast { .. } => None,
        })
        .collect();
    for x in &crosses {
        if x.sites.is_empty() {
            return Err(Error::Plan(format!(
                "no engine supports `{}` in island `{}`",
                x.op.operator(),
                x.island
            )));
        }
    }
    let casts: BTreeMap<NodeId, _> = d
        .remainder
        .iter()
        .filter_map(|r| match r {
            RemainderNode::Cast { node, cast } => Some((*node, cast)),
            RemainderNode::CrossOp(_) => None,
        })
        .collect();

    let mut assignment = vec![0usize; crosses.len()];
    let mut seen = BTreeSet::new();
    let mut plans = Vec::new();
    loop {
        let mut steps: Vec<Step> = d.containers.iter().cloned().map(Step::ExecuteContainer).collect();
        let mut at: BTreeMap<NodeId, EngineId> = d.containers.iter().map(|c| (c.node, c.engine.clone())).collect();
        for (x, &choice) in crosses.iter().zip(&assignment) {
            let site = &x.sites[choice];
            for &child in x.op.sources() {
                if let Some(cast) = casts.get(&child) {
                    steps.push(Step::Migrate(MigrateStep {
                        from: at[&cast.input].clone(),
                        to: site.clone(),
                        source: cast.input,
                        produces: child,
                        alias: cast.alias.clone(),
                        cast: Some(CastTarget {
                            from: cast.from,
                            to: cast.to,
                            key: cast.key.clone(),
                        }),
                    }));
                } else if &at[&child] != site {
                    steps.push(Step::Migrate(MigrateStep {
                        from: at[&child].clone(),
                        to: site.clone(),
                        source: child,
                        produces: child,
                        alias: None,
                        cast: None,
                    }));
                }
            }
            steps.push(Step::CrossOp {
                node: x.node,
                site: site.clone(),
            });
            at.insert(x.node, site.clone());
        }
        let plan = CandidatePlan::new(steps);
        if seen.insert(plan.id.clone()) {
            plans.push(plan);
        }
        // Odometer over site choices.
        let mut i = 0;
        loop {
            if i == crosses.len() {
                plans.sort_by(|a, b| (a.estimated_moves, &a.id).cmp(&(b.estimated_moves, &b.id)));
                plans.truncate(cap.max(1));
                return Ok(plans);
            }
            assignment[i] += 1;
            if assignment[i] < crosses[i].sites.len() {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}
