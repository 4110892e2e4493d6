//! Decomposition into single-engine containers and a cross-engine
//! remainder, query signatures, and candidate plan enumeration.

mod decompose;
mod enumerate;
mod explain;
mod signature;

pub use decompose::{decompose, Container, CrossOp, Decomposition, RemainderNode};
pub use enumerate::{enumerate_plans, CandidatePlan, CastTarget, MigrateStep, Step, DEFAULT_PLAN_CAP};
pub use explain::explain;
pub use signature::{signature_of, Signature};

use crate::engines::Catalog;
use crate::error::Result;
use crate::island::IslandRegistry;
use crate::querylang::{self, LogicalPlan, Query};

/// Everything the planner derives from one query text.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub text: String,
    pub query: Query,
    pub logical: LogicalPlan,
    pub decomposition: Decomposition,
    pub signature: Signature,
}

pub fn prepare(text: &str, registry: &IslandRegistry, catalog: &Catalog) -> Result<Prepared> {
    let query = querylang::parse(text)?;
    let logical = querylang::validate(&query, registry, catalog)?;
    let decomposition = decompose(&logical, registry, catalog)?;
    let signature = signature_of(&decomposition, &logical, catalog);
    Ok(Prepared {
        text: text.to_string(),
        query,
        logical,
        decomposition,
        signature,
    })
}
