//! The polystore query language: `island( body )` scopes and `cast(...)`
//! conversions between islands.

mod ast;
mod parser;
mod printer;
mod validate;

pub use ast::{CastExpr, Query, Scope, Source};
pub use parser::parse;
pub use printer::pretty_print;
pub use validate::{validate, CastNode, Input, LogicalNode, LogicalPlan, NodeId, ObjectRef, OpNode};
