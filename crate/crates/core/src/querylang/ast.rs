use crate::error::Span;
use crate::island::IslandOp;

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub root: Scope,
}

/// `island( body )`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub island: String,
    pub body: IslandOp<Source>,
    pub span: Span,
}

/// What may stand where an island expects a named object.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Object {
        name: String,
        span: Span,
    },
    Cast(Box<CastExpr>),
    /// Operator nested inside another operator of the same island.
    Op {
        op: Box<IslandOp<Source>>,
        span: Span,
    },
}

impl Source {
    pub fn object(name: &str) -> Source {
        Source::Object {
            name: name.to_string(),
            span: Span::default(),
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Source::Object { span, .. } | Source::Op { span, .. } => *span,
            Source::Cast(c) => c.span,
        }
    }

    /// Name the source is known by inside a SELECT when it has no alias.
    pub fn default_name(&self) -> Option<&str> {
        match self {
            Source::Object { name, .. } => Some(name),
            Source::Cast(c) => c.alias.as_deref(),
            Source::Op { .. } => None,
        }
    }
}

/// `cast(scope, target [, alias] [, key=...])`.
#[derive(Debug, Clone, PartialEq)]
pub struct CastExpr {
    pub scope: Scope,
    pub target: String,
    pub alias: Option<String>,
    pub key: Option<Vec<String>>,
    pub span: Span,
}
