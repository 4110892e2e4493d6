//! Polystore middleware: queries are written against islands of information
//! and executed over embedded relational, key-value and array engines.

pub mod cif;
pub mod config;
pub mod datagen;
pub mod engines;
pub mod error;
pub mod executor;
pub mod island;
pub mod lexer;
pub mod migrator;
pub mod monitor;
pub mod planner;
pub mod querylang;
pub mod sql;
pub mod value;

mod hashing;

pub use error::{Error, Result, Span};
pub use value::{CanonicalTable, Column, Tag, Value};
