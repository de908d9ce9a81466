//! Engine for answering restricted OLAP SQL from a self-maintaining
//! collection of materialized views.
//!
//! The pipeline: SQL parses into a fixed-shape query tree
//! ([`oqt`]), which canonicalizes into five fragment sets. A domain index
//! ([`domain`]) narrows the view collection to views over exactly the query's
//! tables; the fragment matcher ([`matcher`]) then scores selection, group-by,
//! aggregate and projection fragments and, on a full match, derives the answer
//! from the smallest matching view's rows instead of the warehouse. Every
//! query records a hit; a session-based analyzer ([`maintenance`]) promotes,
//! demotes and purges views from the usage log.

pub mod catalog;
pub mod domain;
pub mod dwgen;
pub mod engine;
pub mod error;
pub mod eval;
pub mod expr;
pub mod maintenance;
pub mod matcher;
pub mod oqt;
pub mod parser;
pub mod relation;
pub mod simulate;
pub mod store;
pub mod value;
pub mod workload;

pub use catalog::Catalog;
pub use error::{Error, Result, Violation};
pub use domain::{DomainIndex, MvId};
pub use engine::{Answer, Engine, EngineConfig, MatchOutcome, SessionMode};
pub use expr::ScalarExpr;
pub use maintenance::{AppliedAction, ScvAction};
pub use matcher::{DerivationPlan, Fraction, MatchScore, ResidualPolicy};
pub use oqt::{AggSpec, CanonicalFragments, CmpOp, Condition, OlapQueryTree, OqtNode};
pub use relation::{Column, Relation};
pub use store::{MaterializedView, MvStore, TrackedQuery, ViewState};
pub use value::{ColumnType, Decimal, Value};
