pub mod constraint;
pub mod smtlib;
pub mod solver;
pub mod engine;
pub mod verification;
pub mod maxsmt;
pub mod trace;
pub mod gen;
pub mod whatif;
pub mod fixtures;
pub mod batch;

/// JSON Schema of a serialized [`constraint::ConstraintBundle`].
pub const BUNDLE_SCHEMA: &str = include_str!("../schema/bundle.schema.json");
