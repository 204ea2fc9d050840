//! Anytime probabilistic inference over a knowledge base of Horn clauses and
//! conditional dependency statements.
//!
//! The engine builds the belief network a query needs while evaluating it,
//! so a run stopped early still reports an answer or a bound.

pub mod deduce;
pub mod factor;
pub mod kb;
pub mod oracle;
pub mod scalar;
pub mod scoring;
pub mod search;

pub use factor::interval::IntervalFactor;
pub use factor::{Factor, GroundRv};
pub use kb::{parse_kb, parse_query, print_kb, validate_kb, KnowledgeBase, Query};
pub use scalar::Scalar;
pub use search::{run_query, Policy, RunConfig, RunResult, SearchError, SearchState};

pub type Factor64 = Factor<f64>;
pub type Factor32 = Factor<f32>;
pub type RationalFactor = Factor<num_rational::Rational64>;
pub type IntervalFactor64 = IntervalFactor<f64>;
pub type SearchState64 = SearchState<f64>;
