//! Worklist interpretation over agent-assessed claims.
//!
//! Claims live at the nodes of an evaluation graph and carry assessments
//! from a bilattice-style join semilattice. An agent evaluates claims from
//! the code and predecessor context at a node; results are joined in and
//! changes propagate along context and feedback edges until the worklist
//! empties.

pub mod agent;
pub mod assessment;
pub mod claims;
pub mod graph;
pub mod queries;
pub mod report;
pub mod revision;
pub mod scenario;
pub mod trace;
pub mod transformer;
pub mod worklist;
pub mod wto;

pub use assessment::{Assessment, DomainKind, JoinSemilattice, Strength};
pub use claims::{Claim, GlobalState};
pub use graph::{EvaluationGraph, NodeId};
pub use revision::{run_epochs, EpochRun, EpochStatus};
pub use scenario::{load_scenario, parse_scenario, LoadError, Scenario};
pub use worklist::{run, RunError, RunOptions, RunTrace, WorklistPolicy};
