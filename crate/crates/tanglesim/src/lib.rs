//! Deterministic desk-scale simulator and policy engine for bimanual
//! long-cable untangling: a planar knot-diagram cable model, quasi-static
//! manipulation, synthetic overhead observations, uncertainty-quantified
//! perception, manipulation primitives, a decision-tree policy, and a
//! Monte-Carlo rollout harness.

pub mod acts;
pub mod bench;
pub mod cable;
pub mod config;
pub mod error;
pub mod geom;
pub mod observe;
pub mod percept;
pub mod policy;
pub mod quasistatics;

pub use config::SimConfig;
pub use error::{Result, SimError};
