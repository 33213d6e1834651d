//! Uncertainty-aware perception: calibrated noisy endpoint/knot detectors
//! with the analytic loop filter, the multi-hypothesis mask tracer with
//! divergence-box uncertainty, and the ensemble cage-pinch scorer with
//! min-aggregation and the kappa gate.

mod detect;
mod score;
mod trace;

pub use detect::{detect_endpoints, detect_knots, detect_knots_unfiltered, loop_filter};
pub use score::{min_aggregate, proposal_from_fields, score_cage_pinch, GraspProposal, NetworkStatus, ScoreField};
pub use trace::{divergence_status, trace, TraceResult, TraceStop};

use crate::observe::PixelRect;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DetKind {
    Endpoint,
    Knot,
}

/// A post-threshold detection; confidence is always >= 0.99.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Detection {
    pub kind: DetKind,
    pub bbox: PixelRect,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TraceStatus {
    Certain,
    Uncertain,
}
