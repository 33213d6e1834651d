//! Ground-truth cable geometry and topology: the planar knot-diagram model.
//!
//! The cable is a 2D polyline with over/under flags at every transversal
//! self-intersection. All topology queries (Gauss codes, knot spans, the
//! untangled predicate) are derived from that diagram.

mod crossings;
mod gauss;
mod generate;
mod fixtures;
mod template;

pub use crossings::{brute_force_oracle_available, compute_crossings, CrossingUpdate};
pub use fixtures::{load_polyline_csv, save_polyline_csv, state_from_fixture};
pub use gauss::{classify_knots, gauss_code, is_untangled, reduce_r1_r2, GaussCode, GaussEntry};
pub use generate::{generate_initial_state, KnotRequest, Placement, Variant};
pub use template::{knot_template, KnotKind, KnotTemplate};

use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::Point2;
use crate::quasistatics::Workspace;
use serde::{Deserialize, Serialize};

/// Which of the two strands at a crossing passes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverStrand {
    /// The strand on segment `seg_a` (the lower-u passage).
    A,
    /// The strand on segment `seg_b`.
    B,
}

/// A transversal self-intersection of the centerline projection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub seg_a: usize,
    pub seg_b: usize,
    pub point: Point2,
    pub over: OverStrand,
    /// Arclength fraction of the passage on seg_a.
    pub u_a: f64,
    /// Arclength fraction of the passage on seg_b.
    pub u_b: f64,
}

impl Crossing {
    pub fn over_is_first_passage(&self) -> bool {
        self.over == OverStrand::A
    }
}

/// Equal-segment polyline representation of the cable centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centerline {
    pub nodes: Vec<Point2>,
    pub seg_len: f64,
    pub radius: f64,
}

impl Centerline {
    pub fn new(nodes: Vec<Point2>, seg_len: f64, radius: f64) -> Self {
        Centerline {
            nodes,
            seg_len,
            radius,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn seg_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn total_length(&self) -> f64 {
        crate::geom::polyline_length(&self.nodes)
    }

    /// Nearest node index for an arclength fraction u in [0, 1].
    pub fn node_at_u(&self, u: f64) -> usize {
        let n = self.nodes.len() - 1;
        ((u.clamp(0.0, 1.0) * n as f64).round() as usize).min(n)
    }

    pub fn u_at_node(&self, idx: usize) -> f64 {
        idx as f64 / (self.nodes.len() - 1) as f64
    }
}

/// Knot classes the policy distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpanKind {
    Overhand,
    Figure8,
    /// A crossing cluster that reduces to neither pattern nor the empty
    /// diagram. Treated as a knot by the policy.
    Unknown,
}

/// A classified knot occupying a u-interval of the cable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotSpan {
    pub kind: SpanKind,
    pub u_interval: (f64, f64),
    /// Max pairwise distance among the span's crossing points, in cm.
    pub diameter_cm: f64,
    /// Indices into the state's crossing list.
    pub crossings: Vec<usize>,
}

impl KnotSpan {
    pub fn node_range(&self, centerline: &Centerline) -> (usize, usize) {
        (
            centerline.node_at_u(self.u_interval.0),
            centerline.node_at_u(self.u_interval.1),
        )
    }

    pub fn diameter_mm(&self) -> f64 {
        self.diameter_cm * 10.0
    }
}

/// Per-knot perception relief accumulated by partial dilations. Matched to
/// spans by u-midpoint proximity because spans are recomputed after every
/// mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpanRelief {
    pub u_mid: f64,
    pub occlusion_factor: f64,
}

/// Full ground-truth simulator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub version: u32,
    pub centerline: Centerline,
    pub crossings: Vec<Crossing>,
    pub workspace: Workspace,
    pub sim_clock: f64,
    pub irrecoverable: bool,
    pub relief: Vec<SpanRelief>,
}

pub const STATE_VERSION: u32 = 1;

impl SimState {
    pub fn new(centerline: Centerline, workspace: Workspace) -> Result<Self> {
        let mut s = SimState {
            version: STATE_VERSION,
            centerline,
            crossings: Vec::new(),
            workspace,
            sim_clock: 0.0,
            irrecoverable: false,
            relief: Vec::new(),
        };
        s.update_crossings(CrossingUpdate::default())?;
        Ok(s)
    }

    /// Recompute the crossing set from the centerline, carrying over/under
    /// flags from the previous set per the update policy.
    pub fn update_crossings(&mut self, update: CrossingUpdate) -> Result<()> {
        self.crossings = compute_crossings(&self.centerline, &self.crossings, update)?;
        Ok(())
    }

    pub fn gauss_code(&self) -> GaussCode {
        gauss_code(self)
    }

    pub fn knot_spans(&self) -> Vec<KnotSpan> {
        classify_knots(&self.gauss_code(), self)
    }

    pub fn is_untangled(&self) -> bool {
        is_untangled(self)
    }

    /// Perception-relief multiplier for the span at the given u-midpoint.
    pub fn relief_factor(&self, u_mid: f64) -> f64 {
        self.relief
            .iter()
            .filter(|r| (r.u_mid - u_mid).abs() < 0.08)
            .map(|r| r.occlusion_factor)
            .fold(1.0, f64::min)
    }

    pub fn apply_relief(&mut self, u_mid: f64, factor: f64) {
        if let Some(r) = self
            .relief
            .iter_mut()
            .find(|r| (r.u_mid - u_mid).abs() < 0.08)
        {
            r.u_mid = u_mid;
            r.occlusion_factor *= factor;
        } else {
            self.relief.push(SpanRelief {
                u_mid,
                occlusion_factor: factor,
            });
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let s: SimState = serde_json::from_str(json)?;
        if s.version != STATE_VERSION {
            return Err(SimError::ConfigInvalid(format!(
                "unsupported state version {}",
                s.version
            )));
        }
        Ok(s)
    }

    /// Fraction of nodes outside the reachable rect.
    pub fn off_reachable_fraction(&self) -> f64 {
        let off = self
            .centerline
            .nodes
            .iter()
            .filter(|p| !self.workspace.reachable_rect.contains(**p))
            .count();
        off as f64 / self.centerline.nodes.len() as f64
    }
}

/// Build a knot-free serpentine cable on the workspace, mostly for tests
/// and fixtures.
pub fn straight_state(cfg: &SimConfig) -> SimState {
    let ws = Workspace::from_config(&cfg.workspace);
    let path = generate::serpentine_path(&ws, cfg.cable.length_mm);
    let nodes = crate::geom::resample(&path, cfg.node_count());
    SimState::new(
        Centerline::new(nodes, cfg.cable.seg_len_mm, cfg.cable.radius_mm),
        ws,
    )
    .expect("serpentine cable has no degenerate geometry")
}
