//! Run configuration: every tunable constant of the simulator, physics
//! outcome model, perception noise model, and policy, with the calibrated
//! defaults. Serializable as human-readable JSON so a run config file can
//! override any field.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CableConfig {
    pub length_mm: f64,
    pub seg_len_mm: f64,
    pub radius_mm: f64,
}

impl Default for CableConfig {
    fn default() -> Self {
        CableConfig {
            length_mm: 2700.0,
            seg_len_mm: 10.0,
            radius_mm: 3.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct WorkspaceConfig {
    pub observable_w_mm: f64,
    pub observable_h_mm: f64,
    /// Left/right extension of the reachable area beyond the observable one.
    pub reach_ext_mm: f64,
    pub image_w_mm: f64,
    pub image_h_mm: f64,
}

impl Default for WorkspaceConfig {
    fn default() -> Self {
        WorkspaceConfig {
            observable_w_mm: 1000.0,
            observable_h_mm: 750.0,
            reach_ext_mm: 100.0,
            image_w_mm: 1200.0,
            image_h_mm: 900.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PhysicsConfig {
    pub relax_max_iters: usize,
    pub relax_tol_mm: f64,
    pub min_bend_radius_mm: f64,
    /// Probability of adjacent slack following a dropped mass off-workspace,
    /// applied once per primitive when the edge-load trigger fires.
    pub p_spill: f64,
    /// Edge band width for the spill trigger.
    pub spill_edge_margin_mm: f64,
    /// Fraction of arclength inside the edge band that arms the spill check.
    pub spill_arclen_frac: f64,
    /// Fraction of nodes off the reachable area that makes a state irrecoverable.
    pub irrecoverable_frac: f64,
    pub grasp_miss_prob: f64,
    pub exposure_slip_prob: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        PhysicsConfig {
            relax_max_iters: 200,
            relax_tol_mm: 0.1,
            min_bend_radius_mm: 8.0,
            p_spill: 0.05,
            spill_edge_margin_mm: 50.0,
            spill_arclen_frac: 0.25,
            irrecoverable_frac: 0.6,
            grasp_miss_prob: 0.02,
            exposure_slip_prob: 0.3,
        }
    }
}

/// Per-primitive sim-clock advances, in seconds. Calibrated so the mean
/// time per action lands near 53 s.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DurationConfig {
    pub full_dilation_s: f64,
    pub partial_dilation_s: f64,
    pub reidemeister_s: f64,
    pub incremental_reidemeister_s: f64,
    pub exposure_s: f64,
    pub perception_s: f64,
}

impl Default for DurationConfig {
    fn default() -> Self {
        DurationConfig {
            full_dilation_s: 55.0,
            partial_dilation_s: 30.0,
            reidemeister_s: 45.0,
            incremental_reidemeister_s: 90.0,
            exposure_s: 30.0,
            perception_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PerceptConfig {
    /// All detector and ensemble corruption off: detectors emit truth exactly.
    pub noise_enabled: bool,
    pub endpoint_precision: f64,
    pub knot_recall: f64,
    pub knot_precision: f64,
    /// Per-view detection recall for knots over-tightened below the
    /// 3 cm diameter latch; tight knots are hard to perceive.
    pub overtight_knot_recall: f64,
    pub trace_step_px: f64,
    pub trace_branch_margin_deg: f64,
    pub trace_max_turn_deg: f64,
    pub trace_beam_cap: usize,
    pub knot_trace_thresh_px: f64,
    pub endpoint_trace_thresh_px: f64,
    /// Fixed-distance stop for endpoint-mode traces.
    pub endpoint_trace_dist_px: f64,
    pub kappa: f64,
    pub ensemble_size: usize,
    /// Score-field noise: base amplitude plus gains on occlusion and tightness.
    pub noise_base: f64,
    pub noise_occlusion_gain: f64,
    pub noise_tightness_gain: f64,
    pub noise_corr_len_px: f64,
    pub ideal_peak: f64,
    pub ideal_sigma_px: f64,
    pub knot_crop_px: u32,
}

impl Default for PerceptConfig {
    fn default() -> Self {
        PerceptConfig {
            noise_enabled: true,
            endpoint_precision: 0.867,
            knot_recall: 0.955,
            knot_precision: 0.913,
            overtight_knot_recall: 0.5,
            trace_step_px: 10.0,
            trace_branch_margin_deg: 30.0,
            trace_max_turn_deg: 75.0,
            trace_beam_cap: 64,
            knot_trace_thresh_px: 24.0,
            endpoint_trace_thresh_px: 12.0,
            endpoint_trace_dist_px: 150.0,
            kappa: 0.35,
            ensemble_size: 3,
            noise_base: 0.15,
            noise_occlusion_gain: 0.5,
            noise_tightness_gain: 0.3,
            noise_corr_len_px: 20.0,
            ideal_peak: 0.9,
            ideal_sigma_px: 15.0,
            knot_crop_px: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ActsConfig {
    /// Arclength tolerance for a proposal to count as a correct grasp.
    pub grasp_tolerance_mm: f64,
    pub tighten_factor: f64,
    /// Diameter at or below which a knot is latched over-tightened.
    pub overtight_diameter_mm: f64,
    pub partial_separation_mm: f64,
    pub partial_diameter_gain_mm: f64,
    /// Multiplier applied to a knot's effective occlusion per partial dilation.
    pub disambiguation_factor: f64,
    pub waypoint_views: usize,
    /// Down-cable grasp offset from each endpoint for Reidemeister moves.
    pub endpoint_grasp_offset_px: f64,
}

impl Default for ActsConfig {
    fn default() -> Self {
        ActsConfig {
            grasp_tolerance_mm: 25.0,
            tighten_factor: 0.7,
            overtight_diameter_mm: 30.0,
            partial_separation_mm: 50.0,
            partial_diameter_gain_mm: 10.0,
            disambiguation_factor: 0.5,
            waypoint_views: 3,
            endpoint_grasp_offset_px: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SimConfig {
    pub cable: CableConfig,
    pub workspace: WorkspaceConfig,
    pub physics: PhysicsConfig,
    pub durations: DurationConfig,
    pub percept: PerceptConfig,
    pub acts: ActsConfig,
    pub uncertainty_enabled: bool,
    pub t_max_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            cable: CableConfig::default(),
            workspace: WorkspaceConfig::default(),
            physics: PhysicsConfig::default(),
            durations: DurationConfig::default(),
            percept: PerceptConfig::default(),
            acts: ActsConfig::default(),
            uncertainty_enabled: true,
            t_max_s: 900.0,
        }
    }
}

impl SimConfig {
    pub fn node_count(&self) -> usize {
        (self.cable.length_mm / self.cable.seg_len_mm).round() as usize + 1
    }

    /// Disable every stochastic corruption: detectors emit truth, score
    /// fields are the analytic ideal, and physics event probabilities are 0.
    pub fn with_noise_off(mut self) -> Self {
        self.percept.noise_enabled = false;
        self.physics.p_spill = 0.0;
        self.physics.grasp_miss_prob = 0.0;
        self.physics.exposure_slip_prob = 0.0;
        self
    }

    /// The SGTM 2.0(-U) ablation: all three uncertainty mechanisms off
    /// together (single ensemble member, single termination view, traces
    /// always treated as certain).
    pub fn with_uncertainty_disabled(mut self) -> Self {
        self.uncertainty_enabled = false;
        self.percept.ensemble_size = 1;
        self.acts.waypoint_views = 1;
        self
    }

    /// Stable hash of the serialized config, for record provenance.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        // FNV-1a, enough for a provenance tag.
        let mut h: u64 = 0xcbf29ce484222325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}
