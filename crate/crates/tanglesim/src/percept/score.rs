//! Ensemble cage-pinch scoring: analytic ideal score fields corrupted by
//! member-seeded smooth noise, aggregated by pixelwise minimum, gated by
//! the kappa confidence rule.

use crate::config::PerceptConfig;
use crate::observe::{Observation, PixelRect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum NetworkStatus {
    Certain,
    Uncertain,
}

/// Per-pixel cage and pinch score rasters over a knot crop.
#[derive(Debug, Clone)]
pub struct ScoreField {
    pub rect: PixelRect,
    pub cage: Vec<f64>,
    pub pinch: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraspProposal {
    pub cage_px: (i32, i32),
    pub pinch_px: (i32, i32),
    /// Product of the aggregated cage and pinch maxima.
    pub confidence: f64,
    pub status: NetworkStatus,
}

/// Pixelwise minimum across ensemble member rasters.
pub fn min_aggregate(members: &[Vec<f64>]) -> Vec<f64> {
    let mut out = members[0].clone();
    for m in &members[1..] {
        for (o, &v) in out.iter_mut().zip(m) {
            if v < *o {
                *o = v;
            }
        }
    }
    out
}

fn argmax(field: &[f64], rect: &PixelRect) -> ((i32, i32), f64) {
    let w = rect.width() as usize;
    let (mut bi, mut bv) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in field.iter().enumerate() {
        if v > bv {
            bv = v;
            bi = i;
        }
    }
    let (x, y) = (rect.x0 + (bi % w) as i32, rect.y0 + (bi / w) as i32);
    ((x, y), bv)
}

/// Apply the argmax + kappa gate to aggregated fields.
pub fn proposal_from_fields(
    cage: &[f64],
    pinch: &[f64],
    rect: &PixelRect,
    kappa: f64,
) -> GraspProposal {
    let (cage_px, cmax) = argmax(cage, rect);
    let (pinch_px, pmax) = argmax(pinch, rect);
    let confidence = cmax * pmax;
    GraspProposal {
        cage_px,
        pinch_px,
        confidence,
        status: if confidence < kappa {
            NetworkStatus::Uncertain
        } else {
            NetworkStatus::Certain
        },
    }
}

fn gaussian_field(rect: &PixelRect, peak_at: (i32, i32), peak: f64, sigma: f64) -> Vec<f64> {
    let w = rect.width() as usize;
    let h = rect.height() as usize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let dx = (rect.x0 + x as i32 - peak_at.0) as f64;
            let dy = (rect.y0 + y as i32 - peak_at.1) as f64;
            out[y * w + x] = peak * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
        }
    }
    out
}

/// Smooth noise: coarse uniform grid at the correlation length, bilinearly
/// interpolated over the crop.
fn smooth_noise(rect: &PixelRect, amp: f64, corr_len: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let w = rect.width() as usize;
    let h = rect.height() as usize;
    let gw = (w as f64 / corr_len).ceil() as usize + 2;
    let gh = (h as f64 / corr_len).ceil() as usize + 2;
    let grid: Vec<f64> = (0..gw * gh)
        .map(|_| amp * (2.0 * rng.gen::<f64>() - 1.0))
        .collect();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        let gy = y as f64 / corr_len;
        let (y0, fy) = (gy as usize, gy.fract());
        for x in 0..w {
            let gx = x as f64 / corr_len;
            let (x0, fx) = (gx as usize, gx.fract());
            let g = |i: usize, j: usize| grid[j.min(gh - 1) * gw + i.min(gw - 1)];
            let top = g(x0, y0) * (1.0 - fx) + g(x0 + 1, y0) * fx;
            let bot = g(x0, y0 + 1) * (1.0 - fx) + g(x0 + 1, y0 + 1) * fx;
            out[y * w + x] = top * (1.0 - fy) + bot * fy;
        }
    }
    out
}

/// Pixel of a node via the truth map, falling back to the nearest visible
/// node (occluded nodes have no exclusive pixels).
fn node_px(obs: &Observation, node: usize) -> (i32, i32) {
    let n = obs.truth.node_pixels.len();
    for d in 0..n {
        for cand in [node.saturating_sub(d), (node + d).min(n - 1)] {
            if let Some(&px) = obs.truth.node_pixels[cand].first() {
                let w = obs.width as u32;
                return ((px % w) as i32, (px / w) as i32);
            }
        }
    }
    (0, 0)
}

/// Ground-truth cage/pinch nodes for a knot span: the pinch secures the
/// strand entering the knot (3 nodes before the near span boundary), the
/// cage sits just past the far boundary. The entering side is whichever
/// span end is closer to the trace tail.
pub(crate) fn gt_grasp_nodes(
    obs: &Observation,
    knot_idx: usize,
    trace_tail_px: (i32, i32),
) -> (usize, usize) {
    let n = obs.truth.node_pixels.len();
    let span = &obs.truth.knots[knot_idx].1;
    let lo = (span.u_interval.0 * (n - 1) as f64).round() as usize;
    let hi = (span.u_interval.1 * (n - 1) as f64).round() as usize;
    let d2 = |p: (i32, i32)| {
        let q = trace_tail_px;
        ((p.0 - q.0) as f64).hypot((p.1 - q.1) as f64)
    };
    let (near, far) = if d2(node_px(obs, lo)) <= d2(node_px(obs, hi)) {
        (lo, hi)
    } else {
        (hi, lo)
    };
    let pinch = if near <= far {
        near.saturating_sub(3)
    } else {
        (near + 3).min(n - 1)
    };
    let cage = if near <= far {
        (far + 3).min(n - 1)
    } else {
        far.saturating_sub(3)
    };
    (cage, pinch)
}

/// Score a knot crop with an M-member ensemble and gate by kappa.
///
/// `relief` scales the knot's effective occluded fraction (partial
/// dilations halve it); `diameter_mm` drives the tightness noise term.
pub fn score_cage_pinch(
    obs: &Observation,
    knot_idx: usize,
    trace_tail_px: (i32, i32),
    relief: f64,
    cfg: &PerceptConfig,
    rng: &mut ChaCha8Rng,
) -> GraspProposal {
    let (bbox, span) = &obs.truth.knots[knot_idx];
    let want = cfg.knot_crop_px as i32;
    let rect = bbox
        .dilate(((want - bbox.width()).max(0) / 2).max((want - bbox.height()).max(0) / 2))
        .clip(obs.width, obs.height);

    let (cage_node, pinch_node) = gt_grasp_nodes(obs, knot_idx, trace_tail_px);
    let cage_gt = node_px(obs, cage_node);
    let pinch_gt = node_px(obs, pinch_node);
    let ideal_cage = gaussian_field(&rect, cage_gt, cfg.ideal_peak, cfg.ideal_sigma_px);
    let ideal_pinch = gaussian_field(&rect, pinch_gt, cfg.ideal_peak, cfg.ideal_sigma_px);

    if !cfg.noise_enabled {
        return proposal_from_fields(&ideal_cage, &ideal_pinch, &rect, cfg.kappa);
    }

    let occlusion = obs.truth.knot_occlusion[knot_idx] * relief.clamp(0.0, 1.0);
    let tightness = (60.0 / span.diameter_mm()).min(1.0);
    let amp = cfg.noise_base
        + cfg.noise_occlusion_gain * occlusion
        + cfg.noise_tightness_gain * tightness;

    let mut cages = Vec::with_capacity(cfg.ensemble_size);
    let mut pinches = Vec::with_capacity(cfg.ensemble_size);
    for _ in 0..cfg.ensemble_size.max(1) {
        let nc = smooth_noise(&rect, amp, cfg.noise_corr_len_px, rng);
        let np = smooth_noise(&rect, amp, cfg.noise_corr_len_px, rng);
        cages.push(
            ideal_cage
                .iter()
                .zip(&nc)
                .map(|(&v, &n)| (v + n).clamp(0.0, 1.0))
                .collect::<Vec<f64>>(),
        );
        pinches.push(
            ideal_pinch
                .iter()
                .zip(&np)
                .map(|(&v, &n)| (v + n).clamp(0.0, 1.0))
                .collect::<Vec<f64>>(),
        );
    }
    let cage = min_aggregate(&cages);
    let pinch = min_aggregate(&pinches);
    proposal_from_fields(&cage, &pinch, &rect, cfg.kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::{generate_initial_state, KnotRequest};
    use crate::config::SimConfig;
    use crate::observe::render;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn min_aggregation_elementwise() {
        let a = vec![0.9, 0.2, 0.1, 0.5];
        let b = vec![0.7, 0.4, 0.3, 0.6];
        assert_eq!(min_aggregate(&[a, b]), vec![0.7, 0.2, 0.1, 0.5]);
    }

    #[test]
    fn kappa_gate_worked_example() {
        let rect = PixelRect {
            x0: 0,
            y0: 0,
            x1: 1,
            y1: 0,
        };
        // Aggregated maxima 0.7 (cage) and 0.4 (pinch).
        let p = proposal_from_fields(&[0.7, 0.3], &[0.4, 0.1], &rect, 0.35);
        assert_eq!(p.confidence, 0.7 * 0.4);
        assert_eq!(p.status, NetworkStatus::Uncertain);
        let p2 = proposal_from_fields(&[0.7, 0.3], &[0.6, 0.1], &rect, 0.35);
        assert_eq!(p2.status, NetworkStatus::Certain);
    }

    #[test]
    fn scaling_members_scales_confidence_quadratically() {
        let rect = PixelRect {
            x0: 0,
            y0: 0,
            x1: 3,
            y1: 0,
        };
        let cage = vec![0.2, 0.8, 0.5, 0.1];
        let pinch = vec![0.6, 0.3, 0.9, 0.2];
        let p = proposal_from_fields(&cage, &pinch, &rect, 0.35);
        let alpha = 0.5;
        let sc: Vec<f64> = cage.iter().map(|v| v * alpha).collect();
        let sp: Vec<f64> = pinch.iter().map(|v| v * alpha).collect();
        let q = proposal_from_fields(&sc, &sp, &rect, 0.35);
        assert_eq!(q.cage_px, p.cage_px);
        assert_eq!(q.pinch_px, p.pinch_px);
        assert!((q.confidence - p.confidence * alpha * alpha).abs() < 1e-15);
    }

    #[test]
    fn adding_members_never_increases_scores() {
        let a = vec![0.9, 0.2, 0.1, 0.5];
        let b = vec![0.7, 0.4, 0.3, 0.6];
        let c = vec![0.8, 0.1, 0.9, 0.55];
        let two = min_aggregate(&[a.clone(), b.clone()]);
        let three = min_aggregate(&[a, b, c]);
        for (t3, t2) in three.iter().zip(&two) {
            assert!(t3 <= t2);
        }
    }

    #[test]
    fn noise_off_peaks_at_analytic_points() {
        let cfg = SimConfig::default().with_noise_off();
        let req = KnotRequest::defaults(1, 11);
        let st = generate_initial_state(1, &req, 11, &cfg).unwrap();
        let obs = render(&st, 0);
        let tail = obs.truth.endpoints[0].0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = score_cage_pinch(&obs, 0, tail, 1.0, &cfg.percept, &mut rng);
        assert_eq!(p.status, NetworkStatus::Certain);
        assert!((p.confidence - 0.81).abs() < 1e-12, "conf {}", p.confidence);
        let (cage_node, pinch_node) = gt_grasp_nodes(&obs, 0, tail);
        let cage_gt = node_px(&obs, cage_node);
        let pinch_gt = node_px(&obs, pinch_node);
        assert_eq!(p.cage_px, cage_gt);
        assert_eq!(p.pinch_px, pinch_gt);
    }

    #[test]
    fn scoring_is_deterministic_per_seed() {
        let cfg = SimConfig::default();
        let req = KnotRequest::defaults(1, 11);
        let st = generate_initial_state(1, &req, 11, &cfg).unwrap();
        let obs = render(&st, 0);
        let tail = obs.truth.endpoints[0].0;
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let p1 = score_cage_pinch(&obs, 0, tail, 1.0, &cfg.percept, &mut r1);
        let p2 = score_cage_pinch(&obs, 0, tail, 1.0, &cfg.percept, &mut r2);
        assert_eq!(p1, p2);
    }
}
