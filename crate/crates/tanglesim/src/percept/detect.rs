//! Truth-anchored stochastic detectors calibrated to fixed precision/recall
//! targets, plus the analytic loop filter.

use super::{DetKind, Detection};
use crate::config::PerceptConfig;
use crate::observe::{Observation, PixelRect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const ENDPOINT_BOX_R: i32 = 8;
const FP_KNOT_BOX_R: i32 = 30;

fn confidence(rng: &mut ChaCha8Rng) -> f64 {
    0.99 + 0.01 * rng.gen::<f64>()
}

/// A seeded cable location for false positives: a uniformly chosen visible
/// node's pixel, away from the true endpoints.
fn random_cable_px(obs: &Observation, rng: &mut ChaCha8Rng, min_endpoint_dist: i32) -> Option<(i32, i32)> {
    let candidates: Vec<usize> = obs
        .truth
        .node_pixels
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(i, _)| i)
        .collect();
    for _ in 0..16 {
        if candidates.is_empty() {
            return None;
        }
        let node = candidates[rng.gen_range(0..candidates.len())];
        let px = obs.truth.node_pixels[node][0];
        let (x, y) = ((px % obs.width as u32) as i32, (px / obs.width as u32) as i32);
        let far = obs
            .truth
            .endpoints
            .iter()
            .all(|&((ex, ey), _)| (x - ex).abs().max((y - ey).abs()) > min_endpoint_dist);
        if far {
            return Some((x, y));
        }
    }
    None
}

/// Every visible true endpoint is emitted (recall 1.0); false positives are
/// injected per visible endpoint so long-run precision matches the target.
pub fn detect_endpoints(
    obs: &Observation,
    cfg: &PerceptConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for &((x, y), _) in &obs.truth.endpoints {
        out.push(Detection {
            kind: DetKind::Endpoint,
            bbox: PixelRect {
                x0: x - ENDPOINT_BOX_R,
                y0: y - ENDPOINT_BOX_R,
                x1: x + ENDPOINT_BOX_R,
                y1: y + ENDPOINT_BOX_R,
            }
            .clip(obs.width, obs.height),
            confidence: if cfg.noise_enabled { confidence(rng) } else { 1.0 },
        });
    }
    if cfg.noise_enabled {
        // precision = 1 / (1 + q)  =>  q = 1/p - 1 per true endpoint.
        let q = (1.0 / cfg.endpoint_precision - 1.0).max(0.0);
        for _ in 0..obs.truth.endpoints.len() {
            if rng.gen_bool(q.min(1.0)) {
                if let Some((x, y)) = random_cable_px(obs, rng, 40) {
                    out.push(Detection {
                        kind: DetKind::Endpoint,
                        bbox: PixelRect {
                            x0: x - ENDPOINT_BOX_R,
                            y0: y - ENDPOINT_BOX_R,
                            x1: x + ENDPOINT_BOX_R,
                            y1: y + ENDPOINT_BOX_R,
                        }
                        .clip(obs.width, obs.height),
                        confidence: confidence(rng),
                    });
                }
            }
        }
    }
    out
}

/// Knot detections before the loop filter: each true visible knot emitted
/// with the per-view recall (halved for over-tightened knots), plus seeded
/// false positives over slack so pre-filter precision matches the target.
pub fn detect_knots_unfiltered(
    obs: &Observation,
    cfg: &PerceptConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for (i, (bbox, span)) in obs.truth.knots.iter().enumerate() {
        let _ = i;
        let recall = if span.diameter_mm() <= 30.0 {
            cfg.overtight_knot_recall
        } else {
            cfg.knot_recall
        };
        let hit = !cfg.noise_enabled || rng.gen_bool(recall.clamp(0.0, 1.0));
        if hit {
            out.push(Detection {
                kind: DetKind::Knot,
                bbox: *bbox,
                confidence: if cfg.noise_enabled { confidence(rng) } else { 1.0 },
            });
        }
    }
    if cfg.noise_enabled {
        // Pre-filter precision target: p = r / (r + q) => q = r (1/p - 1).
        let q = cfg.knot_recall * (1.0 / cfg.knot_precision - 1.0).max(0.0);
        for _ in 0..obs.truth.knots.len().max(1) {
            if obs.truth.knots.is_empty() {
                break;
            }
            if rng.gen_bool(q.min(1.0)) {
                if let Some((x, y)) = random_cable_px(obs, rng, 0) {
                    // Skip slots overlapping a real knot box.
                    let overlaps = obs
                        .truth
                        .knots
                        .iter()
                        .any(|(b, _)| b.dilate(FP_KNOT_BOX_R).contains(x, y));
                    if !overlaps {
                        out.push(Detection {
                            kind: DetKind::Knot,
                            bbox: PixelRect {
                                x0: x - FP_KNOT_BOX_R,
                                y0: y - FP_KNOT_BOX_R,
                                x1: x + FP_KNOT_BOX_R,
                                y1: y + FP_KNOT_BOX_R,
                            }
                            .clip(obs.width, obs.height),
                            confidence: confidence(rng),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Remove detections whose bbox contains at most one crossing: a simple
/// loop cannot be a knot. True knots keep >= 3 crossings in the box.
pub fn loop_filter(detections: Vec<Detection>, obs: &Observation) -> Vec<Detection> {
    detections
        .into_iter()
        .filter(|d| {
            if d.kind != DetKind::Knot {
                return true;
            }
            let inside = obs
                .truth
                .crossings_px
                .iter()
                .filter(|&&(x, y)| d.bbox.contains(x, y))
                .count();
            inside > 1
        })
        .collect()
}

pub fn detect_knots(obs: &Observation, cfg: &PerceptConfig, rng: &mut ChaCha8Rng) -> Vec<Detection> {
    loop_filter(detect_knots_unfiltered(obs, cfg, rng), obs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::{generate_initial_state, straight_state, KnotRequest};
    use crate::config::SimConfig;
    use crate::observe::render;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn noise_off_emits_truth_exactly() {
        let cfg = SimConfig::default().with_noise_off();
        let st = straight_state(&cfg);
        let obs = render(&st, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let eps = detect_endpoints(&obs, &cfg.percept, &mut rng);
        assert_eq!(eps.len(), 2);
        let knots = detect_knots(&obs, &cfg.percept, &mut rng);
        assert!(knots.is_empty());
    }

    #[test]
    fn endpoint_precision_calibrated() {
        let cfg = SimConfig::default();
        let st = straight_state(&cfg);
        let obs = render(&st, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let (mut tp, mut total) = (0usize, 0usize);
        for _ in 0..2000 {
            let dets = detect_endpoints(&obs, &cfg.percept, &mut rng);
            tp += dets.len().min(2);
            total += dets.len();
        }
        let precision = tp as f64 / total as f64;
        assert!(
            (precision - 0.867).abs() < 0.03,
            "endpoint precision {precision}"
        );
    }

    #[test]
    fn knot_recall_calibrated() {
        let cfg = SimConfig::default();
        let req = KnotRequest::defaults(1, 7);
        let st = generate_initial_state(1, &req, 7, &cfg).unwrap();
        let obs = render(&st, 0);
        let truth_box = obs.truth.knots[0].0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0usize;
        let n = 2000;
        for _ in 0..n {
            let dets = detect_knots(&obs, &cfg.percept, &mut rng);
            if dets.iter().any(|d| d.bbox == truth_box) {
                hits += 1;
            }
        }
        let recall = hits as f64 / n as f64;
        assert!((recall - 0.955).abs() < 0.02, "knot recall {recall}");
    }

    #[test]
    fn loop_filter_drops_simple_loops_keeps_knots() {
        let cfg = SimConfig::default();
        let req = KnotRequest::defaults(1, 7);
        let st = generate_initial_state(1, &req, 7, &cfg).unwrap();
        let obs = render(&st, 0);
        let knot_box = obs.truth.knots[0].0;
        // A fake box over slack (no crossings inside).
        let fake = PixelRect {
            x0: 10,
            y0: 10,
            x1: 70,
            y1: 70,
        };
        let dets = vec![
            Detection {
                kind: DetKind::Knot,
                bbox: knot_box,
                confidence: 1.0,
            },
            Detection {
                kind: DetKind::Knot,
                bbox: fake,
                confidence: 1.0,
            },
        ];
        let kept = loop_filter(dets, &obs);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].bbox, knot_box);
    }
}
