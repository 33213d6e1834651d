//! Multi-hypothesis cable tracing over the mask: beam search that branches
//! at ambiguous continuations and reports divergence-box uncertainty.

use super::TraceStatus;
use crate::config::PerceptConfig;
use crate::observe::{Observation, PixelRect};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub enum TraceStop {
    /// Finish a spline when it enters any of these (detected knot) boxes.
    KnotBoxes(Vec<PixelRect>),
    /// Finish after this much arclength (endpoint mode).
    FixedDistance(f64),
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    /// Splines that reached the stop condition.
    pub splines: Vec<Vec<(i32, i32)>>,
    /// Bounding box over the final points of all finished splines.
    pub terminal_bbox: Option<PixelRect>,
    pub status: TraceStatus,
    /// Arclength of the representative spline, px.
    pub trace_len_px: f64,
    /// Index of the best-scoring finished spline.
    pub representative: usize,
    /// All hypotheses exhausted the mask before the stop condition.
    pub dead_end: bool,
}

#[derive(Clone)]
struct Beam {
    pts: Vec<(i32, i32)>,
    dir: (f64, f64),
    turn_sum: f64,
    len: f64,
}

/// Divergence status: uncertain iff the tip spread exceeds the threshold.
pub fn divergence_status(tips: &[(i32, i32)], threshold_px: f64) -> (Option<PixelRect>, TraceStatus) {
    let Some(bbox) = PixelRect::from_points(tips.iter().copied()) else {
        return (None, TraceStatus::Uncertain);
    };
    let spread = (bbox.x1 - bbox.x0).max(bbox.y1 - bbox.y0) as f64;
    let status = if spread > threshold_px {
        TraceStatus::Uncertain
    } else {
        TraceStatus::Certain
    };
    (Some(bbox), status)
}

fn ring_offsets(step: f64) -> Vec<(i32, i32)> {
    let r = step.ceil() as i32 + 2;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            if (d - step).abs() <= 1.2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Centroid of mask pixels in the 7x7 window around `p`, iterated to a
/// fixpoint: snaps ring hits to the local stripe centerline so parallel
/// hypotheses on the same strand collapse to one candidate.
fn snap(obs: &Observation, mut p: (i32, i32)) -> (i32, i32) {
    for _ in 0..3 {
        let (mut sx, mut sy, mut n) = (0i64, 0i64, 0i64);
        for dy in -3..=3 {
            for dx in -3..=3 {
                if obs.mask_at(p.0 + dx, p.1 + dy) {
                    sx += (p.0 + dx) as i64;
                    sy += (p.1 + dy) as i64;
                    n += 1;
                }
            }
        }
        if n == 0 {
            return p;
        }
        let q = (
            (sx as f64 / n as f64).round() as i32,
            (sy as f64 / n as f64).round() as i32,
        );
        if q == p {
            return p;
        }
        p = q;
    }
    p
}

/// Candidate successor points: mask pixels on the step-radius ring, snapped
/// to the stripe centerline and deduped.
fn ring_candidates(
    obs: &Observation,
    (x, y): (i32, i32),
    offsets: &[(i32, i32)],
) -> Vec<((i32, i32), (f64, f64))> {
    let mut seen = std::collections::HashSet::new();
    let mut cands: Vec<((i32, i32), f64, f64)> = Vec::new(); // (point, angle, dist)
    for &(dx, dy) in offsets {
        if !obs.mask_at(x + dx, y + dy) {
            continue;
        }
        let p = snap(obs, (x + dx, y + dy));
        if !seen.insert(p) {
            continue;
        }
        let (vx, vy) = ((p.0 - x) as f64, (p.1 - y) as f64);
        let len = vx.hypot(vy);
        if len < 5.0 {
            continue; // snapped back onto the tip
        }
        cands.push((p, vy.atan2(vx), len));
    }
    if cands.is_empty() {
        return Vec::new();
    }
    // Cluster by angle (snapped points on one strand differ only by ring
    // phase). Adjacent strands can form one contiguous arc, so clusters
    // wider than one strand footprint are split recursively at their
    // largest internal gap; one representative per cluster, at the
    // cleanest step distance.
    cands.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let n = cands.len();
    let gap = 15f64.to_radians();
    let max_extent = 35f64.to_radians();
    // Rotate so the largest circular gap is the seam, then unwrap angles.
    let mut seam = 0;
    let mut widest = -1.0;
    for i in 0..n {
        let a = cands[i].1;
        let b = cands[(i + 1) % n].1 + if i + 1 == n { std::f64::consts::TAU } else { 0.0 };
        if b - a > widest {
            widest = b - a;
            seam = (i + 1) % n;
        }
    }
    let mut seq: Vec<(f64, usize)> = Vec::with_capacity(n); // (unwrapped angle, cand idx)
    for k in 0..n {
        let i = (seam + k) % n;
        let mut a = cands[i].1;
        if let Some(&(prev, _)) = seq.last() {
            while a < prev {
                a += std::f64::consts::TAU;
            }
        }
        seq.push((a, i));
    }
    let mut out = Vec::new();
    let mut stack: Vec<(usize, usize)> = vec![(0, n)]; // half-open ranges of seq
    while let Some((lo, hi)) = stack.pop() {
        if lo >= hi {
            continue;
        }
        // Split at gaps above the threshold, or the largest gap while the
        // cluster is wider than a single strand footprint.
        let mut cut = None;
        let mut best_gap = gap;
        for i in lo..hi - 1 {
            let g = seq[i + 1].0 - seq[i].0;
            if g > best_gap {
                best_gap = g;
                cut = Some(i + 1);
            }
        }
        if cut.is_none() && seq[hi - 1].0 - seq[lo].0 > max_extent {
            let mut bg = -1.0;
            for i in lo..hi - 1 {
                let g = seq[i + 1].0 - seq[i].0;
                if g > bg {
                    bg = g;
                    cut = Some(i + 1);
                }
            }
        }
        if let Some(c) = cut {
            stack.push((lo, c));
            stack.push((c, hi));
            continue;
        }
        let step = (offsets[0].0 as f64).hypot(offsets[0].1 as f64);
        let best = (lo..hi)
            .min_by(|&a, &b| {
                let da = (cands[seq[a].1].2 - step).abs();
                let db = (cands[seq[b].1].2 - step).abs();
                da.partial_cmp(&db).unwrap()
            })
            .unwrap();
        let (p, ang, _) = cands[seq[best].1];
        out.push((p, (ang.cos(), ang.sin())));
    }
    out
}

/// Beam-search trace over the observation mask from `start_px`.
pub fn trace(
    obs: &Observation,
    start_px: (i32, i32),
    stop: &TraceStop,
    cfg: &PerceptConfig,
) -> TraceResult {
    let offsets = ring_offsets(cfg.trace_step_px);
    let max_turn = cfg.trace_max_turn_deg.to_radians();
    let margin = cfg.trace_branch_margin_deg.to_radians();
    let max_steps = 600usize;

    let mut active: Vec<Beam> = ring_candidates(obs, start_px, &offsets)
        .into_iter()
        .map(|(p, dir)| Beam {
            pts: vec![start_px, p],
            dir,
            turn_sum: 0.0,
            len: ((p.0 - start_px.0) as f64).hypot((p.1 - start_px.1) as f64),
        })
        .collect();
    let mut finished: Vec<Beam> = Vec::new();

    // A beam starting inside a stop box finishes immediately.
    let check_stop = |b: &Beam| -> bool {
        match stop {
            TraceStop::KnotBoxes(boxes) => {
                let &(x, y) = b.pts.last().unwrap();
                boxes.iter().any(|bx| bx.contains(x, y))
            }
            TraceStop::FixedDistance(d) => b.len >= *d,
        }
    };
    active.retain(|b| {
        if check_stop(b) {
            finished.push(b.clone());
            false
        } else {
            true
        }
    });

    for _ in 0..max_steps {
        if active.is_empty() {
            break;
        }
        let mut next: Vec<Beam> = Vec::new();
        for b in &active {
            let tip = *b.pts.last().unwrap();
            let cands = ring_candidates(obs, tip, &offsets);
            let mut scored: Vec<((i32, i32), (f64, f64), f64)> = cands
                .into_iter()
                .filter_map(|(p, dir)| {
                    let turn = crate::geom::angle_between(b.dir.0, b.dir.1, dir.0, dir.1).abs();
                    (turn <= max_turn).then_some((p, dir, turn))
                })
                .collect();
            if scored.is_empty() {
                continue; // dead end
            }
            scored.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap());
            let best = scored[0].2;
            for (p, dir, turn) in scored {
                if turn > best + margin {
                    break;
                }
                let mut nb = b.clone();
                nb.pts.push(p);
                nb.dir = dir;
                nb.turn_sum += turn;
                nb.len += ((p.0 - tip.0) as f64).hypot((p.1 - tip.1) as f64);
                if check_stop(&nb) {
                    finished.push(nb);
                } else {
                    next.push(nb);
                }
            }
        }
        // Dedupe hypotheses whose last three points coincide.
        let mut dedup: HashMap<[(i32, i32); 3], Beam> = HashMap::new();
        for b in next {
            let m = b.pts.len();
            let key = [
                quant(b.pts[m - 1]),
                quant(b.pts[m.saturating_sub(2)]),
                quant(b.pts[m.saturating_sub(3)]),
            ];
            match dedup.get(&key) {
                Some(old) if old.turn_sum <= b.turn_sum => {}
                _ => {
                    dedup.insert(key, b);
                }
            }
        }
        active = dedup.into_values().collect();
        active.sort_by(|a, b| a.turn_sum.partial_cmp(&b.turn_sum).unwrap());
        active.truncate(cfg.trace_beam_cap);
    }

    let dead_end = finished.is_empty();
    let threshold = match stop {
        TraceStop::KnotBoxes(_) => cfg.knot_trace_thresh_px,
        TraceStop::FixedDistance(_) => cfg.endpoint_trace_thresh_px,
    };
    let tips: Vec<(i32, i32)> = finished.iter().map(|b| *b.pts.last().unwrap()).collect();
    let (terminal_bbox, status) = if dead_end {
        (None, TraceStatus::Uncertain)
    } else {
        divergence_status(&tips, threshold)
    };
    let representative = finished
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.turn_sum.partial_cmp(&b.1.turn_sum).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let trace_len_px = finished.get(representative).map_or(0.0, |b| b.len);
    TraceResult {
        splines: finished.into_iter().map(|b| b.pts).collect(),
        terminal_bbox,
        status,
        trace_len_px,
        representative,
        dead_end,
    }
}

fn quant(p: (i32, i32)) -> (i32, i32) {
    (p.0 / 3, p.1 / 3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::{Centerline, SimState};
    use crate::config::SimConfig;
    use crate::geom::Point2;
    use crate::observe::render;
    use crate::quasistatics::Workspace;

    fn obs_from_sketch(pts: &[Point2]) -> Observation {
        let len = crate::geom::polyline_length(pts);
        let n = ((len / 10.0).round() as usize + 1).max(2);
        let nodes = crate::geom::resample(pts, n);
        let st = SimState::new(
            Centerline::new(nodes, 10.0, 3.0),
            Workspace::from_config(&SimConfig::default().workspace),
        )
        .unwrap();
        render(&st, 0)
    }

    #[test]
    fn straight_stripe_single_certain_spline() {
        let obs = obs_from_sketch(&[Point2::new(300.0, 450.0), Point2::new(900.0, 450.0)]);
        let cfg = SimConfig::default().percept;
        let r = trace(&obs, (300, 450), &TraceStop::FixedDistance(300.0), &cfg);
        assert!(!r.dead_end);
        assert_eq!(r.splines.len(), 1);
        assert_eq!(r.status, TraceStatus::Certain);
        assert!((r.trace_len_px - 300.0).abs() <= cfg.trace_step_px);
    }

    #[test]
    fn shallow_crossing_branches_and_diverges() {
        // Self-crossing X at ~30 degrees; exits end ~40 px apart.
        let obs = obs_from_sketch(&[
            Point2::new(480.0, 472.0),
            Point2::new(720.0, 408.0),
            Point2::new(790.0, 340.0),
            Point2::new(600.0, 280.0),
            Point2::new(410.0, 340.0),
            Point2::new(480.0, 408.0),
            Point2::new(720.0, 472.0),
        ]);
        let cfg = SimConfig::default().percept;
        let r = trace(&obs, (480, 472), &TraceStop::FixedDistance(200.0), &cfg);
        assert!(r.splines.len() >= 2, "splines {}", r.splines.len());
        assert_eq!(r.status, TraceStatus::Uncertain);
    }

    #[test]
    fn status_flips_exactly_at_thresholds() {
        for spread in 20..=28 {
            let tips = vec![(100, 100), (100 + spread, 100)];
            let (_, s24) = divergence_status(&tips, 24.0);
            assert_eq!(
                s24,
                if spread > 24 {
                    TraceStatus::Uncertain
                } else {
                    TraceStatus::Certain
                }
            );
        }
        for spread in 8..=16 {
            let tips = vec![(100, 100), (100, 100 + spread)];
            let (_, s12) = divergence_status(&tips, 12.0);
            assert_eq!(
                s12,
                if spread > 12 {
                    TraceStatus::Uncertain
                } else {
                    TraceStatus::Certain
                }
            );
        }
    }

    #[test]
    fn off_mask_start_is_dead_end() {
        let obs = obs_from_sketch(&[Point2::new(300.0, 450.0), Point2::new(900.0, 450.0)]);
        let cfg = SimConfig::default().percept;
        let r = trace(&obs, (100, 100), &TraceStop::FixedDistance(100.0), &cfg);
        assert!(r.dead_end);
        assert_eq!(r.status, TraceStatus::Uncertain);
    }
}
