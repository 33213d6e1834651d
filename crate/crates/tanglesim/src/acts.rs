//! The five manipulation primitives, composed from quasistatics operations
//! with topology-level outcome rules: cage-pinch dilation (full and
//! partial), Reidemeister moves (plain and incremental with waypoint
//! verification), and endpoint exposure.

use crate::cable::{CrossingUpdate, KnotSpan, SimState};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::{polyline_length, resample, Point2};
use crate::observe::{render, Observation};
use crate::percept::{detect_knots, GraspProposal};
use crate::quasistatics::{
    advance_clock, lay_out, lay_out_unchecked, relax, slack_spill, LayoutPattern,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    KnotRemoved { u: f64 },
    KnotTightened { u: f64, new_diameter_cm: f64 },
    GraspMissed,
    CableSpilled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveOutcome {
    pub duration_s: f64,
    pub events: Vec<Event>,
}

/// Incremental-Reidemeister termination verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    KnotsRemain,
    NoKnots,
}

/// Nearest centerline node to an image pixel (1 px = 1 mm, shared frame).
fn node_of_px(state: &SimState, px: (i32, i32)) -> usize {
    let p = Point2::new(px.0 as f64, px.1 as f64);
    state
        .centerline
        .nodes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.dist_sq(p).partial_cmp(&b.1.dist_sq(p)).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

/// The knot span a grasp pair is acting on: the span whose node range lies
/// nearest the grasped interval.
fn target_span(state: &SimState, a: usize, b: usize) -> Option<KnotSpan> {
    let mid = (a + b) as f64 / 2.0;
    state
        .knot_spans()
        .into_iter()
        .min_by(|s, t| {
            let dm = |s: &KnotSpan| {
                let (lo, hi) = s.node_range(&state.centerline);
                ((lo + hi) as f64 / 2.0 - mid).abs()
            };
            dm(s).partial_cmp(&dm(t)).unwrap()
        })
}

/// Ground-truth grasp nodes for a span: pinch secures the strand entering
/// the knot (3 nodes outside the near boundary), cage sits 3 nodes past the
/// far boundary. Mirrors the perception-side analytic peaks.
fn gt_pair(state: &SimState, span: &KnotSpan, enter_lo: bool) -> (usize, usize) {
    let n = state.centerline.nodes.len();
    let (lo, hi) = span.node_range(&state.centerline);
    if enter_lo {
        ((hi + 3).min(n - 1), lo.saturating_sub(3)) // (cage, pinch)
    } else {
        (lo.saturating_sub(3), (hi + 3).min(n - 1))
    }
}

fn u_mid(span: &KnotSpan) -> f64 {
    (span.u_interval.0 + span.u_interval.1) / 2.0
}

/// A path from `a` to `b` of the requested arclength: straight if possible,
/// otherwise a multi-lobe bulge toward `normal_sign` whose amplitude is
/// solved for length.
fn meander(a: Point2, b: Point2, length: f64, normal_sign: f64) -> Vec<Point2> {
    let chord = a.dist(b).max(1e-6);
    let samples = 120usize;
    if length <= chord + 0.5 {
        return vec![a, b];
    }
    let (nx, ny) = (
        -(b.y - a.y) / chord * normal_sign,
        (b.x - a.x) / chord * normal_sign,
    );
    let lobes = ((length / chord).round() as usize).clamp(1, 5) as f64;
    let build = |amp: f64| -> Vec<Point2> {
        (0..=samples)
            .map(|k| {
                let t = k as f64 / samples as f64;
                let bulge = amp * (std::f64::consts::PI * lobes * t).sin().abs();
                Point2::new(
                    a.x + (b.x - a.x) * t + nx * bulge,
                    a.y + (b.y - a.y) * t + ny * bulge,
                )
            })
            .collect()
    };
    let (mut lo, mut hi) = (0.0, length);
    for _ in 0..40 {
        let mid = (lo + hi) / 2.0;
        if polyline_length(&build(mid)) < length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    build((lo + hi) / 2.0)
}

/// Which side of the a-b chord has more open space (fewest cable nodes),
/// sampling nodes outside the window.
fn open_side(state: &SimState, a: Point2, b: Point2, lo: usize, hi: usize) -> f64 {
    let chord = a.dist(b).max(1e-6);
    let (nx, ny) = (-(b.y - a.y) / chord, (b.x - a.x) / chord);
    let m = a.midpoint(b);
    let score = |sign: f64| -> f64 {
        let probe = Point2::new(m.x + nx * 60.0 * sign, m.y + ny * 60.0 * sign);
        let mut d = state.workspace.image_rect.edge_distance(probe);
        for (i, p) in state.centerline.nodes.iter().enumerate().step_by(4) {
            if i < lo || i > hi {
                d = d.min(probe.dist(*p));
            }
        }
        d
    };
    if score(1.0) >= score(-1.0) {
        1.0
    } else {
        -1.0
    }
}

/// Replace window nodes lo..=hi with a local path of the same arclength,
/// resampled to the window's node count, then recompute crossings and
/// settle.
fn splice_window(
    state: &mut SimState,
    lo: usize,
    hi: usize,
    local: &[Point2],
    cfg: &SimConfig,
) -> Result<()> {
    let n = state.centerline.nodes.len();
    let new_local = resample(local, hi - lo + 1);
    state.centerline.nodes[lo..=hi].copy_from_slice(&new_local);
    let mut moved = vec![false; n];
    for m in moved[lo..=hi].iter_mut() {
        *m = true;
    }
    state.update_crossings(CrossingUpdate {
        moved: Some(&moved),
    })?;
    relax(state, &[], &cfg.physics);
    Ok(())
}

/// Window around a span that excludes neighboring spans and endpoints.
fn span_window(state: &SimState, span: &KnotSpan, pad: usize) -> (usize, usize) {
    let n = state.centerline.nodes.len();
    let (lo, hi) = span.node_range(&state.centerline);
    let (mut wlo, mut whi) = (lo.saturating_sub(pad).max(1), (hi + pad).min(n - 2));
    for other in state.knot_spans() {
        if other.u_interval == span.u_interval {
            continue;
        }
        let (olo, ohi) = other.node_range(&state.centerline);
        if ohi < lo {
            wlo = wlo.max(ohi + 3);
        }
        if olo > hi {
            whi = whi.min(olo.saturating_sub(3));
        }
    }
    (wlo.min(lo.saturating_sub(1).max(1)), whi.max((hi + 1).min(n - 2)))
}

/// Untie: the span's geometry is replaced by slack of equal arclength.
fn remove_span(state: &mut SimState, span: &KnotSpan, cfg: &SimConfig) -> Result<()> {
    let (wlo, whi) = span_window(state, span, 2);
    let a = state.centerline.nodes[wlo];
    let b = state.centerline.nodes[whi];
    let arclen = (whi - wlo) as f64 * state.centerline.seg_len;
    let side = open_side(state, a, b, wlo, whi);
    let local = meander(a, b, arclen, side);
    splice_window(state, wlo, whi, &local, cfg)
}

/// Scale the span about its centroid (tighten < 1, loosen > 1), feeding the
/// arclength difference to a slack bulge on the exit side of the window.
fn rescale_span(state: &mut SimState, span: &KnotSpan, factor: f64, cfg: &SimConfig) -> Result<()> {
    let (lo, hi) = span.node_range(&state.centerline);
    let (wlo, whi) = span_window(state, span, 12);
    let nodes = &state.centerline.nodes;
    let mut f = factor;
    for _ in 0..10 {
        let cx = nodes[lo..=hi].iter().map(|p| p.x).sum::<f64>() / (hi - lo + 1) as f64;
        let cy = nodes[lo..=hi].iter().map(|p| p.y).sum::<f64>() / (hi - lo + 1) as f64;
        let c = Point2::new(cx, cy);
        let mut local: Vec<Point2> = nodes[wlo..lo].to_vec();
        let scaled: Vec<Point2> = nodes[lo..=hi]
            .iter()
            .map(|p| Point2::new(c.x + f * (p.x - c.x), c.y + f * (p.y - c.y)))
            .collect();
        local.extend_from_slice(&scaled);
        let used = polyline_length(&local);
        let total = (whi - wlo) as f64 * state.centerline.seg_len;
        let tail_len = total - used;
        let exit = *local.last().unwrap();
        let end = nodes[whi];
        if tail_len < exit.dist(end) + 1.0 {
            if factor > 1.0 {
                return Ok(()); // no slack available to loosen into
            }
            f *= 0.95; // tighten a little more until the splice closes
            continue;
        }
        let side = open_side(state, exit, end, wlo, whi);
        let tail = meander(exit, end, tail_len, side);
        local.extend_from_slice(&tail[1..]);
        return splice_window(state, wlo, whi, &local, cfg);
    }
    Ok(())
}

/// Diameter floor for tightening: about two cable wraps.
const MIN_KNOT_DIAMETER_MM: f64 = 15.0;

/// Full cage-pinch dilation: untie on a correct grasp pair, tighten on a
/// wrong one, then lay the cable forward.
pub fn cage_pinch_dilation(
    state: &mut SimState,
    proposal: &GraspProposal,
    _trace_len_px: f64,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PrimitiveOutcome> {
    let duration = cfg.durations.full_dilation_s;
    let cage = node_of_px(state, proposal.cage_px);
    let pinch = node_of_px(state, proposal.pinch_px);
    for &node in &[cage, pinch] {
        if !state
            .workspace
            .reachable_rect
            .contains(state.centerline.nodes[node])
        {
            return Err(SimError::Unreachable(node));
        }
    }
    let mut events = Vec::new();
    if let Some(span) = target_span(state, cage, pinch) {
        let tol_nodes =
            (cfg.acts.grasp_tolerance_mm / state.centerline.seg_len).floor() as usize;
        let over_tight = span.diameter_mm() <= cfg.acts.overtight_diameter_mm;
        let correct = !over_tight
            && [true, false].iter().any(|&enter_lo| {
                let (gc, gp) = gt_pair(state, &span, enter_lo);
                cage.abs_diff(gc) <= tol_nodes && pinch.abs_diff(gp) <= tol_nodes
            });
        if correct {
            remove_span(state, &span, cfg)?;
            events.push(Event::KnotRemoved { u: u_mid(&span) });
        } else {
            // A knot cannot cinch below the cable's own scale; clamping also
            // keeps the diagram resolvable at the 10 mm node spacing.
            let f = cfg
                .acts
                .tighten_factor
                .max(MIN_KNOT_DIAMETER_MM / span.diameter_mm());
            if f < 1.0 {
                rescale_span(state, &span, f, cfg)?;
            }
            let new_diam = state
                .knot_spans()
                .iter()
                .min_by(|a, b| {
                    let d = |s: &&KnotSpan| (u_mid(s) - u_mid(&span)).abs();
                    d(a).partial_cmp(&d(b)).unwrap()
                })
                .map_or(span.diameter_cm * cfg.acts.tighten_factor, |s| s.diameter_cm);
            events.push(Event::KnotTightened {
                u: u_mid(&span),
                new_diameter_cm: new_diam,
            });
        }
    }
    lay_out(state, LayoutPattern::Forward, cfg)?;
    let spilled = spill_and_flag(state, rng, cfg);
    if spilled {
        events.push(Event::CableSpilled);
    }
    advance_clock(state, duration);
    Ok(PrimitiveOutcome {
        duration_s: duration,
        events,
    })
}

/// Partial dilation: a fixed 50 mm perturbation that never changes the
/// crossing set; relieves the knot's occlusion and, on a correct-side pair,
/// loosens the knot slightly.
pub fn partial_cage_pinch_dilation(
    state: &mut SimState,
    proposal: &GraspProposal,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PrimitiveOutcome> {
    let duration = cfg.durations.partial_dilation_s;
    let cage = node_of_px(state, proposal.cage_px);
    let pinch = node_of_px(state, proposal.pinch_px);
    for &node in &[cage, pinch] {
        if !state
            .workspace
            .reachable_rect
            .contains(state.centerline.nodes[node])
        {
            return Err(SimError::Unreachable(node));
        }
    }
    if let Some(span) = target_span(state, cage, pinch) {
        state.apply_relief(u_mid(&span), cfg.acts.disambiguation_factor);
        let (lo, hi) = span.node_range(&state.centerline);
        let straddles = cage.min(pinch) < lo && cage.max(pinch) > hi;
        let snapshot = state.clone();
        let before = state.crossings.len();
        if straddles && span.diameter_mm() > cfg.acts.overtight_diameter_mm {
            let f = (span.diameter_mm() + cfg.acts.partial_diameter_gain_mm)
                / span.diameter_mm();
            rescale_span(state, &span, f, cfg)?;
        } else {
            // Wrong-side pair: the 50 mm separation only shifts slack.
            let sep = cfg.acts.partial_separation_mm;
            let a = state.centerline.nodes[cage];
            let b = state.centerline.nodes[pinch];
            let d = a.dist(b).max(1e-6);
            let (ux, uy) = ((a.x - b.x) / d, (a.y - b.y) / d);
            let n = state.centerline.nodes.len();
            for (i, w) in [(cage, 1.0), (pinch, -1.0)] {
                let lo = i.saturating_sub(3);
                let hi = (i + 3).min(n - 1);
                for j in lo..=hi {
                    let fall = 1.0 - (j.abs_diff(i) as f64) / 4.0;
                    state.centerline.nodes[j] = state.centerline.nodes[j]
                        .add(ux * w * sep / 2.0 * fall, uy * w * sep / 2.0 * fall);
                }
            }
            let moved = vec![true; n];
            state.update_crossings(CrossingUpdate {
                moved: Some(&moved),
            })?;
            relax(state, &[], &cfg.physics);
        }
        // Contract: a partial dilation never changes the crossing set size.
        if state.crossings.len() != before {
            let relief = state.relief.clone();
            *state = snapshot;
            state.relief = relief;
        }
    }
    let _ = spill_and_flag(state, rng, cfg);
    advance_clock(state, duration);
    Ok(PrimitiveOutcome {
        duration_s: duration,
        events: Vec::new(),
    })
}

fn spill_and_flag(state: &mut SimState, rng: &mut ChaCha8Rng, cfg: &SimConfig) -> bool {
    let before: Vec<Point2> = state.centerline.nodes.clone();
    slack_spill(state, rng, &cfg.physics);
    state
        .centerline
        .nodes
        .iter()
        .zip(&before)
        .any(|(a, b)| a.dist(*b) > 1.0)
}

/// Reidemeister move: grasp near both endpoints, lift (shedding reducible
/// crossings outside knot spans), and lay the cable as a wide U.
pub fn reidemeister_move(
    state: &mut SimState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PrimitiveOutcome> {
    let duration = cfg.durations.reidemeister_s;
    let n = state.centerline.nodes.len();
    let offset =
        ((cfg.acts.endpoint_grasp_offset_px / state.centerline.seg_len).round() as usize).min(n / 4);
    let mut events = Vec::new();
    for &node in &[offset, n - 1 - offset] {
        if !state
            .workspace
            .reachable_rect
            .contains(state.centerline.nodes[node])
        {
            return Err(SimError::Unreachable(node));
        }
        if cfg.physics.grasp_miss_prob > 0.0 && rng.gen_bool(cfg.physics.grasp_miss_prob) {
            // The closing jaw nudges the cable sideways instead of holding it.
            events.push(Event::GraspMissed);
            let c = state.workspace.image_rect.center();
            let mean_x: f64 = state.centerline.nodes.iter().map(|p| p.x).sum::<f64>()
                / n as f64;
            let dir = if mean_x >= c.x { 1.0 } else { -1.0 };
            let shove = 120.0 + 120.0 * rng.gen::<f64>();
            for p in state.centerline.nodes.iter_mut() {
                p.x += dir * shove;
            }
            let moved = vec![true; n];
            state.update_crossings(CrossingUpdate {
                moved: Some(&moved),
            })?;
            relax(state, &[], &cfg.physics);
            if spill_and_flag(state, rng, cfg) {
                events.push(Event::CableSpilled);
            }
            advance_clock(state, duration);
            return Ok(PrimitiveOutcome {
                duration_s: duration,
                events,
            });
        }
    }
    lay_out_unchecked(state, LayoutPattern::WideU, cfg)?;
    if spill_and_flag(state, rng, cfg) {
        events.push(Event::CableSpilled);
    }
    advance_clock(state, duration);
    Ok(PrimitiveOutcome {
        duration_s: duration,
        events,
    })
}

/// Incremental Reidemeister: the same motion observed at waypoints; the
/// NoKnots verdict requires every view to report zero knots.
pub fn incremental_reidemeister(
    state: &mut SimState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(PrimitiveOutcome, Verdict, Vec<Observation>)> {
    let duration = cfg.durations.incremental_reidemeister_s;
    let mut inner = reidemeister_move(state, cfg, rng)?;
    // Replace the plain-move clock advance with this primitive's.
    advance_clock(state, duration - inner.duration_s);
    inner.duration_s = duration;
    let views = waypoint_views(state, cfg, rng);
    let verdict = if views
        .iter()
        .all(|(_, knots)| *knots == 0)
    {
        Verdict::NoKnots
    } else {
        Verdict::KnotsRemain
    };
    let obs = views.into_iter().map(|(o, _)| o).collect();
    Ok((inner, verdict, obs))
}

/// Render and run knot detection at each waypoint; each view draws its own
/// detector noise.
pub fn waypoint_views(
    state: &SimState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(Observation, usize)> {
    (0..cfg.acts.waypoint_views.max(1))
        .map(|k| {
            let obs = render(state, k);
            let knots = detect_knots(&obs, &cfg.percept, rng).len();
            (obs, knots)
        })
        .collect()
}

/// Pull a uniformly chosen off-reachable run of cable back toward the
/// workspace center; with the slip probability it slides back out.
pub fn exposure(
    state: &mut SimState,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PrimitiveOutcome> {
    let duration = cfg.durations.exposure_s;
    let reach = state.workspace.reachable_rect;
    let n = state.centerline.nodes.len();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut cur: Option<usize> = None;
    for i in 0..=n {
        let off = i < n && !reach.contains(state.centerline.nodes[i]);
        match (off, cur) {
            (true, None) => cur = Some(i),
            (false, Some(lo)) => {
                runs.push((lo, i - 1));
                cur = None;
            }
            _ => {}
        }
    }
    if runs.is_empty() {
        advance_clock(state, duration);
        return Err(SimError::NoTargets);
    }
    let (lo, hi) = runs[rng.gen_range(0..runs.len())];
    // Boundary node: the run end adjacent to reachable cable, else the tip.
    let bound = if lo > 0 { lo - 1 } else if hi < n - 1 { hi + 1 } else { lo };
    let snapshot = state.clone();
    let center = state.workspace.observable_rect.center();
    let mut handles = [crate::quasistatics::grasp(
        state,
        state.centerline.u_at_node(bound),
        crate::quasistatics::Arm::Right,
        crate::quasistatics::GraspMode::Cage,
    )?];
    crate::quasistatics::pull(state, &mut handles, &[center], cfg)?;
    relax(state, &[], &cfg.physics);
    if cfg.physics.exposure_slip_prob > 0.0 && rng.gen_bool(cfg.physics.exposure_slip_prob) {
        // The hanging mass drags the freed cable back off the edge.
        let clock = state.sim_clock;
        *state = snapshot;
        state.sim_clock = clock;
    }
    let _ = spill_and_flag(state, rng, cfg);
    advance_clock(state, duration);
    Ok(PrimitiveOutcome {
        duration_s: duration,
        events: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::{
        generate_initial_state, Centerline, KnotKind, KnotRequest, Placement, Variant,
    };
    use crate::percept::NetworkStatus;
    use crate::quasistatics::Workspace;
    use rand_chacha::rand_core::SeedableRng;

    fn loose_overhand_state(cfg: &SimConfig) -> SimState {
        let req = vec![KnotRequest {
            kind: KnotKind::Overhand,
            variant: Variant::Loose,
            placement: Placement::NearEnd,
        }];
        generate_initial_state(1, &req, 5, cfg).unwrap()
    }

    fn px_of_node(state: &SimState, node: usize) -> (i32, i32) {
        let p = state.centerline.nodes[node];
        (p.x.round() as i32, p.y.round() as i32)
    }

    fn gt_proposal(state: &SimState) -> GraspProposal {
        let span = &state.knot_spans()[0];
        let (cage, pinch) = gt_pair(state, span, true);
        GraspProposal {
            cage_px: px_of_node(state, cage),
            pinch_px: px_of_node(state, pinch),
            confidence: 1.0,
            status: NetworkStatus::Certain,
        }
    }

    #[test]
    fn correct_grasp_unties_loose_overhand() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = loose_overhand_state(&cfg);
        assert_eq!(st.crossings.len(), 3);
        let prop = gt_proposal(&st);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = cage_pinch_dilation(&mut st, &prop, 500.0, &cfg, &mut rng).unwrap();
        assert!(matches!(out.events[0], Event::KnotRemoved { .. }));
        assert!(st.knot_spans().is_empty(), "spans {:?}", st.knot_spans());
        assert_eq!(out.duration_s, cfg.durations.full_dilation_s);
        assert_eq!(st.sim_clock, cfg.durations.full_dilation_s);
    }

    #[test]
    fn wrong_grasp_tightens_by_the_factor() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = loose_overhand_state(&cfg);
        let span = st.knot_spans()[0].clone();
        let d0 = span.diameter_mm();
        // Both points well inside the knot: clearly not the gt pair.
        let (lo, hi) = span.node_range(&st.centerline);
        let prop = GraspProposal {
            cage_px: px_of_node(&st, lo + (hi - lo) / 3),
            pinch_px: px_of_node(&st, lo + 2 * (hi - lo) / 3),
            confidence: 1.0,
            status: NetworkStatus::Certain,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = cage_pinch_dilation(&mut st, &prop, 500.0, &cfg, &mut rng).unwrap();
        let Some(Event::KnotTightened {
            new_diameter_cm, ..
        }) = out
            .events
            .iter()
            .find(|e| matches!(e, Event::KnotTightened { .. }))
        else {
            panic!("no tighten event: {:?}", out.events);
        };
        let want = d0 * cfg.acts.tighten_factor;
        assert!(
            (new_diameter_cm * 10.0 - want).abs() / want < 0.25,
            "tightened to {} want ~{}",
            new_diameter_cm * 10.0,
            want
        );
        assert_eq!(st.knot_spans().len(), 1);
    }

    #[test]
    fn overtight_latch_blocks_removal() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = loose_overhand_state(&cfg);
        // Tighten in the same steps the wrong-grasp outcome applies.
        for _ in 0..12 {
            let span = st.knot_spans()[0].clone();
            if span.diameter_mm() <= cfg.acts.overtight_diameter_mm {
                break;
            }
            rescale_span(&mut st, &span, cfg.acts.tighten_factor, &cfg).unwrap();
        }
        let span = st.knot_spans()[0].clone();
        assert!(span.diameter_mm() <= cfg.acts.overtight_diameter_mm);
        let prop = gt_proposal(&st);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = cage_pinch_dilation(&mut st, &prop, 500.0, &cfg, &mut rng).unwrap();
        assert!(
            out.events
                .iter()
                .all(|e| !matches!(e, Event::KnotRemoved { .. })),
            "latched knot removed: {:?}",
            out.events
        );
        assert!(!st.knot_spans().is_empty());
    }

    #[test]
    fn partial_keeps_crossings_and_relieves() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = loose_overhand_state(&cfg);
        let span = st.knot_spans()[0].clone();
        let before = st.crossings.len();
        let prop = gt_proposal(&st);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = partial_cage_pinch_dilation(&mut st, &prop, &cfg, &mut rng).unwrap();
        assert!(out.events.is_empty());
        assert_eq!(st.crossings.len(), before);
        assert_eq!(st.relief_factor(u_mid(&span)), cfg.acts.disambiguation_factor);
        let after = st.knot_spans()[0].clone();
        assert!(
            after.diameter_mm() >= span.diameter_mm() - 1.0,
            "partial shrank the knot: {} -> {}",
            span.diameter_mm(),
            after.diameter_mm()
        );
    }

    #[test]
    fn reidemeister_sheds_free_loop() {
        // A cable with one simple loop and no knot.
        let cfg = SimConfig::default().with_noise_off();
        let pts = [
            Point2::new(200.0, 450.0),
            Point2::new(600.0, 450.0),
            Point2::new(700.0, 350.0),
            Point2::new(550.0, 300.0),
            Point2::new(500.0, 520.0),
            Point2::new(900.0, 560.0),
        ];
        let len = polyline_length(&pts);
        let n = (len / 10.0).round() as usize + 1;
        let mut st = SimState::new(
            Centerline::new(resample(&pts, n), 10.0, 3.0),
            Workspace::from_config(&cfg.workspace),
        )
        .unwrap();
        assert!(!st.crossings.is_empty());
        assert!(st.knot_spans().is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        reidemeister_move(&mut st, &cfg, &mut rng).unwrap();
        assert!(st.crossings.is_empty(), "{} crossings left", st.crossings.len());
        let ends = (st.centerline.nodes[0], *st.centerline.nodes.last().unwrap());
        assert!((ends.0.x - ends.1.x).abs() >= 800.0 * (st.centerline.total_length() / 2700.0).min(1.0));
    }

    #[test]
    fn reidemeister_protects_knot_span() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = loose_overhand_state(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        reidemeister_move(&mut st, &cfg, &mut rng).unwrap();
        assert_eq!(st.knot_spans().len(), 1);
        assert_eq!(st.crossings.len(), 3);
        let ends = (st.centerline.nodes[0], *st.centerline.nodes.last().unwrap());
        assert!((ends.0.x - ends.1.x).abs() >= 800.0, "sep {}", (ends.0.x - ends.1.x).abs());
    }

    #[test]
    fn incremental_verdicts() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = crate::cable::straight_state(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (out, verdict, views) = incremental_reidemeister(&mut st, &cfg, &mut rng).unwrap();
        assert_eq!(verdict, Verdict::NoKnots);
        assert_eq!(views.len(), cfg.acts.waypoint_views);
        assert_eq!(out.duration_s, cfg.durations.incremental_reidemeister_s);

        let mut st = loose_overhand_state(&cfg);
        let (_, verdict, _) = incremental_reidemeister(&mut st, &cfg, &mut rng).unwrap();
        assert_eq!(verdict, Verdict::KnotsRemain);
    }

    #[test]
    fn exposure_recovers_offworkspace_run() {
        let cfg = SimConfig::default().with_noise_off();
        let mut st = crate::cable::straight_state(&cfg);
        // Rigid shift left: the serpentine's left extents end up off-reachable.
        for p in st.centerline.nodes.iter_mut() {
            p.x -= 220.0;
        }
        let moved = vec![true; st.centerline.nodes.len()];
        st.update_crossings(CrossingUpdate { moved: Some(&moved) }).unwrap();
        relax(&mut st, &[], &cfg.physics);
        let off = |st: &SimState| {
            st.centerline
                .nodes
                .iter()
                .filter(|p| !st.workspace.reachable_rect.contains(**p))
                .count()
        };
        assert!(off(&st) > 0, "setup failed to push cable off-reachable");
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            if off(&st) == 0 {
                break;
            }
            exposure(&mut st, &cfg, &mut rng).unwrap();
        }
        assert_eq!(off(&st), 0, "cable still off-reachable");
        let clock = st.sim_clock;
        let err = exposure(&mut st, &cfg, &mut rng).unwrap_err();
        assert!(matches!(err, SimError::NoTargets));
        assert_eq!(st.sim_clock, clock + cfg.durations.exposure_s);
    }

}
