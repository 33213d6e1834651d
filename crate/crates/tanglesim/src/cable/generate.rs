//! Tiered initial-state generation: knots of requested kind, diameter class,
//! and placement are routed onto a serpentine layout, then the endpoints get
//! a seeded drop perturbation.

use super::template::{knot_template, KnotKind, KnotTemplate};
use super::{Centerline, CrossingUpdate, OverStrand, SimState};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::{polyline_length, resample, Point2};
use crate::quasistatics::Workspace;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Dense,
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    NearEnd,
    Mid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotRequest {
    pub kind: KnotKind,
    pub variant: Variant,
    pub placement: Placement,
}

impl KnotRequest {
    /// Default request mix for a tier cell, balanced across kinds, variants,
    /// and positions by seed. Loose variants are downgraded to dense from
    /// the back until the worst-case cable budget fits: routing a knot
    /// costs several times its diameter in arclength.
    pub fn defaults(tier: u8, seed: u64) -> Vec<KnotRequest> {
        let mut reqs: Vec<KnotRequest> = (0..tier as u64)
            .map(|i| KnotRequest {
                kind: if (seed + i) % 2 == 0 {
                    KnotKind::Overhand
                } else {
                    KnotKind::Figure8
                },
                variant: if ((seed >> 1) + i) % 2 == 0 {
                    Variant::Dense
                } else {
                    Variant::Loose
                },
                placement: if i == 0 { Placement::NearEnd } else { Placement::Mid },
            })
            .collect();
        let worst_cost = |r: &KnotRequest| {
            let diam = match r.variant {
                Variant::Dense => 78.0,
                Variant::Loose => 138.0,
            };
            knot_template(r.kind, diam).arclength()
        };
        let budget = 2700.0 - END_MARGIN_MM * 2.0 - KNOT_GAP_MM * (tier as f64 - 1.0) - 100.0;
        for i in (0..reqs.len()).rev() {
            if reqs.iter().map(worst_cost).sum::<f64>() <= budget {
                break;
            }
            reqs[i].variant = Variant::Dense;
        }
        reqs
    }
}

const END_MARGIN_MM: f64 = 150.0;
const KNOT_GAP_MM: f64 = 150.0;
const ROW_GAP_MM: f64 = 110.0;
const ROW_INSET_MM: f64 = 60.0;
const TURN_RADIUS_MM: f64 = 40.0;
const EMIT_STEP_MM: f64 = 20.0;

struct Router {
    path: Vec<Point2>,
    emitted: f64,
    x_lo: f64,
    x_hi: f64,
    row_y: f64,
    min_row_y: f64,
    dir: f64,
    cursor_x: f64,
    row_max_drop: f64,
}

impl Router {
    fn new(ws: &Workspace) -> Router {
        let obs = ws.observable_rect;
        let x_lo = obs.min_x + ROW_INSET_MM;
        let x_hi = obs.max_x - ROW_INSET_MM;
        let row_y = obs.max_y - 80.0;
        Router {
            path: vec![Point2::new(x_lo, row_y)],
            emitted: 0.0,
            x_lo,
            x_hi,
            row_y,
            min_row_y: obs.min_y + 30.0,
            dir: 1.0,
            cursor_x: x_lo,
            row_max_drop: 0.0,
        }
    }

    fn push(&mut self, p: Point2) {
        let last = *self.path.last().unwrap();
        self.emitted += last.dist(p);
        self.path.push(p);
    }

    fn room_ahead(&self) -> f64 {
        if self.dir > 0.0 {
            self.x_hi - self.cursor_x
        } else {
            self.cursor_x - self.x_lo
        }
    }

    /// Two quarter-arcs joined by a vertical run down to the next row.
    fn turn(&mut self) -> Result<()> {
        let gap = ROW_GAP_MM + self.row_max_drop;
        let next_y = self.row_y - gap;
        if next_y < self.min_row_y {
            return Err(SimError::PlacementInfeasible(
                "serpentine rows exhausted the workspace depth".into(),
            ));
        }
        let r = TURN_RADIUS_MM.min(gap / 2.0);
        let cx = self.cursor_x;
        let segs = 5;
        // Upper quarter: heading dir -> heading down.
        for i in 1..=segs {
            let a = std::f64::consts::FRAC_PI_2 * i as f64 / segs as f64;
            self.push(Point2::new(
                cx + self.dir * r * a.sin(),
                self.row_y - r * (1.0 - a.cos()),
            ));
        }
        // Vertical run.
        self.push(Point2::new(cx + self.dir * r, next_y + r));
        // Lower quarter: heading down -> heading -dir.
        for i in 1..=segs {
            let a = std::f64::consts::FRAC_PI_2 * i as f64 / segs as f64;
            self.push(Point2::new(
                cx + self.dir * r * a.cos(),
                next_y + r * (1.0 - a.sin()),
            ));
        }
        self.row_y = next_y;
        self.dir = -self.dir;
        self.row_max_drop = 0.0;
        Ok(())
    }

    /// Emit free cable until `target` total arclength has been laid.
    fn emit_until(&mut self, target: f64) -> Result<()> {
        while self.emitted < target - 1e-9 {
            let need = target - self.emitted;
            let room = self.room_ahead();
            if room < EMIT_STEP_MM {
                self.turn()?;
                continue;
            }
            let step = need.min(EMIT_STEP_MM).min(room);
            self.cursor_x += self.dir * step;
            self.push(Point2::new(self.cursor_x, self.row_y));
        }
        Ok(())
    }

    /// Place a knot template at the cursor (wrapping rows first if the
    /// remaining row width cannot hold it).
    fn place(&mut self, t: &KnotTemplate) -> Result<Vec<(Point2, bool)>> {
        while self.room_ahead() < t.exit_x() + 60.0 {
            self.turn()?;
        }
        let ox = self.cursor_x;
        let oy = self.row_y;
        let dir = self.dir;
        for p in t.path.iter().skip(1) {
            self.push(Point2::new(ox + dir * p.x, oy + p.y));
        }
        self.cursor_x = ox + dir * t.exit_x();
        self.row_max_drop = self.row_max_drop.max(t.drop());
        Ok(t
            .crossings
            .iter()
            .map(|c| (Point2::new(ox + dir * c.point.x, oy + c.point.y), c.first_over))
            .collect())
    }
}

/// Smooth seeded lateral jitter over the first/last stretch of the path,
/// emulating raising and dropping the endpoints.
fn jitter_ends(
    path: &mut [Point2],
    head_limit_mm: f64,
    tail_limit_mm: f64,
    amp: f64,
    rng: &mut ChaCha8Rng,
) {
    let total = polyline_length(path);
    let phase_a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let phase_b: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let wavelength = 90.0;
    let mut arclen = 0.0;
    let n = path.len();
    for i in 0..n {
        if i > 0 {
            arclen += path[i].dist(path[i - 1]);
        }
        let (w, phase) = if arclen < head_limit_mm {
            ((1.0 - arclen / head_limit_mm).max(0.0), phase_a)
        } else if total - arclen < tail_limit_mm {
            ((1.0 - (total - arclen) / tail_limit_mm).max(0.0), phase_b)
        } else {
            continue;
        };
        // Perpendicular to the local direction.
        let (j, k) = if i + 1 < n { (i, i + 1) } else { (i - 1, i) };
        let dx = path[k].x - path[j].x;
        let dy = path[k].y - path[j].y;
        let len = (dx * dx + dy * dy).sqrt().max(1e-9);
        let d = amp * w * (arclen / wavelength + phase).sin();
        path[i] = Point2::new(path[i].x - dy / len * d, path[i].y + dx / len * d);
    }
}

/// Generate a tiered initial state: exactly `requests.len()` knots of the
/// requested kinds, diameter classes, and placements, deterministic per seed.
pub fn generate_initial_state(
    tier: u8,
    requests: &[KnotRequest],
    seed: u64,
    cfg: &SimConfig,
) -> Result<SimState> {
    if !(1..=3).contains(&tier) {
        return Err(SimError::ConfigInvalid(format!("tier {tier} not in 1..=3")));
    }
    if requests.len() != tier as usize {
        return Err(SimError::ConfigInvalid(format!(
            "tier {tier} requires {tier} knot requests, got {}",
            requests.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x7a6e676c65);
    for attempt in 0..4u32 {
        match try_generate(tier, requests, cfg, &mut rng, attempt) {
            Ok(state) => return Ok(state),
            Err(SimError::PlacementInfeasible(m)) if attempt < 3 => {
                let _ = m;
            }
            Err(e) => return Err(e),
        }
    }
    Err(SimError::PlacementInfeasible(
        "could not route the requested knots after retries".into(),
    ))
}

fn try_generate(
    _tier: u8,
    requests: &[KnotRequest],
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
    attempt: u32,
) -> Result<SimState> {
    let ws = Workspace::from_config(&cfg.workspace);
    let total = cfg.cable.length_mm;

    let templates: Vec<KnotTemplate> = requests
        .iter()
        .map(|r| {
            let diam = match r.variant {
                Variant::Dense => rng.gen_range(62.0..78.0),
                Variant::Loose => rng.gen_range(122.0..138.0),
            };
            knot_template(r.kind, diam)
        })
        .collect();
    let knot_len: f64 = templates.iter().map(|t| t.arclength()).sum();
    let overhead = END_MARGIN_MM * 2.0 + KNOT_GAP_MM * requests.len().saturating_sub(1) as f64;
    if knot_len + overhead > total {
        return Err(SimError::PlacementInfeasible(format!(
            "knots need {knot_len:.0} mm of cable plus {overhead:.0} mm margins on a {total:.0} mm cable"
        )));
    }

    // Arclength offsets where each knot starts, packed left to right.
    let mut starts = Vec::with_capacity(requests.len());
    let mut prev_end = END_MARGIN_MM;
    for (r, t) in requests.iter().zip(&templates) {
        let target_mid = match r.placement {
            Placement::NearEnd => 0.16 * total,
            Placement::Mid => 0.5 * total,
        };
        let start = (target_mid - t.arclength() / 2.0).max(prev_end);
        if start + t.arclength() > total - END_MARGIN_MM {
            return Err(SimError::PlacementInfeasible(
                "knot placement exceeds the cable end margin".into(),
            ));
        }
        starts.push(start);
        prev_end = start + t.arclength() + KNOT_GAP_MM;
    }

    let mut router = Router::new(&ws);
    let mut template_crossings: Vec<(Point2, bool)> = Vec::new();
    for (t, &start) in templates.iter().zip(&starts) {
        router.emit_until(start)?;
        template_crossings.extend(router.place(t)?);
    }
    router.emit_until(total)?;
    let mut path = router.path;

    let head_room = starts
        .first()
        .map_or(250.0, |s| (s - 60.0).clamp(0.0, 250.0));
    let last_end = starts
        .last()
        .map(|s| s + templates.last().unwrap().arclength())
        .unwrap_or(0.0);
    let tail_room = (total - last_end - 60.0).clamp(0.0, 250.0);
    let amp = 22.0 / (attempt + 1) as f64;
    jitter_ends(&mut path, head_room, tail_room, amp, rng);

    let n = cfg.node_count();
    let nodes = resample(&path, n);
    let mut state = SimState::new(
        Centerline::new(nodes, cfg.cable.seg_len_mm, cfg.cable.radius_mm),
        ws,
    )?;

    let expected: usize = templates.iter().map(|t| t.crossings.len()).sum();
    if state.crossings.len() != expected {
        return Err(SimError::PlacementInfeasible(format!(
            "routing produced {} crossings, expected {expected}",
            state.crossings.len()
        )));
    }
    for c in state.crossings.iter_mut() {
        let (tc, d) = template_crossings
            .iter()
            .map(|&(p, over)| ((p, over), p.dist(c.point)))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .ok_or_else(|| SimError::PlacementInfeasible("no template crossings".into()))?;
        if d > 25.0 {
            return Err(SimError::PlacementInfeasible(
                "crossing drifted away from its template position".into(),
            ));
        }
        // u_a < u_b, so strand A is the first passage.
        c.over = if tc.1 { OverStrand::A } else { OverStrand::B };
    }
    state.update_crossings(CrossingUpdate::default())?;

    // Settle: resampling leaves chords slightly short of seg_len in tight
    // curvature; relaxation restores the segment-length invariant without
    // touching the diagram.
    crate::quasistatics::relax(&mut state, &[], &cfg.physics);

    // Construction check: the requested spans must come out exactly.
    let spans = state.knot_spans();
    if spans.len() != requests.len()
        || spans
            .iter()
            .zip(requests)
            .any(|(s, r)| s.kind != span_kind(r.kind))
    {
        return Err(SimError::PlacementInfeasible(
            "classification does not match the requested knots".into(),
        ));
    }
    Ok(state)
}

fn span_kind(k: KnotKind) -> super::SpanKind {
    match k {
        KnotKind::Overhand => super::SpanKind::Overhand,
        KnotKind::Figure8 => super::SpanKind::Figure8,
    }
}

/// A workspace-fitting serpentine path of the given length (no knots).
pub(crate) fn serpentine_path(ws: &Workspace, total_mm: f64) -> Vec<Point2> {
    let mut router = Router::new(ws);
    router
        .emit_until(total_mm)
        .expect("plain serpentine always fits");
    router.path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::SpanKind;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn tier1_loose_overhand_diameter_in_range() {
        let req = [KnotRequest {
            kind: KnotKind::Overhand,
            variant: Variant::Loose,
            placement: Placement::NearEnd,
        }];
        let st = generate_initial_state(1, &req, 7, &cfg()).unwrap();
        let spans = st.knot_spans();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].kind, SpanKind::Overhand);
        assert!(
            (12.0..=14.0).contains(&spans[0].diameter_cm),
            "diameter {} cm",
            spans[0].diameter_cm
        );
    }

    #[test]
    fn tier3_yields_three_spans() {
        let req = KnotRequest::defaults(3, 11);
        let st = generate_initial_state(3, &req, 11, &cfg()).unwrap();
        assert_eq!(st.knot_spans().len(), 3);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let req = KnotRequest::defaults(2, 42);
        let a = generate_initial_state(2, &req, 5, &cfg()).unwrap();
        let b = generate_initial_state(2, &req, 5, &cfg()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn invalid_tier_is_rejected() {
        let err = generate_initial_state(4, &[], 0, &cfg()).unwrap_err();
        assert!(matches!(err, SimError::ConfigInvalid(_)));
    }

    #[test]
    fn segment_lengths_hold() {
        let req = KnotRequest::defaults(2, 3);
        let st = generate_initial_state(2, &req, 3, &cfg()).unwrap();
        for w in st.centerline.nodes.windows(2) {
            let d = w[0].dist(w[1]);
            assert!((d - 10.0).abs() < 0.1 + 10.0 * 0.01, "segment {d}");
        }
        assert!((st.centerline.total_length() - 2700.0).abs() < 27.0);
    }
}
