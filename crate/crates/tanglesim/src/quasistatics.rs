//! Quasi-static manipulation physics: grasping, pulling with cage (sliding)
//! vs pinch (fixed) semantics, constraint relaxation, layout patterns, and
//! off-workspace slack spill.

use crate::cable::{CrossingUpdate, GaussEntry, SimState};
use crate::config::{PhysicsConfig, SimConfig, WorkspaceConfig};
use crate::error::{Result, SimError};
use crate::geom::{polyline_length, Point2, Rect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Tabletop geometry: what the camera sees, what the arms reach, and the
/// full image frame. observable ⊂ reachable ⊂ image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub observable_rect: Rect,
    pub reachable_rect: Rect,
    pub image_rect: Rect,
}

impl Workspace {
    pub fn from_config(cfg: &WorkspaceConfig) -> Workspace {
        let image_rect = Rect::new(0.0, 0.0, cfg.image_w_mm, cfg.image_h_mm);
        let ox = (cfg.image_w_mm - cfg.observable_w_mm) / 2.0;
        let oy = (cfg.image_h_mm - cfg.observable_h_mm) / 2.0;
        let observable_rect = Rect::new(ox, oy, ox + cfg.observable_w_mm, oy + cfg.observable_h_mm);
        let reachable_rect = Rect::new(
            observable_rect.min_x - cfg.reach_ext_mm,
            observable_rect.min_y,
            observable_rect.max_x + cfg.reach_ext_mm,
            observable_rect.max_y,
        );
        Workspace {
            observable_rect,
            reachable_rect,
            image_rect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arm {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GraspMode {
    /// Ring around the cable: holds the point but lets arclength slide
    /// through until a knot span or an endpoint reaches the jaw.
    Cage,
    /// Fixed grip on the material point.
    Pinch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspHandle {
    pub arm: Arm,
    pub node_index: usize,
    pub mode: GraspMode,
}

/// Bind a handle to the node nearest arclength fraction `u`.
pub fn grasp(state: &SimState, u: f64, arm: Arm, mode: GraspMode) -> Result<GraspHandle> {
    let node_index = state.centerline.node_at_u(u);
    let p = state.centerline.nodes[node_index];
    if !state.workspace.reachable_rect.contains(p) {
        return Err(SimError::Unreachable(node_index));
    }
    Ok(GraspHandle {
        arm,
        node_index,
        mode,
    })
}

/// Canonical topology signature: first-occurrence-relabeled Gauss entries.
/// Stable under crossing reindexing, so usable as a "code unchanged" oracle.
pub(crate) fn canonical_code(state: &SimState) -> Vec<(usize, bool, i8)> {
    let code = state.gauss_code();
    let mut map: Vec<usize> = Vec::new();
    code.entries
        .iter()
        .map(|e: &GaussEntry| {
            let label = match map.iter().position(|&m| m == e.id) {
                Some(p) => p,
                None => {
                    map.push(e.id);
                    map.len() - 1
                }
            };
            (label, e.over, e.sign)
        })
        .collect()
}

/// One pass of position-based constraint projection. Returns the max node
/// correction applied.
fn project_constraints(
    nodes: &mut [Point2],
    pinned: &[bool],
    seg_len: f64,
    min_bend_radius: f64,
    reverse: bool,
) -> f64 {
    let mut max_corr = 0.0f64;
    let n = nodes.len();
    // Gauss-Seidel propagates fastest along the sweep direction, so
    // callers alternate it between iterations.
    let order: Vec<usize> = if reverse {
        (0..n - 1).rev().collect()
    } else {
        (0..n - 1).collect()
    };
    for i in order {
        let (a, b) = (nodes[i], nodes[i + 1]);
        let d = a.dist(b);
        if d < 1e-9 {
            continue;
        }
        let err = d - seg_len;
        if err.abs() < 1e-12 {
            continue;
        }
        let ux = (b.x - a.x) / d;
        let uy = (b.y - a.y) / d;
        let (wa, wb) = (
            if pinned[i] { 0.0 } else { 1.0 },
            if pinned[i + 1] { 0.0 } else { 1.0 },
        );
        let wsum = wa + wb;
        if wsum == 0.0 {
            continue;
        }
        let ca = err * wa / wsum;
        let cb = err * wb / wsum;
        nodes[i] = a.add(ux * ca, uy * ca);
        nodes[i + 1] = b.add(-ux * cb, -uy * cb);
        max_corr = max_corr.max(ca.abs()).max(cb.abs());
    }
    // Bend limit: cap the turn angle per node at 2 asin(seg / 2R).
    let max_turn = 2.0 * (seg_len / (2.0 * min_bend_radius)).min(1.0).asin();
    for i in 1..n - 1 {
        if pinned[i] {
            continue;
        }
        let (a, b, c) = (nodes[i - 1], nodes[i], nodes[i + 1]);
        let turn = crate::geom::angle_between(b.x - a.x, b.y - a.y, c.x - b.x, c.y - b.y).abs();
        if turn > max_turn {
            let mid = a.midpoint(c);
            let k = 0.15 * ((turn - max_turn) / turn).min(1.0);
            let moved = b.lerp(mid, k);
            max_corr = max_corr.max(b.dist(moved));
            nodes[i] = moved;
        }
    }
    max_corr
}

pub struct RelaxReport {
    pub converged: bool,
    pub iterations: usize,
}

/// Iterative projection restoring segment lengths and the bend limit while
/// preserving the Gauss code exactly: any iterate that would change the code
/// is discarded and the last good one kept.
pub fn relax(state: &mut SimState, pinned_nodes: &[usize], phys: &PhysicsConfig) -> RelaxReport {
    let n = state.centerline.nodes.len();
    let mut pinned = vec![false; n];
    for &i in pinned_nodes {
        pinned[i] = true;
    }
    let baseline = canonical_code(state);
    let mut nodes = state.centerline.nodes.clone();
    let mut good_nodes = nodes.clone();
    let mut good_crossings = state.crossings.clone();
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..phys.relax_max_iters {
        iterations = it + 1;
        // Several alternating sweeps between topology checks: the check is
        // the expensive part, and sweep direction governs how fast slack
        // propagates along the chain.
        let mut corr = 0.0f64;
        for s in 0..4 {
            corr = corr.max(project_constraints(
                &mut nodes,
                &pinned,
                state.centerline.seg_len,
                phys.min_bend_radius_mm,
                s % 2 == 1,
            ));
        }
        let mut trial = state.clone();
        trial.centerline.nodes = nodes.clone();
        if trial.update_crossings(CrossingUpdate::default()).is_err()
            || canonical_code(&trial) != baseline
        {
            break;
        }
        good_nodes = nodes.clone();
        good_crossings = trial.crossings;
        if corr < phys.relax_tol_mm {
            converged = true;
            break;
        }
    }
    state.centerline.nodes = good_nodes;
    state.crossings = good_crossings;
    RelaxReport {
        converged,
        iterations,
    }
}

pub struct PullOutcome {
    /// The requested separation exceeded the arclength between the pinched
    /// points; motion was truncated at the feasible maximum.
    pub overstretched: bool,
}

const SUBSTEP_MM: f64 = 25.0;
/// Strain above which a cage slides arclength from the slack side.
const CAGE_SLIDE_STRAIN: f64 = 0.98;

/// Move grasped nodes along straight gripper paths to the targets, relaxing
/// after every substep. Cage handles re-bind to neighboring nodes when one
/// side pulls taut, unless a knot span or an endpoint has reached the jaw.
pub fn pull(
    state: &mut SimState,
    handles: &mut [GraspHandle],
    targets: &[Point2],
    cfg: &SimConfig,
) -> Result<PullOutcome> {
    if handles.len() > 2 || handles.len() != targets.len() {
        return Err(SimError::ConfigInvalid(format!(
            "pull wants <=2 handles with matching targets, got {}/{}",
            handles.len(),
            targets.len()
        )));
    }
    if handles.len() == 2 && handles[0].node_index == handles[1].node_index {
        return Err(SimError::ConfigInvalid("two handles on one node".into()));
    }
    let reach = state.workspace.reachable_rect;
    let mut targets: Vec<Point2> = targets
        .iter()
        .map(|p| {
            Point2::new(
                p.x.clamp(reach.min_x, reach.max_x),
                p.y.clamp(reach.min_y, reach.max_y),
            )
        })
        .collect();

    // Pinch-pinch feasibility: separation bounded by arclength in between.
    let mut overstretched = false;
    if handles.len() == 2
        && handles.iter().all(|h| h.mode == GraspMode::Pinch)
        && targets.len() == 2
    {
        let span = handles[0].node_index.abs_diff(handles[1].node_index) as f64
            * state.centerline.seg_len;
        let avail = span * 0.99;
        let sep = targets[0].dist(targets[1]);
        if sep > avail {
            overstretched = true;
            let mid = targets[0].midpoint(targets[1]);
            let s = avail / sep;
            targets[0] = mid.lerp(targets[0], s);
            targets[1] = mid.lerp(targets[1], s);
        }
    }

    // Knot spans block cage sliding; freeze their extents for this pull.
    let blocked: Vec<(usize, usize)> = state
        .knot_spans()
        .iter()
        .map(|s| {
            let (lo, hi) = s.node_range(&state.centerline);
            (lo.saturating_sub(2), (hi + 2).min(state.centerline.nodes.len() - 1))
        })
        .collect();

    let starts: Vec<Point2> = handles
        .iter()
        .map(|h| state.centerline.nodes[h.node_index])
        .collect();
    let max_travel = starts
        .iter()
        .zip(&targets)
        .map(|(a, b)| a.dist(*b))
        .fold(0.0, f64::max);
    let steps = (max_travel / SUBSTEP_MM).ceil().max(1.0) as usize;

    let n = state.centerline.nodes.len();
    const DRAG_WINDOW: usize = 20;
    for step in 1..=steps {
        let t = step as f64 / steps as f64;
        let mut moved = vec![false; n];
        let pinned_set: Vec<usize> = handles.iter().map(|h| h.node_index).collect();
        for (h, (s0, tgt)) in handles.iter().zip(starts.iter().zip(&targets)) {
            let goal = s0.lerp(*tgt, t);
            let delta = Point2::new(
                goal.x - state.centerline.nodes[h.node_index].x,
                goal.y - state.centerline.nodes[h.node_index].y,
            );
            // Drag a tapered neighborhood with the jaw so the topological
            // commit below sees the whole swept strand, not just one node.
            let lo = h.node_index.saturating_sub(DRAG_WINDOW);
            let hi = (h.node_index + DRAG_WINDOW).min(n - 1);
            for j in lo..=hi {
                if j != h.node_index && pinned_set.contains(&j) {
                    continue;
                }
                let w = 1.0 - h.node_index.abs_diff(j) as f64 / (DRAG_WINDOW + 1) as f64;
                state.centerline.nodes[j].x += delta.x * w;
                state.centerline.nodes[j].y += delta.y * w;
                moved[j] = true;
            }
        }
        // Commit the handle displacement topologically (the dragged strand
        // lands on top of whatever it crossed), then settle.
        state.update_crossings(CrossingUpdate {
            moved: Some(&moved),
        })?;
        let pinned: Vec<usize> = handles.iter().map(|h| h.node_index).collect();
        relax(state, &pinned, &cfg.physics);

        for h in handles.iter_mut() {
            if h.mode == GraspMode::Cage {
                slide_cage(state, h, &blocked, &cfg.physics);
            }
        }
    }
    relax(state, &handles.iter().map(|h| h.node_index).collect::<Vec<_>>(), &cfg.physics);
    Ok(PullOutcome { overstretched })
}

/// Re-bind a cage handle toward the slack side while the taut side's chord
/// approaches its available arclength. Stops at endpoints and knot spans.
fn slide_cage(
    state: &mut SimState,
    h: &mut GraspHandle,
    blocked: &[(usize, usize)],
    phys: &PhysicsConfig,
) {
    let n = state.centerline.nodes.len();
    let seg = state.centerline.seg_len;
    for _ in 0..8 {
        let i = h.node_index;
        if i == 0 || i == n - 1 {
            return;
        }
        let ring = state.centerline.nodes[i];
        let left_chord = ring.dist(state.centerline.nodes[0]);
        let right_chord = ring.dist(state.centerline.nodes[n - 1]);
        let left_avail = i as f64 * seg;
        let right_avail = (n - 1 - i) as f64 * seg;
        let strain_l = left_chord / left_avail.max(1e-9);
        let strain_r = right_chord / right_avail.max(1e-9);
        // Material flows toward the taut side, so the bound index moves
        // toward the slack side.
        let next = if strain_l > CAGE_SLIDE_STRAIN && strain_l > strain_r {
            i + 1
        } else if strain_r > CAGE_SLIDE_STRAIN && strain_r > strain_l {
            i - 1
        } else {
            return;
        };
        if blocked.iter().any(|&(lo, hi)| next >= lo && next <= hi) {
            return; // knot span reached the jaw: cage acts as a pinch
        }
        // The new bound node snaps to the ring; its old position is slack.
        state.centerline.nodes[next] = ring;
        h.node_index = next;
        relax(state, &[next], phys);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutPattern {
    /// Serpentine starting at the far (max-y) edge of the observable area.
    Forward,
    /// Endpoints at opposite x-extremes with the middle sagging below.
    WideU,
}

/// Rigid sub-chains (knot spans plus padding) that a layout must move as
/// one piece to preserve their internal diagram.
fn rigid_blocks(state: &SimState) -> Vec<(usize, usize)> {
    let n = state.centerline.nodes.len();
    let mut blocks: Vec<(usize, usize)> = state
        .knot_spans()
        .iter()
        .map(|s| {
            let (lo, hi) = s.node_range(&state.centerline);
            (lo.saturating_sub(2), (hi + 2).min(n - 1))
        })
        .collect();
    blocks.sort_unstable();
    // Merge overlaps.
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for b in blocks {
        match merged.last_mut() {
            Some(last) if b.0 <= last.1 + 1 => last.1 = last.1.max(b.1),
            _ => merged.push(b),
        }
    }
    merged
}

struct Skeleton {
    pts: Vec<Point2>,
    cum: Vec<f64>,
}

impl Skeleton {
    fn new(pts: Vec<Point2>) -> Skeleton {
        let mut cum = Vec::with_capacity(pts.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            acc += w[0].dist(w[1]);
            cum.push(acc);
        }
        Skeleton { pts, cum }
    }

    fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn point_at(&self, s: f64) -> Point2 {
        let s = s.clamp(0.0, self.length());
        let i = match self
            .cum
            .binary_search_by(|c| c.partial_cmp(&s).unwrap())
        {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        }
        .min(self.pts.len() - 2);
        let seg = self.cum[i + 1] - self.cum[i];
        let t = if seg > 1e-12 { (s - self.cum[i]) / seg } else { 0.0 };
        self.pts[i].lerp(self.pts[i + 1], t)
    }

    fn tangent_at(&self, s: f64) -> (f64, f64) {
        let a = self.point_at((s - 5.0).max(0.0));
        let b = self.point_at((s + 5.0).min(self.length()));
        let d = a.dist(b).max(1e-9);
        ((b.x - a.x) / d, (b.y - a.y) / d)
    }
}

/// Serpentine skeleton of at least `needed` length, rows spaced `gap` apart.
fn forward_skeleton(ws: &Workspace, needed: f64, gap: f64) -> Skeleton {
    let obs = ws.observable_rect;
    let x_lo = obs.min_x + 40.0;
    let x_hi = obs.max_x - 40.0;
    let mut pts = Vec::new();
    let mut y = obs.max_y - 30.0;
    let mut dir = 1.0;
    let mut len = 0.0;
    let mut x = x_lo;
    pts.push(Point2::new(x, y));
    while len < needed {
        let end = if dir > 0.0 { x_hi } else { x_lo };
        pts.push(Point2::new(end, y));
        len += (end - x).abs();
        // Drop to the next row (clamped at the near edge).
        let ny = (y - gap).max(obs.min_y + 30.0);
        for k in 1..=6 {
            let a = std::f64::consts::PI * k as f64 / 6.0;
            pts.push(Point2::new(
                end + dir * (gap / 2.0) * a.sin(),
                y - (gap / 2.0) * (1.0 - a.cos()),
            ));
        }
        len += std::f64::consts::PI * gap / 2.0;
        y = ny;
        x = end;
        dir = -dir;
    }
    Skeleton::new(pts)
}

/// U-shaped skeleton of exactly `needed` length (within 1 mm): two vertical
/// sides joined by a meandering bottom whose amplitude is solved for length.
fn wide_u_skeleton(ws: &Workspace, needed: f64) -> Skeleton {
    let obs = ws.observable_rect;
    let xl = obs.min_x + 40.0;
    let xr = obs.max_x - 40.0;
    let y_top = obs.max_y - 45.0;
    let y_bot = obs.min_y + 130.0;
    let w = xr - xl;
    let h_max = y_top - y_bot;

    let build = |h: f64, amp: f64| -> Vec<Point2> {
        let mut pts = vec![Point2::new(xl, y_top)];
        pts.push(Point2::new(xl, y_top - h));
        let periods = 6.0;
        let samples = 400;
        for k in 1..=samples {
            let t = k as f64 / samples as f64;
            let x = xl + w * t;
            let y = y_top - h - amp * (std::f64::consts::TAU * periods * t).sin().abs();
            pts.push(Point2::new(x, y));
        }
        pts.push(Point2::new(xr, y_top));
        pts
    };

    let straight = 2.0 * h_max + w;
    if needed <= straight {
        // Short cable: shrink the sides, flat bottom.
        let h = ((needed - w) / 2.0).max(0.0);
        return Skeleton::new(build(h, 0.0));
    }
    // Solve the meander amplitude for the extra length.
    let (mut lo, mut hi) = (0.0f64, h_max - 20.0);
    for _ in 0..40 {
        let mid = (lo + hi) / 2.0;
        let len = polyline_length(&build(h_max, mid));
        if len < needed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Skeleton::new(build(h_max, (lo + hi) / 2.0))
}

/// Place the cable per the pattern: free intervals follow the skeleton,
/// knot spans move as rigid blocks aligned to the local tangent. If the
/// re-placement would alter the Gauss code, it is abandoned and the state
/// only relaxed.
pub fn lay_out(state: &mut SimState, pattern: LayoutPattern, cfg: &SimConfig) -> Result<()> {
    lay_out_impl(state, pattern, cfg, true)
}

/// Layout without the Gauss-code guard: free-interval crossings are shed by
/// the re-placement (knot spans still move as rigid blocks). This is the
/// lift of a Reidemeister move, not a settle, so it may simplify the code.
pub(crate) fn lay_out_unchecked(
    state: &mut SimState,
    pattern: LayoutPattern,
    cfg: &SimConfig,
) -> Result<()> {
    lay_out_impl(state, pattern, cfg, false)
}

fn lay_out_impl(
    state: &mut SimState,
    pattern: LayoutPattern,
    cfg: &SimConfig,
    verify: bool,
) -> Result<()> {
    let before = canonical_code(state);
    let snapshot = state.clone();
    let blocks = rigid_blocks(state);
    let nodes = &state.centerline.nodes;
    let n = nodes.len();
    let seg = state.centerline.seg_len;

    // Skeleton distance consumed: free segments at seg_len, blocks at their
    // entry-exit chord.
    let mut needed = 0.0;
    let mut max_breadth = 0.0f64;
    {
        let mut i = 0;
        while i < n - 1 {
            if let Some(&(lo, hi)) = blocks.iter().find(|&&(lo, _)| lo == i) {
                let chord = nodes[lo].dist(nodes[hi]).max(seg);
                needed += chord;
                for j in lo..=hi {
                    max_breadth = max_breadth.max(point_line_dist(nodes[j], nodes[lo], nodes[hi]));
                }
                i = hi;
            } else {
                needed += seg;
                i += 1;
            }
        }
    }

    let skel = match pattern {
        LayoutPattern::Forward => {
            forward_skeleton(&state.workspace, needed, (2.0 * max_breadth + 50.0).max(60.0))
        }
        LayoutPattern::WideU => wide_u_skeleton(&state.workspace, needed),
    };

    let mut new_nodes = Vec::with_capacity(n);
    let mut s = 0.0;
    let mut i = 0;
    while i < n {
        if let Some(&(lo, hi)) = blocks.iter().find(|&&(lo, _)| lo == i) {
            let chord = nodes[lo].dist(nodes[hi]).max(seg);
            let entry = skel.point_at(s);
            let (tx, ty) = skel.tangent_at(s + chord / 2.0);
            // Rigid transform: block entry -> entry, chord direction -> tangent.
            let (bx, by) = (nodes[hi].x - nodes[lo].x, nodes[hi].y - nodes[lo].y);
            let bl = (bx * bx + by * by).sqrt().max(1e-9);
            let (cx, cy) = (bx / bl, by / bl);
            // Rotation taking (cx, cy) to (tx, ty).
            let cos = cx * tx + cy * ty;
            let sin = cx * ty - cy * tx;
            for j in lo..=hi {
                let dx = nodes[j].x - nodes[lo].x;
                let dy = nodes[j].y - nodes[lo].y;
                new_nodes.push(Point2::new(
                    entry.x + dx * cos - dy * sin,
                    entry.y + dx * sin + dy * cos,
                ));
            }
            s += chord;
            i = hi + 1;
        } else {
            new_nodes.push(skel.point_at(s));
            s += seg;
            i += 1;
        }
    }

    state.centerline.nodes = new_nodes;
    let moved = vec![true; n];
    let ok = state
        .update_crossings(CrossingUpdate {
            moved: Some(&moved),
        })
        .is_ok()
        && (!verify || canonical_code(state) == before);
    if !ok {
        *state = snapshot;
    }
    relax(state, &[], &cfg.physics);
    // Keep everything on the reachable area.
    let reach = state.workspace.reachable_rect;
    for p in state.centerline.nodes.iter_mut() {
        p.x = p.x.clamp(reach.min_x, reach.max_x);
        p.y = p.y.clamp(reach.min_y, reach.max_y);
    }
    relax(state, &[], &cfg.physics);
    Ok(())
}

fn point_line_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let l2 = a.dist_sq(b);
    if l2 < 1e-12 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / l2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// After a primitive: mass hanging near the image boundary may drag adjacent
/// slack off the table. Marks the state irrecoverable when most of the cable
/// has left the reachable area.
pub fn slack_spill(state: &mut SimState, rng: &mut ChaCha8Rng, phys: &PhysicsConfig) {
    let ws = state.workspace;
    let nodes = &state.centerline.nodes;
    let n = nodes.len();
    let near_edge: Vec<bool> = nodes
        .iter()
        .map(|&p| {
            !ws.image_rect.dilate(-phys.spill_edge_margin_mm).contains(p)
        })
        .collect();
    let edge_frac = near_edge.iter().filter(|&&b| b).count() as f64 / n as f64;
    if edge_frac > phys.spill_arclen_frac && rng.gen_bool(phys.p_spill.clamp(0.0, 1.0)) {
        // Largest connected run near the edge slides off, dragging slack.
        let (mut best_lo, mut best_hi, mut cur_lo) = (0usize, 0usize, None::<usize>);
        for i in 0..=n {
            match (i < n && near_edge[i], cur_lo) {
                (true, None) => cur_lo = Some(i),
                (false, Some(lo)) => {
                    if i - lo > best_hi - best_lo {
                        best_lo = lo;
                        best_hi = i;
                    }
                    cur_lo = None;
                }
                _ => {}
            }
        }
        if best_hi > best_lo {
            let run_mid = state.centerline.nodes[(best_lo + best_hi) / 2];
            // Outward direction: away from the image center through the run.
            let c = ws.image_rect.center();
            let dx = run_mid.x - c.x;
            let dy = run_mid.y - c.y;
            let (ox, oy) = if dx.abs() > dy.abs() {
                (dx.signum(), 0.0)
            } else {
                (0.0, dy.signum())
            };
            let shove = 180.0;
            let drag = 20usize;
            let lo = best_lo.saturating_sub(drag);
            let hi = (best_hi + drag).min(n);
            for i in lo..hi {
                let w = if i < best_lo {
                    (i - lo) as f64 / drag as f64
                } else if i >= best_hi {
                    (hi - 1 - i) as f64 / drag as f64
                } else {
                    1.0
                };
                state.centerline.nodes[i] =
                    state.centerline.nodes[i].add(ox * shove * w, oy * shove * w);
            }
            let pinned: Vec<usize> = (best_lo..best_hi).collect();
            relax(state, &pinned, phys);
            let moved = vec![true; n];
            let _ = state.update_crossings(CrossingUpdate {
                moved: Some(&moved),
            });
        }
    }
    if state.off_reachable_fraction() > phys.irrecoverable_frac {
        state.irrecoverable = true;
    }
}

/// Monotone sim-clock advance.
pub fn advance_clock(state: &mut SimState, seconds: f64) {
    debug_assert!(seconds >= 0.0);
    state.sim_clock += seconds;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cable::straight_state;
    use rand_chacha::rand_core::SeedableRng;

    fn cfg() -> SimConfig {
        SimConfig::default()
    }

    #[test]
    fn workspace_nesting() {
        let ws = Workspace::from_config(&cfg().workspace);
        assert_eq!(ws.observable_rect, Rect::new(100.0, 75.0, 1100.0, 825.0));
        assert_eq!(ws.reachable_rect, Rect::new(0.0, 75.0, 1200.0, 825.0));
        assert_eq!(ws.image_rect, Rect::new(0.0, 0.0, 1200.0, 900.0));
    }

    #[test]
    fn grasp_node_rounding() {
        let st = straight_state(&cfg());
        assert_eq!(grasp(&st, 0.0, Arm::Left, GraspMode::Pinch).unwrap().node_index, 0);
        assert_eq!(
            grasp(&st, 0.5, Arm::Left, GraspMode::Pinch).unwrap().node_index,
            135
        );
    }

    #[test]
    fn grasp_off_reachable_is_unreachable() {
        let mut st = straight_state(&cfg());
        st.centerline.nodes[0] = Point2::new(-80.0, 400.0);
        assert!(matches!(
            grasp(&st, 0.0, Arm::Left, GraspMode::Pinch),
            Err(SimError::Unreachable(0))
        ));
    }

    #[test]
    fn relax_is_idempotent() {
        let c = cfg();
        let mut st = straight_state(&c);
        // Perturb a few nodes.
        for i in (50..70).step_by(3) {
            st.centerline.nodes[i] = st.centerline.nodes[i].add(4.0, -3.0);
        }
        relax(&mut st, &[], &c.physics);
        let once = st.centerline.nodes.clone();
        relax(&mut st, &[], &c.physics);
        for (a, b) in once.iter().zip(&st.centerline.nodes) {
            assert!(a.dist(*b) < 0.1);
        }
    }

    #[test]
    fn pull_conserves_length() {
        let c = cfg();
        let mut st = straight_state(&c);
        let mut handles = [grasp(&st, 0.5, Arm::Left, GraspMode::Cage).unwrap()];
        let from = st.centerline.nodes[handles[0].node_index];
        let target = [from.add(0.0, -100.0)];
        pull(&mut st, &mut handles, &target, &c).unwrap();
        let len = polyline_length(&st.centerline.nodes);
        assert!((len - 2700.0).abs() < 27.0, "length {len}");
    }

    #[test]
    fn pinch_pinch_overstretch_truncates() {
        let c = cfg();
        let mut st = straight_state(&c);
        let mut handles = [
            grasp(&st, 0.0, Arm::Left, GraspMode::Pinch).unwrap(),
            grasp(&st, 1.0, Arm::Right, GraspMode::Pinch).unwrap(),
        ];
        // Reachable rect is only 1200 mm wide, so use a shorter cable span:
        // ask for 3000 mm on a diagonal; clamping already bounds it, so
        // instead check the flag with targets pinned to the corners.
        let t = [Point2::new(0.0, 75.0), Point2::new(1200.0, 825.0)];
        let out = pull(&mut st, &mut handles, &t, &c).unwrap();
        // Corner-to-corner is ~1415 mm < 2700: feasible, no overstretch.
        assert!(!out.overstretched);
        // Now a state with little arclength between the pinches.
        let mut st2 = straight_state(&c);
        let mut h2 = [
            grasp(&st2, 0.0, Arm::Left, GraspMode::Pinch).unwrap(),
            grasp(&st2, 0.1, Arm::Right, GraspMode::Pinch).unwrap(),
        ];
        let t2 = [Point2::new(100.0, 400.0), Point2::new(900.0, 400.0)];
        let out2 = pull(&mut st2, &mut h2, &t2, &c).unwrap();
        assert!(out2.overstretched);
        let sep = st2.centerline.nodes[h2[0].node_index]
            .dist(st2.centerline.nodes[h2[1].node_index]);
        assert!(sep <= 270.0 * 0.99 + 1.0, "separation {sep}");
    }

    #[test]
    fn layout_preserves_untangled() {
        let c = cfg();
        let mut st = straight_state(&c);
        assert!(st.is_untangled());
        lay_out(&mut st, LayoutPattern::WideU, &c).unwrap();
        assert!(st.is_untangled());
        let sep = st.centerline.nodes[0].dist(*st.centerline.nodes.last().unwrap());
        assert!(sep >= 800.0, "endpoint separation {sep}");
    }

    #[test]
    fn spill_noop_when_inside() {
        let c = cfg();
        let mut st = straight_state(&c);
        let before = st.centerline.nodes.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        slack_spill(&mut st, &mut rng, &c.physics);
        assert_eq!(before, st.centerline.nodes);
        assert!(!st.irrecoverable);
    }
}
