//! Synthetic overhead observations: rasterize the diagram to a grayscale
//! image with over/under occlusion, derive the cable mask, and attach the
//! hidden ground-truth annotations consumed by noise models and evaluation.

use crate::cable::{KnotSpan, OverStrand, SimState};
use crate::geom::Point2;
use std::collections::HashMap;

pub const CABLE_INTENSITY: u8 = 255;
pub const MASK_THRESHOLD: u8 = 128;
/// Cable disc radius in px (1 px = 1 mm).
const DISC_R: f64 = 3.0;
/// Under-strand pixels within this distance of the over-strand centerline
/// are hidden at a crossing (the over cable's footprint plus a sliver).
const OCCLUDE_HALF_WIDTH: f64 = 4.0;
const OCCLUDE_RANGE: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PixelRect {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl PixelRect {
    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn width(&self) -> i32 {
        self.x1 - self.x0 + 1
    }

    pub fn height(&self) -> i32 {
        self.y1 - self.y0 + 1
    }

    pub fn center(&self) -> (i32, i32) {
        ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)
    }

    pub fn from_points(pts: impl IntoIterator<Item = (i32, i32)>) -> Option<PixelRect> {
        let mut it = pts.into_iter();
        let (x, y) = it.next()?;
        let mut r = PixelRect {
            x0: x,
            y0: y,
            x1: x,
            y1: y,
        };
        for (x, y) in it {
            r.x0 = r.x0.min(x);
            r.y0 = r.y0.min(y);
            r.x1 = r.x1.max(x);
            r.y1 = r.y1.max(y);
        }
        Some(r)
    }

    pub fn dilate(&self, d: i32) -> PixelRect {
        PixelRect {
            x0: self.x0 - d,
            y0: self.y0 - d,
            x1: self.x1 + d,
            y1: self.y1 + d,
        }
    }

    pub fn clip(&self, w: i32, h: i32) -> PixelRect {
        PixelRect {
            x0: self.x0.max(0),
            y0: self.y0.max(0),
            x1: self.x1.min(w - 1),
            y1: self.y1.min(h - 1),
        }
    }
}

/// Hidden ground truth attached to an observation, exactly consistent with
/// the producing state. Consumed only by noise models and evaluation.
#[derive(Debug, Clone)]
pub struct Truth {
    /// Visible, unoccluded endpoints: (pixel, node index).
    pub endpoints: Vec<((i32, i32), usize)>,
    /// Knot crossing bboxes dilated 20 px, one per span, with the span.
    pub knots: Vec<(PixelRect, KnotSpan)>,
    /// Fraction of each span's nodes hidden by occlusion or off-image.
    pub knot_occlusion: Vec<f64>,
    /// Pixel positions of all visible crossings.
    pub crossings_px: Vec<(i32, i32)>,
    /// node -> pixels it contributed (post-occlusion).
    pub node_pixels: Vec<Vec<u32>>,
    /// pixel -> contributing nodes (post-occlusion).
    pub pixel_nodes: HashMap<u32, Vec<u16>>,
}

#[derive(Clone)]
pub struct Observation {
    pub width: i32,
    pub height: i32,
    /// Row-major grayscale, y*width + x.
    pub image: Vec<u8>,
    /// image intensity above the segmentation threshold.
    pub mask: Vec<bool>,
    pub truth: Truth,
    pub step_index: usize,
}

impl Observation {
    #[inline]
    pub fn idx(&self, x: i32, y: i32) -> usize {
        (y * self.width + x) as usize
    }

    pub fn in_bounds(&self, x: i32, y: i32) -> bool {
        x >= 0 && x < self.width && y >= 0 && y < self.height
    }

    pub fn mask_at(&self, x: i32, y: i32) -> bool {
        self.in_bounds(x, y) && self.mask[self.idx(x, y)]
    }

    /// Nearest cable node to a pixel via the truth map, searching a small
    /// neighborhood.
    pub fn node_at_pixel(&self, x: i32, y: i32) -> Option<usize> {
        for r in 0..=6i32 {
            let mut best: Option<(f64, usize)> = None;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx.abs().max(dy.abs()) != r {
                        continue;
                    }
                    let (px, py) = (x + dx, y + dy);
                    if !self.in_bounds(px, py) {
                        continue;
                    }
                    if let Some(nodes) = self.truth.pixel_nodes.get(&(self.idx(px, py) as u32)) {
                        for &n in nodes {
                            let d = ((dx * dx + dy * dy) as f64).sqrt();
                            if best.map_or(true, |(bd, _)| d < bd) {
                                best = Some((d, n as usize));
                            }
                        }
                    }
                }
            }
            if let Some((_, n)) = best {
                return Some(n);
            }
        }
        None
    }
}

fn px_of(p: Point2) -> (i32, i32) {
    (p.x.floor() as i32, p.y.floor() as i32)
}

/// Render the state to an overhead observation. Pure function of the state:
/// identical states yield bitwise-identical images.
pub fn render(state: &SimState, step_index: usize) -> Observation {
    let w = state.workspace.image_rect.width().round() as i32;
    let h = state.workspace.image_rect.height().round() as i32;
    let n = state.centerline.nodes.len();
    let mut image = vec![0u8; (w * h) as usize];
    let mut pixel_nodes: HashMap<u32, Vec<u16>> = HashMap::new();
    let idx = |x: i32, y: i32| (y * w + x) as u32;

    let visible =
        |p: Point2| -> bool { state.workspace.image_rect.contains(p) };

    // Stamp discs along every segment with both ends visible; off-workspace
    // nodes are not drawn.
    let mut stamp = |center: Point2, node: usize, image: &mut Vec<u8>| {
        let (cx, cy) = px_of(center);
        let r = DISC_R.ceil() as i32;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || x >= w || y < 0 || y >= h {
                    continue;
                }
                let fx = x as f64 + 0.5 - center.x;
                let fy = y as f64 + 0.5 - center.y;
                if fx * fx + fy * fy > DISC_R * DISC_R {
                    continue;
                }
                image[(y * w + x) as usize] = CABLE_INTENSITY;
                let e = pixel_nodes.entry(idx(x, y)).or_default();
                if !e.contains(&(node as u16)) {
                    e.push(node as u16);
                }
            }
        }
    };
    for s in 0..n - 1 {
        let (a, b) = (state.centerline.nodes[s], state.centerline.nodes[s + 1]);
        if !visible(a) && !visible(b) {
            continue;
        }
        let len = a.dist(b).max(1e-9);
        let steps = len.ceil() as usize;
        for k in 0..=steps {
            let t = k as f64 / steps as f64;
            let p = a.lerp(b, t);
            if !visible(p) {
                continue;
            }
            let node = if t < 0.5 { s } else { s + 1 };
            stamp(p, node, &mut image);
        }
    }

    // Occlusion: at each crossing, hide under-strand pixels lying within
    // the over-strand's footprint.
    for c in &state.crossings {
        let (so, su) = match c.over {
            OverStrand::A => (c.seg_a, c.seg_b),
            OverStrand::B => (c.seg_b, c.seg_a),
        };
        let over_near = |node: u16| {
            let node = node as usize;
            node + 2 >= so && node <= so + 3
        };
        let under_near = |node: u16| {
            let node = node as usize;
            node + 2 >= su && node <= su + 3
        };
        // Over-strand centerline around the crossing.
        let o_lo = so.saturating_sub(1);
        let o_hi = (so + 2).min(n - 1);
        let dist_to_over = |p: Point2| -> f64 {
            let mut d = f64::INFINITY;
            for s in o_lo..o_hi {
                d = d.min(point_seg_dist(
                    p,
                    state.centerline.nodes[s],
                    state.centerline.nodes[s + 1],
                ));
            }
            d
        };
        let (cx, cy) = px_of(c.point);
        let r = OCCLUDE_RANGE.ceil() as i32;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (cx + dx, cy + dy);
                if x < 0 || x >= w || y < 0 || y >= h {
                    continue;
                }
                let key = idx(x, y);
                let Some(nodes) = pixel_nodes.get(&key) else {
                    continue;
                };
                let has_under = nodes.iter().any(|&m| under_near(m));
                let has_over = nodes.iter().any(|&m| over_near(m));
                if !has_under {
                    continue;
                }
                let pc = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                if dist_to_over(pc) > OCCLUDE_HALF_WIDTH {
                    continue;
                }
                if has_over {
                    // Shared pixel: the over strand owns it.
                    let kept: Vec<u16> = nodes
                        .iter()
                        .copied()
                        .filter(|&m| !under_near(m) || over_near(m))
                        .collect();
                    pixel_nodes.insert(key, kept);
                } else {
                    // Pure under-strand pixel hidden by the over cable.
                    let kept: Vec<u16> = nodes
                        .iter()
                        .copied()
                        .filter(|&m| !under_near(m))
                        .collect();
                    if kept.is_empty() {
                        pixel_nodes.remove(&key);
                        image[key as usize] = 0;
                    } else {
                        pixel_nodes.insert(key, kept);
                    }
                }
            }
        }
    }

    let mask: Vec<bool> = image.iter().map(|&v| v > MASK_THRESHOLD).collect();

    // Node -> pixels (post-occlusion).
    let mut node_pixels: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (&px, nodes) in &pixel_nodes {
        for &m in nodes {
            node_pixels[m as usize].push(px);
        }
    }
    for v in node_pixels.iter_mut() {
        v.sort_unstable();
    }

    // Visible endpoints: inside the image and with at least one tip-disc
    // pixel the endpoint exclusively owns (otherwise the tip is hidden
    // under another strand).
    let mut endpoints = Vec::new();
    for &node in &[0usize, n - 1] {
        let p = state.centerline.nodes[node];
        if !visible(p) {
            continue;
        }
        let (tx, ty) = px_of(p);
        let owns = node_pixels[node].iter().any(|&px| {
            let (x, y) = ((px % w as u32) as i32, (px / w as u32) as i32);
            (x - tx).abs().max((y - ty).abs()) <= 2
                && pixel_nodes[&px]
                    .iter()
                    .all(|&m| (m as usize).abs_diff(node) <= 3)
        });
        if owns {
            endpoints.push(((tx, ty), node));
        }
    }

    // Knot bboxes: crossing bbox dilated 20 px, clipped.
    let spans = state.knot_spans();
    let mut knots = Vec::with_capacity(spans.len());
    let mut knot_occlusion = Vec::with_capacity(spans.len());
    for span in spans {
        let bbox = PixelRect::from_points(
            span.crossings
                .iter()
                .map(|&i| px_of(state.crossings[i].point)),
        )
        .expect("span has crossings")
        .dilate(20)
        .clip(w, h);
        let (lo, hi) = span.node_range(&state.centerline);
        let hidden = (lo..=hi)
            .filter(|&m| {
                node_pixels[m].is_empty()
                    || !node_pixels[m].iter().any(|&px| {
                        pixel_nodes[&px]
                            .iter()
                            .all(|&q| (q as usize).abs_diff(m) <= 3)
                    })
            })
            .count();
        knot_occlusion.push(hidden as f64 / (hi - lo + 1) as f64);
        knots.push((bbox, span));
    }

    Observation {
        width: w,
        height: h,
        image,
        mask,
        truth: Truth {
            endpoints,
            knots,
            knot_occlusion,
            crossings_px: state
                .crossings
                .iter()
                .filter(|c| visible(c.point))
                .map(|c| px_of(c.point))
                .collect(),
            node_pixels,
            pixel_nodes,
        },
        step_index,
    }
}

fn point_seg_dist(p: Point2, a: Point2, b: Point2) -> f64 {
    let l2 = a.dist_sq(b);
    if l2 < 1e-12 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y)) / l2).clamp(0.0, 1.0);
    p.dist(a.lerp(b, t))
}

/// Write the image and mask as PNGs (CLI frame dumps).
pub fn save_png(obs: &Observation, image_path: &std::path::Path, mask_path: Option<&std::path::Path>) -> crate::error::Result<()> {
    let w = obs.width as u32;
    let h = obs.height as u32;
    let img = image::GrayImage::from_raw(w, h, obs.image.clone())
        .expect("buffer matches dimensions");
    img.save(image_path)
        .map_err(|e| crate::error::SimError::Io(std::io::Error::other(e)))?;
    if let Some(mp) = mask_path {
        let mbuf: Vec<u8> = obs.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let mimg = image::GrayImage::from_raw(w, h, mbuf).expect("buffer matches dimensions");
        mimg.save(mp)
            .map_err(|e| crate::error::SimError::Io(std::io::Error::other(e)))?;
    }
    Ok(())
}
