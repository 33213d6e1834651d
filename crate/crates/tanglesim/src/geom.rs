//! 2D geometry primitives shared across the simulator. Units are mm in the
//! workspace frame unless a function says otherwise.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn dist_sq(self, other: Point2) -> f64 {
        (self.x - other.x).powi(2) + (self.y - other.y).powi(2)
    }

    pub fn add(self, dx: f64, dy: f64) -> Point2 {
        Point2::new(self.x + dx, self.y + dy)
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn midpoint(self, other: Point2) -> Point2 {
        self.lerp(other, 0.5)
    }
}

/// Axis-aligned rectangle, inclusive bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub const fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Rect {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> Point2 {
        Point2::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }

    pub fn dilate(&self, d: f64) -> Rect {
        Rect::new(self.min_x - d, self.min_y - d, self.max_x + d, self.max_y + d)
    }

    /// Distance from p to the nearest rectangle edge (0 if on the boundary).
    pub fn edge_distance(&self, p: Point2) -> f64 {
        let dx = (self.min_x - p.x).max(p.x - self.max_x).max(0.0);
        let dy = (self.min_y - p.y).max(p.y - self.max_y).max(0.0);
        if dx > 0.0 || dy > 0.0 {
            (dx * dx + dy * dy).sqrt()
        } else {
            let inner = (p.x - self.min_x)
                .min(self.max_x - p.x)
                .min(p.y - self.min_y)
                .min(self.max_y - p.y);
            inner.max(0.0)
        }
    }
}

/// Outcome of intersecting two segments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegIntersection {
    None,
    /// Transversal crossing at the given point, with parameters (t on a, s on b).
    Proper(Point2, f64, f64),
    /// Collinear with positive-length overlap.
    CollinearOverlap,
}

/// Intersect segments a0-a1 and b0-b1.
pub fn segment_intersection(a0: Point2, a1: Point2, b0: Point2, b1: Point2) -> SegIntersection {
    let rx = a1.x - a0.x;
    let ry = a1.y - a0.y;
    let sx = b1.x - b0.x;
    let sy = b1.y - b0.y;
    let denom = rx * sy - ry * sx;
    let qpx = b0.x - a0.x;
    let qpy = b0.y - a0.y;
    if denom.abs() < 1e-12 {
        // Parallel. Check for collinear overlap.
        let cross = qpx * ry - qpy * rx;
        if cross.abs() < 1e-9 {
            let len_sq = rx * rx + ry * ry;
            if len_sq > 0.0 {
                let t0 = (qpx * rx + qpy * ry) / len_sq;
                let t1 = t0 + (sx * rx + sy * ry) / len_sq;
                let (lo, hi) = if t0 < t1 { (t0, t1) } else { (t1, t0) };
                if hi > 1e-9 && lo < 1.0 - 1e-9 {
                    return SegIntersection::CollinearOverlap;
                }
            }
        }
        return SegIntersection::None;
    }
    let t = (qpx * sy - qpy * sx) / denom;
    let s = (qpx * ry - qpy * rx) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s) {
        SegIntersection::Proper(Point2::new(a0.x + t * rx, a0.y + t * ry), t, s)
    } else {
        SegIntersection::None
    }
}

/// Total arclength of a polyline.
pub fn polyline_length(pts: &[Point2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Resample a polyline into `n` points spaced uniformly by arclength.
pub fn resample(pts: &[Point2], n: usize) -> Vec<Point2> {
    assert!(pts.len() >= 2 && n >= 2);
    let total = polyline_length(pts);
    let step = total / (n - 1) as f64;
    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    let mut seg = 0usize;
    let mut seg_start_len = 0.0;
    let mut seg_len = pts[0].dist(pts[1]);
    for i in 1..n - 1 {
        let target = step * i as f64;
        while seg_start_len + seg_len < target && seg + 2 < pts.len() {
            seg_start_len += seg_len;
            seg += 1;
            seg_len = pts[seg].dist(pts[seg + 1]);
        }
        let t = if seg_len > 0.0 {
            ((target - seg_start_len) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg].lerp(pts[seg + 1], t));
    }
    out.push(pts[pts.len() - 1]);
    out
}

/// Signed angle (radians, in (-pi, pi]) from direction (ax, ay) to (bx, by).
pub fn angle_between(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let cross = ax * by - ay * bx;
    let dot = ax * bx + ay * by;
    cross.atan2(dot)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proper_crossing() {
        let r = segment_intersection(
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(5.0, -5.0),
            Point2::new(5.0, 5.0),
        );
        match r {
            SegIntersection::Proper(p, _, _) => {
                assert!((p.x - 5.0).abs() < 1e-9 && p.y.abs() < 1e-9);
            }
            other => panic!("expected proper crossing, got {other:?}"),
        }
    }

    #[test]
    fn parallel_disjoint() {
        let r = segment_intersection(
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(0.0, 1.0),
            Point2::new(10.0, 1.0),
        );
        assert_eq!(r, SegIntersection::None);
    }

    #[test]
    fn collinear_overlap() {
        let r = segment_intersection(
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 0.0),
            Point2::new(5.0, 0.0),
            Point2::new(15.0, 0.0),
        );
        assert_eq!(r, SegIntersection::CollinearOverlap);
    }

    #[test]
    fn resample_preserves_endpoints_and_spacing() {
        let pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(100.0, 0.0),
            Point2::new(100.0, 100.0),
        ];
        let rs = resample(&pts, 21);
        assert_eq!(rs.len(), 21);
        assert!(rs[0].dist(pts[0]) < 1e-9);
        assert!(rs[20].dist(pts[2]) < 1e-9);
        for w in rs.windows(2) {
            assert!((w[0].dist(w[1]) - 10.0).abs() < 0.5);
        }
    }
}
