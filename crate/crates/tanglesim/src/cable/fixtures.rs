//! CSV polyline fixtures: tiny hand-checkable cable shapes for tests and
//! for replaying a known configuration through the CLI.

use super::{Centerline, OverStrand, SimState};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::Point2;
use crate::quasistatics::Workspace;
use std::path::Path;

/// Load a polyline from a `x_mm,y_mm` CSV (header optional, `#` comments
/// skipped).
pub fn load_polyline_csv(path: &Path) -> Result<Vec<Point2>> {
    let text = std::fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (x, y) = match (cols.next(), cols.next()) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                return Err(SimError::ConfigInvalid(format!(
                    "{}:{}: expected two columns",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        if lineno == 0 && x.parse::<f64>().is_err() {
            continue; // header row
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                SimError::ConfigInvalid(format!(
                    "{}:{}: bad number {s:?}",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        pts.push(Point2::new(parse(x)?, parse(y)?));
    }
    if pts.len() < 2 {
        return Err(SimError::EmptyInput(format!(
            "{}: fewer than two points",
            path.display()
        )));
    }
    Ok(pts)
}

pub fn save_polyline_csv(path: &Path, pts: &[Point2]) -> Result<()> {
    let mut out = String::from("x_mm,y_mm\n");
    for p in pts {
        out.push_str(&format!("{:.4},{:.4}\n", p.x, p.y));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Build a state from a fixture polyline. Over/under flags are assigned by
/// alternating along the cable (first passage of the first crossing over),
/// which matches how the shipped knot fixtures were drawn.
pub fn state_from_fixture(path: &Path, cfg: &SimConfig) -> Result<SimState> {
    let pts = load_polyline_csv(path)?;
    let seg_len = crate::geom::polyline_length(&pts) / (pts.len() - 1) as f64;
    let ws = Workspace::from_config(&cfg.workspace);
    let mut state = SimState::new(Centerline::new(pts, seg_len, cfg.cable.radius_mm), ws)?;
    for (i, c) in state.crossings.iter_mut().enumerate() {
        c.over = if i % 2 == 0 {
            OverStrand::A
        } else {
            OverStrand::B
        };
    }
    Ok(state)
}
