//! Printed resistors: a serpentine trace of exact centerline length.

use serde::Serialize;
use thiserror::Error;

use super::RoutingRules;
use crate::electrical::{length_for_resistance, trace_resistance};
use crate::geom::{Rect, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeanderError {
    #[error("target resistance {0} ohm must be positive")]
    NonPositive(f64),
    #[error("region too small: needs {required_mm:.2} mm of trace, fits {available_mm:.2} mm")]
    RegionTooSmall { required_mm: f64, available_mm: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResistorMeander {
    pub id: String,
    pub net_a: String,
    pub net_b: String,
    pub target_ohms: f64,
    pub length_mm: f64,
    pub realized_ohms: f64,
    /// Centerline from the `net_a` terminal to the end of the resistive run.
    pub polyline: Vec<Vec2>,
    /// `polyline` with both ends trimmed so traces of `net_a` and `net_b`
    /// may touch the ends but keep clear of the rest.
    pub core: Vec<Vec2>,
    pub terminal_a: Vec2,
    /// Grid point where `net_b` picks up the far end.
    pub terminal_b: Vec2,
    pub run_width_mm: f64,
    pub bounds: Rect,
}

impl ResistorMeander {
    pub fn centerline_length(&self) -> f64 {
        polyline_length(&self.polyline)
    }
}

pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Removes `d` of length from both ends of a polyline.
pub fn trim_polyline(pts: &[Vec2], d: f64) -> Vec<Vec2> {
    let total = polyline_length(pts);
    if total <= 2.0 * d {
        return Vec::new();
    }
    let fwd = trim_front(pts, d);
    let mut rev: Vec<Vec2> = fwd.into_iter().rev().collect();
    rev = trim_front(&rev, d);
    rev.reverse();
    rev
}

fn trim_front(pts: &[Vec2], d: f64) -> Vec<Vec2> {
    let mut left = d;
    for (i, w) in pts.windows(2).enumerate() {
        let seg = w[0].dist(w[1]);
        if seg > left {
            let t = left / seg;
            let mut out = vec![w[0] + (w[1] - w[0]) * t];
            out.extend_from_slice(&pts[i + 1..]);
            return out;
        }
        left -= seg;
    }
    Vec::new()
}

fn snap_up(v: f64, p: f64) -> f64 {
    (v / p - 1e-9).ceil() * p
}

/// Lays out a meander whose start sits on the first grid point inside
/// `region`. Runs go along x and step along +y by one grid pitch.
pub fn synthesize_resistor_meander(
    id: &str,
    net_a: &str,
    net_b: &str,
    target_ohms: f64,
    region: Rect,
    rules: &RoutingRules,
) -> Result<ResistorMeander, MeanderError> {
    if !(target_ohms > 0.0) {
        return Err(MeanderError::NonPositive(target_ohms));
    }
    let area = rules.area_mm2();
    let length = length_for_resistance(target_ohms, area, &rules.material)
        .map_err(|_| MeanderError::NonPositive(target_ohms))?;
    let p = rules.grid_pitch_mm;
    let half = rules.trace_width() / 2.0;
    let s = Vec2::new(snap_up(region.min.x + half, p), snap_up(region.min.y + half, p));
    let max_cols = ((region.max.x - half - s.x) / p + 1e-9).floor();
    let max_rows = ((region.max.y - half - s.y) / p + 1e-9).floor();
    let capacity = |k: f64| (max_rows + 1.0) * k * p + max_rows * p;
    if max_cols < 1.0 || max_rows < 0.0 {
        return Err(MeanderError::RegionTooSmall { required_mm: length, available_mm: 0.0 });
    }
    let k = ((length / p).sqrt().ceil()).clamp(1.0, max_cols);
    if capacity(k) + 1e-9 < length {
        return Err(MeanderError::RegionTooSmall { required_mm: length, available_mm: capacity(max_cols) });
    }
    let run = k * p;
    let mut pts = vec![s];
    let mut cur = s;
    let mut left = length;
    let mut dir = 1.0;
    let mut horizontal = true;
    let mut last_dir = Vec2::new(1.0, 0.0);
    while left > 1e-12 {
        let (seg, d) = if horizontal { (run, Vec2::new(dir, 0.0)) } else { (p, Vec2::new(0.0, 1.0)) };
        let step = seg.min(left);
        cur = cur + d * step;
        pts.push(cur);
        last_dir = d;
        left -= step;
        if horizontal {
            dir = -dir;
        }
        horizontal = !horizontal;
    }
    // far terminal: next grid point along the final direction
    let along = if last_dir.x != 0.0 { cur.x * last_dir.x } else { cur.y };
    let snapped = snap_up(along, p);
    let terminal_b = if last_dir.x != 0.0 {
        Vec2::new(snapped * last_dir.x, cur.y)
    } else {
        Vec2::new(cur.x, snapped)
    };
    let trim = rules.trace_width() + rules.clearance_mm + 0.1;
    let all: Vec<Vec2> = pts.iter().copied().chain(std::iter::once(terminal_b)).collect();
    let bounds = Rect::from_points(&all).expect("non-empty").expand(half);
    Ok(ResistorMeander {
        id: id.into(),
        net_a: net_a.into(),
        net_b: net_b.into(),
        target_ohms,
        length_mm: length,
        realized_ohms: trace_resistance(polyline_length(&pts), area, &rules.material).unwrap_or(f64::NAN),
        core: trim_polyline(&pts, trim),
        polyline: pts,
        terminal_a: s,
        terminal_b,
        run_width_mm: run,
        bounds,
    })
}
