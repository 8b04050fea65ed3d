//! Key positions, collision checks and the device shell outline.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::geom::{convex_hull, convex_overlap, ensure_ccw, Rect, Vec2};
use crate::parts::{self, KeyBlueprint};
use crate::spec::{DeviceSpec, KeyKind, Position, ShellPolicy};

pub const SHELL_MARGIN_MM: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("row {0} mixes grid and explicit keys")]
    MixedRow(i64),
    #[error("{keys} keys but {blueprints} blueprints")]
    BlueprintCount { keys: usize, blueprints: usize },
    #[error("key `{0}` has no resolved position")]
    Unresolved(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacedKey {
    pub id: String,
    pub kind: KeyKind,
    pub center: Vec2,
    pub rotation_deg: f64,
    pub row: Option<i64>,
    pub footprint_mm: (f64, f64),
}

impl PlacedKey {
    pub fn polygon(&self) -> Vec<Vec2> {
        footprint_polygon(self.center, self.footprint_mm.0, self.footprint_mm.1, self.rotation_deg)
    }

    /// Key-local point to device coordinates.
    pub fn to_world(&self, local: Vec2) -> Vec2 {
        self.center + local.rotated_deg(self.rotation_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Placement {
    pub placed: Vec<PlacedKey>,
    pub rows: BTreeMap<i64, Vec<usize>>,
    pub bounds: Rect,
    /// Height of the non-conductive base; key bodies stand on its top face.
    pub base_height_mm: f64,
    /// Area behind the keys reserved for controller pads and printed resistors.
    pub rear_zone: Option<Rect>,
}

impl Placement {
    pub fn key_bounds(&self) -> Rect {
        self.bounds
    }

    /// Bounds including the rear zone.
    pub fn full_bounds(&self) -> Rect {
        match self.rear_zone {
            Some(z) => self.bounds.union(&z),
            None => self.bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collision {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellOutline {
    pub policy: ShellPolicy,
    /// Counterclockwise outline rings; a single ring except for the `none`
    /// policy, which keeps one ring per footprint.
    pub polygons: Vec<Vec<Vec2>>,
    pub height_mm: f64,
}

impl ShellOutline {
    pub fn contains(&self, p: Vec2) -> bool {
        self.polygons.iter().any(|poly| crate::geom::point_in_polygon(p, poly))
    }
}

/// Counterclockwise rectangle of size `w` x `h` rotated about its center.
pub fn footprint_polygon(center: Vec2, w: f64, h: f64, rotation_deg: f64) -> Vec<Vec2> {
    [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .map(|&(sx, sy)| center + Vec2::new(sx * w / 2.0, sy * h / 2.0).rotated_deg(rotation_deg))
        .collect()
}

pub fn base_height_for_rows(rows: usize) -> f64 {
    parts::BASE_HEIGHT_MM + parts::BASE_HEIGHT_PER_ROW_MM * (rows.max(1) - 1) as f64
}

pub fn place_keys(spec: &DeviceSpec, blueprints: &[KeyBlueprint]) -> Result<Placement, PlacementError> {
    if blueprints.len() != spec.keys.len() {
        return Err(PlacementError::BlueprintCount { keys: spec.keys.len(), blueprints: blueprints.len() });
    }
    let mut kinds: BTreeMap<i64, (bool, bool)> = BTreeMap::new();
    for k in &spec.keys {
        if let Some(r) = k.position.row() {
            let e = kinds.entry(r).or_default();
            if matches!(k.position, Position::Grid { .. }) {
                e.0 = true;
            } else {
                e.1 = true;
            }
            if e.0 && e.1 {
                return Err(PlacementError::MixedRow(r));
            }
        }
    }
    let spec = crate::spec::resolve_defaults(spec.clone());
    let mut placed = Vec::with_capacity(spec.keys.len());
    let mut rows: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, (k, bp)) in spec.keys.iter().zip(blueprints).enumerate() {
        let center = k.center_mm.ok_or_else(|| PlacementError::Unresolved(k.id.clone()))?;
        let row = k.position.row();
        if let Some(r) = row {
            rows.entry(r).or_default().push(i);
        }
        placed.push(PlacedKey {
            id: k.id.clone(),
            kind: k.kind,
            center,
            rotation_deg: k.position.rotation_deg(),
            row,
            footprint_mm: bp.footprint_mm,
        });
    }
    let pts: Vec<Vec2> = placed.iter().flat_map(|p| p.polygon()).collect();
    let bounds = Rect::from_points(&pts).unwrap_or_default();
    Ok(Placement {
        placed,
        base_height_mm: base_height_for_rows(rows.len()),
        rows,
        bounds,
        rear_zone: None,
    })
}

pub fn detect_collisions(p: &Placement) -> Vec<Collision> {
    let polys: Vec<Vec<Vec2>> = p.placed.iter().map(PlacedKey::polygon).collect();
    let mut out = Vec::new();
    for i in 0..polys.len() {
        for j in (i + 1)..polys.len() {
            if convex_overlap(&polys[i], &polys[j]) {
                out.push(Collision { a: p.placed[i].id.clone(), b: p.placed[j].id.clone() });
            }
        }
    }
    out
}

pub fn build_shell(p: &Placement, policy: ShellPolicy) -> ShellOutline {
    let mut rings: Vec<Vec<Vec2>> = p.placed.iter().map(PlacedKey::polygon).collect();
    if let Some(z) = p.rear_zone {
        rings.push(z.corners());
    }
    let polygons = match policy {
        ShellPolicy::Rectangle => {
            let pts: Vec<Vec2> = rings.iter().flatten().copied().collect();
            let r = Rect::from_points(&pts).unwrap_or_default().expand(SHELL_MARGIN_MM);
            vec![r.corners()]
        }
        ShellPolicy::Hull => {
            let m = SHELL_MARGIN_MM;
            let pts: Vec<Vec2> = rings
                .iter()
                .flatten()
                .flat_map(|&c| {
                    [Vec2::new(-m, -m), Vec2::new(m, -m), Vec2::new(m, m), Vec2::new(-m, m)].map(|o| c + o)
                })
                .collect();
            vec![convex_hull(&pts)]
        }
        ShellPolicy::None => rings.into_iter().map(ensure_ccw).collect(),
    };
    ShellOutline { policy, polygons, height_mm: p.base_height_mm }
}
