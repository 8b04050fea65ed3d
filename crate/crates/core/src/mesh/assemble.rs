//! Instancing every body at its pose and merging into one mesh per material.

use serde::Serialize;

use super::{box_mesh, frustum_mesh, mesh_solid, MeshError, TriangleMesh};
use crate::geom::{clip_convex, point_in_polygon, signed_area, Aabb, Profile2D, Rect, Vec2};
use crate::parts::{BodyRole, KeyBlueprint, Material};
use crate::placement::{Placement, ShellOutline};
use crate::routing::{PadShape, RoutePlan};
use crate::spec::ShellPolicy;

/// Sampling pitch of the cross-material overlap check.
pub const OVERLAP_SAMPLE_MM: f64 = 0.2;
const MAX_SAMPLES_PER_PAIR: f64 = 200_000.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BodySummary {
    pub key: Option<String>,
    pub name: String,
    pub role: String,
    pub material: Material,
    pub triangles: usize,
    pub volume_mm3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembledMeshes {
    pub pla: TriangleMesh,
    pub cpla: TriangleMesh,
    pub bodies: Vec<BodySummary>,
    pub warnings: Vec<String>,
}

impl AssembledMeshes {
    pub fn count_role(&self, role: &str, material: Material) -> usize {
        self.bodies.iter().filter(|b| b.role == role && b.material == material).count()
    }

    pub fn count_named(&self, name: &str, material: Material) -> usize {
        self.bodies.iter().filter(|b| b.name == name && b.material == material).count()
    }
}

struct Body {
    key: Option<String>,
    name: String,
    role: &'static str,
    material: Material,
    mesh: TriangleMesh,
    /// Closed shells for point containment.
    shells: Vec<TriangleMesh>,
    aabb: Aabb,
}

fn role_name(r: BodyRole) -> &'static str {
    match r {
        BodyRole::Keycap => "keycap",
        BodyRole::Legend => "legend",
        BodyRole::Base => "base",
        BodyRole::CantileverSpring => "cantilever_spring",
        BodyRole::ReturnElectrode => "return_electrode",
        BodyRole::CoilSpring => "coil_spring",
        BodyRole::PlateElectrode => "plate_electrode",
        BodyRole::Hinge => "hinge",
        BodyRole::ContactElectrode => "contact_electrode",
    }
}

fn body(key: Option<String>, name: String, role: &'static str, mesh: TriangleMesh, shells: Vec<TriangleMesh>) -> Option<Body> {
    let aabb = mesh.aabb()?;
    Some(Body { key, name, role, material: mesh.material, mesh, shells, aabb })
}

fn single(key: Option<String>, name: String, role: &'static str, mesh: TriangleMesh) -> Option<Body> {
    body(key, name, role, mesh.clone(), vec![mesh])
}

/// Splits a multi-shell mesh built by concatenation back into its shells.
fn split_shells(m: &TriangleMesh) -> Vec<TriangleMesh> {
    let n = m.vertices.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for t in &m.triangles {
        let a = find(&mut parent, t[0] as usize);
        for &v in &t[1..] {
            let b = find(&mut parent, v as usize);
            parent[b] = a;
        }
    }
    let mut groups: std::collections::BTreeMap<usize, TriangleMesh> = std::collections::BTreeMap::new();
    let mut remap = vec![u32::MAX; n];
    for t in &m.triangles {
        let root = find(&mut parent, t[0] as usize);
        let g = groups.entry(root).or_insert_with(|| TriangleMesh::new(m.material));
        let mut tri = [0u32; 3];
        for (k, &v) in t.iter().enumerate() {
            if remap[v as usize] == u32::MAX {
                remap[v as usize] = g.vertices.len() as u32;
                g.vertices.push(m.vertices[v as usize]);
            }
            tri[k] = remap[v as usize];
        }
        g.triangles.push(tri);
    }
    groups.into_values().collect()
}

/// Conductor footprint inside the base, with its vertical extent.
struct Conductor {
    rect: Rect,
    z: (f64, f64),
}

fn conductors(plan: &RoutePlan) -> Vec<Conductor> {
    let st = &plan.stack;
    let mut out = Vec::new();
    for t in &plan.traces {
        let half = t.width_mm / 2.0;
        let z = st.band(t.layer);
        if t.points.len() == 1 {
            out.push(Conductor { rect: Rect::centered(t.points[0], t.width_mm, t.width_mm), z });
        }
        for w in t.points.windows(2) {
            out.push(Conductor { rect: crate::geom::segment_rect(w[0], w[1], half), z });
        }
    }
    for v in &plan.vias {
        out.push(Conductor { rect: Rect::centered(v.at, v.size_mm, v.size_mm), z: (v.z0, v.z1) });
    }
    let half = plan.rules.trace_width() / 2.0;
    for m in &plan.resistors {
        for w in m.polyline.windows(2) {
            out.push(Conductor { rect: crate::geom::segment_rect(w[0], w[1], half), z: st.floor });
        }
    }
    out
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    v
}

/// Non-conductive base split into horizontal bands; each band is the base
/// outline minus the conductors crossing it, decomposed into boxes and prisms.
fn slab_bodies(plan: &RoutePlan, placement: &Placement, shell: &ShellOutline) -> Result<Vec<TriangleMesh>, MeshError> {
    let st = &plan.stack;
    let h = st.base_height_mm;
    let cond = conductors(plan);
    let wall = plan.rules.wall_mm;
    // outline: one convex ring, or for `none` a union of rectangles
    let (hull, rects): (Option<&Vec<Vec2>>, Vec<Rect>) = match shell.policy {
        ShellPolicy::None => {
            let mut rs: Vec<Rect> = placement
                .placed
                .iter()
                .filter_map(|p| Rect::from_points(&p.polygon()))
                .collect();
            if let Some(z) = placement.rear_zone {
                rs.push(z);
            }
            rs.extend(cond.iter().map(|c| c.rect.expand(wall)));
            (None, rs)
        }
        _ => (shell.polygons.first(), Vec::new()),
    };
    let outline_pts: Vec<Vec2> = match hull {
        Some(poly) => poly.clone(),
        None => rects.iter().flat_map(|r| r.corners()).collect(),
    };
    let Some(outer) = Rect::from_points(&outline_pts) else { return Ok(Vec::new()) };
    let zs = sorted_unique(
        [0.0, st.floor.0, st.floor.1, st.ridge.0, h]
            .into_iter()
            .filter(|z| (0.0..=h).contains(z))
            .collect(),
    );
    let mut out = Vec::new();
    for band in zs.windows(2) {
        let (za, zb) = (band[0], band[1]);
        if zb - za < 1e-9 {
            continue;
        }
        let zm = 0.5 * (za + zb);
        let holes: Vec<&Rect> = cond.iter().filter(|c| c.z.0 < zm && c.z.1 > zm).map(|c| &c.rect).collect();
        let mut xs = vec![outer.min.x, outer.max.x];
        let mut ys = vec![outer.min.y, outer.max.y];
        for r in holes.iter().copied().chain(rects.iter()) {
            xs.extend([r.min.x, r.max.x]);
            ys.extend([r.min.y, r.max.y]);
        }
        let xs = sorted_unique(xs);
        let ys = sorted_unique(ys);
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        // 0 = empty, 1 = full cell, 2 = clipped by the hull
        let mut kind = vec![0u8; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let cell = Rect::new(xs[i], ys[j], xs[i + 1], ys[j + 1]);
                let c = cell.center();
                if holes.iter().any(|r| r.contains_point(c)) {
                    continue;
                }
                kind[j * nx + i] = match hull {
                    Some(poly) => {
                        if cell.corners().iter().all(|&p| point_in_polygon(p, poly) || on_boundary(p, poly)) {
                            1
                        } else {
                            2
                        }
                    }
                    None => u8::from(rects.iter().any(|r| r.contains_point(c))),
                };
            }
        }
        // merge full cells: runs along x, then identical runs along y
        let mut done = vec![false; nx * ny];
        for j in 0..ny {
            let mut i = 0;
            while i < nx {
                if kind[j * nx + i] != 1 || done[j * nx + i] {
                    i += 1;
                    continue;
                }
                let i0 = i;
                while i < nx && kind[j * nx + i] == 1 && !done[j * nx + i] {
                    i += 1;
                }
                let mut j1 = j + 1;
                while j1 < ny && (i0..i).all(|k| kind[j1 * nx + k] == 1 && !done[j1 * nx + k]) {
                    j1 += 1;
                }
                for jj in j..j1 {
                    for k in i0..i {
                        done[jj * nx + k] = true;
                    }
                }
                out.push(box_mesh([xs[i0], ys[j], za], [xs[i], ys[j1], zb], Material::Pla));
            }
        }
        if let Some(poly) = hull {
            for j in 0..ny {
                for i in 0..nx {
                    if kind[j * nx + i] != 2 {
                        continue;
                    }
                    let cell = Rect::new(xs[i], ys[j], xs[i + 1], ys[j + 1]).corners();
                    let clipped = crate::geom::dedup_ring(clip_convex(&cell, poly));
                    if clipped.len() >= 3 && signed_area(&clipped).abs() > 1e-9 {
                        out.push(super::extrude_between(&Profile2D::simple(clipped), za, zb, Material::Pla)?);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn on_boundary(p: Vec2, poly: &[Vec2]) -> bool {
    (0..poly.len()).any(|i| crate::geom::point_segment_distance(p, poly[i], poly[(i + 1) % poly.len()]) < 1e-9)
}

/// Builds both material meshes and rejects cross-material interpenetration.
pub fn assemble_device_meshes(
    placement: &Placement,
    blueprints: &[KeyBlueprint],
    plan: &RoutePlan,
    shell: &ShellOutline,
) -> Result<AssembledMeshes, MeshError> {
    let h = placement.base_height_mm;
    let mut bodies: Vec<Body> = Vec::new();
    for (pk, bp) in placement.placed.iter().zip(blueprints) {
        for b in &bp.bodies {
            let local = mesh_solid(&b.solid, b.material)?;
            let posed = local.posed(pk.rotation_deg, [pk.center.x, pk.center.y, h]);
            let shells = split_shells(&posed);
            bodies.extend(body(Some(pk.id.clone()), b.name.to_string(), role_name(b.role), posed, shells));
        }
    }
    for (i, s) in slab_bodies(plan, placement, shell)?.into_iter().enumerate() {
        bodies.extend(single(None, format!("base_{i:05}"), "base", s));
    }
    let st = &plan.stack;
    for (i, t) in plan.traces.iter().enumerate() {
        let (z0, z1) = st.band(t.layer);
        let half = t.width_mm / 2.0;
        let rects: Vec<Rect> = if t.points.len() == 1 {
            vec![Rect::centered(t.points[0], t.width_mm, t.width_mm)]
        } else {
            t.points.windows(2).map(|w| crate::geom::segment_rect(w[0], w[1], half)).collect()
        };
        for (k, r) in rects.into_iter().enumerate() {
            let m = box_mesh([r.min.x, r.min.y, z0], [r.max.x, r.max.y, z1], Material::Cpla);
            bodies.extend(single(None, format!("trace_{i:05}_{k:03}_{}", t.net), "trace", m));
        }
    }
    for (i, v) in plan.vias.iter().enumerate() {
        let r = Rect::centered(v.at, v.size_mm, v.size_mm);
        let m = box_mesh([r.min.x, r.min.y, v.z0], [r.max.x, r.max.y, v.z1], Material::Cpla);
        bodies.extend(single(None, format!("via_{i:05}_{}", v.net), "via", m));
    }
    let half = plan.rules.trace_width() / 2.0;
    for m in &plan.resistors {
        for (k, w) in m.polyline.windows(2).enumerate() {
            let r = crate::geom::segment_rect(w[0], w[1], half);
            let b = box_mesh([r.min.x, r.min.y, st.floor.0], [r.max.x, r.max.y, st.floor.1], Material::Cpla);
            bodies.extend(single(None, format!("resistor_{}_{k:03}", m.id), "resistor", b));
        }
    }
    let sockets = plan.socket.iter().flat_map(|s| s.electrodes.iter());
    for pad in plan.pads.iter().chain(sockets) {
        let (m, role) = match pad.shape {
            PadShape::Square { size, height } => {
                let r = Rect::centered(pad.center, size, size);
                (box_mesh([r.min.x, r.min.y, h], [r.max.x, r.max.y, h + height], Material::Cpla), "pin_pad")
            }
            PadShape::Cone { base_radius, top_radius, height } => {
                (frustum_mesh(pad.center, h, base_radius, top_radius, height, Material::Cpla), "socket_cone")
            }
        };
        bodies.extend(single(None, format!("pad_{}", pad.pin), role, m));
    }

    check_cross_material(&bodies)?;

    bodies.sort_by(|a, b| {
        a.material
            .cmp(&b.material)
            .then(a.key.cmp(&b.key))
            .then(a.role.cmp(b.role))
            .then(a.name.cmp(&b.name))
    });
    let mut pla = TriangleMesh::new(Material::Pla);
    let mut cpla = TriangleMesh::new(Material::Cpla);
    let mut summaries = Vec::with_capacity(bodies.len());
    for b in &bodies {
        match b.material {
            Material::Pla => pla.append(&b.mesh),
            Material::Cpla => cpla.append(&b.mesh),
        }
        summaries.push(BodySummary {
            key: b.key.clone(),
            name: b.name.clone(),
            role: b.role.to_string(),
            material: b.material,
            triangles: b.mesh.triangles.len(),
            volume_mm3: b.mesh.signed_volume(),
        });
    }
    let mut warnings = Vec::new();
    if cpla.is_empty() {
        warnings.push("device has no conductive bodies; the cPLA mesh is empty".to_string());
    }
    Ok(AssembledMeshes { pla, cpla, bodies: summaries, warnings })
}

fn check_cross_material(bodies: &[Body]) -> Result<(), MeshError> {
    let (pla, cpla): (Vec<&Body>, Vec<&Body>) = bodies.iter().partition(|b| b.material == Material::Pla);
    let mut cpla_sorted = cpla;
    cpla_sorted.sort_by(|a, b| a.aabb.min[0].total_cmp(&b.aabb.min[0]));
    for a in &pla {
        for b in &cpla_sorted {
            if b.aabb.min[0] >= a.aabb.max[0] {
                break;
            }
            let Some(ov) = a.aabb.overlap(&b.aabb) else { continue };
            let vol = sampled_overlap(a, b, &ov);
            if vol > 1e-6 {
                return Err(MeshError::CrossMaterialOverlap {
                    a: label(a),
                    ma: a.material.as_str(),
                    b: label(b),
                    mb: b.material.as_str(),
                    volume_mm3: vol,
                });
            }
        }
    }
    Ok(())
}

fn label(b: &Body) -> String {
    match &b.key {
        Some(k) => format!("{k}/{}", b.name),
        None => b.name.clone(),
    }
}

/// Volume estimate of the intersection of two bodies inside box `ov`.
fn sampled_overlap(a: &Body, b: &Body, ov: &Aabb) -> f64 {
    let ext = [ov.max[0] - ov.min[0], ov.max[1] - ov.min[1], ov.max[2] - ov.min[2]];
    let mut step = OVERLAP_SAMPLE_MM;
    while (ext[0] / step).ceil() * (ext[1] / step).ceil() * (ext[2] / step).ceil() > MAX_SAMPLES_PER_PAIR {
        step *= 1.5;
    }
    let n: Vec<usize> = ext.iter().map(|e| ((e / step).ceil() as usize).max(1)).collect();
    let d: Vec<f64> = (0..3).map(|k| ext[k] / n[k] as f64).collect();
    let mut inside = 0usize;
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                let p = [
                    ov.min[0] + (i as f64 + 0.5) * d[0],
                    ov.min[1] + (j as f64 + 0.5) * d[1],
                    ov.min[2] + (k as f64 + 0.5) * d[2],
                ];
                if a.shells.iter().any(|s| s.contains_point(p)) && b.shells.iter().any(|s| s.contains_point(p)) {
                    inside += 1;
                }
            }
        }
    }
    inside as f64 * d[0] * d[1] * d[2]
}
