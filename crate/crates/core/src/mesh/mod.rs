//! Triangle meshes: primitives, sweeps, watertightness census and binary STL.

mod assemble;

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub use assemble::{assemble_device_meshes, AssembledMeshes, BodySummary};

use crate::geom::{dedup_ring, Aabb, Profile2D, Vec2, Vec3};
use crate::parts::{beam_frame, Material, Solid};

pub const SEGMENTS_PER_TURN: usize = 48;
pub const STL_HEADER_BYTES: usize = 80;
pub const STL_TRIANGLE_BYTES: usize = 50;
const STL_HEADER: &[u8] = b"keyforge binary stl, units mm";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("profile is not a simple polygon set")]
    InvalidProfile,
    #[error("height {0} mm must be positive")]
    NonPositiveHeight(f64),
    #[error("sweep path has zero length")]
    ZeroLengthPath,
    #[error("sweep path folds back on itself at vertex {0}")]
    SelfIntersectingSweep(usize),
    #[error("coil pitch {pitch} mm is below wire thickness {wire} mm")]
    CoilPitch { pitch: f64, wire: f64 },
    #[error("coil needs at least one turn")]
    CoilTurns,
    #[error("triangulation failed")]
    Triangulation,
    #[error("{a} ({ma}) and {b} ({mb}) interpenetrate by about {volume_mm3:.6} mm3")]
    CrossMaterialOverlap { a: String, ma: &'static str, b: String, mb: &'static str, volume_mm3: f64 },
    #[error("malformed STL: {0}")]
    MalformedStl(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    /// Counterclockwise seen from outside.
    pub triangles: Vec<[u32; 3]>,
    pub material: Material,
}

impl TriangleMesh {
    pub fn new(material: Material) -> Self {
        Self { vertices: Vec::new(), triangles: Vec::new(), material }
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Appends another mesh as an extra shell; vertices are not welded.
    pub fn append(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
    }

    pub fn signed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (self.vertices[t[0] as usize], self.vertices[t[1] as usize], self.vertices[t[2] as usize]);
                a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
            })
            .sum::<f64>()
            / 6.0
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    fn flip(&mut self) {
        for t in &mut self.triangles {
            t.swap(1, 2);
        }
    }

    /// Rotation about the z axis followed by a translation.
    pub fn posed(&self, rotation_deg: f64, translation: Vec3) -> TriangleMesh {
        let (s, c) = rotation_deg.to_radians().sin_cos();
        let vertices = self
            .vertices
            .iter()
            .map(|v| [c * v[0] - s * v[1] + translation[0], s * v[0] + c * v[1] + translation[1], v[2] + translation[2]])
            .collect();
        TriangleMesh { vertices, triangles: self.triangles.clone(), material: self.material }
    }

    /// True when `p` lies inside a closed mesh (ray parity along a skewed axis).
    pub fn contains_point(&self, p: Vec3) -> bool {
        let dir = [1.0, 0.000_123_7, 0.000_071_3];
        let mut hits = 0;
        for t in &self.triangles {
            let (a, b, c) = (self.vertices[t[0] as usize], self.vertices[t[1] as usize], self.vertices[t[2] as usize]);
            if ray_hits_triangle(p, dir, a, b, c) {
                hits += 1;
            }
        }
        hits % 2 == 1
    }
}

fn ray_hits_triangle(o: Vec3, d: Vec3, a: Vec3, b: Vec3, c: Vec3) -> bool {
    use crate::geom::{cross3, dot3, sub3};
    let e1 = sub3(b, a);
    let e2 = sub3(c, a);
    let h = cross3(d, e2);
    let det = dot3(e1, h);
    if det.abs() < 1e-15 {
        return false;
    }
    let f = 1.0 / det;
    let s = sub3(o, a);
    let u = f * dot3(s, h);
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = cross3(s, e1);
    let v = f * dot3(d, q);
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    f * dot3(e2, q) > 1e-12
}

/// Maps profile coordinates to 3D at one station of a sweep.
type Station = Box<dyn Fn(Vec2) -> Vec3>;

fn triangulate(profile: &Profile2D) -> Result<Vec<[usize; 3]>, MeshError> {
    let rings: Vec<&Vec<Vec2>> = std::iter::once(&profile.outer).chain(profile.holes.iter()).collect();
    let longest = rings.iter().map(|r| r.len()).max().unwrap_or(0);
    // earcut occasionally drops a triangle next to a hole bridge; a different
    // ring start picks a different bridge
    for shift in 0..longest {
        if let Some(t) = triangulate_shifted(&rings, shift, profile.area()) {
            return Ok(t);
        }
    }
    triangulate_cdt(profile, &rings).ok_or(MeshError::Triangulation)
}

/// Constrained Delaunay fallback; keeps the faces inside the profile.
fn triangulate_cdt(profile: &Profile2D, rings: &[&Vec<Vec2>]) -> Option<Vec<[usize; 3]>> {
    use spade::handles::FixedVertexHandle;
    use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> = ConstrainedDelaunayTriangulation::new();
    let mut handles: Vec<FixedVertexHandle> = Vec::new();
    for p in rings.iter().flat_map(|r| r.iter()) {
        handles.push(cdt.insert(Point2::new(p.x, p.y)).ok()?);
    }
    if cdt.num_vertices() != handles.len() {
        return None;
    }
    let mut index = vec![0; handles.len()];
    for (i, h) in handles.iter().enumerate() {
        index[h.index()] = i;
    }
    let mut base = 0;
    for r in rings {
        let n = r.len();
        for i in 0..n {
            let (a, b) = (handles[base + i], handles[base + (i + 1) % n]);
            if !cdt.can_add_constraint(a, b) {
                return None;
            }
            cdt.add_constraint(a, b);
        }
        base += n;
    }
    let pts: Vec<Vec2> = rings.iter().flat_map(|r| r.iter()).copied().collect();
    let mut tris = Vec::new();
    for f in cdt.inner_faces() {
        let v = f.vertices().map(|v| index[v.fix().index()]);
        let c = (pts[v[0]] + pts[v[1]] + pts[v[2]]) * (1.0 / 3.0);
        if !crate::geom::point_in_polygon(c, &profile.outer) || profile.holes.iter().any(|h| crate::geom::point_in_polygon(c, h)) {
            continue;
        }
        let mut t = v;
        if (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]) < 0.0 {
            t.swap(1, 2);
        }
        tris.push(t);
    }
    let area2 = |t: &[usize; 3]| (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]);
    let total: f64 = tris.iter().map(|t| area2(t) / 2.0).sum();
    let area = profile.area();
    let ok = tris.iter().all(|t| area2(t) > 1e-12)
        && (total - area).abs() <= 1e-9 * area.abs().max(1.0)
        && cap_is_closed(&tris, rings);
    ok.then_some(tris)
}

fn triangulate_shifted(rings: &[&Vec<Vec2>], shift: usize, area: f64) -> Option<Vec<[usize; 3]>> {
    let mut flat = Vec::new();
    let mut holes = Vec::new();
    let mut map = Vec::new();
    let mut base = 0;
    for (k, r) in rings.iter().enumerate() {
        if k > 0 {
            holes.push(flat.len() / 2);
        }
        let n = r.len();
        for i in 0..n {
            let j = (i + shift) % n;
            flat.extend([r[j].x, r[j].y]);
            map.push(base + j);
        }
        base += n;
    }
    let idx = earcutr::earcut(&flat, &holes, 2).ok()?;
    let pts: Vec<Vec2> = rings.iter().flat_map(|r| r.iter()).copied().collect();
    let area2 = |t: &[usize; 3]| (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]);
    let mut tris: Vec<[usize; 3]> = idx.chunks(3).map(|t| [map[t[0]], map[t[1]], map[t[2]]]).collect();
    // earcut keeps one winding; take it from the non-degenerate majority
    let sense: f64 = tris.iter().map(area2).sum();
    if sense < 0.0 {
        for t in &mut tris {
            t.swap(1, 2);
        }
    }
    remove_slivers(&mut tris, &pts);
    let total: f64 = tris.iter().map(|t| area2(t) / 2.0).sum();
    if tris.iter().any(|t| area2(t) <= 1e-12) || (total - area).abs() > 1e-9 * area.abs().max(1.0) {
        return None;
    }
    cap_is_closed(&tris, rings).then_some(tris)
}

/// Ring edges used once, every other edge twice.
fn cap_is_closed(tris: &[[usize; 3]], rings: &[&Vec<Vec2>]) -> bool {
    let mut uses: HashMap<[usize; 2], u32> = HashMap::new();
    for t in tris {
        for r in 0..3 {
            let (a, b) = (t[r], t[(r + 1) % 3]);
            *uses.entry([a.min(b), a.max(b)]).or_default() += 1;
        }
    }
    let mut ring_edges = 0;
    let mut base = 0;
    for r in rings {
        let n = r.len();
        for i in 0..n {
            let (a, b) = (base + i, base + (i + 1) % n);
            if uses.get(&[a.min(b), a.max(b)]) != Some(&1) {
                return false;
            }
            ring_edges += 1;
        }
        base += n;
    }
    uses.values().filter(|&&u| u == 1).count() == ring_edges && uses.values().all(|&u| u <= 2)
}

/// Flips the long edge of each zero-area triangle with its neighbor.
fn remove_slivers(tris: &mut [[usize; 3]], pts: &[Vec2]) {
    let area2 = |t: &[usize; 3]| (pts[t[1]] - pts[t[0]]).cross(pts[t[2]] - pts[t[0]]);
    for _ in 0..tris.len() {
        let Some(ti) = tris.iter().position(|t| area2(t).abs() <= 1e-12) else { return };
        let t = tris[ti];
        // middle vertex b between a and c
        let Some((a, b, c)) = (0..3).map(|r| (t[r], t[(r + 1) % 3], t[(r + 2) % 3])).find(|&(a, b, c)| {
            (pts[b] - pts[a]).dot(pts[c] - pts[b]) >= 0.0
        }) else {
            return;
        };
        let Some(ni) = tris.iter().position(|n| (0..3).any(|r| n[r] == a && n[(r + 1) % 3] == c)) else { return };
        let n = tris[ni];
        let r = (0..3).find(|&r| n[r] == a).expect("shared vertex");
        let d = n[(r + 2) % 3];
        tris[ti] = [a, b, d];
        tris[ni] = [b, c, d];
    }
}

fn clean_profile(profile: &Profile2D) -> Result<Profile2D, MeshError> {
    let outer = dedup_ring(profile.outer.clone());
    let holes: Vec<Vec<Vec2>> = profile.holes.iter().map(|h| dedup_ring(h.clone())).collect();
    if outer.is_empty() || holes.iter().any(Vec::is_empty) {
        return Err(MeshError::InvalidProfile);
    }
    let p = Profile2D::new(outer, holes);
    if !p.is_valid() {
        return Err(MeshError::InvalidProfile);
    }
    Ok(p)
}

/// Lofts a profile through a sequence of stations and closes both ends.
fn sweep_stations(profile: &Profile2D, stations: &[Station], material: Material) -> Result<TriangleMesh, MeshError> {
    let p = clean_profile(profile)?;
    let caps = triangulate(&p)?;
    let rings: Vec<&Vec<Vec2>> = std::iter::once(&p.outer).chain(p.holes.iter()).collect();
    let per: usize = rings.iter().map(|r| r.len()).sum();
    let mut m = TriangleMesh::new(material);
    for st in stations {
        for r in &rings {
            for &q in r.iter() {
                m.vertices.push(st(q));
            }
        }
    }
    let last = (stations.len() - 1) * per;
    for t in &caps {
        m.triangles.push([t[0] as u32, t[2] as u32, t[1] as u32]);
        m.triangles.push([(last + t[0]) as u32, (last + t[1]) as u32, (last + t[2]) as u32]);
    }
    for k in 0..stations.len() - 1 {
        let (s0, s1) = (k * per, (k + 1) * per);
        let mut off = 0;
        for r in &rings {
            let n = r.len();
            for i in 0..n {
                let (a, b) = (off + i, off + (i + 1) % n);
                m.triangles.push([(s0 + a) as u32, (s0 + b) as u32, (s1 + b) as u32]);
                m.triangles.push([(s0 + a) as u32, (s1 + b) as u32, (s1 + a) as u32]);
            }
            off += n;
        }
    }
    if m.signed_volume() < 0.0 {
        m.flip();
    }
    Ok(m)
}

pub fn extrude_between(profile: &Profile2D, z0: f64, z1: f64, material: Material) -> Result<TriangleMesh, MeshError> {
    if !(z1 - z0 > 0.0) {
        return Err(MeshError::NonPositiveHeight(z1 - z0));
    }
    let stations: Vec<Station> = vec![Box::new(move |q: Vec2| [q.x, q.y, z0]), Box::new(move |q: Vec2| [q.x, q.y, z1])];
    sweep_stations(profile, &stations, material)
}

/// Prism of `profile` from z = 0 to `height_mm`.
pub fn extrude_polygon(profile: &Profile2D, height_mm: f64) -> Result<TriangleMesh, MeshError> {
    extrude_between(profile, 0.0, height_mm, Material::Pla)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SweepPath {
    Polyline(Vec<Vec3>),
    /// Profile x runs radially outward and y along the axis (+z).
    Helix { center: Vec2, z0: f64, radius: f64, pitch: f64, turns: f64 },
}

/// Sweeps a profile along a path. Polyline paths produce one closed shell
/// per segment; the profile's x axis stays horizontal.
pub fn sweep_profile(profile: &Profile2D, path: &SweepPath) -> Result<TriangleMesh, MeshError> {
    sweep_with(profile, path, Material::Pla)
}

pub fn sweep_with(profile: &Profile2D, path: &SweepPath, material: Material) -> Result<TriangleMesh, MeshError> {
    use crate::geom::{add3, dot3, norm3, scale3, sub3};
    match path {
        SweepPath::Polyline(pts) => {
            let segs: Vec<(Vec3, Vec3)> =
                pts.windows(2).map(|w| (w[0], w[1])).filter(|(a, b)| norm3(sub3(*b, *a)) > 1e-12).collect();
            if segs.is_empty() {
                return Err(MeshError::ZeroLengthPath);
            }
            let mut out = TriangleMesh::new(material);
            for (i, &(a, b)) in segs.iter().enumerate() {
                let d = sub3(b, a);
                if i > 0 {
                    let pd = sub3(segs[i - 1].1, segs[i - 1].0);
                    if dot3(d, pd) / (norm3(d) * norm3(pd)) < -1.0 + 1e-9 {
                        return Err(MeshError::SelfIntersectingSweep(i));
                    }
                }
                let (u, v) = beam_frame(d);
                let st = |base: Vec3| -> Station { Box::new(move |q: Vec2| add3(add3(base, scale3(u, q.x)), scale3(v, q.y))) };
                let shell = sweep_stations(profile, &[st(a), st(b)], material)?;
                out.append(&shell);
            }
            Ok(out)
        }
        &SweepPath::Helix { center, z0, radius, pitch, turns } => {
            if !(turns > 0.0) {
                return Err(MeshError::CoilTurns);
            }
            let ys: Vec<f64> = profile.outer.iter().map(|q| q.y).collect();
            let span = ys.iter().cloned().fold(f64::MIN, f64::max) - ys.iter().cloned().fold(f64::MAX, f64::min);
            if pitch < span - 1e-12 {
                return Err(MeshError::CoilPitch { pitch, wire: span });
            }
            if profile.outer.iter().any(|q| radius + q.x <= 0.0) {
                return Err(MeshError::InvalidProfile);
            }
            let steps = ((SEGMENTS_PER_TURN as f64) * turns).ceil().max(1.0) as usize;
            let stations: Vec<Station> = (0..=steps)
                .map(|k| {
                    let t = turns * k as f64 / steps as f64;
                    let (s, c) = (std::f64::consts::TAU * t).sin_cos();
                    let zc = z0 + pitch * t;
                    Box::new(move |q: Vec2| {
                        let r = radius + q.x;
                        [center.x + r * c, center.y + r * s, zc + q.y]
                    }) as Station
                })
                .collect();
            sweep_stations(profile, &stations, material)
        }
    }
}

/// Square-wire coil with flat annular end pads; the bottom pad starts at `z0`
/// and the top pad ends at `z0 + free height`.
pub fn helix_spring_mesh(
    center: Vec2,
    z0: f64,
    mean_diameter: f64,
    wire: f64,
    pitch: f64,
    turns: u32,
    material: Material,
) -> Result<TriangleMesh, MeshError> {
    if turns == 0 {
        return Err(MeshError::CoilTurns);
    }
    if pitch < wire {
        return Err(MeshError::CoilPitch { pitch, wire });
    }
    let h = wire / 2.0;
    let square = Profile2D::rect(crate::geom::Rect::new(-h, -h, h, h));
    let r = mean_diameter / 2.0;
    let mut m = sweep_with(
        &square,
        &SweepPath::Helix { center, z0: z0 + wire, radius: r, pitch, turns: f64::from(turns) },
        material,
    )?;
    let ring = Profile2D::new(
        crate::geom::circle(center, r + h, SEGMENTS_PER_TURN),
        vec![crate::geom::circle(center, r - h, SEGMENTS_PER_TURN)],
    );
    let top = z0 + crate::parts::coil_free_height(wire, pitch, turns);
    m.append(&extrude_between(&ring, z0, z0 + wire, material)?);
    m.append(&extrude_between(&ring, top - wire, top, material)?);
    Ok(m)
}

pub fn box_mesh(min: Vec3, max: Vec3, material: Material) -> TriangleMesh {
    let v = |i: usize| [if i & 1 == 0 { min[0] } else { max[0] }, if i & 2 == 0 { min[1] } else { max[1] }, if i & 4 == 0 { min[2] } else { max[2] }];
    let vertices = (0..8).map(v).collect();
    let triangles = vec![
        [0, 2, 3], [0, 3, 1], // bottom
        [4, 5, 7], [4, 7, 6], // top
        [0, 1, 5], [0, 5, 4], // front
        [2, 6, 7], [2, 7, 3], // back
        [0, 4, 6], [0, 6, 2], // left
        [1, 3, 7], [1, 7, 5], // right
    ];
    TriangleMesh { vertices, triangles, material }
}

/// Truncated cone standing on `z0`.
pub fn frustum_mesh(center: Vec2, z0: f64, r0: f64, r1: f64, height: f64, material: Material) -> TriangleMesh {
    let n = SEGMENTS_PER_TURN;
    let mut m = TriangleMesh::new(material);
    for (r, z) in [(r0, z0), (r1, z0 + height)] {
        for p in crate::geom::circle(center, r, n) {
            m.vertices.push([p.x, p.y, z]);
        }
    }
    for i in 1..n - 1 {
        m.triangles.push([0, (i + 1) as u32, i as u32]);
        m.triangles.push([n as u32, (n + i) as u32, (n + i + 1) as u32]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        m.triangles.push([i as u32, j as u32, (n + j) as u32]);
        m.triangles.push([i as u32, (n + j) as u32, (n + i) as u32]);
    }
    m
}

/// Mesh of a part-library solid in its local frame.
pub fn mesh_solid(solid: &Solid, material: Material) -> Result<TriangleMesh, MeshError> {
    match solid {
        Solid::Block { min, max } => Ok(box_mesh(*min, *max, material)),
        Solid::Prism { profile, z0, height } => extrude_between(profile, *z0, z0 + height, material),
        Solid::Beam { root, direction, length, width, thickness } => {
            use crate::geom::{add3, norm3, scale3};
            let d = scale3(*direction, length / norm3(*direction));
            let prof = Profile2D::rect(crate::geom::Rect::new(-width / 2.0, -thickness / 2.0, width / 2.0, thickness / 2.0));
            sweep_with(&prof, &SweepPath::Polyline(vec![*root, add3(*root, d)]), material)
        }
        Solid::Coil { center, z0, mean_diameter, wire, pitch, turns } => {
            helix_spring_mesh(*center, *z0, *mean_diameter, *wire, *pitch, *turns, material)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WatertightReport {
    pub triangles: usize,
    pub manifold: bool,
    pub oriented: bool,
    pub boundary_edges: Vec<[u32; 2]>,
    pub nonmanifold_edges: Vec<[u32; 2]>,
    /// Edges used twice in the same direction.
    pub misoriented_edges: Vec<[u32; 2]>,
    pub degenerate_triangles: usize,
    pub signed_volume: f64,
}

impl WatertightReport {
    pub fn watertight(&self) -> bool {
        self.manifold && self.oriented && self.degenerate_triangles == 0 && (self.triangles == 0 || self.signed_volume > 0.0)
    }
}

/// Edge-use census plus divergence-theorem volume.
pub fn check_watertight(m: &TriangleMesh) -> WatertightReport {
    let mut census: HashMap<[u32; 2], (u32, u32)> = HashMap::new();
    let mut degenerate = 0;
    for t in &m.triangles {
        let (a, b, c) = (m.vertices[t[0] as usize], m.vertices[t[1] as usize], m.vertices[t[2] as usize]);
        let n = crate::geom::cross3(crate::geom::sub3(b, a), crate::geom::sub3(c, a));
        if crate::geom::norm3(n) < 1e-12 {
            degenerate += 1;
        }
        for (x, y) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            let e = census.entry([x.min(y), x.max(y)]).or_default();
            if x < y {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut boundary = Vec::new();
    let mut nonmanifold = Vec::new();
    let mut misoriented = Vec::new();
    for (e, (f, b)) in &census {
        match f + b {
            1 => boundary.push(*e),
            2 if *f != 1 => misoriented.push(*e),
            2 => {}
            _ => nonmanifold.push(*e),
        }
    }
    boundary.sort_unstable();
    nonmanifold.sort_unstable();
    misoriented.sort_unstable();
    WatertightReport {
        triangles: m.triangles.len(),
        manifold: boundary.is_empty() && nonmanifold.is_empty(),
        oriented: misoriented.is_empty(),
        boundary_edges: boundary,
        nonmanifold_edges: nonmanifold,
        misoriented_edges: misoriented,
        degenerate_triangles: degenerate,
        signed_volume: m.signed_volume(),
    }
}

pub fn stl_bytes(m: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(STL_HEADER_BYTES + 4 + STL_TRIANGLE_BYTES * m.triangles.len());
    let mut header = [0u8; STL_HEADER_BYTES];
    header[..STL_HEADER.len()].copy_from_slice(STL_HEADER);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(m.triangles.len() as u32).to_le_bytes());
    for t in &m.triangles {
        let (a, b, c) = (m.vertices[t[0] as usize], m.vertices[t[1] as usize], m.vertices[t[2] as usize]);
        let n = crate::geom::cross3(crate::geom::sub3(b, a), crate::geom::sub3(c, a));
        let len = crate::geom::norm3(n);
        let n = if len > 0.0 { crate::geom::scale3(n, 1.0 / len) } else { [0.0; 3] };
        for v in [n, a, b, c] {
            for x in v {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

/// Writes binary STL and returns the byte count.
pub fn write_stl(m: &TriangleMesh, destination: &Path) -> std::io::Result<usize> {
    let bytes = stl_bytes(m);
    let mut f = std::fs::File::create(destination)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    Ok(bytes.len())
}

/// Triangles of a binary STL as vertex triples; facet normals are ignored.
pub fn read_stl(bytes: &[u8]) -> Result<Vec<[[f32; 3]; 3]>, MeshError> {
    if bytes.len() < STL_HEADER_BYTES + 4 {
        return Err(MeshError::MalformedStl(format!("{} bytes is shorter than the header", bytes.len())));
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let want = STL_HEADER_BYTES + 4 + n * STL_TRIANGLE_BYTES;
    if bytes.len() != want {
        return Err(MeshError::MalformedStl(format!("expected {want} bytes for {n} triangles, found {}", bytes.len())));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    Ok((0..n)
        .map(|i| {
            let base = 84 + i * STL_TRIANGLE_BYTES + 12;
            let mut tri = [[0f32; 3]; 3];
            for (k, v) in tri.iter_mut().enumerate() {
                for (j, x) in v.iter_mut().enumerate() {
                    *x = f(base + 12 * k + 4 * j);
                }
            }
            tri
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;
    use proptest::prelude::*;

    fn unit_cube() -> TriangleMesh {
        box_mesh([0.0; 3], [1.0; 3], Material::Pla)
    }

    #[test]
    fn cube_census() {
        let r = check_watertight(&unit_cube());
        assert!(r.watertight());
        assert!((r.signed_volume - 1.0).abs() < 1e-12);
        let mut open = unit_cube();
        open.triangles.truncate(10);
        assert_eq!(check_watertight(&open).boundary_edges.len(), 4);
        let mut inv = unit_cube();
        inv.flip();
        let r = check_watertight(&inv);
        assert!(r.manifold && r.oriented);
        assert!((r.signed_volume + 1.0).abs() < 1e-12);
        assert!(!r.watertight());
    }

    #[test]
    fn extrusions() {
        let sq = Profile2D::rect(Rect::new(0.0, 0.0, 1.0, 1.0));
        let m = extrude_polygon(&sq, 1.0).unwrap();
        assert_eq!(m.triangles.len(), 12);
        assert!((m.signed_volume() - 1.0).abs() < 1e-12);
        let holed = Profile2D::new(Rect::new(0.0, 0.0, 10.0, 10.0).corners(), vec![Rect::new(3.0, 3.0, 7.0, 7.0).corners()]);
        let m = extrude_polygon(&holed, 2.0).unwrap();
        assert!((m.signed_volume() - 168.0).abs() < 1e-9);
        assert!(check_watertight(&m).watertight());
        let bowtie = Profile2D { outer: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)], holes: vec![] };
        assert_eq!(extrude_polygon(&bowtie, 1.0), Err(MeshError::InvalidProfile));
        assert!(extrude_polygon(&sq, 0.0).is_err());
    }

    #[test]
    fn inclined_cantilever_sweep() {
        let t = crate::parts::effective_spring_thickness(3).unwrap();
        let prof = Profile2D::rect(Rect::new(-4.0, -t / 2.0, 4.0, t / 2.0));
        let s = 45f64.to_radians().sin() * 12.0;
        let m = sweep_profile(&prof, &SweepPath::Polyline(vec![[0.0; 3], [0.0, s, s]])).unwrap();
        assert!((m.signed_volume() - 8.0 * t * 12.0).abs() < 1e-9);
        assert!((m.signed_volume() - 81.46).abs() < 0.01);
        assert!(check_watertight(&m).watertight());
        let straight = sweep_profile(&prof, &SweepPath::Polyline(vec![[0.0; 3], [0.0, 0.0, 5.0]])).unwrap();
        let ext = extrude_polygon(&prof, 5.0).unwrap();
        assert!((straight.signed_volume() - ext.signed_volume()).abs() < 1e-12);
        assert_eq!(sweep_profile(&prof, &SweepPath::Polyline(vec![[1.0; 3], [1.0; 3]])), Err(MeshError::ZeroLengthPath));
    }

    #[test]
    fn coil() {
        let m = helix_spring_mesh(Vec2::new(0.0, 0.0), 0.0, 10.0, 1.2, 3.0, 4, Material::Pla).unwrap();
        let rep = check_watertight(&m);
        assert!(rep.manifold && rep.oriented && rep.degenerate_triangles == 0);
        let bb = m.aabb().unwrap();
        assert!((bb.max[2] - bb.min[2] - crate::parts::coil_free_height(1.2, 3.0, 4)).abs() < 1e-9);
        // wire shell alone against cross-section x arc length
        let wire = sweep_with(
            &Profile2D::rect(Rect::new(-0.6, -0.6, 0.6, 0.6)),
            &SweepPath::Helix { center: Vec2::new(0.0, 0.0), z0: 1.2, radius: 5.0, pitch: 3.0, turns: 4.0 },
            Material::Pla,
        )
        .unwrap();
        let oracle = 1.44 * 4.0 * ((std::f64::consts::PI * 10.0).powi(2) + 9.0).sqrt();
        assert!((wire.signed_volume() - oracle).abs() / oracle < 0.02);
        assert_eq!(
            helix_spring_mesh(Vec2::new(0.0, 0.0), 0.0, 10.0, 1.6, 1.5, 4, Material::Pla),
            Err(MeshError::CoilPitch { pitch: 1.5, wire: 1.6 })
        );
    }

    #[test]
    fn analog_presets_are_watertight() {
        for travel in [3.6, 8.64, 13.72] {
            for wire in [1.2, 1.6] {
                let pitch = wire + travel / 4.0;
                let m = helix_spring_mesh(Vec2::new(1.0, 2.0), 1.0, 10.0, wire, pitch, 4, Material::Pla).unwrap();
                let r = check_watertight(&m);
                assert!(r.manifold && r.oriented && r.signed_volume > 0.0);
                let bb = m.aabb().unwrap();
                // free height minus the solid height is the travel
                assert!((bb.max[2] - bb.min[2] - (4.0 * wire + 2.0 * wire) - travel).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stl_sizes_and_round_trip() {
        assert_eq!(stl_bytes(&TriangleMesh::new(Material::Pla)).len(), 84);
        let mut one = TriangleMesh::new(Material::Pla);
        one.vertices = vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        one.triangles = vec![[0, 1, 2]];
        assert_eq!(stl_bytes(&one).len(), 134);
        let cube = unit_cube().posed(30.0, [1.25, -3.5, 0.1]);
        let bytes = stl_bytes(&cube);
        assert_eq!(bytes.len(), 684);
        let tris = read_stl(&bytes).unwrap();
        assert_eq!(tris.len(), 12);
        for (t, idx) in tris.iter().zip(&cube.triangles) {
            for k in 0..3 {
                let v = cube.vertices[idx[k] as usize];
                assert_eq!(t[k], [v[0] as f32, v[1] as f32, v[2] as f32]);
            }
        }
        assert!(read_stl(&bytes[..100]).is_err());
    }

    #[test]
    fn pose_rotates_about_z() {
        let m = unit_cube();
        let p = m.posed(37.0, [0.0; 3]);
        let (s, c) = 37f64.to_radians().sin_cos();
        for (a, b) in m.vertices.iter().zip(&p.vertices) {
            assert!((b[0] - (c * a[0] - s * a[1])).abs() < 1e-9);
            assert!((b[1] - (s * a[0] + c * a[1])).abs() < 1e-9);
        }
        assert!(p.contains_point([0.0, 0.7, 0.5]));
        assert!(!p.contains_point([2.0, 0.0, 0.5]));
    }

    fn star(n: usize, r0: f64, r1: f64) -> Vec<Vec2> {
        (0..2 * n)
            .map(|i| {
                let a = std::f64::consts::PI * i as f64 / n as f64;
                let r = if i % 2 == 0 { r1 } else { r0 };
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect()
    }

    #[test]
    fn holed_triangle_star_cap_is_closed() {
        for (n, r0, dr) in [(3, 3.1689886451197236, 0.1), (6, 1.59745934976712, 0.28117086430213134)] {
            let prof = Profile2D::new(star(n, r0, r0 + dr), vec![crate::geom::circle(Vec2::new(0.0, 0.0), r0 * 0.5, 12)]);
            let e = extrude_polygon(&prof, 0.1).unwrap();
            assert!(check_watertight(&e).watertight(), "n = {n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn extrude_and_sweep_volumes(
            n in 3usize..12, r0 in 0.5f64..4.0, dr in 0.1f64..5.0, h in 0.1f64..20.0,
            dx in -10.0f64..10.0, dy in -10.0f64..10.0, dz in 0.5f64..10.0, hole in proptest::bool::ANY,
        ) {
            let outer = star(n, r0, r0 + dr);
            let holes = if hole { vec![crate::geom::circle(Vec2::new(0.0, 0.0), r0 * 0.5, 12)] } else { vec![] };
            let prof = Profile2D::new(outer, holes);
            let area = prof.area();
            let e = extrude_polygon(&prof, h).unwrap();
            prop_assert!((e.signed_volume() - area * h).abs() <= 1e-3 * area * h);
            prop_assert!(check_watertight(&e).watertight());
            let len = (dx * dx + dy * dy + dz * dz).sqrt();
            let s = sweep_profile(&prof, &SweepPath::Polyline(vec![[1.0, 2.0, 3.0], [1.0 + dx, 2.0 + dy, 3.0 + dz]])).unwrap();
            prop_assert!((s.signed_volume() - area * len).abs() <= 1e-3 * area * len);
            prop_assert!(check_watertight(&s).watertight());
        }
    }
}
