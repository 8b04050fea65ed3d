//! Planar geometry helpers shared by placement, routing and mesh generation.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

pub const EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise rotation about the origin.
    pub fn rotated_deg(self, deg: f64) -> Vec2 {
        let (s, c) = deg.to_radians().sin_cos();
        Vec2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            min: Vec2::new(x0.min(x1), y0.min(y1)),
            max: Vec2::new(x0.max(x1), y0.max(y1)),
        }
    }

    pub fn centered(c: Vec2, w: f64, h: f64) -> Self {
        Self::new(c.x - w / 2.0, c.y - h / 2.0, c.x + w / 2.0, c.y + h / 2.0)
    }

    pub fn from_points(pts: &[Vec2]) -> Option<Self> {
        let first = *pts.first()?;
        let mut r = Rect { min: first, max: first };
        for p in &pts[1..] {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        Some(r)
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn expand(&self, d: f64) -> Rect {
        Rect {
            min: Vec2::new(self.min.x - d, self.min.y - d),
            max: Vec2::new(self.max.x + d, self.max.y + d),
        }
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min: Vec2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Vec2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    /// True when the interiors overlap with positive area.
    pub fn overlaps(&self, o: &Rect) -> bool {
        self.min.x < o.max.x - EPS
            && o.min.x < self.max.x - EPS
            && self.min.y < o.max.y - EPS
            && o.min.y < self.max.y - EPS
    }

    pub fn contains_point(&self, p: Vec2) -> bool {
        p.x >= self.min.x - EPS
            && p.x <= self.max.x + EPS
            && p.y >= self.min.y - EPS
            && p.y <= self.max.y + EPS
    }

    pub fn distance(&self, o: &Rect) -> f64 {
        let dx = (o.min.x - self.max.x).max(self.min.x - o.max.x).max(0.0);
        let dy = (o.min.y - self.max.y).max(self.min.y - o.max.y).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// Corners in counterclockwise order starting at `min`.
    pub fn corners(&self) -> Vec<Vec2> {
        vec![
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }
}

/// Shoelace area; positive for counterclockwise rings.
pub fn signed_area(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| poly[i].cross(poly[(i + 1) % n]))
        .sum::<f64>()
        * 0.5
}

pub fn ensure_ccw(mut poly: Vec<Vec2>) -> Vec<Vec2> {
    if signed_area(&poly) < 0.0 {
        poly.reverse();
    }
    poly
}

/// Andrew's monotone chain; counterclockwise, collinear points dropped.
pub fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| (a.x - b.x).abs() < EPS && (a.y - b.y).abs() < EPS);
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= EPS {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Even-odd point containment; points on the boundary count as inside.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        if point_segment_distance(p, poly[i], poly[(i + 1) % n]) < 1e-7 {
            return true;
        }
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 < 1e-24 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    (b - a).cross(c - a)
}

/// Closed-segment intersection test (touching counts).
pub fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = orient(c, d, a);
    let d2 = orient(c, d, b);
    let d3 = orient(a, b, c);
    let d4 = orient(a, b, d);
    if ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS))
        && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
    {
        return true;
    }
    point_segment_distance(a, c, d) < EPS
        || point_segment_distance(b, c, d) < EPS
        || point_segment_distance(c, a, b) < EPS
        || point_segment_distance(d, a, b) < EPS
}

pub fn segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Minimum distance between two filled simple polygons (0 when they touch or overlap).
pub fn polygon_distance(p: &[Vec2], q: &[Vec2]) -> f64 {
    if p.iter().any(|&v| point_in_polygon(v, q)) || q.iter().any(|&v| point_in_polygon(v, p)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        let (a, b) = (p[i], p[(i + 1) % p.len()]);
        for j in 0..q.len() {
            let d = segment_distance(a, b, q[j], q[(j + 1) % q.len()]);
            if d < best {
                best = d;
                if best == 0.0 {
                    return 0.0;
                }
            }
        }
    }
    best
}

/// Separating-axis test for two convex polygons; true only for overlap of positive area.
pub fn convex_overlap(p: &[Vec2], q: &[Vec2]) -> bool {
    for poly in [p, q] {
        for i in 0..poly.len() {
            let edge = poly[(i + 1) % poly.len()] - poly[i];
            let axis = edge.perp();
            let len = axis.norm();
            if len < EPS {
                continue;
            }
            let axis = axis * (1.0 / len);
            let (pmin, pmax) = project(p, axis);
            let (qmin, qmax) = project(q, axis);
            if pmax <= qmin + 1e-7 || qmax <= pmin + 1e-7 {
                return false;
            }
        }
    }
    true
}

fn project(poly: &[Vec2], axis: Vec2) -> (f64, f64) {
    poly.iter()
        .map(|v| v.dot(axis))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
            (lo.min(x), hi.max(x))
        })
}

/// Sutherland-Hodgman clip of `subject` against a counterclockwise convex `clip`.
pub fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        let inside = |p: Vec2| orient(a, b, p) >= -EPS;
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (ci, pi) = (inside(cur), inside(prev));
            if ci {
                if !pi {
                    out.push(line_intersection(prev, cur, a, b));
                }
                out.push(cur);
            } else if pi {
                out.push(line_intersection(prev, cur, a, b));
            }
        }
    }
    dedup_ring(out)
}

fn line_intersection(p: Vec2, q: Vec2, a: Vec2, b: Vec2) -> Vec2 {
    let r = q - p;
    let s = b - a;
    let denom = r.cross(s);
    if denom.abs() < 1e-18 {
        return q;
    }
    let t = (a - p).cross(s) / denom;
    p + r * t
}

/// Drop repeated and collinear vertices from a ring.
pub fn dedup_ring(ring: Vec<Vec2>) -> Vec<Vec2> {
    let mut pts: Vec<Vec2> = Vec::with_capacity(ring.len());
    for p in ring {
        if pts.last().is_none_or(|q: &Vec2| q.dist(p) > 1e-9) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) <= 1e-9 {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        for i in 0..pts.len() {
            let n = pts.len();
            let (a, b, c) = (pts[(i + n - 1) % n], pts[i], pts[(i + 1) % n]);
            if orient(a, b, c).abs() < 1e-12 {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    if pts.len() < 3 {
        pts.clear();
    }
    pts
}

/// True when no two non-adjacent edges of the ring touch.
pub fn is_simple(ring: &[Vec2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a.dist(b) < EPS {
            return false;
        }
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_intersect(a, b, ring[j], ring[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Regular polygon approximating a circle, counterclockwise.
pub fn circle(center: Vec2, radius: f64, segments: usize) -> Vec<Vec2> {
    (0..segments)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / segments as f64;
            center + Vec2::new(a.cos(), a.sin()) * radius
        })
        .collect()
}

/// Rectangle covering the segment `a..b` widened by `half` on every side.
pub fn segment_rect(a: Vec2, b: Vec2, half: f64) -> Rect {
    Rect::new(a.x, a.y, b.x, b.y).expand(half)
}

pub type Vec3 = [f64; 3];

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn dot3(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm3(a: Vec3) -> f64 {
    dot3(a, a).sqrt()
}

/// Axis-aligned box in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Option<Aabb> {
        let mut it = pts.into_iter();
        let first = *it.next()?;
        let mut b = Aabb { min: first, max: first };
        for p in it {
            for i in 0..3 {
                b.min[i] = b.min[i].min(p[i]);
                b.max[i] = b.max[i].max(p[i]);
            }
        }
        Some(b)
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        let mut b = *self;
        for i in 0..3 {
            b.min[i] = b.min[i].min(o.min[i]);
            b.max[i] = b.max[i].max(o.max[i]);
        }
        b
    }

    /// Intersection box when the overlap has positive volume.
    pub fn overlap(&self, o: &Aabb) -> Option<Aabb> {
        let mut b = *self;
        for i in 0..3 {
            b.min[i] = self.min[i].max(o.min[i]);
            b.max[i] = self.max[i].min(o.max[i]);
            if b.max[i] - b.min[i] <= 1e-9 {
                return None;
            }
        }
        Some(b)
    }

    /// True when the boxes overlap or share a face, edge or corner.
    pub fn touches(&self, o: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= o.max[i] + 1e-9 && o.min[i] <= self.max[i] + 1e-9)
    }

    pub fn contains(&self, o: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| o.min[i] >= self.min[i] - tol && o.max[i] <= self.max[i] + tol)
    }
}

/// Planar region: counterclockwise outer ring with clockwise holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile2D {
    pub outer: Vec<Vec2>,
    pub holes: Vec<Vec<Vec2>>,
}

impl Profile2D {
    /// Normalizes winding (outer counterclockwise, holes clockwise).
    pub fn new(outer: Vec<Vec2>, holes: Vec<Vec<Vec2>>) -> Self {
        let outer = ensure_ccw(outer);
        let holes = holes
            .into_iter()
            .map(|h| {
                let mut h = ensure_ccw(h);
                h.reverse();
                h
            })
            .collect();
        Self { outer, holes }
    }

    pub fn simple(outer: Vec<Vec2>) -> Self {
        Self::new(outer, Vec::new())
    }

    pub fn rect(r: Rect) -> Self {
        Self::simple(r.corners())
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }

    /// Rings are simple, holes lie strictly inside the outer ring and do not
    /// touch each other.
    pub fn is_valid(&self) -> bool {
        if !is_simple(&self.outer) || self.holes.iter().any(|h| !is_simple(h)) {
            return false;
        }
        let rings: Vec<&Vec<Vec2>> = std::iter::once(&self.outer).chain(self.holes.iter()).collect();
        for i in 0..rings.len() {
            for j in (i + 1)..rings.len() {
                let (a, b) = (rings[i], rings[j]);
                for k in 0..a.len() {
                    for l in 0..b.len() {
                        if segments_intersect(a[k], a[(k + 1) % a.len()], b[l], b[(l + 1) % b.len()]) {
                            return false;
                        }
                    }
                }
            }
        }
        self.holes.iter().all(|h| h.iter().all(|&p| point_in_polygon(p, &self.outer)))
            && self.holes.iter().enumerate().all(|(i, h)| {
                self.holes
                    .iter()
                    .enumerate()
                    .all(|(j, g)| i == j || !point_in_polygon(h[0], g))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hull_of_square_with_interior_point() {
        let pts = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!((signed_area(&h) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn bow_tie_is_not_simple() {
        let bow = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bow));
        assert!(is_simple(&Rect::new(0.0, 0.0, 1.0, 1.0).corners()));
    }

    #[test]
    fn touching_squares_do_not_overlap() {
        let a = Rect::new(0.0, 0.0, 1.0, 1.0).corners();
        let b = Rect::new(1.0, 0.0, 2.0, 1.0).corners();
        assert!(!convex_overlap(&a, &b));
        assert_eq!(polygon_distance(&a, &b), 0.0);
        let c = Rect::new(3.0, 0.0, 4.0, 1.0).corners();
        assert!((polygon_distance(&a, &c) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn clip_square_by_triangle() {
        let sq = Rect::new(0.0, 0.0, 2.0, 2.0).corners();
        let tri = vec![Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0), Vec2::new(0.0, 4.0)];
        let c = clip_convex(&sq, &tri);
        assert!((signed_area(&c) - 4.0).abs() < 1e-12);
        let tri2 = vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 2.0)];
        let c2 = clip_convex(&sq, &tri2);
        assert!((signed_area(&c2) - 2.0).abs() < 1e-12);
    }
}
