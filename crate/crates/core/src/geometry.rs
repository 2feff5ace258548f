//! Planar geometry on the layout (x, z) plane.
//!
//! Everything here is a pure function of immutable values. The vertical axis
//! is carried in poses elsewhere but never enters these predicates.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Overlap depths at or below this are treated as touching, not overlapping.
pub const CONTACT_EPS: f64 = 1e-12;

/// Boundary tolerance for containment tests.
const BOUNDARY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub z: f64,
}

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, z: 0.0 };

    pub const fn new(x: f64, z: f64) -> Self {
        Self { x, z }
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.z * other.z
    }

    /// 2D cross product `self × other`.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.z - self.z * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.z)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    /// Counter-clockwise rotation by `theta` radians.
    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(self.x * c - self.z * s, self.x * s + self.z * c)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, z): (f64, f64)) -> Self {
        Point2::new(x, z)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.z]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.z + rhs.z)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.z - rhs.z)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.z * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.z)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.z)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolygonError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFinite(usize),
    #[error("polygon has zero area")]
    Degenerate,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
}

/// Simple polygon stored counter-clockwise. The closing edge from the last
/// vertex back to the first is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Polygon {
    vertices: Vec<Point2>,
}

impl Polygon {
    /// Validates the ring and reorders it counter-clockwise if needed.
    pub fn new(mut vertices: Vec<Point2>) -> Result<Self, PolygonError> {
        if vertices.len() < 3 {
            return Err(PolygonError::TooFewVertices(vertices.len()));
        }
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(PolygonError::NonFinite(i));
        }
        let area = signed_area(&vertices);
        if area.abs() <= f64::EPSILON {
            return Err(PolygonError::Degenerate);
        }
        check_simple(&vertices)?;
        if area < 0.0 {
            vertices.reverse();
        }
        Ok(Self { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [z0, z1]`.
    pub fn rectangle(x0: f64, z0: f64, x1: f64, z1: f64) -> Result<Self, PolygonError> {
        Self::new(vec![
            Point2::new(x0, z0),
            Point2::new(x1, z0),
            Point2::new(x1, z1),
            Point2::new(x0, z1),
        ])
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edge `r` runs from vertex `r` to vertex `r + 1` (wrapping).
    pub fn edge(&self, r: usize) -> (Point2, Point2) {
        let n = self.vertices.len();
        (self.vertices[r % n], self.vertices[(r + 1) % n])
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        (0..self.vertices.len()).map(move |r| self.edge(r))
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// `(min, max)` corners of the bounding rectangle.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo.x = lo.x.min(v.x);
            lo.z = lo.z.min(v.z);
            hi.x = hi.x.max(v.x);
            hi.z = hi.z.max(v.z);
        }
        (lo, hi)
    }

    /// Unit normal of edge `r` pointing into the polygon.
    pub fn inward_normal(&self, r: usize) -> Point2 {
        let (a, b) = self.edge(r);
        let e = b - a;
        Point2::new(-e.z, e.x) * (1.0 / e.norm())
    }
}

impl TryFrom<Vec<[f64; 2]>> for Polygon {
    type Error = PolygonError;
    fn try_from(v: Vec<[f64; 2]>) -> Result<Self, Self::Error> {
        Polygon::new(v.into_iter().map(Point2::from).collect())
    }
}

impl From<Polygon> for Vec<[f64; 2]> {
    fn from(p: Polygon) -> Self {
        p.vertices.into_iter().map(Into::into).collect()
    }
}

fn signed_area(vs: &[Point2]) -> f64 {
    let n = vs.len();
    0.5 * (0..n).map(|i| vs[i].cross(vs[(i + 1) % n])).sum::<f64>()
}

fn check_simple(vs: &[Point2]) -> Result<(), PolygonError> {
    let n = vs.len();
    for i in 0..n {
        let (a, b) = (vs[i], vs[(i + 1) % n]);
        if a == b {
            return Err(PolygonError::SelfIntersecting(i, (i + 1) % n));
        }
        for j in (i + 1)..n {
            // adjacent edges share a vertex by construction
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (vs[j], vs[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return Err(PolygonError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = to_left(c, a, b);
    let d2 = to_left(d, a, b);
    let d3 = to_left(a, c, d);
    let d4 = to_left(b, c, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, a, b))
        || (d2 == 0.0 && on_segment(d, a, b))
        || (d3 == 0.0 && on_segment(a, c, d))
        || (d4 == 0.0 && on_segment(b, c, d))
}

fn on_segment(q: Point2, a: Point2, b: Point2) -> bool {
    q.x >= a.x.min(b.x) && q.x <= a.x.max(b.x) && q.z >= a.z.min(b.z) && q.z <= a.z.max(b.z)
}

/// Rectangle with its own heading. `theta` rotates the local x axis
/// counter-clockwise from world +x.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Point2,
    pub half_extents: (f64, f64),
    pub theta: f64,
}

impl OrientedBox {
    pub fn new(center: Point2, half_extents: (f64, f64), theta: f64) -> Self {
        debug_assert!(half_extents.0 > 0.0 && half_extents.1 > 0.0);
        Self {
            center,
            half_extents,
            theta: wrap_angle(theta),
        }
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_extents.0 * self.half_extents.1
    }

    /// Local x and z axes in world coordinates.
    pub fn axes(&self) -> [Point2; 2] {
        let (s, c) = self.theta.sin_cos();
        [Point2::new(c, s), Point2::new(-s, c)]
    }

    pub fn corners(&self) -> [Point2; 4] {
        box_corners(self)
    }

    fn projected_radius(&self, axis: Point2) -> f64 {
        let [u, v] = self.axes();
        self.half_extents.0 * u.dot(axis).abs() + self.half_extents.1 * v.dot(axis).abs()
    }
}

/// Signed doubled area of triangle `(a, b, q)`: `(b − a) × (q − a)`.
/// Positive iff `q` lies strictly left of the directed edge `a → b`.
pub fn to_left(q: Point2, a: Point2, b: Point2) -> f64 {
    (b.x - a.x) * (q.z - a.z) - (b.z - a.z) * (q.x - a.x)
}

pub fn t_right(q: Point2, a: Point2, b: Point2) -> f64 {
    (-to_left(q, a, b)).max(0.0)
}

pub fn t_left(q: Point2, a: Point2, b: Point2) -> f64 {
    to_left(q, a, b).max(0.0)
}

/// Corners in counter-clockwise order starting from local `(+hx, +hz)`.
pub fn box_corners(b: &OrientedBox) -> [Point2; 4] {
    let (hx, hz) = b.half_extents;
    [(hx, hz), (-hx, hz), (-hx, -hz), (hx, -hz)]
        .map(|(x, z)| b.center + Point2::new(x, z).rotate(b.theta))
}

/// Winding-number containment. Points on the boundary count as inside.
pub fn point_in_polygon(q: Point2, poly: &Polygon) -> bool {
    if poly
        .edges()
        .any(|(a, b)| nearest_on_segment(q, a, b).distance(q) <= BOUNDARY_EPS)
    {
        return true;
    }
    let mut winding = 0i32;
    for (a, b) in poly.edges() {
        if a.z <= q.z {
            if b.z > q.z && to_left(q, a, b) > 0.0 {
                winding += 1;
            }
        } else if b.z <= q.z && to_left(q, a, b) < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Closest point to `q` on segment `a b`.
pub fn nearest_on_segment(q: Point2, a: Point2, b: Point2) -> Point2 {
    let e = b - a;
    let len_sq = e.norm_sq();
    if len_sq == 0.0 {
        return a;
    }
    let t = ((q - a).dot(e) / len_sq).clamp(0.0, 1.0);
    a + e * t
}

/// Zero when `q` is inside `poly`; otherwise the displacement taking `q` to
/// the nearest point of the boundary.
pub fn boundary_violation(q: Point2, poly: &Polygon) -> Point2 {
    if point_in_polygon(q, poly) {
        return Point2::ZERO;
    }
    let mut best = Point2::ZERO;
    let mut best_d = f64::INFINITY;
    for (a, b) in poly.edges() {
        let p = nearest_on_segment(q, a, b);
        let d = p.distance(q);
        if d < best_d {
            best_d = d;
            best = p - q;
        }
    }
    best
}

/// Separating-axis test over the four box axes. Returns the minimum
/// translation that, applied to `a`, separates it from `b`.
pub fn box_overlap_mtv(a: &OrientedBox, b: &OrientedBox) -> Option<Point2> {
    let delta = b.center - a.center;
    let mut best: Option<(f64, Point2)> = None;
    for axis in a.axes().into_iter().chain(b.axes()) {
        let sep = delta.dot(axis);
        let overlap = a.projected_radius(axis) + b.projected_radius(axis) - sep.abs();
        if overlap <= CONTACT_EPS {
            return None;
        }
        if best.is_none_or(|(o, _)| overlap < o) {
            let dir = if sep > 0.0 { -axis } else { axis };
            best = Some((overlap, dir * overlap));
        }
    }
    best.map(|(_, m)| m)
}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Circular distance between two headings, in `[0, π]`.
pub fn ang_diff(theta: f64, theta_p: f64) -> f64 {
    let d = (theta - theta_p).abs() % TAU;
    d.min(TAU - d)
}

/// Shortest signed rotation taking `from` to `to`, in `(−π, π]`.
pub fn signed_angle_delta(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}
