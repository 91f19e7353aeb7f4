//! Axis-aligned polygonal domains, their corner data, and distance weights.
//!
//! Domains are simple closed polygons with axis-parallel edges, stored with
//! positive (counter-clockwise) orientation. Each vertex carries its interior
//! opening angle; a user-selected subset of vertices is flagged as the
//! singular set. The distance weight is the exact Euclidean distance to the
//! singular set clamped at one, which makes it smooth away from the singular
//! points, 1-Lipschitz below the clamp, and identically one on domains with
//! an empty singular set (the smooth control case).
//!
//! A degenerate "crack" is permitted: two consecutive edges may traverse the
//! same segment in opposite directions, producing an interior angle of `2π`
//! at the crack tip. Such a slit never carries a solver grid in this crate;
//! it exists so opening angles up to `2π` can be exercised.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Tolerance for "point lies exactly on an edge/vertex" decisions.
pub const ON_BOUNDARY_TOL: f64 = 1e-12;

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Classification of the ambient singular-set dimension: `0` for isolated
/// corner points of a polygon, `1` for the vertical edges of a prism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SingularDim {
    Point = 0,
    Edge = 1,
}

/// Simple closed axis-aligned polygon with positively oriented boundary,
/// per-vertex opening angles, and a flagged singular vertex subset.
#[derive(Debug, Clone)]
pub struct PolygonalDomain {
    vertices: Vec<Point2>,
    /// Interior opening angle at each vertex, in `(0, 2π]`.
    angles: Vec<f64>,
    /// Indices into `vertices` marking the singular set.
    singular: Vec<usize>,
    /// Dimension of the singular set pieces (always `Point` for polygons).
    delta: SingularDim,
}

impl PolygonalDomain {
    /// Builds a domain from a positively oriented, axis-aligned vertex loop.
    ///
    /// `singular` lists vertex indices forming the singular set. The loop is
    /// validated: at least four vertices, consecutive vertices differ in
    /// exactly one coordinate, no zero-length edges, positive signed area,
    /// and no improper self-intersections (exact back-and-forth crack pairs
    /// are the only allowed overlap).
    pub fn new(vertices: Vec<Point2>, singular: Vec<usize>) -> Result<Self> {
        let n = vertices.len();
        if n < 4 {
            return Err(Error::Parameter(format!(
                "polygon needs at least 4 vertices, got {n}"
            )));
        }
        for (i, (a, b)) in edge_pairs(&vertices).enumerate() {
            let dx = b.x - a.x;
            let dy = b.y - a.y;
            if dx == 0.0 && dy == 0.0 {
                return Err(Error::Parameter(format!("zero-length edge at vertex {i}")));
            }
            if dx != 0.0 && dy != 0.0 {
                return Err(Error::Parameter(format!(
                    "edge {i} is not axis-aligned: ({},{}) -> ({},{})",
                    a.x, a.y, b.x, b.y
                )));
            }
        }
        let area = signed_area(&vertices);
        if area <= 0.0 {
            return Err(Error::Parameter(format!(
                "polygon must be positively oriented (signed area {area})"
            )));
        }
        check_simple(&vertices)?;
        for &i in &singular {
            if i >= n {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    context: format!("singular vertex index (polygon has {n} vertices)"),
                });
            }
        }
        let angles = (0..n).map(|i| vertex_angle(&vertices, i)).collect();
        Ok(PolygonalDomain {
            vertices,
            angles,
            singular,
            delta: SingularDim::Point,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn singular_indices(&self) -> &[usize] {
        &self.singular
    }

    /// Coordinates of the singular vertices.
    pub fn singular_points(&self) -> Vec<Point2> {
        self.singular.iter().map(|&i| self.vertices[i]).collect()
    }

    pub fn delta(&self) -> SingularDim {
        self.delta
    }

    /// Interior opening angle at vertex `index`, in `(0, 2π]`.
    pub fn interior_angle(&self, index: usize) -> Result<f64> {
        self.angles.get(index).copied().ok_or(Error::IndexOutOfRange {
            index,
            context: format!("vertex index (polygon has {} vertices)", self.vertices.len()),
        })
    }

    /// Area enclosed by the boundary loop.
    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// True when `p` lies in the closed domain (interior or boundary).
    pub fn contains(&self, p: Point2) -> bool {
        self.on_boundary(p) || self.strictly_inside(p)
    }

    /// True when `p` lies on the boundary polyline within [`ON_BOUNDARY_TOL`].
    pub fn on_boundary(&self, p: Point2) -> bool {
        edge_pairs(&self.vertices).any(|(a, b)| on_segment(p, a, b, ON_BOUNDARY_TOL))
    }

    /// True when `p` lies strictly inside (even-odd rule; boundary excluded).
    pub fn strictly_inside(&self, p: Point2) -> bool {
        if self.on_boundary(p) {
            return false;
        }
        // Crossing count against vertical edges only: edges are axis-aligned,
        // so a horizontal ray can only cross vertical edges transversally.
        // Half-open convention in y avoids double counting shared endpoints.
        let mut crossings = 0usize;
        for (a, b) in edge_pairs(&self.vertices) {
            if a.x != b.x {
                continue; // horizontal edge, parallel to the ray
            }
            let (ylo, yhi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
            if p.y >= ylo && p.y < yhi && a.x > p.x {
                crossings += 1;
            }
        }
        crossings % 2 == 1
    }

    /// Distance from `p` to the singular set, clamped at one.
    ///
    /// Returns an error when `p` is outside the closed domain. On a domain
    /// with an empty singular set the weight is identically one.
    pub fn distance_weight(&self, p: Point2) -> Result<f64> {
        if !self.contains(p) {
            return Err(Error::OutsideDomain { x: p.x, y: p.y });
        }
        Ok(self.distance_weight_unchecked(p))
    }

    /// Same as [`distance_weight`](Self::distance_weight) without the
    /// membership check; used by quadrature loops that already know the point
    /// lies in a domain cell.
    pub fn distance_weight_unchecked(&self, p: Point2) -> f64 {
        let mut d = f64::INFINITY;
        for &i in &self.singular {
            d = d.min(p.dist(self.vertices[i]));
        }
        d.min(1.0)
    }
}

/// The L-shaped domain `(-1,1)^2` minus the closed lower-right quadrant
/// square, with the re-entrant corner at the origin flagged singular.
///
/// Vertices run counter-clockwise; the opening angle at the origin is
/// `3π/2` and the area is `3`.
pub fn make_l_shape() -> PolygonalDomain {
    let vertices = vec![
        Point2::new(-1.0, -1.0),
        Point2::new(0.0, -1.0),
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(-1.0, 1.0),
    ];
    PolygonalDomain::new(vertices, vec![2]).expect("l-shape is a valid polygon")
}

/// Unit square `(0,1)^2` with an empty singular set (smooth control domain).
pub fn make_unit_square() -> PolygonalDomain {
    let vertices = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(0.0, 1.0),
    ];
    PolygonalDomain::new(vertices, vec![]).expect("unit square is a valid polygon")
}

/// Square `(-1,1)^2` with an empty singular set. Shares its bounding box with
/// [`make_l_shape`], which makes it the natural control domain for gain runs.
pub fn make_square2() -> PolygonalDomain {
    let vertices = vec![
        Point2::new(-1.0, -1.0),
        Point2::new(1.0, -1.0),
        Point2::new(1.0, 1.0),
        Point2::new(-1.0, 1.0),
    ];
    PolygonalDomain::new(vertices, vec![]).expect("square is a valid polygon")
}

/// Square `(-1,1)^2` slit along the segment from the origin to `(1,0)`.
///
/// The crack tip at the origin has interior angle `2π`. The slit is traversed
/// twice in opposite directions, which the simplicity check recognizes as the
/// one permitted degeneracy.
pub fn make_slit_square() -> PolygonalDomain {
    let vertices = vec![
        Point2::new(-1.0, -1.0),
        Point2::new(1.0, -1.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(1.0, 1.0),
        Point2::new(-1.0, 1.0),
    ];
    PolygonalDomain::new(vertices, vec![3]).expect("slit square is a valid polygon")
}

/// Right prism over a polygonal base, used only for evaluating edge-distance
/// weights in three dimensions. The singular set consists of the vertical
/// edges above the base's singular vertices (`delta = 1`).
#[derive(Debug, Clone)]
pub struct PrismDomain {
    pub base: PolygonalDomain,
    pub z_min: f64,
    pub z_max: f64,
}

impl PrismDomain {
    pub fn new(base: PolygonalDomain, z_min: f64, z_max: f64) -> Result<Self> {
        if !(z_max > z_min) {
            return Err(Error::Parameter(format!(
                "prism needs z_max > z_min, got [{z_min}, {z_max}]"
            )));
        }
        Ok(PrismDomain { base, z_min, z_max })
    }

    pub fn delta(&self) -> SingularDim {
        SingularDim::Edge
    }

    /// True when `(x, y, z)` lies in the closed prism.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        z >= self.z_min - ON_BOUNDARY_TOL
            && z <= self.z_max + ON_BOUNDARY_TOL
            && self.base.contains(Point2::new(x, y))
    }

    /// Distance from `(x, y, z)` to the singular vertical edges, clamped at
    /// one. Errors when the point is outside the closed prism.
    pub fn distance_weight(&self, x: f64, y: f64, z: f64) -> Result<f64> {
        if !self.contains(x, y, z) {
            return Err(Error::OutsideDomain { x, y });
        }
        let dz = if z < self.z_min {
            self.z_min - z
        } else if z > self.z_max {
            z - self.z_max
        } else {
            0.0
        };
        let mut d = f64::INFINITY;
        for v in self.base.singular_points() {
            let dxy = Point2::new(x, y).dist(v);
            d = d.min((dxy * dxy + dz * dz).sqrt());
        }
        Ok(d.min(1.0))
    }
}

fn edge_pairs(vertices: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

fn signed_area(vertices: &[Point2]) -> f64 {
    let mut s = 0.0;
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    0.5 * s
}

/// Interior angle at vertex `i` of a positively oriented loop: `π` minus the
/// signed turn from the incoming to the outgoing edge direction. A full
/// reversal (crack tip) maps to `2π`.
fn vertex_angle(vertices: &[Point2], i: usize) -> f64 {
    let n = vertices.len();
    let prev = vertices[(i + n - 1) % n];
    let here = vertices[i];
    let next = vertices[(i + 1) % n];
    let (ux, uy) = (here.x - prev.x, here.y - prev.y);
    let (vx, vy) = (next.x - here.x, next.y - here.y);
    let cross = ux * vy - uy * vx;
    let dot = ux * vx + uy * vy;
    let turn = if cross == 0.0 && dot < 0.0 {
        // Exact reversal: choose the turn that yields the reflex limit 2π.
        -std::f64::consts::PI
    } else {
        cross.atan2(dot)
    };
    std::f64::consts::PI - turn
}

fn on_segment(p: Point2, a: Point2, b: Point2, tol: f64) -> bool {
    if a.x == b.x {
        let (ylo, yhi) = if a.y < b.y { (a.y, b.y) } else { (b.y, a.y) };
        (p.x - a.x).abs() <= tol && p.y >= ylo - tol && p.y <= yhi + tol
    } else {
        let (xlo, xhi) = if a.x < b.x { (a.x, b.x) } else { (b.x, a.x) };
        (p.y - a.y).abs() <= tol && p.x >= xlo - tol && p.x <= xhi + tol
    }
}

/// Rejects improper self-intersections of the axis-aligned loop.
///
/// Allowed contacts between non-adjacent edges: single-point touches at
/// shared vertices and exact reversal pairs (cracks). Everything else —
/// transversal crossings or partial collinear overlaps — is an error.
fn check_simple(vertices: &[Point2]) -> Result<()> {
    let edges: Vec<(Point2, Point2)> = edge_pairs(vertices).collect();
    let n = edges.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (a1, b1) = edges[i];
            let (a2, b2) = edges[j];
            let exact_reverse = a1 == b2 && b1 == a2;
            if exact_reverse {
                continue; // crack pair
            }
            if adjacent {
                continue; // endpoint contact by construction
            }
            if let Some(kind) = axis_intersect(a1, b1, a2, b2) {
                match kind {
                    Contact::Touch => {}
                    Contact::Cross | Contact::Overlap => {
                        return Err(Error::Parameter(format!(
                            "edges {i} and {j} intersect improperly"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

enum Contact {
    /// Single shared point (vertex touching an edge or another vertex).
    Touch,
    /// Transversal interior crossing.
    Cross,
    /// Collinear overlap of positive length.
    Overlap,
}

/// Intersection classification for two axis-aligned segments.
fn axis_intersect(a1: Point2, b1: Point2, a2: Point2, b2: Point2) -> Option<Contact> {
    let h1 = a1.y == b1.y; // edge 1 horizontal?
    let h2 = a2.y == b2.y;
    let span = |u: f64, v: f64| if u < v { (u, v) } else { (v, u) };
    match (h1, h2) {
        (true, true) => {
            if a1.y != a2.y {
                return None;
            }
            let (l1, r1) = span(a1.x, b1.x);
            let (l2, r2) = span(a2.x, b2.x);
            let lo = l1.max(l2);
            let hi = r1.min(r2);
            if lo > hi {
                None
            } else if lo == hi {
                Some(Contact::Touch)
            } else {
                Some(Contact::Overlap)
            }
        }
        (false, false) => {
            if a1.x != a2.x {
                return None;
            }
            let (l1, r1) = span(a1.y, b1.y);
            let (l2, r2) = span(a2.y, b2.y);
            let lo = l1.max(l2);
            let hi = r1.min(r2);
            if lo > hi {
                None
            } else if lo == hi {
                Some(Contact::Touch)
            } else {
                Some(Contact::Overlap)
            }
        }
        (true, false) => axis_cross(a1, b1, a2, b2),
        (false, true) => axis_cross(a2, b2, a1, b1),
    }
}

/// `h` horizontal, `v` vertical.
fn axis_cross(ha: Point2, hb: Point2, va: Point2, vb: Point2) -> Option<Contact> {
    let (xl, xr) = if ha.x < hb.x { (ha.x, hb.x) } else { (hb.x, ha.x) };
    let (yl, yh) = if va.y < vb.y { (va.y, vb.y) } else { (vb.y, va.y) };
    let x = va.x;
    let y = ha.y;
    if x < xl || x > xr || y < yl || y > yh {
        return None;
    }
    let x_interior = x > xl && x < xr;
    let y_interior = y > yl && y < yh;
    if x_interior && y_interior {
        Some(Contact::Cross)
    } else {
        Some(Contact::Touch)
    }
}
