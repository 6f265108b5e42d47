//! Planar geometry kernel and building maps.
//!
//! Everything here works in local planar meters. Footprints are extruded
//! prisms (2.5D): a building occupies its footprint from the ground up to its
//! height, with no roof shape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod geojson;
pub mod synth;

pub use self::geojson::{load_building_map, map_to_geojson};

/// Distance under which a point is considered to lie on a polygon edge.
pub const BOUNDARY_EPS: f64 = 1e-7;

#[derive(Debug, Error)]
pub enum GeomError {
    #[error("malformed building document: {0}")]
    Malformed(String),
    #[error("feature {feature}: ring has {count} distinct vertices, need at least 3")]
    DegenerateRing { feature: usize, count: usize },
    #[error("feature {feature}: outer ring self-intersects")]
    SelfIntersecting { feature: usize },
    #[error("feature {feature}: inner ring not strictly inside outer ring")]
    HoleOutside { feature: usize },
    #[error("feature {feature}: missing or non-positive height")]
    BadHeight { feature: usize },
    #[error("feature {feature}: footprint does not intersect the map extent")]
    OutsideExtent { feature: usize },
    #[error("building collection is empty")]
    Empty,
    #[error("non-finite coordinate")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, other: Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// A planar position with a height above ground.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn at(p: Point2, z: f64) -> Self {
        Self { x: p.x, y: p.y, z }
    }

    pub fn xy(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dist(self, o: Point3) -> f64 {
        let dz = self.z - o.z;
        (self.xy().dist2(o.xy()) + dz * dz).sqrt()
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn square(origin: Point2, side: f64) -> Self {
        Self::new(origin, Point2::new(origin.x + side, origin.y + side))
    }

    /// Square of side `side` sharing the centroid of `self`.
    pub fn concentric_square(&self, side: f64) -> Self {
        let c = self.center();
        let h = side / 2.0;
        Self::new(Point2::new(c.x - h, c.y - h), Point2::new(c.x + h, c.y + h))
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        self.min.lerp(self.max, 0.5)
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }

    pub fn bounding(points: impl IntoIterator<Item = Point2>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut r = Rect::new(first, first);
        for p in it {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        Some(r)
    }

    pub fn union(&self, other: &Rect) -> Rect {
        Rect::new(
            Point2::new(self.min.x.min(other.min.x), self.min.y.min(other.min.y)),
            Point2::new(self.max.x.max(other.max.x), self.max.y.max(other.max.y)),
        )
    }
}

/// Where a point sits relative to a polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

/// Footprint polygon with optional courtyard holes.
///
/// Rings are stored open (no repeated closing vertex). After construction
/// the outer ring is counter-clockwise and inner rings are clockwise, so the
/// building material always lies to the left of every directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    outer: Vec<Point2>,
    inner: Vec<Vec<Point2>>,
    bbox: Rect,
}

impl Polygon {
    pub fn new(outer: Vec<Point2>, inner: Vec<Vec<Point2>>) -> Result<Self, GeomError> {
        Self::with_feature(outer, inner, 0)
    }

    pub(crate) fn with_feature(
        outer: Vec<Point2>,
        inner: Vec<Vec<Point2>>,
        feature: usize,
    ) -> Result<Self, GeomError> {
        let mut outer = clean_ring(outer, feature)?;
        if signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        let mut holes = Vec::with_capacity(inner.len());
        for ring in inner {
            let mut ring = clean_ring(ring, feature)?;
            if signed_area(&ring) > 0.0 {
                ring.reverse();
            }
            if ring
                .iter()
                .any(|&p| classify_ring(&outer, p) != Location::Inside)
            {
                return Err(GeomError::HoleOutside { feature });
            }
            holes.push(ring);
        }
        let bbox = Rect::bounding(outer.iter().copied()).expect("non-empty ring");
        Ok(Self {
            outer,
            inner: holes,
            bbox,
        })
    }

    /// Axis-aligned rectangle footprint.
    pub fn rectangle(min: Point2, max: Point2) -> Self {
        Self::new(
            vec![
                min,
                Point2::new(max.x, min.y),
                max,
                Point2::new(min.x, max.y),
            ],
            vec![],
        )
        .expect("valid rectangle")
    }

    pub fn outer(&self) -> &[Point2] {
        &self.outer
    }

    pub fn inner(&self) -> &[Vec<Point2>] {
        &self.inner
    }

    /// Outer ring first, then holes.
    pub fn rings(&self) -> impl Iterator<Item = &[Point2]> {
        std::iter::once(self.outer.as_slice()).chain(self.inner.iter().map(Vec::as_slice))
    }

    /// Every directed edge of every ring.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.rings().flat_map(ring_edges)
    }

    pub fn bbox(&self) -> Rect {
        self.bbox
    }

    pub fn classify(&self, p: Point2) -> Location {
        if !self.bbox_contains_eps(p) {
            return Location::Outside;
        }
        match classify_ring(&self.outer, p) {
            Location::Outside => Location::Outside,
            Location::Boundary => Location::Boundary,
            Location::Inside => {
                for hole in &self.inner {
                    match classify_ring(hole, p) {
                        Location::Inside => return Location::Outside,
                        Location::Boundary => return Location::Boundary,
                        Location::Outside => {}
                    }
                }
                Location::Inside
            }
        }
    }

    /// Boundary-inclusive containment.
    pub fn contains(&self, p: Point2) -> bool {
        self.classify(p) != Location::Outside
    }

    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    fn bbox_contains_eps(&self, p: Point2) -> bool {
        p.x >= self.bbox.min.x - BOUNDARY_EPS
            && p.x <= self.bbox.max.x + BOUNDARY_EPS
            && p.y >= self.bbox.min.y - BOUNDARY_EPS
            && p.y <= self.bbox.max.y + BOUNDARY_EPS
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub footprint: Polygon,
    pub height: f64,
}

impl Building {
    pub fn new(footprint: Polygon, height: f64) -> Self {
        Self { footprint, height }
    }

    /// Does the 3D segment pass through this building's prism?
    fn blocks(&self, a: Point3, b: Point3, ts: &mut Vec<f64>) -> bool {
        if a.z.min(b.z) >= self.height {
            return false;
        }
        let pa = a.xy();
        let pb = b.xy();
        let seg_box = Rect::bounding([pa, pb]).expect("two points");
        if !seg_box.intersects(&self.footprint.bbox) {
            return false;
        }
        let d = pb - pa;
        let len2 = d.dot(d);
        if len2 == 0.0 {
            return self.footprint.classify(pa) == Location::Inside;
        }
        ts.clear();
        ts.push(0.0);
        ts.push(1.0);
        for (c, e) in self.footprint.edges() {
            push_crossings(pa, d, len2, c, e, ts);
        }
        ts.sort_by(f64::total_cmp);
        let len = len2.sqrt();
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if (t1 - t0) * len <= 1e-9 {
                continue;
            }
            let mid = pa + d * (0.5 * (t0 + t1));
            if self.footprint.classify(mid) == Location::Inside {
                let z0 = a.z + (b.z - a.z) * t0;
                let z1 = a.z + (b.z - a.z) * t1;
                if z0.min(z1) < self.height {
                    return true;
                }
            }
        }
        false
    }
}

/// Building set plus the study area `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingMap {
    buildings: Vec<Building>,
    extent: Rect,
    index: GridIndex,
}

impl BuildingMap {
    pub fn new(buildings: Vec<Building>, extent: Rect) -> Result<Self, GeomError> {
        for (i, b) in buildings.iter().enumerate() {
            if !(b.height.is_finite() && b.height > 0.0) {
                return Err(GeomError::BadHeight { feature: i });
            }
            if !b.footprint.bbox().intersects(&extent) {
                return Err(GeomError::OutsideExtent { feature: i });
            }
        }
        let index = GridIndex::build(&buildings, extent);
        Ok(Self {
            buildings,
            extent,
            index,
        })
    }

    /// A map with no buildings over the given area.
    pub fn empty(extent: Rect) -> Self {
        Self::new(Vec::new(), extent).expect("empty map is valid")
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn extent(&self) -> Rect {
        self.extent
    }

    pub fn is_empty(&self) -> bool {
        self.buildings.is_empty()
    }

    /// Distance from `p` to the nearest footprint edge of any building.
    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        self.buildings
            .iter()
            .map(|b| b.footprint.distance_to_boundary(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Uniform bucket grid over building bounding boxes.
#[derive(Debug, Clone, PartialEq)]
struct GridIndex {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl GridIndex {
    const CELL: f64 = 50.0;

    fn build(buildings: &[Building], extent: Rect) -> Self {
        let bounds = buildings
            .iter()
            .map(|b| b.footprint.bbox())
            .fold(extent, |acc, r| acc.union(&r));
        let nx = ((bounds.width() / Self::CELL).ceil() as usize).max(1);
        let ny = ((bounds.height() / Self::CELL).ceil() as usize).max(1);
        let mut index = Self {
            origin: bounds.min,
            cell: Self::CELL,
            nx,
            ny,
            cells: vec![Vec::new(); nx * ny],
        };
        for (i, b) in buildings.iter().enumerate() {
            let (x0, y0, x1, y1) = index.cell_range(&b.footprint.bbox());
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    index.cells[cy * nx + cx].push(i as u32);
                }
            }
        }
        index
    }

    fn cell_range(&self, r: &Rect) -> (usize, usize, usize, usize) {
        let clamp = |v: f64, n: usize| (v.floor().max(0.0) as usize).min(n - 1);
        (
            clamp((r.min.x - self.origin.x) / self.cell, self.nx),
            clamp((r.min.y - self.origin.y) / self.cell, self.ny),
            clamp((r.max.x - self.origin.x) / self.cell, self.nx),
            clamp((r.max.y - self.origin.y) / self.cell, self.ny),
        )
    }

    /// Buildings whose bucket cells the segment passes through, sorted.
    fn candidates(&self, a: Point2, b: Point2, out: &mut Vec<u32>) {
        out.clear();
        let seg = Rect::bounding([a, b]).expect("two points");
        let (x0, y0, x1, y1) = self.cell_range(&seg);
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                let ids = &self.cells[cy * self.nx + cx];
                if ids.is_empty() {
                    continue;
                }
                let lo = Point2::new(
                    self.origin.x + cx as f64 * self.cell,
                    self.origin.y + cy as f64 * self.cell,
                );
                let cell = Rect::new(lo, Point2::new(lo.x + self.cell, lo.y + self.cell));
                if segment_hits_rect(a, b, &cell) {
                    out.extend_from_slice(ids);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

/// Liang-Barsky clip test of a closed segment against a closed rectangle.
fn segment_hits_rect(a: Point2, b: Point2, r: &Rect) -> bool {
    let d = b - a;
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-d.x, a.x - r.min.x),
        (d.x, r.max.x - a.x),
        (-d.y, a.y - r.min.y),
        (d.y, r.max.y - a.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
            if t0 > t1 {
                return false;
            }
        }
    }
    true
}

/// True iff `p` is inside (or on the boundary of) any footprint, excluding holes.
pub fn point_in_building(p: Point2, map: &BuildingMap) -> bool {
    map.buildings.iter().any(|b| b.footprint.contains(p))
}

/// True iff the 3D segment between `a` and `b` enters any building prism.
///
/// Grazing contact (running along a wall or touching a corner) does not block.
/// The result does not depend on the argument order.
pub fn segment_blocked(a: Point3, b: Point3, map: &BuildingMap) -> bool {
    let (a, b) = if (b.x, b.y, b.z) < (a.x, a.y, a.z) {
        (b, a)
    } else {
        (a, b)
    };
    let mut ts = Vec::with_capacity(16);
    let mut ids = Vec::with_capacity(16);
    map.index.candidates(a.xy(), b.xy(), &mut ids);
    ids.iter()
        .any(|&i| map.buildings[i as usize].blocks(a, b, &mut ts))
}

/// Corners plus points every `spacing` meters along each edge.
///
/// Arc length restarts at every vertex. Along an edge, inserted points sit at
/// `j * spacing` for `j >= 1` strictly before the edge's end vertex, so an edge
/// exactly `spacing` long contributes only its start corner.
pub fn resample_boundary(poly: &Polygon, spacing: f64) -> Vec<Point2> {
    assert!(spacing > 0.0, "spacing must be positive");
    let mut out = Vec::new();
    for ring in poly.rings() {
        for (a, b) in ring_edges(ring) {
            out.push(a);
            let len = a.dist(b);
            let mut j = 1usize;
            loop {
                let s = j as f64 * spacing;
                if s >= len - 1e-9 {
                    break;
                }
                out.push(a.lerp(b, s / len));
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn ring_edges(ring: &[Point2]) -> impl Iterator<Item = (Point2, Point2)> + '_ {
    let n = ring.len();
    (0..n).map(move |i| (ring[i], ring[(i + 1) % n]))
}

pub(crate) fn signed_area(ring: &[Point2]) -> f64 {
    0.5 * ring_edges(ring).map(|(a, b)| a.cross(b)).sum::<f64>()
}

/// Distance from `p` to segment `ab`.
pub fn segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Winding-number classification of `p` against one closed ring.
pub(crate) fn classify_ring(ring: &[Point2], p: Point2) -> Location {
    let mut winding = 0i32;
    for (a, b) in ring_edges(ring) {
        if segment_distance(p, a, b) <= BOUNDARY_EPS {
            return Location::Boundary;
        }
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                winding += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            winding -= 1;
        }
    }
    if winding != 0 {
        Location::Inside
    } else {
        Location::Outside
    }
}

fn clean_ring(ring: Vec<Point2>, feature: usize) -> Result<Vec<Point2>, GeomError> {
    if ring.iter().any(|p| !p.is_finite()) {
        return Err(GeomError::NonFinite);
    }
    let mut out: Vec<Point2> = Vec::with_capacity(ring.len());
    for p in ring {
        if out.last() != Some(&p) {
            out.push(p);
        }
    }
    while out.len() > 1 && out.first() == out.last() {
        out.pop();
    }
    let mut distinct = out.clone();
    distinct.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(GeomError::DegenerateRing {
            feature,
            count: distinct.len(),
        });
    }
    if ring_self_intersects(&out) {
        return Err(GeomError::SelfIntersecting { feature });
    }
    if signed_area(&out).abs() < 1e-12 {
        return Err(GeomError::DegenerateRing {
            feature,
            count: distinct.len(),
        });
    }
    Ok(out)
}

fn ring_self_intersects(ring: &[Point2]) -> bool {
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 1)..n {
            // skip edges sharing a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_touch(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment(a: Point2, b: Point2, p: Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test.
pub(crate) fn segments_touch(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    (o1 == 0.0 && on_segment(a, b, c))
        || (o2 == 0.0 && on_segment(a, b, d))
        || (o3 == 0.0 && on_segment(c, d, a))
        || (o4 == 0.0 && on_segment(c, d, b))
}

/// Parameters `t` in (0, 1) along `pa + t*d` where the segment meets edge `c→e`.
fn push_crossings(pa: Point2, d: Point2, len2: f64, c: Point2, e: Point2, ts: &mut Vec<f64>) {
    let ce = e - c;
    let denom = d.cross(ce);
    let w = c - pa;
    let scale = len2.sqrt() * ce.norm();
    if denom.abs() > 1e-12 * scale {
        let t = w.cross(ce) / denom;
        let s = w.cross(d) / denom;
        if (-1e-12..=1.0 + 1e-12).contains(&s) && t > 0.0 && t < 1.0 {
            ts.push(t);
        }
    } else if w.cross(d).abs() <= 1e-9 * len2.sqrt() {
        // collinear overlap: split at the edge endpoints
        for q in [c, e] {
            let t = (q - pa).dot(d) / len2;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, side: f64) -> Polygon {
        Polygon::rectangle(Point2::new(x0, y0), Point2::new(x0 + side, y0 + side))
    }

    fn courtyard_block() -> Polygon {
        let outer = square(0.0, 0.0, 100.0).outer().to_vec();
        let hole = vec![
            Point2::new(30.0, 30.0),
            Point2::new(70.0, 30.0),
            Point2::new(70.0, 70.0),
            Point2::new(30.0, 70.0),
        ];
        Polygon::new(outer, vec![hole]).unwrap()
    }

    fn map_of(polys: Vec<(Polygon, f64)>) -> BuildingMap {
        let extent = Rect::new(Point2::new(-200.0, -200.0), Point2::new(300.0, 300.0));
        BuildingMap::new(
            polys
                .into_iter()
                .map(|(p, h)| Building::new(p, h))
                .collect(),
            extent,
        )
        .unwrap()
    }

    #[test]
    fn rings_are_normalized() {
        let p = courtyard_block();
        assert!(signed_area(p.outer()) > 0.0);
        assert!(signed_area(&p.inner()[0]) < 0.0);
        // closing vertex dropped
        let closed = Polygon::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(0.0, 1.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 0.0),
            ],
            vec![],
        )
        .unwrap();
        assert_eq!(closed.outer().len(), 3);
    }

    #[test]
    fn degenerate_and_bowtie_rejected() {
        let two = Polygon::new(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0)], vec![]);
        assert!(matches!(two, Err(GeomError::DegenerateRing { .. })));
        let bowtie = Polygon::new(
            vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(1.0, 0.0),
                Point2::new(0.0, 1.0),
            ],
            vec![],
        );
        assert!(matches!(bowtie, Err(GeomError::SelfIntersecting { .. })));
    }

    #[test]
    fn point_in_building_cases() {
        let map = map_of(vec![(courtyard_block(), 20.0)]);
        assert!(point_in_building(Point2::new(10.0, 10.0), &map));
        assert!(!point_in_building(Point2::new(50.0, 50.0), &map));
        assert!(!point_in_building(Point2::new(150.0, 50.0), &map));
        // boundaries count as inside, including the courtyard wall
        assert!(point_in_building(Point2::new(0.0, 50.0), &map));
        assert!(point_in_building(Point2::new(30.0, 50.0), &map));
    }

    #[test]
    fn segment_blocked_cases() {
        let tall = map_of(vec![(square(0.0, 0.0, 40.0), 30.0)]);
        let a = Point3::new(-20.0, 20.0, 11.0);
        let b = Point3::new(60.0, 20.0, 1.0);
        assert!(segment_blocked(a, b, &tall));
        assert!(segment_blocked(b, a, &tall));

        let low = map_of(vec![(square(0.0, 0.0, 40.0), 1.0)]);
        let a11 = Point3::new(-20.0, 20.0, 11.0);
        let b11 = Point3::new(60.0, 20.0, 11.0);
        assert!(!segment_blocked(a11, b11, &low));

        let clear = Point3::new(60.0, 60.0, 1.0);
        assert!(!segment_blocked(
            Point3::new(-20.0, 60.0, 11.0),
            clear,
            &tall
        ));
    }

    #[test]
    fn grazing_along_wall_is_not_blocked() {
        let map = map_of(vec![(square(0.0, 0.0, 40.0), 30.0)]);
        // along the bottom wall
        let a = Point3::new(-10.0, 0.0, 5.0);
        let b = Point3::new(50.0, 0.0, 5.0);
        assert!(!segment_blocked(a, b, &map));
        // from a wall point outward
        let w = Point3::new(20.0, 0.0, 11.0);
        assert!(!segment_blocked(w, Point3::new(20.0, -50.0, 1.0), &map));
        // from a wall point into the building
        assert!(segment_blocked(w, Point3::new(20.0, 60.0, 1.0), &map));
    }

    #[test]
    fn segment_through_courtyard_is_blocked_by_walls() {
        let map = map_of(vec![(courtyard_block(), 20.0)]);
        let inside = Point3::new(50.0, 50.0, 1.0);
        assert!(segment_blocked(
            inside,
            Point3::new(150.0, 50.0, 11.0),
            &map
        ));
        assert!(!segment_blocked(
            inside,
            Point3::new(60.0, 40.0, 11.0),
            &map
        ));
    }

    #[test]
    fn resample_square_examples() {
        let sq40 = square(0.0, 0.0, 40.0);
        assert_eq!(resample_boundary(&sq40, 10.0).len(), 16);
        assert_eq!(resample_boundary(&sq40, 50.0).len(), 4);
        let sq10 = square(0.0, 0.0, 10.0);
        let pts = resample_boundary(&sq10, 10.0);
        assert_eq!(pts, sq10.outer().to_vec());
    }

    #[test]
    fn resample_includes_hole_rings() {
        let p = courtyard_block();
        // 400 m outer perimeter / 10 + 160 m hole perimeter / 10
        assert_eq!(resample_boundary(&p, 10.0).len(), 40 + 16);
    }
}
