//! Simplified deterministic raytracer.
//!
//! Paths considered between a transmitter and a receiver:
//! - the direct path, if no building prism is in the way;
//! - specular wall reflections up to `max_reflections` bounces, found with the
//!   image method on the vertical walls of every footprint ring;
//! - when the direct path is blocked and `max_diffractions >= 1`, single
//!   diffraction around convex vertical building corners, attenuated by the
//!   knife-edge loss. Reflection and diffraction are never combined on one path.
//!
//! Each path contributes free-space gain over its unfolded 3D length times
//! `reflection_coeff_mag^(2 * bounces)` and the knife-edge power factor; path
//! powers add incoherently.

use serde::{Deserialize, Serialize};

use super::RadioParams;
use crate::geom::{ring_edges, segment_blocked, BuildingMap, Point2, Point3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaytraceParams {
    pub max_reflections: usize,
    /// 0 or 1.
    pub max_diffractions: usize,
    /// Magnitude of the wall reflection coefficient, in (0, 1).
    pub reflection_coeff_mag: f64,
    /// Received power (dBm) below which a link is in outage.
    pub outage_threshold_dbm: f64,
}

/// Deepest reflection order the tracer supports.
pub const MAX_REFLECTION_ORDER: usize = 8;

impl RaytraceParams {
    pub fn validate(&self) -> Result<(), super::ChannelError> {
        let bad = |m: &str| Err(super::ChannelError::InvalidParams(m.into()));
        if self.max_reflections > MAX_REFLECTION_ORDER {
            return bad("max_reflections exceeds 8");
        }
        if self.max_diffractions > 1 {
            return bad("max_diffractions must be 0 or 1");
        }
        if !(self.reflection_coeff_mag > 0.0 && self.reflection_coeff_mag < 1.0) {
            return bad("reflection_coeff_mag must be in (0, 1)");
        }
        Ok(())
    }
}

impl Default for RaytraceParams {
    fn default() -> Self {
        Self {
            max_reflections: 2,
            max_diffractions: 1,
            reflection_coeff_mag: 0.6,
            outage_threshold_dbm: -250.0,
        }
    }
}

/// Outcome of tracing one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceResult {
    /// `+inf` in outage.
    pub path_loss_db: f64,
    pub path_count: usize,
    pub los: bool,
}

/// ITU-R P.526 single knife-edge diffraction loss (dB) for Fresnel parameter `nu`.
pub fn knife_edge_loss_db(nu: f64) -> f64 {
    if nu <= -0.78 {
        0.0
    } else {
        let v = nu - 0.1;
        6.9 + 20.0 * ((v * v + 1.0).sqrt() + v).log10()
    }
}

#[derive(Debug, Clone)]
struct Wall {
    a: Point2,
    dir: Point2,
    /// Unit normal pointing away from the building material.
    normal: Point2,
    height: f64,
}

impl Wall {
    fn offset(&self, p: Point2) -> f64 {
        (p - self.a).dot(self.normal)
    }

    fn in_front(&self, p: Point2) -> bool {
        self.offset(p) > FRONT_EPS
    }

    fn mirror(&self, p: Point2) -> Point2 {
        p - self.normal * (2.0 * self.offset(p))
    }

    fn end(&self) -> Point2 {
        self.a + self.dir
    }
}

#[derive(Debug, Clone, Copy)]
struct Corner {
    p: Point2,
    height: f64,
}

const FRONT_EPS: f64 = 1e-9;
/// Reflections closer than this fraction of a wall's length to its ends are
/// attributed to the corner and skipped.
const WALL_END_EPS: f64 = 1e-9;
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Image {
    pos: Point2,
    wall: u32,
    parent: u32,
}

/// Per-transmitter precomputation: image tree and corner pre-screen.
#[derive(Debug, Clone)]
pub struct SourceImages {
    tx: Point3,
    images: Vec<Image>,
    /// Corners whose transmitter leg is blocked even at height `z_hi`.
    corner_hidden: Vec<bool>,
    z_hi: f64,
}

#[derive(Debug, Clone)]
pub struct Raytracer {
    map: BuildingMap,
    params: RaytraceParams,
    walls: Vec<Wall>,
    /// For each wall, the walls that can be the next bounce after it.
    facing: Vec<Vec<u32>>,
    corners: Vec<Corner>,
}

impl Raytracer {
    /// Panics if `params` fails [`RaytraceParams::validate`].
    pub fn new(map: &BuildingMap, params: RaytraceParams) -> Self {
        params.validate().expect("invalid raytrace parameters");
        let mut walls = Vec::new();
        let mut corners = Vec::new();
        for b in map.buildings() {
            for ring in b.footprint.rings() {
                for (a, e) in ring_edges(ring) {
                    let dir = e - a;
                    let len = dir.norm();
                    walls.push(Wall {
                        a,
                        dir,
                        normal: Point2::new(dir.y / len, -dir.x / len),
                        height: b.height,
                    });
                }
                let n = ring.len();
                for i in 0..n {
                    let prev = ring[(i + n - 1) % n];
                    let cur = ring[i];
                    let next = ring[(i + 1) % n];
                    // material on the left: a left turn is a convex wedge
                    if (cur - prev).cross(next - cur) > 0.0 {
                        corners.push(Corner {
                            p: cur,
                            height: b.height,
                        });
                    }
                }
            }
        }
        let facing = (0..walls.len())
            .map(|i| {
                (0..walls.len())
                    .filter(|&j| {
                        j != i
                            && (walls[i].in_front(walls[j].a) || walls[i].in_front(walls[j].end()))
                            && (walls[j].in_front(walls[i].a) || walls[j].in_front(walls[i].end()))
                    })
                    .map(|j| j as u32)
                    .collect()
            })
            .collect();
        Self {
            map: map.clone(),
            params,
            walls,
            facing,
            corners,
        }
    }

    pub fn params(&self) -> &RaytraceParams {
        &self.params
    }

    pub fn map(&self) -> &BuildingMap {
        &self.map
    }

    /// Precompute transmitter-side data for receivers at heights up to `rx_height`.
    pub fn source(&self, tx: Point3, rx_height: f64) -> SourceImages {
        let mut images = Vec::new();
        if self.params.max_reflections >= 1 {
            for (w, wall) in self.walls.iter().enumerate() {
                if wall.in_front(tx.xy()) {
                    images.push(Image {
                        pos: wall.mirror(tx.xy()),
                        wall: w as u32,
                        parent: NO_PARENT,
                    });
                }
            }
        }
        let mut level = 0..images.len();
        for _ in 2..=self.params.max_reflections {
            let start = images.len();
            for idx in level.clone() {
                let img = images[idx];
                for &w in &self.facing[img.wall as usize] {
                    let wall = &self.walls[w as usize];
                    if wall.in_front(img.pos) {
                        images.push(Image {
                            pos: wall.mirror(img.pos),
                            wall: w,
                            parent: idx as u32,
                        });
                    }
                }
            }
            level = start..images.len();
        }

        let z_hi = tx.z.max(rx_height);
        let corner_hidden = if self.params.max_diffractions >= 1 {
            self.corners
                .iter()
                .map(|c| segment_blocked(tx, Point3::at(c.p, z_hi), &self.map))
                .collect()
        } else {
            Vec::new()
        };
        SourceImages {
            tx,
            images,
            corner_hidden,
            z_hi,
        }
    }

    pub fn trace(&self, tx: Point3, rx: Point3, radio: &RadioParams) -> TraceResult {
        let src = self.source(tx, rx.z);
        self.trace_from(&src, rx, radio)
    }

    pub fn trace_from(&self, src: &SourceImages, rx: Point3, radio: &RadioParams) -> TraceResult {
        let tx = src.tx;
        let lambda = radio.wavelength();
        let free_space = |d: f64| {
            let d = d.max(1e-3);
            (lambda / (4.0 * std::f64::consts::PI * d)).powi(2)
        };
        let mut total = 0.0;
        let mut count = 0usize;

        let los = !segment_blocked(tx, rx, &self.map);
        if los {
            total += free_space(tx.dist(rx));
            count += 1;
        }

        let gamma2 = self.params.reflection_coeff_mag * self.params.reflection_coeff_mag;
        for idx in 0..src.images.len() {
            if let Some((len, bounces)) = self.reflection_path(src, idx, rx) {
                total += free_space(len) * gamma2.powi(bounces as i32);
                count += 1;
            }
        }

        if !los && self.params.max_diffractions >= 1 {
            let use_screen = tx.z.max(rx.z) <= src.z_hi;
            for (ci, c) in self.corners.iter().enumerate() {
                if use_screen && src.corner_hidden[ci] {
                    continue;
                }
                if let Some((len, factor)) = self.diffraction_path(tx, rx, c, lambda) {
                    total += factor * free_space(len);
                    count += 1;
                }
            }
        }

        let path_loss_db = if total > 0.0 {
            let pl = -10.0 * total.log10();
            if radio.tx_power_dbm - pl < self.params.outage_threshold_dbm {
                f64::INFINITY
            } else {
                pl
            }
        } else {
            f64::INFINITY
        };
        TraceResult {
            path_loss_db,
            path_count: count,
            los,
        }
    }

    /// Unfolded 3D length and bounce count of the image chain ending at
    /// `images[idx]`, if it forms a valid unobstructed path to `rx`.
    fn reflection_path(&self, src: &SourceImages, idx: usize, rx: Point3) -> Option<(f64, usize)> {
        // chain[0] is the last bounce
        let mut chain = [(Point2::default(), 0u32); MAX_REFLECTION_ORDER];
        let mut n = 0;
        let mut cur = idx as u32;
        while cur != NO_PARENT {
            let img = src.images[cur as usize];
            chain[n] = (img.pos, img.wall);
            n += 1;
            cur = img.parent;
        }
        let chain = &chain[..n];
        if !self.walls[chain[0].1 as usize].in_front(rx.xy()) {
            return None;
        }

        // hits[i] is the reflection point on chain[i]'s wall
        let mut hits = [Point2::default(); MAX_REFLECTION_ORDER];
        let mut target = rx.xy();
        for (i, &(pos, w)) in chain.iter().enumerate() {
            let wall = &self.walls[w as usize];
            let d = target - pos;
            let denom = d.cross(wall.dir);
            if denom.abs() < 1e-12 {
                return None;
            }
            let ap = wall.a - pos;
            let t = ap.cross(wall.dir) / denom;
            let u = ap.cross(d) / denom;
            if !(t > 0.0 && t < 1.0) || !(WALL_END_EPS..=1.0 - WALL_END_EPS).contains(&u) {
                return None;
            }
            let hit = wall.a + wall.dir * u;
            if let Some(&(_, prev_w)) = chain.get(i + 1) {
                if !self.walls[prev_w as usize].in_front(hit) {
                    return None;
                }
            }
            hits[i] = hit;
            target = hit;
        }

        // walk forward from the transmitter: tx -> hits[n-1] -> ... -> hits[0] -> rx
        let tx = src.tx;
        let mut pts = [Point2::default(); MAX_REFLECTION_ORDER + 2];
        pts[0] = tx.xy();
        for i in 0..n {
            pts[i + 1] = hits[n - 1 - i];
        }
        pts[n + 1] = rx.xy();
        let pts = &pts[..n + 2];
        let mut cum = [0.0f64; MAX_REFLECTION_ORDER + 2];
        for i in 1..pts.len() {
            cum[i] = cum[i - 1] + pts[i - 1].dist(pts[i]);
        }
        let len2d = cum[pts.len() - 1];
        let z_at = |s: f64| tx.z + (rx.z - tx.z) * s / len2d;
        for i in 1..=n {
            let wall = &self.walls[chain[n - i].1 as usize];
            if z_at(cum[i]) > wall.height {
                return None;
            }
        }
        for i in 0..pts.len() - 1 {
            let a = Point3::at(pts[i], z_at(cum[i]));
            let b = Point3::at(pts[i + 1], z_at(cum[i + 1]));
            if segment_blocked(a, b, &self.map) {
                return None;
            }
        }
        let dz = rx.z - tx.z;
        Some(((len2d * len2d + dz * dz).sqrt(), n))
    }

    /// 3D length and knife-edge power factor of the path bending around corner `c`.
    fn diffraction_path(
        &self,
        tx: Point3,
        rx: Point3,
        c: &Corner,
        lambda: f64,
    ) -> Option<(f64, f64)> {
        let d1 = tx.xy().dist(c.p);
        let d2 = c.p.dist(rx.xy());
        if d1 < 1e-6 || d2 < 1e-6 {
            return None;
        }
        // height where the unfolded straight path meets the vertical edge
        let pc = Point3::at(c.p, tx.z + (rx.z - tx.z) * d1 / (d1 + d2));
        if pc.z > c.height {
            return None;
        }
        if segment_blocked(pc, rx, &self.map) || segment_blocked(tx, pc, &self.map) {
            return None;
        }
        let base = rx.xy() - tx.xy();
        let blen = base.norm();
        let h = if blen > 0.0 {
            (c.p - tx.xy()).cross(base).abs() / blen
        } else {
            d1
        };
        let nu = h * (2.0 * (d1 + d2) / (lambda * d1 * d2)).sqrt();
        Some((
            tx.dist(pc) + pc.dist(rx),
            10f64.powf(-knife_edge_loss_db(nu) / 10.0),
        ))
    }
}

/// Path loss (dB) of one link; `+inf` in outage.
pub fn trace_gain(
    ap: Point3,
    ue: Point3,
    map: &BuildingMap,
    rp: &RaytraceParams,
    radio: &RadioParams,
) -> f64 {
    Raytracer::new(map, rp.clone())
        .trace(ap, ue, radio)
        .path_loss_db
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::fspl_db;
    use crate::geom::synth::SyntheticMapConfig;
    use crate::geom::{Building, Polygon, Rect};
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    fn only_reflections(n: usize) -> RaytraceParams {
        RaytraceParams {
            max_reflections: n,
            max_diffractions: 0,
            ..RaytraceParams::default()
        }
    }

    fn city() -> BuildingMap {
        SyntheticMapConfig {
            name: "t".into(),
            extent: [0.0, 0.0, 240.0, 240.0],
            origin_offset: 12.0,
            block_size: 60.0,
            block_jitter: 6.0,
            street_width: 18.0,
            courtyard_margin: None,
            height_range: [12.0, 24.0],
            open_fraction: 0.2,
            seed: 5,
        }
        .generate()
        .unwrap()
    }

    fn outdoor(map: &BuildingMap, x: f64, y: f64) -> Option<Point2> {
        let q = p(x, y);
        (!crate::geom::point_in_building(q, map)).then_some(q)
    }

    #[test]
    fn knife_edge_values() {
        assert_eq!(knife_edge_loss_db(-1.0), 0.0);
        assert!((knife_edge_loss_db(0.0) - 6.0332).abs() < 1e-3);
        assert!(knife_edge_loss_db(-0.7799) > 0.0 && knife_edge_loss_db(-0.7799) < 0.01);
        assert!(knife_edge_loss_db(2.0) > knife_edge_loss_db(1.0));
    }

    #[test]
    fn empty_map_is_free_space() {
        let map = BuildingMap::empty(Rect::square(p(0.0, 0.0), 500.0));
        let rt = Raytracer::new(&map, RaytraceParams::default());
        let radio = RadioParams::default();
        let r = rt.trace(
            Point3::at(p(0.0, 0.0), 10.0),
            Point3::at(p(100.0, 0.0), 10.0),
            &radio,
        );
        assert!(r.los);
        assert_eq!(r.path_count, 1);
        assert!((r.path_loss_db - 78.4684).abs() < 1e-3);
        assert!((r.path_loss_db - fspl_db(100.0, 2000.0)).abs() < 1e-9);
    }

    #[test]
    fn two_ray_over_long_wall() {
        let wall = Polygon::rectangle(p(-1000.0, 0.0), p(1000.0, 1.0));
        let map = BuildingMap::new(
            vec![Building::new(wall, 40.0)],
            Rect::new(p(-1000.0, -100.0), p(1000.0, 100.0)),
        )
        .unwrap();
        let rt = Raytracer::new(&map, only_reflections(2));
        let radio = RadioParams::default();
        let tx = Point3::at(p(0.0, -10.0), 11.0);
        let rx = Point3::at(p(50.0, -5.0), 1.5);
        let r = rt.trace(tx, rx, &radio);
        assert_eq!(r.path_count, 2);
        let lambda = radio.wavelength();
        let fs = |d: f64| (lambda / (4.0 * std::f64::consts::PI * d)).powi(2);
        let d_img = Point3::at(p(0.0, 10.0), 11.0).dist(rx);
        let expect = -10.0 * (fs(tx.dist(rx)) + 0.36 * fs(d_img)).log10();
        assert!((r.path_loss_db - expect).abs() < 1e-9);

        // a reflection point above the wall top does not count
        let low = BuildingMap::new(
            vec![Building::new(
                Polygon::rectangle(p(-1000.0, 0.0), p(1000.0, 1.0)),
                2.0,
            )],
            map.extent(),
        )
        .unwrap();
        let r = Raytracer::new(&low, only_reflections(2)).trace(tx, rx, &radio);
        assert_eq!(r.path_count, 1);
    }

    #[test]
    fn enclosed_courtyard_is_outage() {
        let block = Polygon::new(
            vec![p(0.0, 0.0), p(100.0, 0.0), p(100.0, 100.0), p(0.0, 100.0)],
            vec![vec![
                p(30.0, 30.0),
                p(70.0, 30.0),
                p(70.0, 70.0),
                p(30.0, 70.0),
            ]],
        )
        .unwrap();
        let map = BuildingMap::new(
            vec![Building::new(block, 25.0)],
            Rect::new(p(-100.0, -100.0), p(200.0, 200.0)),
        )
        .unwrap();
        let rt = Raytracer::new(
            &map,
            RaytraceParams {
                max_reflections: 3,
                ..RaytraceParams::default()
            },
        );
        let r = rt.trace(
            Point3::at(p(-20.0, 50.0), 11.0),
            Point3::at(p(50.0, 50.0), 1.5),
            &RadioParams::default(),
        );
        assert_eq!(r.path_count, 0);
        assert_eq!(r.path_loss_db, f64::INFINITY);
    }

    #[test]
    fn corner_diffraction_when_shadowed() {
        let map = BuildingMap::new(
            vec![Building::new(
                Polygon::rectangle(p(0.0, 0.0), p(50.0, 50.0)),
                30.0,
            )],
            Rect::new(p(-100.0, -100.0), p(150.0, 150.0)),
        )
        .unwrap();
        let radio = RadioParams::default();
        let tx = Point3::at(p(-10.0, 25.0), 11.0);
        let rx = Point3::at(p(25.0, -10.0), 1.5);
        assert!(segment_blocked(tx, rx, &map));
        let none = RaytraceParams {
            max_reflections: 0,
            max_diffractions: 0,
            ..RaytraceParams::default()
        };
        assert_eq!(
            Raytracer::new(&map, none).trace(tx, rx, &radio).path_count,
            0
        );
        let diff = RaytraceParams {
            max_reflections: 0,
            ..RaytraceParams::default()
        };
        let r = Raytracer::new(&map, diff).trace(tx, rx, &radio);
        assert_eq!(r.path_count, 1);
        assert!(!r.los);
        let corner_len =
            tx.dist(Point3::at(p(0.0, 0.0), 6.25)) + Point3::at(p(0.0, 0.0), 6.25).dist(rx);
        assert!(r.path_loss_db > fspl_db(corner_len, 2000.0) + 6.0);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut rp = RaytraceParams::default();
        rp.max_reflections = MAX_REFLECTION_ORDER + 1;
        assert!(rp.validate().is_err());
        rp = RaytraceParams::default();
        rp.reflection_coeff_mag = 1.0;
        assert!(rp.validate().is_err());
        rp = RaytraceParams::default();
        rp.max_diffractions = 2;
        assert!(rp.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn reciprocity_and_bounds(
            ax in 0.0..240.0f64, ay in 0.0..240.0f64,
            bx in 0.0..240.0f64, by in 0.0..240.0f64,
        ) {
            let map = city();
            let (Some(a), Some(b)) = (outdoor(&map, ax, ay), outdoor(&map, bx, by)) else {
                return Ok(());
            };
            prop_assume!(a.dist(b) > 1.0);
            let radio = RadioParams::default();
            let rt = Raytracer::new(&map, RaytraceParams::default());
            let (ta, tb) = (Point3::at(a, 11.0), Point3::at(b, 1.5));
            let fwd = rt.trace(ta, tb, &radio);
            let back = rt.trace(tb, ta, &radio);
            prop_assert_eq!(fwd.path_count, back.path_count);
            if fwd.path_loss_db.is_finite() {
                prop_assert!((fwd.path_loss_db - back.path_loss_db).abs() < 1e-6);
                let floor = fspl_db(ta.dist(tb), 2000.0) - 10.0 * (fwd.path_count as f64).log10();
                prop_assert!(fwd.path_loss_db >= floor - 1e-9);
            } else {
                prop_assert_eq!(back.path_loss_db, f64::INFINITY);
            }
        }

        #[test]
        fn more_reflections_never_lose_power(
            ax in 0.0..240.0f64, ay in 0.0..240.0f64,
            bx in 0.0..240.0f64, by in 0.0..240.0f64,
        ) {
            let map = city();
            let (Some(a), Some(b)) = (outdoor(&map, ax, ay), outdoor(&map, bx, by)) else {
                return Ok(());
            };
            let radio = RadioParams::default();
            let (ta, tb) = (Point3::at(a, 11.0), Point3::at(b, 1.5));
            let mut prev = f64::INFINITY;
            let mut prev_count = 0;
            for n in 0..=3 {
                let r = Raytracer::new(&map, only_reflections(n)).trace(ta, tb, &radio);
                prop_assert!(r.path_loss_db <= prev + 1e-12);
                prop_assert!(r.path_count >= prev_count);
                prev = r.path_loss_db;
                prev_count = r.path_count;
            }
        }
    }
}
