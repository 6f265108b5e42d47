//! AP placement on building boundaries and the candidate UE lattice.
//!
//! Candidate AP sites are generated in three passes (boundary resampling,
//! greedy proximity pruning, removal of enclosed sites), after which one AP is
//! drawn per cell of a `sqrt(M) x sqrt(M)` grid over the study area.

use std::collections::VecDeque;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{point_in_building, resample_boundary, BuildingMap, Point2, Rect};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("invalid placement parameters: {0}")]
    InvalidParams(String),
    #[error("step {step}: no candidate AP locations left")]
    NoCandidates { step: u8 },
    #[error("Step 4 shortfall: {available} candidate locations for {requested} APs")]
    Shortfall { available: usize, requested: usize },
    #[error("layout csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementParams {
    /// Boundary insertion spacing (m).
    pub d1: f64,
    /// Minimum separation between surviving candidates (m).
    pub d2: f64,
    /// Number of APs; must be a perfect square.
    pub m: usize,
    pub area: Rect,
    pub ap_height: f64,
}

impl PlacementParams {
    pub fn new(
        d1: f64,
        d2: f64,
        m: usize,
        area: Rect,
        ap_height: f64,
    ) -> Result<Self, PlacementError> {
        let p = Self {
            d1,
            d2,
            m,
            area,
            ap_height,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlacementError> {
        if !(self.d1 > 0.0 && self.d2 > 0.0) {
            return Err(PlacementError::InvalidParams(
                "d1 and d2 must be positive".into(),
            ));
        }
        if self.m == 0 || isqrt(self.m).pow(2) != self.m {
            return Err(PlacementError::InvalidParams(format!(
                "M = {} is not a perfect square",
                self.m
            )));
        }
        if !(self.area.width() > 0.0 && self.area.height() > 0.0) {
            return Err(PlacementError::InvalidParams("empty area".into()));
        }
        Ok(())
    }

    pub fn grid_side(&self) -> usize {
        isqrt(self.m)
    }
}

pub(crate) fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

/// Placed AP sites.
#[derive(Debug, Clone, PartialEq)]
pub struct ApLayout {
    pub positions: Vec<Point2>,
    pub ap_height: f64,
}

impl ApLayout {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// APs per square kilometer over `area`.
    pub fn density_per_km2(&self, area: &Rect) -> f64 {
        self.len() as f64 / (area.area() / 1e6)
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), PlacementError> {
        write_points_csv(w, &self.positions)
    }

    pub fn read_csv<R: io::Read>(r: R, ap_height: f64) -> Result<Self, PlacementError> {
        Ok(Self {
            positions: read_points_csv(r)?,
            ap_height,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PointRow {
    id: usize,
    x: f64,
    y: f64,
}

/// `id,x,y` rows.
pub fn write_points_csv<W: io::Write>(w: W, points: &[Point2]) -> Result<(), PlacementError> {
    let mut wr = csv::Writer::from_writer(w);
    for (id, p) in points.iter().enumerate() {
        wr.serialize(PointRow { id, x: p.x, y: p.y })?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_points_csv<R: io::Read>(r: R) -> Result<Vec<Point2>, PlacementError> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
    let mut rows: Vec<PointRow> = rd.deserialize().collect::<Result<_, _>>()?;
    rows.sort_by_key(|r| r.id);
    Ok(rows.into_iter().map(|r| Point2::new(r.x, r.y)).collect())
}

/// Candidate UE positions: outdoor cell centers of a regular lattice over `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct UeGrid {
    pub candidates: Vec<Point2>,
    pub spacing: f64,
    pub ue_height: f64,
    /// Lower-left corner of the lattice (corner of cell (0, 0), not its center).
    pub origin: Point2,
    pub nx: usize,
    pub ny: usize,
    cell_to_candidate: Vec<Option<usize>>,
}

impl UeGrid {
    /// Candidate index of lattice cell `(ix, iy)`, if that cell is outdoors.
    pub fn cell(&self, ix: usize, iy: usize) -> Option<usize> {
        if ix < self.nx && iy < self.ny {
            self.cell_to_candidate[iy * self.nx + ix]
        } else {
            None
        }
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.spacing,
            self.origin.y + (iy as f64 + 0.5) * self.spacing,
        )
    }

    /// Lattice cell of candidate `k`.
    pub fn cell_of(&self, k: usize) -> (usize, usize) {
        let p = self.candidates[k];
        let ix = ((p.x - self.origin.x) / self.spacing - 0.5).round() as usize;
        let iy = ((p.y - self.origin.y) / self.spacing - 0.5).round() as usize;
        (ix, iy)
    }

    /// Outdoor cells 4-connected to the lattice border through outdoor cells.
    pub fn reachable_from_border(&self) -> Vec<bool> {
        let (nx, ny) = (self.nx, self.ny);
        let mut seen = vec![false; nx * ny];
        let mut queue = VecDeque::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let border = ix == 0 || iy == 0 || ix + 1 == nx || iy + 1 == ny;
                if border && self.cell(ix, iy).is_some() {
                    seen[iy * nx + ix] = true;
                    queue.push_back((ix, iy));
                }
            }
        }
        while let Some((ix, iy)) = queue.pop_front() {
            let mut visit = |jx: usize, jy: usize| {
                if self.cell(jx, jy).is_some() && !seen[jy * nx + jx] {
                    seen[jy * nx + jx] = true;
                    queue.push_back((jx, jy));
                }
            };
            if ix > 0 {
                visit(ix - 1, iy);
            }
            if iy > 0 {
                visit(ix, iy - 1);
            }
            visit(ix + 1, iy);
            visit(ix, iy + 1);
        }
        seen
    }
}

/// Lattice of `spacing x spacing` cells tiling the map extent; keeps the
/// centers that are not inside any building.
pub fn generate_ue_grid(map: &BuildingMap, spacing: f64, ue_height: f64) -> UeGrid {
    assert!(spacing > 0.0, "lattice spacing must be positive");
    let area = map.extent();
    let nx = (area.width() / spacing + 1e-9).floor() as usize;
    let ny = (area.height() / spacing + 1e-9).floor() as usize;
    let mut grid = UeGrid {
        candidates: Vec::new(),
        spacing,
        ue_height,
        origin: area.min,
        nx,
        ny,
        cell_to_candidate: vec![None; nx * ny],
    };
    for iy in 0..ny {
        for ix in 0..nx {
            let c = grid.cell_center(ix, iy);
            if !point_in_building(c, map) {
                grid.cell_to_candidate[iy * nx + ix] = Some(grid.candidates.len());
                grid.candidates.push(c);
            }
        }
    }
    grid
}

/// Result of the candidate passes, with counts after each one.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub points: Vec<Point2>,
    pub after_resample: usize,
    pub after_prune: usize,
    pub after_enclosure: usize,
}

/// Boundary resampling, proximity pruning and enclosure removal.
///
/// Resampled points outside the study area are discarded before pruning.
pub fn generate_candidates(
    map: &BuildingMap,
    params: &PlacementParams,
    reachability: &UeGrid,
) -> Result<CandidateSet, PlacementError> {
    params.validate()?;
    let area = params.area;
    let resampled: Vec<Point2> = map
        .buildings()
        .iter()
        .flat_map(|b| resample_boundary(&b.footprint, params.d1))
        .filter(|p| area.contains(*p))
        .collect();
    if resampled.is_empty() {
        return Err(PlacementError::NoCandidates { step: 1 });
    }
    let pruned = prune_close(&resampled, params.d2);
    let kept = remove_enclosed(&pruned, reachability);
    if kept.is_empty() {
        return Err(PlacementError::NoCandidates { step: 3 });
    }
    Ok(CandidateSet {
        after_resample: resampled.len(),
        after_prune: pruned.len(),
        after_enclosure: kept.len(),
        points: kept,
    })
}

/// Greedy sequential filter: a point survives if it is at least `d2` away
/// from every earlier survivor.
pub fn prune_close(points: &[Point2], d2: f64) -> Vec<Point2> {
    // bucket survivors on a d2-sized hash grid; only neighbouring buckets can conflict
    let key = |p: Point2| ((p.x / d2).floor() as i64, (p.y / d2).floor() as i64);
    let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
    let mut kept: Vec<Point2> = Vec::new();
    let d2sq = d2 * d2;
    for &p in points {
        let (bx, by) = key(p);
        let close = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                buckets
                    .get(&(bx + dx, by + dy))
                    .is_some_and(|ids| ids.iter().any(|&i| kept[i].dist2(p) < d2sq))
            })
        });
        if !close {
            buckets.entry((bx, by)).or_default().push(kept.len());
            kept.push(p);
        }
    }
    kept
}

/// Drop points whose nearest outdoor lattice cell cannot reach the area
/// border through outdoor cells (courtyards, sealed alleys).
pub fn remove_enclosed(points: &[Point2], grid: &UeGrid) -> Vec<Point2> {
    if grid.candidates.is_empty() {
        return Vec::new();
    }
    let reach = grid.reachable_from_border();
    let reachable_candidate: Vec<bool> = (0..grid.candidates.len())
        .map(|k| {
            let (ix, iy) = grid.cell_of(k);
            reach[iy * grid.nx + ix]
        })
        .collect();
    points
        .iter()
        .copied()
        .filter(|&p| {
            let nearest = grid
                .candidates
                .iter()
                .enumerate()
                .min_by(|a, b| p.dist2(*a.1).total_cmp(&p.dist2(*b.1)).then(a.0.cmp(&b.0)))
                .map(|(k, _)| k)
                .expect("non-empty grid");
            reachable_candidate[nearest]
        })
        .collect()
}

/// Centers of the `sqrt(M) x sqrt(M)` grid over `area`, row-major from the
/// lower-left cell (x varies fastest).
pub fn grid_centers(area: &Rect, side: usize) -> Vec<Point2> {
    let w = area.width() / side as f64;
    let h = area.height() / side as f64;
    (0..side)
        .flat_map(|r| {
            (0..side).map(move |c| {
                Point2::new(
                    area.min.x + (c as f64 + 0.5) * w,
                    area.min.y + (r as f64 + 0.5) * h,
                )
            })
        })
        .collect()
}

/// Assign each grid center the nearest still-unused candidate.
///
/// Ties go to the lower x, then the lower y. A chosen candidate is removed
/// from the pool, so the M sites are distinct.
pub fn place_aps(
    candidates: &[Point2],
    params: &PlacementParams,
) -> Result<ApLayout, PlacementError> {
    params.validate()?;
    if candidates.len() < params.m {
        return Err(PlacementError::Shortfall {
            available: candidates.len(),
            requested: params.m,
        });
    }
    let mut used = vec![false; candidates.len()];
    let mut positions = Vec::with_capacity(params.m);
    for c in grid_centers(&params.area, params.grid_side()) {
        let best = candidates
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|(_, a), (_, b)| {
                c.dist2(**a)
                    .total_cmp(&c.dist2(**b))
                    .then(a.x.total_cmp(&b.x))
                    .then(a.y.total_cmp(&b.y))
            })
            .map(|(i, _)| i)
            .expect("pool has at least M candidates");
        used[best] = true;
        positions.push(candidates[best]);
    }
    Ok(ApLayout {
        positions,
        ap_height: params.ap_height,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Building, Polygon};

    fn area(side: f64) -> Rect {
        Rect::square(Point2::new(0.0, 0.0), side)
    }

    fn params(m: usize, side: f64) -> PlacementParams {
        PlacementParams::new(10.0, 5.0, m, area(side), 11.0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(PlacementParams::new(10.0, 5.0, 5, area(100.0), 11.0).is_err());
        assert!(PlacementParams::new(0.0, 5.0, 4, area(100.0), 11.0).is_err());
        assert!(PlacementParams::new(10.0, 5.0, 324, area(750.0), 11.0).is_ok());
    }

    #[test]
    fn paper_density() {
        let layout = ApLayout {
            positions: vec![Point2::default(); 324],
            ap_height: 11.0,
        };
        let lambda = layout.density_per_km2(&area(750.0));
        assert!((lambda - 576.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_prune_collinear() {
        let pts: Vec<_> = [0.0, 3.0, 6.0]
            .iter()
            .map(|&x| Point2::new(x, 0.0))
            .collect();
        assert_eq!(
            prune_close(&pts, 5.0),
            vec![Point2::new(0.0, 0.0), Point2::new(6.0, 0.0)]
        );
        // exactly d2 apart survives
        let pts = vec![Point2::new(0.0, 0.0), Point2::new(5.0, 0.0)];
        assert_eq!(prune_close(&pts, 5.0).len(), 2);
    }

    #[test]
    fn ue_grid_counts() {
        let empty = BuildingMap::empty(area(750.0));
        let g = generate_ue_grid(&empty, 10.0, 1.0);
        assert_eq!(g.candidates.len(), 75 * 75);

        let one = BuildingMap::new(
            vec![Building::new(
                Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0)),
                5.0,
            )],
            area(750.0),
        )
        .unwrap();
        assert_eq!(generate_ue_grid(&one, 10.0, 1.0).candidates.len(), 5624);

        let full = BuildingMap::new(
            vec![Building::new(
                Polygon::rectangle(Point2::new(0.0, 0.0), Point2::new(750.0, 750.0)),
                5.0,
            )],
            area(750.0),
        )
        .unwrap();
        assert!(generate_ue_grid(&full, 10.0, 1.0).candidates.is_empty());
    }

    #[test]
    fn isolated_square_keeps_all_resampled() {
        let map = BuildingMap::new(
            vec![Building::new(
                Polygon::rectangle(Point2::new(80.0, 80.0), Point2::new(120.0, 120.0)),
                20.0,
            )],
            area(200.0),
        )
        .unwrap();
        let grid = generate_ue_grid(&map, 10.0, 1.0);
        let set = generate_candidates(&map, &params(4, 200.0), &grid).unwrap();
        assert_eq!(set.after_resample, 16);
        assert_eq!(set.after_prune, 16);
        assert_eq!(set.after_enclosure, 16);
    }

    #[test]
    fn courtyard_candidates_removed() {
        let outer = Polygon::rectangle(Point2::new(50.0, 50.0), Point2::new(250.0, 250.0));
        let hole = vec![
            Point2::new(100.0, 100.0),
            Point2::new(200.0, 100.0),
            Point2::new(200.0, 200.0),
            Point2::new(100.0, 200.0),
        ];
        let poly = Polygon::new(outer.outer().to_vec(), vec![hole.clone()]).unwrap();
        let hole_poly = Polygon::new(hole, vec![]).unwrap();
        let map = BuildingMap::new(vec![Building::new(poly, 25.0)], area(300.0)).unwrap();
        let grid = generate_ue_grid(&map, 10.0, 1.0);
        let set = generate_candidates(&map, &params(4, 300.0), &grid).unwrap();
        assert_eq!(set.after_resample, 80 + 40);
        assert_eq!(set.after_enclosure, 80);
        assert!(set
            .points
            .iter()
            .all(|&p| hole_poly.distance_to_boundary(p) > 1.0));
    }

    #[test]
    fn place_single_and_identity() {
        let one = place_aps(&[Point2::new(3.0, 4.0)], &params(1, 100.0)).unwrap();
        assert_eq!(one.positions, vec![Point2::new(3.0, 4.0)]);

        let centers = grid_centers(&area(100.0), 2);
        assert_eq!(centers[1], Point2::new(75.0, 25.0));
        let mut shuffled = centers.clone();
        shuffled.reverse();
        let layout = place_aps(&shuffled, &params(4, 100.0)).unwrap();
        assert_eq!(layout.positions, centers);
    }

    #[test]
    fn shortfall_is_reported() {
        let err = place_aps(&[Point2::new(1.0, 1.0)], &params(4, 100.0)).unwrap_err();
        assert!(err.to_string().contains("Step 4 shortfall"));
    }

    #[test]
    fn ties_prefer_lower_x() {
        // both equidistant from the single center (50, 50)
        let cands = [Point2::new(60.0, 50.0), Point2::new(40.0, 50.0)];
        let layout = place_aps(&cands, &params(1, 100.0)).unwrap();
        assert_eq!(layout.positions[0], Point2::new(40.0, 50.0));
        let cands = [Point2::new(50.0, 60.0), Point2::new(50.0, 40.0)];
        let layout = place_aps(&cands, &params(1, 100.0)).unwrap();
        assert_eq!(layout.positions[0], Point2::new(50.0, 40.0));
    }

    #[test]
    fn layout_csv_roundtrip() {
        let layout = ApLayout {
            positions: vec![Point2::new(1.5, 2.0), Point2::new(-3.0, 7.25)],
            ap_height: 11.0,
        };
        let mut buf = Vec::new();
        layout.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("id,x,y\n"));
        assert_eq!(ApLayout::read_csv(buf.as_slice(), 11.0).unwrap(), layout);
    }
}
