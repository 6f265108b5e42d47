//! Synthetic city layouts.
//!
//! Two qualitative families are shipped as TOML configs under `maps/`:
//! a "canyon" layout (large perimeter blocks with inner courtyards separated
//! by narrow streets) and an "open-blocks" layout (small detached blocks with
//! wide open space and randomly omitted lots).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Building, BuildingMap, GeomError, Point2, Polygon, Rect};

/// Block-grid generator parameters. All lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticMapConfig {
    pub name: String,
    /// `[min_x, min_y, max_x, max_y]` of the study area.
    pub extent: [f64; 4],
    /// Position of the first block slot relative to the extent's lower-left
    /// corner. Negative values start the grid outside the area; blocks are
    /// clipped to the extent.
    pub origin_offset: f64,
    pub block_size: f64,
    /// Each block side is shortened by a uniform draw in `[0, block_jitter]`.
    #[serde(default)]
    pub block_jitter: f64,
    pub street_width: f64,
    /// Wall thickness of perimeter blocks. When set, each block large enough
    /// gets a courtyard hole inset by this margin.
    #[serde(default)]
    pub courtyard_margin: Option<f64>,
    /// Uniform building height range `[min, max]`.
    pub height_range: [f64; 2],
    /// Probability that a block slot is left empty.
    #[serde(default)]
    pub open_fraction: f64,
    pub seed: u64,
}

/// Smallest clipped block side kept, and smallest courtyard side cut.
const MIN_BLOCK_SIDE: f64 = 5.0;
const MIN_COURTYARD_SIDE: f64 = 20.0;

impl SyntheticMapConfig {
    pub fn from_toml(text: &str) -> Result<Self, GeomError> {
        toml::from_str(text).map_err(|e| GeomError::Malformed(e.to_string()))
    }

    pub fn extent_rect(&self) -> Rect {
        let [x0, y0, x1, y1] = self.extent;
        Rect::new(Point2::new(x0, y0), Point2::new(x1, y1))
    }

    pub fn generate(&self) -> Result<BuildingMap, GeomError> {
        let extent = self.extent_rect();
        let pitch = self.block_size + self.street_width;
        if !(pitch > 0.0 && self.block_size > 0.0) {
            return Err(GeomError::Malformed(
                "block_size and pitch must be positive".into(),
            ));
        }
        let [h_lo, h_hi] = self.height_range;
        if !(h_lo > 0.0 && h_hi >= h_lo) {
            return Err(GeomError::Malformed("invalid height_range".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut buildings = Vec::new();

        let mut y = extent.min.y + self.origin_offset;
        while y < extent.max.y {
            let mut x = extent.min.x + self.origin_offset;
            while x < extent.max.x {
                // fixed draw count per slot keeps the stream layout-independent
                let skip: f64 = rng.random();
                let jx: f64 = rng.random::<f64>() * self.block_jitter;
                let jy: f64 = rng.random::<f64>() * self.block_jitter;
                let height = h_lo + (h_hi - h_lo) * rng.random::<f64>();

                let slot_x = x;
                x += pitch;
                if skip < self.open_fraction {
                    continue;
                }
                let lo = Point2::new(slot_x.max(extent.min.x), y.max(extent.min.y));
                let hi = Point2::new(
                    (slot_x + self.block_size - jx).min(extent.max.x),
                    (y + self.block_size - jy).min(extent.max.y),
                );
                if hi.x - lo.x < MIN_BLOCK_SIDE || hi.y - lo.y < MIN_BLOCK_SIDE {
                    continue;
                }
                buildings.push(Building::new(self.block(lo, hi)?, height));
            }
            y += pitch;
        }
        BuildingMap::new(buildings, extent)
    }

    fn block(&self, lo: Point2, hi: Point2) -> Result<Polygon, GeomError> {
        let outer = rect_ring(lo, hi);
        let holes = match self.courtyard_margin {
            Some(m)
                if hi.x - lo.x - 2.0 * m >= MIN_COURTYARD_SIDE
                    && hi.y - lo.y - 2.0 * m >= MIN_COURTYARD_SIDE =>
            {
                vec![rect_ring(
                    Point2::new(lo.x + m, lo.y + m),
                    Point2::new(hi.x - m, hi.y - m),
                )]
            }
            _ => vec![],
        };
        Polygon::new(outer, holes)
    }
}

fn rect_ring(lo: Point2, hi: Point2) -> Vec<Point2> {
    vec![lo, Point2::new(hi.x, lo.y), hi, Point2::new(lo.x, hi.y)]
}
