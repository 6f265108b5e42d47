//! Large-scale channel gains between APs and UE positions.
//!
//! Three interchangeable backends fill a [`GainTable`]:
//! a three-slope log-distance model with log-normal shadowing, a simplified
//! image-method raytracer over the building map, and gain grids imported from
//! an external tool.

use std::io;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point2, Point3};
use crate::placement::ApLayout;
use crate::rng;

mod grid;
mod raytrace;

pub use grid::{load_gain_grid, GainGrid, GridBlock, GRID_UNIT};
pub use raytrace::{
    knife_edge_loss_db, trace_gain, RaytraceParams, Raytracer, SourceImages, TraceResult,
    MAX_REFLECTION_ORDER,
};

/// Speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise density at 290 K (dBm/Hz).
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid radio parameters: {0}")]
    InvalidParams(String),
    #[error("gain grid: {0}")]
    Grid(String),
    #[error("gain grid is missing AP id {0}")]
    MissingAp(usize),
    #[error("gain grid unit {0:?} is not dB-pathloss")]
    UnitMismatch(String),
    #[error("empty AP or UE set")]
    Empty,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioParams {
    pub frequency_mhz: f64,
    /// Per-AP transmit power (dBm).
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    /// Shadowing standard deviation (dB).
    pub sigma_shadow_db: f64,
    /// Inner breakpoint of the three-slope model (m).
    pub d0: f64,
    /// Outer breakpoint of the three-slope model (m).
    pub dc: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            frequency_mhz: 2000.0,
            tx_power_dbm: 20.0,
            noise_figure_db: 9.0,
            bandwidth_hz: 20e6,
            sigma_shadow_db: 8.0,
            d0: 10.0,
            dc: 50.0,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.frequency_mhz > 0.0) {
            return Err(ChannelError::InvalidParams(
                "frequency must be positive".into(),
            ));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(ChannelError::InvalidParams(
                "bandwidth must be positive".into(),
            ));
        }
        if !(self.d0 > 0.0 && self.d0 < self.dc) {
            return Err(ChannelError::InvalidParams("need 0 < d0 < dc".into()));
        }
        if !(self.sigma_shadow_db >= 0.0) {
            return Err(ChannelError::InvalidParams(
                "shadowing sigma must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Receiver noise power (dBm).
    pub fn noise_dbm(&self) -> f64 {
        THERMAL_NOISE_DBM_HZ + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / (self.frequency_mhz * 1e6)
    }
}

/// COST231-Hata intercept `L0` (dB); `f` in MHz, heights in meters.
pub fn cost231_offset(params: &RadioParams, h_ap: f64, h_ue: f64) -> Result<f64, ChannelError> {
    let f = params.frequency_mhz;
    if !(f > 0.0) {
        return Err(ChannelError::InvalidParams(
            "frequency must be positive".into(),
        ));
    }
    if !(h_ap > 0.0) {
        return Err(ChannelError::InvalidParams(
            "AP height must be positive".into(),
        ));
    }
    let lf = f.log10();
    Ok(46.3 + 33.9 * lf - 13.82 * h_ap.log10() - (1.1 * lf - 0.7) * h_ue + (1.56 * lf - 0.8))
}

/// Mean three-slope path loss (dB). Distances enter the logarithms in km,
/// so the loss at 1 km equals `l0`.
pub fn three_slope_pl(d: f64, l0: f64, params: &RadioParams) -> f64 {
    let d_km = d / 1000.0;
    let dc_km = params.dc / 1000.0;
    let d0_km = params.d0 / 1000.0;
    if d > params.dc {
        l0 + 35.0 * d_km.log10()
    } else if d <= params.d0 {
        l0 + 15.0 * dc_km.log10() + 20.0 * d0_km.log10()
    } else {
        l0 + 15.0 * dc_km.log10() + 20.0 * d_km.log10()
    }
}

/// Log-normal shadowing in dB form.
pub fn apply_shadowing(mean_pl: f64, sigma: f64, z: f64) -> f64 {
    mean_pl + sigma * z
}

/// Average SNR (dB) at full AP power for a given path loss.
pub fn snr_from_pl(pl: f64, params: &RadioParams) -> f64 {
    if pl == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    params.tx_power_dbm - pl - params.noise_dbm()
}

/// Free-space path loss (dB) over `d` meters.
pub fn fspl_db(d: f64, frequency_mhz: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * d * frequency_mhz * 1e6 / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendTag {
    LogDistance,
    Raytrace,
    Imported,
}

impl BackendTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendTag::LogDistance => "log_distance",
            BackendTag::Raytrace => "raytrace",
            BackendTag::Imported => "imported",
        }
    }
}

impl std::fmt::Display for BackendTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Path-loss source for [`build_gain_table`].
#[derive(Debug, Clone)]
pub enum ChannelBackend {
    /// Three-slope model; shadowing for pair `(m, k)` is drawn from the
    /// stream keyed by `(shadow_seed, m, k)`.
    LogDistance {
        shadow_seed: u64,
    },
    Raytrace(Box<Raytracer>),
    Imported(GainGrid),
}

impl ChannelBackend {
    pub fn tag(&self) -> BackendTag {
        match self {
            ChannelBackend::LogDistance { .. } => BackendTag::LogDistance,
            ChannelBackend::Raytrace(_) => BackendTag::Raytrace,
            ChannelBackend::Imported(_) => BackendTag::Imported,
        }
    }

    /// Same backend with a different shadowing stream.
    pub fn reseeded(&self, shadow_seed: u64) -> ChannelBackend {
        match self {
            ChannelBackend::LogDistance { .. } => ChannelBackend::LogDistance { shadow_seed },
            other => other.clone(),
        }
    }
}

/// `M x N` path loss and SNR matrices (rows = APs, columns = UE positions).
///
/// Outage entries hold `+inf` path loss and `-inf` SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable {
    pathloss_db: DMatrix<f64>,
    snr_db: DMatrix<f64>,
    backend: BackendTag,
    nearest_ap: Vec<usize>,
}

impl GainTable {
    /// Builds the SNR matrix from path losses at full AP power.
    pub fn from_pathloss(
        pathloss_db: DMatrix<f64>,
        radio: &RadioParams,
        backend: BackendTag,
        nearest_ap: Vec<usize>,
    ) -> Self {
        assert_eq!(nearest_ap.len(), pathloss_db.ncols());
        let snr_db = pathloss_db.map(|pl| snr_from_pl(pl, radio));
        Self {
            pathloss_db,
            snr_db,
            backend,
            nearest_ap,
        }
    }

    /// Table given directly in SNR (dB); path loss is reconstructed.
    /// The geometrically nearest AP defaults to AP 0 for every UE.
    pub fn from_snr_db(snr_db: DMatrix<f64>, radio: &RadioParams, backend: BackendTag) -> Self {
        let noise = radio.noise_dbm();
        let pathloss_db = snr_db.map(|s| {
            if s == f64::NEG_INFINITY {
                f64::INFINITY
            } else {
                radio.tx_power_dbm - s - noise
            }
        });
        let n = snr_db.ncols();
        Self {
            pathloss_db,
            snr_db,
            backend,
            nearest_ap: vec![0; n],
        }
    }

    pub fn n_aps(&self) -> usize {
        self.pathloss_db.nrows()
    }

    pub fn n_ues(&self) -> usize {
        self.pathloss_db.ncols()
    }

    pub fn backend(&self) -> BackendTag {
        self.backend
    }

    pub fn pathloss_db(&self, m: usize, k: usize) -> f64 {
        self.pathloss_db[(m, k)]
    }

    pub fn snr_db(&self, m: usize, k: usize) -> f64 {
        self.snr_db[(m, k)]
    }

    /// Linear SNR `beta_mk`; zero in outage.
    pub fn snr_linear(&self, m: usize, k: usize) -> f64 {
        db_to_linear(self.snr_db[(m, k)])
    }

    pub fn pathloss_matrix(&self) -> &DMatrix<f64> {
        &self.pathloss_db
    }

    pub fn snr_matrix(&self) -> &DMatrix<f64> {
        &self.snr_db
    }

    /// Index of the geometrically closest AP to UE `k`.
    pub fn nearest_ap(&self, k: usize) -> usize {
        self.nearest_ap[k]
    }

    /// Sub-table restricted to the given UE columns, in that order.
    pub fn select_ues(&self, columns: &[usize]) -> GainTable {
        GainTable {
            pathloss_db: self.pathloss_db.select_columns(columns),
            snr_db: self.snr_db.select_columns(columns),
            backend: self.backend,
            nearest_ap: columns.iter().map(|&k| self.nearest_ap[k]).collect(),
        }
    }

    /// Rows of `ap_id,ue_index,pathloss_db,snr_db`; outage as `inf` / `-inf`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), ChannelError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["ap_id", "ue_index", "pathloss_db", "snr_db"])?;
        for m in 0..self.n_aps() {
            for k in 0..self.n_ues() {
                wr.write_record([
                    m.to_string(),
                    k.to_string(),
                    fmt_db(self.pathloss_db(m, k)),
                    fmt_db(self.snr_db(m, k)),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Shortest round-trip float text, with `inf` / `-inf` sentinels.
pub fn fmt_db(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        v.to_string()
    }
}

/// Path loss and SNR for every AP/UE pair under `backend`.
pub fn build_gain_table(
    aps: &ApLayout,
    ues: &[Point2],
    ue_height: f64,
    backend: &ChannelBackend,
    radio: &RadioParams,
) -> Result<GainTable, ChannelError> {
    radio.validate()?;
    if aps.is_empty() || ues.is_empty() {
        return Err(ChannelError::Empty);
    }
    let m_count = aps.len();
    let k_count = ues.len();
    let rows: Vec<Vec<f64>> = match backend {
        ChannelBackend::LogDistance { shadow_seed } => {
            let l0 = cost231_offset(radio, aps.ap_height, ue_height)?;
            (0..m_count)
                .into_par_iter()
                .map(|m| {
                    let ap = aps.positions[m];
                    (0..k_count)
                        .map(|k| {
                            let mean = three_slope_pl(ap.dist(ues[k]), l0, radio);
                            let z: f64 = if radio.sigma_shadow_db > 0.0 {
                                StandardNormal.sample(&mut rng::stream(
                                    *shadow_seed,
                                    &[rng::tag::SHADOWING, m as u64, k as u64],
                                ))
                            } else {
                                0.0
                            };
                            apply_shadowing(mean, radio.sigma_shadow_db, z)
                        })
                        .collect()
                })
                .collect()
        }
        ChannelBackend::Raytrace(tracer) => (0..m_count)
            .into_par_iter()
            .map(|m| {
                let tx = Point3::at(aps.positions[m], aps.ap_height);
                let source = tracer.source(tx, ue_height);
                ues.iter()
                    .map(|&u| {
                        tracer
                            .trace_from(&source, Point3::at(u, ue_height), radio)
                            .path_loss_db
                    })
                    .collect()
            })
            .collect(),
        ChannelBackend::Imported(grid) => {
            if grid.n_aps() < m_count {
                return Err(ChannelError::MissingAp(grid.n_aps()));
            }
            (0..m_count)
                .map(|m| ues.iter().map(|&u| grid.lookup(m, u)).collect())
                .collect()
        }
    };
    let pathloss = DMatrix::from_fn(m_count, k_count, |m, k| rows[m][k]);
    let nearest = ues
        .iter()
        .map(|&u| {
            aps.positions
                .iter()
                .enumerate()
                .min_by(|a, b| u.dist2(*a.1).total_cmp(&u.dist2(*b.1)).then(a.0.cmp(&b.0)))
                .map(|(m, _)| m)
                .expect("non-empty layout")
        })
        .collect();
    Ok(GainTable::from_pathloss(
        pathloss,
        radio,
        backend.tag(),
        nearest,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{BuildingMap, Rect};

    fn radio() -> RadioParams {
        RadioParams::default()
    }

    #[test]
    fn cost231_examples() {
        let r = radio();
        let l0 = cost231_offset(&r, 11.0, 1.0).unwrap();
        assert!((l0 - 145.23).abs() < 0.01, "{l0}");
        let l0_ground = cost231_offset(&r, 11.0, 0.0).unwrap();
        assert!((l0_ground - 148.16).abs() < 0.01, "{l0_ground}");
        // h_ue coefficient at 2 GHz
        assert!((l0_ground - l0 - (1.1 * 2000f64.log10() - 0.7)).abs() < 1e-12);
        let l0_22 = cost231_offset(&r, 22.0, 1.0).unwrap();
        assert!((l0 - l0_22 - 13.82 * 2f64.log10()).abs() < 1e-12);
        assert!(cost231_offset(&r, 0.0, 1.0).is_err());
        let bad = RadioParams {
            frequency_mhz: 0.0,
            ..r
        };
        assert!(cost231_offset(&bad, 11.0, 1.0).is_err());
    }

    #[test]
    fn three_slope_examples() {
        let r = radio();
        assert_eq!(three_slope_pl(1000.0, 145.23, &r), 145.23);
        let at50 = three_slope_pl(50.0, 145.23, &r);
        // 145.23 + 15 log10(0.05) + 20 log10(0.05)
        assert!((at50 - 99.69).abs() < 0.005, "{at50}");
        for bp in [10.0, 50.0] {
            let a = three_slope_pl(bp, 145.23, &r);
            assert!((a - three_slope_pl(bp - 1e-9, 145.23, &r)).abs() < 1e-6);
            assert!((a - three_slope_pl(bp + 1e-9, 145.23, &r)).abs() < 1e-6);
        }
        // flat inside d0
        assert_eq!(
            three_slope_pl(0.0, 145.23, &r),
            three_slope_pl(10.0, 145.23, &r)
        );
    }

    #[test]
    fn shadowing_examples() {
        assert_eq!(apply_shadowing(100.0, 0.0, 1.7), 100.0);
        assert_eq!(apply_shadowing(100.0, 8.0, 1.0), 108.0);
    }

    #[test]
    fn snr_examples() {
        let r = radio();
        assert!((r.noise_dbm() + 91.99).abs() < 0.005);
        assert!((snr_from_pl(99.69, &r) - 12.30).abs() < 0.005);
        assert_eq!(snr_from_pl(r.tx_power_dbm - r.noise_dbm(), &r), 0.0);
        assert_eq!(snr_from_pl(f64::INFINITY, &r), f64::NEG_INFINITY);
    }

    #[test]
    fn fspl_100m() {
        let v = fspl_db(100.0, 2000.0);
        assert!((v - 78.46).abs() < 0.01, "{v}");
    }

    #[test]
    fn single_pair_log_distance_is_l0_at_1km() {
        let r = RadioParams {
            sigma_shadow_db: 0.0,
            ..radio()
        };
        let aps = ApLayout {
            positions: vec![Point2::new(0.0, 0.0)],
            ap_height: 11.0,
        };
        let t = build_gain_table(
            &aps,
            &[Point2::new(1000.0, 0.0)],
            1.0,
            &ChannelBackend::LogDistance { shadow_seed: 1 },
            &r,
        )
        .unwrap();
        assert_eq!(t.pathloss_db(0, 0), cost231_offset(&r, 11.0, 1.0).unwrap());
        assert_eq!(t.backend(), BackendTag::LogDistance);
    }

    #[test]
    fn shadowing_statistics() {
        // 10^5 draws through the table's own stream keying
        let r = radio();
        let aps = ApLayout {
            positions: vec![Point2::new(0.0, 0.0)],
            ap_height: 11.0,
        };
        let ues = vec![Point2::new(1000.0, 0.0); 100_000];
        let t = build_gain_table(
            &aps,
            &ues,
            1.0,
            &ChannelBackend::LogDistance { shadow_seed: 9 },
            &r,
        )
        .unwrap();
        let l0 = cost231_offset(&r, 11.0, 1.0).unwrap();
        let n = ues.len() as f64;
        let mean = (0..ues.len()).map(|k| t.pathloss_db(0, k)).sum::<f64>() / n;
        let var = (0..ues.len())
            .map(|k| (t.pathloss_db(0, k) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!((mean - l0).abs() < 0.1, "mean {mean}");
        assert!((var.sqrt() - 8.0).abs() < 0.1, "std {}", var.sqrt());
    }

    #[test]
    fn raytrace_backend_on_empty_map_is_fspl() {
        let r = radio();
        let map = BuildingMap::empty(Rect::square(Point2::new(0.0, 0.0), 200.0));
        let tracer = Raytracer::new(&map, RaytraceParams::default());
        let aps = ApLayout {
            positions: vec![Point2::new(10.0, 10.0), Point2::new(150.0, 20.0)],
            ap_height: 11.0,
        };
        let ues = [Point2::new(100.0, 120.0), Point2::new(30.0, 5.0)];
        let t = build_gain_table(
            &aps,
            &ues,
            1.0,
            &ChannelBackend::Raytrace(Box::new(tracer)),
            &r,
        )
        .unwrap();
        for m in 0..2 {
            for k in 0..2 {
                let d = Point3::at(aps.positions[m], 11.0).dist(Point3::at(ues[k], 1.0));
                assert!((t.pathloss_db(m, k) - fspl_db(d, 2000.0)).abs() < 1e-9);
            }
        }
        assert_eq!(t.nearest_ap(0), 1);
        assert_eq!(t.nearest_ap(1), 0);
    }

    #[test]
    fn csv_uses_sentinels() {
        let r = radio();
        let t = GainTable::from_pathloss(
            DMatrix::from_row_slice(1, 2, &[100.0, f64::INFINITY]),
            &r,
            BackendTag::Imported,
            vec![0, 0],
        );
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("0,1,inf,-inf"));
        assert!(text.starts_with("ap_id,ue_index,pathloss_db,snr_db\n"));
    }

    #[test]
    fn select_ues_reorders_columns() {
        let r = radio();
        let t = GainTable::from_pathloss(
            DMatrix::from_row_slice(1, 3, &[90.0, 100.0, 110.0]),
            &r,
            BackendTag::Imported,
            vec![0, 0, 0],
        );
        let s = t.select_ues(&[2, 0]);
        assert_eq!(s.pathloss_db(0, 0), 110.0);
        assert_eq!(s.pathloss_db(0, 1), 90.0);
    }
}
