//! Monte-Carlo campaigns over UE drops and `(G, E)` sweep points.
//!
//! Every drop draws `K` distinct UE positions from the UE lattice, computes
//! their gains, and evaluates each sweep point on the same positions and the
//! same fading stream. Random streams are keyed by `(seed, purpose, drop)`, so
//! results do not depend on the worker count or on scheduling order.

use std::io;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfnet::{assign_all, build_clusters, CfnetError, ClusterPlan};
use crate::channel::{
    build_gain_table, fmt_db, BackendTag, ChannelBackend, ChannelError, GainTable, RadioParams,
};
use crate::geom::{Point2, Rect};
use crate::placement::{ApLayout, UeGrid};
use crate::rng;
use crate::sephy::{downlink_se, FrameParams, SephyError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid campaign: {0}")]
    Config(String),
    #[error("UE lattice has {available} candidates, {k} needed per drop")]
    TooFewCandidates { available: usize, k: usize },
    #[error("no samples to aggregate")]
    EmptySamples,
    #[error("AP index {index} out of range for {m} APs")]
    ApOutOfRange { index: usize, m: usize },
    #[error("sweep point G={g}, E={e}, backend {backend}: {source}")]
    AtPoint {
        g: usize,
        e: usize,
        backend: BackendTag,
        source: Box<SimError>,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Cfnet(#[from] CfnetError),
    #[error(transparent)]
    Sephy(#[from] SephyError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Clusters per side.
    pub g: usize,
    /// Anchor APs per UE.
    pub e: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    /// UEs per drop.
    pub k: usize,
    pub n_drops: usize,
    pub seed: u64,
    /// Study area `S`; also the cluster grid extent.
    pub area: Rect,
    /// Concentric evaluation area `S'`.
    pub inner_area: Rect,
    pub sweep: Vec<SweepPoint>,
    pub frame: FrameParams,
    pub radio: RadioParams,
    /// Half-width in percentile points of the SE bands used for the serving
    /// size of median and 95%-likely UEs.
    pub band: f64,
}

impl CampaignConfig {
    pub fn validate(&self, m: usize) -> Result<(), SimError> {
        let bad = |s: String| Err(SimError::Config(s));
        if self.k == 0 {
            return bad("K must be at least 1".into());
        }
        if self.n_drops == 0 {
            return bad("n_drops must be at least 1".into());
        }
        if self.sweep.is_empty() {
            return bad("empty sweep".into());
        }
        if !self.area.contains_rect(&self.inner_area) {
            return bad("inner area is larger than the study area".into());
        }
        let (c, ci) = (self.area.center(), self.inner_area.center());
        if c.dist(ci) > 1e-6 * self.area.width().max(1.0) {
            return bad("inner area is not concentric with the study area".into());
        }
        for p in &self.sweep {
            if p.g == 0 {
                return bad("G must be at least 1".into());
            }
            if p.e == 0 || p.e > m {
                return bad(format!("E = {} outside 1..={m}", p.e));
            }
        }
        if !(self.band >= 0.0 && self.band < 5.0) {
            return bad("band must lie in [0, 5)".into());
        }
        self.frame.validate(self.k)?;
        self.radio.validate()?;
        Ok(())
    }
}

/// Outcome for one UE of one drop at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct UeRecord {
    pub backend: BackendTag,
    pub g: usize,
    pub e: usize,
    pub drop: usize,
    /// Slot within the drop.
    pub ue: usize,
    pub position: Point2,
    /// Inside `S'`.
    pub inside: bool,
    pub se: f64,
    pub sinr: f64,
    pub serving_size: usize,
}

/// Records of one drop plus its gain table (for link statistics).
#[derive(Debug, Clone)]
pub struct DropOutput {
    pub records: Vec<UeRecord>,
    pub gains: GainTable,
}

/// One drop for every sweep point. `plans[i]` is the cluster plan of
/// `config.sweep[i]`.
pub fn run_drop(
    drop: usize,
    config: &CampaignConfig,
    aps: &ApLayout,
    grid: &UeGrid,
    plans: &[ClusterPlan],
    backend: &ChannelBackend,
) -> Result<DropOutput, SimError> {
    let n = grid.candidates.len();
    if n < config.k {
        return Err(SimError::TooFewCandidates {
            available: n,
            k: config.k,
        });
    }
    let d = drop as u64;
    let mut rng_ue = rng::stream(config.seed, &[rng::tag::UE_SAMPLING, d]);
    let picks = index::sample(&mut rng_ue, n, config.k).into_vec();
    let positions: Vec<Point2> = picks.iter().map(|&i| grid.candidates[i]).collect();

    let reseeded;
    let backend = match backend {
        ChannelBackend::LogDistance { .. } => {
            reseeded = backend.reseeded(rng::derive_seed(config.seed, &[rng::tag::SHADOWING, d]));
            &reseeded
        }
        other => other,
    };
    let gains = build_gain_table(aps, &positions, grid.ue_height, backend, &config.radio)?;
    let tag = backend.tag();

    let mut records = Vec::with_capacity(config.k * config.sweep.len());
    for (point, plan) in config.sweep.iter().zip(plans) {
        let ctx = |e: SimError| SimError::AtPoint {
            g: point.g,
            e: point.e,
            backend: tag,
            source: Box::new(e),
        };
        let assignment = assign_all(&gains, plan, point.e).map_err(|e| ctx(e.into()))?;
        let mut rng_fading = rng::stream(config.seed, &[rng::tag::FADING, d]);
        let se = downlink_se(
            &gains,
            &assignment,
            &config.frame,
            &config.radio,
            &mut rng_fading,
        )
        .map_err(|e| ctx(e.into()))?;
        for (ue, &p) in positions.iter().enumerate() {
            records.push(UeRecord {
                backend: tag,
                g: point.g,
                e: point.e,
                drop,
                ue,
                position: p,
                inside: config.inner_area.contains(p),
                se: se.se[ue],
                sinr: se.sinr[ue],
                serving_size: se.serving_size[ue],
            });
        }
    }
    Ok(DropOutput { records, gains })
}

/// Keeps records inside `S'` (closed rectangle).
pub fn border_filter(records: &[UeRecord]) -> Vec<UeRecord> {
    records.iter().filter(|r| r.inside).cloned().collect()
}

/// Percentile `p` (0..=100) of ascending `sorted` by linear interpolation
/// between order statistics at rank `p / 100 * (n - 1)`.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p.clamp(0.0, 100.0) / 100.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    let (a, b) = (sorted[lo], sorted[hi]);
    Some(if frac == 0.0 || a == b || a == f64::NEG_INFINITY {
        a
    } else if b == f64::INFINITY {
        b
    } else {
        a + (b - a) * frac
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub n_samples: usize,
    pub mean_se: f64,
    pub median_se: f64,
    /// 5th percentile.
    pub se_95_likely: f64,
    pub mean_serving_size: f64,
    /// Mean serving size of UEs whose SE is within the band around the median.
    pub serving_size_median: f64,
    /// Same around the 5th percentile.
    pub serving_size_95_likely: f64,
}

/// Mean serving size over samples with SE between percentiles `p - band` and
/// `p + band`; falls back to the sample closest to percentile `p` when no SE
/// value lies in that band.
fn band_serving_size(se: &[f64], sorted: &[f64], serving: &[usize], p: f64, band: f64) -> f64 {
    let lo = percentile(sorted, p - band).unwrap();
    let hi = percentile(sorted, p + band).unwrap();
    let (sum, count) = se
        .iter()
        .zip(serving)
        .filter(|(&s, _)| s >= lo && s <= hi)
        .fold((0usize, 0usize), |(s, c), (_, &n)| (s + n, c + 1));
    if count > 0 {
        return sum as f64 / count as f64;
    }
    let target = percentile(sorted, p).unwrap();
    let best = (0..se.len())
        .min_by(|&a, &b| (se[a] - target).abs().total_cmp(&(se[b] - target).abs()))
        .unwrap();
    serving[best] as f64
}

/// Pooled statistics of SE and serving-size samples.
pub fn aggregate(se: &[f64], serving: &[usize], band: f64) -> Result<Summary, SimError> {
    if se.is_empty() {
        return Err(SimError::EmptySamples);
    }
    assert_eq!(se.len(), serving.len());
    let mut sorted = se.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = se.len() as f64;
    Ok(Summary {
        n_samples: se.len(),
        mean_se: se.iter().sum::<f64>() / n,
        median_se: percentile(&sorted, 50.0).unwrap(),
        se_95_likely: percentile(&sorted, 5.0).unwrap(),
        mean_serving_size: serving.iter().sum::<usize>() as f64 / n,
        serving_size_median: band_serving_size(se, &sorted, serving, 50.0, band),
        serving_size_95_likely: band_serving_size(se, &sorted, serving, 5.0, band),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub backend: BackendTag,
    pub g: usize,
    pub e: usize,
    /// Mean cluster size `M / G^2`.
    pub q: f64,
    /// Pooled samples of UEs inside `S'`, drop-major.
    pub se: Vec<f64>,
    pub serving_size: Vec<usize>,
    pub summary: Summary,
}

/// Pooled link SNRs of one backend.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCdf {
    pub backend: BackendTag,
    /// Ascending; outage entries are `-inf`.
    pub sorted_snr_db: Vec<f64>,
}

impl LinkCdf {
    pub fn outage_fraction(&self) -> f64 {
        if self.sorted_snr_db.is_empty() {
            return 0.0;
        }
        let n_out = self
            .sorted_snr_db
            .iter()
            .take_while(|v| **v == f64::NEG_INFINITY)
            .count();
        n_out as f64 / self.sorted_snr_db.len() as f64
    }

    pub fn percentile(&self, p: f64) -> Option<f64> {
        percentile(&self.sorted_snr_db, p)
    }

    /// `# outage_fraction=..` preamble, then `snr_db,cdf` rows for the finite
    /// samples; the CDF counts outage samples as lying below every finite one.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> Result<(), SimError> {
        writeln!(w, "# backend={}", self.backend)?;
        writeln!(w, "# outage_fraction={}", self.outage_fraction())?;
        let n = self.sorted_snr_db.len() as f64;
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["snr_db", "cdf"])?;
        for (i, &v) in self.sorted_snr_db.iter().enumerate() {
            if v.is_finite() {
                wr.write_record([v.to_string(), ((i + 1) as f64 / n).to_string()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pool every `beta_mk` of `tables` into a sorted sample.
pub fn link_snr_cdf<'a>(
    backend: BackendTag,
    tables: impl IntoIterator<Item = &'a GainTable>,
) -> LinkCdf {
    let mut v: Vec<f64> = tables
        .into_iter()
        .flat_map(|t| t.snr_matrix().iter().copied())
        .collect();
    v.sort_by(f64::total_cmp);
    LinkCdf {
        backend,
        sorted_snr_db: v,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub points: Vec<PointReport>,
    /// Every record, inside `S'` or not, in backend / drop / sweep order.
    pub records: Vec<UeRecord>,
    pub links: Vec<LinkCdf>,
}

impl CampaignReport {
    pub fn point(&self, backend: BackendTag, g: usize, e: usize) -> Option<&PointReport> {
        self.points
            .iter()
            .find(|p| p.backend == backend && p.g == g && p.e == e)
    }

    pub fn link_cdf(&self, backend: BackendTag) -> Option<&LinkCdf> {
        self.links.iter().find(|l| l.backend == backend)
    }

    pub fn write_summary_csv<W: io::Write>(&self, w: W) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "backend",
            "G",
            "E",
            "Q",
            "n_samples",
            "mean_se",
            "median_se",
            "se_95_likely",
            "mean_serving_size",
            "serving_size_median",
            "serving_size_95_likely",
        ])?;
        for p in &self.points {
            let s = &p.summary;
            wr.write_record([
                p.backend.to_string(),
                p.g.to_string(),
                p.e.to_string(),
                p.q.to_string(),
                s.n_samples.to_string(),
                s.mean_se.to_string(),
                s.median_se.to_string(),
                s.se_95_likely.to_string(),
                s.mean_serving_size.to_string(),
                s.serving_size_median.to_string(),
                s.serving_size_95_likely.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_raw_csv<W: io::Write>(&self, w: W) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "backend",
            "G",
            "E",
            "drop",
            "ue",
            "x",
            "y",
            "inside",
            "se",
            "sinr",
            "serving_size",
        ])?;
        for r in &self.records {
            wr.write_record([
                r.backend.to_string(),
                r.g.to_string(),
                r.e.to_string(),
                r.drop.to_string(),
                r.ue.to_string(),
                r.position.x.to_string(),
                r.position.y.to_string(),
                (r.inside as u8).to_string(),
                r.se.to_string(),
                r.sinr.to_string(),
                r.serving_size.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs every drop for every backend on a pool of `workers` threads.
pub fn run_campaign(
    config: &CampaignConfig,
    aps: &ApLayout,
    grid: &UeGrid,
    backends: &[ChannelBackend],
    workers: usize,
) -> Result<CampaignReport, SimError> {
    config.validate(aps.len())?;
    if grid.candidates.len() < config.k {
        return Err(SimError::TooFewCandidates {
            available: grid.candidates.len(),
            k: config.k,
        });
    }
    let plans = config
        .sweep
        .iter()
        .map(|p| build_clusters(aps, config.area, p.g))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()?;

    let mut points = Vec::new();
    let mut records = Vec::new();
    let mut links = Vec::new();
    for backend in backends {
        let drops: Vec<DropOutput> = pool.install(|| {
            (0..config.n_drops)
                .into_par_iter()
                .map(|d| run_drop(d, config, aps, grid, &plans, backend))
                .collect::<Result<Vec<_>, _>>()
        })?;
        let tag = backend.tag();
        for (i, (point, plan)) in config.sweep.iter().zip(&plans).enumerate() {
            let kept: Vec<&UeRecord> = drops
                .iter()
                .flat_map(|d| d.records[i * config.k..(i + 1) * config.k].iter())
                .filter(|r| r.inside)
                .collect();
            let se: Vec<f64> = kept.iter().map(|r| r.se).collect();
            let serving: Vec<usize> = kept.iter().map(|r| r.serving_size).collect();
            let summary = aggregate(&se, &serving, config.band).map_err(|e| SimError::AtPoint {
                g: point.g,
                e: point.e,
                backend: tag,
                source: Box::new(e),
            })?;
            points.push(PointReport {
                backend: tag,
                g: point.g,
                e: point.e,
                q: plan.mean_cluster_size(),
                se,
                serving_size: serving,
                summary,
            });
        }
        links.push(link_snr_cdf(tag, drops.iter().map(|d| &d.gains)));
        records.extend(drops.into_iter().flat_map(|d| d.records));
    }
    Ok(CampaignReport {
        points,
        records,
        links,
    })
}

/// SNR lattice of one AP over the UE grid. Cells inside buildings are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub ap: usize,
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major from the lowest row, cell centers.
    pub snr_db: Vec<f64>,
}

impl Heatmap {
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.snr_db[iy * self.nx + ix]
    }

    /// Comment preamble with the lattice geometry (`origin_*` is the center
    /// of cell (0, 0)), then `ny` rows of `nx` values. Building cells are
    /// `nan`, outage cells `-inf`.
    pub fn write_csv<W: io::Write>(&self, mut w: W) -> Result<(), SimError> {
        writeln!(w, "# ap={}", self.ap)?;
        writeln!(w, "# origin_x={}", self.origin.x)?;
        writeln!(w, "# origin_y={}", self.origin.y)?;
        writeln!(w, "# spacing={}", self.spacing)?;
        writeln!(w, "# nx={}", self.nx)?;
        writeln!(w, "# ny={}", self.ny)?;
        let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.snr_db.chunks(self.nx.max(1)) {
            wr.write_record(
                row.iter()
                    .map(|&v| if v.is_nan() { "nan".into() } else { fmt_db(v) }),
            )?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Heatmap of AP `ap` from a gain table whose columns are the candidates of
/// `grid`, in order.
pub fn snr_heatmap(ap: usize, gains: &GainTable, grid: &UeGrid) -> Result<Heatmap, SimError> {
    if ap >= gains.n_aps() {
        return Err(SimError::ApOutOfRange {
            index: ap,
            m: gains.n_aps(),
        });
    }
    if gains.n_ues() != grid.candidates.len() {
        return Err(SimError::Config(format!(
            "gain table has {} columns, lattice has {} candidates",
            gains.n_ues(),
            grid.candidates.len()
        )));
    }
    let mut snr = Vec::with_capacity(grid.nx * grid.ny);
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            snr.push(match grid.cell(ix, iy) {
                Some(k) => gains.snr_db(ap, k),
                None => f64::NAN,
            });
        }
    }
    Ok(Heatmap {
        ap,
        origin: grid.cell_center(0, 0),
        spacing: grid.spacing,
        nx: grid.nx,
        ny: grid.ny,
        snr_db: snr,
    })
}
