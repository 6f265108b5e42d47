//! CPU clusters and UE-centric serving sets.
//!
//! The study area is tiled into `G x G` equal square cells; every AP joins the
//! cluster of the cell containing it. A UE picks its `E` strongest APs
//! (anchors) and is served by the union of the anchors' clusters.

use std::io;

use thiserror::Error;

use crate::channel::GainTable;
use crate::geom::Rect;
use crate::placement::ApLayout;

#[derive(Debug, Error)]
pub enum CfnetError {
    #[error("cluster grid side must be at least 1")]
    ZeroGrid,
    #[error("E = {e} must lie in 1..={m}")]
    BadAnchorCount { e: usize, m: usize },
    #[error("gain table has {table} APs but the cluster plan has {plan}")]
    ApMismatch { table: usize, plan: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPlan {
    grid: usize,
    area: Rect,
    cluster_of_ap: Vec<usize>,
    aps_of_cluster: Vec<Vec<usize>>,
}

impl ClusterPlan {
    /// Clusters per side.
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn area(&self) -> Rect {
        self.area
    }

    pub fn n_clusters(&self) -> usize {
        self.aps_of_cluster.len()
    }

    pub fn n_aps(&self) -> usize {
        self.cluster_of_ap.len()
    }

    pub fn cluster_of_ap(&self, m: usize) -> usize {
        self.cluster_of_ap[m]
    }

    /// APs of cluster `c`, ascending.
    pub fn aps_of_cluster(&self, c: usize) -> &[usize] {
        &self.aps_of_cluster[c]
    }

    /// Average cluster size `Q = M / G^2`.
    pub fn mean_cluster_size(&self) -> f64 {
        self.n_aps() as f64 / self.n_clusters() as f64
    }
}

/// Cell index along one axis. A coordinate on an inner cell boundary belongs
/// to the higher cell; the far edge of the area belongs to the last cell.
fn cell_index(v: f64, lo: f64, width: f64, g: usize) -> usize {
    let i = ((v - lo) / width).floor();
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(g - 1)
    }
}

/// Cluster id is `cy * G + cx`.
pub fn build_clusters(aps: &ApLayout, area: Rect, g: usize) -> Result<ClusterPlan, CfnetError> {
    if g == 0 {
        return Err(CfnetError::ZeroGrid);
    }
    let wx = area.width() / g as f64;
    let wy = area.height() / g as f64;
    let mut aps_of_cluster = vec![Vec::new(); g * g];
    let cluster_of_ap: Vec<usize> = aps
        .positions
        .iter()
        .enumerate()
        .map(|(m, p)| {
            let c = cell_index(p.y, area.min.y, wy, g) * g + cell_index(p.x, area.min.x, wx, g);
            aps_of_cluster[c].push(m);
            c
        })
        .collect();
    Ok(ClusterPlan {
        grid: g,
        area,
        cluster_of_ap,
        aps_of_cluster,
    })
}

/// Anchors and serving set of one UE.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServingEntry {
    /// Strongest first.
    pub anchors: Vec<usize>,
    /// Ascending AP indices.
    pub serving: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServingAssignment {
    pub e: usize,
    pub entries: Vec<ServingEntry>,
}

impl ServingAssignment {
    pub fn n_ues(&self) -> usize {
        self.entries.len()
    }

    pub fn serving(&self, k: usize) -> &[usize] {
        &self.entries[k].serving
    }

    pub fn anchors(&self, k: usize) -> &[usize] {
        &self.entries[k].anchors
    }

    pub fn serving_size(&self, k: usize) -> usize {
        self.entries[k].serving.len()
    }

    /// Rows of `ue_index,anchor_ap_ids,serving_ap_ids,serving_size`; id lists
    /// are space separated.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), CfnetError> {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "ue_index",
            "anchor_ap_ids",
            "serving_ap_ids",
            "serving_size",
        ])?;
        for (k, e) in self.entries.iter().enumerate() {
            wr.write_record([
                k.to_string(),
                join(&e.anchors),
                join(&e.serving),
                e.serving.len().to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Serving set of UE `k`. Anchors are the `e` APs with the highest SNR, ties
/// going to the lower AP index; outage APs only fill up anchor slots the
/// finite-SNR APs cannot. A UE in outage towards every AP is anchored to its
/// geometrically nearest AP alone.
pub fn select_serving_set(
    k: usize,
    gains: &GainTable,
    plan: &ClusterPlan,
    e: usize,
) -> ServingEntry {
    let m_count = gains.n_aps();
    let mut order: Vec<usize> = (0..m_count).collect();
    order.sort_by(|&a, &b| {
        gains
            .snr_db(b, k)
            .total_cmp(&gains.snr_db(a, k))
            .then(a.cmp(&b))
    });
    let anchors: Vec<usize> = if gains.snr_db(order[0], k) == f64::NEG_INFINITY {
        vec![gains.nearest_ap(k)]
    } else {
        order.truncate(e);
        order
    };
    let mut in_set = vec![false; plan.n_clusters()];
    for &a in &anchors {
        in_set[plan.cluster_of_ap(a)] = true;
    }
    let mut serving: Vec<usize> = in_set
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .flat_map(|(c, _)| plan.aps_of_cluster(c).iter().copied())
        .collect();
    serving.sort_unstable();
    ServingEntry { anchors, serving }
}

/// Serving sets of every UE in `gains`.
pub fn assign_all(
    gains: &GainTable,
    plan: &ClusterPlan,
    e: usize,
) -> Result<ServingAssignment, CfnetError> {
    let m = gains.n_aps();
    if m != plan.n_aps() {
        return Err(CfnetError::ApMismatch {
            table: m,
            plan: plan.n_aps(),
        });
    }
    if e == 0 || e > m {
        return Err(CfnetError::BadAnchorCount { e, m });
    }
    Ok(ServingAssignment {
        e,
        entries: (0..gains.n_ues())
            .map(|k| select_serving_set(k, gains, plan, e))
            .collect(),
    })
}

/// Number of UEs each AP serves.
pub fn ap_load(assignment: &ServingAssignment, m: usize) -> Vec<usize> {
    let mut load = vec![0; m];
    for e in &assignment.entries {
        for &ap in &e.serving {
            load[ap] += 1;
        }
    }
    load
}
