//! Run configuration: one TOML file per study.

use std::path::{Path, PathBuf};

use cfsim::channel::{RadioParams, RaytraceParams};
use cfsim::geom::Rect;
use cfsim::sephy::FrameParams;
use cfsim::sim::SweepPoint;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub map: MapSection,
    pub placement: PlacementSection,
    #[serde(default)]
    pub ue: UeSection,
    #[serde(default)]
    pub radio: RadioParams,
    #[serde(default)]
    pub raytrace: RaytraceParams,
    #[serde(default)]
    pub frame: FrameParams,
    #[serde(default)]
    pub channel: ChannelSection,
    pub campaign: Option<CampaignSection>,
}

/// Exactly one of `geojson` and `synthetic` must be set.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSection {
    pub geojson: Option<PathBuf>,
    pub synthetic: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    pub m: usize,
    #[serde(default = "default_d1")]
    pub d1: f64,
    #[serde(default = "default_d2")]
    pub d2: f64,
    #[serde(default = "default_ap_height")]
    pub ap_height: f64,
}

fn default_d1() -> f64 {
    10.0
}
fn default_d2() -> f64 {
    5.0
}
fn default_ap_height() -> f64 {
    11.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UeSection {
    pub k: usize,
    pub spacing: f64,
    pub height: f64,
}

impl Default for UeSection {
    fn default() -> Self {
        Self {
            k: 50,
            spacing: 10.0,
            height: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub backend: BackendName,
    /// Gain grid file for the `imported` backend.
    pub imported_grid: Option<PathBuf>,
    /// APs whose SNR heatmaps `channel` writes.
    pub heatmaps: Vec<usize>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            backend: BackendName::LogDistance,
            imported_grid: None,
            heatmaps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendName {
    LogDistance,
    Raytrace,
    Imported,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub n_drops: usize,
    /// Side of the square evaluation area, centered in the study area.
    pub inner_side: f64,
    /// Cluster grid sizes; swept against every `e`.
    pub g: Vec<usize>,
    /// Anchor counts.
    pub e: Vec<usize>,
    #[serde(default = "default_backends")]
    pub backends: Vec<BackendName>,
    #[serde(default = "default_band")]
    pub band: f64,
}

fn default_backends() -> Vec<BackendName> {
    vec![BackendName::LogDistance, BackendName::Raytrace]
}
fn default_band() -> f64 {
    1.0
}

impl CampaignSection {
    pub fn sweep(&self) -> Vec<SweepPoint> {
        self.g
            .iter()
            .flat_map(|&g| self.e.iter().map(move |&e| SweepPoint { g, e }))
            .collect()
    }
}

/// Parsed config plus the raw bytes it was read from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: Config,
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl LoadedConfig {
    pub fn load(path: &Path, seed: Option<u64>) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| CliError::Config(format!("{} is not UTF-8", path.display())))?;
        let mut config: Config = toml::from_str(text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = seed {
            config.seed = s;
        }
        Ok(Self {
            config,
            path: path.to_path_buf(),
            bytes,
        })
    }

    /// Resolves `p` against the directory holding the config file.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.path.parent().unwrap_or(Path::new(".")).join(p)
        }
    }
}

impl Config {
    /// Checks everything that can be checked without reading the map.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |s: String| Err(CliError::Config(s));
        match (&self.map.geojson, &self.map.synthetic) {
            (Some(_), Some(_)) => return bad("map: set only one of geojson and synthetic".into()),
            (None, None) => return bad("map: one of geojson or synthetic is required".into()),
            _ => {}
        }
        let m = self.placement.m;
        let side = (m as f64).sqrt().round() as usize;
        if m == 0 || side * side != m {
            return bad(format!("placement.m = {m} is not a perfect square"));
        }
        if !(self.placement.d1 > 0.0 && self.placement.d2 > 0.0) {
            return bad("placement: d1 and d2 must be positive".into());
        }
        if !(self.ue.spacing > 0.0) || self.ue.k == 0 {
            return bad("ue: spacing must be positive and k at least 1".into());
        }
        let tau_p = self.frame.tau_p_for(self.ue.k);
        if tau_p >= self.frame.tau_c {
            return bad(format!(
                "frame: tau_p = {tau_p} must be smaller than tau_c = {}",
                self.frame.tau_c
            ));
        }
        self.frame
            .validate(self.ue.k)
            .map_err(|e| CliError::Config(format!("frame: {e}")))?;
        self.radio
            .validate()
            .map_err(|e| CliError::Config(format!("radio: {e}")))?;
        self.raytrace
            .validate()
            .map_err(|e| CliError::Config(format!("raytrace: {e}")))?;
        let uses_imported = self.channel.backend == BackendName::Imported
            || self
                .campaign
                .as_ref()
                .is_some_and(|c| c.backends.contains(&BackendName::Imported));
        if uses_imported && self.channel.imported_grid.is_none() {
            return bad("channel.imported_grid is required for the imported backend".into());
        }
        if let Some(c) = &self.campaign {
            if c.g.is_empty() || c.e.is_empty() || c.backends.is_empty() {
                return bad("campaign: g, e and backends must be non-empty".into());
            }
            if let Some(&e) = c.e.iter().find(|&&e| e == 0 || e > m) {
                return bad(format!("campaign: E = {e} exceeds M = {m} (or is zero)"));
            }
            if c.g.contains(&0) {
                return bad("campaign: G must be at least 1".into());
            }
            if c.n_drops == 0 {
                return bad("campaign: n_drops must be at least 1".into());
            }
            if !(c.inner_side > 0.0) {
                return bad("campaign: inner_side must be positive".into());
            }
        }
        Ok(())
    }

    /// Checks that depend on the study area.
    pub fn validate_area(&self, area: &Rect) -> Result<(), CliError> {
        if let Some(c) = &self.campaign {
            if c.inner_side > area.width().min(area.height()) {
                return Err(CliError::Config(format!(
                    "campaign: inner area ({} m) is larger than the study area ({} x {} m)",
                    c.inner_side,
                    area.width(),
                    area.height()
                )));
            }
        }
        Ok(())
    }
}
