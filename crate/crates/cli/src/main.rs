//! `cfsim`: AP placement, channel tables and SE campaigns from one config file.

mod config;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfsim::channel::{build_gain_table, load_gain_grid, ChannelBackend, GainTable, Raytracer};
use cfsim::geom::synth::SyntheticMapConfig;
use cfsim::geom::{load_building_map, map_to_geojson, BuildingMap};
use cfsim::placement::{
    generate_candidates, generate_ue_grid, place_aps, write_points_csv, ApLayout, PlacementParams,
    UeGrid,
};
use cfsim::rng;
use cfsim::sim::{run_campaign, snr_heatmap, CampaignConfig};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use config::{BackendName, LoadedConfig};
use manifest::Manifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Parser)]
#[command(
    name = "cfsim",
    version,
    about = "Cell-free massive MIMO system-level simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Place APs on building boundaries.
    Place(Common),
    /// Build the gain table over the UE lattice, plus configured heatmaps.
    Channel(Common),
    /// Run the configured (G, E) sweep.
    Campaign(Common),
    /// Write the SNR heatmap of one AP.
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ap: usize,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, short, env = "CFSIM_OUT_DIR", default_value = "cfsim-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Place(c) => Session::open(&c, "place")?.place(),
        Command::Channel(c) => Session::open(&c, "channel")?.channel(),
        Command::Campaign(c) => Session::open(&c, "campaign")?.campaign(),
        Command::Heatmap { common, ap } => Session::open(&common, "heatmap")?.heatmap(ap),
    }
}

/// A validated config, its map and lattice, and the output directory.
struct Session {
    cfg: LoadedConfig,
    map: BuildingMap,
    grid: UeGrid,
    out: PathBuf,
    workers: usize,
    manifest: Manifest,
}

impl Session {
    fn open(c: &Common, command: &str) -> Result<Self, CliError> {
        let cfg = LoadedConfig::load(&c.config, c.seed)?;
        cfg.config.validate()?;
        let map = load_map(&cfg)?;
        cfg.config.validate_area(&map.extent())?;
        let grid = generate_ue_grid(&map, cfg.config.ue.spacing, cfg.config.ue.height);
        fs::create_dir_all(&c.out)
            .map_err(runtime(&format!("cannot create {}", c.out.display())))?;
        let manifest = Manifest::new(command, &cfg, &c.out);
        Ok(Self {
            cfg,
            map,
            grid,
            out: c.out.clone(),
            workers: c.workers(),
            manifest,
        })
    }

    fn params(&self) -> Result<PlacementParams, CliError> {
        let p = &self.cfg.config.placement;
        PlacementParams::new(p.d1, p.d2, p.m, self.map.extent(), p.ap_height)
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// Writes `body` to `name` in the output directory, behind a
    /// `# manifest=` line.
    fn write_csv(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let mut bytes = format!("# manifest={}\n", self.manifest.hash).into_bytes();
        bytes.extend_from_slice(body);
        self.write_raw(name, &bytes)
    }

    fn write_raw(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(runtime(&format!("cannot write {}", path.display())))?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<(), CliError> {
        let bytes = self.manifest.finish();
        self.write_raw_unlisted("manifest.json", &bytes)
    }

    fn write_raw_unlisted(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, bytes).map_err(runtime(&format!("cannot write {}", path.display())))
    }

    fn load_layout(&self) -> Result<ApLayout, CliError> {
        let path = self.out.join("ap_layout.csv");
        let file = fs::File::open(&path).map_err(|e| {
            CliError::Runtime(format!(
                "missing AP layout {} ({e}); run `cfsim place` first",
                path.display()
            ))
        })?;
        let aps = ApLayout::read_csv(file, self.cfg.config.placement.ap_height)
            .map_err(runtime(&format!("bad AP layout {}", path.display())))?;
        if aps.len() != self.cfg.config.placement.m {
            return Err(CliError::Runtime(format!(
                "AP layout {} has {} APs, config expects {}; rerun `cfsim place`",
                path.display(),
                aps.len(),
                self.cfg.config.placement.m
            )));
        }
        Ok(aps)
    }

    fn backend(&self, name: BackendName, aps: &ApLayout) -> Result<ChannelBackend, CliError> {
        let c = &self.cfg.config;
        Ok(match name {
            BackendName::LogDistance => ChannelBackend::LogDistance {
                shadow_seed: rng::derive_seed(c.seed, &[rng::tag::SHADOWING, 0]),
            },
            BackendName::Raytrace => {
                ChannelBackend::Raytrace(Box::new(Raytracer::new(&self.map, c.raytrace.clone())))
            }
            BackendName::Imported => {
                let rel = c.channel.imported_grid.as_ref().expect("validated");
                let path = self.cfg.resolve(rel);
                let text = fs::read_to_string(&path)
                    .map_err(runtime(&format!("cannot read {}", path.display())))?;
                ChannelBackend::Imported(
                    load_gain_grid(&text, aps)
                        .map_err(runtime(&format!("gain grid {}", path.display())))?,
                )
            }
        })
    }

    fn lattice_table(&self, aps: &ApLayout) -> Result<GainTable, CliError> {
        let c = &self.cfg.config;
        let backend = self.backend(c.channel.backend, aps)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(runtime("worker pool"))?;
        pool.install(|| {
            build_gain_table(aps, &self.grid.candidates, c.ue.height, &backend, &c.radio)
        })
        .map_err(runtime("channel"))
    }

    fn write_heatmap(&mut self, ap: usize, table: &GainTable) -> Result<(), CliError> {
        let map = snr_heatmap(ap, table, &self.grid)
            .map_err(|e| CliError::Runtime(format!("heatmap: {e}")))?;
        let mut buf = Vec::new();
        map.write_csv(&mut buf).map_err(runtime("heatmap"))?;
        self.write_csv(&format!("heatmap_ap{ap}.csv"), &buf)
    }

    fn place(mut self) -> Result<(), CliError> {
        let params = self.params()?;
        let cands =
            generate_candidates(&self.map, &params, &self.grid).map_err(runtime("placement"))?;
        let aps = place_aps(&cands.points, &params).map_err(runtime("placement"))?;

        let mut buf = Vec::new();
        aps.write_csv(&mut buf).map_err(runtime("ap layout"))?;
        self.write_csv("ap_layout.csv", &buf)?;

        let diag = format!(
            "step,stage,count\n1,boundary_resampling,{}\n2,proximity_pruning,{}\n3,enclosure_removal,{}\n4,placed,{}\n",
            cands.after_resample,
            cands.after_prune,
            cands.after_enclosure,
            aps.len()
        );
        self.write_csv("placement_diagnostics.csv", diag.as_bytes())?;

        let mut doc: serde_json::Value =
            serde_json::from_str(&map_to_geojson(&self.map)).map_err(runtime("geojson"))?;
        doc["manifest"] = self.manifest.hash.clone().into();
        let text = serde_json::to_string_pretty(&doc).map_err(runtime("geojson"))?;
        self.write_raw("buildings.geojson", text.as_bytes())?;
        self.finish()
    }

    fn channel(mut self) -> Result<(), CliError> {
        let aps = self.load_layout()?;
        let table = self.lattice_table(&aps)?;

        let mut buf = Vec::new();
        write_points_csv(&mut buf, &self.grid.candidates).map_err(runtime("ue lattice"))?;
        self.write_csv("ue_positions.csv", &buf)?;

        let mut buf = Vec::new();
        table.write_csv(&mut buf).map_err(runtime("gain table"))?;
        self.write_csv("gain_table.csv", &buf)?;

        for ap in self.cfg.config.channel.heatmaps.clone() {
            self.write_heatmap(ap, &table)?;
        }
        self.finish()
    }

    fn heatmap(mut self, ap: usize) -> Result<(), CliError> {
        let aps = self.load_layout()?;
        if ap >= aps.len() {
            return Err(CliError::Runtime(format!(
                "AP {ap} out of range for {} APs",
                aps.len()
            )));
        }
        let table = self.lattice_table(&aps)?;
        self.write_heatmap(ap, &table)?;
        self.finish()
    }

    fn campaign(mut self) -> Result<(), CliError> {
        let aps = self.load_layout()?;
        let c = &self.cfg.config;
        let section = c
            .campaign
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [campaign] section".into()))?;
        let area = self.map.extent();
        let cc = CampaignConfig {
            k: c.ue.k,
            n_drops: section.n_drops,
            seed: c.seed,
            area,
            inner_area: area.concentric_square(section.inner_side),
            sweep: section.sweep(),
            frame: c.frame.clone(),
            radio: c.radio.clone(),
            band: section.band,
        };
        cc.validate(aps.len())
            .map_err(|e| CliError::Config(e.to_string()))?;
        let backends = section
            .backends
            .iter()
            .map(|&b| self.backend(b, &aps))
            .collect::<Result<Vec<_>, _>>()?;
        let report = run_campaign(&cc, &aps, &self.grid, &backends, self.workers)
            .map_err(runtime("campaign"))?;

        let mut buf = Vec::new();
        report
            .write_summary_csv(&mut buf)
            .map_err(runtime("summary"))?;
        self.write_csv("summary.csv", &buf)?;
        let mut buf = Vec::new();
        report
            .write_raw_csv(&mut buf)
            .map_err(runtime("raw records"))?;
        self.write_csv("raw.csv", &buf)?;
        for link in &report.links {
            let mut buf = Vec::new();
            link.write_csv(&mut buf).map_err(runtime("link cdf"))?;
            self.write_csv(&format!("link_snr_{}.csv", link.backend), &buf)?;
        }
        self.finish()
    }
}

fn load_map(cfg: &LoadedConfig) -> Result<BuildingMap, CliError> {
    let read = |p: &Path| {
        let path = cfg.resolve(p);
        fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read map {}: {e}", path.display())))
    };
    let m = &cfg.config.map;
    if let Some(p) = &m.geojson {
        load_building_map(&read(p)?).map_err(runtime("building map"))
    } else {
        let p = m.synthetic.as_ref().expect("validated");
        let synth = SyntheticMapConfig::from_toml(&read(p)?)
            .map_err(|e| CliError::Config(format!("synthetic map: {e}")))?;
        synth.generate().map_err(runtime("synthetic map"))
    }
}
