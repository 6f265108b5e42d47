//! Imported path-loss grids.
//!
//! CSV layout: each AP block starts with a header record
//! `ap,<ap_id>,<origin_x>,<origin_y>,<spacing>,<nx>,<ny>,dB-pathloss`
//! followed by `ny` records of `nx` path-loss samples. Row `j` holds the
//! samples at `y = origin_y + j * spacing`, column `i` those at
//! `x = origin_x + i * spacing`. `inf` marks outage. Lines starting with `#`
//! are ignored.

use std::io;

use super::{fmt_db, ChannelError};
use crate::geom::Point2;
use crate::placement::ApLayout;

pub const GRID_UNIT: &str = "dB-pathloss";

/// One AP's regular lattice of path-loss samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major, `ny` rows of `nx`.
    pub values: Vec<f64>,
}

impl GridBlock {
    /// Nearest-sample lookup; queries more than half a spacing beyond the
    /// outermost samples are outage.
    pub fn lookup(&self, p: Point2) -> f64 {
        let fi = ((p.x - self.origin.x) / self.spacing).round();
        let fj = ((p.y - self.origin.y) / self.spacing).round();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return f64::INFINITY;
        }
        self.values[fj as usize * self.nx + fi as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid {
    blocks: Vec<GridBlock>,
}

impl GainGrid {
    /// Block `i` serves AP id `i`.
    pub fn new(blocks: Vec<GridBlock>) -> Result<Self, ChannelError> {
        for b in &blocks {
            if !(b.spacing > 0.0) || b.values.len() != b.nx * b.ny || b.nx == 0 || b.ny == 0 {
                return Err(ChannelError::Grid("irregular lattice".into()));
            }
        }
        Ok(Self { blocks })
    }

    pub fn n_aps(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, ap: usize) -> &GridBlock {
        &self.blocks[ap]
    }

    pub fn lookup(&self, ap: usize, p: Point2) -> f64 {
        self.blocks[ap].lookup(p)
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), ChannelError> {
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        for (id, b) in self.blocks.iter().enumerate() {
            wr.write_record([
                "ap".to_string(),
                id.to_string(),
                b.origin.x.to_string(),
                b.origin.y.to_string(),
                b.spacing.to_string(),
                b.nx.to_string(),
                b.ny.to_string(),
                GRID_UNIT.to_string(),
            ])?;
            for row in b.values.chunks(b.nx) {
                wr.write_record(row.iter().map(|&v| fmt_db(v)))?;
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn parse_f64(s: &str) -> Result<f64, ChannelError> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| ChannelError::Grid(format!("bad number {t:?}"))),
    }
}

fn parse_usize(s: &str) -> Result<usize, ChannelError> {
    s.trim()
        .parse()
        .map_err(|_| ChannelError::Grid(format!("bad count {s:?}")))
}

/// Parse a grid document and check it covers every AP of `aps`.
pub fn load_gain_grid(source: &str, aps: &ApLayout) -> Result<GainGrid, ChannelError> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source.as_bytes());
    let mut records = rd.records();
    let mut blocks: Vec<Option<GridBlock>> = Vec::new();
    while let Some(rec) = records.next() {
        let rec = rec?;
        if rec.get(0).map(str::trim) != Some("ap") || rec.len() != 8 {
            return Err(ChannelError::Grid(format!(
                "expected an 'ap' header record, got {:?}",
                rec.iter().collect::<Vec<_>>()
            )));
        }
        let unit = rec[7].trim();
        if unit != GRID_UNIT {
            return Err(ChannelError::UnitMismatch(unit.to_string()));
        }
        let id = parse_usize(&rec[1])?;
        let origin = Point2::new(parse_f64(&rec[2])?, parse_f64(&rec[3])?);
        let spacing = parse_f64(&rec[4])?;
        let nx = parse_usize(&rec[5])?;
        let ny = parse_usize(&rec[6])?;
        if !(spacing > 0.0 && spacing.is_finite()) || nx == 0 || ny == 0 {
            return Err(ChannelError::Grid(format!(
                "ap {id}: irregular lattice header"
            )));
        }
        let mut values = Vec::with_capacity(nx * ny);
        for row in 0..ny {
            let rec = records
                .next()
                .ok_or_else(|| ChannelError::Grid(format!("ap {id}: missing row {row}")))??;
            if rec.len() != nx {
                return Err(ChannelError::Grid(format!(
                    "ap {id}: row {row} has {} samples, expected {nx}",
                    rec.len()
                )));
            }
            for v in rec.iter() {
                values.push(parse_f64(v)?);
            }
        }
        if blocks.len() <= id {
            blocks.resize(id + 1, None);
        }
        if blocks[id].is_some() {
            return Err(ChannelError::Grid(format!("duplicate ap id {id}")));
        }
        blocks[id] = Some(GridBlock {
            origin,
            spacing,
            nx,
            ny,
            values,
        });
    }
    let mut out = Vec::with_capacity(aps.len());
    for m in 0..aps.len() {
        match blocks.get_mut(m).and_then(Option::take) {
            Some(b) => out.push(b),
            None => return Err(ChannelError::MissingAp(m)),
        }
    }
    GainGrid::new(out)
}
