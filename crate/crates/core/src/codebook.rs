//! Receive beam codebook: a hexagonal lattice of beam directions over an
//! azimuthal spherical segment, split between four 90° array sectors, plus
//! the beam gain tables of the TX and RX phased-array modules.
//!
//! Beam indices are sector-major: sector `k` owns indices
//! `k·per_sector .. (k+1)·per_sector`, and beam `i` of sector `k+1` is beam
//! `i` of sector `k` rotated by 90°. The position of a beam inside its
//! sector (its *slot*) is the sweep time slot, since the four arrays dwell
//! simultaneously.

use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{wrap_deg, Direction};

pub const SECTORS: usize = 4;
/// Boresight azimuth of sector `k` is `k·90°`.
pub const SECTOR_WIDTH_DEG: f64 = 90.0;
/// Main-lobe floor relative to boresight gain.
pub const SIDELOBE_FLOOR_DB: f64 = 30.0;
pub const CSV_HEADER: [&str; 5] = [
    "index",
    "sector",
    "azimuth_deg",
    "elevation_deg",
    "beam_type",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodebookError {
    #[error("invalid cell count {0}: must be a positive multiple of 4")]
    InvalidCellCount(usize),
    #[error("invalid elevation span {0}°: must lie in (0, 90]")]
    InvalidSpan(f64),
    #[error("unbalanced sector assignment: counts {counts:?}")]
    UnbalancedAssignment { counts: [usize; SECTORS] },
    #[error("unknown {side} beam type {id}")]
    UnknownBeamType { side: ArraySide, id: u8 },
    #[error("codebook CSV: {0}")]
    Csv(String),
}

/// Which phased-array module a beam type belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArraySide {
    /// 256-element transmit module.
    Tx,
    /// 64-element receive module.
    Rx,
}

impl fmt::Display for ArraySide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArraySide::Tx => "TX",
            ArraySide::Rx => "RX",
        })
    }
}

// (3 dB beamwidth in degrees, boresight module gain in dB), beam types 1..=4
const TX_BEAM_TABLE: [(f64, f64); 4] = [(7.0, 59.1), (25.0, 41.3), (54.1, 36.8), (80.0, 33.4)];
const RX_BEAM_TABLE: [(f64, f64); 4] = [(14.2, 47.0), (16.8, 43.3), (18.7, 34.3), (16.5, 30.3)];

/// A selectable beam width setting of an array module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamType {
    pub side: ArraySide,
    pub id: u8,
    pub beamwidth_3db: f64,
    pub boresight_gain: f64,
}

impl BeamType {
    pub fn new(side: ArraySide, id: u8) -> Result<Self, CodebookError> {
        let table = match side {
            ArraySide::Tx => &TX_BEAM_TABLE,
            ArraySide::Rx => &RX_BEAM_TABLE,
        };
        let (beamwidth_3db, boresight_gain) = *id
            .checked_sub(1)
            .and_then(|i| table.get(i as usize))
            .ok_or(CodebookError::UnknownBeamType { side, id })?;
        Ok(Self {
            side,
            id,
            beamwidth_3db,
            boresight_gain,
        })
    }

    pub fn tx(id: u8) -> Result<Self, CodebookError> {
        Self::new(ArraySide::Tx, id)
    }

    pub fn rx(id: u8) -> Result<Self, CodebookError> {
        Self::new(ArraySide::Rx, id)
    }

    pub fn all(side: ArraySide) -> impl Iterator<Item = BeamType> {
        (1..=4).map(move |id| Self::new(side, id).expect("table ids"))
    }

    /// Gain in dB at `offset_deg` from the beam center.
    pub fn gain_at_offset(&self, offset_deg: f64) -> f64 {
        let x = 2.0 * offset_deg / self.beamwidth_3db;
        let rolloff = (3.0 * x * x).min(SIDELOBE_FLOOR_DB);
        self.boresight_gain - rolloff
    }

    /// Gain in dB toward `direction` for a beam steered at `pointing`.
    pub fn gain(&self, pointing: &Direction, direction: &Direction) -> f64 {
        self.gain_at_offset(pointing.angle_to(direction))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beam {
    pub index: usize,
    pub sector: usize,
    /// Position within the sector's sweep order.
    pub slot: usize,
    /// Direction in the RX platform frame (azimuth relative to heading).
    pub direction: Direction,
    pub beam_type: BeamType,
}

/// Gain of `beam` toward `direction`, both in the same frame.
pub fn beam_gain(beam: &Beam, direction: &Direction) -> f64 {
    beam.beam_type.gain(&beam.direction, direction)
}

/// Geometry of a rows-of-hexagons lattice in (azimuth, elevation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeLayout {
    pub rows: usize,
    pub per_row: usize,
    pub elevation_span_deg: f64,
    pub azimuth_pitch_deg: f64,
    pub row_spacing_deg: f64,
}

impl LatticeLayout {
    /// Picks the rows × per-row factorization whose cells are closest to
    /// regular hexagons (row spacing = azimuth pitch·√3/2). Every row must
    /// hold a multiple of four cells so the sectors stay balanced.
    pub fn for_segment(elevation_span_deg: f64, cells: usize) -> Result<Self, CodebookError> {
        if cells == 0 || !cells.is_multiple_of(SECTORS) {
            return Err(CodebookError::InvalidCellCount(cells));
        }
        if !(elevation_span_deg > 0.0 && elevation_span_deg <= 90.0) {
            return Err(CodebookError::InvalidSpan(elevation_span_deg));
        }
        let mut best: Option<(f64, Self)> = None;
        for rows in
            (1..=cells).filter(|&r| cells.is_multiple_of(r) && (cells / r).is_multiple_of(SECTORS))
        {
            let per_row = cells / rows;
            let pitch = 360.0 / per_row as f64;
            let spacing = elevation_span_deg / rows as f64;
            let score = (spacing / (pitch * 3f64.sqrt() / 2.0)).ln().abs();
            if best.as_ref().is_none_or(|(s, _)| score < *s - 1e-12) {
                best = Some((
                    score,
                    Self {
                        rows,
                        per_row,
                        elevation_span_deg,
                        azimuth_pitch_deg: pitch,
                        row_spacing_deg: spacing,
                    },
                ));
            }
        }
        Ok(best.expect("rows = 1 always qualifies").1)
    }

    pub fn row_elevation(&self, row: usize) -> f64 {
        -self.elevation_span_deg / 2.0 + (row as f64 + 0.5) * self.row_spacing_deg
    }

    /// Rows alternate between unshifted and half-pitch-shifted azimuths; the
    /// middle row is unshifted so it contains azimuth 0.
    pub fn row_is_shifted(&self, row: usize) -> bool {
        (row as isize - (self.rows as isize - 1) / 2).rem_euclid(2) == 1
    }

    pub fn directions(&self) -> Vec<Direction> {
        let k = self.per_row as f64;
        (0..self.rows)
            .flat_map(|row| {
                let el = self.row_elevation(row);
                let shift = usize::from(self.row_is_shifted(row)) as f64;
                (0..self.per_row).map(move |j| {
                    // 360·(2j + s)/(2K) keeps multiples of the pitch exact
                    Direction::new(wrap_deg(360.0 * (2.0 * j as f64 + shift) / (2.0 * k)), el)
                })
            })
            .collect()
    }

    /// Distance in the (az, el) plane from a cell center to the lattice's
    /// Voronoi vertex, i.e. the circumradius of the hexagonal cell.
    pub fn cell_circumradius(&self) -> f64 {
        let a = self.azimuth_pitch_deg;
        if self.rows == 1 {
            return a / 3f64.sqrt();
        }
        let y0 = self.vertical_edge_half_height();
        ((a / 2.0).powi(2) + y0 * y0).sqrt()
    }

    /// Half-height of the hexagon's vertical edges: the band around the row
    /// elevation where this row's cells are the nearest for every azimuth.
    pub fn vertical_edge_half_height(&self) -> f64 {
        let a = self.azimuth_pitch_deg;
        let h = self.row_spacing_deg;
        if self.rows == 1 {
            return a / (2.0 * 3f64.sqrt());
        }
        ((h * h - a * a / 4.0) / (2.0 * h)).abs()
    }
}

/// Hexagon-center directions tessellating an azimuthal segment spanning
/// `elevation_span` degrees (centered on the horizon) with `cells` cells.
pub fn tessellate_segment(
    elevation_span: f64,
    cells: usize,
) -> Result<Vec<Direction>, CodebookError> {
    Ok(LatticeLayout::for_segment(elevation_span, cells)?.directions())
}

/// Sector owning azimuth `azimuth_deg`: sector `k` covers `(90k − 45°, 90k + 45°]`.
pub fn sector_of(azimuth_deg: f64) -> usize {
    (0..SECTORS)
        .find(|&k| {
            let rel = wrap_deg(azimuth_deg - k as f64 * SECTOR_WIDTH_DEG);
            rel > -45.0 && rel <= 45.0
        })
        .unwrap_or(0)
}

pub fn sector_boresight(sector: usize) -> f64 {
    wrap_deg(sector as f64 * SECTOR_WIDTH_DEG)
}

/// The ordered beam list swept by the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<Beam>,
    pub segment_elevation_span: f64,
    pub cells_total: usize,
    pub layout: Option<LatticeLayout>,
    unit_vectors: Vec<[f64; 3]>,
}

/// Assigns `directions` to sectors and orders them sector-major, then by
/// elevation and azimuth relative to the sector boresight.
pub fn assign_sectors(
    directions: &[Direction],
    beam_type: BeamType,
) -> Result<Codebook, CodebookError> {
    let mut per_sector: [Vec<Direction>; SECTORS] = Default::default();
    for d in directions {
        per_sector[sector_of(d.azimuth_deg)].push(*d);
    }
    let counts = per_sector.each_ref().map(Vec::len);
    if !directions.len().is_multiple_of(SECTORS)
        || counts.iter().any(|&c| c != directions.len() / SECTORS)
    {
        return Err(CodebookError::UnbalancedAssignment { counts });
    }
    let mut beams = Vec::with_capacity(directions.len());
    for (sector, dirs) in per_sector.iter_mut().enumerate() {
        let bs = sector_boresight(sector);
        dirs.sort_by(|a, b| {
            let ra = wrap_deg(a.azimuth_deg - bs);
            let rb = wrap_deg(b.azimuth_deg - bs);
            a.elevation_deg
                .total_cmp(&b.elevation_deg)
                .then(ra.total_cmp(&rb))
        });
        for (slot, d) in dirs.iter().enumerate() {
            beams.push(Beam {
                index: beams.len(),
                sector,
                slot,
                direction: *d,
                beam_type,
            });
        }
    }
    let span = infer_span(&beams);
    Ok(Codebook::from_parts(beams, span, None))
}

fn infer_span(beams: &[Beam]) -> f64 {
    let rows = distinct_rows(beams.iter().map(|b| b.direction.elevation_deg));
    match rows.as_slice() {
        [] | [_] => 0.0,
        [lo, .., hi] => (hi - lo) * rows.len() as f64 / (rows.len() - 1) as f64,
    }
}

fn distinct_rows(elevations: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut els: Vec<f64> = elevations.collect();
    els.sort_by(f64::total_cmp);
    els.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    els
}

impl Codebook {
    fn from_parts(beams: Vec<Beam>, span: f64, layout: Option<LatticeLayout>) -> Self {
        let unit_vectors = beams.iter().map(|b| b.direction.unit_vector()).collect();
        Self {
            cells_total: beams.len(),
            beams,
            segment_elevation_span: span,
            layout,
            unit_vectors,
        }
    }

    /// Tessellates a segment and assigns it to the four sectors.
    pub fn generate(
        elevation_span: f64,
        cells: usize,
        beam_type: BeamType,
    ) -> Result<Self, CodebookError> {
        let layout = LatticeLayout::for_segment(elevation_span, cells)?;
        let mut cb = assign_sectors(&layout.directions(), beam_type)?;
        cb.segment_elevation_span = elevation_span;
        cb.layout = Some(layout);
        Ok(cb)
    }

    /// The default 200-beam, 60° codebook with RX beam type 2.
    pub fn default_rx() -> Self {
        Self::generate(60.0, 200, BeamType::rx(2).expect("type 2")).expect("default codebook")
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn beams_per_sector(&self) -> [usize; SECTORS] {
        let mut counts = [0; SECTORS];
        for b in &self.beams {
            counts[b.sector] += 1;
        }
        counts
    }

    /// Dwell slots per sweep: the largest sector codebook.
    pub fn slots(&self) -> usize {
        self.beams.iter().map(|b| b.slot + 1).max().unwrap_or(0)
    }

    /// Distinct elevation rows, ascending.
    pub fn elevation_rows(&self) -> Vec<f64> {
        distinct_rows(self.beams.iter().map(|b| b.direction.elevation_deg))
    }

    /// Beam whose center is closest (great-circle) to `direction`; ties go to
    /// the lowest index.
    pub fn nearest_beam(&self, direction: &Direction) -> &Beam {
        let v = direction.unit_vector();
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, u) in self.unit_vectors.iter().enumerate() {
            let dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
            if dot > best_dot + 1e-12 {
                best = i;
                best_dot = dot;
            }
        }
        &self.beams[best]
    }

    /// Hexagon circumradius used when drawing `beam`'s cell.
    pub fn cell_circumradius(&self, beam: &Beam) -> f64 {
        if let Some(layout) = &self.layout {
            return layout.cell_circumradius();
        }
        let nn = self
            .beams
            .iter()
            .filter(|b| b.index != beam.index)
            .map(|b| b.direction.angle_to(&beam.direction))
            .fold(f64::INFINITY, f64::min);
        if nn.is_finite() {
            nn / 3f64.sqrt()
        } else {
            0.0
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CodebookError> {
        let mut w = csv::Writer::from_writer(writer);
        let err = |e: csv::Error| CodebookError::Csv(e.to_string());
        w.write_record(CSV_HEADER).map_err(err)?;
        for b in &self.beams {
            w.write_record([
                b.index.to_string(),
                b.sector.to_string(),
                b.direction.azimuth_deg.to_string(),
                b.direction.elevation_deg.to_string(),
                b.beam_type.id.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| CodebookError::Csv(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, CodebookError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(|e| CodebookError::Csv(e.to_string()))?;
        if headers.iter().ne(CSV_HEADER) {
            return Err(CodebookError::Csv(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut beams = Vec::new();
        let mut slots = [0usize; SECTORS];
        for (row, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| CodebookError::Csv(e.to_string()))?;
            let line = row + 2;
            let field = |i: usize| rec.get(i).unwrap_or("").trim();
            let bad = |name: &str| CodebookError::Csv(format!("line {line}: invalid {name}"));
            let index: usize = field(0).parse().map_err(|_| bad("index"))?;
            let sector: usize = field(1).parse().map_err(|_| bad("sector"))?;
            let azimuth: f64 = field(2).parse().map_err(|_| bad("azimuth_deg"))?;
            let elevation: f64 = field(3).parse().map_err(|_| bad("elevation_deg"))?;
            let type_id: u8 = field(4).parse().map_err(|_| bad("beam_type"))?;
            if index != beams.len() {
                return Err(CodebookError::Csv(format!(
                    "line {line}: index {index} out of order (expected {})",
                    beams.len()
                )));
            }
            if sector >= SECTORS || sector_of(azimuth) != sector {
                return Err(CodebookError::Csv(format!(
                    "line {line}: azimuth {azimuth} does not belong to sector {sector}"
                )));
            }
            let slot = slots[sector];
            slots[sector] += 1;
            beams.push(Beam {
                index,
                sector,
                slot,
                direction: Direction::new(azimuth, elevation),
                beam_type: BeamType::rx(type_id)?,
            });
        }
        let span = infer_span(&beams);
        let layout = infer_layout(&beams, span);
        Ok(Self::from_parts(beams, span, layout))
    }
}

fn infer_layout(beams: &[Beam], span: f64) -> Option<LatticeLayout> {
    let rows = distinct_rows(beams.iter().map(|b| b.direction.elevation_deg));
    if rows.is_empty() {
        return None;
    }
    let per_row = beams.len() / rows.len();
    let regular_rows = rows.iter().all(|r| {
        beams
            .iter()
            .filter(|b| (b.direction.elevation_deg - r).abs() < 1e-6)
            .count()
            == per_row
    });
    let spacing = if rows.len() > 1 {
        span / rows.len() as f64
    } else {
        span
    };
    let uniform = rows
        .windows(2)
        .all(|w| ((w[1] - w[0]) - spacing).abs() < 1e-6);
    (regular_rows && uniform && per_row > 0).then_some(LatticeLayout {
        rows: rows.len(),
        per_row,
        elevation_span_deg: span,
        azimuth_pitch_deg: 360.0 / per_row as f64,
        row_spacing_deg: spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rx2() -> BeamType {
        BeamType::rx(2).unwrap()
    }

    #[test]
    fn beam_tables() {
        let t = BeamType::rx(2).unwrap();
        assert_eq!((t.beamwidth_3db, t.boresight_gain), (16.8, 43.3));
        let t = BeamType::tx(3).unwrap();
        assert_eq!((t.beamwidth_3db, t.boresight_gain), (54.1, 36.8));
        assert_eq!(BeamType::tx(1).unwrap().boresight_gain, 59.1);
        assert_eq!(BeamType::rx(4).unwrap().beamwidth_3db, 16.5);
        assert!(BeamType::rx(0).is_err());
        assert!(BeamType::tx(5).is_err());
    }

    #[test]
    fn default_layout_is_five_rows_of_forty() {
        let l = LatticeLayout::for_segment(60.0, 200).unwrap();
        assert_eq!((l.rows, l.per_row), (5, 40));
        assert_eq!(l.azimuth_pitch_deg, 9.0);
        assert_eq!(l.row_spacing_deg, 12.0);
        let rows: Vec<f64> = (0..5).map(|r| l.row_elevation(r)).collect();
        assert_eq!(rows, vec![-24.0, -12.0, 0.0, 12.0, 24.0]);
        assert!(!l.row_is_shifted(2));
        assert!(l.row_is_shifted(1) && l.row_is_shifted(3));
    }

    #[test]
    fn regular_hexagons_reproduce_published_row_geometry() {
        // Five rows of 40 at a 9° pitch with regular hexagons: rows at
        // 0, ±7.79°, ±15.59° and a ±2.60° boresight band.
        let span = 5.0 * 9.0 * 3f64.sqrt() / 2.0;
        let l = LatticeLayout::for_segment(span, 200).unwrap();
        assert_eq!((l.rows, l.per_row), (5, 40));
        assert!((l.row_elevation(1) - (-7.794228634059948)).abs() < 1e-9);
        assert!((l.vertical_edge_half_height() - 2.598076211353316).abs() < 1e-9);
        assert!((l.row_elevation(1) - -7.8).abs() < 0.01);
        assert!((l.vertical_edge_half_height() - 2.6).abs() < 0.01);
    }

    #[test]
    fn four_cells_are_sector_boresights() {
        let dirs = tessellate_segment(60.0, 4).unwrap();
        let mut az: Vec<f64> = dirs.iter().map(|d| d.azimuth_deg).collect();
        az.sort_by(f64::total_cmp);
        assert_eq!(az, vec![-180.0, -90.0, 0.0, 90.0]);
        assert!(dirs.iter().all(|d| d.elevation_deg == 0.0));
        let cb = assign_sectors(&dirs, rx2()).unwrap();
        assert_eq!(cb.beams_per_sector(), [1, 1, 1, 1]);
    }

    #[test]
    fn invalid_tessellations() {
        assert_eq!(
            tessellate_segment(60.0, 6),
            Err(CodebookError::InvalidCellCount(6))
        );
        assert_eq!(
            tessellate_segment(60.0, 0),
            Err(CodebookError::InvalidCellCount(0))
        );
        assert!(matches!(
            tessellate_segment(0.0, 200),
            Err(CodebookError::InvalidSpan(_))
        ));
        assert!(matches!(
            tessellate_segment(91.0, 200),
            Err(CodebookError::InvalidSpan(_))
        ));
    }

    #[test]
    fn row_neighbors_are_equidistant() {
        let dirs = tessellate_segment(60.0, 200).unwrap();
        for row in dirs.chunks(40) {
            let mut sorted = row.to_vec();
            sorted.sort_by(|a, b| a.azimuth_deg.total_cmp(&b.azimuth_deg));
            let pitch = sorted[0].angle_to(&sorted[1]);
            for i in 0..sorted.len() {
                let d = sorted[i].angle_to(&sorted[(i + 1) % sorted.len()]);
                assert!((d - pitch).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sector_tie_breaks() {
        assert_eq!(sector_of(10.0), 0);
        assert_eq!(sector_of(45.0), 0);
        assert_eq!(sector_of(45.000001), 1);
        assert_eq!(sector_of(135.0), 1);
        assert_eq!(sector_of(-180.0), 2);
        assert_eq!(sector_of(-135.0), 2);
        assert_eq!(sector_of(-45.0), 3);
        assert_eq!(sector_of(-44.999), 0);
    }

    #[test]
    fn brute_force_sector_distance_agrees_with_tie_rule_at_45() {
        let dist = |az: f64, k: usize| wrap_deg(az - k as f64 * 90.0).abs();
        let brute = (0..4)
            .min_by(|&a, &b| dist(45.0, a).total_cmp(&dist(45.0, b)))
            .unwrap();
        assert_eq!(brute, 0);
        assert_eq!(sector_of(45.0), brute);
    }

    #[test]
    fn default_codebook_balanced() {
        let cb = Codebook::default_rx();
        assert_eq!(cb.cells_total, 200);
        assert_eq!(cb.beams_per_sector(), [50; 4]);
        assert_eq!(cb.slots(), 50);
        for b in &cb.beams {
            let rel = wrap_deg(b.direction.azimuth_deg - sector_boresight(b.sector));
            assert!((-45.0..=45.0).contains(&rel));
            assert!(b.direction.elevation_deg.abs() <= 30.0);
            assert_eq!(b.index, b.sector * 50 + b.slot);
        }
    }

    #[test]
    fn unbalanced_directions_rejected() {
        let dirs = [
            Direction::new(0.0, 0.0),
            Direction::new(10.0, 0.0),
            Direction::new(90.0, 0.0),
            Direction::new(180.0, 0.0),
        ];
        assert!(matches!(
            assign_sectors(&dirs, rx2()),
            Err(CodebookError::UnbalancedAssignment {
                counts: [2, 1, 1, 0]
            })
        ));
    }

    #[test]
    fn gain_pattern_anchors() {
        let cb = Codebook::default_rx();
        let b = &cb.beams[17];
        assert!((beam_gain(b, &b.direction) - 43.3).abs() < 1e-12);
        let half = b.beam_type.beamwidth_3db / 2.0;
        assert!((b.beam_type.gain_at_offset(half) - 40.3).abs() < 1e-12);
        assert!((b.beam_type.gain_at_offset(10.0 * 16.8) - 13.3).abs() < 1e-12);
        let off = Direction::new(b.direction.azimuth_deg, b.direction.elevation_deg + half);
        assert!((beam_gain(b, &off) - 40.3).abs() < 1e-9);
    }

    #[test]
    fn nearest_beam_ties_go_low() {
        let cb = Codebook::default_rx();
        let b = &cb.beams[123];
        assert_eq!(cb.nearest_beam(&b.direction).index, 123);
        // midpoint between az 0 and az 9 on the horizon row
        let a = cb.nearest_beam(&Direction::new(0.0, 0.0));
        let c = cb.nearest_beam(&Direction::new(9.0, 0.0));
        let mid = cb.nearest_beam(&Direction::new(4.5, 0.0));
        assert_eq!(mid.index, a.index.min(c.index));
    }

    #[test]
    fn csv_round_trip() {
        let cb = Codebook::default_rx();
        let mut buf = Vec::new();
        cb.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("index,sector,azimuth_deg,elevation_deg,beam_type\n"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').nth(3), Some("-24"));
        let back = Codebook::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.beams, cb.beams);
        assert_eq!(back.layout, cb.layout);
        assert_eq!(back.segment_elevation_span, 60.0);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad_header = "idx,sector,azimuth_deg,elevation_deg,beam_type\n";
        assert!(Codebook::read_csv(bad_header.as_bytes()).is_err());
        let wrong_sector = "index,sector,azimuth_deg,elevation_deg,beam_type\n0,1,0.0,0.0,2\n";
        assert!(Codebook::read_csv(wrong_sector.as_bytes()).is_err());
        let bad_type = "index,sector,azimuth_deg,elevation_deg,beam_type\n0,0,0.0,0.0,9\n";
        assert!(Codebook::read_csv(bad_type.as_bytes()).is_err());
    }
}
