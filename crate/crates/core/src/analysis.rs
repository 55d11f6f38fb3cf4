//! Path loss extraction and statistics over a captured run.
//!
//! Two path loss views come out of every sweep: the *best* beam (maximum
//! received power over the whole codebook, i.e. ideal beam management) and
//! the *boresight* beam (the codebook beam nearest the geometric TX
//! direction, using the GPS-derived heading). Both are de-embedded with the
//! same gains so that best ≤ boresight holds sweep by sweep.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::channel::{fspl, ChannelError};
use crate::codebook::{Codebook, CodebookError};
use crate::geo::{
    self, heading_from_gps, los_direction, position_from_gps, Enu, GpsFix, GPS_INTERVAL_NS,
};
use crate::scenario::Scenario;
use crate::sounder::SweepRecord;

/// Close-in reference distance, meters.
pub const CI_REFERENCE_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("sweep {sweep_index} at {timestamp_ns} ns is outside the GPS log span")]
    MissingGps { sweep_index: u64, timestamp_ns: u64 },
    #[error("CI fit needs at least 2 samples, got {0}")]
    InsufficientSamples(usize),
    #[error("CI fit is degenerate: all samples share distance {0} m")]
    DegenerateDistances(f64),
    #[error("CI fit needs distances ≥ 1 m, got {0} m")]
    DistanceBelowReference(f64),
    #[error("incomplete sweep: {got} of {expected} beams")]
    IncompleteSweep { got: usize, expected: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Best,
    Boresight,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Category::Best => "best",
            Category::Boresight => "boresight",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossSample {
    /// 3D TX–RX separation, meters.
    pub distance: f64,
    pub pathloss: f64,
    pub los: bool,
    pub category: Category,
    pub rx_position: Enu,
    /// Elevation of the strongest beam in that sweep, degrees.
    pub elevation_of_best: f64,
    /// Raw sweeps merged into this sample.
    pub members: usize,
}

/// How array gains are removed from received power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeembedMode {
    /// Table boresight gains of the configured TX and RX beam types.
    #[default]
    BoresightGain,
    /// Pattern gain of the TX beam at the LOS departure angle and of the
    /// selected RX beam at the LOS arrival angle.
    PatternGain,
}

/// GPS logs of both platforms.
#[derive(Debug, Clone, Copy)]
pub struct GpsLogs<'a> {
    pub rx: &'a [GpsFix],
    pub tx: &'a [GpsFix],
}

/// Sweeps grouped by index, records in codebook order.
pub fn group_sweeps(records: &[SweepRecord]) -> BTreeMap<u64, Vec<&SweepRecord>> {
    let mut sweeps: BTreeMap<u64, Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        sweeps.entry(r.sweep_index).or_default().push(r);
    }
    for recs in sweeps.values_mut() {
        recs.sort_by_key(|r| r.beam_index);
    }
    sweeps
}

/// Extracts best-beam and boresight-beam path loss, one sample per category
/// per sweep. Below-floor records never contribute; boresight samples are
/// dropped where the RX heading is undefined.
pub fn extract_pathloss(
    records: &[SweepRecord],
    scenario: &Scenario,
    codebook: &Codebook,
    gps: GpsLogs<'_>,
    mode: DeembedMode,
) -> Result<Vec<PathLossSample>, AnalysisError> {
    let tx_beam = scenario.tx_beam()?;
    let rx_beam = scenario.rx_beam()?;
    let link_gain = scenario.tx_power_dbm + tx_beam.boresight_gain + rx_beam.boresight_gain;
    let run_start = scenario.run_span().map(|s| s.0).unwrap_or(0.0);
    let dwell_ns = scenario.dwell_ns();
    let scan_ns = codebook.slots() as u64 * dwell_ns;

    let mut samples = Vec::new();
    for (sweep_index, recs) in group_sweeps(records) {
        let start_ns = recs.iter().map(|r| r.timestamp_ns).min().unwrap_or(0);
        let t_ns = start_ns + scan_ns / 2;
        let missing = || AnalysisError::MissingGps {
            sweep_index,
            timestamp_ns: start_ns,
        };
        let rx_pos = position_from_gps(gps.rx, t_ns, GPS_INTERVAL_NS).ok_or_else(missing)?;
        let tx_pos = position_from_gps(gps.tx, t_ns, GPS_INTERVAL_NS).ok_or_else(missing)?;
        let distance = rx_pos.distance(&tx_pos);
        let los = scenario.is_los(run_start + t_ns as f64 * 1e-9);

        let valid = || recs.iter().filter(|r| !r.below_floor);
        let Some(best) = valid().max_by(|a, b| {
            a.rx_power
                .total_cmp(&b.rx_power)
                .then(b.beam_index.cmp(&a.beam_index))
        }) else {
            continue;
        };
        let best_beam = &codebook.beams[best.beam_index];
        let heading = scenario
            .rx_trajectory
            .heading_override
            .map(Ok)
            .unwrap_or_else(|| heading_from_gps(gps.rx, t_ns));
        let los_dir = heading
            .ok()
            .and_then(|h| los_direction(&rx_pos, h, &tx_pos).ok());

        let deembed = |beam_index: usize| -> f64 {
            match (mode, los_dir) {
                (DeembedMode::PatternGain, Some(dir)) => {
                    let aod = tx_pos.direction_to(&rx_pos);
                    scenario.tx_power_dbm
                        + tx_beam.gain(&scenario.tx_boresight, &aod)
                        + crate::codebook::beam_gain(&codebook.beams[beam_index], &dir)
                }
                _ => link_gain,
            }
        };
        let sample = |category, rec: &SweepRecord| PathLossSample {
            distance,
            pathloss: deembed(rec.beam_index) - rec.rx_power,
            los,
            category,
            rx_position: rx_pos,
            elevation_of_best: best_beam.direction.elevation_deg,
            members: 1,
        };
        samples.push(sample(Category::Best, best));

        if let Some(dir) = los_dir {
            let target = codebook.nearest_beam(&dir).index;
            if let Some(rec) = recs
                .iter()
                .find(|r| r.beam_index == target && !r.below_floor)
            {
                samples.push(sample(Category::Boresight, rec));
            }
        }
    }
    Ok(samples)
}

/// Close-in model fit with 1 m free-space anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiFit {
    pub n: f64,
    pub sigma: f64,
    pub d0: f64,
    pub fspl_d0: f64,
    pub sample_count: usize,
}

impl CiFit {
    pub fn predict(&self, distance: f64) -> f64 {
        self.fspl_d0 + 10.0 * self.n * (distance / self.d0).log10()
    }
}

/// Least-squares path loss exponent with the intercept fixed at
/// `fspl(f, 1 m)`; sigma is the RMS residual.
pub fn fit_ci(samples: &[PathLossSample], carrier_freq: f64) -> Result<CiFit, AnalysisError> {
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.distance, s.pathloss)).collect();
    fit_ci_points(&points, carrier_freq)
}

/// [`fit_ci`] over bare `(distance, pathloss)` pairs.
pub fn fit_ci_points(points: &[(f64, f64)], carrier_freq: f64) -> Result<CiFit, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::InsufficientSamples(points.len()));
    }
    if let Some(&(d, _)) = points
        .iter()
        .find(|(d, _)| !(*d >= CI_REFERENCE_DISTANCE_M))
    {
        return Err(AnalysisError::DistanceBelowReference(d));
    }
    let d_first = points[0].0;
    if points.iter().all(|(d, _)| *d == d_first) {
        return Err(AnalysisError::DegenerateDistances(d_first));
    }
    let fspl_d0 = fspl(carrier_freq, CI_REFERENCE_DISTANCE_M)?;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(d, pl) in points {
        let x = 10.0 * (d / CI_REFERENCE_DISTANCE_M).log10();
        sxy += x * (pl - fspl_d0);
        sxx += x * x;
    }
    let n = sxy / sxx;
    let sse: f64 = points
        .iter()
        .map(|&(d, pl)| {
            let r = pl - fspl_d0 - 10.0 * n * d.log10();
            r * r
        })
        .sum();
    Ok(CiFit {
        n,
        sigma: (sse / points.len() as f64).sqrt(),
        d0: CI_REFERENCE_DISTANCE_M,
        fspl_d0,
        sample_count: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub elevation_deg: f64,
    pub count: usize,
    pub fraction: f64,
}

/// Distribution of the best beam's elevation row across sweeps. Bins are the
/// codebook's elevation rows; samples of other categories are ignored.
pub fn elevation_histogram(samples: &[PathLossSample], codebook: &Codebook) -> Vec<HistogramBin> {
    let rows = codebook.elevation_rows();
    let mut counts = vec![0usize; rows.len()];
    for s in samples.iter().filter(|s| s.category == Category::Best) {
        let row = rows
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - s.elevation_of_best)
                    .abs()
                    .total_cmp(&(b.1 - s.elevation_of_best).abs())
            })
            .map(|(i, _)| i);
        if let Some(i) = row {
            counts[i] += s.members;
        }
    }
    let total: usize = counts.iter().sum();
    rows.into_iter()
        .zip(counts)
        .map(|(elevation_deg, count)| HistogramBin {
            elevation_deg,
            count,
            fraction: if total == 0 {
                0.0
            } else {
                count as f64 / total as f64
            },
        })
        .collect()
}

/// One hexagonal face of a sweep heatmap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapCell {
    pub beam_index: usize,
    pub sector: usize,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub rx_power_dbm: f64,
    pub below_floor: bool,
    pub circumradius_deg: f64,
}

/// Per-beam received power of one complete sweep, with cell geometry.
pub fn heatmap_export(
    sweep: &[SweepRecord],
    codebook: &Codebook,
) -> Result<Vec<HeatmapCell>, AnalysisError> {
    let mut by_beam: Vec<Option<&SweepRecord>> = vec![None; codebook.len()];
    for r in sweep {
        if let Some(slot) = by_beam.get_mut(r.beam_index) {
            *slot = Some(r);
        }
    }
    let got = by_beam.iter().filter(|r| r.is_some()).count();
    if got != codebook.len() || sweep.len() != codebook.len() {
        return Err(AnalysisError::IncompleteSweep {
            got,
            expected: codebook.len(),
        });
    }
    Ok(codebook
        .beams
        .iter()
        .zip(by_beam)
        .map(|(beam, rec)| {
            let rec = rec.expect("checked above");
            HeatmapCell {
                beam_index: beam.index,
                sector: beam.sector,
                azimuth_deg: beam.direction.azimuth_deg,
                elevation_deg: beam.direction.elevation_deg,
                rx_power_dbm: rec.rx_power,
                below_floor: rec.below_floor,
                circumradius_deg: codebook.cell_circumradius(beam),
            }
        })
        .collect())
}

/// Fits for every (category, LOS) combination present in `samples`, in
/// table order: LOS best, LOS boresight, NLOS best, NLOS boresight.
pub fn fit_table(
    samples: &[PathLossSample],
    carrier_freq: f64,
) -> Vec<(Category, bool, Result<CiFit, AnalysisError>)> {
    let mut out = Vec::new();
    for los in [true, false] {
        for cat in [Category::Best, Category::Boresight] {
            let subset: Vec<PathLossSample> = samples
                .iter()
                .filter(|s| s.category == cat && s.los == los)
                .copied()
                .collect();
            if !subset.is_empty() {
                out.push((cat, los, fit_ci(&subset, carrier_freq)));
            }
        }
    }
    out
}

/// Re-exported for callers that only deal with analysis types.
pub use geo::local_square_average;

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(distance: f64, pathloss: f64) -> PathLossSample {
        PathLossSample {
            distance,
            pathloss,
            los: true,
            category: Category::Best,
            rx_position: Enu::default(),
            elevation_of_best: 0.0,
            members: 1,
        }
    }

    #[test]
    fn exact_free_space_data() {
        let f0 = fspl(28.3e9, 1.0).unwrap();
        let s: Vec<_> = [2.0, 5.0, 17.0, 80.0, 150.0]
            .iter()
            .map(|&d| sample(d, f0 + 20.0 * d.log10()))
            .collect();
        let fit = fit_ci(&s, 28.3e9).unwrap();
        assert!((fit.n - 2.0).abs() < 1e-9);
        assert!(fit.sigma < 1e-9);
        assert_eq!(fit.d0, 1.0);
        assert_eq!(fit.sample_count, 5);
    }

    #[test]
    fn hand_computed_two_points() {
        let fit = fit_ci(&[sample(10.0, 81.48), sample(100.0, 101.48)], 28.3e9).unwrap();
        assert!((fit.n - 2.0).abs() < 1e-3, "{}", fit.n);
        assert!((fit.fspl_d0 - 61.48).abs() < 0.01);
    }

    #[test]
    fn fit_errors() {
        assert_eq!(
            fit_ci(&[sample(10.0, 80.0)], 28.3e9),
            Err(AnalysisError::InsufficientSamples(1))
        );
        assert_eq!(
            fit_ci(&[sample(10.0, 80.0), sample(10.0, 82.0)], 28.3e9),
            Err(AnalysisError::DegenerateDistances(10.0))
        );
        assert_eq!(
            fit_ci(&[sample(0.5, 80.0), sample(10.0, 82.0)], 28.3e9),
            Err(AnalysisError::DistanceBelowReference(0.5))
        );
    }

    #[test]
    fn histogram_all_in_boresight_row() {
        let cb = Codebook::default_rx();
        let s: Vec<_> = (0..10).map(|i| sample(10.0 + i as f64, 90.0)).collect();
        let h = elevation_histogram(&s, &cb);
        assert_eq!(h.len(), 5);
        let row0 = h.iter().find(|b| b.elevation_deg == 0.0).unwrap();
        assert_eq!(row0.fraction, 1.0);
        assert_eq!(h.iter().map(|b| b.fraction).sum::<f64>(), 1.0);
    }

    #[test]
    fn heatmap_rejects_partial_sweep() {
        let cb = Codebook::default_rx();
        let recs: Vec<SweepRecord> = (0..199)
            .map(|i| SweepRecord {
                sweep_index: 0,
                beam_index: i,
                timestamp_ns: 0,
                rx_power: -90.0,
                pdp: None,
                below_floor: false,
            })
            .collect();
        assert_eq!(
            heatmap_export(&recs, &cb),
            Err(AnalysisError::IncompleteSweep {
                got: 199,
                expected: 200
            })
        );
    }

    #[test]
    fn square_averaging() {
        let mut a = sample(10.0, 80.0);
        a.rx_position = Enu::new(1.0, 1.0, 2.0);
        let mut b = a;
        b.pathloss = 86.0;
        b.distance = 12.0;
        b.rx_position = Enu::new(3.0, 2.0, 2.0);
        let mut far = a;
        far.rx_position = Enu::new(11.0, 1.0, 2.0);
        let mut nlos = a;
        nlos.los = false;
        let out = local_square_average(&[a, b, far, nlos], 4.0);
        assert_eq!(out.len(), 3);
        let merged = out.iter().find(|s| s.members == 2).unwrap();
        assert!((merged.pathloss - 83.0).abs() < 1e-12);
        assert!((merged.distance - 11.0).abs() < 1e-12);
        let same = local_square_average(&[a, a, a], 4.0);
        assert_eq!(same.len(), 1);
        assert_eq!(same[0].pathloss, a.pathloss);
        assert_eq!(same[0].distance, a.distance);
        assert_eq!(same[0].members, 3);
    }
}
