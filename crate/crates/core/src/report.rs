//! End-to-end analysis of a capture and the report directory layout:
//! `pathloss_best.csv`, `pathloss_boresight.csv`, `ci_fits.csv`,
//! `elevation_hist.csv`, `heatmap_sweep_<k>.csv` and `notes.txt`.

use std::io::Write;
use std::path::Path;

use crate::analysis::{
    elevation_histogram, extract_pathloss, fit_table, group_sweeps, heatmap_export, AnalysisError,
    Category, CiFit, DeembedMode, GpsLogs, HeatmapCell, HistogramBin, PathLossSample,
};
use crate::capture::CaptureError;
use crate::codebook::Codebook;
use crate::geo::local_square_average;
use crate::scenario::Scenario;
use crate::sounder::SweepRecord;

pub const DEFAULT_SQUARE_SIDE_M: f64 = 4.0;

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub square_side: f64,
    pub deembed: DeembedMode,
    pub heatmap_sweeps: Vec<u64>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            square_side: DEFAULT_SQUARE_SIDE_M,
            deembed: DeembedMode::default(),
            heatmap_sweeps: vec![0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisReport {
    /// One sample per category per sweep, before square averaging.
    pub raw: Vec<PathLossSample>,
    pub best: Vec<PathLossSample>,
    pub boresight: Vec<PathLossSample>,
    pub fits: Vec<(Category, bool, Result<CiFit, AnalysisError>)>,
    pub histogram: Vec<HistogramBin>,
    pub heatmaps: Vec<(u64, Vec<HeatmapCell>)>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn fit(&self, category: Category, los: bool) -> Option<&Result<CiFit, AnalysisError>> {
        self.fits
            .iter()
            .find(|(c, l, _)| *c == category && *l == los)
            .map(|(_, _, f)| f)
    }
}

/// Path loss extraction → local-square averaging → CI fits per
/// (category, LOS) → best-beam elevation histogram → heatmaps.
pub fn analyze(
    records: &[SweepRecord],
    scenario: &Scenario,
    codebook: &Codebook,
    gps: GpsLogs<'_>,
    options: &AnalyzeOptions,
) -> Result<AnalysisReport, AnalysisError> {
    let raw = extract_pathloss(records, scenario, codebook, gps, options.deembed)?;
    let averaged = local_square_average(&raw, options.square_side);
    let (best, boresight): (Vec<_>, Vec<_>) = averaged
        .into_iter()
        .partition(|s| s.category == Category::Best);
    let mut fit_input = best.clone();
    fit_input.extend_from_slice(&boresight);
    let fits = fit_table(&fit_input, scenario.carrier_freq_hz);

    let mut notes = Vec::new();
    for los in [true, false] {
        let label = if los { "LOS" } else { "NLOS" };
        for cat in [Category::Best, Category::Boresight] {
            if !fits.iter().any(|(c, l, _)| *c == cat && *l == los) {
                notes.push(format!("no {label} {cat} samples; row omitted"));
            }
        }
    }
    for (cat, los, fit) in &fits {
        if let Err(e) = fit {
            let label = if *los { "LOS" } else { "NLOS" };
            notes.push(format!("{label} {cat} fit failed: {e}"));
        }
    }

    let histogram = elevation_histogram(&raw, codebook);
    let sweeps = group_sweeps(records);
    let mut heatmaps = Vec::new();
    for k in &options.heatmap_sweeps {
        match sweeps.get(k) {
            Some(recs) => {
                let owned: Vec<SweepRecord> = recs.iter().map(|r| (*r).clone()).collect();
                match heatmap_export(&owned, codebook) {
                    Ok(cells) => heatmaps.push((*k, cells)),
                    Err(e) => notes.push(format!("heatmap for sweep {k} skipped: {e}")),
                }
            }
            None => notes.push(format!(
                "heatmap for sweep {k} skipped: sweep not in capture"
            )),
        }
    }

    Ok(AnalysisReport {
        raw,
        best,
        boresight,
        fits,
        histogram,
        heatmaps,
        notes,
    })
}

fn csv_to_file(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), CaptureError> {
    let fmt_err = |e: csv::Error| CaptureError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt_err)?;
    w.write_record(header).map_err(fmt_err)?;
    for row in rows {
        w.write_record(&row).map_err(fmt_err)?;
    }
    w.flush().map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes the report files into `dir`.
pub fn write_report(dir: &Path, report: &AnalysisReport) -> Result<(), CaptureError> {
    std::fs::create_dir_all(dir).map_err(|source| CaptureError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let pl_rows = |samples: &[PathLossSample]| -> Vec<Vec<String>> {
        samples
            .iter()
            .map(|s| {
                vec![
                    format!("{:.6}", s.distance),
                    format!("{:.6}", s.pathloss),
                    s.los.to_string(),
                ]
            })
            .collect()
    };
    let pl_header = ["distance_m", "pathloss_db", "los"];
    csv_to_file(
        &dir.join("pathloss_best.csv"),
        &pl_header,
        pl_rows(&report.best).into_iter(),
    )?;
    csv_to_file(
        &dir.join("pathloss_boresight.csv"),
        &pl_header,
        pl_rows(&report.boresight).into_iter(),
    )?;

    let fit_rows = report.fits.iter().filter_map(|(cat, los, fit)| {
        fit.as_ref().ok().map(|f| {
            vec![
                cat.to_string(),
                los.to_string(),
                format!("{:.4}", f.n),
                format!("{:.4}", f.sigma),
                f.sample_count.to_string(),
            ]
        })
    });
    csv_to_file(
        &dir.join("ci_fits.csv"),
        &["category", "los", "n", "sigma_db", "samples"],
        fit_rows,
    )?;

    let hist_rows = report.histogram.iter().map(|b| {
        vec![
            format!("{:.6}", b.elevation_deg),
            b.count.to_string(),
            format!("{:.6}", b.fraction),
        ]
    });
    csv_to_file(
        &dir.join("elevation_hist.csv"),
        &["elevation_deg", "count", "fraction"],
        hist_rows,
    )?;

    for (k, cells) in &report.heatmaps {
        let rows = cells.iter().map(|c| {
            vec![
                c.beam_index.to_string(),
                c.sector.to_string(),
                format!("{:.6}", c.azimuth_deg),
                format!("{:.6}", c.elevation_deg),
                format!("{:.6}", c.rx_power_dbm),
                c.below_floor.to_string(),
                format!("{:.6}", c.circumradius_deg),
            ]
        });
        csv_to_file(
            &dir.join(format!("heatmap_sweep_{k}.csv")),
            &[
                "beam_index",
                "sector",
                "azimuth_deg",
                "elevation_deg",
                "rx_power_dbm",
                "below_floor",
                "circumradius_deg",
            ],
            rows,
        )?;
    }

    let notes_path = dir.join("notes.txt");
    let mut f = std::fs::File::create(&notes_path).map_err(|source| CaptureError::Io {
        path: notes_path.clone(),
        source,
    })?;
    for n in &report.notes {
        writeln!(f, "{n}").map_err(|source| CaptureError::Io {
            path: notes_path.clone(),
            source,
        })?;
    }
    Ok(())
}
