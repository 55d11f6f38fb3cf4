//! On-disk formats of a simulated run.
//!
//! A run directory holds:
//!
//! - `capture.csv`: `sweep_index,timestamp_ns,beam_index,azimuth_deg,elevation_deg,rx_power_dbm,below_floor`
//! - `gps_rx.csv`, `gps_tx.csv`: `timestamp_ns,east_m,north_m,up_m,fix_quality`
//! - optionally `pdp.bin` with one record of `n_zc` little-endian `f32` dB
//!   values per dwell, and `pdp_index.csv` (`sweep_index,beam_index,offset_bytes,bins`)
//!   giving each record's byte offset.
//! - `manifest.json` ([`RunManifest`]).
//!
//! Angles are written with 6 fractional digits, powers with 6.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::codebook::Codebook;
use crate::geo::{Enu, GpsFix};
use crate::scenario::Scenario;
use crate::sounder::{
    simulate_run, synthesize_gps, RunPlan, SounderError, SweepRecord, GPS_RX_STREAM, GPS_TX_STREAM,
};

pub const CAPTURE_FILE: &str = "capture.csv";
pub const GPS_RX_FILE: &str = "gps_rx.csv";
pub const GPS_TX_FILE: &str = "gps_tx.csv";
pub const PDP_FILE: &str = "pdp.bin";
pub const PDP_INDEX_FILE: &str = "pdp_index.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const CAPTURE_HEADER: [&str; 7] = [
    "sweep_index",
    "timestamp_ns",
    "beam_index",
    "azimuth_deg",
    "elevation_deg",
    "rx_power_dbm",
    "below_floor",
];
pub const GPS_HEADER: [&str; 5] = ["timestamp_ns", "east_m", "north_m", "up_m", "fix_quality"];
pub const PDP_INDEX_HEADER: [&str; 4] = ["sweep_index", "beam_index", "offset_bytes", "bins"];

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Sounder(#[from] SounderError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CaptureError + '_ {
    move |source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CaptureError + '_ {
    move |e| CaptureError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CaptureError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn check_header(
    path: &Path,
    found: &csv::StringRecord,
    expected: &[&str],
) -> Result<(), CaptureError> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(CaptureError::Format {
            path: path.to_path_buf(),
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Streams capture rows to a CSV file.
pub struct CaptureWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CaptureWriter<W> {
    pub fn new(writer: W) -> Result<Self, csv::Error> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(CAPTURE_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &SweepRecord, codebook: &Codebook) -> Result<(), csv::Error> {
        let d = codebook.beams[record.beam_index].direction;
        self.inner.write_record([
            record.sweep_index.to_string(),
            record.timestamp_ns.to_string(),
            record.beam_index.to_string(),
            format!("{:.6}", d.azimuth_deg),
            format!("{:.6}", d.elevation_deg),
            format!("{:.6}", record.rx_power),
            record.below_floor.to_string(),
        ])
    }

    pub fn finish(mut self) -> Result<W, CaptureError> {
        self.inner.flush().map_err(|source| CaptureError::Io {
            path: PathBuf::from(CAPTURE_FILE),
            source,
        })?;
        self.inner.into_inner().map_err(|e| CaptureError::Format {
            path: PathBuf::from(CAPTURE_FILE),
            message: e.to_string(),
        })
    }
}

pub fn read_capture(path: &Path) -> Result<Vec<SweepRecord>, CaptureError> {
    let file = File::open(path).map_err(io_err(path))?;
    read_capture_from(file, path)
}

pub fn read_capture_from<R: Read>(
    reader: R,
    path: &Path,
) -> Result<Vec<SweepRecord>, CaptureError> {
    let mut r = csv::Reader::from_reader(reader);
    check_header(path, r.headers().map_err(csv_err(path))?, &CAPTURE_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |field: &str| CaptureError::Format {
            path: path.to_path_buf(),
            message: format!("line {}: invalid {field}", i + 2),
        };
        out.push(SweepRecord {
            sweep_index: rec[0].parse().map_err(|_| bad("sweep_index"))?,
            timestamp_ns: rec[1].parse().map_err(|_| bad("timestamp_ns"))?,
            beam_index: rec[2].parse().map_err(|_| bad("beam_index"))?,
            rx_power: rec[5].parse().map_err(|_| bad("rx_power_dbm"))?,
            pdp: None,
            below_floor: rec[6].parse().map_err(|_| bad("below_floor"))?,
        });
    }
    Ok(out)
}

pub fn write_gps<W: Write>(writer: W, fixes: &[GpsFix]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(GPS_HEADER)?;
    for f in fixes {
        w.write_record([
            f.timestamp_ns.to_string(),
            format!("{:.6}", f.position.east),
            format!("{:.6}", f.position.north),
            format!("{:.6}", f.position.up),
            f.fix_quality().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gps(path: &Path) -> Result<Vec<GpsFix>, CaptureError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = csv::Reader::from_reader(file);
    check_header(path, r.headers().map_err(csv_err(path))?, &GPS_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |k: usize| -> Result<f64, CaptureError> {
            rec[k].parse().map_err(|_| CaptureError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: invalid {}", i + 2, GPS_HEADER[k]),
            })
        };
        let quality: u8 = rec[4].parse().map_err(|_| CaptureError::Format {
            path: path.to_path_buf(),
            message: format!("line {}: invalid fix_quality", i + 2),
        })?;
        out.push(GpsFix {
            timestamp_ns: rec[0].parse().map_err(|_| CaptureError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: invalid timestamp_ns", i + 2),
            })?,
            position: Enu::new(num(1)?, num(2)?, num(3)?),
            // the log only carries the quality class
            noise_sigma: if quality == 4 { 0.0 } else { 1.0 },
        });
    }
    if out
        .windows(2)
        .any(|w| w[1].timestamp_ns <= w[0].timestamp_ns)
    {
        return Err(CaptureError::Format {
            path: path.to_path_buf(),
            message: "timestamps not strictly increasing".into(),
        });
    }
    Ok(out)
}

/// Provenance record written into every output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub scenario_path: Option<PathBuf>,
    pub codebook_path: Option<PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Input name → SHA-256 hex digest.
    pub input_hashes: std::collections::BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(output_dir: &Path, seed: u64) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            scenario_path: None,
            codebook_path: None,
            seed,
            output_dir: output_dir.to_path_buf(),
            input_hashes: Default::default(),
        }
    }

    /// Records `path` under `name` with its content hash.
    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<(), CaptureError> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        self.input_hashes
            .insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<(), CaptureError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    pub fn read(dir: &Path) -> Result<Self, CaptureError> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|e| CaptureError::Format {
            path,
            message: e.to_string(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSummary {
    pub plan: RunPlan,
    pub records: u64,
    pub gps_fixes: usize,
}

/// Simulates `scenario` and writes capture, GPS logs and (optionally) the
/// PDP sidecar into `dir`.
pub fn write_run(
    dir: &Path,
    scenario: &Scenario,
    codebook: &Codebook,
    with_pdp: bool,
) -> Result<RunSummary, CaptureError> {
    // fail before touching the filesystem
    RunPlan::new(scenario, codebook)?;
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let capture_path = dir.join(CAPTURE_FILE);
    let mut capture = CaptureWriter::new(create(&capture_path)?).map_err(csv_err(&capture_path))?;
    let pdp_path = dir.join(PDP_FILE);
    let index_path = dir.join(PDP_INDEX_FILE);
    let mut pdp_out = if with_pdp {
        let mut index = csv::Writer::from_writer(create(&index_path)?);
        index
            .write_record(PDP_INDEX_HEADER)
            .map_err(csv_err(&index_path))?;
        Some((create(&pdp_path)?, index, 0u64))
    } else {
        None
    };

    let mut records = 0u64;
    let plan = simulate_run(scenario, codebook, with_pdp, |sweep| {
        for rec in &sweep {
            capture
                .write(rec, codebook)
                .map_err(|e| SounderError::Output(format!("writing capture: {e}")))?;
            if let (Some((bin, index, offset)), Some(pdp)) = (pdp_out.as_mut(), rec.pdp.as_ref()) {
                let bytes: Vec<u8> = pdp
                    .bins
                    .iter()
                    .flat_map(|v| (*v as f32).to_le_bytes())
                    .collect();
                bin.write_all(&bytes)
                    .map_err(|e| SounderError::Output(format!("writing PDP sidecar: {e}")))?;
                index
                    .write_record([
                        rec.sweep_index.to_string(),
                        rec.beam_index.to_string(),
                        offset.to_string(),
                        pdp.bins.len().to_string(),
                    ])
                    .map_err(|e| SounderError::Output(format!("writing PDP index: {e}")))?;
                *offset += bytes.len() as u64;
            }
        }
        records += sweep.len() as u64;
        Ok(())
    })?;
    capture.finish()?.flush().map_err(io_err(&capture_path))?;
    if let Some((mut bin, mut index, _)) = pdp_out {
        bin.flush().map_err(io_err(&pdp_path))?;
        index.flush().map_err(io_err(&index_path))?;
    }

    let gps_rx = synthesize_gps(scenario, &plan, &scenario.rx_trajectory, GPS_RX_STREAM)?;
    let gps_tx = synthesize_gps(scenario, &plan, &scenario.tx_trajectory, GPS_TX_STREAM)?;
    for (name, fixes) in [(GPS_RX_FILE, &gps_rx), (GPS_TX_FILE, &gps_tx)] {
        let path = dir.join(name);
        write_gps(create(&path)?, fixes).map_err(csv_err(&path))?;
    }
    Ok(RunSummary {
        plan,
        records,
        gps_fixes: gps_rx.len(),
    })
}

/// Reads the PDP of one dwell back from a sidecar.
pub fn read_pdp(
    dir: &Path,
    sweep_index: u64,
    beam_index: usize,
) -> Result<Option<Vec<f32>>, CaptureError> {
    let index_path = dir.join(PDP_INDEX_FILE);
    let mut r = csv::Reader::from_reader(File::open(&index_path).map_err(io_err(&index_path))?);
    check_header(
        &index_path,
        r.headers().map_err(csv_err(&index_path))?,
        &PDP_INDEX_HEADER,
    )?;
    for rec in r.records() {
        let rec = rec.map_err(csv_err(&index_path))?;
        let parse = |k: usize| -> Result<u64, CaptureError> {
            rec[k].parse().map_err(|_| CaptureError::Format {
                path: index_path.clone(),
                message: format!("invalid {}", PDP_INDEX_HEADER[k]),
            })
        };
        if parse(0)? == sweep_index && parse(1)? == beam_index as u64 {
            let (offset, bins) = (parse(2)?, parse(3)? as usize);
            let pdp_path = dir.join(PDP_FILE);
            let mut f = File::open(&pdp_path).map_err(io_err(&pdp_path))?;
            use std::io::{Seek, SeekFrom};
            f.seek(SeekFrom::Start(offset)).map_err(io_err(&pdp_path))?;
            let mut buf = vec![0u8; bins * 4];
            f.read_exact(&mut buf).map_err(io_err(&pdp_path))?;
            return Ok(Some(
                buf.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ));
        }
    }
    Ok(None)
}
