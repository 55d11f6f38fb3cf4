//! `sounder`: generate codebooks, simulate sounding runs, analyze captures
//! and run the built-in anechoic self test.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 3 failed
//! verification check.

// `!(x >= lo)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use mmwave_sounder::analysis::{DeembedMode, GpsLogs};
use mmwave_sounder::capture::{self, CaptureError, RunManifest};
use mmwave_sounder::codebook::{BeamType, Codebook};
use mmwave_sounder::report::{analyze, write_report, AnalyzeOptions, DEFAULT_SQUARE_SIDE_M};
use mmwave_sounder::scenario::Scenario;
use mmwave_sounder::sounder::SounderError;
use mmwave_sounder::verify;

#[derive(Debug, Parser)]
#[command(
    name = "sounder",
    version,
    about = "mmWave beam-sweeping channel sounder twin"
)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (codebook) or directory (simulate, analyze, verify).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tessellate a beam codebook and write it as CSV.
    Codebook {
        #[arg(long, default_value_t = 200)]
        cells: usize,
        /// Elevation extent of the tessellated segment, degrees.
        #[arg(long, default_value_t = 60.0)]
        elevation_span: f64,
        /// RX beam type (1-4).
        #[arg(long, default_value_t = 2)]
        beam_type: u8,
    },
    /// Simulate a run and write capture, GPS logs and manifest.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Codebook CSV; defaults to the 200-beam codebook with the
        /// scenario's RX beam type.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Also write the per-dwell PDP sidecar.
        #[arg(long)]
        pdp: bool,
    },
    /// Extract path loss, fit the close-in model and write a report.
    Analyze {
        /// Run directory produced by `simulate`.
        #[arg(long)]
        run: PathBuf,
        /// Scenario file; defaults to the one recorded in the run manifest.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Codebook file; defaults to the one recorded in the run manifest.
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Side of the local averaging squares, meters.
        #[arg(long, default_value_t = DEFAULT_SQUARE_SIDE_M)]
        square: f64,
        #[arg(long, value_enum, default_value_t = Deembed::Boresight)]
        deembed: Deembed,
        /// Sweeps to export as heatmaps.
        #[arg(long = "heatmap-sweep", default_values_t = [0u64])]
        heatmap_sweeps: Vec<u64>,
    },
    /// Run the anechoic self test.
    Verify {
        #[arg(long, default_value_t = 3)]
        tx_type: u8,
        #[arg(long, default_value_t = 2)]
        rx_type: u8,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Deembed {
    Boresight,
    Pattern,
}

impl From<Deembed> for DeembedMode {
    fn from(d: Deembed) -> Self {
        match d {
            Deembed::Boresight => DeembedMode::BoresightGain,
            Deembed::Pattern => DeembedMode::PatternGain,
        }
    }
}

#[derive(Debug)]
enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
    Verify,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::Verify => 3,
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Invalid(e.into())
}

fn classify_sounder(e: SounderError) -> Failure {
    match e {
        SounderError::Scenario(_) | SounderError::Codebook(_) | SounderError::TrajectorySpan(_) => {
            invalid(e)
        }
        other => Failure::Runtime(other.into()),
    }
}

fn classify_capture(e: CaptureError) -> Failure {
    match e {
        CaptureError::Sounder(s) => classify_sounder(s),
        other => Failure::Runtime(other.into()),
    }
}

fn load_scenario(path: &Path, seed: Option<u64>) -> Result<Scenario, Failure> {
    let mut s = Scenario::load(path).map_err(invalid)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn load_codebook(path: Option<&Path>, scenario: &Scenario) -> Result<Codebook, Failure> {
    match path {
        Some(p) => {
            let f = File::open(p)
                .with_context(|| format!("opening codebook {}", p.display()))
                .map_err(invalid)?;
            Codebook::read_csv(f)
                .with_context(|| format!("reading codebook {}", p.display()))
                .map_err(invalid)
        }
        None => {
            let bt = BeamType::rx(scenario.rx_beam_type).map_err(invalid)?;
            Codebook::generate(60.0, 200, bt).map_err(invalid)
        }
    }
}

fn cmd_codebook(out: Option<&Path>, cells: usize, span: f64, beam_type: u8) -> Result<(), Failure> {
    let bt = BeamType::rx(beam_type).map_err(invalid)?;
    let cb = Codebook::generate(span, cells, bt).map_err(invalid)?;
    match out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            cb.write_csv(BufWriter::new(f))
                .map_err(|e| Failure::Runtime(e.into()))?;
        }
        None => cb
            .write_csv(io::stdout().lock())
            .map_err(|e| Failure::Runtime(e.into()))?,
    }
    let counts = cb.beams_per_sector();
    let per_sector: Vec<String> = counts
        .iter()
        .enumerate()
        .map(|(k, c)| format!("sector {k}: {c}"))
        .collect();
    eprintln!("{} beams; {}", cb.len(), per_sector.join(", "));
    Ok(())
}

fn cmd_simulate(
    out: &Path,
    seed: Option<u64>,
    scenario_path: &Path,
    codebook_path: Option<&Path>,
    pdp: bool,
) -> Result<(), Failure> {
    let scenario = load_scenario(scenario_path, seed)?;
    let codebook = load_codebook(codebook_path, &scenario)?;
    let summary = capture::write_run(out, &scenario, &codebook, pdp).map_err(classify_capture)?;

    let mut manifest = RunManifest::new(out, scenario.seed);
    manifest.scenario_path = Some(scenario_path.to_path_buf());
    manifest
        .add_input("scenario", scenario_path)
        .map_err(classify_capture)?;
    if let Some(p) = codebook_path {
        manifest.codebook_path = Some(p.to_path_buf());
        manifest
            .add_input("codebook", p)
            .map_err(classify_capture)?;
    }
    manifest.write(out).map_err(classify_capture)?;
    println!(
        "{} sweeps, {} records, {} GPS fixes -> {}",
        summary.plan.sweeps,
        summary.records,
        summary.gps_fixes,
        out.display()
    );
    Ok(())
}

fn cmd_analyze(
    out: Option<&Path>,
    run: &Path,
    scenario_path: Option<&Path>,
    codebook_path: Option<&Path>,
    options: AnalyzeOptions,
) -> Result<(), Failure> {
    if !(options.square_side > 0.0) {
        return Err(invalid(anyhow!(
            "--square must be positive, got {}",
            options.square_side
        )));
    }
    let manifest = RunManifest::read(run).ok();
    let scenario_path = scenario_path
        .map(Path::to_path_buf)
        .or_else(|| manifest.as_ref().and_then(|m| m.scenario_path.clone()))
        .ok_or_else(|| {
            invalid(anyhow!(
                "no --scenario given and none recorded in {}",
                run.display()
            ))
        })?;
    let codebook_path = codebook_path
        .map(Path::to_path_buf)
        .or_else(|| manifest.as_ref().and_then(|m| m.codebook_path.clone()));
    let scenario = load_scenario(&scenario_path, manifest.as_ref().map(|m| m.seed))?;
    let codebook = load_codebook(codebook_path.as_deref(), &scenario)?;

    let records =
        capture::read_capture(&run.join(capture::CAPTURE_FILE)).map_err(classify_capture)?;
    let gps_rx = capture::read_gps(&run.join(capture::GPS_RX_FILE)).map_err(classify_capture)?;
    let gps_tx = capture::read_gps(&run.join(capture::GPS_TX_FILE)).map_err(classify_capture)?;
    let gps = GpsLogs {
        rx: &gps_rx,
        tx: &gps_tx,
    };
    let report = analyze(&records, &scenario, &codebook, gps, &options)
        .map_err(|e| Failure::Runtime(e.into()))?;

    let dir = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| run.join("report"));
    write_report(&dir, &report).map_err(classify_capture)?;
    let mut m = RunManifest::new(&dir, scenario.seed);
    m.scenario_path = Some(scenario_path.clone());
    m.add_input("scenario", &scenario_path)
        .map_err(classify_capture)?;
    if let Some(p) = &codebook_path {
        m.codebook_path = Some(p.clone());
        m.add_input("codebook", p).map_err(classify_capture)?;
    }
    for name in [
        capture::CAPTURE_FILE,
        capture::GPS_RX_FILE,
        capture::GPS_TX_FILE,
    ] {
        m.add_input(name, &run.join(name))
            .map_err(classify_capture)?;
    }
    m.write(&dir).map_err(classify_capture)?;

    for (cat, los, fit) in &report.fits {
        let label = if *los { "LOS" } else { "NLOS" };
        match fit {
            Ok(f) => println!(
                "{label} {cat}: n = {:.3}, sigma = {:.2} dB ({} samples)",
                f.n, f.sigma, f.sample_count
            ),
            Err(e) => println!("{label} {cat}: {e}"),
        }
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("report -> {}", dir.display());
    Ok(())
}

fn cmd_verify(
    out: Option<&Path>,
    seed: Option<u64>,
    tx_type: u8,
    rx_type: u8,
) -> Result<(), Failure> {
    BeamType::tx(tx_type).map_err(invalid)?;
    BeamType::rx(rx_type).map_err(invalid)?;
    let mut scenario = Scenario::anechoic(tx_type, rx_type);
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let checks = verify::run_checks(&scenario).map_err(classify_sounder)?;
    let lines: Vec<String> = checks.iter().map(ToString::to_string).collect();
    for l in &lines {
        println!("{l}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join("verify.txt");
        let mut f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        for l in &lines {
            writeln!(f, "{l}").with_context(|| format!("writing {}", path.display()))?;
        }
        RunManifest::new(dir, scenario.seed)
            .write(dir)
            .map_err(classify_capture)?;
    }
    if checks.iter().all(|c| c.passed) {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out = cli.out.as_deref();
    match cli.command {
        Command::Codebook {
            cells,
            elevation_span,
            beam_type,
        } => cmd_codebook(out, cells, elevation_span, beam_type),
        Command::Simulate {
            scenario,
            codebook,
            pdp,
        } => cmd_simulate(
            out.unwrap_or(Path::new("run")),
            cli.seed,
            &scenario,
            codebook.as_deref(),
            pdp,
        ),
        Command::Analyze {
            run,
            scenario,
            codebook,
            square,
            deembed,
            heatmap_sweeps,
        } => cmd_analyze(
            out,
            &run,
            scenario.as_deref(),
            codebook.as_deref(),
            AnalyzeOptions {
                square_side: square,
                deembed: deembed.into(),
                heatmap_sweeps,
            },
        ),
        Command::Verify { tx_type, rx_type } => cmd_verify(out, cli.seed, tx_type, rx_type),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(e) => eprintln!("error: invalid input: {e:#}"),
                Failure::Runtime(e) => eprintln!("error: {e:#}"),
                Failure::Verify => eprintln!("error: verification failed"),
            }
            ExitCode::from(f.code())
        }
    }
}
