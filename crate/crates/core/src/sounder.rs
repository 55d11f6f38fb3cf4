//! Receiver beam-sweep loop.
//!
//! Each sweep steps the four sector arrays through their codebook slots in
//! lock-step; every slot is one dwell of `averaging` sounding periods. A
//! dwell synthesizes the received capture through the ray channel, adds
//! thermal noise from a per-dwell random stream, correlates each period
//! against the ZC reference and power-averages the periods into a PDP.
//!
//! Sample amplitudes are `sqrt(mW)`, so `|c[k]|²/n_zc²` of a correlation
//! bin is power in mW at the calibrated plane.

use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{self, add_noise, apply_channel, dwell_stream, ChannelError, Ray};
use crate::codebook::{beam_gain, Beam, BeamType, Codebook, CodebookError};
use crate::geo::{Direction, GeoError, GpsFix, Trajectory, GPS_INTERVAL_NS};
use crate::scenario::{Scenario, ScenarioError};
use crate::waveform::{generate_zc, periodic_signal, ComplexSequence, Correlator, WaveformError};

/// Linear power floor applied before taking logs (−300 dB).
const MIN_POWER_LINEAR: f64 = 1e-30;

#[derive(Debug, Error)]
pub enum SounderError {
    #[error(transparent)]
    Waveform(#[from] WaveformError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("trajectory span: {0}")]
    TrajectorySpan(String),
    #[error("output: {0}")]
    Output(String),
}

impl From<GeoError> for SounderError {
    fn from(e: GeoError) -> Self {
        SounderError::TrajectorySpan(e.to_string())
    }
}

/// Power-delay profile in dB at the calibrated plane.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    pub bins: Vec<f64>,
    pub bin_period: f64,
}

impl Pdp {
    pub fn peak_bin(&self) -> usize {
        self.bins
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            )
            .0
    }
}

/// Builds a PDP from `m` captured periods: per-period circular correlation,
/// bin-wise power average, dB conversion plus `calibration_offset_db`.
pub fn pdp_from_capture(
    rx: &ComplexSequence,
    correlator: &Correlator,
    m: usize,
    calibration_offset_db: f64,
) -> Result<Pdp, WaveformError> {
    let n = correlator.len();
    if m == 0 || rx.len() != m * n {
        return Err(WaveformError::LengthMismatch {
            rx: rx.len(),
            reference: n,
        });
    }
    let norm = 1.0 / (n as f64 * n as f64 * m as f64);
    let mut power = vec![0.0; n];
    let mut block = vec![Default::default(); n];
    for period in rx.samples.chunks_exact(n) {
        block.copy_from_slice(period);
        correlator.correlate_block(&mut block);
        for (p, c) in power.iter_mut().zip(&block) {
            *p += c.norm_sqr() * norm;
        }
    }
    Ok(Pdp {
        bins: power
            .into_iter()
            .map(|p| 10.0 * p.max(MIN_POWER_LINEAR).log10() + calibration_offset_db)
            .collect(),
        bin_period: rx.sample_period,
    })
}

/// Strongest PDP bin and whether it falls below the measurement floor.
pub fn peak_power(pdp: &Pdp, floor_dbm: f64) -> (f64, bool) {
    let peak = pdp.bins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (peak, peak < floor_dbm)
}

/// One beam dwell of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep_index: u64,
    pub beam_index: usize,
    /// Nanoseconds since run start at the start of the dwell.
    pub timestamp_ns: u64,
    /// Peak correlated power, dBm.
    pub rx_power: f64,
    pub pdp: Option<Pdp>,
    pub below_floor: bool,
}

/// Timing of a full run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    /// Scenario time of run start, seconds.
    pub run_start: f64,
    pub span_ns: u64,
    pub dwell_ns: u64,
    pub scan_ns: u64,
    pub sweeps: u64,
}

impl RunPlan {
    pub fn new(scenario: &Scenario, codebook: &Codebook) -> Result<Self, SounderError> {
        let (start, end) = scenario.run_span()?;
        let dwell_ns = scenario.dwell_ns();
        let scan_ns = codebook.slots() as u64 * dwell_ns;
        let span_ns = ((end - start) * 1e9).round() as u64;
        Ok(Self {
            run_start: start,
            span_ns,
            dwell_ns,
            scan_ns,
            sweeps: span_ns.checked_div(scan_ns).unwrap_or(0),
        })
    }

    pub fn sweep_start_ns(&self, sweep_index: u64) -> u64 {
        sweep_index * self.scan_ns
    }

    /// Scenario time in seconds of `ns` after run start.
    pub fn scenario_time(&self, ns: u64) -> f64 {
        self.run_start + ns as f64 * 1e-9
    }
}

/// Reusable per-scenario sounding state: reference sequence, transmit
/// waveform and correlator.
#[derive(Debug, Clone)]
pub struct Sounder<'a> {
    scenario: &'a Scenario,
    tx_beam: BeamType,
    tx_signal: ComplexSequence,
    correlator: Correlator,
    plan_start: f64,
    keep_pdp: bool,
}

impl<'a> Sounder<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, SounderError> {
        scenario.validate()?;
        let zc = generate_zc(&scenario.sounding)?;
        let amplitude = 10f64.powf(scenario.tx_power_dbm / 20.0);
        let tx_signal = periodic_signal(&zc, scenario.averaging).scaled(amplitude);
        Ok(Self {
            scenario,
            tx_beam: scenario.tx_beam()?,
            tx_signal,
            correlator: Correlator::new(&zc),
            plan_start: scenario.run_span()?.0,
            keep_pdp: false,
        })
    }

    /// Keep each dwell's PDP in its record.
    pub fn with_pdp(mut self, keep: bool) -> Self {
        self.keep_pdp = keep;
        self
    }

    /// Rays and RX heading at scenario time `t`.
    fn channel_at(&self, t: f64) -> Result<(Vec<Ray>, f64), SounderError> {
        let rays = channel::build_rays(self.scenario, t)?;
        let heading = self.scenario.rx_trajectory.heading_at(t)?;
        Ok((rays, heading))
    }

    /// Measures one dwell of `beam` through `rays`.
    pub fn dwell(
        &self,
        beam: &Beam,
        rays: &[Ray],
        rx_heading_deg: f64,
        sweep_index: u64,
        timestamp_ns: u64,
    ) -> Result<SweepRecord, SounderError> {
        let s = self.scenario;
        let tx_gains: Vec<f64> = rays
            .iter()
            .map(|r| self.tx_beam.gain(&s.tx_boresight, &r.aod))
            .collect();
        let rx_gains: Vec<f64> = rays
            .iter()
            .map(|r| beam_gain(beam, &r.aoa.rotated(-rx_heading_deg)))
            .collect();
        let mut rx = apply_channel(&self.tx_signal, rays, &tx_gains, &rx_gains)?;
        if let Some(nf) = s.noise_figure_db {
            let mut rng = dwell_stream(s.seed, sweep_index, beam.index);
            rx = add_noise(&rx, nf, s.sounding.sample_rate, &mut rng);
        }
        let pdp = pdp_from_capture(&rx, &self.correlator, s.averaging, s.calibration_offset_db)?;
        let (rx_power, below_floor) = peak_power(&pdp, s.measurement_floor_dbm);
        Ok(SweepRecord {
            sweep_index,
            beam_index: beam.index,
            timestamp_ns,
            rx_power,
            pdp: self.keep_pdp.then_some(pdp),
            below_floor,
        })
    }

    /// One full sweep starting `t0_ns` after run start. Records come back in
    /// codebook order; the beams of the four sectors sharing a slot share a
    /// timestamp.
    pub fn run_sweep(
        &self,
        codebook: &Codebook,
        sweep_index: u64,
        t0_ns: u64,
    ) -> Result<Vec<SweepRecord>, SounderError> {
        let dwell_ns = self.scenario.dwell_ns();
        let slot_channels = (0..codebook.slots())
            .map(|slot| {
                let start = t0_ns + slot as u64 * dwell_ns;
                let mid = self.plan_start + (start as f64 + dwell_ns as f64 / 2.0) * 1e-9;
                self.channel_at(mid)
            })
            .collect::<Result<Vec<_>, _>>()?;
        codebook
            .beams
            .par_iter()
            .map(|beam| {
                let (rays, heading) = &slot_channels[beam.slot];
                let ts = t0_ns + beam.slot as u64 * dwell_ns;
                self.dwell(beam, rays, *heading, sweep_index, ts)
            })
            .collect()
    }
}

/// Convenience wrapper around [`Sounder::run_sweep`].
pub fn run_sweep(
    scenario: &Scenario,
    codebook: &Codebook,
    sweep_index: u64,
    t0_ns: u64,
) -> Result<Vec<SweepRecord>, SounderError> {
    Sounder::new(scenario)?.run_sweep(codebook, sweep_index, t0_ns)
}

/// Runs back-to-back sweeps over the scenario span, handing each completed
/// sweep to `sink` in order.
pub fn simulate_run<F>(
    scenario: &Scenario,
    codebook: &Codebook,
    keep_pdp: bool,
    mut sink: F,
) -> Result<RunPlan, SounderError>
where
    F: FnMut(Vec<SweepRecord>) -> Result<(), SounderError>,
{
    let plan = RunPlan::new(scenario, codebook)?;
    let sounder = Sounder::new(scenario)?.with_pdp(keep_pdp);
    for k in 0..plan.sweeps {
        sink(sounder.run_sweep(codebook, k, plan.sweep_start_ns(k))?)?;
    }
    Ok(plan)
}

/// Collects every sweep of a run in memory.
pub fn simulate_records(
    scenario: &Scenario,
    codebook: &Codebook,
) -> Result<(RunPlan, Vec<SweepRecord>), SounderError> {
    let mut all = Vec::new();
    let plan = simulate_run(scenario, codebook, false, |sweep| {
        all.extend(sweep);
        Ok(())
    })?;
    Ok((plan, all))
}

/// Random stream ids reserved for GPS noise, clear of dwell streams.
pub const GPS_RX_STREAM: u64 = u64::MAX;
pub const GPS_TX_STREAM: u64 = u64::MAX - 1;

/// GPS fixes every 70 ms from run start, with Gaussian position noise of
/// `scenario.gps_noise_sigma_m` per axis.
pub fn synthesize_gps(
    scenario: &Scenario,
    plan: &RunPlan,
    trajectory: &Trajectory,
    stream: u64,
) -> Result<Vec<GpsFix>, SounderError> {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    let sigma = scenario.gps_noise_sigma_m;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(stream);
    let count = plan.span_ns / GPS_INTERVAL_NS + 1;
    (0..count)
        .map(|k| {
            let ts = k * GPS_INTERVAL_NS;
            let mut p = trajectory.position_at(plan.scenario_time(ts))?;
            if sigma > 0.0 {
                let mut n = || -> f64 { rng.sample::<f64, _>(StandardNormal) * sigma };
                p.east += n();
                p.north += n();
                p.up += n();
            }
            Ok(GpsFix {
                timestamp_ns: ts,
                position: p,
                noise_sigma: sigma,
            })
        })
        .collect()
}

/// The TX direction as seen from the RX at scenario time `t`, RX frame.
pub fn true_los_direction(scenario: &Scenario, t: f64) -> Result<Direction, SounderError> {
    let rx = scenario.rx_trajectory.position_at(t)?;
    let tx = scenario.tx_trajectory.position_at(t)?;
    let heading = scenario.rx_trajectory.heading_at(t)?;
    Ok(crate::geo::los_direction(&rx, heading, &tx)?)
}
