//! Ray-based multipath channel between the TX and RX platforms.
//!
//! The channel is a set of discrete rays (LOS plus one specular bounce per
//! point reflector), frozen for the duration of a dwell. Ray amplitudes
//! follow free-space loss over the total path length plus the reflector's
//! loss; each ray carries the carrier phase of its delay.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geo::{Direction, Enu, GeoError};
use crate::scenario::Scenario;
use crate::waveform::ComplexSequence;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Thermal noise density at 290 K.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("fspl domain error: frequency {freq} Hz and distance {distance} m must be positive")]
    Domain { freq: f64, distance: f64 },
    #[error("trajectory: {0}")]
    Span(#[from] GeoError),
    #[error("path of {length} m is inside the near field (free-space loss below 0 dB)")]
    NearField { length: f64 },
    #[error("gain lists have {tx} TX and {rx} RX entries for {rays} rays")]
    GainCount { rays: usize, tx: usize, rx: usize },
}

/// Free-space path loss `20·log10(4π·d·f/c)` in dB.
pub fn fspl(freq: f64, distance: f64) -> Result<f64, ChannelError> {
    if !(freq > 0.0 && distance > 0.0) {
        return Err(ChannelError::Domain { freq, distance });
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance * freq / SPEED_OF_LIGHT).log10())
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    /// Propagation delay, seconds.
    pub delay: f64,
    /// Complex amplitude including path loss, reflection loss and carrier phase.
    pub gain: Complex64,
    /// Arrival direction at the RX, global frame.
    pub aoa: Direction,
    /// Departure direction at the TX, global frame.
    pub aod: Direction,
    pub is_los: bool,
}

impl Ray {
    fn new(
        carrier: f64,
        length: f64,
        extra_loss_db: f64,
        aoa: Direction,
        aod: Direction,
        is_los: bool,
    ) -> Result<Self, ChannelError> {
        let loss = fspl(carrier, length)? + extra_loss_db;
        if loss < 0.0 {
            return Err(ChannelError::NearField { length });
        }
        let delay = length / SPEED_OF_LIGHT;
        let phase = -2.0 * std::f64::consts::PI * carrier * delay;
        Ok(Self {
            delay,
            gain: Complex64::from_polar(10f64.powf(-loss / 20.0), phase),
            aoa,
            aod,
            is_los,
        })
    }

    /// Path loss of this ray in dB.
    pub fn loss_db(&self) -> f64 {
        -20.0 * self.gain.norm().log10()
    }
}

/// Rays between the platforms at scenario time `t`.
pub fn build_rays(scenario: &Scenario, t: f64) -> Result<Vec<Ray>, ChannelError> {
    let tx = scenario.tx_trajectory.position_at(t)?;
    let rx = scenario.rx_trajectory.position_at(t)?;
    rays_between(scenario, &tx, &rx, scenario.is_los(t))
}

/// Rays between fixed TX and RX positions.
pub fn rays_between(
    scenario: &Scenario,
    tx: &Enu,
    rx: &Enu,
    los_clear: bool,
) -> Result<Vec<Ray>, ChannelError> {
    let f = scenario.carrier_freq_hz;
    let mut rays = Vec::with_capacity(scenario.reflectors.len() + 1);
    if los_clear {
        let d = tx.distance(rx);
        rays.push(Ray::new(
            f,
            d,
            0.0,
            rx.direction_to(tx),
            tx.direction_to(rx),
            true,
        )?);
    }
    for r in &scenario.reflectors {
        let length = tx.distance(&r.position) + r.position.distance(rx);
        rays.push(Ray::new(
            f,
            length,
            r.loss_db,
            rx.direction_to(&r.position),
            tx.direction_to(&r.position),
            false,
        )?);
    }
    Ok(rays)
}

/// Passes a cyclic sounding signal through the rays:
/// `r[k] = Σ_i g_i·10^((G_tx,i + G_rx,i)/20)·s[(k − round(τ_i/T_s)) mod L]`.
pub fn apply_channel(
    tx_signal: &ComplexSequence,
    rays: &[Ray],
    tx_gains_db: &[f64],
    rx_gains_db: &[f64],
) -> Result<ComplexSequence, ChannelError> {
    if tx_gains_db.len() != rays.len() || rx_gains_db.len() != rays.len() {
        return Err(ChannelError::GainCount {
            rays: rays.len(),
            tx: tx_gains_db.len(),
            rx: rx_gains_db.len(),
        });
    }
    let len = tx_signal.len();
    let mut out = ComplexSequence::zeros(len, tx_signal.sample_period);
    if len == 0 {
        return Ok(out);
    }
    for ((ray, gt), gr) in rays.iter().zip(tx_gains_db).zip(rx_gains_db) {
        let tap = ray.gain * 10f64.powf((gt + gr) / 20.0);
        let shift = (ray.delay / tx_signal.sample_period).round() as usize % len;
        let (head, tail) = tx_signal.samples.split_at(len - shift);
        // out[k] += tap·s[k − shift]: the last `shift` samples wrap to the front
        for (o, s) in out.samples.iter_mut().zip(tail.iter().chain(head)) {
            *o += tap * s;
        }
    }
    Ok(out)
}

/// Total thermal noise power in dBm over the sampled bandwidth.
pub fn noise_power_dbm(noise_figure_db: f64, sample_rate: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + 10.0 * sample_rate.log10() + noise_figure_db
}

/// Deterministic random stream for one dwell, independent of evaluation order.
pub fn dwell_stream(seed: u64, sweep_index: u64, beam_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((sweep_index << 16) | beam_index as u64);
    rng
}

/// Adds circular complex Gaussian noise at the thermal level. Sample power
/// is in mW, the same plane as the received signal.
pub fn add_noise<R: Rng + ?Sized>(
    signal: &ComplexSequence,
    noise_figure_db: f64,
    sample_rate: f64,
    rng: &mut R,
) -> ComplexSequence {
    let power_mw = 10f64.powf(noise_power_dbm(noise_figure_db, sample_rate) / 10.0);
    let sigma = (power_mw / 2.0).sqrt();
    let samples = signal
        .samples
        .iter()
        .map(|s| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            s + Complex64::new(re * sigma, im * sigma)
        })
        .collect();
    ComplexSequence::new(samples, signal.sample_period)
}
