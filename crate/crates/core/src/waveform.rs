//! Zadoff-Chu sounding sequences and circular correlation.
//!
//! The sounder transmits a root ZC sequence back to back. Because the
//! sequence has an ideal periodic autocorrelation, correlating one received
//! period against the reference yields the channel impulse response scaled by
//! `n_zc`. Correlation values here are kept unnormalized; conversion to power
//! happens once, in [`crate::sounder`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper bound on the transmit SDR sampling rate.
pub const MAX_SAMPLE_RATE_HZ: f64 = 160e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WaveformError {
    #[error("invalid ZC configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "length mismatch: received {rx} samples is not a multiple of reference length {reference}"
    )]
    LengthMismatch { rx: usize, reference: usize },
}

/// Parameters of the sounding waveform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZcConfig {
    pub n_zc: usize,
    #[serde(rename = "root")]
    pub u: usize,
    #[serde(rename = "sample_rate_hz")]
    pub sample_rate: f64,
}

impl Default for ZcConfig {
    fn default() -> Self {
        Self {
            n_zc: 8192,
            u: 1729,
            sample_rate: 65.536e6,
        }
    }
}

impl ZcConfig {
    pub fn new(n_zc: usize, u: usize, sample_rate: f64) -> Result<Self, WaveformError> {
        let cfg = Self {
            n_zc,
            u,
            sample_rate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), WaveformError> {
        if self.n_zc == 0 {
            return Err(WaveformError::InvalidConfig("n_zc must be positive".into()));
        }
        if self.u == 0 || self.u >= self.n_zc {
            return Err(WaveformError::InvalidConfig(format!(
                "root {} outside (0, {})",
                self.u, self.n_zc
            )));
        }
        if gcd(self.n_zc, self.u) != 1 {
            return Err(WaveformError::InvalidConfig(format!(
                "gcd({}, {}) != 1",
                self.n_zc, self.u
            )));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate < MAX_SAMPLE_RATE_HZ) {
            return Err(WaveformError::InvalidConfig(format!(
                "sample rate {} Hz outside (0, 160 MHz)",
                self.sample_rate
            )));
        }
        Ok(())
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Duration of one sounding period in seconds.
    pub fn period_duration(&self) -> f64 {
        self.n_zc as f64 / self.sample_rate
    }

    /// Duration of one sounding period rounded to integer nanoseconds.
    pub fn period_ns(&self) -> u64 {
        (self.n_zc as f64 * 1e9 / self.sample_rate).round() as u64
    }
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// A uniformly sampled complex baseband signal.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence {
    pub samples: Vec<Complex64>,
    pub sample_period: f64,
}

impl ComplexSequence {
    pub fn new(samples: Vec<Complex64>, sample_period: f64) -> Self {
        Self {
            samples,
            sample_period,
        }
    }

    pub fn zeros(len: usize, sample_period: f64) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len], sample_period)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power per sample, `|x|²` averaged.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }

    /// Returns the sequence delayed cyclically by `shift` samples:
    /// `out[k] = self[(k - shift) mod len]`.
    pub fn cyclic_shift(&self, shift: usize) -> Self {
        let n = self.samples.len();
        let mut out = self.samples.clone();
        if n > 0 {
            out.rotate_right(shift % n);
        }
        Self::new(out, self.sample_period)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(
            self.samples.iter().map(|s| s * factor).collect(),
            self.sample_period,
        )
    }
}

/// Generates the root Zadoff-Chu sequence for `config`.
///
/// The exponent is `u·n·(n + N mod 2)`, reduced modulo `2N` in integer
/// arithmetic before the trigonometric evaluation so that every sample is
/// accurate to machine precision even for long sequences. For odd `N` this
/// is exactly `exp(-jπ·u·n(n+1)/N)`; even lengths need the `n²` exponent to
/// keep the periodic autocorrelation ideal.
pub fn generate_zc(config: &ZcConfig) -> Result<ComplexSequence, WaveformError> {
    config.validate()?;
    let n_zc = config.n_zc as u128;
    let u = config.u as u128;
    let parity = n_zc % 2;
    let modulus = 2 * n_zc;
    let samples = (0..n_zc)
        .map(|n| {
            let k = (u * n % modulus) * ((n + parity) % modulus) % modulus;
            let phase = -PI * k as f64 / n_zc as f64;
            Complex64::from_polar(1.0, phase)
        })
        .collect();
    Ok(ComplexSequence::new(samples, config.sample_period()))
}

/// Repeats `seq` cyclically `n_periods` times.
pub fn periodic_signal(seq: &ComplexSequence, n_periods: usize) -> ComplexSequence {
    assert!(n_periods >= 1, "n_periods must be at least 1");
    let mut samples = Vec::with_capacity(seq.len() * n_periods);
    for _ in 0..n_periods {
        samples.extend_from_slice(&seq.samples);
    }
    ComplexSequence::new(samples, seq.sample_period)
}

/// FFT-based circular correlator against a fixed reference.
///
/// Holds the forward/inverse plans and the conjugated reference spectrum, so
/// one instance can be shared across threads and reused for every dwell.
#[derive(Clone)]
pub struct Correlator {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    ref_spectrum_conj: Vec<Complex64>,
}

impl std::fmt::Debug for Correlator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Correlator")
            .field("len", &self.ref_spectrum_conj.len())
            .finish()
    }
}

impl Correlator {
    pub fn new(reference: &ComplexSequence) -> Self {
        let n = reference.len();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let mut spectrum = reference.samples.clone();
        forward.process(&mut spectrum);
        for s in spectrum.iter_mut() {
            *s = s.conj();
        }
        Self {
            forward,
            inverse,
            ref_spectrum_conj: spectrum,
        }
    }

    pub fn len(&self) -> usize {
        self.ref_spectrum_conj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_spectrum_conj.is_empty()
    }

    /// Correlates one reference-length block in place.
    pub fn correlate_block(&self, block: &mut [Complex64]) {
        debug_assert_eq!(block.len(), self.len());
        self.forward.process(block);
        for (b, r) in block.iter_mut().zip(&self.ref_spectrum_conj) {
            *b *= r;
        }
        self.inverse.process(block);
        let scale = 1.0 / self.len() as f64;
        for b in block.iter_mut() {
            *b *= scale;
        }
    }

    /// One circular correlation per reference period of `rx`.
    pub fn correlate(&self, rx: &ComplexSequence) -> Result<Vec<ComplexSequence>, WaveformError> {
        let n = self.len();
        if n == 0 || !rx.len().is_multiple_of(n) || rx.is_empty() {
            return Err(WaveformError::LengthMismatch {
                rx: rx.len(),
                reference: n,
            });
        }
        Ok(rx
            .samples
            .chunks_exact(n)
            .map(|chunk| {
                let mut block = chunk.to_vec();
                self.correlate_block(&mut block);
                ComplexSequence::new(block, rx.sample_period)
            })
            .collect())
    }
}

/// Per-period circular cross-correlation of `rx` against `reference`:
/// `c[m] = Σ_n rx[n]·conj(ref[(n − m) mod N])` for each length-`N` block.
pub fn circular_xcorr(
    rx: &ComplexSequence,
    reference: &ComplexSequence,
) -> Result<Vec<ComplexSequence>, WaveformError> {
    if reference.is_empty() {
        return Err(WaveformError::LengthMismatch {
            rx: rx.len(),
            reference: 0,
        });
    }
    Correlator::new(reference).correlate(rx)
}

/// Direct O(N²) evaluation of [`circular_xcorr`]. Used as the reference
/// oracle for the transform-based path.
pub fn circular_xcorr_direct(
    rx: &ComplexSequence,
    reference: &ComplexSequence,
) -> Result<Vec<ComplexSequence>, WaveformError> {
    let n = reference.len();
    if n == 0 || rx.is_empty() || !rx.len().is_multiple_of(n) {
        return Err(WaveformError::LengthMismatch {
            rx: rx.len(),
            reference: n,
        });
    }
    Ok(rx
        .samples
        .chunks_exact(n)
        .map(|chunk| {
            let c = (0..n)
                .map(|lag| {
                    chunk
                        .iter()
                        .enumerate()
                        .map(|(i, x)| x * reference.samples[(i + n - lag) % n].conj())
                        .sum()
                })
                .collect();
            ComplexSequence::new(c, rx.sample_period)
        })
        .collect())
}
