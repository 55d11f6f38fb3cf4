//! Built-in over-the-air self test: TX and RX facing each other at 17 ft in
//! an anechoic (single LOS ray) environment.

use std::fmt;

use crate::channel::fspl;
use crate::codebook::{BeamType, Codebook};
use crate::scenario::Scenario;
use crate::sounder::{Sounder, SounderError, SweepRecord};
use crate::waveform::{circular_xcorr, generate_zc, ZcConfig};

/// Free-space loss reference at 17 ft, 28.3 GHz, dB.
pub const REFERENCE_FSPL_17FT_DB: f64 = 75.67;
pub const FSPL_TOLERANCE_DB: f64 = 0.2;
pub const CLOSURE_TOLERANCE_DB: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        name,
        passed,
        detail,
    }
}

/// Peak, worst off-peak magnitude and worst unit-magnitude error of a ZC
/// sequence's periodic autocorrelation.
pub fn zc_ideality(config: &ZcConfig) -> Result<(f64, f64, f64), SounderError> {
    let zc = generate_zc(config)?;
    let acf = circular_xcorr(&zc, &zc)?.remove(0).samples;
    let peak = acf[0].norm();
    let off = acf[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mag_err = zc
        .samples
        .iter()
        .map(|c| (c.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((peak, off, mag_err))
}

/// Noiseless copy of the anechoic scenario.
pub fn noiseless_anechoic(tx_type: u8, rx_type: u8) -> Scenario {
    let mut s = Scenario::anechoic(tx_type, rx_type);
    s.noise_figure_db = None;
    s
}

/// Runs every self-test check against `scenario`, which should be an
/// anechoic-style single-LOS setup.
pub fn run_checks(scenario: &Scenario) -> Result<Vec<Check>, SounderError> {
    let mut checks = Vec::new();

    let cfg = &scenario.sounding;
    let (peak, off, mag_err) = zc_ideality(cfg)?;
    let n = cfg.n_zc as f64;
    checks.push(check(
        "zc_autocorrelation",
        (peak - n).abs() <= 1e-6 * n && off < 1e-6 * n && mag_err <= 1e-12,
        format!(
            "peak {peak:.6} (N = {}), max off-peak {off:.3e}, max |x|-1 {mag_err:.1e}",
            cfg.n_zc
        ),
    ));

    let rx_type = scenario.rx_beam_type;
    let codebook = Codebook::generate(60.0, 200, BeamType::rx(rx_type)?)?;
    let tx_pos = scenario.tx_trajectory.position_at(scenario.run_span()?.0)?;
    let rx_pos = scenario.rx_trajectory.position_at(scenario.run_span()?.0)?;
    let distance = tx_pos.distance(&rx_pos);
    let closed_form = fspl(scenario.carrier_freq_hz, distance)?;
    let link_gain = scenario.tx_power_dbm
        + scenario.tx_beam()?.boresight_gain
        + scenario.rx_beam()?.boresight_gain;

    let mut noiseless = scenario.clone();
    noiseless.noise_figure_db = None;
    let quiet: Vec<SweepRecord> = Sounder::new(&noiseless)?.run_sweep(&codebook, 0, 0)?;
    let sweep: Vec<SweepRecord> = Sounder::new(scenario)?.run_sweep(&codebook, 0, 0)?;

    let truth = crate::sounder::true_los_direction(scenario, scenario.run_span()?.0)?;
    let target = codebook.nearest_beam(&truth).index;
    let expected = link_gain - closed_form;
    let got = quiet[target].rx_power;
    checks.push(check(
        "link_budget_closure",
        (got - expected).abs() <= CLOSURE_TOLERANCE_DB,
        format!("rx {got:.4} dBm vs budget {expected:.4} dBm"),
    ));

    let measured = link_gain - sweep[target].rx_power;
    checks.push(check(
        "fspl_17ft",
        (measured - REFERENCE_FSPL_17FT_DB).abs() <= FSPL_TOLERANCE_DB
            && (measured - closed_form).abs() <= CLOSURE_TOLERANCE_DB,
        format!(
            "measured {measured:.4} dB, closed form {closed_form:.4} dB, reference {REFERENCE_FSPL_17FT_DB} ± {FSPL_TOLERANCE_DB} dB at {distance:.4} m"
        ),
    ));

    let dwell = scenario.dwell_ns();
    let mut stamps: Vec<u64> = sweep.iter().map(|r| r.timestamp_ns).collect();
    stamps.sort_unstable();
    stamps.dedup();
    let spacing_ok = stamps.windows(2).all(|w| w[1] - w[0] == dwell);
    let scan = stamps.len() as u64 * dwell;
    let expected_scan = codebook.slots() as u64 * scenario.averaging as u64 * cfg.period_ns();
    checks.push(check(
        "scan_timing",
        sweep.len() == 200 && spacing_ok && scan == expected_scan,
        format!("{} records, dwell {dwell} ns, scan {scan} ns", sweep.len()),
    ));

    let hot = sweep
        .iter()
        .max_by(|a, b| {
            a.rx_power
                .total_cmp(&b.rx_power)
                .then(b.beam_index.cmp(&a.beam_index))
        })
        .map(|r| r.beam_index);
    checks.push(check(
        "heatmap_hot_spot",
        hot == Some(target),
        format!(
            "max at beam {}, nearest to TX is beam {target}",
            hot.map_or_else(|| "none".to_string(), |h| h.to_string())
        ),
    ));

    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_anechoic_passes() {
        let checks = run_checks(&Scenario::anechoic(3, 2)).unwrap();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn wrong_reference_distance_fails_fspl() {
        let mut s = Scenario::anechoic(3, 2);
        s.tx_trajectory = crate::geo::Trajectory::stationary(crate::geo::Enu::new(0.0, 8.0, 1.5));
        let checks = run_checks(&s).unwrap();
        let fspl = checks.iter().find(|c| c.name == "fspl_17ft").unwrap();
        assert!(!fspl.passed);
        assert!(
            checks
                .iter()
                .find(|c| c.name == "link_budget_closure")
                .unwrap()
                .passed
        );
    }
}
