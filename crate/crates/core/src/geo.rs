//! Positions, trajectories, GPS fixes and pointing directions.
//!
//! Everything lives in a local East-North-Up frame with a fixed origin per
//! run. Azimuths are degrees clockwise from north (or from the platform's
//! heading, for RX-frame directions); elevations are degrees above the
//! horizontal plane.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{Category, PathLossSample};

/// Minimum displacement over the heading window for the heading to be defined.
pub const MIN_HEADING_DISPLACEMENT_M: f64 = 0.1;
/// Fixes on each side of the query time used for heading estimation.
pub const HEADING_HALF_WINDOW: usize = 2;
/// GPS logging interval of the 14 Hz receiver.
pub const GPS_INTERVAL_NS: u64 = 70_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("time {t} s outside trajectory span [{start}, {end}]")]
    OutOfSpan { t: f64, start: f64, end: f64 },
    #[error("heading undefined: displacement {displacement:.3} m over the window is below 0.1 m")]
    Stationary { displacement: f64 },
    #[error("TX and RX positions coincide")]
    CoincidentPositions,
    #[error("need at least {needed} GPS fixes, got {got}")]
    TooFewFixes { needed: usize, got: usize },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

/// Wraps an angle in degrees to `[-180, 180)`.
pub fn wrap_deg(angle: f64) -> f64 {
    if (-180.0..180.0).contains(&angle) {
        return angle;
    }
    let w = (angle + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

/// A pointing direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    pub const fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }

    /// Unit vector in (east, north, up) for a clockwise-from-north azimuth.
    pub fn unit_vector(&self) -> [f64; 3] {
        let (az, el) = (
            self.azimuth_deg.to_radians(),
            self.elevation_deg.to_radians(),
        );
        [el.cos() * az.sin(), el.cos() * az.cos(), el.sin()]
    }

    /// Great-circle angle to `other` in degrees.
    pub fn angle_to(&self, other: &Direction) -> f64 {
        let a = self.unit_vector();
        let b = other.unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos).to_degrees()
    }

    /// Rotates the azimuth by `delta_deg`, wrapping to `[-180, 180)`.
    pub fn rotated(&self, delta_deg: f64) -> Self {
        Self::new(wrap_deg(self.azimuth_deg + delta_deg), self.elevation_deg)
    }
}

/// Local ENU position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Enu {
    pub east: f64,
    pub north: f64,
    pub up: f64,
}

impl Enu {
    pub const fn new(east: f64, north: f64, up: f64) -> Self {
        Self { east, north, up }
    }

    pub fn sub(&self, other: &Enu) -> Enu {
        Enu::new(
            self.east - other.east,
            self.north - other.north,
            self.up - other.up,
        )
    }

    pub fn norm(&self) -> f64 {
        (self.east * self.east + self.north * self.north + self.up * self.up).sqrt()
    }

    pub fn horizontal_norm(&self) -> f64 {
        self.east.hypot(self.north)
    }

    pub fn distance(&self, other: &Enu) -> f64 {
        self.sub(other).norm()
    }

    pub fn lerp(&self, other: &Enu, frac: f64) -> Enu {
        Enu::new(
            self.east + (other.east - self.east) * frac,
            self.north + (other.north - self.north) * frac,
            self.up + (other.up - self.up) * frac,
        )
    }

    /// Global direction of the vector from `self` to `target`.
    pub fn direction_to(&self, target: &Enu) -> Direction {
        let d = target.sub(self);
        Direction::new(
            wrap_deg(d.east.atan2(d.north).to_degrees()),
            d.up.atan2(d.horizontal_norm()).to_degrees(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    /// Seconds on the scenario time base.
    pub t: f64,
    #[serde(flatten)]
    pub position: Enu,
}

/// Piecewise-linear motion of one platform.
///
/// A single waypoint describes a stationary platform that is valid at any
/// time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    #[serde(
        default,
        rename = "heading_deg",
        skip_serializing_if = "Option::is_none"
    )]
    pub heading_override: Option<f64>,
}

impl Trajectory {
    pub fn new(waypoints: Vec<Waypoint>) -> Result<Self, GeoError> {
        let t = Self {
            waypoints,
            heading_override: None,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn stationary(position: Enu) -> Self {
        Self {
            waypoints: vec![Waypoint { t: 0.0, position }],
            heading_override: None,
        }
    }

    /// Constant-velocity motion from `start` over `[t0, t1]`.
    pub fn linear(start: Enu, velocity: Enu, t0: f64, t1: f64) -> Result<Self, GeoError> {
        let dt = t1 - t0;
        Self::new(vec![
            Waypoint {
                t: t0,
                position: start,
            },
            Waypoint {
                t: t1,
                position: Enu::new(
                    start.east + velocity.east * dt,
                    start.north + velocity.north * dt,
                    start.up + velocity.up * dt,
                ),
            },
        ])
    }

    pub fn with_heading(mut self, heading_deg: f64) -> Self {
        self.heading_override = Some(heading_deg);
        self
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.waypoints.is_empty() {
            return Err(GeoError::InvalidTrajectory("no waypoints".into()));
        }
        for (i, w) in self.waypoints.iter().enumerate() {
            if !(w.t.is_finite()
                && w.position.east.is_finite()
                && w.position.north.is_finite()
                && w.position.up.is_finite())
            {
                return Err(GeoError::InvalidTrajectory(format!(
                    "waypoints[{i}] has a non-finite value"
                )));
            }
        }
        for (i, pair) in self.waypoints.windows(2).enumerate() {
            if pair[1].t <= pair[0].t {
                return Err(GeoError::InvalidTrajectory(format!(
                    "waypoints[{}].t is not strictly increasing",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    /// `None` for a stationary single-waypoint trajectory.
    pub fn span(&self) -> Option<(f64, f64)> {
        match self.waypoints.as_slice() {
            [] | [_] => None,
            [first, .., last] => Some((first.t, last.t)),
        }
    }

    pub fn covers(&self, t: f64) -> bool {
        match self.span() {
            None => true,
            Some((a, b)) => t >= a && t <= b,
        }
    }

    fn bracket(&self, t: f64) -> Result<usize, GeoError> {
        let (start, end) = match self.span() {
            None => return Ok(0),
            Some(s) => s,
        };
        if !(t >= start && t <= end) {
            return Err(GeoError::OutOfSpan { t, start, end });
        }
        // index of the segment [i, i+1] containing t
        let i = self.waypoints.partition_point(|w| w.t <= t);
        Ok(i.saturating_sub(1).min(self.waypoints.len() - 2))
    }

    pub fn position_at(&self, t: f64) -> Result<Enu, GeoError> {
        interpolate_position(self, t)
    }

    /// True heading at `t`: the override if set, otherwise the bearing of the
    /// segment being traversed. Falls back to the nearest moving segment, and
    /// to north for a platform that never moves.
    pub fn heading_at(&self, t: f64) -> Result<f64, GeoError> {
        if let Some(h) = self.heading_override {
            return Ok(h);
        }
        if self.waypoints.len() < 2 {
            return Ok(0.0);
        }
        let seg = self.bracket(t)?;
        let bearing = |i: usize| {
            let d = self.waypoints[i + 1]
                .position
                .sub(&self.waypoints[i].position);
            (d.horizontal_norm() > 1e-9).then(|| d.east.atan2(d.north).to_degrees())
        };
        let segments = self.waypoints.len() - 1;
        for offset in 0..segments {
            for i in [seg.checked_sub(offset), seg.checked_add(offset)]
                .into_iter()
                .flatten()
            {
                if i < segments {
                    if let Some(b) = bearing(i) {
                        return Ok(b.rem_euclid(360.0));
                    }
                }
            }
        }
        Ok(0.0)
    }
}

/// Piecewise-linear interpolation between the waypoints bracketing `t`.
pub fn interpolate_position(traj: &Trajectory, t: f64) -> Result<Enu, GeoError> {
    let i = traj.bracket(t)?;
    if traj.waypoints.len() == 1 {
        return Ok(traj.waypoints[0].position);
    }
    let (a, b) = (&traj.waypoints[i], &traj.waypoints[i + 1]);
    let frac = (t - a.t) / (b.t - a.t);
    if frac == 0.0 {
        return Ok(a.position);
    }
    if frac == 1.0 {
        return Ok(b.position);
    }
    Ok(a.position.lerp(&b.position, frac))
}

/// One logged GPS fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    /// Nanoseconds since run start.
    pub timestamp_ns: u64,
    pub position: Enu,
    pub noise_sigma: f64,
}

impl GpsFix {
    pub fn time_s(&self) -> f64 {
        self.timestamp_ns as f64 * 1e-9
    }

    /// NMEA-style quality indicator: 4 = RTK fixed (sub-meter), 1 = standalone.
    pub fn fix_quality(&self) -> u8 {
        if self.noise_sigma < 1.0 {
            4
        } else {
            1
        }
    }
}

/// Position from a GPS log by linear interpolation between fixes.
///
/// Queries up to `hold_ns` outside the logged span are answered with the
/// edge fix.
pub fn position_from_gps(fixes: &[GpsFix], t_ns: u64, hold_ns: u64) -> Option<Enu> {
    let first = fixes.first()?;
    let last = fixes.last()?;
    if t_ns < first.timestamp_ns {
        return (first.timestamp_ns - t_ns <= hold_ns).then_some(first.position);
    }
    if t_ns > last.timestamp_ns {
        return (t_ns - last.timestamp_ns <= hold_ns).then_some(last.position);
    }
    let i = fixes.partition_point(|f| f.timestamp_ns <= t_ns);
    let lo = &fixes[i - 1];
    if lo.timestamp_ns == t_ns || i == fixes.len() {
        return Some(lo.position);
    }
    let hi = &fixes[i];
    let frac = (t_ns - lo.timestamp_ns) as f64 / (hi.timestamp_ns - lo.timestamp_ns) as f64;
    Some(lo.position.lerp(&hi.position, frac))
}

/// Heading in degrees clockwise from north at `t_ns`, from the displacement
/// across a centered window of ±2 fixes around the fix nearest `t_ns`.
pub fn heading_from_gps(fixes: &[GpsFix], t_ns: u64) -> Result<f64, GeoError> {
    if fixes.len() < 2 {
        return Err(GeoError::TooFewFixes {
            needed: 2,
            got: fixes.len(),
        });
    }
    let (first, last) = (fixes[0].timestamp_ns, fixes[fixes.len() - 1].timestamp_ns);
    if t_ns < first || t_ns > last {
        return Err(GeoError::OutOfSpan {
            t: t_ns as f64 * 1e-9,
            start: first as f64 * 1e-9,
            end: last as f64 * 1e-9,
        });
    }
    let nearest = fixes
        .iter()
        .enumerate()
        .min_by_key(|(_, f)| f.timestamp_ns.abs_diff(t_ns))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = nearest.saturating_sub(HEADING_HALF_WINDOW);
    let hi = (nearest + HEADING_HALF_WINDOW).min(fixes.len() - 1);
    let d = fixes[hi].position.sub(&fixes[lo].position);
    let displacement = d.horizontal_norm();
    if displacement < MIN_HEADING_DISPLACEMENT_M {
        return Err(GeoError::Stationary { displacement });
    }
    Ok(d.east.atan2(d.north).to_degrees().rem_euclid(360.0))
}

/// Direction of the TX as seen in the RX frame (azimuth relative to the RX
/// heading).
pub fn los_direction(
    rx_pos: &Enu,
    rx_heading_deg: f64,
    tx_pos: &Enu,
) -> Result<Direction, GeoError> {
    if rx_pos.distance(tx_pos) == 0.0 {
        return Err(GeoError::CoincidentPositions);
    }
    let global = rx_pos.direction_to(tx_pos);
    Ok(Direction::new(
        wrap_deg(global.azimuth_deg - rx_heading_deg),
        global.elevation_deg,
    ))
}

/// Merges samples that fall in the same axis-aligned square of side `side`
/// (and share LOS label and category) into one sample. Path loss is averaged
/// in dB; distance, position and best-beam elevation are arithmetic means.
/// Output is ordered by (category, LOS, square).
pub fn local_square_average(samples: &[PathLossSample], side: f64) -> Vec<PathLossSample> {
    assert!(side > 0.0, "square side must be positive");
    type Key = (u8, bool, i64, i64);
    let mut groups: BTreeMap<Key, Vec<&PathLossSample>> = BTreeMap::new();
    for s in samples {
        let key = (
            match s.category {
                Category::Best => 0,
                Category::Boresight => 1,
            },
            s.los,
            (s.rx_position.east / side).floor() as i64,
            (s.rx_position.north / side).floor() as i64,
        );
        groups.entry(key).or_default().push(s);
    }
    groups
        .into_values()
        .map(|members| {
            let weight: usize = members.iter().map(|m| m.members).sum();
            let w = |m: &&PathLossSample| m.members as f64;
            let total = weight as f64;
            let mean = |f: &dyn Fn(&PathLossSample) -> f64| {
                members.iter().map(|m| f(m) * w(m)).sum::<f64>() / total
            };
            PathLossSample {
                distance: mean(&|m| m.distance),
                pathloss: mean(&|m| m.pathloss),
                los: members[0].los,
                category: members[0].category,
                rx_position: Enu::new(
                    mean(&|m| m.rx_position.east),
                    mean(&|m| m.rx_position.north),
                    mean(&|m| m.rx_position.up),
                ),
                elevation_of_best: mean(&|m| m.elevation_of_best),
                members: weight,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixes_along(f: impl Fn(f64) -> Enu, count: usize) -> Vec<GpsFix> {
        (0..count as u64)
            .map(|k| {
                let t_ns = k * GPS_INTERVAL_NS;
                GpsFix {
                    timestamp_ns: t_ns,
                    position: f(t_ns as f64 * 1e-9),
                    noise_sigma: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_deg(180.0), -180.0);
        assert_eq!(wrap_deg(-180.0), -180.0);
        assert_eq!(wrap_deg(270.0), -90.0);
        assert_eq!(wrap_deg(-1e-17), -1e-17);
        assert!(wrap_deg(-1e-14) < 180.0);
    }

    #[test]
    fn interpolation_at_waypoints_and_midpoints() {
        let traj = Trajectory::new(vec![
            Waypoint {
                t: 0.0,
                position: Enu::new(0.0, 0.0, 1.0),
            },
            Waypoint {
                t: 2.0,
                position: Enu::new(10.0, 4.0, 1.0),
            },
            Waypoint {
                t: 3.0,
                position: Enu::new(10.0, 14.0, 3.0),
            },
        ])
        .unwrap();
        assert_eq!(traj.position_at(2.0).unwrap(), Enu::new(10.0, 4.0, 1.0));
        assert_eq!(traj.position_at(3.0).unwrap(), Enu::new(10.0, 14.0, 3.0));
        let mid = traj.position_at(2.5).unwrap();
        assert!((mid.north - 9.0).abs() < 1e-12 && (mid.up - 2.0).abs() < 1e-12);
        assert!(matches!(
            traj.position_at(3.5),
            Err(GeoError::OutOfSpan { .. })
        ));
        assert!(matches!(
            traj.position_at(-0.1),
            Err(GeoError::OutOfSpan { .. })
        ));
    }

    #[test]
    fn constant_velocity_is_exact() {
        let v = Enu::new(3.0, -8.9408, 0.25);
        let start = Enu::new(-5.0, 100.0, 2.0);
        let traj = Trajectory::linear(start, v, 0.0, 10.0).unwrap();
        for k in 0..=1000 {
            let t = k as f64 * 0.01;
            let p = traj.position_at(t).unwrap();
            let want = Enu::new(
                start.east + v.east * t,
                start.north + v.north * t,
                start.up + v.up * t,
            );
            assert!(p.distance(&want) < 1e-9);
        }
    }

    #[test]
    fn non_increasing_times_rejected() {
        let w = |t| Waypoint {
            t,
            position: Enu::default(),
        };
        assert!(Trajectory::new(vec![w(0.0), w(0.0)]).is_err());
        assert!(Trajectory::new(vec![]).is_err());
    }

    #[test]
    fn heading_cardinal_directions() {
        let north = fixes_along(|t| Enu::new(0.0, 9.0 * t, 0.0), 20);
        assert!(heading_from_gps(&north, 500_000_000).unwrap().abs() < 1e-9);
        let east = fixes_along(|t| Enu::new(9.0 * t, 0.0, 0.0), 20);
        assert!((heading_from_gps(&east, 500_000_000).unwrap() - 90.0).abs() < 1e-9);
        let west = fixes_along(|t| Enu::new(-9.0 * t, 0.0, 0.0), 20);
        assert!((heading_from_gps(&west, 500_000_000).unwrap() - 270.0).abs() < 1e-9);
    }

    #[test]
    fn heading_undefined_when_stationary() {
        let still = fixes_along(|_| Enu::new(1.0, 2.0, 0.0), 10);
        assert!(matches!(
            heading_from_gps(&still, 300_000_000),
            Err(GeoError::Stationary { .. })
        ));
        assert!(matches!(
            heading_from_gps(&still[..1], 0),
            Err(GeoError::TooFewFixes { .. })
        ));
    }

    #[test]
    fn heading_on_circular_track() {
        // 20 mph around a 30 m radius circle, counter-clockwise seen from above.
        let speed = 8.9408;
        let radius = 30.0;
        let omega = speed / radius;
        let track = |t: f64| Enu::new(radius * (omega * t).cos(), radius * (omega * t).sin(), 0.0);
        let fixes = fixes_along(track, 300);
        for k in (2..298).step_by(7) {
            let t = k as f64 * 0.07;
            // velocity direction (-sin, cos) -> bearing atan2(east, north)
            let (ve, vn) = (-(omega * t).sin(), (omega * t).cos());
            let want = ve.atan2(vn).to_degrees();
            let got = heading_from_gps(&fixes, k * GPS_INTERVAL_NS).unwrap();
            assert!(wrap_deg(got - want).abs() < 2.0, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn los_direction_frames() {
        let rx = Enu::new(0.0, 0.0, 0.0);
        let d = los_direction(&rx, 0.0, &Enu::new(0.0, 10.0, 0.0)).unwrap();
        assert!(d.azimuth_deg.abs() < 1e-12 && d.elevation_deg.abs() < 1e-12);
        let d = los_direction(&rx, 0.0, &Enu::new(10.0, 0.0, 0.0)).unwrap();
        assert!((d.azimuth_deg - 90.0).abs() < 1e-12);
        let d = los_direction(&rx, 0.0, &Enu::new(0.0, 100.0, 15.0)).unwrap();
        assert!((d.elevation_deg - 8.530765609948133).abs() < 1e-9);
        assert_eq!(
            los_direction(&rx, 0.0, &rx).unwrap_err(),
            GeoError::CoincidentPositions
        );
        let tx = Enu::new(-3.0, 7.0, 2.0);
        let a = los_direction(&rx, 37.0, &tx).unwrap();
        let b = los_direction(&rx, 37.0 + 360.0, &tx).unwrap();
        assert!((a.azimuth_deg - b.azimuth_deg).abs() < 1e-9);
    }

    #[test]
    fn great_circle_angle_basics() {
        let a = Direction::new(0.0, 0.0);
        assert!((a.angle_to(&Direction::new(90.0, 0.0)) - 90.0).abs() < 1e-12);
        assert!((a.angle_to(&Direction::new(0.0, 30.0)) - 30.0).abs() < 1e-12);
        assert!(a.angle_to(&a).abs() < 1e-12);
        // azimuth differences shrink with elevation
        let hi = Direction::new(0.0, 60.0);
        assert!(hi.angle_to(&Direction::new(10.0, 60.0)) < 10.0);
    }

    #[test]
    fn gps_interpolation_with_hold() {
        let fixes = fixes_along(|t| Enu::new(0.0, 10.0 * t, 0.0), 3);
        let p = position_from_gps(&fixes, 35_000_000, 0).unwrap();
        assert!((p.north - 0.35).abs() < 1e-12);
        assert!(position_from_gps(&fixes, 150_000_000, 0).is_none());
        assert_eq!(
            position_from_gps(&fixes, 150_000_000, GPS_INTERVAL_NS).unwrap(),
            fixes[2].position
        );
    }
}
