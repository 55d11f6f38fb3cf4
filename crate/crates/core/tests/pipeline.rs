use mmwave_sounder::analysis::{heatmap_export, Category, GpsLogs};
use mmwave_sounder::capture::{self, read_capture, read_gps, read_pdp, write_run, RunManifest};
use mmwave_sounder::codebook::Codebook;
use mmwave_sounder::geo::{Direction, Enu, Trajectory, Waypoint};
use mmwave_sounder::report::{analyze, write_report, AnalyzeOptions};
use mmwave_sounder::scenario::{Interval, Reflector, Scenario};
use mmwave_sounder::sounder::{simulate_records, Sounder};
use mmwave_sounder::verify::noiseless_anechoic;

fn parked(tx: Enu, reflectors: Vec<Reflector>, blocked: bool) -> Scenario {
    let mut s = noiseless_anechoic(3, 2);
    s.tx_power_dbm = -12.0;
    s.tx_boresight = Direction::new(180.0, 0.0);
    s.tx_trajectory = Trajectory::stationary(tx);
    s.rx_trajectory = Trajectory {
        waypoints: vec![
            Waypoint {
                t: 0.0,
                position: Enu::new(0.0, 0.0, 1.5),
            },
            Waypoint {
                t: 0.02,
                position: Enu::new(0.0, 0.0, 1.5),
            },
        ],
        heading_override: Some(0.0),
    };
    s.reflectors = reflectors;
    if blocked {
        s.los_blocked = vec![Interval {
            start: -1.0,
            end: 1.0,
        }];
    }
    s
}

#[test]
fn anechoic_heatmap_peaks_at_tx_direction() {
    let s = noiseless_anechoic(3, 2);
    let cb = Codebook::default_rx();
    let sweep = Sounder::new(&s).unwrap().run_sweep(&cb, 0, 0).unwrap();
    let cells = heatmap_export(&sweep, &cb).unwrap();
    let hot = cells
        .iter()
        .max_by(|a, b| a.rx_power_dbm.total_cmp(&b.rx_power_dbm))
        .unwrap();
    assert_eq!((hot.azimuth_deg, hot.elevation_deg), (0.0, 0.0));
    assert!(cells.iter().all(|c| c.circumradius_deg > 0.0));
}

#[test]
fn empty_channel_heatmap_is_all_below_floor() {
    let s = parked(Enu::new(0.0, 30.0, 1.5), Vec::new(), true);
    let cb = Codebook::default_rx();
    let sweep = Sounder::new(&s).unwrap().run_sweep(&cb, 0, 0).unwrap();
    let cells = heatmap_export(&sweep, &cb).unwrap();
    assert_eq!(cells.len(), 200);
    assert!(cells.iter().all(|c| c.below_floor));
}

#[test]
fn mirror_symmetric_channel_gives_symmetric_heatmap() {
    let refl = |east: f64| Reflector {
        position: Enu::new(east, 15.0, 1.5),
        loss_db: 6.0,
    };
    let s = parked(Enu::new(0.0, 30.0, 1.5), vec![refl(5.0), refl(-5.0)], true);
    let cb = Codebook::default_rx();
    let sweep = Sounder::new(&s).unwrap().run_sweep(&cb, 0, 0).unwrap();
    let cells = heatmap_export(&sweep, &cb).unwrap();
    let mut compared = 0;
    for c in &cells {
        let mirror = cb.nearest_beam(&Direction::new(-c.azimuth_deg, c.elevation_deg));
        assert!(
            mirror
                .direction
                .angle_to(&Direction::new(-c.azimuth_deg, c.elevation_deg))
                < 1e-9,
            "codebook not mirror symmetric at beam {}",
            c.beam_index
        );
        let m = &cells[mirror.index];
        assert_eq!(c.below_floor, m.below_floor);
        if !c.below_floor {
            assert!(
                (c.rx_power_dbm - m.rx_power_dbm).abs() <= 0.1,
                "beam {} vs {}",
                c.beam_index,
                m.beam_index
            );
            compared += 1;
        }
    }
    assert!(compared > 20);
}

#[test]
fn run_files_round_trip() {
    let mut s = parked(Enu::new(0.0, 30.0, 1.5), vec![], false);
    s.noise_figure_db = Some(6.0);
    let cb = Codebook::default_rx();
    let tmp = tempfile::tempdir().unwrap();
    let summary = write_run(tmp.path(), &s, &cb, true).unwrap();
    assert_eq!(summary.plan.sweeps, 3);
    assert_eq!(summary.records, 600);

    let (_, direct) = simulate_records(&s, &cb).unwrap();
    let back = read_capture(&tmp.path().join(capture::CAPTURE_FILE)).unwrap();
    assert_eq!(back.len(), direct.len());
    for (a, b) in back.iter().zip(&direct) {
        assert_eq!(
            (a.sweep_index, a.beam_index, a.timestamp_ns),
            (b.sweep_index, b.beam_index, b.timestamp_ns)
        );
        assert!((a.rx_power - b.rx_power).abs() < 1e-6);
        assert_eq!(a.below_floor, b.below_floor);
    }

    let pdp = read_pdp(tmp.path(), 2, 24).unwrap().unwrap();
    assert_eq!(pdp.len(), 8192);
    let peak = pdp.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    assert!((peak as f64 - direct[2 * 200 + 24].rx_power).abs() < 1e-3);
    assert_eq!(read_pdp(tmp.path(), 9, 0).unwrap(), None);

    let gps = read_gps(&tmp.path().join(capture::GPS_RX_FILE)).unwrap();
    assert_eq!(gps.len(), summary.gps_fixes);

    let mut m = RunManifest::new(tmp.path(), s.seed);
    m.add_input("capture", &tmp.path().join(capture::CAPTURE_FILE))
        .unwrap();
    m.write(tmp.path()).unwrap();
    let back = RunManifest::read(tmp.path()).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.input_hashes["capture"].len(), 64);
}

#[test]
fn los_only_report_notes_missing_nlos_rows() {
    let mut s = parked(Enu::new(0.0, 30.0, 1.5), vec![], false);
    s.rx_trajectory =
        Trajectory::linear(Enu::new(0.0, 0.0, 1.5), Enu::new(0.0, 100.0, 0.0), 0.0, 0.2)
            .unwrap()
            .with_heading(0.0);
    s.tx_trajectory = Trajectory::stationary(Enu::new(0.0, 60.0, 1.5));
    let cb = Codebook::default_rx();
    let tmp = tempfile::tempdir().unwrap();
    write_run(tmp.path(), &s, &cb, false).unwrap();
    let records = read_capture(&tmp.path().join(capture::CAPTURE_FILE)).unwrap();
    let rx = read_gps(&tmp.path().join(capture::GPS_RX_FILE)).unwrap();
    let tx = read_gps(&tmp.path().join(capture::GPS_TX_FILE)).unwrap();
    let report = analyze(
        &records,
        &s,
        &cb,
        GpsLogs { rx: &rx, tx: &tx },
        &AnalyzeOptions::default(),
    )
    .unwrap();
    let fit = report.fit(Category::Best, true).unwrap().as_ref().unwrap();
    // free space only: the fitted exponent is the free-space one
    assert!((fit.n - 2.0).abs() < 0.05, "n = {}", fit.n);
    assert!(report.fit(Category::Best, false).is_none());
    assert!(report
        .notes
        .iter()
        .any(|n| n.contains("no NLOS best samples")));
    assert!(report
        .best
        .iter()
        .zip(&report.boresight)
        .all(|(b, r)| b.pathloss <= r.pathloss + 1e-9));

    let out = tmp.path().join("report");
    write_report(&out, &report).unwrap();
    let fits = std::fs::read_to_string(out.join("ci_fits.csv")).unwrap();
    assert_eq!(
        fits.lines().next().unwrap(),
        "category,los,n,sigma_db,samples"
    );
    assert!(!fits.contains(",false,"));
    let best = std::fs::read_to_string(out.join("pathloss_best.csv")).unwrap();
    assert_eq!(best.lines().next().unwrap(), "distance_m,pathloss_db,los");
    let hist = std::fs::read_to_string(out.join("elevation_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 6);
}
