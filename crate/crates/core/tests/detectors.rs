use hybrid_otfs::harness::results::{crossing_snr, curve};
use hybrid_otfs::harness::{run_sweep, DetectorKind, Metric, SimConfig};

fn otfs_curve(detector: DetectorKind) -> Vec<(f64, hybrid_otfs::harness::ErrorCount)> {
    let mut cfg = SimConfig {
        detector,
        snr_db: (7..=13).map(|i| 2.0 * i as f64).collect(),
        ..SimConfig::default()
    };
    cfg.stop.max_frames = 20;
    cfg.stop.min_frames = 20;
    cfg.stop.target_errors = None;
    curve(&run_sweep(&cfg).unwrap(), Metric::OtfsRaw)
}

/// The rake DFE must not trail the linear detector by more than 1 dB at a
/// raw BER of 1e-2 on the EVA 300 km/h link.
#[test]
fn mrc_dfe_tracks_lmmse() {
    let lmmse = crossing_snr(&otfs_curve(DetectorKind::Lmmse), 1e-2).expect("LMMSE reaches 1e-2");
    let mrc = crossing_snr(&otfs_curve(DetectorKind::MrcDfe), 1e-2).expect("MRC-DFE reaches 1e-2");
    println!("1e-2 crossing: LMMSE {lmmse:.2} dB, MRC-DFE {mrc:.2} dB");
    assert!(mrc <= lmmse + 1.0, "MRC-DFE {mrc:.2} dB vs LMMSE {lmmse:.2} dB");
}
