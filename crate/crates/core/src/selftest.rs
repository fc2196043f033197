//! Fast invariant checks runnable from the command line.

use crate::channel::{apply_channel, build_ht, sample_realization, DelayProfile, EdgeMode, NoiseModel};
use crate::coding::{CodeSpec, Modulation};
use crate::geometry::{FrameGeometry, RawGeometry};
use crate::grid::{max_abs_diff, Grid, C64};
use crate::harness::results::records_to_string;
use crate::harness::{run_sweep, OutputFormat, SimConfig};
use crate::rx_ofdm::detect_ofdm_frame;
use crate::transforms::{heisenberg, isfft, wigner, CpPrecoder, IsfftDirection};
use crate::tx::{build_hybrid_frame, FrameLayout, TxConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_grid(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Grid {
    Grid::from_fn(rows, cols, |_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn small_geometry() -> FrameGeometry {
    FrameGeometry::validate(&RawGeometry {
        m: 64,
        n: 8,
        n_dd: 4,
        n_tf: 4,
        n_s: None,
        l_cp: 16,
        delta_f: 60e3,
        f_c: 28e9,
    })
    .expect("valid geometry")
}

fn transforms(rng: &mut ChaCha8Rng) -> Check {
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = random_grid(32, 8, rng);
        let tf = isfft(&x, IsfftDirection::DdToTf);
        let back = isfft(&tf, IsfftDirection::TfToDd);
        worst = worst.max(back.max_abs_diff(&x));
        let t = heisenberg(&tf);
        worst = worst.max(wigner(&t, 32).expect("length").max_abs_diff(&tf));
    }
    check("transform round trips", worst < 1e-10, format!("max error {worst:.2e}"))
}

fn cp_identity(rng: &mut ChaCha8Rng) -> Check {
    let pre = CpPrecoder::new(64, 16);
    let s: Vec<C64> = (0..48).map(|_| C64::new(rng.gen(), rng.gen())).collect();
    let t = pre.time_symbol(&s).expect("length");
    let err = max_abs_diff(&t[..16], &t[48..]);
    check("CP precoder prefix", err < 1e-10, format!("max error {err:.2e}"))
}

fn orthogonality(rng: &mut ChaCha8Rng) -> Check {
    let g = small_geometry();
    let l = FrameLayout::hybrid(&g);
    let a: Vec<u8> = (0..l.otfs_symbols(&g) * 4).map(|_| rng.gen_range(0..2)).collect();
    let b: Vec<u8> = (0..l.ofdm_symbols(&g) * 4).map(|_| rng.gen_range(0..2)).collect();
    let f = build_hybrid_frame(&a, &b, &g, &TxConfig::default()).expect("frame");
    let est = detect_ofdm_frame(
        &f.samples,
        &crate::channel::ChannelRealization::identity(&g),
        &g,
        &NoiseModel::new(1e-12).expect("positive"),
    )
    .expect("detect");
    let bits: Vec<u8> = est.iter().flat_map(|e| e.hard_bits(Modulation::Qam16)).collect();
    let otfs = f.otfs_samples(&g);
    let ofdm = f.ofdm_samples(&g);
    let overlap = otfs
        .samples()
        .iter()
        .zip(ofdm.samples())
        .filter(|(a, b)| a.norm_sqr() > 0.0 && b.norm_sqr() > 0.0)
        .count();
    check(
        "hybrid frame separation",
        bits == b && overlap == 0,
        format!("OFDM bits exact: {}, overlapping samples: {overlap}", bits == b),
    )
}

fn channel_oracle(rng: &mut ChaCha8Rng) -> Check {
    let g = small_geometry();
    let profile = DelayProfile::builtin("EPA").expect("shipped profile");
    let mut worst: f64 = 0.0;
    for mode in [EdgeMode::Linear, EdgeMode::FrameCyclic] {
        let ch = sample_realization(&profile, 300.0, &g, rng)
            .expect("channel")
            .with_mode(mode);
        let x: Vec<C64> = (0..g.frame_len()).map(|_| C64::new(rng.gen(), rng.gen())).collect();
        let frame = crate::grid::TimeFrame::new(x.clone());
        let y = apply_channel(&frame, &ch, &g).expect("apply");
        let h = build_ht(&ch, &g).expect("H_t");
        worst = worst.max(max_abs_diff(y.samples(), &h.mul_vec(&x)));
    }
    check(
        "channel matrix equals convolution",
        worst < 1e-9,
        format!("max error {worst:.2e}"),
    )
}

fn ldpc(rng: &mut ChaCha8Rng) -> Check {
    let code = CodeSpec::shipped();
    let msg: Vec<u8> = (0..code.k()).map(|_| rng.gen_range(0..2)).collect();
    let cw = code.encode(&msg);
    let ok = match cw {
        Ok(cw) => {
            let llr: Vec<f64> = cw.iter().map(|&b| if b == 0 { 10.0 } else { -10.0 }).collect();
            let dec = code.decode(&llr, 50);
            code.syndrome_ok(&cw) && dec.is_ok_and(|d| d.converged && d.message(code.k()) == msg)
        }
        Err(_) => false,
    };
    check(
        "LDPC noiseless round trip",
        ok,
        format!("n = {}, k = {}", code.n(), code.k()),
    )
}

fn determinism() -> Check {
    let mut cfg = SimConfig {
        geometry: small_geometry(),
        ..SimConfig::default()
    };
    cfg.channel.profile = "EPA".into();
    cfg.snr_db = vec![10.0];
    cfg.stop.max_frames = 3;
    let run = |w| {
        let c = SimConfig {
            workers: Some(w),
            ..cfg.clone()
        };
        run_sweep(&c).and_then(|r| records_to_string(&r, OutputFormat::Csv))
    };
    match (run(1), run(2)) {
        (Ok(a), Ok(b)) => check("sweep determinism", a == b, "1 vs 2 workers".into()),
        (Err(e), _) | (_, Err(e)) => check("sweep determinism", false, e.to_string()),
    }
}

/// Runs every check with a fixed seed.
pub fn run_selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    vec![
        transforms(&mut rng),
        cp_identity(&mut rng),
        orthogonality(&mut rng),
        channel_oracle(&mut rng),
        ldpc(&mut rng),
        determinism(),
    ]
}
