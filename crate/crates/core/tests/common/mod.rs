#![allow(dead_code)]

use rrl::qstate::BellCoeffs;

/// Least-squares slope of `ln y` against `x`.
pub fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let logs: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = logs.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&logs).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// 400, 410, ..., 800 km.
pub fn long_haul_grid() -> Vec<f64> {
    (0..=40).map(|i| 400.0 + 10.0 * i as f64).collect()
}

/// Maps four uniform draws onto the probability simplex.
pub fn simplex(raw: [f64; 4]) -> BellCoeffs {
    let w: Vec<f64> = raw.iter().map(|x| -(1.0 - x).ln()).collect();
    let total: f64 = w.iter().sum();
    let mut v = [w[0] / total, w[1] / total, w[2] / total, 0.0];
    v[3] = 1.0 - v[0] - v[1] - v[2];
    BellCoeffs::from_array(v).expect("simplex point")
}

/// Probability of each pair count and the mean Bell-pair count, by walking
/// all `2^m` SPI outcome strings.
pub fn enumerate_pairing(m: u32, p_s: f64, p_m: f64) -> (Vec<f64>, f64) {
    let mut f = vec![0.0; (m / 2 + 1) as usize];
    let mut mean = 0.0;
    for outcome in 0u32..(1u32 << m) {
        let successes = outcome.count_ones();
        let prob = p_s.powi(successes as i32) * (1.0 - p_s).powi((m - successes) as i32);
        let pairs = successes / 2;
        f[pairs as usize] += prob;
        mean += prob * pairs as f64 * p_m;
    }
    (f, mean)
}

/// Reference sweeps, as `rrl run` arguments.
pub const PANELS: [(&str, &[&str]); 5] = [
    (
        "distance_async",
        &[
            "--protocol", "async", "--sweep", "distance:100:1000:50", "--n-levels", "2",
            "--k", "2,0,0", "--p-gate", "0.995", "--mc-trials", "2000", "--seed", "42",
        ],
    ),
    (
        "distance_tpi",
        &[
            "--protocol", "tpi", "--sweep", "distance:100:1000:50", "--n-levels", "2",
            "--k", "2,0,0", "--p-gate", "0.995",
        ],
    ),
    (
        "k_sweep",
        &["--sweep", "k:0:3:1", "--n-levels", "3", "--p-gate", "0.995", "--distance-km", "600"],
    ),
    (
        "level_sweep",
        &["--sweep", "n_levels:1:4:1", "--k", "3", "--p-gate", "0.995", "--distance-km", "600"],
    ),
    (
        "gate_sweep",
        &[
            "--sweep", "p_gate:0.98:1.0:0.005", "--n-levels", "2", "--k", "2,0,0",
            "--distance-km", "600",
        ],
    ),
];

pub fn golden_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
        .join(format!("{name}.csv"))
}

/// Runs the `rrl` binary and returns (exit code, stdout, stderr).
pub fn run_rrl(args: &[&str]) -> (i32, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_rrl"))
        .arg("run")
        .args(args)
        .output()
        .expect("rrl binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).expect("utf-8 stdout"),
        String::from_utf8(out.stderr).expect("utf-8 stderr"),
    )
}
