mod common;

use common::{golden_path, run_rrl, PANELS};
use rrl::chain::{evolve_states, tau_recursive, ChainConfig};
use rrl::cli::{render_csv, run, Settings, CSV_HEADER};
use rrl::pairing::{asymptotic_pair_rate, spi_success_prob, LinkPhysics, SpiModel};
use rrl::qstate::GateQuality;
use rrl::swap_distill::SwapPolicy;

/// Set `UPDATE_GOLDEN=1` to rewrite the golden files.
#[test]
fn panels_match_golden_files() {
    for (name, args) in PANELS {
        let (code, stdout, stderr) = run_rrl(args);
        assert_eq!(code, 0, "{name}: {stderr}");
        let path = golden_path(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &stdout).unwrap();
        }
        let golden = std::fs::read_to_string(&path).unwrap();
        assert_eq!(stdout, golden, "{name} drifted from {}", path.display());
    }
}

#[test]
fn output_layout() {
    let (code, stdout, _) = run_rrl(PANELS[0].1);
    assert_eq!(code, 0);
    assert!(!stdout.contains('\r'));
    let mut lines = stdout.lines();
    let header = lines.by_ref().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, CSV_HEADER);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 19);
    for row in rows {
        assert_eq!(row.split(',').count(), 12);
    }
    assert!(stdout.contains("# generator=ChaCha8Rng"));
}

#[test]
fn mc_columns_empty_without_trials() {
    let (_, stdout, _) = run_rrl(&["--distance-km", "300"]);
    let row = stdout.lines().last().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[9], "");
    assert_eq!(fields[10], "");
}

#[test]
fn invalid_input_exits_nonzero() {
    let (code, _, stderr) = run_rrl(&["--n-levels", "2", "--k", "1,0"]);
    assert_ne!(code, 0);
    assert!(stderr.contains("length 2"), "{stderr}");
    let (code, _, _) = run_rrl(&["--p-gate", "1.5"]);
    assert_ne!(code, 0);
    let (code, _, _) = run_rrl(&["--sweep", "distance:100:50:10"]);
    assert_ne!(code, 0);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempdir();
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, "# gate sweep base\nn_levels = 2\nk = 2,0,0\np_gate = 0.99\ndistance_km = 600\n").unwrap();
    let cfg_str = cfg.to_str().unwrap();
    let (code, from_file, _) = run_rrl(&["--config", cfg_str]);
    assert_eq!(code, 0);
    assert!(from_file.contains("# p_gate=0.99\n"));
    let (_, overridden, _) = run_rrl(&["--config", cfg_str, "--p-gate", "0.995"]);
    assert!(overridden.contains("# p_gate=0.995\n"));

    std::fs::write(&cfg, "n_levels = 2\n\nk = 2;0;0\n").unwrap();
    let (code, _, stderr) = run_rrl(&["--config", cfg_str]);
    assert_ne!(code, 0);
    assert!(stderr.contains("run.cfg:3:"), "{stderr}");
}

#[test]
fn output_file_written() {
    let dir = tempdir();
    let out = dir.join("rows.csv");
    let (code, stdout, _) = run_rrl(&["-o", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.is_empty());
    assert!(std::fs::read_to_string(out).unwrap().contains(CSV_HEADER));
}

#[test]
fn rows_rederive_from_library() {
    let settings = Settings {
        sweep: Some("distance:200:800:200".into()),
        ..Default::default()
    };
    let spec = settings.into_spec().unwrap();
    let rows = run(&spec).unwrap();
    let csv = render_csv(&spec, &rows);
    let phys = LinkPhysics::new(0.1, 1.0, 22.0, 0.0, 2e5, SpiModel::AtomicEnsemble).unwrap();
    let q = GateQuality::new(0.995).unwrap();
    let cfg = ChainConfig::new(2, vec![2, 0, 0], q, SwapPolicy::Ideal).unwrap();
    let data: Vec<&str> = csv.lines().filter(|l| l.starts_with("async,")).collect();
    assert_eq!(data.len(), 4);
    for line in data {
        let f: Vec<&str> = line.split(',').collect();
        let l: f64 = f[1].parse().unwrap();
        let p0 = asymptotic_pair_rate(spi_success_prob(&phys.with_link_length(l / 4.0)), q).unwrap();
        let evolution = evolve_states(&cfg).unwrap();
        let tau = tau_recursive(&cfg, p0, &evolution.ped_table()).unwrap();
        let tau_csv: f64 = f[6].parse().unwrap();
        let fid_csv: f64 = f[8].parse().unwrap();
        assert!((tau_csv - tau).abs() / tau < 1e-11);
        assert!((fid_csv - evolution.final_state.a()).abs() < 1e-11);
    }
}

fn tempdir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "rrl-cli-{}-{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
