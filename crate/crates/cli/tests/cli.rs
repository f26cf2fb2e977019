use std::f64::consts::FRAC_PI_4;
use std::process::Command as Process;

use tempent_cli::commands::{self, czz_series};
use tempent_cli::output::{read_csv, Cell, Table};
use tempent_cli::{CliError, Command, RunConfig};
use tempent_core::gaussian::{dense_fock_oracle, pairing_from_values, te_entropy};
use tempent_core::majorana::kappa_values;
use tempent_core::ModelParams;

fn config(command: Command) -> RunConfig {
    RunConfig { command: Some(command), ..Default::default() }
}

fn csv(cfg: &RunConfig, table: &Table) -> String {
    let mut buf = Vec::new();
    table.write_csv(cfg, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn golden(name: &str) -> Vec<Vec<String>> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    read_csv(std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap().records
}

fn float(c: &Cell) -> f64 {
    match c {
        Cell::Float(x) => *x,
        Cell::Int(n) => *n as f64,
        Cell::Text(s) => panic!("text cell {s}"),
    }
}

#[test]
fn config_round_trip() {
    let mut cfg = config(Command::Collapse);
    cfg.anchor = Some(0.31);
    cfg.t_list = Some(vec![10, 20]);
    cfg.h_list = Some(vec![0.02, 0.1]);
    cfg.deltas = vec![0.1 + 0.2, 1.0 / 3.0];
    cfg.out = Some("x.csv".into());
    for c in [RunConfig::default(), cfg] {
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }
    let partial = RunConfig::from_json(r#"{"command": "entropy-curve", "j": 0.5}"#).unwrap();
    assert_eq!(partial.command, Some(Command::EntropyCurve));
    assert_eq!((partial.j, partial.g), (0.5, FRAC_PI_4));
    assert_eq!(partial.t_max(), 150);
}

#[test]
fn validation() {
    let err = RunConfig::from_json(r#"{"command": "kappa", "chii": [4]}"#).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let mut cfg = config(Command::Kappa);
    cfg.j = 1.7;
    let err = commands::run(&cfg).unwrap_err();
    assert!(matches!(err, CliError::Validation(_)));
    assert!(err.to_string().contains("quadrant"), "{err}");
    let mut cfg = config(Command::EntropyCurve);
    cfg.j = std::f64::consts::FRAC_PI_2;
    assert_eq!(commands::run(&cfg).unwrap_err().exit_code(), 2);
    let mut cfg = config(Command::Collapse);
    assert!(cfg.validate().is_err(), "neither anchor nor angle");
    cfg.anchor = Some(0.005);
    assert!(cfg.validate().is_err(), "anchor − δ leaves the quadrant");
    cfg.anchor = Some(0.31);
    cfg.validate().unwrap();
    cfg.deltas = vec![];
    assert!(cfg.validate().is_err());
    let mut cfg = config(Command::Spectrum);
    cfg.h = 0.1;
    assert!(cfg.validate().is_err());
    let mut cfg = config(Command::Czz);
    cfg.ed_sites = 15;
    assert!(cfg.validate().is_err());
    cfg.ed_sites = 9;
    cfg.chi = vec![0];
    assert!(cfg.validate().is_err());
    let mut cfg = config(Command::Mps);
    cfg.t_list = Some(vec![0]);
    assert!(cfg.validate().is_err());
    assert!(RunConfig::default().validate().is_err(), "no command");
}

#[test]
fn kappa_rows() {
    let mut cfg = config(Command::Kappa);
    cfg.j = FRAC_PI_4;
    cfg.g = FRAC_PI_4;
    cfg.t_max = Some(10);
    let t = commands::run(&cfg).unwrap();
    let k = t.floats("kappa");
    assert!((k[0] - 2.0).abs() < 1e-12);
    assert!(k[1..].iter().all(|x| x.abs() < 1e-12));
    let mut cfg = config(Command::Kappa);
    cfg.j = 0.4;
    cfg.g = 0.9;
    let t = commands::run(&cfg).unwrap();
    assert!((t.floats("kappa")[0] - 2.0 * 0.4f64.tan().powi(2)).abs() < 1e-12);
    assert!((t.floats("kappa_ratio")[0] - 1.0).abs() < 1e-15);
    assert_eq!(t.rows.len(), 201);
}

#[test]
fn kappa_matches_golden() {
    let mut cfg = config(Command::Kappa);
    cfg.t_max = Some(40);
    let t = commands::run(&cfg).unwrap();
    let rows = golden("kappa_j0.31_g0.785.csv");
    assert_eq!(rows.len(), t.rows.len());
    for (want, got) in rows.iter().zip(&t.rows) {
        for (w, g) in want.iter().zip(got) {
            let w: f64 = w.parse().unwrap();
            assert!((w - float(g)).abs() < 1e-12, "{w} vs {g}");
        }
    }
}

#[test]
fn spectrum_rows() {
    let mut cfg = config(Command::Spectrum);
    cfg.omega_points = 64;
    cfg.window = 512;
    let t = commands::run(&cfg).unwrap();
    assert_eq!(t.rows.len(), 64);
    assert_eq!(t.columns, vec!["omega", "jr", "ji"]);
    let om = t.floats("omega");
    assert!(om.windows(2).all(|w| w[1] > w[0]));
    assert!((om[63] - std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(t.extra["delta_zero"].as_f64(), Some(0.0));
}

#[test]
fn entropy_curve() {
    let mut cfg = config(Command::EntropyCurve);
    cfg.j = FRAC_PI_4;
    cfg.t_max = Some(30);
    assert!(commands::run(&cfg).unwrap().floats("s").iter().all(|s| s.abs() < 1e-8));

    let mut cfg = config(Command::EntropyCurve);
    cfg.t_list = Some(vec![2, 3]);
    let t = commands::run(&cfg).unwrap();
    let p = ModelParams::new(cfg.j, cfg.g, 0.0).unwrap();
    let fock = dense_fock_oracle(&pairing_from_values(&kappa_values(&p, 1).unwrap(), 2).unwrap()).unwrap();
    assert!((t.floats("s")[0] - fock.block_entropy(4).unwrap()).abs() < 1e-10);
    assert!((t.floats("s")[1] - te_entropy(&p, 3, 0.5).unwrap()).abs() < 1e-14);
}

#[test]
fn entropy_curve_routes_to_mps() {
    let mut cfg = config(Command::EntropyCurve);
    cfg.h = 0.1;
    cfg.t_max = Some(6);
    cfg.chi = vec![16];
    let t = commands::run(&cfg).unwrap();
    assert_eq!(t.columns, vec!["h", "chi", "t", "s", "max_bond", "discarded"]);
    assert_eq!(t.rows.len(), 6);
}

#[test]
fn phase_diagram() {
    let mut cfg = config(Command::PhaseDiagram);
    cfg.grid = 3;
    cfg.t_max = Some(20);
    let t = commands::run(&cfg).unwrap();
    assert_eq!(t.rows.len(), 9);
    let s = t.floats("s");
    let (j, g) = (t.floats("j"), t.floats("g"));
    // the central cell is the self-dual point
    assert!((j[4] - FRAC_PI_4).abs() < 1e-15 && (g[4] - FRAC_PI_4).abs() < 1e-15);
    assert!(s[4].abs() < 1e-8);
    let corner = ModelParams::new(j[0], g[0], 0.0).unwrap();
    assert!((s[0] - te_entropy(&corner, 20, 0.5).unwrap()).abs() < 1e-14);
    assert!(s[0] < s.iter().cloned().fold(0.0, f64::max));
}

#[test]
fn collapse_dataset() {
    let mut cfg = config(Command::Collapse);
    cfg.anchor = Some(0.31);
    cfg.deltas = vec![0.01, 0.02];
    cfg.t_list = Some(vec![20, 10]);
    let data = commands::cmd_collapse(&cfg).unwrap();
    assert_eq!(data.rows.len(), 10);
    assert!(data.rows.windows(2).all(|w| (w[0].delta, w[0].t) < (w[1].delta, w[1].t)));
    assert!(data.consistency() < 1e-12);
    let crit = ModelParams::new(0.31, 0.31, 0.0).unwrap();
    for r in data.rows.iter().filter(|r| r.delta == 0.0) {
        assert_eq!(r.s, te_entropy(&crit, r.t, 0.5).unwrap());
    }
    let table = commands::collapse_table(&data);
    assert!(table.extra["deviation_positive"].as_f64().is_some());

    let mut cfg = config(Command::Collapse);
    cfg.angle = Some(0.0);
    cfg.deltas = vec![0.05];
    cfg.t_list = Some(vec![10]);
    let data = commands::cmd_collapse(&cfg).unwrap();
    assert_eq!(data.deltas(), vec![0.0, 0.05]);
    assert!(data.rows[0].s.abs() < 1e-8, "self-dual point");
}

#[test]
fn czz_sources_agree() {
    let mut cfg = config(Command::Czz);
    cfg.ed_sites = 9;
    cfg.t_max = Some(6);
    cfg.chi = vec![64];
    cfg.h_list = Some(vec![0.0, 0.1]);
    let t = commands::run(&cfg).unwrap();
    for h in [0.0, 0.1] {
        let ed = czz_series(&t, h, "ed");
        let mps = czz_series(&t, h, "mps");
        assert_eq!((ed.len(), mps.len()), (5, 7));
        assert!((ed[0].1 - 1.0).abs() < 1e-14 && (mps[0].1 - 1.0).abs() < 1e-12);
        for (a, b) in ed.iter().zip(&mps) {
            assert!((a.1 - b.1).abs() < 1e-6);
        }
    }
}

#[test]
fn czz_matches_golden() {
    let mut cfg = config(Command::Czz);
    cfg.ed_sites = 9;
    cfg.t_max = Some(4);
    cfg.chi = vec![16];
    let t = commands::run(&cfg).unwrap();
    let want: Vec<f64> = golden("czz_ed_j0.31_g0.785_L9.csv").iter().map(|r| r[2].parse().unwrap()).collect();
    let got: Vec<f64> = czz_series(&t, 0.0, "ed").into_iter().map(|x| x.1).collect();
    assert_eq!(want.len(), got.len());
    for (w, g) in want.iter().zip(&got) {
        assert!((w - g).abs() < 1e-12, "{w} vs {g}");
    }
}

#[test]
fn mps_grid() {
    let mut cfg = config(Command::Mps);
    cfg.j = FRAC_PI_4;
    cfg.t_max = Some(8);
    cfg.chi = vec![4, 8];
    cfg.h_list = Some(vec![0.0, 0.3]);
    let t = commands::run(&cfg).unwrap();
    assert_eq!(t.rows.len(), 2 * 2 * 8);
    assert!(t.floats("s").iter().all(|s| s.abs() < 1e-10));

    let mut cfg = config(Command::Mps);
    cfg.t_list = Some(vec![4, 8]);
    cfg.chi = vec![256];
    let t = commands::run(&cfg).unwrap();
    let p = ModelParams::new(cfg.j, cfg.g, 0.0).unwrap();
    for (tt, s) in t.floats("t").iter().zip(t.floats("s")) {
        assert!((s - te_entropy(&p, *tt as usize, 0.5).unwrap()).abs() < 1e-8);
    }
}

#[test]
fn checkpoint_resume() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Command::Mps);
    cfg.g = 0.5;
    cfg.h = 0.1;
    cfg.t_max = Some(12);
    cfg.chi = vec![8];
    let plain = commands::run(&cfg).unwrap();
    cfg.checkpoint = Some(dir.path().to_path_buf());
    let first = commands::run(&cfg).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
    let resumed = commands::run(&cfg).unwrap();
    assert_eq!(plain.rows, first.rows);
    assert_eq!(first.rows, resumed.rows);
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "temp") {
            std::fs::write(&path, b"TEMP").unwrap();
        }
    }
    assert_eq!(commands::run(&cfg).unwrap_err().exit_code(), 3);
}

#[test]
fn deterministic_output() {
    let mut cfg = config(Command::PhaseDiagram);
    cfg.grid = 4;
    cfg.t_max = Some(12);
    let once = csv(&cfg, &commands::run(&cfg).unwrap());
    let twice = csv(&cfg, &commands::run(&cfg).unwrap());
    assert_eq!(once, twice);
    let mut single = cfg.clone();
    single.workers = 1;
    let mut parsed = read_csv(once.as_bytes()).unwrap();
    let serial = read_csv(csv(&single, &commands::run(&single).unwrap()).as_bytes()).unwrap();
    assert_eq!(parsed.records, serial.records);
    let echoed: RunConfig = serde_json::from_value(parsed.header["config"].take()).unwrap();
    assert_eq!(echoed, cfg);
    assert_eq!(parsed.header["version"], env!("CARGO_PKG_VERSION"));
}

fn tempent() -> Process {
    let mut p = Process::new(env!("CARGO_BIN_EXE_tempent"));
    p.env("OPENBLAS_CORETYPE", "Haswell");
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.csv");
    let status = tempent().args(["kappa", "--t-max", "5", "--out"]).arg(&out).status().unwrap();
    assert!(status.success());
    let parsed = read_csv(std::io::BufReader::new(std::fs::File::open(&out).unwrap())).unwrap();
    assert_eq!(parsed.columns, vec!["tau", "kappa", "kappa_ratio"]);
    assert_eq!(parsed.records.len(), 6);

    let run = tempent().args(["kappa", "--j", "2.0"]).output().unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("quadrant"));

    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, r#"{"command": "entropy-curve", "j": 0.785, "g": 0.785, "t_list": [2, 4]}"#).unwrap();
    let run = tempent().arg("--config").arg(&cfg_path).args(["--t", "3"]).output().unwrap();
    assert!(run.status.success());
    let parsed = read_csv(run.stdout.as_slice()).unwrap();
    assert_eq!(parsed.records, vec![vec!["3".to_string(), parsed.records[0][1].clone()]]);
    assert_eq!(parsed.header["config"]["t_list"], serde_json::json!([3]));

    std::fs::write(&cfg_path, r#"{"command": "kappa", "bogus": 1}"#).unwrap();
    assert_eq!(tempent().arg("--config").arg(&cfg_path).status().unwrap().code(), Some(2));
}
