use std::path::PathBuf;
use std::process::{Command, Output};

use sers::io::read_csv;

fn device(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../devices")
        .join(name)
}

fn sers(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sers"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn value(stdout: &[u8], key: &str) -> f64 {
    let text = std::str::from_utf8(stdout).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('=').map(str::trim))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .parse()
        .unwrap()
}

#[test]
fn isat_for_the_mumetal_class() {
    let dev = device("table1.device");
    let out = sers(&["isat", "--device", dev.to_str().unwrap()]);
    assert!(out.status.success());
    let isat = value(&out.stdout, "isat_A");
    assert!((isat - 3.8).abs() <= 0.05 * 3.8, "{isat}");
    assert!((value(&out.stdout, "b_g_sat_T") - 0.7014).abs() < 1e-3);
}

#[test]
fn material_override_and_h_sat_override() {
    let dev = device("table1.device");
    let dev = dev.to_str().unwrap();
    let ns = sers(&["isat", "--device", dev, "--material", "vpermendur"]);
    assert!((value(&ns.stdout, "isat_A") - 44.0).abs() <= 0.05 * 44.0);
    let manual = sers(&["isat", "--device", dev, "--h-sat", "4e4"]);
    assert!((value(&manual.stdout, "isat_A") - 9.1).abs() <= 0.05 * 9.1);
    let missing = sers(&["isat", "--device", dev, "--material", "unobtainium"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error_code=validation"));
}

#[test]
fn dead_magnet_sweep_has_no_offset_field() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("dead.csv");
    let dev = device("dead_magnet.device");
    let out = sers(&[
        "sweep",
        "--device",
        dev.to_str().unwrap(),
        "--from",
        "-5",
        "--to",
        "5",
        "--steps",
        "41",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 41);
    let current = table.column("I_A").unwrap();
    let b = table.column("B_g_T").unwrap();
    let zero = current.iter().position(|&i| i == 0.0).unwrap();
    assert_eq!(b[zero], 0.0);
    for k in 0..current.len() {
        let mirror = current.len() - 1 - k;
        assert!((b[k] - b[mirror]).abs() <= 1e-9 * b[k].abs().max(1e-12));
    }
}

#[test]
fn sweep_csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let dev = device("table1_leakage.device");
    let out = sers(&[
        "sweep",
        "--device",
        dev.to_str().unwrap(),
        "--from",
        "0",
        "--to",
        "8",
        "--steps",
        "200",
        "--out",
        csv.to_str().unwrap(),
        "--order",
        "parallel",
    ]);
    assert!(out.status.success());
    let knee = value(&out.stdout, "knee_A");
    let isat = value(&sers(&["isat", "--device", dev.to_str().unwrap()]).stdout, "isat_A");
    assert!((knee - isat).abs() <= 0.05 * isat, "{knee} vs {isat}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "I_A,F_g_A,B_g_T,kappa_T_per_A,phi_g_Wb,phi_m_Wb,phi_leak_Wb,phi_s1_Wb,phi_s2_Wb"
    );
}

#[test]
fn montecarlo_output_is_byte_identical() {
    let dev = device("table1_leakage.device");
    let args = [
        "montecarlo",
        "--device",
        dev.to_str().unwrap(),
        "--samples",
        "500",
        "--seed",
        "11",
        "--tol",
        "shunt=1,field=area_sol,normal=0.03",
        "--tol",
        "shunt=2,field=length,uniform=0.05",
    ];
    let a = sers(&args);
    let b = sers(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let other = sers(&[&args[..6], &["12"], &args[7..]].concat());
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn check_and_alpha_and_power_run() {
    let dev = device("table1_leakage.device");
    let dev = dev.to_str().unwrap();
    let check = sers(&["check", "--device", dev]);
    assert!(check.status.success());
    assert!(String::from_utf8_lossy(&check.stdout).contains("D2: pass"));

    let alpha = sers(&["alpha", "--device", dev, "--perturb", "shunt=2,field=area_sol,rel=0.1"]);
    assert!(alpha.status.success());
    let a = value(&alpha.stdout, "alpha");
    assert!((a - 1.084e-3).abs() < 1e-5, "{a}");

    let power = sers(&[
        "power",
        "--device",
        dev,
        "--current",
        "2.5",
        "--wire",
        "1.003e-4,0.5e-3,0.015e-3",
    ]);
    assert!(power.status.success());
    assert!((value(&power.stdout, "power_W") - 2.05).abs() < 0.01);
}

#[test]
fn exit_codes() {
    let dev = device("table1.device");
    let dev = dev.to_str().unwrap();
    assert_eq!(
        sers(&["solve", "--device", dev, "--current", "1.5"]).status.code(),
        Some(0)
    );
    assert_eq!(
        sers(&["solve", "--device", dev, "--current", "nan"]).status.code(),
        Some(2)
    );
    assert_eq!(
        sers(&["solve", "--device", "/no/such/file", "--current", "1"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(sers(&["frobnicate"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.device");
    std::fs::write(&bad, "[magnet]\nlength_mm = 4\n").unwrap();
    let out = sers(&["solve", "--device", bad.to_str().unwrap(), "--current", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error_code=parse"), "{err}");
    assert!(err.contains("line 2"), "{err}");
}
