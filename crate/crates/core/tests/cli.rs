use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn phasefrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phasefrac"))
        .args(args)
        .env("PHASEFRAC_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_flag_is_a_config_error() {
    assert_eq!(code(&phasefrac(&["run", "--no-such-flag"])), 1);
    assert_eq!(code(&phasefrac(&["frobnicate"])), 1);
}

#[test]
fn help_exits_cleanly() {
    let o = phasefrac(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("run"));
}

#[test]
fn run_needs_a_config_or_preset() {
    assert_eq!(code(&phasefrac(&["run"])), 1);
}

#[test]
fn unknown_preset_lists_alternatives() {
    let o = phasefrac(&["run", "--preset", "vertical_notch"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("horizontal_notch"));
}

#[test]
fn misspelled_key_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "preset = \"horizontal_notch\"\n[material]\nlenght_scale = 0.1\n").unwrap();
    let o = phasefrac(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("material.lenght_scale"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_io_error() {
    assert_eq!(code(&phasefrac(&["run", "/nonexistent/case.toml"])), 3);
}

#[test]
fn newton_cap_is_a_convergence_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cap.toml");
    fs::write(&cfg, "preset = \"horizontal_notch:divisions=10\"\n[solver]\nmax_newton_iters = 1\nrel_tol = 1e-14\nabs_tol = 1e-14\n").unwrap();
    let o = phasefrac(&["run", cfg.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let o = phasefrac(&["run", "--preset", "horizontal_notch:divisions=10,t_end=0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

fn run_small(dir: &Path) {
    let o = phasefrac(&[
        "run",
        "--preset",
        "horizontal_notch:divisions=10,t_end=0.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn run_writes_outputs_and_tools_read_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small(&out);
    for f in ["result.json", "probe_center.csv", "convergence.csv", "snapshot_0000.vtk"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("probe_center.csv")).unwrap();
    assert!(csv.starts_with("time [s],p [Pa]\n"));
    assert_eq!(csv.lines().count(), 12);

    let o = phasefrac(&["probe", out.to_str().unwrap(), "--point", "2.5,2.5", "--field", "phi"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("time [s],phi [1]"));

    let m = out.join("metrics.csv");
    let o = phasefrac(&["metrics", out.to_str().unwrap(), "--out", m.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&m).unwrap().contains("extent_+x [m]"));

    let v = out.join("last.vtk");
    let o = phasefrac(&["export", out.to_str().unwrap(), "--out", v.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(fs::read_to_string(&v).unwrap().starts_with("# vtk DataFile Version"));

    let o = phasefrac(&["export", out.to_str().unwrap(), "--snapshot", "99", "--out", v.to_str().unwrap()]);
    assert_ne!(code(&o), 0);
}

#[test]
fn probe_outside_the_mesh_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    run_small(&out);
    let o = phasefrac(&["probe", out.to_str().unwrap(), "--point", "9,9"]);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("outside"), "{}", stderr(&o));
    let o = phasefrac(&["probe", out.to_str().unwrap(), "--point", "1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn repeated_runs_write_identical_probes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_small(&a);
    run_small(&b);
    let read = |d: &Path| fs::read(d.join("probe_center.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
