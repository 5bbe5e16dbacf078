use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn trtlbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trtlbm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_defaults() {
    let o = trtlbm(&["check"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("inside M"), "{s}");
    assert!(s.contains("1.315068493150685"), "{s}");
    assert!(s.contains("1.041666666666667"), "{s}");
}

#[test]
fn check_outside() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "relax.preset = \"bgk:3/2\"\n");
    let o = trtlbm(&["check", "--config", &cfg]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("outside M"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", "grid.nn = 3\n");
    let o = trtlbm(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nn"));

    let missing = dir.path().join("nope.toml");
    let o = trtlbm(&["check", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write_config(dir.path(), "bad2.toml", "relax.preset = \"magic:5/2\"\n");
    assert_eq!(trtlbm(&["check", "--config", &bad]).status.code(), Some(2));

    let bad = write_config(dir.path(), "bad3.toml", "scheme.preset = \"d2q5\"\nscheme.eps2 = \"6/25\"\n");
    assert_eq!(trtlbm(&["run", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn blow_up_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "grid.n = 512\nrelax.preset = \"bgk:2\"\nrun.T = \"64\"\n");
    let out = dir.path().join("out");
    let o = trtlbm(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("BLOW-UP"));
    // the partial report is still written
    assert!(out.join("series.csv").exists());
}

#[test]
fn run_outputs_reproduce_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = trtlbm(&["run", "--quick", "--threads", "2", "--out", a.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.toml", "field_initial.csv", "field_final.csv", "series.csv"] {
        assert!(a.join(f).exists(), "{f}");
    }
    let manifest = a.join("manifest.toml");
    let o = trtlbm(&["run", "--config", manifest.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["field_initial.csv", "field_final.csv", "series.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let field = fs::read_to_string(a.join("field_final.csv")).unwrap();
    let mut lines = field.lines();
    assert_eq!(lines.next(), Some("x_1,u"));
    assert_eq!(lines.count(), 64);
}

#[test]
fn region_quick_writes_raster() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = trtlbm(&["region", "--quick", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let pgm = fs::read(out.join("region.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n16 16\n255\n"));
    assert_eq!(pgm.len(), b"P5\n16 16\n255\n".len() + 256);
    let csv = fs::read_to_string(out.join("region.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("omega_s,omega_a,inside"));
    assert_eq!(csv.lines().count(), 257);
}

#[test]
fn convergence_and_scans_quick() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let cfg = write_config(dir.path(), "c.toml", "relax.sweep = [\"magic:96/73\", \"bgk:25/24\"]\ndatum.kind = \"hat\"\n");
    let o = trtlbm(&["convergence", "--quick", "--oracle-refine", "8", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files.iter().filter(|f| f.starts_with("convergence_0")).count(), 2, "{files:?}");
    let summary = fs::read_to_string(out.join("convergence_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);

    let out = dir.path().join("m");
    let o = trtlbm(&["maxprinciple", "--quick", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("maxprinciple.csv")).unwrap();
    assert!(csv.starts_with("omega,omega_s,omega_a,max_u,min_u,violated"));

    let out = dir.path().join("e");
    let cfg = write_config(dir.path(), "e.toml", "datum.variants = [\"double-indicator\"]\n");
    let o = trtlbm(&["eqdist", "--quick", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("eqdist_summary.csv").exists());
}
