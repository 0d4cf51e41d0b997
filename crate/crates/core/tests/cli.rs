use std::path::Path;
use std::process::{Command, Output};

fn gsk_gl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsk-gl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn saddle_node_branches_coincide() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[model]\na = 0.16\nb = 0.2\n");
    let out = gsk_gl(&["-c", &cfg, "fixed-points"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# gsk-gl "));
    assert_eq!(lines.next().unwrap(), "a,b,c,d,branch,v_star,w_star");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    let w: Vec<f64> = rows[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!((w[0] - 0.5).abs() < 1e-6 && (w[1] - 0.5).abs() < 1e-6);
}

#[test]
fn critical_command_reports_turing_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsk_gl(&["critical"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    let a_crit: f64 = row[3].parse().unwrap();
    assert!((a_crit - 0.2412).abs() < 5e-4);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in ["unknown = 1", "[grid]\nn = 100", "[model]\na = \"somewhere\""].iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let out = gsk_gl(&["-c", &cfg, "critical"], dir.path());
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(String::from_utf8(out.stderr).unwrap().contains("configuration error"));
    }
    let out = gsk_gl(&["-c", "/nonexistent/cfg.toml", "critical"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failed_checks_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    // with only the linear and cubic regressors the saturation fit misses
    let cfg = write(dir.path(), "c.toml", "[saturation]\nfit_powers = [1, 3]\n");
    let out = gsk_gl(&["-c", &cfg, "amplitude-saturation"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8(out.stderr).unwrap().contains("[FAIL] saturation-beta"));
}

#[test]
fn retry_exhaustion_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[sweep]\na0 = 5.0\nc_gl = 0.01\nmax_retries = 1\nepsilons = [0.1]\n",
    );
    let out = gsk_gl(&["-c", &cfg, "validate-residual-scaling"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("still exceeded after 1 halvings"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 11\n[output]\npath = \"out.csv\"\n");
    let mut files = Vec::new();
    for run in 0..2 {
        let out = gsk_gl(&["-c", &cfg, "validate-residual-scaling"], dir.path());
        assert_eq!(out.status.code(), Some(0));
        let name = format!("run{run}.csv");
        std::fs::rename(dir.path().join("out.csv"), dir.path().join(&name)).unwrap();
        files.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
    let text = String::from_utf8(files.remove(0)).unwrap();
    assert!(text.lines().next().unwrap().contains("wall_time=disabled"));
}

#[test]
fn output_flag_overrides_config_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsk_gl(&["gl-coeffs", "-o", "coeffs.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("coeffs.csv")).unwrap();
    assert!(text.contains("nu0_residual"));
}
