use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GOLDEN: &str = "triad=ellipsoid:a1=1,a2=1.618033988749895";

fn ctwork(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctwork"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn summary_value(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line.split(" = ").nth(1).unwrap().trim().parse().unwrap()
}

#[test]
fn triad_info_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    for t in ["triad=r3-standard", GOLDEN] {
        let o = ctwork(d.path(), &["triad-info", "--set", t]);
        assert_eq!(o.status.code(), Some(0), "{t}: {}", String::from_utf8_lossy(&o.stderr));
        let s = fs::read_to_string(d.path().join("triad_info_summary.txt")).unwrap();
        assert!(s.ends_with("status = PASS\n"));
    }
    let o = ctwork(d.path(), &["triad-info", "--set", "triad=bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn invalid_config_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.cfg");
    fs::write(&cfg, "triad = r3-standard\nanalysis.gamma = 0.7\n").unwrap();
    let o = ctwork(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    fs::write(&cfg, "grid.nt = 32\nsolver.colour = red\n").unwrap();
    let o = ctwork(d.path(), &["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    // nothing is computed before validation fails
    assert!(!d.path().join("solve_history.csv").exists());
    let o = ctwork(d.path(), &["orbits", "--set", "triad=r3-standard"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_without_iterations_exits_3_with_one_history_row() {
    let d = tempfile::tempdir().unwrap();
    let o = ctwork(
        d.path(),
        &[
            "solve",
            "--set",
            GOLDEN,
            "--set",
            "boundary.kind=near-orbit",
            "--set",
            "solver.max_iters=0",
        ],
    );
    assert_eq!(o.status.code(), Some(3));
    let h = fs::read_to_string(d.path().join("solve_history.csv")).unwrap();
    assert_eq!(h.lines().count(), 2);
    assert!(h.starts_with("iter,F,grad_norm,res_dbar,res_closed\n0,"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "solve",
        "--set",
        GOLDEN,
        "--set",
        "boundary.kind=near-orbit",
        "--set",
        "boundary.perturb=0.01",
        "--seed",
        "9",
    ];
    for d in [&a, &b] {
        let o = ctwork(d.path(), &args);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["solve_history.csv", "solve_field.txt", "solve_summary.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    // a different seed perturbs differently
    let c = tempfile::tempdir().unwrap();
    let mut other = args;
    other[8] = "10";
    ctwork(c.path(), &other);
    assert_ne!(
        fs::read(a.path().join("solve_history.csv")).unwrap(),
        fs::read(c.path().join("solve_history.csv")).unwrap()
    );
}

#[test]
fn decay_on_trivial_cylinder_file() {
    let d = tempfile::tempdir().unwrap();
    let grid = ["--set", "grid.l=6", "--set", "grid.ntau=97", "--set", "grid.nt=32"];
    let mut args = vec!["solve", "--set", GOLDEN];
    args.extend(grid);
    assert_eq!(ctwork(d.path(), &args).status.code(), Some(0));
    let field = d.path().join("solve_field.txt");
    let input = format!("input={}", field.display());
    let o = ctwork(d.path(), &["decay", "--set", GOLDEN, "--set", &input]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = fs::read_to_string(d.path().join("decay_summary.txt")).unwrap();
    let h = 1.0 / 32.0;
    let t = summary_value(&s, "T_limit");
    // central differences of a circle traversed once: T (1 - (2πh)²/6), so
    // the error is about 20.7 h²
    assert!((t - std::f64::consts::PI).abs() < 25.0 * h * h, "{t}");
    assert!(summary_value(&s, "Q_limit").abs() < 1e-12);
    assert!(s.ends_with("status = PASS\n"));
}

#[test]
fn near_orbit_decay_reports_positive_gap_rate() {
    let d = tempfile::tempdir().unwrap();
    let o = ctwork(
        d.path(),
        &[
            "decay",
            "--set",
            GOLDEN,
            "--set",
            "boundary.kind=near-orbit",
            "--set",
            "grid.l=8",
            "--set",
            "grid.ntau=129",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = fs::read_to_string(d.path().join("decay_summary.txt")).unwrap();
    let rate = summary_value(&s, "delta_fit");
    assert!((rate - 3.883).abs() < 0.1, "{rate}");
    // θ decays at least as fast as ζ
    let theta = summary_value(&s, "theta_rate");
    assert!(theta >= 0.95 * rate, "{theta} vs {rate}");
    assert!(summary_value(&s, "theta_identity_residual") < 1e-2);
    assert!(d.path().join("decay_windows.csv").exists());
    assert!(d.path().join("decay_theta.csv").exists());
    assert!(d.path().join("decay_a.csv").exists());
}

#[test]
fn verify_oracle_passes() {
    let d = tempfile::tempdir().unwrap();
    let o = ctwork(d.path(), &["verify", "--set", "verify.resolutions=32,64,128"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.path().join("verify_identities.csv")).unwrap();
    assert!(csv.starts_with("identity,n32,n64,n128,order,pass\n"));
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn spectrum_of_round_and_golden_orbits() {
    let d = tempfile::tempdir().unwrap();
    let o = ctwork(d.path(), &["spectrum", "--set", GOLDEN, "--set", "spectrum.nt=64"]);
    assert_eq!(o.status.code(), Some(0));
    let s = fs::read_to_string(d.path().join("spectrum_summary.txt")).unwrap();
    assert_eq!(summary_value(&s, "near_kernel"), 0.0);
    let o = ctwork(d.path(), &["spectrum", "--set", "triad=ellipsoid:a1=1,a2=1"]);
    assert_eq!(o.status.code(), Some(0));
    let s = fs::read_to_string(d.path().join("spectrum_summary.txt")).unwrap();
    assert_eq!(summary_value(&s, "near_kernel"), 2.0);
    let o = ctwork(d.path(), &["orbits", "--set", GOLDEN]);
    assert_eq!(o.status.code(), Some(0));
    let s = fs::read_to_string(d.path().join("orbit_summary.txt")).unwrap();
    assert!(s.contains("verdict = nondegenerate"));
}
