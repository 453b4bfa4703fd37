use std::path::Path;
use std::process::{Command, Output};

fn ssl(args: &[&str]) -> Output {
    ssl_env(args, &[])
}

fn ssl_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ssl"));
    cmd.args(args).env_remove("SSL_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {out}"))
        .parse()
        .unwrap()
}

fn error_code(o: &Output) -> String {
    let line = stderr(o).lines().find(|l| l.starts_with("ERROR ")).map(String::from);
    let line = line.unwrap_or_else(|| panic!("no error line in {}", stderr(o)));
    line.split_whitespace()
        .find_map(|t| t.strip_prefix("code="))
        .expect("code field")
        .to_string()
}

#[test]
fn sverak_fixture_writes_a_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.f2d");
    let o = ssl(&["fixtures", "sverak", "--grid", "65", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("FIELD2D 65 65 "));
    // node (48, 32) sits at (0.5, 0) on the unit disc grid
    let row: Vec<f64> = lines
        .nth(32 * 65 + 48)
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(&row[..2], &[0.5, 0.0]);
    assert_eq!(row[3], 0.25);
}

#[test]
fn ma_solve_reproduces_the_quadratic() {
    let o = ssl(&["ma", "solve", "--f", "1", "--boundary", "0.5*(x*x+y*y)", "--grid", "65"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "max_residual") <= 1e-8);
}

#[test]
fn unknown_command_exits_two() {
    let o = ssl(&["fly", "--grid", "9"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_code(&o), "usage");
    let o = ssl(&["ma", "dissolve"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn increasing_h_list_exits_three() {
    let o = ssl(&[
        "gamma",
        "scan",
        "--grid",
        "17",
        "--v0",
        "0.5*(x^2+y^2)",
        "--v",
        "0.5*(2*x^2+0.5*y^2)",
        "--h",
        "1e-3,1e-2",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_code(&o), "invalid_h_list");
}

#[test]
fn validation_failures_exit_three() {
    let cases: &[&[&str]] = &[
        &["ma", "solve", "--boundary", "x +* y", "--grid", "9"],
        &["ma", "solve", "--f", "-1", "--boundary", "x", "--grid", "9"],
        &["ma", "solve", "--boundary", "@/nonexistent/b.f2d", "--grid", "9"],
        &[
            "gamma", "scan", "--v0", "0", "--v", "0", "--h", "1e-2", "--alpha", "1.5", "--grid", "9",
        ],
        &[
            "gamma",
            "scan",
            "--v0",
            "0.5*(x^2+y^2)",
            "--v",
            "x^3",
            "--h",
            "1e-2",
            "--grid",
            "17",
        ],
        &[
            "energy",
            "eval",
            "--deformation",
            "/nonexistent/d.def3d",
            "--v0",
            "0",
            "--h",
            "0.1",
        ],
        &["--config", "/nonexistent/run.cfg", "ma", "solve", "--boundary", "x"],
    ];
    for args in cases {
        let o = ssl(args);
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("ERROR code="), "{}", stderr(&o));
    }
    let o = ssl(&[
        "gamma",
        "scan",
        "--v0",
        "0.5*(x^2+y^2)",
        "--v",
        "x^3",
        "--h",
        "1e-2",
        "--grid",
        "17",
    ]);
    assert_eq!(error_code(&o), "constraint_violated");
}

#[test]
fn solver_failure_exits_four() {
    // two Newton steps cannot reach 1e-10 from the Poisson start
    let o = ssl(&[
        "ma",
        "solve",
        "--f",
        "1+x",
        "--boundary",
        "0.5*(x^2+y^2)",
        "--grid",
        "17",
        "--max-iter",
        "1",
        "--tol",
        "1e-14",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(error_code(&o), "no_convergence");
}

#[test]
fn unwritable_output_exits_five() {
    let o = ssl(&["fixtures", "sverak", "--grid", "9", "--out", "/nonexistent/dir/u.f2d"]);
    assert_eq!(o.status.code(), Some(5));
    assert_eq!(error_code(&o), "io");
}

fn scan_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("scan.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# bending of the unit bowl\ngrid = 17\nv0 = 0.5*(x^2 + y^2)\nv = 0.5*(2*x^2 + 0.5*y^2)\n\
             alpha = 0.5\nh = 1e-2, 1e-3\nout = {}\n",
            dir.join("scan.csv").display()
        ),
    )
    .unwrap();
    cfg
}

#[test]
fn gamma_scan_from_config_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scan_config(dir.path());
    let csv = dir.path().join("scan.csv");
    let first = ssl(&["--config", cfg.to_str().unwrap(), "gamma", "scan"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let a = std::fs::read(&csv).unwrap();
    let second = ssl_env(
        &["gamma", "scan", "--config", cfg.to_str().unwrap()],
        &[("SSL_THREADS", "1")],
    );
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(a, std::fs::read(&csv).unwrap());
    assert_eq!(stdout(&first), stdout(&second));

    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("h,ratio_I,ratio_J,target,kh_err,v_h_l2_gap"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|t| t.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], 1e-3);
    assert!((rows[1][2] - 1.0 / 9.0).abs() < 1e-3, "{rows:?}");
}

#[test]
fn command_line_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scan_config(dir.path());
    let o = ssl(&["--config", cfg.to_str().unwrap(), "gamma", "scan", "--h", "5e-3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("h=")).count(), 1);
}

#[test]
fn bad_thread_count_is_rejected() {
    let o = ssl_env(
        &["fixtures", "sverak", "--grid", "9", "--out", "u.f2d"],
        &[("SSL_THREADS", "zero")],
    );
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_code(&o), "invalid_threads");
}

#[test]
fn match_run_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("match.csv");
    let o = ssl(&[
        "match",
        "run",
        "--grid",
        "33",
        "--v0",
        "0.5*(x^2+y^2)",
        "--v",
        "0.5*(2*x^2+0.5*y^2)",
        "--h",
        "0.1,0.05",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("h,newton_iterations,curvature_residual,isometry_residual,isometry_over_h2,"));
}

#[test]
fn convexity_analysis_of_the_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let u = dir.path().join("u.f2d");
    let csv = dir.path().join("labels.csv");
    let env = dir.path().join("env.f2d");
    assert!(
        ssl(&["fixtures", "sverak", "--grid", "33", "--out", u.to_str().unwrap()])
            .status
            .success()
    );
    let src = format!("@{}", u.display());
    let o = ssl(&[
        "convexity",
        "analyze",
        "--grid",
        "33",
        "--domain",
        "disk",
        "--u",
        &src,
        "--out",
        csv.to_str().unwrap(),
        "--envelope-out",
        env.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("verdict=mixed"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("i,j,x,y,label,singular\n"));
    assert!(std::fs::read_to_string(&env).unwrap().starts_with("FIELD2D 33 33 "));
    // the file carries a disc grid, so the square default is refused
    let o = ssl(&["convexity", "analyze", "--grid", "33", "--u", &src]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_code(&o), "grid_mismatch");
}

#[test]
fn negative_values_reach_validation() {
    let o = ssl(&[
        "gamma", "scan", "--mu", "-1", "--v0", "0", "--v", "0", "--h", "0.1", "--grid", "9",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert_eq!(error_code(&o), "invalid_argument");
    let o = ssl(&["ma", "solve", "--boundary", "-x^2", "--grid", "9"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert_eq!(error_code(&o), "not_elliptic");
}

#[test]
fn energy_of_stored_deformations() {
    use ssl_core::fields::{Grid, ScalarField};
    use ssl_core::material::Lame;
    use ssl_core::recovery::{build_recovery, RecoveryInputs};
    use ssl_core::shell_energy::{write_deformation, Deformation3, ShellParams};

    let dir = tempfile::tempdir().unwrap();
    let g = Grid::unit_square(17).unwrap();
    let h = 1e-3;
    let flat = Deformation3::from_fn(&g, 3, |x, y, t| [x, y, h * t]);
    let path = dir.path().join("flat.def3d");
    write_deformation(&mut std::fs::File::create(&path).unwrap(), &flat).unwrap();
    let args = [
        "energy",
        "eval",
        "--deformation",
        path.to_str().unwrap(),
        "--v0",
        "0",
        "--h",
        "1e-3",
    ];
    let o = ssl(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "energy_I").abs() < 1e-24);

    let v0 = ScalarField::from_fn(&g, |x, y| 0.5 * (x * x + y * y));
    let v = ScalarField::from_fn(&g, |x, y| 0.5 * (2.0 * x * x + 0.5 * y * y));
    let p = ShellParams::new(h, 0.5, Lame::default()).unwrap();
    let inp = RecoveryInputs::new(v0, v, p, ScalarField::zeros(&g)).unwrap();
    let rec = build_recovery(&inp, h).unwrap();
    let path = dir.path().join("bent.def3d");
    write_deformation(&mut std::fs::File::create(&path).unwrap(), &rec.vh).unwrap();
    let o = ssl(&[
        "energy",
        "eval",
        "--deformation",
        path.to_str().unwrap(),
        "--v0",
        "0.5*(x^2+y^2)",
        "--v",
        "0.5*(2*x^2+0.5*y^2)",
        "--h",
        "1e-3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((value(&out, "target") - 1.0 / 9.0).abs() < 1e-12);
    assert!((value(&out, "ratio_J") - 1.0 / 9.0).abs() < 1e-3, "{out}");
}
