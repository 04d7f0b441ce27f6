use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[crystal]
gamma = 0.1
chi_over_pi = 0.3
eta1 = 0.3
eta2 = 0.3

[homodyne]
eta = 0.85

[run]
samples = 4000
seed = 7

[grid]
start_over_pi = 0.0
stop_over_pi = 1.875
points = 16
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghz-tomo"))
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("GHZ_TOMO_THREADS", t);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_a_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("c.csv");
    let o = run(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.contains("# eta = 0.85\n"));
    assert!(csv.contains("# chi_over_pi = 0.3\n"));
    assert!(csv.contains("# seed = 7\n"));
    assert!(csv.contains("# finished_unix = "));
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[0], "phi,c_est,c_err,c_theory");
    assert_eq!(body.len(), 17);
}

#[test]
fn simulate_output_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let mut files = Vec::new();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "3")] {
        let out = dir.path().join(name);
        let o = run(
            &[
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--no-timestamp",
                "--seed",
                "99",
            ],
            Some(threads),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        files.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0]).contains("# seed = 99\n"));
}

#[test]
fn zero_samples_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--samples", "0"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("N ≥ B ≥ 2 violated"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("seed = 7", "seed = 7\nsed = 8"));
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sed"), "{}", stderr(&o));
}

#[test]
fn missing_output_directory_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("nowhere").join("c.csv");
    let o = run(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(out.to_str().unwrap()), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_reported() {
    let o = run(&["herald-info", "--config", "/definitely/not/here.toml"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/definitely/not/here.toml"));
}

#[test]
fn herald_info_reports_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = run(&["herald-info", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("p1 = 0.73019"), "{text}");
    assert!(text.contains("P_Phi = 1.92502"), "{text}");
    assert!(text.contains("ghz_phase = 0.0000000"), "{text}");

    let cfg = write_config(dir.path(), &CONFIG.replace("eta1 = 0.3", "eta1 = 1.0"));
    let text = stdout(&run(&["herald-info", "--config", cfg.to_str().unwrap()], None));
    assert!(text.contains("p1 = 1.0000000"), "{text}");
}

#[test]
fn theory_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = run(&["theory", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let rows: Vec<Vec<f64>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 16);
    for r in rows {
        assert!((r[1] - r[2]).abs() < 1e-12);
    }
}

#[test]
fn kernel_check_exit_codes() {
    for eta in ["1", "0.6"] {
        let o = run(&["kernel-check", "--eta", eta, "--trials", "1000"], None);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = run(&["kernel-check", "--eta", "0.5"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("(0.5, 1]"));
}

#[test]
fn sample_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("state.txt");
    let o = run(
        &[
            "sample-dump",
            "--config",
            cfg.to_str().unwrap(),
            "--samples",
            "5",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# modes: a_o a_e b_o b_e c_o c_e\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("# sample ")).count(), 5);
    let components = ghz_tomo::fock::parse_ensemble_dump(&text).unwrap();
    assert_eq!(components.len(), 3);
    assert!((components[0].0 - 0.730191).abs() < 1e-6);
}

#[test]
fn bad_thread_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap()], Some("many"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GHZ_TOMO_THREADS"));
}
