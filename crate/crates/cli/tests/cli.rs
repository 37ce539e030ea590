use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cmps");

fn small(mu: f64) -> String {
    format!(
        "[problem]\nlength = 1.0\nmu = {mu:?}\ng = 5.0\n\n[ansatz]\nbond_dim = 2\nsegments = 8\n\n\
         [optimizer]\nmax_iterations = 150\n\n[io]\nsamples = 11\ncuts = \"0.25,0.5\"\n"
    )
}

fn single_particle() -> String {
    format!(
        "[problem]\nlength = 1.0\nmu = {:?}\ng = 1e6\n\n[ansatz]\nbond_dim = 2\nsegments = 64\n",
        (1.5 * PI).powi(2)
    )
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn cmps(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CMPS_OUT_DIR")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout {}\nstderr {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

/// Rows of a CSV file below the two comment lines and the column header.
fn csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# cmps "));
    assert!(lines.next().unwrap().starts_with("# config-sha256 "));
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    (columns, rows)
}

#[test]
fn missing_coupling_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &small(10.0).replace("g = 5.0\n", ""));
    let out = cmps(&["optimize", "--config", s(&config), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`g`"), "{err}");
}

#[test]
fn negative_chemical_potential_empties_the_box() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &small(-1.0));
    ok(&cmps(&["optimize", "--config", s(&config), "--out", s(dir.path())]));
    let n = summary(dir.path())["particle_number"].as_f64().unwrap();
    assert!(n < 0.01, "<N> = {n}");
}

#[test]
fn vacuum_has_no_boundary_energy() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &small(-1.0));
    ok(&cmps(&["casimir", "--config", s(&config), "--out", s(dir.path())]));
    let eb = summary(dir.path())["boundary_energy"].as_f64().unwrap();
    assert!(eb.abs() < 1e-6, "E_B = {eb}");
}

#[test]
fn observe_writes_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &small(30.0));
    ok(&cmps(&["optimize", "--config", s(&config), "--out", s(dir.path())]));
    let checkpoint = dir.path().join("checkpoint.json");
    ok(&cmps(&[
        "observe",
        "--checkpoint",
        s(&checkpoint),
        "--config",
        s(&config),
        "--out",
        s(dir.path()),
    ]));
    let (cols, rows) = csv(&dir.path().join("profile.csv"));
    assert_eq!(
        cols,
        ["x", "density", "kinetic", "potential", "interaction", "orderParameter"]
    );
    assert_eq!(rows.len(), 11);
    let (cols, rows) = csv(&dir.path().join("entanglement.csv"));
    assert_eq!(cols, ["x", "entropy", "lambda_1", "lambda_2"]);
    assert_eq!(rows.len(), 2);
    let (cols, _) = csv(&dir.path().join("trace.csv"));
    assert_eq!(
        cols,
        ["iteration", "energy", "gradNorm", "step", "maxTaylorOrder", "seconds"]
    );
}

#[test]
fn one_particle_cut_in_half_carries_ln_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &single_particle());
    ok(&cmps(&["tg-reference", "--config", s(&config), "--out", s(dir.path())]));
    let checkpoint = dir.path().join("checkpoint.json");
    ok(&cmps(&[
        "observe",
        "--checkpoint",
        s(&checkpoint),
        "--cuts",
        "0.5",
        "--out",
        s(dir.path()),
    ]));
    let (_, rows) = csv(&dir.path().join("entanglement.csv"));
    let row = &rows[0];
    assert_eq!(row[0], 0.5);
    assert!((row[1] - LN_2).abs() < 1e-3, "S = {}", row[1]);
    assert!((row[2] - 0.5).abs() < 1e-3 && (row[3] - 0.5).abs() < 1e-3, "{row:?}");
}

#[test]
fn chebyshev_cuts_follow_the_cosine_layout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &single_particle());
    ok(&cmps(&["tg-reference", "--config", s(&config), "--out", s(dir.path())]));
    let checkpoint = dir.path().join("checkpoint.json");
    ok(&cmps(&[
        "observe",
        "--checkpoint",
        s(&checkpoint),
        "--cuts",
        "chebyshev:300",
        "--out",
        s(dir.path()),
    ]));
    let (_, rows) = csv(&dir.path().join("entanglement.csv"));
    assert_eq!(rows.len(), 299);
    for (i, row) in rows.iter().enumerate() {
        let k = (i + 1) as f64;
        assert_eq!(row[0], (1.0 - (PI * k / 300.0).cos()) / 2.0);
    }
}

#[test]
fn reruns_are_byte_identical_apart_from_wall_time() {
    let root = tempfile::tempdir().unwrap();
    let config = write_config(&root, "c.toml", &small(30.0));
    let run = |name: &str| {
        let out = root.path().join(name);
        ok(&cmps(&["optimize", "--config", s(&config), "--out", s(&out)]));
        let checkpoint = out.join("checkpoint.json");
        ok(&cmps(&[
            "observe",
            "--checkpoint",
            s(&checkpoint),
            "--config",
            s(&config),
            "--out",
            s(&out),
        ]));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for file in ["checkpoint.json", "profile.csv", "entanglement.csv"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let strip = |p: PathBuf| {
        std::fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(a.join("trace.csv")), strip(b.join("trace.csv")));
}

#[test]
fn newer_checkpoint_format_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &single_particle());
    ok(&cmps(&["tg-reference", "--config", s(&config), "--out", s(dir.path())]));
    let path = dir.path().join("checkpoint.json");
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("\"format_version\": 1", "\"format_version\": 99")).unwrap();
    let out = cmps(&["observe", "--checkpoint", s(&path), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("format version 99"));
}

#[test]
fn uniform_checkpoint_feeds_casimir() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &small(30.0));
    let u = dir.path().join("u");
    ok(&cmps(&["uniform", "--config", s(&config), "--out", s(&u)]));
    let e_inf = summary(&u)["energy_density"].as_f64().unwrap();
    let c = dir.path().join("c");
    ok(&cmps(&[
        "casimir",
        "--config",
        s(&config),
        "--checkpoint",
        s(&u.join("uniform.json")),
        "--out",
        s(&c),
    ]));
    let sum = summary(&c);
    assert!((sum["energy_density"].as_f64().unwrap() - e_inf).abs() < 1e-12 * e_inf.abs());
    let eb = sum["boundary_energy"].as_f64().unwrap();
    assert!((eb - (sum["energy"].as_f64().unwrap() - e_inf)).abs() < 1e-12 * e_inf.abs());
    // a uniform checkpoint is not a box state
    let out = cmps(&["observe", "--checkpoint", s(&u.join("uniform.json")), "--out", s(&c)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(&dir, "c.toml", &single_particle());
    let target = dir.path().join("from-env");
    let out = Command::new(BIN)
        .args(["tg-reference", "--config", s(&config)])
        .env("CMPS_OUT_DIR", &target)
        .output()
        .unwrap();
    ok(&out);
    assert!(target.join("checkpoint.json").exists());
}
