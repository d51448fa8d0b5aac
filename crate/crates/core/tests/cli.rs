use std::path::Path;
use std::process::{Command, Output};

fn simulate(recipe: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .arg(recipe)
        .args(extra)
        .output()
        .expect("spawn simulate")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).collect()
}

#[test]
fn correlation_example_has_six_rows() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(
        dir.path(),
        "r.txt",
        "name = correlation\nq = 1\ns = 2, 16\nkappa_db = -20, 0, 20\nn_pairs = 50\n",
    );
    let out = simulate(&recipe, &["--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 6);
    assert!(csv.contains("\nkappa_db,q,s,avg_corr,corr_stderr,n_pairs,seed\n"));
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        let r: f64 = f[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&r));
        assert!(f[4].parse::<f64>().unwrap() >= 0.0);
    }
}

#[test]
fn default_se_sweep_covers_whole_grid() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(dir.path(), "r.txt", "name = se-sweep\nn_net = 1\nn_ch = 1\n");
    let out_path = dir.path().join("se.csv");
    let out = simulate(&recipe, &["--output", out_path.to_str().unwrap(), "--workers", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    // 11 κ values × 5 splits × 3 combiners
    assert_eq!(data_rows(&csv).len(), 165);
}

#[test]
fn seed_flag_and_override_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(
        dir.path(),
        "r.txt",
        "name = condition-number\nq = 2\nkappa_db = 0\nn_net = 3\nn_ch = 2\nseed = 1\n",
    );
    let a = simulate(&recipe, &[]).stdout;
    let b = simulate(&recipe, &["--seed", "2"]).stdout;
    let c = simulate(&recipe, &["--override", "seed=2"]).stdout;
    assert_ne!(a, b);
    assert_eq!(b, c);
    assert!(String::from_utf8(b).unwrap().contains("# seed = 2\n"));
}

#[test]
fn bad_split_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(dir.path(), "r.txt", "name = se-sweep\nsplits = 3x5\n");
    let out = simulate(&recipe, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(3, 5)"), "{err}");
}

#[test]
fn unknown_key_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(dir.path(), "r.txt", "name = correlation\nn_pair = 10\n");
    let out = simulate(&recipe, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_pair"));
}

#[test]
fn missing_recipe_and_unwritable_output_exit_with_io_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = simulate(&dir.path().join("nope.txt"), &[]);
    assert_eq!(out.status.code(), Some(4));
    let recipe = write(dir.path(), "r.txt", "name = correlation\nq = 1\ns = 2\nkappa_db = 0\nn_pairs = 5\n");
    let out = simulate(&recipe, &["--output", "/nonexistent-dir/out.csv"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn all_zf_singular_exits_with_numerical_status() {
    // more devices than antennas leaves ZF nothing to invert
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(
        dir.path(),
        "r.txt",
        "name = se-sweep\ntotal_antennas = 1\ndevices = 2\nsplits = 1x1\nkappa_db = 0\ncombiners = zf\nn_net = 2\nn_ch = 1\n",
    );
    let out = simulate(&recipe, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn metadata_reparses_to_same_output() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = write(
        dir.path(),
        "r.txt",
        "name = se-sweep\ntotal_antennas = 4\ndevices = 2\nq = 1, 4\nkappa_db = 5\nn_net = 2\nn_ch = 2\nseed = 11\n",
    );
    let first = String::from_utf8(simulate(&recipe, &[]).stdout).unwrap();
    let echoed: String = first
        .lines()
        .skip(1)
        .take_while(|l| l.starts_with('#'))
        .map(|l| format!("{}\n", l.trim_start_matches('#').trim()))
        .collect();
    let again = write(dir.path(), "echo.txt", &echoed);
    let second = String::from_utf8(simulate(&again, &[]).stdout).unwrap();
    assert_eq!(first, second);
}
