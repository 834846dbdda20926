use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[testbench]
samples_per_segment = 9

[surrogate]
sizes = [8, 16]
bits_list = [6, 8]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_reram-dse"));
    c.env_remove("RERAM_DSE_WORKSPACE").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("{SMALL}\n{extra}")).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Every CSV under `root`, keyed by relative path.
fn csvs(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else if p.extension().is_some_and(|x| x == "csv") {
                out.insert(p.strip_prefix(root).unwrap().to_owned(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let t = TempDir::new().unwrap();
    let cfg = write_config(t.path(), "c.toml", "[device]\ng_lsr = 1e-5\n");
    let o = run(&["--config", s(&cfg), "--workspace", s(t.path()), "report"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_anchors_file_is_a_usage_error() {
    let t = TempDir::new().unwrap();
    let anchors = t.path().join("a.toml");
    fs::write(&anchors, "").unwrap();
    let out = t.path().join("out.toml");
    let o = run(&["calibrate", "--anchors", s(&anchors), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(!out.exists());
}

#[test]
fn conflicting_grid_flags_are_rejected() {
    let o = run(&["explore", "--fix-f", "1e8", "--f-min", "1e7", "--max-power", "1"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn cache_hits_until_physics_change() {
    let t = TempDir::new().unwrap();
    let ws = t.path().join("ws");
    let a = write_config(t.path(), "a.toml", "");
    let first = run(&["--config", s(&a), "--workspace", s(&ws), "characterize", "--sizes", "8"]);
    assert_eq!(code(&first), 0);
    assert!(stdout(&first).contains("computed"));

    let again = run(&["--config", s(&a), "--workspace", s(&ws), "characterize", "--sizes", "8"]);
    assert!(stdout(&again).contains("cached"), "{}", stdout(&again));

    // A subset of the cached resolutions is still a hit.
    let subset = run(&["--config", s(&a), "--workspace", s(&ws), "characterize", "--sizes", "8", "--bits", "6"]);
    assert!(stdout(&subset).contains("cached"));

    let b = write_config(t.path(), "b.toml", "[wire]\nr_seg = 0.9\n");
    let changed = run(&["--config", s(&b), "--workspace", s(&ws), "characterize", "--sizes", "8"]);
    assert!(stdout(&changed).contains("computed"), "{}", stdout(&changed));
}

#[test]
fn stale_characterization_blocks_the_surrogate() {
    let t = TempDir::new().unwrap();
    let ws = t.path().join("ws");
    let a = write_config(t.path(), "a.toml", "");
    assert_eq!(code(&run(&["--config", s(&a), "--workspace", s(&ws), "characterize"])), 0);
    let b = write_config(t.path(), "b.toml", "[wire]\nr_seg = 0.9\n");
    let o = run(&["--config", s(&b), "--workspace", s(&ws), "surrogate"]);
    assert_eq!(code(&o), 6);
    assert!(String::from_utf8_lossy(&o.stderr).contains("N8"));
}

fn pipeline(workers: &str) -> (TempDir, PathBuf) {
    let t = TempDir::new().unwrap();
    let ws = t.path().join("ws");
    let cfg = write_config(t.path(), "c.toml", "");
    let common = ["--config", s(&cfg), "--workspace", s(&ws), "--workers", workers];
    for step in [
        vec!["characterize"],
        vec!["surrogate"],
        vec!["explore", "--max-power", "1e-2", "--f-min", "1e7", "--f-max", "1e8", "--f-step", "1e7"],
    ] {
        let o = bin().args(common).args(&step).output().unwrap();
        assert_eq!(code(&o), 0, "{step:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    (t, ws)
}

#[test]
fn artifacts_are_identical_across_worker_counts() {
    let (_a, one) = pipeline("1");
    let (_b, three) = pipeline("3");
    let a = csvs(&one);
    let b = csvs(&three);
    assert!(a.keys().any(|k| k.starts_with("explore")));
    assert!(a.keys().any(|k| k.starts_with("characterize")));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs", k.display());
    }
}

#[test]
fn single_point_grid_exports_one_by_one_heatmaps() {
    let (t, ws) = pipeline("2");
    let cfg = t.path().join("c.toml");
    let o = run(&[
        "--config", s(&cfg), "--workspace", s(&ws), "explore", "--max-power", "1", "--fix-f", "5e7",
        "--fix-bits", "8", "--n-min", "12", "--n-max", "12",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("optimum N=12"));
    let dir = stdout(&o).lines().find_map(|l| l.strip_prefix("wrote ")).unwrap().to_owned();
    let heat = fs::read_to_string(Path::new(&dir).join("efficiency_n_f_b8.csv")).unwrap();
    let rows: Vec<&str> = heat.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 2));
}

#[test]
fn infeasible_budget_exits_with_infeasible_code() {
    let (t, ws) = pipeline("1");
    let cfg = t.path().join("c.toml");
    let o = run(&["--config", s(&cfg), "--workspace", s(&ws), "explore", "--max-power", "1e-12"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn report_lists_sizes_and_runs() {
    let (t, ws) = pipeline("1");
    let cfg = t.path().join("c.toml");
    let o = run(&["--config", s(&cfg), "--workspace", s(&ws), "report"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("N=8") && text.contains("N=16"), "{text}");
    assert!(text.contains("explore "));
}
