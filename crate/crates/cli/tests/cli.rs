use std::path::Path;
use std::process::{Command, Output};

use svadi_core::combine::interpolate_at;
use svadi_core::grid::grid_from_level;
use svadi_core::smoothing::smoothed_put;
use svadi_core::{Domain, LevelIndex};

fn svadi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svadi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn printed_price(o: &Output) -> f64 {
    let text = stdout(o);
    let word = text
        .split_whitespace()
        .skip_while(|w| *w != "price")
        .nth(1)
        .unwrap_or_else(|| panic!("no price in {text:?}"));
    word.parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn zero_model_prices_the_smoothed_payoff() {
    let o = svadi(&["solve", "-n", "5", "-s", "model=zero"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let grid = grid_from_level(Domain::standard(1.0), LevelIndex::uniform(5)).unwrap();
    // zero rate: no discounting
    let expected = 100.0 * interpolate_at(&smoothed_put(&grid).unwrap(), 0.0, 1.0);
    assert!(
        (printed_price(&o) - expected).abs() < 1e-6,
        "{} vs {expected}",
        printed_price(&o)
    );
}

#[test]
fn sparse_plan_dump_lists_the_three_components() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.csv");
    let o = svadi(&["sparse", "-n", "6", "--plan", p(&plan)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(plan).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level,sign,M,N,dt,nodes");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("\"(3,3)\",-1,9,9,"));
    assert!(lines[2].starts_with("\"(3,4)\",1,9,17,"));
    assert!(lines[3].starts_with("\"(4,3)\",1,17,9,"));
    assert!(printed_price(&o) > 0.0);
}

#[test]
fn identical_configs_write_identical_surfaces() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = svadi(&["solve", "-n", "4", "--surface", p(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (a, b) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 17 * 17 + 1);
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# coarse run\nlevel = 3\nspot = 90   # in the money\n").unwrap();
    let surface = dir.path().join("s.csv");
    let o = svadi(&["solve", "-c", p(&cfg), "-n", "4", "--surface", p(&surface)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("spot 90"));
    let rows = std::fs::read_to_string(surface).unwrap().lines().count();
    assert_eq!(rows, 17 * 17 + 1);
}

#[test]
fn bad_input_fails_with_one_line() {
    for (args, needle) in [
        (vec!["solve", "-s", "rho=-1.5"], "rho"),
        (vec!["solve", "-s", "khappa=2"], "khappa"),
        (vec!["solve", "-n", "5", "--spot", "1e6"], "spot"),
        (vec!["sparse", "-n", "5"], "minimal admissible level is 6"),
        (vec!["study", "-s", "model=zero"], "zero model"),
    ] {
        let o = svadi(&args);
        assert!(!o.status.success(), "{args:?} succeeded");
        let err = stderr(&o);
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    let o = svadi(&["solve", "-c", "/nonexistent/run.cfg"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("cannot read"));
}

#[test]
fn check_passes() {
    let o = svadi(&["check"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn study_reuses_the_cached_reference() {
    let dir = tempfile::tempdir().unwrap();
    let cache = format!("cache_dir={}", p(&dir.path().join("cache")));
    let common = ["-s", &cache, "-s", "reference_level=7"];
    let run = |extra: &[&str]| {
        let mut args: Vec<&str> = extra.to_vec();
        args.extend_from_slice(&common);
        svadi(&args)
    };
    let o = run(&["reference"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("built"));
    let o = run(&["reference"]);
    assert!(stdout(&o).contains("found"));

    let mut tables = Vec::new();
    for k in 0..2 {
        let conv = dir.path().join(format!("conv{k}.csv"));
        let rt = dir.path().join(format!("rt{k}.csv"));
        let o = run(&[
            "study",
            "-s",
            "full_levels=3..4",
            "-s",
            "sparse_levels=6..7",
            "--convergence",
            p(&conv),
            "--runtime",
            p(&rt),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let runtime = std::fs::read_to_string(rt).unwrap();
        assert_eq!(runtime.lines().next(), Some("method,n,nodes,error,seconds"));
        tables.push(std::fs::read_to_string(conv).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(tables[0].lines().next(), Some("method,n,delta,nodes,error,order"));
    assert_eq!(tables[0].lines().count(), 5);
}
