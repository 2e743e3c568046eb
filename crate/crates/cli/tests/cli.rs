use std::path::Path;
use std::process::{Command, Output};

fn dpn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpn"))
        .args(args)
        .output()
        .expect("spawn dpn")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synthetic_run(out: &Path, seeds: &str) -> Output {
    dpn(&[
        "run",
        "--problem",
        "zdt1",
        "--n",
        "3",
        "--source",
        "synthetic",
        "--mu",
        "30",
        "--seed",
        seeds,
        "--output",
        out.to_str().unwrap(),
    ])
}

#[test]
fn list_problems() {
    let o = dpn(&["list-problems"]);
    assert!(o.status.success());
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("zdt1") && s.contains("conv4_2f") && s.contains("cf10"));
}

#[test]
fn config_errors_exit_2() {
    let o = dpn(&["run", "--problem", "zdt9"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("known ids"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "problem = zdt1\nwhatever = 3\n").unwrap();
    let o = dpn(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("whatever"));

    let o = dpn(&["run", "--seed", "1,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dpn(&["run", "--set", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_plotdata_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let o = synthetic_run(&a, "0..3");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(synthetic_run(&b, "0..3").status.success());
    for s in 0..3 {
        for f in ["snapshots.csv", "refset/targets.csv", "x0.csv", "final.csv", "trace.csv", "result.json"] {
            let pa = a.join(format!("seed_{s}")).join(f);
            let pb = b.join(format!("seed_{s}")).join(f);
            assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap(), "{}", pa.display());
        }
    }
    assert!(a.join("summary.json").is_file());

    let seed = a.join("seed_0");
    let o = dpn(&["plotdata", seed.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines = |f: &str| std::fs::read_to_string(seed.join("plot").join(f)).unwrap().lines().count();
    assert_eq!(lines("panel_c.csv"), 31);
    assert_eq!(lines("panel_e.csv"), 8);

    std::fs::remove_file(seed.join("trace.csv")).unwrap();
    let o = dpn(&["plotdata", seed.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("trace.csv"));
}

#[test]
fn compare_needs_enough_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = synthetic_run(dir.path(), "0..2");
    assert!(o.status.success());
    let summary = dir.path().join("summary.json");
    let s = summary.to_str().unwrap();
    let o = dpn(&["compare", s, "--against", s]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn compare_against_itself_is_a_tie() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synthetic_run(dir.path(), "0..5").status.success());
    let s = dir.path().join("summary.json");
    let json = dir.path().join("rows.json");
    let o = dpn(&["compare", s.to_str().unwrap(), "--against", s.to_str().unwrap(), "--json", json.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains('↔'));
    assert!(std::fs::read_to_string(json).unwrap().contains("\"tie\""));
}

#[test]
fn check_derivatives() {
    let o = dpn(&["check-derivatives", "--problem", "dtlz2", "--samples", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
