use std::path::Path;
use std::process::{Command, Output};

fn bpcent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bpcent"))
        .args(args)
        .current_dir(dir)
        .env_remove("BPCENT_OUTPUT_DIR")
        .output()
        .expect("bpcent runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn equilibrium_golden_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = bpcent(dir.path(), &["equilibrium", "--mu", "2,1", "--output", "-"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# tool: bpcent 0.1.0");
    assert!(lines[1].starts_with("# config_sha256: ") && lines[1].len() == "# config_sha256: ".len() + 64);
    assert_eq!(
        &lines[2..],
        [
            "# master_seed: 0",
            "index,mu,x,pi",
            "1,2,0.666666666667,0.444444444444",
            "2,1,0.333333333333,0.222222222222"
        ]
    );
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["equilibrium", "--mu", "1", "--output", "-"][..],
        &["equilibrium", "--mu", "2,-1"],
        &["simulate", "--mu", "2,1", "--initial", "1,1", "--epsilon", "1.5", "--max-blocks", "10"],
        &["pbs", "--builders", "3", "--dy", "equalrev(cap=100)", "--proposer", "p=point(a=0)"],
        &["pbs", "--builders", "3", "--dy", "nonsense(x=1)", "--proposer", "p=point(a=0)"],
        &["run"],
    ] {
        let o = bpcent(dir.path(), args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let o = bpcent(dir.path(), &["equilibrium", "--mu", "2,1", "--output", "blocker/out.csv"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn default_output_path_and_env_override() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bpcent(dir.path(), &["equilibrium", "--mu", "3,1"]).status.success());
    assert!(dir.path().join("equilibrium.csv").exists());

    let out_dir = dir.path().join("results");
    let o = Command::new(env!("CARGO_BIN_EXE_bpcent"))
        .args(["bounds", "--mu", "2,1", "--initial", "100,100", "--epsilon", "0.5"])
        .current_dir(dir.path())
        .env("BPCENT_OUTPUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = std::fs::read_to_string(out_dir.join("bounds.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    let row = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    let upper = header.split(',').position(|c| c == "upper_blocks").unwrap();
    assert_eq!(row.split(',').nth(upper), Some("1800"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, name: &str| {
        let o = bpcent(
            dir.path(),
            &[
                "simulate", "--mu", "1.5,1", "--initial", "5,5", "--epsilon", "0.3", "--runs", "64", "--max-blocks",
                "2000", "--seed", "77", "--jobs", jobs, "--output", name,
            ],
        );
        assert!(o.status.success());
        std::fs::read(dir.path().join(name)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("4", "b.csv"));

    let pbs = |jobs: &str| {
        stdout(&bpcent(
            dir.path(),
            &[
                "pbs-sweep", "--builders", "2,5", "--dy", "exp(rate=1)", "--proposer", "a=point(a=0)", "--proposer",
                "b=exp(rate=1)", "--trials", "150000", "--jobs", jobs, "--output", "-",
            ],
        ))
    };
    assert_eq!(pbs("1"), pbs("3"));
}

#[test]
fn config_file_drives_run_and_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("eq.cfg"), "# two producers\nkind = equilibrium\nmu = 2, 1\n").unwrap();
    let from_file = stdout(&bpcent(dir.path(), &["run", "--config", "eq.cfg", "--output", "-"]));
    let from_flags = stdout(&bpcent(dir.path(), &["equilibrium", "--mu", "2,1", "--output", "-"]));
    assert_eq!(from_file, from_flags);

    let overridden = stdout(&bpcent(dir.path(), &["equilibrium", "--mu", "5,1", "--config", "eq.cfg", "--output", "-"]));
    assert_eq!(overridden, from_flags);

    let o = bpcent(dir.path(), &["bounds", "--config", "eq.cfg"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_is_recorded_and_changes_results() {
    let dir = tempfile::tempdir().unwrap();
    let sim = |seed: &str| {
        stdout(&bpcent(
            dir.path(),
            &[
                "simulate", "--mu", "1.2,1", "--initial", "1,1", "--epsilon", "0.4", "--runs", "20", "--max-blocks",
                "500", "--seed", seed, "--output", "-",
            ],
        ))
    };
    let (a, b) = (sim("1"), sim("2"));
    assert!(a.contains("# master_seed: 1") && b.contains("# master_seed: 2"));
    assert_ne!(a.lines().skip(4).collect::<Vec<_>>(), b.lines().skip(4).collect::<Vec<_>>());
    assert_eq!(a, sim("1"));
}
