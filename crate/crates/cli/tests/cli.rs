use std::path::Path;
use std::process::{Command, Output};

fn streamal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streamal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run", "--stream", "stagger", "--budget", "0.1", "--delay", "50", "--strategy", "random",
        "--detector", "none", "--dynamic-budget=false", "--seeds", "0..3", "--out",
    ];
    args.push(out.to_str().unwrap());
    args.extend_from_slice(extra);
    streamal(&args)
}

#[test]
fn run_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    let o = small_run(&out, &["--estimator", "pr,ignore_pending"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["steps.csv", "runs.csv", "summary.csv", "config.toml"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    // 3 seeds x 2 estimators x 4000 steps, plus a header
    let steps = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 6 * 4000 + 1);
    assert!(steps.starts_with("run_id,seed,t,queried,n_delivered,correct,acc_preq,drift,budget,spent"));
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 3);
    assert!(table.contains("stagger|b=0.1|truncnorm=50|random|pr|none|static"));

    let stats = streamal(&["stats", out.to_str().unwrap(), "--by", "estimator"]);
    assert_eq!(stats.status.code(), Some(0));
    assert!(stdout(&stats).contains("Mann-Whitney"));

    // the written config reproduces the run
    let again = dir.path().join("again");
    let cfg = out.join("config.toml");
    let o = streamal(&["run", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(
        std::fs::read(out.join("runs.csv")).unwrap(),
        std::fs::read(again.join("runs.csv")).unwrap()
    );
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("res");
    for extra in [
        &["--budget", "1.5"][..],
        &["--strategy", "greedy"],
        &["--seeds", "5..1"],
        &["--delay-dist", "poisson"],
        &["--no-such-flag"],
    ] {
        let o = small_run(&out, extra);
        assert_eq!(o.status.code(), Some(1), "{extra:?}");
    }
    assert_eq!(streamal(&["run", "--preset", "nope"]).status.code(), Some(1));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "budgets = [0.1]\ncolour = 3\n").unwrap();
    assert_eq!(streamal(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(streamal(&["gen", "--stream", "waves", "--out", "x.csv"]).status.code(), Some(1));
}

#[test]
fn io_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(streamal(&["run", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(streamal(&["stats", dir.path().to_str().unwrap()]).status.code(), Some(2));
    let blocked = dir.path().join("file");
    std::fs::write(&blocked, "").unwrap();
    let o = small_run(&blocked.join("sub"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let csv = dir.path().join("nothere.csv");
    let o = streamal(&["run", "--stream", csv.to_str().unwrap(), "--seeds", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gen_writes_a_stream() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let o = streamal(&["gen", "--stream", "rbf_10_4", "--seed", "3", "--n", "500", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x0,x1,x2,x3,x4,x5,x6,x7,x8,x9,label");
    assert_eq!(lines.count(), 500);

    // a generated stream can be fed back as a CSV stream
    let out = dir.path().join("res");
    let o = streamal(&[
        "run", "--stream", path.to_str().unwrap(), "--seeds", "0", "--detector", "adwin",
        "--dynamic-budget=false", "--no-steps", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.join("steps.csv").exists());
}

#[test]
fn help_exits_0() {
    assert_eq!(streamal(&["--help"]).status.code(), Some(0));
    assert_eq!(streamal(&["run", "--help"]).status.code(), Some(0));
}
