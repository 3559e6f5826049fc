use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ilal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ilal")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn machine(name: &str) -> String {
    format!("{}/../core/machines/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn reduce_prints_the_next_numeral() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.lal"), "main = succ one ;\n").unwrap();
    for engine in ["term", "net"] {
        let o = ilal(&["reduce", "s.lal", "--engine", engine], dir.path());
        assert!(o.status.success());
        let out = stdout(&o);
        assert!(out.contains("numeral m=2 prefix=0"), "{engine}: {out}");
    }
    let o = ilal(&["reduce", "s.lal", "--engine", "term"], dir.path());
    assert_eq!(stdout(&o).lines().next(), Some("\\x. $(\\y. ~!x (~!x y))"));
}

#[test]
fn net_trace_is_written() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.lal"), "main = mult two !two ;\n").unwrap();
    let o = ilal(&["reduce", "m.lal", "--engine", "net", "--trace", "t.csv"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("ordinal,kind,level,pre_size,post_size"));
    assert!(lines.count() > 4);
    assert!(!ilal(&["reduce", "m.lal", "--trace", "t.csv"], dir.path()).status.success());
}

#[test]
fn polynomial_at_two() {
    let dir = tempfile::tempdir().unwrap();
    for engine in ["term", "net"] {
        let o = ilal(&["poly", "--coeffs", "1,0,1", "--arg", "2", "--engine", engine], dir.path());
        assert!(o.status.success());
        assert_eq!(stdout(&o).trim(), "m=5 prefix=5");
    }
}

#[test]
fn machine_runs_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let app = machine("appender");
    let o = ilal(&["tm", "run", "--machine", &app, "--input", "1", "--verify"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().last(), Some("MATCH"));
    let succ = machine("successor");
    let o = ilal(&["tm", "run", "--machine", &succ, "--input", "1", "--engine", "oracle"], dir.path());
    assert!(stdout(&o).starts_with("output=11 "));
    let o = ilal(
        &["tm", "run", "--machine", &succ, "--input", "1", "--engine", "oracle", "--verify"],
        dir.path(),
    );
    assert!(!o.status.success());
}

#[test]
fn checking_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("ok.lal"), "main = mult two !three ;\nmain : $(forall a. !(a -o a) -o $(a -o a)) ;\n")
        .unwrap();
    fs::write(p.join("bad.lal"), "main = iter two !two $zero ;\n").unwrap();
    assert!(ilal(&["check", "ok.lal"], p).status.success());
    let int = "forall a. !(a -o a) -o $(a -o a)";
    let o = ilal(&["check", "bad.lal", "--type", &format!("$({int})")], p);
    assert!(!o.status.success());
    assert!(!ilal(&["check", "bad.lal"], p).status.success());
}

#[test]
fn net_files_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("t.lal"), "main = two ;\n").unwrap();
    assert!(ilal(&["to-net", "t.lal", "--dump-net", "n.json"], p).status.success());
    let o = ilal(&["readback", "n.json"], p);
    assert_eq!(stdout(&o).trim(), "\\x1. $(\\x2. ~!x1 (~!x1 x2))");
    let o = ilal(&["measure", "t.lal"], p);
    assert!(stdout(&o).starts_with("depth 1"), "{}", stdout(&o));
}

#[test]
fn bench_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let o = ilal(&["bench", "--suite", "arith", "--out", "b.csv", "--jobs", "2"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("workload,round,level,steps_p,steps_s,steps_l,steps_gc,D_start,bound,within_bound")
    );
    let rows: Vec<&str> = lines.collect();
    assert!(rows.iter().all(|r| r.ends_with(",true")));
    assert!(rows.iter().any(|r| r.starts_with("succ^20,")));
}

#[test]
fn confluence_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let run = || stdout(&ilal(&["--seed", "9", "confluence", "--nets", "12"], dir.path()));
    let a = run();
    assert!(a.ends_with("12 nets, 5 orders each, 0 divergent\n"), "{a}");
    assert_eq!(a, run());
}

#[test]
fn failures_are_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("bad.lal"), "main = \\x. ;\n").unwrap();
    for args in
        [&["parse", "bad.lal"][..], &["reduce", "missing.lal"], &["poly", "--coeffs", "1", "--arg", "x"]]
    {
        let o = ilal(args, p);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = ilal(&["parse", "bad.lal"], p);
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}
