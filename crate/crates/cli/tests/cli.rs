use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_hashcount");

const THREE_SOLUTIONS: &str = "p cnf 2 1\n1 2 0\nw 1 0.6\nw 2 0.5\n";
const UNSAT: &str = "p cnf 1 2\n1 0\n-1 0\n";
const SINGLE: &str = "p cnf 3 3\n1 0\n-2 0\n3 0\nw 1 0.7\n";

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], input: &Path) -> Output {
    Command::new(BIN).args(args).arg(input).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
        .trim()
        .parse()
        .unwrap()
}

/// Random 3-CNF with a fixed generator, written as DIMACS.
fn random_cnf(n: u32, m: usize, seed: u64) -> String {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = format!("p cnf {n} {m}\n");
    for _ in 0..m {
        let mut vars = Vec::new();
        while vars.len() < 3 {
            let v = rng.gen_range(1..=n) as i64;
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        for v in vars {
            let lit = if rng.gen() { v } else { -v };
            s.push_str(&format!("{lit} "));
        }
        s.push_str("0\n");
    }
    s
}

#[test]
fn count_three_solution_example() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let o = run(&["count", "--epsilon", "0.8", "--delta", "0.2", "-r", "3", "--seed", "7"], &f);
    assert!(o.status.success());
    let est = field(&stdout(&o), "estimate");
    assert!((0.8 / 1.8..=0.8 * 1.8).contains(&est), "{est}");
    assert_eq!(field(&stdout(&o), "pivot"), 46.0);
    assert_eq!(field(&stdout(&o), "iterations"), 137.0);
}

#[test]
fn count_unsat_is_zero() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "u.cnf", UNSAT);
    let o = run(&["count"], &f);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(field(&stdout(&o), "estimate"), 0.0);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let garbage = write(&dir, "g.cnf", "p cnf 2 1\n1 x 0\n");
    assert_eq!(run(&["count", "--epsilon", "1.5"], &f).status.code(), Some(3));
    assert_eq!(run(&["count", "--delta", "0"], &f).status.code(), Some(3));
    assert_eq!(run(&["sample", "--epsilon", "1.5"], &f).status.code(), Some(3));
    assert_eq!(run(&["sample", "--samples", "0"], &f).status.code(), Some(3));
    assert_eq!(run(&["count", "--bogus-flag"], &f).status.code(), Some(3));
    assert_eq!(run(&["count"], &garbage).status.code(), Some(2));
    assert_eq!(run(&["count"], &dir.path().join("missing.cnf")).status.code(), Some(2));
}

#[test]
fn exact_three_solution_example() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let o = run(&["exact"], &f);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((field(&text, "count") - 0.8).abs() < 1e-12);
    assert!((field(&text, "tilt") - 1.5).abs() < 1e-12);
    assert_eq!(field(&text, "solutions"), 3.0);

    let u = write(&dir, "u.cnf", UNSAT);
    assert_eq!(field(&stdout(&run(&["exact"], &u)), "count"), 0.0);
}

#[test]
fn exact_list_dumps_every_model() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let o = run(&["exact", "--list"], &f);
    let text = stdout(&o);
    let models: Vec<&str> = text.lines().filter(|l| l.starts_with("v ")).collect();
    assert_eq!(models.len(), 3);
    assert!(models.iter().any(|l| l.starts_with("v -1 2 0")));
}

#[test]
fn verify_names_violated_clause() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let good = write(&dir, "good.txt", "v 1 -2 0\nv -1 2 0\n");
    let bad = write(&dir, "bad.txt", "v 1 2 0\nv -1 -2 0\n");
    let o = Command::new(BIN).args(["exact", "--verify"]).arg(&good).arg(&f).output().unwrap();
    assert!(o.status.success());
    let o = Command::new(BIN).args(["exact", "--verify"]).arg(&bad).arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(4));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2") && err.contains("clause 1"), "{err}");
}

#[test]
fn sample_witnesses_verify() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "r.wcnf", &random_cnf(14, 30, 5));
    let o = run(&["sample", "--epsilon", "5", "-r", "3", "--samples", "100", "--seed", "7"], &f);
    assert!(o.status.success());
    let text = stdout(&o);
    let ok = text.lines().filter(|l| l.starts_with("v ")).count();
    // At least 0.62 per draw; 100 draws, 3 sigma below the mean.
    assert!(ok >= 48, "{ok} successes");
    let out = write(&dir, "out.txt", &text);
    let v = Command::new(BIN).args(["exact", "--verify"]).arg(&out).arg(&f).output().unwrap();
    assert!(v.status.success(), "{}", String::from_utf8_lossy(&v.stderr));
}

#[test]
fn sample_single_solution() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "one.wcnf", SINGLE);
    let o = run(&["sample", "--samples", "1", "--seed", "3"], &f);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().next(), Some("v 1 -2 3 0"));
}

#[test]
fn sample_unsat_fails() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "u.cnf", UNSAT);
    let o = run(&["sample", "--samples", "3"], &f);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("no-witness"));
}

#[test]
fn same_seed_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "r.wcnf", &random_cnf(16, 34, 9));
    let gb = Command::new(BIN).args(["genbench", "-r", "3", "--seed", "1"]).arg(&f).output().unwrap();
    let w = write(&dir, "w.wcnf", &stdout(&gb));
    for args in [
        vec!["count", "--seed", "11"],
        vec!["sample", "--samples", "20", "--seed", "11"],
        vec!["pcount", "--seed", "11"],
    ] {
        let a = run(&args, &w);
        let b = run(&args, &w);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        let mut par = args.clone();
        par.extend(["--jobs", "3"]);
        assert_eq!(a.stdout, run(&par, &w).stdout, "{par:?}");
    }
}

#[test]
fn genbench_constants() {
    let dir = TempDir::new().unwrap();
    let base = write(&dir, "b200.cnf", &random_cnf(200, 10, 1));
    let o = Command::new(BIN).args(["genbench", "-r", "3", "--seed", "4"]).arg(&base).output().unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    let w: Vec<f64> = text
        .lines()
        .filter_map(|l| l.strip_prefix("w "))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(w.len(), 15);
    let p = 3f64.powf(1.0 / 15.0) / (1.0 + 3f64.powf(1.0 / 15.0));
    assert!(w.iter().all(|&x| (x - p).abs() < 1e-12 && (x - 0.5183).abs() < 1e-4));

    let o1 = Command::new(BIN).args(["genbench", "-r", "1", "--seed", "4"]).arg(&base).output().unwrap();
    assert!(stdout(&o1).lines().filter_map(|l| l.strip_prefix("w ")).all(|l| l.ends_with(" 0.5")));

    let big = write(&dir, "b2000.cnf", &random_cnf(2000, 10, 1));
    let o = Command::new(BIN).args(["genbench", "--seed", "4"]).arg(&big).output().unwrap();
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("w ")).count(), 20);
}

#[test]
fn genbench_tilt_within_bound() {
    let dir = TempDir::new().unwrap();
    for seed in 0..5u64 {
        let base = write(&dir, "b.cnf", &random_cnf(12, 20, seed));
        for r in ["1", "3", "8"] {
            let o = Command::new(BIN).args(["genbench", "-r", r, "--seed", "2"]).arg(&base).output().unwrap();
            let w = write(&dir, "w.wcnf", &stdout(&o));
            let e = stdout(&run(&["exact"], &w));
            if field(&e, "solutions") > 0.0 {
                assert!(field(&e, "tilt") <= r.parse::<f64>().unwrap() * (1.0 + 1e-9));
            }
        }
    }
}

#[test]
fn pcount_window_count_and_accuracy() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "r.cnf", &random_cnf(12, 24, 3));
    let gb = Command::new(BIN).args(["genbench", "-r", "3", "--seed", "5"]).arg(&f).output().unwrap();
    let w = write(&dir, "w.wcnf", &stdout(&gb));
    let exact = field(&stdout(&run(&["exact"], &w)), "count");

    let o = run(&["pcount", "--low", "2^-10", "--high", "1", "--seed", "2"], &w);
    assert!(o.status.success());
    assert_eq!(field(&stdout(&o), "windows"), 11.0);

    let p = run(&["pcount", "--seed", "2"], &w);
    let c = run(&["count", "--seed", "2"], &w);
    for est in [field(&stdout(&p), "estimate"), field(&stdout(&c), "estimate")] {
        assert!(est >= exact / 1.8 && est <= exact * 1.8, "{est} vs {exact}");
    }
}

#[test]
fn pcount_rejects_black_box() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "plain.cnf", "p cnf 2 1\n1 2 0\n");
    let o = run(&["pcount"], &f);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("white-box"));
}

#[test]
fn support_override_is_used() {
    let dir = TempDir::new().unwrap();
    // x3 <-> x1 makes {1, 2} an independent support.
    let f = write(&dir, "d.cnf", "p cnf 3 3\n1 2 0\n-3 1 0\n3 -1 0\n");
    let s = write(&dir, "s.txt", "c ind 1 2 0\n");
    let o = Command::new(BIN).args(["count", "--support"]).arg(&s).arg(&f).output().unwrap();
    assert!(o.status.success());
    assert!((field(&stdout(&o), "estimate") - 3.0).abs() < 1e-9);
    let bad = write(&dir, "bad.txt", "1 0\n");
    let o = Command::new(BIN).args(["exact", "--support"]).arg(&bad).arg(&f).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_matches_text_and_schema() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "r.cnf", &random_cnf(12, 22, 8));
    let gb = Command::new(BIN).args(["genbench", "--seed", "5"]).arg(&f).output().unwrap();
    let w = write(&dir, "w.wcnf", &stdout(&gb));
    let u = write(&dir, "u.cnf", UNSAT);

    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/output-schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();

    let cases: Vec<(Vec<&str>, &Path)> = vec![
        (vec!["count", "--seed", "3"], &w),
        (vec!["count"], &u),
        (vec!["sample", "--samples", "5", "--seed", "3"], &w),
        (vec!["pcount", "--seed", "3"], &w),
        (vec!["exact", "--list"], &w),
        (vec!["exact"], &u),
    ];
    for (args, input) in cases {
        let text = run(&args, input);
        let mut jargs = args.clone();
        jargs.push("--json");
        let js = run(&jargs, input);
        let obj: Value = serde_json::from_slice(&js.stdout).unwrap();
        let errors: Vec<String> = validator.iter_errors(&obj).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{args:?}: {errors:?}");
        assert_eq!(obj["command"], args[0]);
        let t = stdout(&text);
        let key = match args[0] {
            "count" | "pcount" => "estimate",
            "exact" => "count",
            _ => continue,
        };
        assert_eq!(obj[key].as_f64().unwrap(), field(&t, key), "{args:?}");
    }
}

#[test]
fn timing_flag_adds_wall_time() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.wcnf", THREE_SOLUTIONS);
    let o = run(&["count", "--timing"], &f);
    assert!(stdout(&o).contains("wall_time_s"));
    let o = run(&["count", "--json", "--timing"], &f);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["wall_time_s"].as_f64().unwrap() >= 0.0);
    let o = run(&["count"], &f);
    assert!(!stdout(&o).contains("wall"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("wall time"));
}
