use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_concept-bench"))
        .args(args)
        .arg("--dir")
        .arg(dir)
        .env("RUST_LOG", "error")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cli(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn generate(dir: &Path) {
    ok(
        dir,
        &["generate", "--dataset", "violence", "--sizes", "100,20,50,30", "--seed", "4"],
    );
}

/// Records after the header line.
fn records(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn generate_writes_splits_and_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    generate(tmp.path());
    assert_eq!(records(&tmp.path().join("data/dataset.jsonl")), 200);
    assert_eq!(records(&tmp.path().join("data/pairs.jsonl")), 90);
    let manifest = std::fs::read(tmp.path().join("data/manifest.json")).unwrap();
    generate(tmp.path());
    assert_eq!(std::fs::read(tmp.path().join("data/manifest.json")).unwrap(), manifest);
}

#[test]
fn evaluate_reports_every_method() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    generate(d);
    ok(d, &["predict", "--model", "oracle"]);
    for m in ["ft_match", "random_match"] {
        ok(d, &["explain", "--method", m]);
    }
    ok(d, &["evaluate", "--methods", "ft_match,random_match"]);
    let local = std::fs::read_to_string(d.join("report/local.csv")).unwrap();
    let methods: Vec<&str> = local
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(methods, ["ft_match", "random_match"]);
}

#[test]
fn true_effects_prints_each_concept() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(tmp.path(), &["true-effects", "--dataset", "cv", "--samples", "2000"]);
    let concepts: Vec<&str> = out.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    // every non-outcome concept
    assert_eq!(concepts.len(), 8, "{out}");
    assert!(concepts.contains(&"education"));
}

#[test]
fn exit_codes_follow_error_class() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();

    let bad = cli(d, &["true-effects", "--dataset", "cv", "--definition", "average"]);
    assert_eq!(bad.status.code(), Some(2));
    let unknown = cli(d, &["generate", "--dataset", "weather", "--sizes", "1,1,1,1"]);
    assert_eq!(unknown.status.code(), Some(2));

    let no_assets = cli(
        d,
        &[
            "generate", "--dataset", "cv", "--sizes", "1,1,1,1", "--renderer", "llm",
            "--llm-url", "http://127.0.0.1:9", "--llm-model", "m",
        ],
    );
    assert_eq!(no_assets.status.code(), Some(3));

    generate(d);
    let data = d.join("data/dataset.jsonl");
    let text = std::fs::read_to_string(&data).unwrap().replacen("violence", "vi0lence", 1);
    std::fs::write(&data, text).unwrap();
    let corrupt = cli(d, &["predict", "--model", "oracle"]);
    assert_eq!(corrupt.status.code(), Some(5), "{}", String::from_utf8_lossy(&corrupt.stderr));
}
