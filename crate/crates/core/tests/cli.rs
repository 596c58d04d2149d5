//! End-to-end CLI tests: every subcommand over a small corpus, plus the
//! exit-code contract (0 ok, 1 usage, 2 data error).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dataselect")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "dataselect {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, content: &str) {
    std::fs::write(dir.join(name), content).unwrap();
}

fn small_corpus(dir: &Path) {
    // b translates ambiguously (y or z), a deterministically
    let mut src = String::new();
    let mut tgt = String::new();
    for i in 0..40 {
        src.push_str("a b\n");
        tgt.push_str(if i % 2 == 0 { "x y\n" } else { "x z\n" });
    }
    write(dir, "c.src", &src);
    write(dir, "c.tgt", &tgt);
    write(dir, "mono.txt", &"a b\nb b\na a\nb\na\n".repeat(8));
}

#[test]
fn subcommand_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);

    ok(d, &["align-train", "--src", "c.src", "--tgt", "c.tgt", "--out", "m.bin"]);
    ok(d, &["align", "--params", "m.bin", "--src", "c.src", "--tgt", "c.tgt", "--out", "a.ph"]);
    ok(d, &["dict-build", "--src", "c.src", "--tgt", "c.tgt", "--align", "a.ph",
            "--out", "d.tsv", "--entropy-out", "e.tsv"]);
    ok(d, &["score-uncertainty", "--mono", "c.src", "--entropy", "e.tsv", "--out", "bs.tsv"]);
    ok(d, &["score-uncertainty", "--mono", "mono.txt", "--entropy", "e.tsv", "--out", "ms.tsv"]);
    ok(d, &["umax", "--bitext-scores", "bs.tsv", "--r", "90", "--out", "umax.txt"]);
    ok(d, &["sample", "--scores", "ms.tsv", "--strategy", "uncsamp", "--budget", "10",
            "--bitext-scores", "bs.tsv", "--seed", "3", "--out", "sel.idx",
            "--emit-text", "--mono", "mono.txt", "--text-out", "sel.txt"]);
    ok(d, &["bin", "--scores", "ms.tsv", "--k", "4", "--out", "bins.tsv"]);
    ok(d, &["analyze-bins", "--scores", "ms.tsv", "--k", "4", "--out", "binrep.tsv", "--json"]);
    ok(d, &["lm-train", "--corpus", "c.tgt", "--order", "2", "--out", "lm.bin"]);
    ok(d, &["lm-score", "--model", "lm.bin", "--corpus", "c.tgt", "--out", "lms.tsv"]);
    ok(d, &["pair", "--selected", "sel.txt", "--translations", "sel.txt",
            "--provenance", "test", "--out", "p.tsv"]);
    ok(d, &["filter-synth", "--pairs", "p.tsv", "--out", "pf.tsv", "--report", "dr.json"]);
    ok(d, &["filter-lm", "--pairs", "pf.tsv", "--model", "lm.bin", "--drop", "0.2", "--out", "pl.tsv"]);
    ok(d, &["combine", "--bitext-src", "c.src", "--bitext-tgt", "c.tgt", "--pairs", "pf.tsv",
            "--out-src", "all.src", "--out-tgt", "all.tgt", "--out-tags", "all.tags"]);
    ok(d, &["fmeasure", "--hyp", "c.tgt", "--ref", "c.tgt", "--train-corpus", "c.tgt",
            "--out", "fm.tsv", "--json"]);

    // spot checks on a few artifacts
    let idx = std::fs::read_to_string(d.join("sel.idx")).unwrap();
    assert_eq!(idx.lines().count(), 10);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("sel.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["strategy"], "uncsamp");
    assert_eq!(meta["seed"], 3);
    assert!(meta["u_max"].as_f64().unwrap() > 0.0);
    let tags = std::fs::read_to_string(d.join("all.tags")).unwrap();
    assert_eq!(tags.lines().filter(|l| *l == "B").count(), 40);
    let fm = std::fs::read_to_string(d.join("fm.tsv")).unwrap();
    assert!(fm.contains("1.000000"), "identity F-measure missing: {fm}");
}

#[test]
fn run_subcommand_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);
    write(
        d,
        "cfg.json",
        r#"{"src":"c.src","tgt":"c.tgt","mono":"mono.txt","workdir":"w","budget":5,"seed":1}"#,
    );
    ok(d, &["run", "--config", "cfg.json", "--set", "budget=8", "--set", "workdir=w2"]);
    assert!(!d.join("w").exists());
    let idx = std::fs::read_to_string(d.join("w2/sample.idx")).unwrap();
    assert_eq!(idx.lines().count(), 8, "--set budget override ignored");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("w2/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["budget"], 8);
    assert!(manifest["outputs"]["combined.src"].is_string());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    small_corpus(d);

    // usage errors -> 1
    assert_eq!(run_in(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run_in(d, &["umax"]).status.code(), Some(1));
    let out = run_in(d, &["sample", "--scores", "x", "--strategy", "bogus",
                          "--budget", "1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(1), "unknown strategy should be usage error");

    // data errors -> 2
    assert_eq!(
        run_in(d, &["umax", "--bitext-scores", "missing.tsv"]).status.code(),
        Some(2)
    );
    write(d, "short.tgt", "x\n");
    assert_eq!(
        run_in(d, &["align-train", "--src", "c.src", "--tgt", "short.tgt", "--out", "m"])
            .status
            .code(),
        Some(2),
        "line-count mismatch should be a data error"
    );

    // success -> 0 with --help
    assert_eq!(run_in(d, &["--help"]).status.code(), Some(0));
}
