use std::path::Path;
use std::process::{Command, Output};

const KEY: &str = "000102030405060708090a0b0c0d0e0f";

fn aescpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aescpa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn simulate(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--key", KEY, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = aescpa(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn noiseless(out: &Path, n: &str) {
    simulate(
        out,
        &["--plaintexts", n, "--noise-sigma", "0", "--embed-key"],
    );
}

#[test]
fn simulate_writes_requested_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    let o = simulate(
        &path,
        &["--plaintexts", "600", "--repeats", "10", "--seed", "7"],
    );
    assert!(stdout(&o).contains(KEY));
    let info = stdout(&aescpa(&["inspect", "--in", path.to_str().unwrap()]));
    assert!(info.contains("records:           600"), "{info}");
    assert!(info.contains("samples per trace: 2500"), "{info}");
    assert!(info.contains("ground truth key:  absent"), "{info}");
}

#[test]
fn zero_plaintexts_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    let o = aescpa(&[
        "simulate",
        "--key",
        KEY,
        "--plaintexts",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!path.exists());
}

#[test]
fn malformed_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    for key in ["zz", "0001"] {
        let o = aescpa(&[
            "simulate",
            "--key",
            key,
            "--plaintexts",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(2));
    }
}

#[test]
fn simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.trc"), dir.path().join("b.trc"));
    let flags = [
        "--plaintexts",
        "50",
        "--seed",
        "3",
        "--jitter-max",
        "2",
        "--drop-prob",
        "0.2",
    ];
    simulate(&a, &flags);
    simulate(&b, &flags);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (r1, r2) = (dir.path().join("r1.trc"), dir.path().join("r2.trc"));
    for p in [&r1, &r2] {
        let o = aescpa(&[
            "simulate",
            "--key",
            "random",
            "--plaintexts",
            "5",
            "--seed",
            "9",
            "--out",
            p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&r1).unwrap(), std::fs::read(&r2).unwrap());
}

#[test]
fn attack_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("n.trc");
    noiseless(&path, "300");
    let p = path.to_str().unwrap();

    let o = aescpa(&["attack", "--in", p, "--model", "sbox-hw"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("exact rank-1 bytes:           16/16"));

    let xor = |p: &str| {
        let o = aescpa(&["attack", "--in", p, "--model", "xor-hw", "--json"]);
        let json: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(json["success"]["up_to_complement"], 16);
        assert_eq!(json["bytes"][0]["top"].as_array().unwrap().len(), 10);
        (json["success"]["exact"].as_u64().unwrap(), o.status.code())
    };
    // complements tie and the smaller byte wins: every key byte here is below 0x80
    assert_eq!(xor(p), (16, Some(0)));

    let high = dir.path().join("high.trc");
    let o = aescpa(&[
        "simulate",
        "--key",
        "f0f1f2f3f4f5f6f7f8f9fafbfcfdfeff",
        "--plaintexts",
        "300",
        "--noise-sigma",
        "0",
        "--embed-key",
        "--out",
        high.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(xor(high.to_str().unwrap()), (0, Some(1)));
    let o = aescpa(&[
        "attack",
        "--in",
        high.to_str().unwrap(),
        "--model",
        "sbox-hw",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn attack_without_ground_truth_has_no_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    simulate(&path, &["--plaintexts", "40"]);
    let o = aescpa(&["attack", "--in", path.to_str().unwrap(), "--top", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no verdict"));
}

#[test]
fn attack_with_realignment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("j.trc");
    simulate(
        &path,
        &[
            "--plaintexts",
            "300",
            "--noise-sigma",
            "0",
            "--jitter-max",
            "3",
            "--embed-key",
        ],
    );
    let o = aescpa(&["attack", "--in", path.to_str().unwrap(), "--realign", "6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn missing_file_is_an_error() {
    let o = aescpa(&["attack", "--in", "/nonexistent/traces.trc"]);
    let code = o.status.code().unwrap();
    assert!(code != 0 && code != 1, "exit {code}");
}

#[test]
fn evolve_clips_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    simulate(
        &path,
        &["--plaintexts", "400", "--embed-key", "--repeats", "1"],
    );
    let out = dir.path().join("e.csv");
    let run = || {
        aescpa(&[
            "evolve",
            "--in",
            path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let o = run();
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("clipped"));
    let first = std::fs::read_to_string(&out).unwrap();
    assert_eq!(first.lines().count(), 1 + 16 * 5 * 256);
    let counts: std::collections::BTreeSet<&str> = first
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(
        counts.into_iter().collect::<Vec<_>>(),
        ["100", "200", "300", "400", "50"]
    );
    run();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), first);

    let json = dir.path().join("e.json");
    let o = aescpa(&[
        "evolve",
        "--in",
        path.to_str().unwrap(),
        "--out",
        json.to_str().unwrap(),
        "--format",
        "json",
        "--checkpoints",
        "10,20",
    ]);
    assert!(o.status.success());
    let rows: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 16 * 2 * 256);
}

#[test]
fn inspect_flat_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flat.trc");
    simulate(
        &path,
        &[
            "--plaintexts",
            "20",
            "--noise-sigma",
            "0",
            "--leak-coeff",
            "0",
            "--embed-key",
        ],
    );
    let info = stdout(&aescpa(&["inspect", "--in", path.to_str().unwrap()]));
    assert!(
        info.contains("mean per-sample std across traces: 0.000000"),
        "{info}"
    );
    assert!(
        info.contains(&format!("ground truth key:  {KEY}")),
        "{info}"
    );
}

#[test]
fn inspect_truncated_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    simulate(&path, &["--plaintexts", "10"]);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 100]).unwrap();
    let o = aescpa(&["inspect", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("record 9 of 10"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.trc");
    noiseless(&path, "64");
    let p = path.to_str().unwrap();
    let one = aescpa(&["--threads", "1", "attack", "--in", p, "--json"]);
    let many = aescpa(&["--threads", "3", "attack", "--in", p, "--json"]);
    assert_eq!(one.stdout, many.stdout);
}
