use std::path::Path;
use std::process::{Command, Output};

fn uniqrand(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uniqrand"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn malformed_inputs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_json = write(dir.path(), "bad.json", "{\"kind\": \"markov\"");
    let bad_probs = write(
        dir.path(),
        "neg.json",
        r#"{"kind": "explicit", "leaves": [{"trace": [0], "probability": -1}]}"#,
    );
    let bad_tsp = write(dir.path(), "bad.txt", "3\n0 0\n1 x\n2 2\n");
    let short_tsp = write(dir.path(), "short.txt", "4\n0 0\n1 1\n");
    for args in [
        vec!["sample", "--program", &bad_json],
        vec!["sample", "--program", &bad_probs],
        vec!["tsp", "--instance", &bad_tsp],
        vec!["tsp", "--instance", &short_tsp],
    ] {
        let out = uniqrand(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn sample_lists_every_figure3_trace_once() {
    let out = uniqrand(&["sample", "--k", "20", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("index,output,trace,probability,cumulative_mass,duplicate")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    assert!(rows[14].starts_with("exhausted,"));
    let traces: std::collections::BTreeSet<&str> =
        rows[..14].iter().map(|r| r.split(',').nth(2).unwrap()).collect();
    assert_eq!(traces.len(), 14);
}

#[test]
fn tsp_reports_each_method() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "sq.txt", "5\n0 0\n1 0\n1 1\n0 1\n0.5 0.5\n");
    let out = uniqrand(&["tsp", "--instance", &inst, "--k", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let methods: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods[0], "greedy");
    assert!(methods.contains(&"wor"));
    assert!(methods.contains(&"iid"));
}

#[test]
fn bench_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bench.csv");
    let out = uniqrand(&["bench", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("method,length,vocab,k,batches,"));
}
