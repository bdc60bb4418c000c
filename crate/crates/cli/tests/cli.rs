use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn corpus(name: &str) -> PathBuf {
    root().join("corpus").join(format!("{name}.pbo"))
}

fn pbo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbo")).args(args).current_dir(root()).output().expect("spawn pbo")
}

fn pbo_path(args: &[&str], file: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.insert(1, file.to_str().unwrap());
    pbo(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn assert_schema(schema: &str, v: &Value) {
    let path = root().join("docs/schemas").join(schema);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let compiled = jsonschema::JSONSchema::compile(&s).unwrap_or_else(|e| panic!("{schema}: {e}"));
    let msgs: Vec<String> = match compiled.validate(v) {
        Ok(()) => return,
        Err(errs) => errs.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{schema}: {msgs:?}\n{v}");
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pbo-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn check_accepts_a_positive_program() {
    let o = pbo_path(&["check"], &corpus("reduce_example"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o), Value::Array(vec![]));
}

#[test]
fn check_reports_a_linearity_error() {
    let o = pbo_path(&["check"], &corpus("double_use"));
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_schema("diagnostics.schema.json", &v);
    assert_eq!(v[0]["code"], "LinearUsedTwice");
}

#[test]
fn garbage_bytes_are_a_parse_error() {
    let d = scratch("garbage");
    let f = d.join("g.pbo");
    std::fs::write(&f, [0xff, 0xfe, 0x00, 0x41, 0x80]).unwrap();
    let o = pbo_path(&["check"], &f);
    assert_eq!(o.status.code(), Some(2));
    let v = json(&o);
    assert_schema("diagnostics.schema.json", &v);
    assert_eq!(v[0]["code"], "ParseError");
    std::fs::write(&f, "let x = in").unwrap();
    assert_eq!(pbo_path(&["check"], &f).status.code(), Some(2));
    assert_eq!(pbo(&["check", "no/such/file.pbo"]).status.code(), Some(2));
}

#[test]
fn run_reproduces_the_example_value() {
    let o = pbo_path(&["run", "--semantics", "den", "--seed", "1"], &corpus("reduce_example"));
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "ReturnedInt(7)");
    let outs: Vec<String> = (0..10)
        .map(|s| stdout(&pbo_path(&["run", "--seed", &s.to_string()], &corpus("reduce_example"))))
        .collect();
    assert!(outs.iter().all(|o| o.trim() == "ReturnedInt(7)"), "{outs:?}");
}

#[test]
fn run_a_literal() {
    let d = scratch("literal");
    let f = d.join("lit.pbo");
    std::fs::write(&f, "42\n").unwrap();
    for sem in ["mut", "den"] {
        let o = pbo_path(&["run", "--semantics", sem, "--json"], &f);
        let v = json(&o);
        assert_schema("outcome.schema.json", &v);
        assert_eq!(v, serde_json::json!({"kind": "ReturnedInt", "value": 42}));
    }
}

#[test]
fn outcomes_of_diverging_programs_validate() {
    for (name, kind) in [("omega", "BudgetExhausted"), ("blackhole", "BlackHole")] {
        let o = pbo_path(&["run", "--json", "--budget", "500"], &corpus(name));
        let v = json(&o);
        assert_schema("outcome.schema.json", &v);
        assert_eq!(v["kind"], kind);
    }
}

#[test]
fn traces_validate_and_den_has_no_memory() {
    let d = scratch("trace");
    for (sem, schema) in [("mut", "trace-mut.schema.json"), ("den", "trace-den.schema.json")] {
        let t = d.join(format!("{sem}.jsonl"));
        let o = pbo_path(&["run", "--semantics", sem, "--trace", t.to_str().unwrap()], &corpus("borrow_reclaim"));
        assert_eq!(o.status.code(), Some(0));
        let text = std::fs::read_to_string(&t).unwrap();
        let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert!(lines.len() > 10);
        for (i, l) in lines.iter().enumerate() {
            assert_schema(schema, l);
            assert_eq!(l["step_index"], i);
            if sem == "den" {
                assert!(l.get("mem_delta").is_none());
            }
        }
        if sem == "den" {
            assert!(lines.iter().any(|l| l["history_events"].as_array().is_some_and(|h| !h.is_empty())));
        }
    }
}

#[test]
fn confluence_report() {
    let o = pbo_path(&["confluence", "--depth", "20"], &corpus("reduce_example"));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_schema("report.schema.json", &v);
    assert_eq!(v["verdict"], "PASS");
    assert_eq!(v["check"], "confluence");
}

#[test]
fn leak_report_on_the_ill_typed_program() {
    let o = pbo_path(&["leak", "--unsafe", "--schedules", "5"], &corpus("leak"));
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_schema("report.schema.json", &v);
    assert_eq!(v["verdict"], "FAIL");
    let viol = v["violations"].as_array().unwrap();
    assert_eq!(viol.len(), 5);
    assert!(viol.iter().all(|r| r["detail"]["cells"].as_array().unwrap().len() == 1));
    // without --unsafe the checker refuses it
    let o = pbo_path(&["leak"], &corpus("leak"));
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(json(&o)[0]["code"], "Mismatch");
}

#[test]
fn uniq_report() {
    let o = pbo_path(&["uniq", "--schedules", "100"], &corpus("par_disjoint"));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_schema("report.schema.json", &v);
    assert_eq!(v["verdict"], "PASS");
    assert_eq!(v["stats"]["runs"], 200);
}

#[test]
fn graph_output_and_node_cap() {
    let o = pbo_path(&["graph", "--depth", "30"], &corpus("par_disjoint"));
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_schema("graph.schema.json", &v);
    assert!(v["nodes"].as_array().unwrap().len() > 30);
    let capped = Command::new(env!("CARGO_BIN_EXE_pbo"))
        .args(["graph", corpus("par_disjoint").to_str().unwrap(), "--depth", "30"])
        .env("PBO_NODE_CAP", "5")
        .output()
        .unwrap();
    assert_eq!(capped.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&capped.stderr).contains("node cap of 5"));
}

#[test]
fn empty_filter_selects_nothing() {
    let o = pbo(&["corpus", "--filter", "no-such-entry"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "0 entries, 0 failed");
}

#[test]
fn negative_suite_as_json() {
    let o = pbo(&["corpus", "--suite", "negative", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_schema("corpus.schema.json", &v);
    assert_eq!(v.as_array().unwrap().len(), 4);
}

fn copy_corpus(to: &Path) {
    for e in std::fs::read_dir(root().join("corpus")).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, to.join(p.file_name().unwrap())).unwrap();
    }
}

#[test]
fn one_corrupted_expectation_is_one_failure() {
    let d = scratch("corrupt");
    copy_corpus(&d);
    let m = std::fs::read_to_string(d.join("manifest.toml")).unwrap();
    assert!(m.contains("returns = 21\n"));
    std::fs::write(d.join("manifest.toml"), m.replace("returns = 21\n", "returns = 22\n")).unwrap();
    let o = pbo(&["corpus", "--suite", "positive", "--dir", d.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let fails: Vec<&str> = out.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(fails.len(), 1, "{out}");
    assert!(fails[0].contains("borrow_reclaim"));
}

#[test]
fn malformed_manifest_exits_2() {
    let d = scratch("malformed");
    std::fs::write(d.join("manifest.toml"), "[[entry]]\nname = \"x\"\nsuite = \"sideways\"\n").unwrap();
    assert_eq!(pbo(&["corpus", "--dir", d.to_str().unwrap()]).status.code(), Some(2));
}
