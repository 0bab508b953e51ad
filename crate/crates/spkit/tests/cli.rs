use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn spkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spkit")).args(args).env_remove("SPKIT_MAX_POSET_SIZE").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn graph_json(expr: &str) -> Value {
    let o = spkit(&["dgraph", "-e", expr, "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    serde_json::from_str(&stdout(&o)).unwrap()
}

#[test]
fn membership_in_the_nested_substitution_example() {
    let e = "sub(x, a, istar(x, seq(a, par(x,x))))";
    for via in ["expr", "dgraph", "pmso"] {
        let o = spkit(&["member", "-e", e, "-p", "seq(a,par(a,a))", "--via", via]);
        assert_eq!(o.status.code(), Some(0), "{via}");
        assert_eq!(stdout(&o), "true\n");
        let o = spkit(&["member", "-e", e, "-p", "par(a,a)", "--via", via]);
        assert_eq!((o.status.code(), stdout(&o)), (Some(1), "false\n".to_string()), "{via}");
    }
}

#[test]
fn star_rewrites_to_its_strict_form() {
    let o = spkit(&["gt1", "-e", "star(a)"]);
    assert_eq!(stdout(&o), "or(star1(a), a, eps)\n");
}

#[test]
fn comparable_iteration_variable_is_a_validation_error() {
    let o = spkit(&["member", "-e", "istar(x, seq(a, x, b))", "-p", "a"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("comparable") && stderr(&o).contains("incomparable"), "{}", stderr(&o));
    assert_eq!(spkit(&["parse", "-e", "seq(a,"]).status.code(), Some(2));
    assert_eq!(spkit(&["parse", "-e", "sub(x, star(a), x)"]).status.code(), Some(2));
}

#[test]
fn dot_export_marks_special_edges() {
    let o = spkit(&["dgraph", "-e", "sub(x, a, istar(x, seq(a, par(x,x))))", "--dot"]);
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("style=dashed").count(), 1);
}

#[test]
fn size_cap_comes_from_the_environment() {
    let run = |cap: &str| {
        Command::new(env!("CARGO_BIN_EXE_spkit"))
            .args(["member", "-e", "star(a)", "-p", "seq(a,a,a)", "--via", "pmso"])
            .env("SPKIT_MAX_POSET_SIZE", cap)
            .output()
            .unwrap()
    };
    assert_eq!(run("3").status.code(), Some(0));
    let o = run("2");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("resource bound"), "{}", stderr(&o));
    assert_eq!(run("zero").status.code(), Some(2));
}

#[test]
fn emitted_program_checks_through_its_text() {
    let text = stdout(&spkit(&["pmso", "-e", "par(a, star(b))"]));
    assert!(text.contains("phi_n1(X) :="));
    assert_eq!(spkit(&["pmso", "-f", &text, "-p", "par(a, seq(b, b))"]).status.code(), Some(0));
    assert_eq!(spkit(&["pmso", "-f", &text, "-p", "seq(a, b)"]).status.code(), Some(1));
    assert_eq!(spkit(&["pmso", "-f", "exists x (", "-p", "a"]).status.code(), Some(2));
}

#[test]
fn semilinear_operations_print_literals() {
    let o = spkit(&["semilinear", "power", "sl[2: (1,0); (0,2)]", "2", "1"]);
    assert_eq!(stdout(&o), "sl[2: (0,1); (0,2); (1,0)]\n");
    let o = spkit(&["semilinear", "member", "sl[2: (1,0)+<(1,1)>]", "3,2"]);
    assert_eq!((o.status.code(), stdout(&o)), (Some(0), "true\n".to_string()));
    let o = spkit(&["semilinear", "from-constraints", "x1 + x2 = 2 & x1 >= 1", "--dim", "2"]);
    let lit = stdout(&o);
    let pts = stdout(&spkit(&["semilinear", "points", lit.trim(), "4"]));
    assert_eq!(pts, "(1,1)\n(2,0)\n");
    assert_eq!(spkit(&["semilinear", "member", "sl[2: (1,0)]", "1"]).status.code(), Some(2));
}

#[test]
fn enumeration_lists_language_members() {
    let o = spkit(&["enum", "-n", "3", "-e", "par(a, star(b))"]);
    assert_eq!(stdout(&o), "a\npar(a, b)\npar(a, seq(b, b))\n");
    let via_graph = spkit(&["enum", "-n", "3", "-e", "par(a, star(b))", "--dgraph"]);
    assert_eq!(stdout(&via_graph), stdout(&o));
    let all: Vec<String> = serde_json::from_str(&stdout(&spkit(&["enum", "-n", "2", "--json"]))).unwrap();
    assert_eq!(all.len(), 10);
    assert_eq!(all[0], "eps");
}

#[test]
fn crosscheck_reports_are_byte_identical_across_runs() {
    let dir = scratch("determinism");
    let corpus = dir.join("corpus.txt");
    fs::write(&corpus, "# two lines\nstar(par(a, b))\nistar(x, par(a, seq(b, x)))  # special edges\n").unwrap();
    let run = |name: &str| {
        let out = dir.join(name);
        let o = spkit(&["crosscheck", "-c", corpus.to_str().unwrap(), "-n", "3", "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out).unwrap()
    };
    let first = run("a.json");
    assert_eq!(first, run("b.json"));
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["summary"]["pairs"], 2 * report["summary"]["posets"].as_u64().unwrap());
    assert_eq!(report["first_counterexample"], Value::Null);
}

#[test]
fn empty_corpus_gives_a_trivial_report() {
    let dir = scratch("empty");
    let corpus = dir.join("corpus.txt");
    fs::write(&corpus, "# nothing here\n\n").unwrap();
    let o = spkit(&["crosscheck", "-c", corpus.to_str().unwrap(), "-n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["agree"], true);
    assert_eq!(report["summary"]["pairs"], 0);
    assert_eq!(report["expressions"], json!([]));
}

#[test]
fn corrupted_graph_yields_a_minimal_counterexample() {
    let dir = scratch("corrupted");
    let mut g = graph_json("seq(a, star(b))");
    for node in g["nodes"].as_array_mut().unwrap() {
        if node["label"] == json!({"kind": "letter", "value": "b"}) {
            node["label"]["value"] = json!("a");
        }
    }
    fs::write(dir.join("bad.json"), serde_json::to_string(&g).unwrap()).unwrap();
    fs::write(dir.join("corpus.txt"), "star(a)\nseq(a, star(b)) @ bad.json\n").unwrap();
    let o = spkit(&["crosscheck", "-c", dir.join("corpus.txt").to_str().unwrap(), "-n", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["agree"], false);
    assert_eq!(report["expressions"][0]["agree"], true);
    assert_eq!(report["expressions"][1]["graph_source"], "bad.json");
    let c = &report["first_counterexample"];
    assert_eq!(c["size"], 2);
    // Enumeration order puts seq(a, a) before seq(a, b); both are size 2.
    assert_eq!(c["poset"], "seq(a, a)");
    assert_eq!((c["expr"].clone(), c["dgraph"].clone(), c["pmso"].clone()), (json!(false), json!(true), json!(true)));
    assert!(stderr(&o).contains("first counterexample"));
}

#[test]
fn graph_violating_structural_properties_exits_with_three() {
    let dir = scratch("invariant");
    // A Presburger node pointing at another Presburger node.
    let mut g = graph_json("par(a, b)");
    g["nodes"].as_array_mut().unwrap().push(json!({
        "id": 4,
        "label": {"kind": "pres", "value": {"dim": 1, "components": [{"base": [1], "periods": []}]}}
    }));
    g["out"]["1"][1]["to"] = json!(4);
    g["out"]["4"] = json!([{"to": 3, "special": false}]);
    fs::write(dir.join("pp.json"), serde_json::to_string(&g).unwrap()).unwrap();
    fs::write(dir.join("corpus.txt"), "par(a, b) @ pp.json\n").unwrap();
    let o = spkit(&["crosscheck", "-c", dir.join("corpus.txt").to_str().unwrap(), "-n", "2"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("pp: false"));
}
