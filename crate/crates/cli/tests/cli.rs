use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::{Command, Output};

fn graph(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", "graphs", name].iter().collect();
    p.to_str().unwrap().to_string()
}

fn qgs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgs")).args(args).output().unwrap()
}

fn qgs_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgs")).args(args).env(key, value).output().unwrap()
}

fn status(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Column `col` of a CSV table on standard output, header skipped.
fn column(o: &Output, col: usize) -> Vec<f64> {
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn neumann_interval_spectrum() {
    let o = qgs(&["spectrum", "--graph", &graph("interval.json"), "--N", "5"]);
    assert_eq!(status(&o), 0, "{}", stderr(&o));
    let values = column(&o, 1);
    assert_eq!(values.len(), 5);
    for (j, v) in values.iter().enumerate() {
        let exact = (j as f64 * PI).powi(2);
        assert!((v - exact).abs() <= 1e-9 * exact.max(1.0), "{v} vs {exact}");
    }
}

#[test]
fn spectrum_below_a_cutoff() {
    let o = qgs(&["spectrum", "--graph", &graph("interval.json"), "--Lambda", "100"]);
    assert_eq!(status(&o), 0);
    assert_eq!(column(&o, 1).len(), 4);
}

#[test]
fn star_mean_gaps_reach_half_sigma() {
    let o = qgs(&["mean-gaps", "--graph", &graph("star2.json"), "--N", "400"]);
    assert_eq!(status(&o), 0, "{}", stderr(&o));
    let means = column(&o, 2);
    assert_eq!(means.len(), 400);
    assert!((means[399] - 0.5).abs() <= 0.02 * 0.5);
    assert!(stderr(&o).starts_with("PASS"));
}

#[test]
fn star_oracle_matches_the_solver() {
    let oracle = qgs(&["star-oracle", "--l", "1", "--sigma", "1", "--N", "50"]);
    let solver = qgs(&["spectrum", "--graph", &graph("star2.json"), "--N", "50"]);
    assert_eq!((status(&oracle), status(&solver)), (0, 0));
    let (a, b) = (column(&oracle, 1), column(&solver, 1));
    assert_eq!(a.len(), 50);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-8 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn sigma_overrides_shadow_the_file() {
    // σ_c = 0 turns the unit 2-star into a Neumann interval of length 2
    let o = qgs(&["spectrum", "--graph", &graph("star2.json"), "--sigma", "c=0", "--N", "4"]);
    for (j, v) in column(&o, 1).iter().enumerate() {
        let exact = (j as f64 * PI / 2.0).powi(2);
        assert!((v - exact).abs() <= 1e-9 * exact.max(1.0));
    }
    // Dirichlet–Neumann interval
    let o = qgs(&["spectrum", "--graph", &graph("interval.json"), "--sigma", "a=dirichlet", "--N", "4"]);
    for (j, v) in column(&o, 1).iter().enumerate() {
        let exact = ((j as f64 + 0.5) * PI).powi(2);
        assert!((v - exact).abs() <= 1e-9 * exact);
    }
    // a bare value applies to every vertex, later entries win
    let o = qgs(&["spectrum", "--graph", &graph("interval.json"), "--sigma", "dirichlet", "--sigma", "b=0", "--N", "1"]);
    assert!((column(&o, 1)[0] - PI * PI / 4.0).abs() < 1e-9);
}

#[test]
fn exit_status_matrix() {
    let star = graph("star2.json");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["circumference", "--graph", &star], 0),
        (vec!["weyl", "--graph", &star, "--Lambda", "40000"], 0),
        (vec!["fh-check", "--graph", &star, "--N", "2"], 0),
        (vec!["mean-gaps", "--graph", &star, "--N", "20", "--tol", "1e-9"], 2),
        (vec!["dominate", "--graph", &star, "--sigma", "c=-0.5", "--point", "vertex:c", "--t", "0.01"], 2),
        (vec!["spectrum", "--graph", "missing.json", "--N", "3"], 1),
        (vec!["spectrum", "--graph", &star, "--N", "0"], 1),
        (vec!["spectrum", "--graph", &star], 1),
        (vec!["spectrum", "--graph", &star, "--N", "3", "--sigma", "nowhere=1"], 1),
        (vec!["spectrum", "--graph", &star, "--N", "3", "--sigma", "c=abc"], 1),
        (vec!["heat", "--graph", &star, "--point", "edge:e1:5", "--t", "0.1"], 1),
        (vec!["heat", "--graph", &star, "--point", "somewhere", "--t", "0.1"], 1),
        (vec!["star-oracle", "--l", "1", "--sigma", "-1", "--N", "5"], 1),
        (vec!["mean-gaps", "--graph", &star, "--N", "5", "--tol", "-1"], 1),
    ];
    for (args, expected) in cases {
        let o = qgs(&args);
        assert_eq!(status(&o), expected, "{args:?}: {}", stderr(&o));
        if expected == 1 {
            assert!(stderr(&o).contains("error"), "{args:?}");
        }
    }
}

#[test]
fn malformed_graph_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"vertices": [{"id": "a"}], "edges": [{"id": "e", "from": "a", "to": "b", "length": 1}]}"#)
        .unwrap();
    let o = qgs(&["spectrum", "--graph", path.to_str().unwrap(), "--N", "3"]);
    assert_eq!(status(&o), 1);
    assert!(stderr(&o).contains("unknown vertex `b`"), "{}", stderr(&o));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str, format: &str| -> Vec<String> {
        [
            "local-weyl",
            "--graph",
            &graph("figure_eight.json"),
            "--N",
            "120",
            "--point",
            "random:3",
            "--point",
            "vertex:v",
            "--seed",
            "11",
            "--format",
            format,
            "--out",
            out,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect()
    };
    for format in ["csv", "json"] {
        let files: Vec<PathBuf> = (0..3).map(|i| dir.path().join(format!("run{i}.{format}"))).collect();
        for (i, f) in files.iter().enumerate() {
            let a = args(f.to_str().unwrap(), format);
            let a: Vec<&str> = a.iter().map(String::as_str).collect();
            // vary the worker count; results must not depend on it
            let o = qgs_env(&a, "QGS_THREADS", ["1", "3", "8"][i]);
            assert_eq!(status(&o), 0, "{}", stderr(&o));
            assert!(o.stdout.is_empty());
        }
        let first = std::fs::read(&files[0]).unwrap();
        assert!(!first.is_empty());
        for f in &files[1..] {
            assert_eq!(std::fs::read(f).unwrap(), first, "{format}");
        }
    }
}

#[test]
fn seeds_select_different_points() {
    let run = |seed: &str| {
        stdout(&qgs(&["heat", "--graph", &graph("loop.json"), "--point", "random", "--t", "0.5", "--seed", seed]))
    };
    assert_eq!(run("1"), run("1"));
    assert_ne!(run("1"), run("2"));
}

#[test]
fn invalid_thread_cap_is_rejected() {
    let o = qgs_env(&["circumference", "--graph", &graph("star2.json")], "QGS_THREADS", "0");
    assert_eq!(status(&o), 1);
    assert!(stderr(&o).contains("QGS_THREADS"));
}

#[test]
fn json_documents_parse() {
    let o = qgs(&["supnorm", "--graph", &graph("dirichlet_star.json"), "--N", "40", "--format", "json"]);
    assert_eq!(status(&o), 0, "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["scan"]["sup_norms"].as_array().unwrap().len(), 40);
    assert_eq!(doc["scan"]["verdict"], "Pass");
}

#[test]
fn heat_matches_the_short_time_asymptote() {
    let o = qgs(&["heat", "--graph", &graph("interval.json"), "--point", "edge:e:0.5", "--point", "vertex:a", "--t", "1e-3"]);
    assert_eq!(status(&o), 0);
    let (values, asymptotes) = (column(&o, 2), column(&o, 3));
    for (v, a) in values.iter().zip(&asymptotes) {
        assert!((v / a - 1.0).abs() < 0.05);
    }
    assert!((asymptotes[1] / asymptotes[0] - 2.0).abs() < 1e-12);
}

#[test]
fn cesaro_and_circumference_on_a_dirichlet_graph() {
    let o = qgs(&["cesaro", "--graph", &graph("dirichlet_star.json"), "--N", "100", "--point", "vertex:p1"]);
    assert_eq!(status(&o), 0, "{}", stderr(&o));
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    // every eigenfunction vanishes at the Dirichlet vertex
    assert!(rows.iter().filter(|r| &r[0] == "vertex:p1").all(|r| r[2].parse::<f64>().unwrap() == 0.0));
    let o = qgs(&["circumference", "--graph", &graph("dirichlet_star.json")]);
    assert_eq!(status(&o), 0);
    assert!(stdout(&o).contains("circumference,2.5"));
}
