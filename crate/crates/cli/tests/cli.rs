use std::path::Path;
use std::process::{Command, Output};

fn quasipot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasipot"))
        .args(args)
        .arg("--quiet")
        .env_remove("QUASIPOT_OUT")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let o = quasipot(args);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn json(p: impl AsRef<Path>) -> serde_json::Value {
    serde_json::from_str(&read(p)).unwrap()
}

fn bifurcation_betas(dir: &Path) -> Vec<f64> {
    read(dir.join("bifurcations.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn two_node_bifurcation_table() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("eq");
    ok(&["equilibria", "--out", out.to_str().unwrap()]);
    let betas = bifurcation_betas(&out);
    for (b, e) in betas.iter().zip([0.01, 0.18, 0.2025, 0.3025]) {
        assert!((b - e).abs() < 1e-4, "{betas:?}");
    }
    assert_eq!(betas.len(), 4);
    assert!(read(out.join("branches.csv")).starts_with("label,beta,x1,x2,stability"));
    let m = json(out.join("manifest.json"));
    assert_eq!(m["command"], "equilibria");
    assert_eq!(m["schema_version"], 1);
}

#[test]
fn slice_table_and_single_coupling_listing() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("slice");
    ok(&[
        "equilibria",
        "--preset",
        "three-node-slice-q",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(bifurcation_betas(&out)
        .iter()
        .any(|b| (b - 0.06).abs() < 5e-3));

    let one = t.path().join("one");
    ok(&[
        "equilibria",
        "--beta-range",
        "0,0",
        "--out",
        one.to_str().unwrap(),
    ]);
    assert!(!one.join("bifurcations.csv").exists());
    assert_eq!(read(one.join("equilibria.csv")).lines().count(), 1 + 9);
}

#[test]
fn quasipotential_run_writes_field_contours_and_gates() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("qp");
    ok(&[
        "qp",
        "--beta",
        "0.1",
        "--grid",
        "128",
        "--window=-0.45,0.35",
        "--out",
        out.to_str().unwrap(),
    ]);
    let r = json(out.join("gates.json"));
    assert_eq!(r["gate"], "QS");
    assert_eq!(r["schema_version"], 1);
    let bytes = std::fs::read(out.join("field.qpf")).unwrap();
    assert_eq!(&bytes[..4], b"QPF1");
    assert!(read(out.join("contours.csv")).lines().count() > 10);

    let c = t.path().join("contours");
    ok(&[
        "contours",
        "--field",
        out.join("field.qpf").to_str().unwrap(),
        "--levels",
        "0.001,0.002",
        "--out",
        c.to_str().unwrap(),
    ]);
    let rows = read(c.join("contours.csv"));
    assert!(rows
        .lines()
        .skip(1)
        .all(|l| l.starts_with("1.0") || l.starts_with("2.0")));
}

#[test]
fn zero_coupling_has_two_equal_gates() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().join("qp0");
    ok(&[
        "qp",
        "--beta",
        "0",
        "--grid",
        "128",
        "--window=-0.45,0.35",
        "--out",
        out.to_str().unwrap(),
    ]);
    let r = json(out.join("gates.json"));
    let h: Vec<f64> = r["heights"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(h.len(), 2);
    assert!((h[0] - h[1]).abs() <= 1e-3 * h[0]);
}

#[test]
fn eliminated_anchor_exits_with_code_four() {
    let t = tempfile::tempdir().unwrap();
    let o = quasipot(&[
        "qp",
        "--beta",
        "0.25",
        "--anchor",
        "AQ",
        "--out",
        t.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.2025"));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let t = tempfile::tempdir().unwrap();
    let dir = t.path().to_str().unwrap();
    let o = quasipot(&["qp", "--preset", "five-node", "--out", dir]);
    assert_eq!(o.status.code(), Some(2));
    let o = quasipot(&["qp", "--anchor", "ZZ", "--grid", "64", "--out", dir]);
    assert_eq!(o.status.code(), Some(2));
    let bad = t.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let o = quasipot(&["mc", "--config", bad.to_str().unwrap(), "--out", dir]);
    assert_eq!(o.status.code(), Some(2));
    let o = quasipot(&["mc", "--xi", "0.05", "--out", dir]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gate_scans_locate_or_reject_a_crossing() {
    let t = tempfile::tempdir().unwrap();
    let two = t.path().join("two");
    ok(&["gatescan", "--grid", "256", "--out", two.to_str().unwrap()]);
    let s = json(two.join("scan.json"));
    let b = s["crossing"]["beta"].as_f64().unwrap();
    assert!((b - 0.1857).abs() < 0.005, "{b}");

    let a = t.path().join("a");
    ok(&[
        "gatescan",
        "--preset",
        "three-node-slice-a",
        "--beta-range",
        "0,0.0101",
        "--grid",
        "256",
        "--out",
        a.to_str().unwrap(),
    ]);
    let s = json(a.join("scan.json"));
    assert!(s["crossing"].is_null());
    assert!(!s["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn monte_carlo_reruns_from_the_manifest_are_identical() {
    let t = tempfile::tempdir().unwrap();
    let first = t.path().join("first");
    ok(&[
        "mc",
        "--betas",
        "0.19",
        "--n",
        "12",
        "--seed",
        "5",
        "--jobs",
        "1",
        "--out",
        first.to_str().unwrap(),
    ]);
    let again = t.path().join("again");
    ok(&[
        "mc",
        "--config",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        again.to_str().unwrap(),
    ]);
    let rec = |d: &Path| std::fs::read(d.join("point-000/records.csv")).unwrap();
    assert_eq!(rec(&first), rec(&again));
    assert_eq!(read(first.join("sweep.csv")), read(again.join("sweep.csv")));
    let s = json(first.join("point-000/summary.json"));
    assert_eq!(s["n_realisations"], 12);
}

#[test]
fn single_realisation_is_deterministic_and_sweeps_expand() {
    let t = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let d = t.path().join(name);
        ok(&[
            "mc",
            "--n",
            "1",
            "--seed",
            "42",
            "--betas",
            "0,0.1",
            "--out",
            d.to_str().unwrap(),
        ]);
        d
    };
    let (a, b) = (run("a"), run("b"));
    for p in ["point-000/records.csv", "point-001/records.csv"] {
        assert_eq!(read(a.join(p)), read(b.join(p)));
    }
    assert_eq!(read(a.join("sweep.csv")).lines().count(), 3);
}

#[test]
fn output_root_comes_from_the_environment() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_quasipot"))
        .args(["equilibria", "--beta-range", "0,0", "--quiet"])
        .env("QUASIPOT_OUT", t.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(t.path().join("equilibria/manifest.json").exists());
}
