use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use harnad_core::connection::{ConnectionS, Pole};
use harnad_core::hobject::HObject;
use harnad_core::normal_form::{NormalForm, NormalGroup, Position};
use harnad_core::{Matrix, Qi};
use tempfile::TempDir;

fn harnad(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harnad")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scalar_pole(a: Qi) -> ConnectionS<Qi> {
    ConnectionS::new(1, Matrix::zeros(1, 1), vec![Pole { position: Qi::int(0), coeffs: vec![Matrix::scalar(1, a)] }]).unwrap()
}

fn two_pole() -> ConnectionS<Qi> {
    let m = |v: [[i64; 2]; 2]| Matrix::from_rows(v.iter().map(|r| r.iter().map(|&x| Qi::int(x)).collect()).collect(), 2).unwrap();
    ConnectionS::new(
        2,
        Matrix::zeros(2, 2),
        vec![
            Pole { position: Qi::int(0), coeffs: vec![m([[1, 2], [0, 1]])] },
            Pole { position: Qi::int(1), coeffs: vec![m([[0, 0], [1, -1]]), m([[1, 1], [1, 1]])] },
        ],
    )
    .unwrap()
}

#[test]
fn hd_writes_the_dual() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "fuchs.json", &serde_json::to_string(&scalar_pole(Qi::frac(2, 5))).unwrap());
    let out = dir.path().join("dual.json");
    let o = harnad(&["hd", "--input", s(&input), "--output", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dual: ConnectionS<Qi> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(dual, scalar_pole(Qi::frac(-2, 5)));
}

#[test]
fn mc_on_scalar_constant_is_a_domain_error() {
    let dir = TempDir::new().unwrap();
    let a = ConnectionS::new(1, Matrix::scalar(1, Qi::int(3)), vec![]).unwrap();
    let input = write(&dir, "a.json", &serde_json::to_string(&a).unwrap());
    let o = harnad(&["mc", "--alpha", "1/2", "--input", s(&input)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("NotDefined"));
}

#[test]
fn unknown_flag_and_bad_json_exit_2() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "a.json", &serde_json::to_string(&two_pole()).unwrap());
    assert_eq!(harnad(&["kappa", "--input", s(&input), "--bogus"]).status.code(), Some(2));
    assert_eq!(harnad(&["kappa", "--input", s(&input), "--alpha", "1"]).status.code(), Some(2));
    let bad = write(&dir, "bad.json", "{\"dim\": 1,\n \"poles\": [}");
    let o = harnad(&["kappa", "--input", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let missing = dir.path().join("missing.json");
    assert_eq!(harnad(&["hd", "--input", s(&missing)]).status.code(), Some(2));
    assert_eq!(harnad(&["mc", "--alpha", "x/y", "--input", s(&input)]).status.code(), Some(2));
}

#[test]
fn kappa_phi_round_trip_and_checks() {
    let dir = TempDir::new().unwrap();
    let a = two_pole();
    let input = write(&dir, "a.json", &serde_json::to_string(&a).unwrap());
    let k = dir.path().join("k.json");
    assert!(harnad(&["kappa", "--input", s(&input), "--output", s(&k)]).status.success());
    let h: HObject<Qi> = serde_json::from_str(&fs::read_to_string(&k).unwrap()).unwrap();
    // emit ∘ parse is the identity on emitted documents
    assert_eq!(serde_json::to_string_pretty(&h).unwrap() + "\n", fs::read_to_string(&k).unwrap());
    let o = harnad(&["phi", "--input", s(&k)]);
    let back: ConnectionS<Qi> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(back, a);
    let stable: serde_json::Value = serde_json::from_slice(&harnad(&["check-stable", "--input", s(&k)]).stdout).unwrap();
    assert_eq!(stable["stable"], true);
    for doc in [&input, &k] {
        let o = harnad(&["check-irreducible", "--input", s(doc)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(v["irreducible"].is_boolean());
    }
    let o = harnad(&["check-minimal", "--input", s(&k)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn add_and_mc_with_alpha() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "a.json", &serde_json::to_string(&two_pole()).unwrap());
    let o = harnad(&["add", "--alpha", "-1/3", "--input", s(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let b: ConnectionS<Qi> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(b.poles().len(), 2);
    assert_eq!(b.poles()[0].coeffs[0][(0, 0)], Qi::frac(2, 3));
    let o = harnad(&["mc", "--alpha", "1/2", "--input", s(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn nonresonance_of_a_normal_form() {
    let dir = TempDir::new().unwrap();
    let nf = |l: Qi| {
        NormalForm::new(
            Position::Finite(Qi::int(0)),
            vec![NormalGroup { multiplicity: 2, lambda_coeffs: vec![Qi::int(1)] }],
            vec![Matrix::diag(&[Qi::int(0), l])],
        )
        .unwrap()
    };
    for (l, expect) in [(Qi::frac(1, 2), true), (Qi::int(3), false)] {
        let p = write(&dir, "nf.json", &serde_json::to_string(&nf(l)).unwrap());
        let v: serde_json::Value = serde_json::from_slice(&harnad(&["check-nonresonant", "--input", s(&p)]).stdout).unwrap();
        assert_eq!(v["nonresonant"], expect);
    }
}

const FAMILY: &str = r#"{
  "parameters": [{"name": "t1", "base": "0"}, {"name": "t2", "base": "1"}, {"name": "t3", "base": "2+i"}],
  "poles": [
    {"t_param": "t1", "groups": [{"mult": 2, "coeff_params": []}], "L": {"rows": 2, "cols": 2, "data": [["1/3", "0"], ["0", "-1/5"]]}},
    {"t_param": "t2", "groups": [{"mult": 2, "coeff_params": []}], "L": {"rows": 2, "cols": 2, "data": [["2/7", "0"], ["0", "1/11"]]}},
    {"t_param": "t3", "groups": [{"mult": 2, "coeff_params": []}], "L": {"rows": 2, "cols": 2, "data": [["-1/13", "0"], ["0", "3/17"]]}}
  ],
  "L_infinity": {"rows": 2, "cols": 2, "data": [["1/29", "0"], ["0", "2/31"]]}
}"#;

#[test]
fn family_theta_xi() {
    let dir = TempDir::new().unwrap();
    let fam = write(&dir, "family.json", FAMILY);
    let o = harnad(&["family-check", "--input", s(&fam)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let h: HObject<Qi> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(h.dim_w(), 6);
    for verb in ["theta", "xi"] {
        let a = harnad(&[verb, "--input", s(&fam), "--seed", "5"]);
        let b = harnad(&[verb, "--input", s(&fam), "--seed", "5"]);
        assert!(a.status.success(), "{}", stderr(&a));
        assert_eq!(a.stdout, b.stdout);
        let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
        assert_eq!(v["forms"].as_object().unwrap().len(), 3);
    }
    let bad = write(&dir, "bad.json", &FAMILY.replace("\"t3\", \"groups\"", "\"t9\", \"groups\""));
    assert_eq!(harnad(&["family-check", "--input", s(&bad)]).status.code(), Some(1));
}

#[test]
fn flow_writes_a_deterministic_csv() {
    let dir = TempDir::new().unwrap();
    let fam = write(&dir, "family.json", FAMILY);
    let path = write(&dir, "path.json", r#"{"waypoints": [{"t3": "5/2+i"}]}"#);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = harnad(&["flow", "--input", s(&fam), "--path", s(&path), "--steps", "100", "--seed", "4", "--output", s(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("step,arc,t1_re,t1_im"));
    for col in ["primal", "dual_xi", "exponent_drift"] {
        assert!(header.split(',').any(|c| c == col));
    }
    assert_eq!(a.lines().count(), 3);
    let o = harnad(&["flow", "--input", s(&fam), "--path", s(&path), "--steps", "10", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ResidualExceeded"));
    let hit = write(&dir, "hit.json", r#"{"waypoints": [{"t3": "1"}]}"#);
    let o = harnad(&["flow", "--input", s(&fam), "--path", s(&hit), "--steps", "50"]);
    assert!(stderr(&o).contains("PoleCollision"), "{}", stderr(&o));
}
