use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gamma-dpp")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json report")
}

#[test]
fn sample_csv_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv"].iter().map(|n| dir.path().join(n)).collect();
    for path in &paths {
        let out = run(&[
            "sample", "--z", "0.4+0.7i", "--radius", "12", "--samples", "200", "--seed", "42", "--format", "csv",
            "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (a, b) = (std::fs::read(&paths[0]).unwrap(), std::fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    assert!(a.starts_with(b"sample,x\n"));

    let other = run(&["sample", "--z", "0.4+0.7i", "--radius", "12", "--samples", "200", "--seed", "43", "--format", "csv"]);
    assert_ne!(other.stdout, a);
}

#[test]
fn reports_carry_the_schema_version() {
    let out = run(&["eval", "--z", "0.4+0.7i", "--radius", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], 1);

    let csv = run(&["eval", "--z", "0.4+0.7i", "--radius", "3", "--table", "rho1", "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
}

#[test]
fn exit_codes_distinguish_errors_from_failures() {
    // z' = z is not admissible for non-real z
    assert_eq!(run(&["eval", "--z", "0.4+0.7i", "--zp", "0.4+0.7i"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--z", "not-a-number"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--only", "no_such_check"]).status.code(), Some(2));
    assert_eq!(run(&["bogus"]).status.code(), Some(2));

    // an unattainable tolerance is a check failure, not an error
    let out = run(&["palm", "--z", "0.4+0.7i", "--radius", "20", "--tol", "1e-30", "--samples", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["passed"], false);
}

#[test]
fn sampled_density_matches_the_diagonal() {
    let out = run(&["sample", "--z", "0.4+0.7i", "--radius", "6", "--samples", "4000", "--seed", "5", "--table", "density"]);
    assert!(out.status.success());
    let v = json(&out);
    for d in v["density"].as_array().unwrap() {
        let (e, x, s) = (d["empirical"].as_f64().unwrap(), d["exact"].as_f64().unwrap(), d["sigma"].as_f64().unwrap());
        assert!((e - x).abs() <= 4.0 * s.max(1e-3), "{d}");
    }
}

#[test]
fn verify_runs_only_the_selected_checks() {
    let out = run(&["verify", "--only", "check_summation_lemma,check_specfun"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"check_summation_lemma"));
    assert!(names.iter().all(|n| *n == "check_summation_lemma" || *n == "check_specfun"));
}
