use std::process::{Command, Output};

fn tpp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpp")).args(args).output().unwrap()
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = tpp(&[
            "simulate", "--scheme", "icip", "--strategy", "premature", "--budget", "1",
            "--trials", "500", "--seed", "11", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read_to_string(a).unwrap();
    assert_eq!(a, std::fs::read_to_string(b).unwrap());
    assert!(a.starts_with("metric,key,count,trials,fraction,ci_low,ci_high\n"));
    assert!(a.contains("invariant,violations,0,"));
}

#[test]
fn simulate_rejects_unsupported_configuration() {
    let o = tpp(&["simulate", "--scheme", "bcip", "--strategy", "msv", "--trials", "10"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn analyze_prints_headline_numbers() {
    let o = tpp(&["analyze", "--params", "default"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("75.78"));
    assert!(text.contains("0.0595"));
    assert!(text.contains("total session resiliency (12-session budget)"));
}

#[test]
fn analyze_reads_parameter_file() {
    let dir = tempfile::tempdir().unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"n":64,"init_x":16,"sf":4,"rounds":6,"p2_len":4,"key_count":4,"p1_alphabet":95,"p1_len":6}"#,
    )
    .unwrap();
    let out = dir.path().join("report.csv");
    let o = tpp(&["analyze", "--params", params.to_str().unwrap(), "--csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(out).unwrap().contains("p_disclosure(16,64)"));
}

#[test]
fn serve_refuses_one_file_for_both_stores() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("stores.log");
    let b = dir.path().join(".").join("stores.log");
    let o = tpp(&["serve", "--store-a", a.to_str().unwrap(), "--store-b", b.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("must be different files"));
    assert!(!a.exists());
}

#[test]
fn serve_reports_busy_port() {
    let held = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = held.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.log");
    let b = dir.path().join("b.log");
    let o = tpp(&["serve", "--store-a", a.to_str().unwrap(), "--store-b", b.to_str().unwrap(), "--port", &port]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("already in use"));
}
