use std::path::PathBuf;
use std::process::Command;

use mdrd_cli::run;
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).display().to_string()
}

fn call(args: &[&str]) -> (i32, Value) {
    let out = run(args.iter().map(|s| s.to_string()));
    let v: Value = serde_json::from_str(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", out.stdout));
    (out.code, v)
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn copy_example_needs_no_noise() {
    let (code, v) = call(&["frl", "decompose", &data("copy.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["command"], "frl decompose");
    assert_eq!(v["results"]["z_size"], 1);
    assert_eq!(v["results"]["z_pmf"], serde_json::json!(["1"]));
    assert_eq!(v["results"]["f"], serde_json::json!([[0], [1]]));
    assert_eq!(v["inputs-digest"].as_str().unwrap().len(), 64);
}

#[test]
fn frl_roles_from_axis_order_and_flag() {
    let (code, v) = call(&["frl", "decompose", &data("uvw.json")]);
    assert_eq!(code, 0);
    let r = &v["results"];
    assert!(num(&r["z_size"]) <= num(&r["universal_bound"]));
    assert_eq!(num(&r["report"]["reconstruction_error"]), 0.0);
    assert!(r["z_pmf"][0].is_string());
    let (_, w) = call(&["frl", "decompose", &data("uvw.json"), "--axes", "U,V,W"]);
    assert_eq!(w["results"], v["results"]);
    let (code, f) = call(&["--mode", "float", "frl", "decompose", &data("uvw.json")]);
    assert_eq!(code, 0);
    assert!(f["results"]["z_pmf"][0].is_number());
    assert!(num(&f["residuals"]["independence_gap"]) <= 1e-10);
}

#[test]
fn unknown_flag_exits_two_with_an_envelope() {
    let (code, v) = call(&["frl", "decompose", &data("copy.json"), "--bogus"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "usage");
    let (code, _) = call(&["nonsense"]);
    assert_eq!(code, 2);
}

#[test]
fn malformed_input_names_the_json_path() {
    let (code, v) = call(&["frl", "decompose", &data("bad_z.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["path"], "$.z");
    let (code, v) = call(&["frl", "decompose", &data("bad_value.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["path"], "$.pmf.values[0][1]");
    let (code, v) = call(&["frl", "decompose", &data("bad_sum.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["path"], "$.pmf.values");
    let (code, v) = call(&["frl", "decompose", &data("missing.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "io");
    let (code, v) = call(&["region", "optimize", "--family", "zb", "--weights", "1,1", "--distortions", "{\"1\": \"a\"}"]);
    assert_eq!(code, 2);
    assert!(v["error"]["path"].as_str().unwrap().starts_with("--distortions"));
}

#[test]
fn infeasible_search_exits_one() {
    let (code, v) = call(&[
        "region", "optimize", "--family", "zb", "--weights", "1,1", "--distortions", "{\"1\":0.01,\"12\":0.0}",
        "--restarts", "2", "--budget", "100",
    ]);
    assert_eq!(code, 1);
    assert_eq!(v["error"]["kind"], "infeasible");
}

#[test]
fn optimize_writes_a_trace_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let args = [
        "region", "optimize", "--family", "egc-star", "--weights", "1,1", "--distortions", "{\"1\":0.3,\"12\":0.1}",
        "--restarts", "3", "--budget", "400", "--seed", "7", "--trace", trace.to_str().unwrap(),
    ];
    let (code, a) = call(&args);
    assert_eq!(code, 0);
    assert_eq!(num(&a["residuals"]["max_distortion_excess"]), 0.0);
    // Any scheme meeting D12 = 0.1 needs at least R(0.1) = 1 - h(0.1) in total.
    assert!(num(&a["results"]["value"]) >= 0.531 - 1e-3);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("restart,iteration,lambda,penalized,value,violation"));
    let (_, b) = call(&args);
    assert_eq!(a["results"].to_string(), b["results"].to_string());
}

#[test]
fn psi_commands() {
    let (code, v) = call(&["psi", "eval", &data("vkg3.json"), "--subset", "1,3"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["subset"], "13");
    assert_eq!(v["results"]["value"], v["results"]["psi"]["13"]);
    assert_eq!(num(&v["results"]["psi"]["{}"]), 0.0);
    assert_eq!(v["results"]["contra_polymatroid"]["supermodular"], true);
    let (code, v) = call(&["psi", "vertices", &data("vkg3.json")]);
    assert_eq!(code, 0);
    let csv = v["results"]["csv"].as_str().unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert_eq!(csv.lines().next().unwrap(), "permutation,R1,R2,R3");
}

#[test]
fn region_eval_reports_every_decoder() {
    let (code, v) = call(&["region", "eval", &data("egc.json"), "--weights", "1,1"]);
    assert_eq!(code, 0);
    let r = &v["results"];
    for k in ["1", "2", "12"] {
        assert!(r["distortions"][k].is_number());
        assert!(r["decoders"][k].is_object());
    }
    assert_eq!(r["vertices"].as_array().unwrap().len(), 2);
    assert!((num(&r["weighted_sum"]["value"]) - num(&r["rate_bounds"]["12"])).abs() < 1e-12);
    let (code, v) = call(&["region", "eval", "--family", "vkg", &data("egc.json")]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["path"], "$.family");
}

#[test]
fn transform_and_elimination_keep_corners() {
    let (code, v) = call(&["region", "transform", &data("egc.json")]);
    assert_eq!(code, 0);
    assert!(num(&v["residuals"]["rate_gap"]) <= 1e-9);
    assert_eq!(v["residuals"]["distortions_equal"], true);
    assert_eq!(v["results"]["transforms"][0]["scheme"]["family"], "egc-star");
    for pi in ["1,2", "2,1"] {
        let (code, v) = call(&["region", "eliminate", &data("vkg2.json"), "--pi", pi]);
        assert_eq!(code, 0);
        assert!(num(&v["residuals"]["rate_gap"]) <= 1e-9);
        assert_eq!(v["results"]["scheme"]["family"], "zb");
    }
    let (code, v) = call(&["region", "eliminate", &data("vkg3.json"), "--chain"]);
    assert_eq!(code, 0);
    assert!(num(&v["residuals"]["corner_identity_gap"]) <= 1e-9);
    let (code, v) = call(&["region", "eliminate", &data("vkg2.json"), "--pi", "1,1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "invalid-permutation");
}

#[test]
fn weighted_sum_rejects_increasing_weights() {
    let (code, v) = call(&["region", "weighted", &data("vkg3.json"), "--weights", "3,2,1"]);
    assert_eq!(code, 0);
    assert!(num(&v["results"]["value"]) > 0.0);
    let (code, v) = call(&["region", "weighted", &data("vkg3.json"), "--weights", "1,2,3"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "invalid-weights");
}

#[test]
fn scalable_commands() {
    let (code, v) = call(&["scalable", "rd", "--source", "bss", "--distortion", "hamming", "--D", "0.11"]);
    assert_eq!(code, 0);
    assert!((num(&v["results"]["rate"]) - num(&v["results"]["reference"])).abs() <= 1e-4);
    let (_, f) = call(&["scalable", "rd", "--source", &data("bss_source.json"), "--D", "0.11"]);
    assert_eq!(f["results"]["rate"], v["results"]["rate"]);

    let (_, c) = call(&["scalable", "d2star", "--D1", "0.3", "--D12", "0.1", "--closed-form"]);
    assert!((num(&c["results"]["value"]) - 0.3).abs() < 1e-12);
    let (_, s) = call(&["scalable", "d2star", "--D1", "0.3", "--D12", "0.1", "--structured", "--grid", "1e-4"]);
    assert!(num(&s["residuals"]["closed_form_gap"]) <= 1e-6);
    let (code, _) = call(&["scalable", "d2star", "--D1", "0.3", "--D12", "0.1", "--closed-form", "--structured"]);
    assert_eq!(code, 2);
    let (code, v) = call(&["scalable", "d2star", "--D1", "0.1", "--D12", "0.3", "--closed-form"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "domain");

    let (code, t) = call(&["scalable", "total-rate", "--D1", "0.3", "--D12", "0.1", "--restarts", "2"]);
    assert_eq!(code, 0);
    assert!((num(&t["results"]["rate"]) - 0.531004406411).abs() <= 5e-3);
}

#[test]
fn weak_independence_both_orientations() {
    let (code, v) = call(&["scalable", "weak", &data("weak.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["weakly_independent"], true);
    assert_eq!(v["results"]["weakly_independent_by_output"], false);
    let (_, v) = call(&["--mode", "float", "scalable", "weak", &data("strong.json")]);
    assert_eq!(v["results"]["weakly_independent"], false);
}

#[test]
fn strategy_commands() {
    let (code, v) = call(&["strategy", "capacity", &data("state_channel.json")]);
    assert_eq!(code, 0);
    assert!(num(&v["residuals"]["capacity_gap"]) <= 1e-6);
    let (_, d) = call(&["strategy", "capacity", &data("state_channel.json"), "--method", "direct"]);
    assert!(d["results"]["shannon"].is_null());
    assert_eq!(d["results"]["direct"], v["results"]["direct"]);
    let (code, f) = call(&["strategy", "frl", &data("state_channel.json")]);
    assert_eq!(code, 0);
    assert!(num(&f["residuals"]["rate_gap"]) <= 1e-9);
    assert!(num(&f["residuals"]["independence_gap"]) <= 1e-10);
}

#[test]
fn verify_runs_small_suites() {
    let (code, v) = call(&["verify", "--suite", "bss", "--grid", "0.1"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["passed"], true);
    let (code, v) = call(&["verify", "--suite", "frl", "--cases", "30", "--seed", "4"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["suites"][0]["cases"], 30);
    assert_eq!(v["seed"], 4);
}

#[test]
fn binary_prints_the_envelope_and_exit_status() {
    let exe = env!("CARGO_BIN_EXE_mdrd");
    let ok = Command::new(exe).args(["frl", "decompose", &data("copy.json")]).output().unwrap();
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["results"]["z_size"], 1);
    let bad = Command::new(exe).args(["frl", "decompose", "--nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}
