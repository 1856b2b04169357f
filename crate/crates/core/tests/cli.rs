use potts3d::canon::{build_canonical, FloorShape, GatewayContext, ShapedFloor, TorusArc};
use potts3d::cli::{parse_config_text, Command as Sub, Options, RunConfig, BUDGET_ENV, SCHEMA_VERSION};
use potts3d::lattice::Orientation;
use potts3d::LatticeSpec;
use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_potts3d"));
    c.env_remove(BUDGET_ENV);
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("potts3d-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn report(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is a JSON report")
}

#[test]
fn reports_carry_schema_version() {
    let o = run(&["barrier", "--lattice", "2x2x3"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
    assert_eq!(r["result"]["brute"], 6);
    assert_eq!(r["result"]["formula"], 7);
    assert_eq!(r["all_passed"], true);
}

#[test]
fn exit_code_one_on_failed_assertion() {
    let o = run(&["paths", "--lattice", "2x2x3"]);
    assert_eq!(o.status.code(), Some(1));
    let r = report(&o);
    assert_eq!(r["all_passed"], false);
    let failed: Vec<&str> = r["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|a| a["passed"] == false)
        .map(|a| a["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["peak_equals_formula"]);
}

#[test]
fn exit_code_two_on_error_with_json_on_stderr() {
    let o = run(&["barrier", "--lattice", "2x2"]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["schema_version"], SCHEMA_VERSION);
    assert_eq!(e["error"]["kind"], "input");
    let o = run(&["enumerate", "--lattice", "2x2x4", "--limit-states", "10", "--q", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let e: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(e["error"]["kind"], "budget");
}

#[test]
fn env_budget_applies_and_flags_win() {
    let o = bin().args(["barrier", "--lattice", "2x2x3"]).env(BUDGET_ENV, "limit-states=100").output().unwrap();
    let r = report(&o);
    assert_eq!(r["config"]["budget"]["limit_states"], 100);
    assert!(r["result"]["brute"].is_null());
    let o = bin()
        .args(["barrier", "--lattice", "2x2x3", "--limit-states", "5000"])
        .env(BUDGET_ENV, "limit-states=100")
        .output()
        .unwrap();
    assert_eq!(report(&o)["result"]["brute"], 6);
    let o = bin().args(["barrier"]).env(BUDGET_ENV, "bogus=1").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_sits_between_env_and_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# box\nlattice = 3x3x3\nboundary = periodic\nbeta = 2\nbeta = 4\nlimit-states = 7\n").unwrap();
    let mut opts = Options { config: Some(cfg.clone()), ..Default::default() };
    let rc = RunConfig::resolve(Sub::Barrier, opts.clone(), Some("limit-states=99,max-events=5")).unwrap();
    assert_eq!(rc.lattice, [3, 3, 3]);
    assert_eq!(rc.beta, vec![2.0, 4.0]);
    assert_eq!(rc.budget.limit_states, 7);
    assert_eq!(rc.budget.max_events, 5);
    opts.lattice = Some("3x4x5".into());
    opts.beta = vec![1.5];
    let rc = RunConfig::resolve(Sub::Barrier, opts, None).unwrap();
    assert_eq!(rc.lattice, [3, 4, 5]);
    assert_eq!(rc.beta, vec![1.5]);
    std::fs::write(&cfg, "colour = red\n").unwrap();
    assert!(RunConfig::resolve(Sub::Barrier, Options { config: Some(cfg), ..Default::default() }, None).is_err());
}

#[test]
fn config_parser_handles_comments_and_repeats() {
    let m = parse_config_text("a = 1 # trailing\n\n# whole line\nb=2\na = 3\n").unwrap();
    assert_eq!(m["a"], vec!["1", "3"]);
    assert_eq!(m["b"], vec!["2"]);
    assert!(parse_config_text("no equals sign\n").is_err());
}

#[test]
fn simulate_writes_csv_with_header() {
    let dir = scratch("sim");
    let out = dir.join("sim.json");
    let o = run(&[
        "simulate", "--lattice", "2x2x2", "--beta", "1.5", "--beta", "2", "--samples", "30", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("sim.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("seed,beta,lattice,hitting_time[rate-1 clock],steps[flips],hit"));
    assert_eq!(lines.count(), 60);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = scratch("det");
    let mut texts = Vec::new();
    for i in 0..2 {
        let out = dir.join(format!("r{i}.json"));
        let o = run(&["simulate", "--lattice", "2x2x3", "--beta", "2", "--samples", "20", "--seed", "9", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        texts.push((std::fs::read(&out).unwrap(), std::fs::read(dir.join(format!("r{i}.csv"))).unwrap()));
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn path_replay_is_exact() {
    let dir = scratch("replay");
    let o = run(&["paths", "--lattice", "3x3x4", "--boundary", "periodic"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    let stored = dir.join("path.json");
    std::fs::write(&stored, r["result"]["json"].as_str().unwrap()).unwrap();
    let o = run(&["paths", "--input", stored.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let replay = report(&o);
    assert_eq!(replay["result"]["path"], r["result"]["path"]);
}

#[test]
fn classify_labels() {
    let all_two = (1u64 << 27) - 1;
    let o = run(&["classify", "--lattice", "3x3x3", "--boundary", "periodic", "--state", &all_two.to_string()]);
    let c = &report(&o)["result"]["classification"];
    assert_eq!(c["label"], "ground");
    assert_eq!(c["spin"], 2);

    let spec = LatticeSpec::periodic(3, 4, 5, 2).unwrap();
    let plus = ShapedFloor::rows(FloorShape::Plus { l: 1, v: 1, k: 1, h: 1 });
    let s = build_canonical(&spec, 1, 2, &TorusArc::prefix(1, 5), &TorusArc::prefix(2, 5), plus, Orientation::Identity)
        .unwrap();
    let kind = GatewayContext::for_spec(&spec, 1 << 20).unwrap().classify(&s).unwrap().kind;
    let dir = scratch("classify");
    let f = dir.join("sigma.json");
    std::fs::write(&f, s.to_json()).unwrap();
    let o = run(&["classify", "--input", f.to_str().unwrap()]);
    let c = &report(&o)["result"]["classification"];
    assert_eq!(c["label"], "gateway");
    assert_eq!(c["kind"], kind);

    let o = run(&["classify", "--lattice", "3x4x5", "--boundary", "periodic", "--state", "1"]);
    assert_eq!(report(&o)["result"]["classification"]["label"], "canonical");
    assert_eq!(run(&["classify", "--lattice", "3x4x5"]).status.code(), Some(2));
}

#[test]
fn enumerate_exports_sets() {
    let dir = scratch("enum");
    let o = run(&["enumerate", "--lattice", "2x2x4", "--export-dir", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r["result"]["outside_hypothesis"], true);
    for name in ["nhat_ground", "edge_a", "edge_b", "bulk"] {
        let text = std::fs::read_to_string(dir.join(format!("{name}.txt"))).unwrap();
        let header: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["set"], name);
        assert_eq!(header["schema_version"], SCHEMA_VERSION);
        assert_eq!(text.lines().count() - 1, r["result"]["sizes"][name].as_u64().unwrap() as usize);
    }
}

#[test]
fn kappa_report_lists_unreproducible_claims() {
    let o = run(&["kappa", "--lattice", "2x2x4", "--beta", "3"]);
    let r = report(&o);
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
    assert_eq!(r["result"]["outside_hypothesis"], true);
    assert!(!r["result"]["not_reproducible"].as_array().unwrap().is_empty());
}
