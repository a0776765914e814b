use std::fs;
use std::path::Path;

use maxpat::cli::main_with_args;

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["maxpat"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const BERNOULLI: &str = r#"
[system]
kind = "bernoulli"
probs = [0.5, 0.5]

[partition]
kind = "word"
length = 1

[params]
k_max = 5
horizon = 10
"#;

#[test]
fn hstar_on_fair_coin_is_log2_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BERNOULLI);
    let out = dir.path().join("out");
    assert_eq!(run(&["hstar", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let mut rdr = csv::Reader::from_path(out.join("hstar.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["k", "p_star_nats", "p_star_over_k", "exact_flag"]
    );
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let ratio: f64 = rec[2].parse().unwrap();
        assert!((ratio - std::f64::consts::LN_2).abs() < 1e-10);
        assert_eq!(&rec[3], "true");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

#[test]
fn log2_flag_rescales_to_bits() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BERNOULLI);
    let out = dir.path().join("out");
    assert_eq!(run(&["hstar", "--config", &cfg, "--out", out.to_str().unwrap(), "--log2"]), 0);
    let text = fs::read_to_string(out.join("hstar.csv")).unwrap();
    assert!(text.starts_with("k,p_star_bits,"));
    let row: Vec<&str> = text.lines().nth(3).unwrap().split(',').collect();
    let bits: f64 = row[1].parse().unwrap();
    assert!((bits - 3.0).abs() < 1e-10);
    let report = fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"unit\": \"bits\""));
}

#[test]
fn reports_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
seed = 9

[system]
kind = "bernoulli"
probs = [0.5, 0.5]

[partition]
kind = "word"
length = 1

[params]
window = 4000
trials = 3
"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert_eq!(run(&["pairs", "--config", &cfg, "--out", d.to_str().unwrap()]), 0);
    }
    for f in ["report.json", "densities.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    assert_eq!(
        run(&["pairs", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "10"]),
        0
    );
    assert_ne!(fs::read(a.join("densities.csv")).unwrap(), fs::read(c.join("densities.csv")).unwrap());
}

#[test]
fn config_echo_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), BERNOULLI);
    let a = dir.path().join("a");
    assert_eq!(
        run(&["pattern", "--config", &cfg, "--out", a.to_str().unwrap(), "--budget", "5000"]),
        1,
        "pattern needs params.k"
    );
    let cfg = write_config(dir.path(), &format!("{BERNOULLI}k = 3\n"));
    assert_eq!(
        run(&["pattern", "--config", &cfg, "--out", a.to_str().unwrap(), "--budget", "5000"]),
        0
    );
    let report: serde_json::Value = serde_json::from_slice(&fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["params"]["budget"], 5000);
    let echo = dir.path().join("echo.toml");
    fs::write(&echo, report["config_toml"].as_str().unwrap()).unwrap();
    let b = dir.path().join("b");
    assert_eq!(
        run(&["pattern", "--config", echo.to_str().unwrap(), "--out", b.to_str().unwrap()]),
        0
    );
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn rational_alpha_is_rejected_with_continued_fraction_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
[system]
kind = "rotation"
alpha = "0.3333333333333333333"

[partition]
kind = "interval"
cuts = ["0", "0.5"]
atoms = [0, 1]

[params]
k_max = 2
horizon = 4
"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["hstar", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert!(!out.join("report.json").exists());
    let cfg_path = std::path::PathBuf::from(&cfg);
    let parsed = maxpat::cli::ExperimentConfig::load(&cfg_path).unwrap();
    let err = maxpat::systems::System::new(parsed.system.unwrap()).unwrap_err();
    assert!(err.to_string().contains("continued fraction"), "{err}");
}

#[test]
fn stochastic_commands_need_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BERNOULLI}window = 100\n"));
    let out = dir.path().join("out");
    assert_eq!(run(&["pairs", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert_eq!(
        run(&["pairs", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "1"]),
        0
    );
}

#[test]
fn malformed_config_and_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[params]\nk_max = \"four\"\n");
    let out = dir.path().join("out");
    assert_eq!(run(&["hstar", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    assert_eq!(run(&["hstar", "--no-such-flag"]), 1);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn smoke_verify_passes_and_ignores_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\nscale = \"smoke\"\n");
    let mut outcomes = Vec::new();
    for (i, seed) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("v{i}"));
        assert_eq!(
            run(&["verify", "--config", &cfg, "--seed", seed, "--out", out.to_str().unwrap()]),
            0
        );
        let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
        let hard: Vec<(String, String)> = report["results"]["checks"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["hard"].as_bool().unwrap())
            .map(|c| (c["name"].to_string(), c["outcome"].to_string()))
            .collect();
        outcomes.push(hard);
    }
    assert_eq!(outcomes[0], outcomes[1]);
    assert!(outcomes[0].iter().all(|(_, o)| o == "\"pass\""));
}

#[test]
fn trivial_budget_leaves_hard_checks_passing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[verify]\nscale = \"smoke\"\n");
    let out = dir.path().join("v");
    assert_eq!(
        run(&["verify", "--config", &cfg, "--budget", "3", "--out", out.to_str().unwrap()]),
        0
    );
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap();
    let checks = report["results"]["checks"].as_array().unwrap();
    let bracket = checks.iter().find(|c| c["name"] == "h_star_bracket").unwrap();
    assert_eq!(bracket["outcome"], "inconclusive");
    assert_eq!(report["results"]["summary"]["hard_fail"], 0);
}
