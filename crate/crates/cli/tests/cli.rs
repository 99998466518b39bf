use std::process::Command as Process;

use clap::Parser;
use ehsched_cli::io::{parse_metadata, parse_schedule};
use ehsched_cli::{execute, Cli, CliError, ExperimentConfig, ScenarioRef};
use ehsched_core::analysis::Estimate;
use ehsched_core::online::DpConfig;
use ehsched_core::{check_feasibility, preset_scenario, Error, PolicySpec};

fn cli(args: &[&str]) -> Cli {
    Cli::try_parse_from(std::iter::once("ehsched").chain(args.iter().copied())).unwrap()
}

fn only_file(args: &[&str]) -> String {
    let out = execute(&cli(args)).unwrap();
    assert_eq!(out.files.len(), 1);
    out.files[0].contents.clone()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines().skip(1);
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

fn write_config(dir: &std::path::Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    path
}

fn small_config(out: &std::path::Path) -> ExperimentConfig {
    ExperimentConfig {
        scenario: ScenarioRef::Named("main".into()),
        policies: vec![PolicySpec::Heuristic, PolicySpec::PowerHalving, PolicySpec::MeanOffline { samples: 2 }],
        horizons: vec![5, 12],
        replicates: 20,
        seed: 4,
        output: out.to_path_buf(),
        analysis: Default::default(),
    }
}

#[test]
fn config_round_trips() {
    let mut cfg = small_config(std::path::Path::new("o"));
    cfg.policies.push(PolicySpec::Dp {
        config: DpConfig {
            energy_levels: 8,
            ..DpConfig::default()
        },
    });
    cfg.scenario = ScenarioRef::Model(Box::new(preset_scenario("memory-harvest").unwrap()));
    cfg.analysis.cdfs = true;
    let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(back.hash(), cfg.hash());
}

#[test]
fn config_accepts_bare_names_and_rejects_unknown_ones() {
    let ok = r#"{"scenario":"main","policies":["heuristic",{"kind":"mean_offline","samples":3}],
                 "horizons":[10],"replicates":5,"seed":1}"#;
    let cfg = ExperimentConfig::from_json(ok).unwrap();
    assert_eq!(cfg.policies, vec![PolicySpec::Heuristic, PolicySpec::MeanOffline { samples: 3 }]);

    for bad in [
        r#"{"scenario":"main","policies":["greedy"],"horizons":[10],"replicates":5,"seed":1}"#,
        r#"{"scenario":"main","policies":[{"kind":"greedy"}],"horizons":[10],"replicates":5,"seed":1}"#,
    ] {
        match ExperimentConfig::from_json(bad) {
            Err(CliError::Config(msg)) => {
                assert!(msg.contains("greedy") && msg.contains("power_halving"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }
    for bad in [
        r#"{"scenario":"main","policies":[],"horizons":[],"replicates":5,"seed":1}"#,
        r#"{"scenario":"main","policies":[],"horizons":[3],"replicates":0,"seed":1}"#,
        r#"{"scenario":"nowhere","policies":[],"horizons":[3],"replicates":1,"seed":1}"#,
    ] {
        assert!(ExperimentConfig::from_json(bad).is_err(), "{bad}");
    }
}

#[test]
fn single_slot_offline_is_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.csv");
    std::fs::write(&trace, "n,H,B,gamma\n1,3,0,2\n").unwrap();
    let csv = only_file(&["offline", "--trace", trace.to_str().unwrap()]);
    // Unlimited backlog by default: spend everything, w = ρ + 1/γ.
    assert_eq!(column(&csv, "power"), ["3"]);
    assert_eq!(column(&csv, "w"), ["3.5"]);
    let rate: f64 = column(&csv, "rate")[0].parse().unwrap();
    assert!((rate - 0.5 * 7f64.log2()).abs() < 1e-12);
    assert_eq!(column(&csv, "binding"), ["energy"]);
}

#[test]
fn offline_is_reproducible_and_feasible_when_reread() {
    for args in [
        &["offline", "--scenario", "main", "--seed", "1"][..],
        &["offline", "--scenario", "memory-harvest", "--seed", "3", "--mode", "general"][..],
        &["simulate", "--scenario", "main", "--seed", "1", "--policy", "heuristic"][..],
        &["simulate", "--scenario", "dp-toy", "--seed", "1", "--policy", "dp"][..],
    ] {
        let a = only_file(args);
        assert_eq!(a, only_file(args));
        let meta = parse_metadata(&a);
        assert_eq!(meta["seed"], args[4]);
        assert_eq!(meta["config_hash"].len(), 64);
        let (trace, schedule) = parse_schedule(&a, "out.csv").unwrap();
        let e1: f64 = meta["e1"].parse().unwrap();
        let b1: f64 = meta["b1"].parse().unwrap();
        assert!(check_feasibility(&trace, &schedule, e1, b1).unwrap().feasible(), "{args:?}");
        let total: f64 = meta["throughput"].parse().unwrap();
        assert!((schedule.total_throughput - total).abs() <= 1e-9 * total.max(1.0));
    }
}

#[test]
fn trace_file_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    for (text, line) in [
        ("n,H,B,gamma\n1,0,0,1\n2,0,0,-1\n", 3),
        ("# c\nn,H,B,gamma\n1,0,0,1\n3,0,0,1\n", 4),
        ("n,H,gamma\n1,0,1\n", 1),
    ] {
        std::fs::write(&path, text).unwrap();
        match execute(&cli(&["offline", "--trace", path.to_str().unwrap()])) {
            Err(e @ CliError::Parse { .. }) => {
                assert_eq!(e.exit_code(), 2);
                let CliError::Parse { line: l, .. } = e else { unreachable!() };
                assert_eq!(l, line, "{text}");
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn offline_row_has_unit_efficiency_and_rows_are_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(&dir.path().join("out"));
    let path = write_config(dir.path(), &cfg);
    let out = execute(&cli(&["experiment", "--config", path.to_str().unwrap()])).unwrap();
    assert_eq!(out.dir.as_deref(), Some(cfg.output.as_path()));
    let csv = &out.files[0].contents;
    let meta = parse_metadata(csv);
    assert_eq!(meta["config_hash"], cfg.hash());
    assert_eq!(meta["seed"], "4");
    let policies = column(csv, "policy");
    assert_eq!(policies, ["offline", "heuristic", "power_halving", "mean_offline"].repeat(2));
    for (p, eta) in policies.iter().zip(column(csv, "efficiency")) {
        if p == "offline" {
            assert_eq!(eta, "1");
        }
    }
    // Mbit/s column is the per-slot mean scaled by the slot duration only.
    for (t, m) in column(csv, "throughput").iter().zip(column(csv, "throughput_mbps")) {
        let (t, m): (f64, f64) = (t.parse().unwrap(), m.parse().unwrap());
        assert!((m - t * 1e-3).abs() <= 1e-12 * t.max(1.0));
    }
}

#[test]
fn experiment_outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(&dir.path().join("out"));
    cfg.analysis.water_profiles = true;
    cfg.analysis.cdfs = true;
    cfg.analysis.fill_bounds = true;
    let path = write_config(dir.path(), &cfg);
    let p = path.to_str().unwrap();
    let a = execute(&cli(&["experiment", "--config", p])).unwrap();
    let b = execute(&cli(&["experiment", "--config", p, "--threads", "3"])).unwrap();
    assert_eq!(a, b);
    let names: Vec<&str> = a.files.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["experiment.csv", "water_profile.csv", "cdf.csv", "fill.csv"]);
    let c = execute(&cli(&["experiment", "--config", p, "--seed", "5"])).unwrap();
    assert_ne!(a.files[0], c.files[0]);
}

#[test]
fn cdf_rows_match_the_figure_settings() {
    let csv = only_file(&["cdf", "--replicates", "4000", "--seed", "2"]);
    let meta = parse_metadata(&csv);
    assert_eq!((meta["energy"].as_str(), meta["harvest"].as_str(), meta["remaining"].as_str()), ("88", "180", "99"));
    let finite = column(&csv, "finite");
    let empirical = column(&csv, "empirical");
    let se = column(&csv, "empirical_se");
    assert_eq!(finite.len(), 20);
    for k in 0..20 {
        let (f, e, s): (f64, f64, f64) = (finite[k].parse().unwrap(), empirical[k].parse().unwrap(), se[k].parse().unwrap());
        assert!((f - e).abs() <= 4.0 * s + 1e-12, "m {}: {f} vs {e}", k + 1);
    }
}

#[test]
fn fill_rows_are_ordered_and_tend_to_one() {
    let csv = only_file(&["fill", "--replicates", "500", "--energies", "25", "--remaining", "5", "--p", "0.5,0.99"]);
    let get = |name: &str| -> Vec<Estimate> {
        column(&csv, name)
            .iter()
            .zip(column(&csv, &format!("{name}_se")))
            .map(|(m, s)| Estimate {
                mean: m.parse().unwrap(),
                se: s.parse().unwrap(),
                n: 500,
            })
            .collect()
    };
    let (lb, simple, var, fill) = (get("lb"), get("simplified"), get("variance"), get("fill"));
    for k in 0..2 {
        assert!(lb[k].mean >= simple[k].mean - 1e-12 && simple[k].mean >= var[k].mean - 1e-12);
        assert!(lb[k].mean <= fill[k].mean + 3.0 * lb[k].se.hypot(fill[k].se));
    }
    assert!(fill[1].mean > 0.99 && lb[1].mean > 0.97);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ehsched");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| Process::new(bin).args(args).current_dir(dir.path()).output().unwrap();

    let ok = run(&["offline", "--seed", "1", "--horizon", "4", "--out", "res"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(dir.path().join("res/offline.csv").exists());

    assert_eq!(run(&["simulate", "--policy", "greedy"]).status.code(), Some(2));
    assert_eq!(run(&["offline", "--scenario", "nowhere"]).status.code(), Some(2));

    let mut cfg = small_config(std::path::Path::new("res"));
    cfg.scenario = ScenarioRef::Named("dp-toy".into());
    cfg.policies = vec![PolicySpec::Dp {
        config: DpConfig {
            max_entries: 10,
            ..DpConfig::default()
        },
    }];
    let path = write_config(dir.path(), &cfg);
    let capped = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(capped.status.code(), Some(4), "{}", String::from_utf8_lossy(&capped.stderr));
}

#[test]
fn error_exit_code_mapping() {
    let nc = CliError::Core(Error::NonConvergence {
        slot: 0,
        iterations: 1,
        last: 0.0,
        residual: 1.0,
    });
    assert_eq!(nc.exit_code(), 3);
    let cap = CliError::Core(Error::ResourceCap {
        what: "x",
        requested: 2,
        cap: 1,
    });
    assert_eq!(cap.exit_code(), 4);
    assert_eq!(CliError::config("x").exit_code(), 2);
}
