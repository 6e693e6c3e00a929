//! End-to-end checks of the command-line interface: exit codes, artifact
//! layout, and the output-root environment variable.

use std::process::{Command, Output};

fn meanfield(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_meanfield"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn meanfield")
}

fn small_run_args<'a>(name: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "run",
        "--output-dir",
        out,
        "--set",
        "d=3",
        "--set",
        "m=20",
        "--set",
        "n=100",
        "--set",
        "n_pop=200",
        "--set",
        "steps=40",
        "--set",
        "record_every=5",
        "--name",
        name,
    ]
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("broken.cfg");
    std::fs::write(&config, "d = minus-four\n").unwrap();
    let out_root = dir.path().join("runs");
    let out = meanfield(
        &[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out_root.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(!out_root.exists(), "no artifacts expected on a config error");
}

#[test]
fn unknown_preset_exits_2() {
    let out = meanfield(&["run", "--preset", "fig9-mystery"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown preset"));
}

#[test]
fn presets_lists_all_shipped_names() {
    let out = meanfield(&["presets"], &[]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["fig1-barron-d32", "fig2-norms", "rf-vs-nn-d32-rf", "overfit-smalln", "oracle-alpha05"] {
        assert!(text.contains(name), "presets output missing {name}");
    }
}

#[test]
fn run_writes_artifacts_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();

    let out = meanfield(&small_run_args("cli-small", root), &[]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let run_dir = dir.path().join("cli-small");
    for file in ["manifest.json", "trajectory.csv", "ensemble_final.csv", "summary.json"] {
        assert!(run_dir.join(file).exists(), "missing {file}");
    }
    let first = std::fs::read(run_dir.join("trajectory.csv")).unwrap();

    let out = meanfield(&small_run_args("cli-small", root), &[]);
    assert!(out.status.success());
    let second = std::fs::read(run_dir.join("trajectory.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn output_root_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("from-env");
    let mut args = small_run_args("cli-env", "");
    // Drop the --output-dir pair so the env var decides.
    let pos = args.iter().position(|a| *a == "--output-dir").unwrap();
    args.drain(pos..pos + 2);
    let out = meanfield(&args, &[("MEANFIELD_OUT", root.to_str().unwrap())]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(root.join("cli-env").join("summary.json").exists());
}

#[test]
fn compare_emits_sorted_table_and_flags_missing_runs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    assert!(meanfield(&small_run_args("cmp-a", root), &[]).status.success());
    let mut args_b = small_run_args("cmp-b", root);
    args_b.extend_from_slice(&["--set", "seed=77"]);
    assert!(meanfield(&args_b, &[]).status.success());

    let a = dir.path().join("cmp-a");
    let b = dir.path().join("cmp-b");
    let out = meanfield(&["compare", a.to_str().unwrap(), b.to_str().unwrap()], &[]);
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    let mut lines = table.lines();
    assert!(lines.next().unwrap().starts_with("name,d,target,mode,seed,status"));
    assert_eq!(table.lines().count(), 3);

    let missing = dir.path().join("nowhere");
    let out = meanfield(
        &["compare", a.to_str().unwrap(), missing.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing run summary"));
}

#[test]
fn oracle_subcommand_writes_comparison_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = meanfield(
        &[
            "oracle",
            "--alpha",
            "1.0",
            "--steps",
            "2000",
            "--h",
            "5e-4",
            "--output-dir",
            dir.path().to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{out:?}");
    let csv = std::fs::read_to_string(dir.path().join("oracle").join("oracle.csv")).unwrap();
    assert!(csv.starts_with("t,x_euler,x_closed,energy_euler,energy_closed,abs_err_x"));
}

#[test]
fn divergent_run_exits_1_with_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_str().unwrap();
    let mut args = small_run_args("cli-diverge", root);
    args.extend_from_slice(&["--set", "h=1e12"]);
    let out = meanfield(&args, &[]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let run_dir = dir.path().join("cli-diverge");
    assert!(run_dir.join("trajectory.csv").exists());
    let summary = std::fs::read_to_string(run_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"diverged\""));
}
