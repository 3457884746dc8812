use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use v2sim::scenario::{run_loaded, RunOptions, Scenario};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_v2sim"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn depletion_map_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = cli(&[
        "run",
        bundled("fig2b_depletion.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("depletion_grid.csv")).unwrap();
    assert!(text.starts_with("distance_um,bias_V,fwhm_MHz,depleted_flag\n"));
    assert!(!text.contains('\r'));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    for f in files {
        let rows = fs::read_to_string(out.join(f["path"].as_str().unwrap()))
            .unwrap()
            .lines()
            .count()
            - 1;
        assert_eq!(rows as u64, f["rows"].as_u64().unwrap());
    }
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown_key = write(
        tmp.path(),
        "a.toml",
        "name = \"a\"\ncommand = \"iv-curve\"\n[iv]\nidealty = 2.0\n",
    );
    let o = cli(&["validate", unknown_key.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("idealty"));

    let bad_cmd = write(
        tmp.path(),
        "b.toml",
        "name = \"b\"\ncommand = \"teleport\"\n",
    );
    assert_eq!(
        cli(&["run", bad_cmd.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));

    let bad_value = write(
        tmp.path(),
        "c.toml",
        "name = \"c\"\ncommand = \"iv-curve\"\n[iv]\nideality = 0.5\n",
    );
    let o = cli(&["validate", bad_value.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("iv.ideality"));

    let no_seed = write(tmp.path(), "d.toml", "name = \"d\"\ncommand = \"ssr\"\n");
    assert_eq!(
        cli(&["validate", no_seed.to_str().unwrap()]).status.code(),
        Some(3)
    );
    assert_eq!(
        cli(&[
            "validate",
            tmp.path().join("missing.toml").to_str().unwrap()
        ])
        .status
        .code(),
        Some(1)
    );
}

#[test]
fn empty_sweep_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "s.toml",
        "name = \"s\"\ncommand = \"iv-curve\"\n[sweep]\nparameter = \"iv.ideality\"\nvalues = []\n",
    );
    let o = cli(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        tmp.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep.values"));
}

#[test]
fn sweep_marks_failed_points() {
    let tmp = tempfile::tempdir().unwrap();
    // -900 V passes scenario validation but is rejected by the solver.
    let s = Scenario::from_toml_str(
        "name = \"s\"\ncommand = \"solve-junction\"\n[mesh]\nnx = 24\nnz = 12\n\
         [sweep]\nparameter = \"junction.bias_v\"\nvalues = [0.0, -900.0, -10]\n",
    )
    .unwrap();
    let r = run_loaded(
        s,
        tmp.path(),
        &RunOptions {
            out_dir: Some(tmp.path().join("o")),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(r.failures.len(), 1);
    assert_eq!(r.failures[0].0, 1);
    assert_eq!(r.exit_code(), 3);
    let summary = fs::read_to_string(tmp.path().join("o/sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert!(rows[0].starts_with("point,junction.bias_v,status,depleted_area_um2"));
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("0,0.0,ok,"));
    assert!(rows[2].starts_with("1,-900.0,failed,"));
    assert!(rows[3].starts_with("2,-10,ok,"));
    assert!(tmp
        .path()
        .join("o/point_002/junction_summary.csv")
        .is_file());
    assert!(!tmp.path().join("o/point_001").exists());
    assert!(r.manifest.failed_points == vec![1]);

    // Values that cannot be deserialized are caught before anything runs.
    let s = Scenario::from_toml_str(
        "name = \"s\"\ncommand = \"iv-curve\"\n[sweep]\nparameter = \"iv.ideality\"\nvalues = [1.5, \"x\"]\n",
    )
    .unwrap();
    let e = run_loaded(s, tmp.path(), &RunOptions::default()).unwrap_err();
    assert_eq!(e.category().exit_code(), 3);
}

#[test]
fn bundled_scenarios_round_trip() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut n = 0;
    for e in fs::read_dir(&dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let s = Scenario::from_file(&p).unwrap();
            s.validate(&dir).unwrap();
            let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
            assert_eq!(again, s, "{}", p.display());
            n += 1;
        }
    }
    assert!(n >= 12);
}

#[test]
fn env_var_sets_default_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(
        tmp.path(),
        "e.toml",
        "name = \"envtest\"\ncommand = \"iv-curve\"\n",
    );
    let o = Command::new(env!("CARGO_BIN_EXE_v2sim"))
        .args(["run", p.to_str().unwrap()])
        .env("V2SIM_OUT_DIR", tmp.path().join("root"))
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("root/envtest/iv_curve.csv").is_file());
}

#[test]
fn jobs_do_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let p = bundled("fig4d.toml");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(cli(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        a.to_str().unwrap(),
        "--jobs",
        "1"
    ])
    .status
    .success());
    assert!(cli(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        b.to_str().unwrap(),
        "--jobs",
        "3"
    ])
    .status
    .success());
    for f in ["ssr_histogram.csv", "ssr_summary.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let c = tmp.path().join("c");
    assert!(cli(&[
        "run",
        p.to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
        "--seed",
        "41"
    ])
    .status
    .success());
    assert_ne!(
        fs::read(a.join("ssr_histogram.csv")).unwrap(),
        fs::read(c.join("ssr_histogram.csv")).unwrap()
    );
}
