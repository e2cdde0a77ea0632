use std::path::Path;

use acoustic_pinn::cli::run;
use acoustic_pinn::training::read_history;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn mpipn(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("mpipn").chain(args.iter().copied());
    let code = run(argv, env_seed.map(str::to_string), &mut out, &mut err);
    Output {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

/// Small manufactured run config in `dir`.
fn write_config(dir: &Path, epochs: usize, extra: &str) -> String {
    let path = dir.join("config.json");
    let json = format!(
        r#"{{"case": "manufactured", "desk": {{"interior": 60, "observations": 6}},
            "train": {{"epochs": {epochs}, "snapshot_epochs": []{extra}}}}}"#
    );
    std::fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn geometry_prints_domain_counts() {
    let r = mpipn(&["geometry", "case1"], None);
    assert_eq!((r.code, r.stdout.as_str()), (0, "1377 88 158\n"), "{}", r.stderr);
    let r = mpipn(&["geometry", "case3"], None);
    assert_eq!(r.stdout, "4928 140 554\n");
}

#[test]
fn geometry_writes_cloud_and_observations() {
    let dir = tempfile::tempdir().unwrap();
    let r = mpipn(&["geometry", "case1", "--out", s(dir.path())], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cloud = std::fs::read_to_string(dir.path().join("cloud.csv")).unwrap();
    assert_eq!(cloud.lines().count(), 1 + 1377 + 88 + 158);
    let obs = std::fs::read_to_string(dir.path().join("observations.csv")).unwrap();
    assert_eq!(obs.lines().count(), 1 + 30 + 4 + 16);
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(mpipn(&["geometry", "case9"], None).code, 1);
    assert_eq!(mpipn(&["frobnicate"], None).code, 1);
    assert_eq!(mpipn(&["geometry"], Some("not-a-number")).code, 1);
    assert_eq!(mpipn(&["--help"], None).code, 0);
}

#[test]
fn missing_inputs_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.bin");
    let r = mpipn(&["eval", "--checkpoint", s(&missing), "--out", s(dir.path())], None);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("missing checkpoint"));
    let empty = tempfile::tempdir().unwrap();
    assert_eq!(mpipn(&["export", s(empty.path())], None).code, 2);
    assert_eq!(mpipn(&["--config", s(&missing), "geometry"], None).code, 2);
}

#[test]
fn zero_epochs_writes_only_the_initial_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0, "");
    let run_dir = dir.path().join("run");
    let r = mpipn(&["--config", &cfg, "train", "--out", s(&run_dir)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let mut names: Vec<String> = std::fs::read_dir(&run_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["ckpt_0.bin", "config.json", "history.csv"]);
}

#[test]
fn seed_pinned_reruns_match_and_flags_override_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 4, "");
    let history = |name: &str, args: &[&str], env: Option<&str>| {
        let out = dir.path().join(name);
        let mut a = vec!["--config", &cfg, "train", "--out", s(&out)];
        a.extend_from_slice(args);
        assert_eq!(mpipn(&a, env).code, 0);
        std::fs::read(out.join("history.csv")).unwrap()
    };
    let a = history("a", &[], None);
    let b = history("b", &[], None);
    assert_eq!(a, b);
    let env = history("env", &[], Some("7"));
    let flag = history("flag", &["--seed", "7"], Some("3"));
    assert_eq!(env, flag);
    assert_ne!(a, env);
}

#[test]
fn dataset_writes_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let r = mpipn(&["dataset", "--out", s(dir.path())], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(dir.path().join("cloud.csv").exists());
    let manifest = std::fs::File::open(dir.path().join("train/0000.json")).unwrap();
    let m = acoustic_pinn::physics::read_manifest(manifest).unwrap();
    assert_eq!(m.densities.len(), 25);
    assert!(dir.path().join("train/0000_obs.csv").exists());
}

#[test]
fn manufactured_smoke_run_trains_evaluates_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    // desk weighting, see `training::desk_weights`
    let cfg = write_config(dir.path(), 300, r#", "weights": {"alpha": 1.0, "beta": 0.002777777777777778}"#);
    let run_dir = dir.path().join("run");
    let r = mpipn(&["--config", &cfg, "train", "--out", s(&run_dir)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let history = read_history(std::fs::File::open(run_dir.join("history.csv")).unwrap()).unwrap();
    let first = history.first().unwrap().losses.total;
    let last = history.last().unwrap().losses.total;
    assert!(last * 10.0 <= first, "total loss {first:e} -> {last:e}");

    let eval_dir = dir.path().join("eval");
    let ckpt = run_dir.join("ckpt_300.bin");
    let r = mpipn(&["--config", &cfg, "eval", "--checkpoint", s(&ckpt), "--out", s(&eval_dir)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval_dir.join("report.json")).unwrap()).unwrap();
    let domains = json["domains"].as_object().unwrap();
    assert_eq!(domains.len(), 3);
    assert!(domains["pressure_acoustic"]["average"].as_f64().unwrap() >= 0.0);
    assert!(domains["plane_wave_radiation"].is_null());
    let ape = std::fs::read_to_string(eval_dir.join("ape.csv")).unwrap();
    assert_eq!(ape.lines().count(), 1 + 60 - 6);

    let export_dir = dir.path().join("export");
    let r = mpipn(&["export", s(&run_dir), "--out", s(&export_dir)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let long = std::fs::read_to_string(export_dir.join("loss_long.csv")).unwrap();
    assert!(long.starts_with("epoch,component,value\n"));
    assert_eq!(long.lines().count(), 1 + 300 * 6);
    let ape = std::fs::read_to_string(export_dir.join("ape_0000.csv")).unwrap();
    assert!(ape.starts_with("x,y,ape\n"));
    assert_eq!(ape.lines().count(), 1 + 60);
}

#[test]
fn ablation_shares_one_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 3, "");
    let out = dir.path().join("ablate");
    let r = mpipn(&["--config", &cfg, "ablate", "--out", s(&out)], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let hashes: Vec<&str> = r
        .stdout
        .lines()
        .filter(|l| l.contains("arm dataset"))
        .map(|l| l.rsplit(' ').next().unwrap())
        .collect();
    assert_eq!(hashes.len(), 2);
    assert_eq!(hashes[0], hashes[1]);
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert!(csv.starts_with("domain,physics_rde,data_rde,improvement_ratio,dataset_hash\n"));
    assert!(csv.contains(hashes[0]));
}
