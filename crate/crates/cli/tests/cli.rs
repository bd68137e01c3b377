use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tiny() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/tiny.toml")).unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn vmsr(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vmsr"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad_key = write_config(dir.path(), "a.toml", "sede = 3\n");
    let o = vmsr(&bad_key, &out, &["gen-envs"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("sede"));

    let overlap = write_config(dir.path(), "b.toml", "[splits.eval]\ncount = 2\nseed_start = 1000\n");
    assert_eq!(code(&vmsr(&overlap, &out, &["gen-envs"])), 2);
    assert_eq!(code(&vmsr(&dir.path().join("missing.toml"), &out, &["gen-envs"])), 2);

    let ok = write_config(dir.path(), "c.toml", &tiny());
    assert_eq!(code(&vmsr(&ok, &out, &["no-such-verb"])), 2);
    assert_eq!(code(&vmsr(&ok, &out, &["ablate", "--axis", "bogus"])), 2);
}

#[test]
fn missing_and_stale_artifacts_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.toml", &tiny());
    let o = vmsr(&cfg, &out, &["collect"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("vmsr gen-envs"));

    assert!(vmsr(&cfg, &out, &["gen-envs"]).status.success());
    assert!(vmsr(&cfg, &out, &["collect"]).status.success());
    let o = vmsr(&cfg, &out, &["label"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("vmsr train-inverse"));

    assert!(vmsr(&cfg, &out, &["train-inverse"]).status.success());
    let changed = write_config(dir.path(), "d.toml", &tiny().replace("epochs = 2", "epochs = 3"));
    let o = vmsr(&changed, &out, &["label"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("different configuration"));
}

#[test]
fn divergence_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.toml", &tiny());
    assert!(vmsr(&cfg, &out, &["gen-envs"]).status.success());
    assert!(vmsr(&cfg, &out, &["collect"]).status.success());
    let text = tiny().replace("[pipeline.inverse]\nepochs = 2", "[pipeline.inverse]\nepochs = 2\nlr = 1e300");
    let bad = write_config(dir.path(), "bad.toml", &text);
    let o = vmsr(&bad, &out, &["train-inverse"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn gen_envs_is_idempotent_and_seed_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", &tiny());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert!(vmsr(&cfg, &a, &["gen-envs"]).status.success());
    assert!(vmsr(&cfg, &b, &["gen-envs"]).status.success());
    let map = "envs/etest/map_4000.maze";
    let first = std::fs::read(a.join(map)).unwrap();
    assert_eq!(first, std::fs::read(b.join(map)).unwrap());
    assert!(vmsr(&cfg, &a, &["gen-envs"]).status.success());
    assert_eq!(first, std::fs::read(a.join(map)).unwrap());

    assert!(vmsr(&cfg, &c, &["--seed", "99", "gen-envs"]).status.success());
    let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(c.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved["seed"], 99);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(c.join("envs/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 99);
    assert_eq!(manifest["format"], "vmsr-manifest v1");
}

#[test]
fn report_marks_absent_results() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "c.toml", &tiny());
    for verb in ["gen-envs", "collect"] {
        assert!(vmsr(&cfg, &out, &[verb]).status.success());
    }
    let o = vmsr(&cfg, &out, &["explore", "--baselines-only"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = vmsr(&cfg, &out, &["report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("report/table.txt")).unwrap();
    assert!(table.contains("absent"), "{table}");
    assert!(table.contains("random"));
}
