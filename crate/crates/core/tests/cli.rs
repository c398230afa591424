use std::path::Path;
use std::process::{Command, Output};

fn forge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iotlog-forge"))
        .current_dir(dir)
        .args(args)
        .env_remove("LLM_ENDPOINT")
        .env_remove("LLM_API_KEY")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_then_each_step_then_run() {
    let dir = tempfile::tempdir().unwrap();
    let synth = forge(dir.path(), &["synth", "--seed", "5"]);
    assert!(synth.status.success(), "{synth:?}");
    let config = dir.path().join("synth/pipeline.toml");
    assert!(config.exists());
    let cfg = config.to_str().unwrap();

    for step in ["ingest", "abstract", "integrate", "export"] {
        let o = forge(dir.path(), &[step, "--config", cfg]);
        assert!(o.status.success(), "{step}: {o:?}");
    }
    let out = dir.path().join("synth/out");
    for f in ["changes.csv", "labels.csv", "events.csv", "events.xes"] {
        assert!(out.join(f).exists(), "{f} missing");
    }

    let eval = forge(dir.path(), &["evaluate", "--config", cfg]);
    assert_eq!(eval.status.code(), Some(0), "{eval:?}");
    assert!(stdout(&eval).contains("1.000"), "{}", stdout(&eval));

    let run = forge(dir.path(), &["run", "--config", cfg, "--strict", "--backend", "rules"]);
    assert_eq!(run.status.code(), Some(0), "{run:?}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["backend"], "rules");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = forge(dir.path(), &["run", "--config", "nope.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    std::fs::write(
        dir.path().join("bad.toml"),
        "[backend]\nkind = \"rules\"\nunknown = 1\n",
    )
    .unwrap();
    let bad = forge(dir.path(), &["ingest", "--config", "bad.toml"]);
    assert_eq!(bad.status.code(), Some(2));

    let synth = forge(dir.path(), &["synth"]);
    assert!(synth.status.success());
    let llm = forge(
        dir.path(),
        &["abstract", "--config", "synth/pipeline.toml", "--backend", "llm"],
    );
    assert_eq!(llm.status.code(), Some(2), "{llm:?}");
    let replay = forge(
        dir.path(),
        &["abstract", "--config", "synth/pipeline.toml", "--backend", "replay"],
    );
    assert_eq!(replay.status.code(), Some(2), "{replay:?}");
}

#[test]
fn unknown_backend_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = forge(dir.path(), &["run", "--backend", "oracle"]);
    assert_eq!(o.status.code(), Some(2));
}
