//! End-to-end tests of the `ood` binary: reproducibility, file formats, and
//! error behavior of each subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ood_core::data::read_nll_file;
use ood_core::score::read_score_csv;

fn ood() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ood"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawning ood");
    assert!(
        output.status.success(),
        "command failed: {cmd:?}\nstderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn run_err(cmd: &mut Command) -> Output {
    let output = cmd.output().expect("spawning ood");
    assert!(
        !output.status.success(),
        "command unexpectedly succeeded: {cmd:?}"
    );
    output
}

fn synth(dir: &Path, kind: &str, n: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("{kind}-{seed}"));
    run_ok(ood().args([
        "synth",
        kind,
        "-n",
        &n.to_string(),
        "--seed",
        &seed.to_string(),
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    out.join("manifest.csv")
}

#[test]
fn synth_is_reproducible_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(dir.path(), "noise", 5, 7);
    let b_dir = dir.path().join("again");
    run_ok(ood().args([
        "synth", "noise", "-n", "5", "--seed", "7", "--out-dir",
        b_dir.to_str().unwrap(),
    ]));

    // identical file bytes for every artifact
    for name in ["manifest.csv", "noise_00000.oodt", "noise_00004.oodt"] {
        let first = std::fs::read(a.parent().unwrap().join(name)).unwrap();
        let second = std::fs::read(b_dir.join(name)).unwrap();
        assert_eq!(first, second, "{name} differs between identical runs");
    }

    let usage = run_err(ood().args(["synth", "constant", "-n", "0"]));
    assert!(
        String::from_utf8_lossy(&usage.stderr).contains("empty"),
        "stderr: {}",
        String::from_utf8_lossy(&usage.stderr)
    );
}

#[test]
fn complexity_emits_one_column_per_codec_plus_min() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "constant", 4, 3);
    let out = dir.path().join("cx");
    run_ok(ood().args([
        "complexity",
        "--manifest",
        manifest.to_str().unwrap(),
        "--codec",
        "png_like",
        "--codec",
        "order0_ac",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(out.join("complexity.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,png_like,order0_ac,min_bpd"));
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 4);
        let png: f64 = fields[1].parse().unwrap();
        assert!(png <= 0.1, "constant image png_like bpd {png}");
    }

    // noise rows sit just above 8 bits/dim under the adaptive coder
    let noise_manifest = synth(dir.path(), "noise", 4, 6);
    let noise_out = dir.path().join("cx-noise");
    run_ok(ood().args([
        "complexity",
        "--manifest",
        noise_manifest.to_str().unwrap(),
        "--codec",
        "order0_ac",
        "--out-dir",
        noise_out.to_str().unwrap(),
    ]));
    let noise_text = std::fs::read_to_string(noise_out.join("complexity.csv")).unwrap();
    for line in noise_text.lines().skip(1) {
        let bpd: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((7.9..=8.2).contains(&bpd), "noise order0_ac bpd {bpd}");
    }

    // rerunning into a second directory gives identical CSV bytes
    let out2 = dir.path().join("cx2");
    run_ok(ood().args([
        "complexity",
        "--manifest",
        manifest.to_str().unwrap(),
        "--codec",
        "png_like",
        "--codec",
        "order0_ac",
        "--out-dir",
        out2.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(out.join("complexity.csv")).unwrap(),
        std::fs::read(out2.join("complexity.csv")).unwrap()
    );

    let missing = run_err(ood().args([
        "complexity",
        "--manifest",
        dir.path().join("nope.csv").to_str().unwrap(),
    ]));
    assert!(!missing.status.success());
}

#[test]
fn complexity_rejects_undeclared_codec() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "constant", 4, 3);
    let err = run_err(ood().args([
        "complexity",
        "--manifest",
        manifest.to_str().unwrap(),
        "--codec",
        "flif",
    ]));
    assert!(String::from_utf8_lossy(&err.stderr).contains("unknown codec"));
}

#[test]
fn external_codec_is_usable_through_the_env_config() {
    use std::os::unix::fs::PermissionsExt;
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noise", 3, 5);

    let script = dir.path().join("copy.sh");
    std::fs::write(&script, "#!/bin/sh\ncp \"$1\" \"$2\"\n").unwrap();
    let mut perms = std::fs::metadata(&script).unwrap().permissions();
    perms.set_mode(0o755);
    std::fs::set_permissions(&script, perms).unwrap();

    let config = dir.path().join("codecs.toml");
    std::fs::write(
        &config,
        format!(
            "[[codec]]\nname = \"rawcopy\"\ncommand = \"{} {{in}} {{out}}\"\nheader_bytes = 16\n",
            script.display()
        ),
    )
    .unwrap();

    let out = dir.path().join("cx");
    run_ok(
        ood()
            .env("OOD_EXTERNAL_CODECS", &config)
            .args([
                "complexity",
                "--manifest",
                manifest.to_str().unwrap(),
                "--codec",
                "rawcopy",
                "--out-dir",
                out.to_str().unwrap(),
            ]),
    );
    let text = std::fs::read_to_string(out.join("complexity.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("id,rawcopy,min_bpd"));
    for line in lines {
        // an identity "compressor" measures exactly 8 bits/dim after the
        // declared 16-byte container header is excluded
        let bpd: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(bpd, 8.0);
    }
}

#[test]
fn fit_nll_and_uniform_behaviors() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "constant", 12, 9);

    let model_dir = dir.path().join("model");
    run_ok(ood().args([
        "fit",
        "--manifest",
        manifest.to_str().unwrap(),
        "-k",
        "1",
        "--alpha",
        "1.0",
        "--out-dir",
        model_dir.to_str().unwrap(),
    ]));

    let nll_dir = dir.path().join("nll");
    run_ok(ood().args([
        "nll",
        "--manifest",
        manifest.to_str().unwrap(),
        "--model",
        model_dir.join("model.oodm").to_str().unwrap(),
        "--out-dir",
        nll_dir.to_str().unwrap(),
    ]));
    let records = read_nll_file(&nll_dir.join("nll.csv")).unwrap();
    assert_eq!(records.len(), 12);
    let mean: f64 = records.iter().map(|r| r.nll_bpd).sum::<f64>() / 12.0;
    assert!(mean < 8.0, "training should beat the uniform model, got {mean}");

    let uniform_dir = dir.path().join("uniform");
    run_ok(ood().args([
        "nll",
        "--manifest",
        manifest.to_str().unwrap(),
        "--uniform",
        "--out-dir",
        uniform_dir.to_str().unwrap(),
    ]));
    for r in read_nll_file(&uniform_dir.join("nll.csv")).unwrap() {
        assert_eq!(r.nll_bpd, 8.0);
    }

    // resume with mismatched hyperparameters must fail
    let err = run_err(ood().args([
        "fit",
        "--manifest",
        manifest.to_str().unwrap(),
        "-k",
        "2",
        "--resume",
        model_dir.join("model.oodm").to_str().unwrap(),
        "--out-dir",
        dir.path().join("resumed").to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&err.stderr).contains("hyperparameters"));
}

fn pipeline_scores(dir: &Path, kind: &str, seed: u64, model: &Path) -> PathBuf {
    let manifest = synth(dir, kind, 12, seed);
    let base = manifest.parent().unwrap();
    run_ok(ood().args([
        "complexity",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        base.join("cx").to_str().unwrap(),
    ]));
    run_ok(ood().args([
        "nll",
        "--manifest",
        manifest.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--out-dir",
        base.join("nll").to_str().unwrap(),
    ]));
    run_ok(ood().args([
        "score",
        "--nll",
        base.join("nll/nll.csv").to_str().unwrap(),
        "--complexity",
        base.join("cx/complexity.csv").to_str().unwrap(),
        "--strategy",
        "sign",
        "--out-dir",
        base.join("scores").to_str().unwrap(),
    ]));
    base.join("scores/scores.csv")
}

#[test]
fn score_joins_on_id_and_applies_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noise", 12, 31);
    let base = manifest.parent().unwrap();

    let model_dir = dir.path().join("model");
    run_ok(ood().args([
        "fit",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        model_dir.to_str().unwrap(),
    ]));
    let scores = pipeline_scores(dir.path(), "noise", 31, &model_dir.join("model.oodm"));

    let rows = read_score_csv(&scores).unwrap();
    assert_eq!(rows.len(), 12);
    for row in &rows {
        let r = &row.record;
        assert_eq!(r.s, r.nll_bpd - r.complexity_bpd);
        assert!(row.decision.is_some(), "sign strategy fills the decision");
    }

    // rank strategy marks exactly k rows as OOD
    run_ok(ood().args([
        "score",
        "--nll",
        base.join("nll/nll.csv").to_str().unwrap(),
        "--complexity",
        base.join("cx/complexity.csv").to_str().unwrap(),
        "--strategy",
        "rank",
        "--top-k",
        "3",
        "--out-dir",
        base.join("rank").to_str().unwrap(),
    ]));
    let rank_rows = read_score_csv(&base.join("rank/scores.csv")).unwrap();
    let flagged = rank_rows
        .iter()
        .filter(|r| r.decision == Some(ood_core::score::Label::Ood))
        .count();
    assert_eq!(flagged, 3);

    // quantile strategy needs train scores and writes its threshold
    run_ok(ood().args([
        "score",
        "--nll",
        base.join("nll/nll.csv").to_str().unwrap(),
        "--complexity",
        base.join("cx/complexity.csv").to_str().unwrap(),
        "--strategy",
        "quantile",
        "--quantile",
        "0.9",
        "--train-scores",
        scores.to_str().unwrap(),
        "--out-dir",
        base.join("quantile").to_str().unwrap(),
    ]));
    assert!(base.join("quantile/threshold.json").exists());

    // id mismatch: complexity file for a different dataset
    let other_manifest = synth(dir.path(), "constant", 12, 32);
    let other_base = other_manifest.parent().unwrap();
    run_ok(ood().args([
        "complexity",
        "--manifest",
        other_manifest.to_str().unwrap(),
        "--out-dir",
        other_base.join("cx").to_str().unwrap(),
    ]));
    let err = run_err(ood().args([
        "score",
        "--nll",
        base.join("nll/nll.csv").to_str().unwrap(),
        "--complexity",
        other_base.join("cx/complexity.csv").to_str().unwrap(),
        "--out-dir",
        base.join("mismatch").to_str().unwrap(),
    ]));
    let stderr = String::from_utf8_lossy(&err.stderr);
    assert!(stderr.contains("id mismatch"), "stderr: {stderr}");
    assert!(stderr.contains("noise_00000") && stderr.contains("constant_00000"));
}

#[test]
fn eval_on_identical_files_is_chance_level() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noise", 12, 51);
    let model_dir = dir.path().join("model");
    run_ok(ood().args([
        "fit",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out-dir",
        model_dir.to_str().unwrap(),
    ]));
    let scores = pipeline_scores(dir.path(), "noise", 51, &model_dir.join("model.oodm"));

    let report = dir.path().join("report");
    run_ok(ood().args([
        "eval",
        "--in-scores",
        scores.to_str().unwrap(),
        "--ood-scores",
        &format!("same={}", scores.display()),
        "--train-scores",
        scores.to_str().unwrap(),
        "--out-dir",
        report.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(report.join("auroc.csv")).unwrap();
    let row = text.lines().nth(1).unwrap();
    for field in row.split(',').skip(1) {
        let v: f64 = field.parse().unwrap();
        assert!((v - 0.5).abs() < 1e-12, "identical classes must give 0.5, got {v}");
    }
    assert!(report.join("summary.json").exists());
    assert!(report.join("scatter.csv").exists());
    assert!(report.join("hist_loglik_in.csv").exists());
    assert!(report.join("hist_s_same.csv").exists());
}

#[test]
fn pooling_emits_six_sorted_rows() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noise", 6, 61);
    let out = dir.path().join("pool");
    run_ok(ood().args([
        "pooling",
        "--manifest",
        manifest.to_str().unwrap(),
        "--uniform",
        "--codec",
        "order0_ac",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(out.join("pooling.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "factor,mean_L_order0_ac,mean_nll_bpd");
    assert_eq!(lines.len(), 7);
    let factors: Vec<usize> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(factors, vec![1, 2, 4, 8, 16, 32]);

    // deterministic across runs
    let out2 = dir.path().join("pool2");
    run_ok(ood().args([
        "pooling",
        "--manifest",
        manifest.to_str().unwrap(),
        "--uniform",
        "--codec",
        "order0_ac",
        "--out-dir",
        out2.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(out.join("pooling.csv")).unwrap(),
        std::fs::read(out2.join("pooling.csv")).unwrap()
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "[global]\nseed = 7\nout_dir = \"{}\"\n\n[synth]\nkind = \"noise\"\nn = 4\n",
            dir.path().join("from-config").display()
        ),
    )
    .unwrap();

    // everything from the config file
    run_ok(ood().args(["synth", "--config", config.to_str().unwrap()]));
    assert!(dir.path().join("from-config/manifest.csv").exists());
    assert!(dir.path().join("from-config/noise_00003.oodt").exists());

    // the flag overrides the config's n
    let flag_dir = dir.path().join("flagged");
    run_ok(ood().args([
        "synth",
        "--config",
        config.to_str().unwrap(),
        "-n",
        "2",
        "--out-dir",
        flag_dir.to_str().unwrap(),
    ]));
    assert!(flag_dir.join("noise_00001.oodt").exists());
    assert!(!flag_dir.join("noise_00002.oodt").exists());

    // config seed must equal an explicit --seed 7 run
    let explicit = dir.path().join("explicit");
    run_ok(ood().args([
        "synth", "noise", "-n", "4", "--seed", "7", "--out-dir",
        explicit.to_str().unwrap(),
    ]));
    assert_eq!(
        std::fs::read(dir.path().join("from-config/noise_00000.oodt")).unwrap(),
        std::fs::read(explicit.join("noise_00000.oodt")).unwrap()
    );

    let bad_config = dir.path().join("bad.toml");
    std::fs::write(&bad_config, "[global]\nseeed = 1\n").unwrap();
    run_err(ood().args(["synth", "noise", "-n", "1", "--config", bad_config.to_str().unwrap()]));
}

#[test]
fn run_manifest_records_config_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = synth(dir.path(), "noise", 3, 71);
    let out = dir.path().join("cx");
    run_ok(ood().args([
        "complexity",
        "--manifest",
        manifest.to_str().unwrap(),
        "--codec",
        "order0_ac",
        "--out-dir",
        out.to_str().unwrap(),
    ]));
    let manifest_json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest_json["command"], "complexity");
    assert_eq!(manifest_json["config"]["codecs"][0], "order0_ac");
    let digests = manifest_json["input_digests"].as_object().unwrap();
    assert_eq!(digests.len(), 1);
    let digest = digests.values().next().unwrap().as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(manifest_json["outputs"][0]
        .as_str()
        .unwrap()
        .ends_with("complexity.csv"));
}
