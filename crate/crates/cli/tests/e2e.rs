//! End-to-end smoke tests driving the compiled binary: data generation is
//! byte-identical per seed, and the gen-data -> train -> fit-points -> eval
//! pipeline completes with every report column populated.

use std::path::{Path, PathBuf};
use std::process::Command;

fn latsurf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latsurf"))
}

fn run(args: &[&str]) -> std::process::Output {
    let out = latsurf().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .filter(|p| p.is_file())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn gen_data_is_byte_identical_per_seed() {
    let base = std::env::temp_dir().join("latsurf_e2e_gendata");
    let _ = std::fs::remove_dir_all(&base);
    let run_a = base.join("a");
    let run_b = base.join("b");
    for out in [&run_a, &run_b] {
        run(&[
            "gen-data",
            "--synthetic",
            "5",
            "--seed",
            "7",
            "--subdivision",
            "2",
            "--points-per-shape",
            "100",
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let a = dir_bytes(&run_a);
    let b = dir_bytes(&run_b);
    assert_eq!(a.len(), b.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in a.iter().zip(&b) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "{name_a} differs between runs");
    }
    // Config echo exists.
    assert!(a.iter().any(|(n, _)| n == "config.json"));
}

#[test]
fn pipeline_smoke_gen_train_fit_eval() {
    let base = std::env::temp_dir().join("latsurf_e2e_pipeline");
    let _ = std::fs::remove_dir_all(&base);
    let data = base.join("data");
    let model = base.join("model");
    let fit = base.join("fit");
    let preds = base.join("preds");
    std::fs::create_dir_all(&preds).unwrap();

    run(&[
        "gen-data",
        "--synthetic",
        "3",
        "--seed",
        "11",
        "--subdivision",
        "2",
        "--points-per-shape",
        "400",
        "--out",
        data.to_str().unwrap(),
    ]);

    run(&[
        "train",
        "--corpus",
        data.to_str().unwrap(),
        "--seed",
        "11",
        "--epochs",
        "4",
        "--latent-dim",
        "8",
        "--subdivision",
        "1",
        "--points-per-step",
        "150",
        "--out",
        model.to_str().unwrap(),
    ]);
    let checkpoint = model.join("checkpoint.ckpt");
    assert!(checkpoint.exists());
    assert!(model.join("train_log.json").exists());
    assert!(model.join("config.json").exists());

    // Header echo through the info subcommand.
    let info = run(&["info", checkpoint.to_str().unwrap()]);
    let info_text = String::from_utf8_lossy(&info.stdout);
    assert!(info_text.contains("latent_dim=8"), "{info_text}");
    assert!(info_text.contains("template_subdivision=1"), "{info_text}");
    assert!(info_text.contains("shape_count=3"), "{info_text}");

    run(&[
        "fit-points",
        "--checkpoint",
        checkpoint.to_str().unwrap(),
        "--points",
        data.join("synth_000_points.ply").to_str().unwrap(),
        "--seed",
        "11",
        "--steps",
        "6",
        "--subdivision",
        "1",
        "--pred-samples",
        "150",
        "--no-remesh",
        "--out",
        fit.to_str().unwrap(),
    ]);
    assert!(fit.join("fitted.obj").exists());
    assert!(fit.join("metrics.json").exists());
    assert!(fit.join("trace.csv").exists());
    let trace = std::fs::read_to_string(fit.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 7, "header plus six steps");

    // Evaluate the fit against the ground-truth mesh it came from.
    std::fs::copy(fit.join("fitted.obj"), preds.join("synth_000.obj")).unwrap();
    let report = base.join("report.json");
    run(&[
        "eval",
        "--pred",
        preds.to_str().unwrap(),
        "--gt",
        data.to_str().unwrap(),
        "--samples",
        "2000",
        "--seed",
        "11",
        "--out",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for column in ["chamfer", "hausdorff", "f_at_1", "f_at_2", "quality", "self_int_pct"] {
        assert!(
            parsed["mean"][column].is_number(),
            "column {column} missing from report"
        );
    }
    assert!(report.with_extension("csv").exists());
}

#[test]
fn remesh_subcommand_round_trips_through_obj() {
    let base = std::env::temp_dir().join("latsurf_e2e_remesh");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let input = base.join("in.obj");
    let sphere = latsurf::geometry::icosphere(2).unwrap();
    latsurf::geometry::write_obj(&sphere.scaled(0.8), &input).unwrap();
    let output = base.join("out.obj");
    run(&[
        "remesh",
        "--input",
        input.to_str().unwrap(),
        "--iterations",
        "2",
        "--out",
        output.to_str().unwrap(),
    ]);
    let out = latsurf::geometry::read_obj(&output).unwrap();
    assert!(out.is_watertight());
    assert_eq!(out.euler_characteristic(), 2);
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let base = std::env::temp_dir().join("latsurf_e2e_config");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).unwrap();
    let config_path = base.join("run.json");
    std::fs::write(
        &config_path,
        r#"{"seed": 5, "train": {"epochs": 2, "latent_dim": 8, "template_subdivision": 1, "points_per_step": 120}}"#,
    )
    .unwrap();
    let data = base.join("data");
    run(&[
        "gen-data",
        "--synthetic",
        "2",
        "--seed",
        "5",
        "--subdivision",
        "2",
        "--out",
        data.to_str().unwrap(),
    ]);

    let from_file = base.join("from_file");
    run(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--corpus",
        data.to_str().unwrap(),
        "--out",
        from_file.to_str().unwrap(),
    ]);
    let log: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(from_file.join("train_log.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 2);

    // A flag overrides the file value.
    let overridden = base.join("overridden");
    run(&[
        "train",
        "--config",
        config_path.to_str().unwrap(),
        "--corpus",
        data.to_str().unwrap(),
        "--epochs",
        "3",
        "--out",
        overridden.to_str().unwrap(),
    ]);
    let log: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(overridden.join("train_log.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(log["epochs"].as_array().unwrap().len(), 3);
    // The echoed effective config reflects the override.
    let echo: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(overridden.join("config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(echo["train"]["epochs"], 3);
}

#[test]
fn missing_file_produces_machine_readable_error() {
    let out = latsurf()
        .args(["info", "/nonexistent/model.ckpt"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or("");
    let parsed: serde_json::Value =
        serde_json::from_str(line).expect("stderr ends with a JSON error line");
    assert!(parsed["error"].is_string());
}
