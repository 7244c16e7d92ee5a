use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_particle-field"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SPEC: &str = r#"{
    "objects": [{"shape": "sphere", "center": [0, 0, 0], "size": 0.2, "albedo": [0.9, 0.4, 0.1]}],
    "motion": {"type": "translate", "cm_per_frame": [1, 0, 0]},
    "frames": 2, "train_cameras": 3, "eval_cameras": 2, "width": 12, "height": 10
}"#;

const SMALL_CONFIG: &str = r#"{
    "particles": 300, "warmup_steps": 3, "batch_size": 32,
    "occupancy_resolution": 8, "render": {"samples": 16}
}"#;

fn make_scene(root: &Path) -> std::path::PathBuf {
    let spec = root.join("spec.json");
    fs::write(&spec, SPEC).unwrap();
    let scene = root.join("scene");
    let o = run(&["make-scene", "--spec", spec.to_str().unwrap(), "--out", scene.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    scene
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["make-scene", "train", "render", "eval"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let o = run(&["train", "--out", "x"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--scene"), "{}", stderr(&o));

    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(
        run(&["eval", "--checkpoint", "c", "--scene", "s", "--frame", "0", "--out", "o", "--bogus"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["train", "--scene", "s", "--out", "o", "--mode", "everything"]).status.code(), Some(2));
    let o = bin()
        .env("PARTICLE_FIELD_THREADS", "0")
        .args(["train", "--scene", "s", "--out", "o"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = run(&["train", "--scene", missing.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not found"), "{}", stderr(&o));

    let bad = dir.path().join("bad.pnrf");
    fs::write(&bad, b"PNRF\x07\x00\x00\x00").unwrap();
    let o = run(&["eval", "--checkpoint", bad.to_str().unwrap(), "--scene", "s", "--frame", "0", "--out", "o.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn make_scene_train_render_eval() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let scene = make_scene(root);
    assert!(scene.join("frame_0001/eval/transforms.json").is_file());

    let config = root.join("config.json");
    fs::write(&config, SMALL_CONFIG).unwrap();
    let out = root.join("run");
    let o = bin()
        .env("PARTICLE_FIELD_THREADS", "2")
        .args([
            "train",
            "--scene", scene.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
            "--config", config.to_str().unwrap(),
            "--steps-per-frame", "5",
            "--search-radius", "0.2",
            "--mode", "features_only",
            "--seed", "11",
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    let echo: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["steps_per_frame"], 5);
    assert_eq!(echo["search_radius"], 0.2);
    assert_eq!(echo["mode"], "features_only");
    assert_eq!(echo["seed"], 11);
    assert_eq!(echo["particles"], 300);
    assert_eq!(echo["warmup_steps"], 3);

    let eval = fs::read_to_string(out.join("eval.csv")).unwrap();
    assert_eq!(eval.lines().next(), Some("frame,view,psnr,ssim"));
    assert_eq!(eval.lines().count(), 1 + 2 * 2);
    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 1 + 3 + 5 + 5);

    let checkpoint = out.join("checkpoint.pnrf");
    let camera = root.join("camera.json");
    fs::write(
        &camera,
        r#"{"width": 9, "height": 7, "camera_angle_x": 0.7,
            "transform_matrix": [[1,0,0,0.5],[0,1,0,0.5],[0,0,1,2.5],[0,0,0,1]]}"#,
    )
    .unwrap();
    let png = root.join("view.png");
    let o = run(&["render", "--checkpoint", checkpoint.to_str().unwrap(), "--camera", camera.to_str().unwrap(), "--out", png.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let img = particle_field::Image::load_png(&png).unwrap();
    assert_eq!((img.width, img.height), (9, 7));

    let csv = root.join("frame1.csv");
    let o = run(&[
        "eval", "--checkpoint", checkpoint.to_str().unwrap(), "--scene", scene.to_str().unwrap(),
        "--frame", "1", "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().count(), 3);
    assert!(rows.lines().skip(1).all(|l| l.starts_with("1,")));

    let o = run(&[
        "eval", "--checkpoint", checkpoint.to_str().unwrap(), "--scene", scene.to_str().unwrap(),
        "--frame", "9", "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
