//! `particle-field`: generate synthetic scenes, train online, render and
//! evaluate checkpoints.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use particle_field::render::render_view;
use particle_field::scene_io::{generate_synthetic_sequence, Camera, FrameSequence, PngReader, SceneSpec};
use particle_field::train::{evaluate_frame, run_online_with, save_checkpoint, LoadedFrame, MetricsLog};
use particle_field::{load_checkpoint, Error, TrainConfig, TrainMode, TrainState};

const THREADS_VAR: &str = "PARTICLE_FIELD_THREADS";

#[derive(Parser, Debug)]
#[command(name = "particle-field", version, about = "Online radiance fields on a movable particle encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic dynamic scene from a JSON scene spec.
    MakeScene {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train online over every frame of a scene.
    Train {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON training config; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        search_radius: Option<f64>,
        #[arg(long)]
        steps_per_frame: Option<usize>,
        #[arg(long)]
        warmup_steps: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TrainMode>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Render one view from a checkpoint.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Camera JSON: either the fields of a camera (`width`, `height`,
        /// `focal_x`, `focal_y`, `principal_point`, `pose`) or
        /// `width`, `height`, `camera_angle_x` and `transform_matrix`.
        #[arg(long)]
        camera: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on the held-out views of one frame.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        frame: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_mode(s: &str) -> Result<TrainMode, String> {
    s.parse().map_err(|_| format!("expected one of both, features_only, positions_only; got `{s}`"))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CameraInput {
    Full(Camera),
    Fov {
        width: u32,
        height: u32,
        camera_angle_x: f64,
        transform_matrix: [[f64; 4]; 4],
    },
}

impl CameraInput {
    fn into_camera(self) -> Camera {
        match self {
            Self::Full(c) => c,
            Self::Fov {
                width,
                height,
                camera_angle_x,
                transform_matrix,
            } => Camera::from_fov(width, height, camera_angle_x, transform_matrix),
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    fs::write(path, contents).map_err(|e| Error::WriteError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::WriteError {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::MakeScene { spec, out, seed } => {
            let spec: SceneSpec = read_json(&spec)?;
            let seq = generate_synthetic_sequence(&spec, &out, seed)?;
            println!(
                "wrote {} frames with {} training and {} held-out views to {}",
                seq.len(),
                spec.train_cameras,
                spec.eval_cameras,
                out.display()
            );
        }
        Command::Train {
            scene,
            out,
            config,
            particles,
            search_radius,
            steps_per_frame,
            warmup_steps,
            batch_size,
            mode,
            seed,
        } => {
            let mut cfg = match &config {
                Some(path) => read_json::<TrainConfig>(path)?,
                None => TrainConfig::default(),
            };
            cfg.particles = particles.unwrap_or(cfg.particles);
            cfg.search_radius = search_radius.unwrap_or(cfg.search_radius);
            cfg.steps_per_frame = steps_per_frame.unwrap_or(cfg.steps_per_frame);
            cfg.warmup_steps = warmup_steps.unwrap_or(cfg.warmup_steps);
            cfg.batch_size = batch_size.unwrap_or(cfg.batch_size);
            cfg.mode = mode.unwrap_or(cfg.mode);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.validate()?;

            let seq = FrameSequence::load(&scene)?;
            create_dir(&out)?;
            write_file(&out.join("config.json"), &serde_json::to_string_pretty(&cfg)?)?;
            let mut state = TrainState::<f32>::new(cfg)?;
            let log = run_online_with(&mut state, &seq, &PngReader, |t, s| {
                eprintln!("frame {t} done at step {}", s.step);
                Ok(())
            })?;
            log.write_csv(&out)?;
            save_checkpoint(&state, &out.join("checkpoint.pnrf"))?;
            print_summary(&log, &out);
        }
        Command::Render {
            checkpoint,
            camera,
            out,
        } => {
            let state = load_checkpoint::<f32>(&checkpoint)?;
            let camera = read_json::<CameraInput>(&camera)?.into_camera();
            camera.validate(1e-6)?;
            let image = render_view(&state.field(), &camera, &state.config.render)?;
            image.save_png(&out)?;
            println!("wrote {}x{} image to {}", image.width, image.height, out.display());
        }
        Command::Eval {
            checkpoint,
            scene,
            frame,
            out,
        } => {
            let state = load_checkpoint::<f32>(&checkpoint)?;
            let seq = FrameSequence::load(&scene)?;
            if frame >= seq.len() {
                return Err(Error::NotFound(scene.join(format!("frame_{frame:04}"))));
            }
            let views = LoadedFrame::load(&seq.eval_cameras[frame], &seq.eval_image_paths[frame], &PngReader)?;
            let log = MetricsLog {
                losses: Vec::new(),
                evals: evaluate_frame(&state, frame, &views)?,
            };
            write_file(&out, &log.eval_csv())?;
            for r in &log.evals {
                println!("view {}: psnr {:.2} ssim {:.4}", r.view, r.psnr, r.ssim);
            }
        }
    }
    Ok(())
}

fn print_summary(log: &MetricsLog, out: &Path) {
    let psnr = log.frame_psnr();
    let mean = psnr.iter().copied().filter(|v| v.is_finite()).sum::<f64>() / psnr.len().max(1) as f64;
    println!(
        "{}",
        json!({ "frames": psnr.len(), "mean_psnr": mean, "out": out.display().to_string() })
    );
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
