use std::path::Path;
use std::sync::Mutex;

use particle_field::error::Error;
use particle_field::image::Image;
use particle_field::scene_io::{
    generate_synthetic_sequence, FrameSequence, ImageReader, Motion, PngReader, SceneObject,
    SceneSpec, Shape,
};
use particle_field::train::{
    load_checkpoint, run_online_with, save_checkpoint, LoadedFrame, TrainConfig, TrainMode,
    TrainState,
};

fn scene(root: &Path, motion: Motion, frames: usize) -> FrameSequence {
    let spec = SceneSpec {
        objects: vec![SceneObject { shape: Shape::Sphere, center: [0.0; 3], size: 0.25, albedo: [0.2, 0.5, 0.8] }],
        motion,
        frames,
        train_cameras: 6,
        eval_cameras: 2,
        width: 32,
        height: 32,
        background: [1.0; 3],
    };
    generate_synthetic_sequence(&spec, root, 5).unwrap()
}

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        particles: 3000,
        batch_size: 256,
        warmup_steps: 20,
        occupancy_resolution: 16,
        seed,
        ..TrainConfig::default()
    }
}

fn bits(v: &[f32]) -> Vec<u32> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn positions(state: &TrainState<f32>) -> Vec<u32> {
    state.cloud.positions.iter().flat_map(|p| p.to_array()).map(|x| x.to_bits()).collect()
}

fn velocities(state: &TrainState<f32>) -> Vec<u32> {
    state.cloud.velocities.iter().flat_map(|p| p.to_array()).map(|x| x.to_bits()).collect()
}

#[test]
fn features_only_never_moves_particles() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 1);
    let frame = LoadedFrame::train_views(&seq.frames[0], &PngReader).unwrap();
    let mut state = TrainState::<f32>::new(TrainConfig { mode: TrainMode::FeaturesOnly, ..small_config(1) }).unwrap();
    let (p, v, f) = (positions(&state), velocities(&state), bits(&state.cloud.features));
    for _ in 0..5 {
        state.train_step(&frame.cameras, &frame.images).unwrap();
    }
    assert_eq!(positions(&state), p);
    assert_eq!(velocities(&state), v);
    assert_ne!(bits(&state.cloud.features), f);
}

#[test]
fn positions_only_freezes_features_and_mlp_after_warmup() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 1);
    let frame = LoadedFrame::train_views(&seq.frames[0], &PngReader).unwrap();
    let config = TrainConfig { mode: TrainMode::PositionsOnly, warmup_steps: 3, ..small_config(2) };
    let mut state = TrainState::<f32>::new(config).unwrap();
    let features = bits(&state.cloud.features);
    let initial_params = bits(state.params.as_slice());
    for _ in 0..3 {
        state.train_step(&frame.cameras, &frame.images).unwrap();
    }
    assert!(!state.in_warmup());
    assert_eq!(bits(&state.cloud.features), features);
    let params = bits(state.params.as_slice());
    assert_ne!(params, initial_params, "the MLP trains during warmup");
    let p = positions(&state);
    for _ in 0..3 {
        state.train_step(&frame.cameras, &frame.images).unwrap();
    }
    assert_eq!(bits(&state.cloud.features), features);
    assert_eq!(bits(state.params.as_slice()), params);
    assert_ne!(positions(&state), p);
}

#[test]
fn optimizers_keep_separate_state() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 1);
    let frame = LoadedFrame::train_views(&seq.frames[0], &PngReader).unwrap();
    let config = TrainConfig { mode: TrainMode::PositionsOnly, warmup_steps: 2, ..small_config(3) };
    let mut state = TrainState::<f32>::new(config).unwrap();
    for _ in 0..2 {
        state.train_step(&frame.cameras, &frame.images).unwrap();
    }
    // Warmup stepped the MLP optimizer only.
    assert_eq!(state.mlp_adam.step, 2);
    assert_eq!(state.feature_adam.step, 0);
    assert!(state.feature_adam.first.iter().all(|&v| v == 0.0));
    assert!(state.feature_adam.second.iter().all(|&v| v == 0.0));
    assert_eq!(state.mlp_adam.first.len(), state.params.len());
    assert_eq!(state.feature_adam.first.len(), state.cloud.features.len());

    let mut both = TrainState::<f32>::new(small_config(3)).unwrap();
    both.train_step(&frame.cameras, &frame.images).unwrap();
    let mlp = (bits(&both.mlp_adam.first), bits(&both.mlp_adam.second));
    // After switching to positions_only neither optimizer may move.
    both.config.mode = TrainMode::PositionsOnly;
    both.config.warmup_steps = 0;
    let feat = (bits(&both.feature_adam.first), bits(&both.feature_adam.second));
    both.train_step(&frame.cameras, &frame.images).unwrap();
    assert_eq!((bits(&both.mlp_adam.first), bits(&both.mlp_adam.second)), mlp);
    assert_eq!((bits(&both.feature_adam.first), bits(&both.feature_adam.second)), feat);
}

#[test]
fn loss_decreases_over_500_steps() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 1);
    let frame = LoadedFrame::train_views(&seq.frames[0], &PngReader).unwrap();
    let mut ratios = Vec::new();
    for seed in 0..5 {
        let mut state = TrainState::<f32>::new(small_config(seed)).unwrap();
        let losses: Vec<f64> = (0..=500)
            .map(|_| state.train_step(&frame.cameras, &frame.images).unwrap() as f64)
            .collect();
        let early = losses[..10].iter().sum::<f64>();
        let late = losses[491..].iter().sum::<f64>();
        ratios.push(late / early);
    }
    ratios.sort_by(f64::total_cmp);
    assert!(ratios[2] < 1.0, "median late/early loss ratio {ratios:?}");
}

#[test]
fn checkpoint_files_round_trip_and_reject_damage() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(&dir.path().join("scene"), Motion::Static, 1);
    let frame = LoadedFrame::train_views(&seq.frames[0], &PngReader).unwrap();
    let mut state = TrainState::<f32>::new(small_config(4)).unwrap();
    for _ in 0..3 {
        state.train_step(&frame.cameras, &frame.images).unwrap();
    }
    let a = dir.path().join("a.pnrf");
    let b = dir.path().join("b.pnrf");
    save_checkpoint(&state, &a).unwrap();
    let loaded = load_checkpoint::<f32>(&a).unwrap();
    save_checkpoint(&loaded, &b).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    assert_eq!(positions(&loaded), positions(&state));
    assert_eq!(bits(loaded.params.as_slice()), bits(state.params.as_slice()));
    assert_eq!(loaded.step, 3);

    let mut flipped = bytes.clone();
    flipped[4] ^= 0xff;
    std::fs::write(&b, &flipped).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&b), Err(Error::IncompatibleCheckpoint(_))));

    std::fs::write(&b, &bytes[..bytes.len() / 2]).unwrap();
    assert!(matches!(load_checkpoint::<f32>(&b), Err(Error::CorruptCheckpoint(_))));

    // A double-precision reader refuses a single-precision file.
    assert!(matches!(load_checkpoint::<f64>(&a), Err(Error::IncompatibleCheckpoint(_))));
    assert!(matches!(load_checkpoint::<f32>(&dir.path().join("missing.pnrf")), Err(Error::NotFound(_))));
}

#[derive(Debug, PartialEq)]
enum Event {
    Read(usize),
    Done(usize),
}

struct Recorder<'a> {
    events: &'a Mutex<Vec<Event>>,
}

impl ImageReader for Recorder<'_> {
    fn read(&self, path: &Path) -> particle_field::error::Result<Image> {
        let frame = path
            .components()
            .filter_map(|c| c.as_os_str().to_str()?.strip_prefix("frame_")?.parse().ok())
            .next()
            .expect("frame directory in path");
        self.events.lock().unwrap().push(Event::Read(frame));
        PngReader.read(path)
    }
}

#[test]
fn online_training_reads_frames_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Translate { cm_per_frame: [1.0, 0.0, 0.0] }, 6);
    let events = Mutex::new(Vec::new());
    let mut state = TrainState::<f32>::new(TrainConfig { steps_per_frame: 2, ..small_config(5) }).unwrap();
    let log = run_online_with(&mut state, &seq, &Recorder { events: &events }, |frame, _| {
        events.lock().unwrap().push(Event::Done(frame));
        Ok(())
    })
    .unwrap();
    let events = events.into_inner().unwrap();
    let mut current = 0;
    for event in &events {
        match *event {
            Event::Read(f) => assert_eq!(f, current, "read frame {f} while on frame {current}"),
            Event::Done(f) => {
                assert_eq!(f, current);
                current += 1;
            }
        }
    }
    assert_eq!(current, 6);
    assert_eq!(log.evals.len(), 6 * 2);
    assert_eq!(log.losses.len(), 20 + 6 * 2);
    assert_eq!(state.step, 32);
    assert!(log.evals.windows(2).all(|w| w[0].frame <= w[1].frame));
}

#[test]
fn online_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Translate { cm_per_frame: [0.0, 1.0, 0.0] }, 3);
    let run = || {
        let mut state = TrainState::<f32>::new(small_config(6)).unwrap();
        let log = run_online_with(&mut state, &seq, &PngReader, |_, _| Ok(())).unwrap();
        (log.loss_csv(), log.eval_csv(), positions(&state))
    };
    assert_eq!(run(), run());
}

#[test]
fn static_sequence_quality_does_not_regress() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 20);
    let mut state = TrainState::<f32>::new(TrainConfig { warmup_steps: 100, ..small_config(7) }).unwrap();
    let log = run_online_with(&mut state, &seq, &PngReader, |_, _| Ok(())).unwrap();
    assert_eq!(log.evals.len(), 20 * 2);
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
    };
    let psnr = log.frame_psnr();
    let first = median(psnr[..10].to_vec());
    let second = median(psnr[10..].to_vec());
    assert!(second >= first, "median PSNR {first:.3} then {second:.3}");
}

#[test]
fn missing_frame_data_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let seq = scene(dir.path(), Motion::Static, 2);
    std::fs::remove_file(&seq.frames[1].image_paths[0]).unwrap();
    let mut state = TrainState::<f32>::new(small_config(8)).unwrap();
    let err = run_online_with(&mut state, &seq, &PngReader, |_, _| Ok(())).unwrap_err();
    assert!(matches!(err, Error::NotFound(_)), "{err}");
}
