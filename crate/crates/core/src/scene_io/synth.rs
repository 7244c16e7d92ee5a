//! Analytic dynamic scenes: spheres and boxes under a rigid motion, rendered
//! by an exact ray tracer with Lambertian shading under a headlight.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mat3, Ray, Vec3};
use crate::image::Image;

use super::camera::Camera;
use super::sequence::{frame_dir_name, Frame, FrameSequence};
use super::transforms::write_transforms;

/// Horizontal field of view of generated cameras, in radians.
const CAMERA_ANGLE_X: f64 = 0.6911;
/// Distance of generated cameras from the cube center.
const ORBIT_RADIUS: f64 = 2.0;
const EVAL_ELEVATION_DEG: f64 = 45.0;
/// Normalized scenes fit in `[0.1, 0.9]³`.
const SCENE_EXTENT: f64 = 0.8;
const AMBIENT: f64 = 0.15;
/// Informational spacing of frames in seconds.
const FRAME_INTERVAL: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sphere,
    Box,
}

/// A solid with uniform albedo. `size` is the radius of a sphere or the
/// half edge length of a box, in metres.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub shape: Shape,
    pub center: [f64; 3],
    pub size: f64,
    pub albedo: [f64; 3],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Motion {
    #[default]
    Static,
    /// Constant velocity in centimetres per frame.
    Translate { cm_per_frame: [f64; 3] },
    /// Constant spin about `axis` through `pivot` (default: centroid of the
    /// object centers).
    Rotate {
        degrees_per_frame: f64,
        axis: [f64; 3],
        #[serde(default)]
        pivot: Option<[f64; 3]>,
    },
}

fn white() -> [f64; 3] {
    [1.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub motion: Motion,
    pub frames: usize,
    pub train_cameras: usize,
    pub eval_cameras: usize,
    pub width: u32,
    pub height: u32,
    #[serde(default = "white")]
    pub background: [f64; 3],
}

/// World-to-unit-cube map `p ↦ (p − center)·scale + 0.5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct Normalization {
    center: [f64; 3],
    scale: f64,
}

#[derive(Clone, Copy, Debug)]
struct Posed {
    shape: Shape,
    center: Vec3<f64>,
    size: f64,
    orientation: Mat3<f64>,
    albedo: [f64; 3],
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.to_string()));
        if self.frames == 0 {
            return bad("scene needs at least one frame");
        }
        if self.train_cameras == 0 {
            return bad("scene needs at least one training camera");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image resolution must be at least 1x1");
        }
        for o in &self.objects {
            if !(o.size > 0.0 && o.size.is_finite()) || o.center.iter().any(|v| !v.is_finite()) {
                return bad("object sizes must be positive and centers finite");
            }
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match &self.motion {
            Motion::Static => {}
            Motion::Translate { cm_per_frame } => {
                if !finite(cm_per_frame) {
                    return bad("translation speed must be finite");
                }
            }
            Motion::Rotate {
                degrees_per_frame,
                axis,
                pivot,
            } => {
                if !degrees_per_frame.is_finite() || !finite(axis) {
                    return bad("rotation speed and axis must be finite");
                }
                if Vec3::<f64>::from_f64(*axis).norm() == 0.0 {
                    return bad("rotation axis must be non-zero");
                }
                if pivot.is_some_and(|p| !finite(&p)) {
                    return bad("rotation pivot must be finite");
                }
            }
        }
        Ok(())
    }

    fn pivot(&self) -> Vec3<f64> {
        if let Motion::Rotate { pivot: Some(p), .. } = &self.motion {
            return Vec3::from_f64(*p);
        }
        if self.objects.is_empty() {
            return Vec3::zero();
        }
        let sum = self
            .objects
            .iter()
            .fold(Vec3::zero(), |acc, o| acc + Vec3::from_f64(o.center));
        sum * (1.0 / self.objects.len() as f64)
    }

    /// Objects posed at `frame`, in world coordinates.
    fn posed(&self, frame: usize) -> Vec<Posed> {
        let t = frame as f64;
        let pivot = self.pivot();
        self.objects
            .iter()
            .map(|o| {
                let c = Vec3::from_f64(o.center);
                let (center, orientation) = match &self.motion {
                    Motion::Static => (c, Mat3::identity()),
                    Motion::Translate { cm_per_frame } => {
                        (c + Vec3::from_f64(*cm_per_frame) * (0.01 * t), Mat3::identity())
                    }
                    Motion::Rotate {
                        degrees_per_frame,
                        axis,
                        ..
                    } => {
                        let r = Mat3::from_axis_angle(
                            Vec3::from_f64(*axis),
                            (degrees_per_frame * t).to_radians(),
                        );
                        (r.mul_vec(c - pivot) + pivot, r)
                    }
                };
                Posed {
                    shape: o.shape,
                    center,
                    size: o.size,
                    orientation,
                    albedo: o.albedo,
                }
            })
            .collect()
    }

    fn normalization(&self) -> Normalization {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for frame in 0..self.frames {
            for o in self.posed(frame) {
                let reach = match o.shape {
                    Shape::Sphere => o.size,
                    Shape::Box => o.size * 3f64.sqrt(),
                };
                for k in 0..3 {
                    lo[k] = lo[k].min(o.center[k] - reach);
                    hi[k] = hi[k].max(o.center[k] + reach);
                }
            }
        }
        if !lo[0].is_finite() {
            return Normalization {
                center: [0.5; 3],
                scale: 1.0,
            };
        }
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        Normalization {
            center: [0, 1, 2].map(|k| 0.5 * (lo[k] + hi[k])),
            scale: if extent > SCENE_EXTENT {
                SCENE_EXTENT / extent
            } else {
                1.0
            },
        }
    }
}

impl Normalization {
    fn apply(&self, objects: &[Posed]) -> Vec<Posed> {
        let c = Vec3::from_f64(self.center);
        objects
            .iter()
            .map(|o| Posed {
                center: (o.center - c) * self.scale + Vec3::splat(0.5),
                size: o.size * self.scale,
                ..*o
            })
            .collect()
    }
}

fn hit_sphere(ray: &Ray<f64>, o: &Posed) -> Option<(f64, Vec3<f64>)> {
    let oc = ray.origin - o.center;
    let b = oc.dot(ray.direction);
    let c = oc.norm_squared() - o.size * o.size;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t = if -b - sq > 1e-9 { -b - sq } else { -b + sq };
    (t > 1e-9).then(|| (t, (ray.at(t) - o.center).normalized()))
}

fn hit_box(ray: &Ray<f64>, o: &Posed) -> Option<(f64, Vec3<f64>)> {
    let inv_rot = o.orientation.transpose();
    let local = Ray {
        origin: inv_rot.mul_vec(ray.origin - o.center),
        direction: inv_rot.mul_vec(ray.direction),
    };
    let (t0, t1) = local.box_interval(-o.size, o.size)?;
    let t = if t0 > 1e-9 { t0 } else { t1 };
    if t <= 1e-9 {
        return None;
    }
    let p = local.at(t);
    let axis = (0..3)
        .max_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()))
        .unwrap();
    let mut n = [0.0; 3];
    n[axis] = p[axis].signum();
    Some((t, o.orientation.mul_vec(Vec3::from_f64(n))))
}

fn trace(ray: &Ray<f64>, objects: &[Posed], background: [f64; 3]) -> [f64; 3] {
    let mut best: Option<(f64, Vec3<f64>, [f64; 3])> = None;
    for o in objects {
        let hit = match o.shape {
            Shape::Sphere => hit_sphere(ray, o),
            Shape::Box => hit_box(ray, o),
        };
        if let Some((t, n)) = hit {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, n, o.albedo));
            }
        }
    }
    match best {
        None => background,
        Some((_, n, albedo)) => {
            let lambert = n.dot(-ray.direction).max(0.0);
            albedo.map(|a| a * (AMBIENT + (1.0 - AMBIENT) * lambert))
        }
    }
}

/// Renders the normalized scene of `spec` at `frame` as seen by `camera`.
pub fn render_reference_view(spec: &SceneSpec, frame: usize, camera: &Camera) -> Image {
    let objects = spec.normalization().apply(&spec.posed(frame));
    render_objects(&objects, camera, spec.background)
}

fn render_objects(objects: &[Posed], camera: &Camera, background: [f64; 3]) -> Image {
    let (w, h) = (camera.width, camera.height);
    let rows: Vec<Vec<f32>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .flat_map(|x| {
                    let ray: Ray<f64> = camera.pixel_ray(x, y);
                    trace(&ray, objects, background).map(|v| v as f32)
                })
                .collect()
        })
        .collect();
    Image {
        width: w,
        height: h,
        data: rows.concat(),
    }
}

fn orbit_camera(azimuth: f64, elevation: f64, spec: &SceneSpec) -> Camera {
    let (ce, se) = (elevation.cos(), elevation.sin());
    let eye = [
        0.5 + ORBIT_RADIUS * ce * azimuth.cos(),
        0.5 + ORBIT_RADIUS * ce * azimuth.sin(),
        0.5 + ORBIT_RADIUS * se,
    ];
    Camera::look_at(eye, [0.5; 3], [0.0, 0.0, 1.0], spec.width, spec.height, CAMERA_ANGLE_X)
}

/// Training cameras on a Fibonacci spiral over the upper hemisphere and
/// held-out cameras on a 45° ring between them; `seed` spins both.
fn camera_rig(spec: &SceneSpec, seed: u64) -> (Vec<Camera>, Vec<Camera>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spin: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let n = spec.train_cameras;
    let train = (0..n)
        .map(|k| {
            let z = (k as f64 + 0.5) / n as f64;
            orbit_camera(spin + k as f64 * golden, z.asin(), spec)
        })
        .collect();
    let m = spec.eval_cameras;
    let eval = (0..m)
        .map(|k| {
            let az = spin + std::f64::consts::TAU * (k as f64 + 0.5) / m as f64 + 0.5 * golden;
            orbit_camera(az, EVAL_ELEVATION_DEG.to_radians(), spec)
        })
        .collect();
    (train, eval)
}

fn write_view_set(dir: &Path, cameras: &[Camera], objects: &[Posed], spec: &SceneSpec, time: f64) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::WriteError {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut names = Vec::with_capacity(cameras.len());
    let mut paths = Vec::with_capacity(cameras.len());
    for (k, cam) in cameras.iter().enumerate() {
        let name = format!("r_{k}.png");
        let path = dir.join(&name);
        render_objects(objects, cam, spec.background).save_png(&path)?;
        names.push(name);
        paths.push(path);
    }
    if !cameras.is_empty() {
        write_transforms(dir, cameras, &names, Some(time))?;
    }
    Ok(paths)
}

/// Renders every frame of `spec` under `out` and returns the sequence.
/// Output is a pure function of `(spec, seed)`.
pub fn generate_synthetic_sequence(spec: &SceneSpec, out: &Path, seed: u64) -> Result<FrameSequence> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::WriteError {
        path: out.to_path_buf(),
        reason: e.to_string(),
    })?;
    let norm = spec.normalization();
    let echo = serde_json::json!({ "spec": spec, "seed": seed, "normalization": norm });
    let echo_path = out.join("scene.json");
    fs::write(&echo_path, serde_json::to_string_pretty(&echo)?).map_err(|e| Error::WriteError {
        path: echo_path,
        reason: e.to_string(),
    })?;

    let (train, eval) = camera_rig(spec, seed);
    let mut seq = FrameSequence {
        root: out.to_path_buf(),
        frames: Vec::with_capacity(spec.frames),
        eval_cameras: Vec::with_capacity(spec.frames),
        eval_image_paths: Vec::with_capacity(spec.frames),
    };
    for index in 0..spec.frames {
        let time = index as f64 * FRAME_INTERVAL;
        let objects = norm.apply(&spec.posed(index));
        let dir = out.join(frame_dir_name(index));
        let image_paths = write_view_set(&dir, &train, &objects, spec, time)?;
        let eval_paths = write_view_set(&dir.join("eval"), &eval, &objects, spec, time)?;
        seq.frames.push(Frame {
            index,
            cameras: train.clone(),
            image_paths,
            time,
        });
        seq.eval_cameras.push(eval.clone());
        seq.eval_image_paths.push(eval_paths);
    }
    Ok(seq)
}
