//! Camera and image ingestion, ray generation and synthetic dynamic scenes.

mod camera;
mod sequence;
mod synth;
mod transforms;

pub use camera::Camera;
pub use sequence::{Frame, FrameSequence, ImageReader, PngReader};
pub use synth::{
    generate_synthetic_sequence, render_reference_view, Motion, SceneObject, SceneSpec, Shape,
};
pub use transforms::{load_transforms, write_transforms, TRANSFORMS_FILE};
