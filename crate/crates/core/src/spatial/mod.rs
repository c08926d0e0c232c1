//! Scene synthesis: rooms, microphone arrays and two point sources.

mod geometry;
mod rir;
mod scene;
mod speech;

pub use geometry::{distance, ArrayGeometry, ArrayPose, Point};
pub use rir::{compute_rir, image_sources, ImageSource, RoomSpec, SINC_HALF_WIDTH};
pub use scene::{render_scene, sample_scene, Scene, SceneConstraints, SceneRender};
pub use speech::{normalize_rms, SpeechSource, SyntheticSpeech, WavCorpus};
