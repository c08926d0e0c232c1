use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use realfft::num_complex::Complex64;
use realfft::RealFftPlanner;
use serde::{Deserialize, Serialize};

use super::geometry::{distance, ArrayGeometry, ArrayPose, Point};
use super::rir::{compute_rir, RoomSpec};
use crate::dsp::{AudioBuffer, MultichannelAudio};
use crate::error::{Error, Result};

/// Ranges from which scenes are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConstraints {
    pub sample_rate: u32,
    pub room_min: Point,
    pub room_max: Point,
    pub absorption: f64,
    pub max_reflection_order: u32,
    pub speed_of_sound: f64,
    /// Upper bound on the distance between the array center and each source.
    pub max_source_distance: f64,
    pub min_source_distance: f64,
    /// Minimum distance between the two sources.
    pub min_source_separation: f64,
    /// Minimum clearance between any wall and the sources or microphones.
    pub wall_margin: f64,
    pub array_height: (f64, f64),
    pub source_height: (f64, f64),
    pub interf_gain_db: (f64, f64),
    pub max_attempts: usize,
}

impl Default for SceneConstraints {
    fn default() -> Self {
        Self {
            sample_rate: 16_000,
            room_min: [4.0, 4.0, 2.5],
            room_max: [10.0, 10.0, 4.0],
            absorption: 0.7,
            max_reflection_order: 6,
            speed_of_sound: 343.0,
            max_source_distance: 3.0,
            min_source_distance: 0.5,
            min_source_separation: 0.5,
            wall_margin: 0.5,
            array_height: (0.8, 1.8),
            source_height: (1.2, 1.9),
            interf_gain_db: (-20.0, 0.0),
            max_attempts: 10_000,
        }
    }
}

impl SceneConstraints {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("scene constraints: {msg}")));
        if self.sample_rate == 0 {
            return bad("sample rate must be positive");
        }
        for a in 0..3 {
            if !(self.room_min[a] > 0.0 && self.room_min[a] <= self.room_max[a]) {
                return bad("room bounds must satisfy 0 < min <= max");
            }
        }
        if !(self.absorption > 0.0 && self.absorption <= 1.0) {
            return bad("absorption must lie in (0, 1]");
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return bad("speed of sound must be positive");
        }
        if !(self.min_source_distance >= 0.0 && self.min_source_distance < self.max_source_distance) {
            return bad("source distance range is empty");
        }
        let (g_lo, g_hi) = self.interf_gain_db;
        if !(g_lo <= g_hi && g_lo.is_finite() && g_hi.is_finite()) {
            return bad("interference gain range is empty");
        }
        if self.array_height.0 > self.array_height.1 || self.source_height.0 > self.source_height.1 {
            return bad("height ranges must satisfy min <= max");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub room: RoomSpec,
    pub array: ArrayGeometry,
    pub pose: ArrayPose,
    pub target_pos: Point,
    pub interf_pos: Point,
    pub interf_gain_db: f64,
    pub rng_seed: u64,
    pub sample_rate: u32,
}

impl Scene {
    pub fn microphones(&self) -> Vec<Point> {
        self.pose.microphones(&self.array)
    }

    pub fn num_mics(&self) -> usize {
        self.array.num_mics()
    }

    pub fn interf_gain(&self) -> f64 {
        10f64.powf(self.interf_gain_db / 20.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.room.validate()?;
        self.array.validate()?;
        for p in self.microphones().iter().chain([&self.target_pos, &self.interf_pos]) {
            if !self.room.contains(p) {
                return Err(Error::InvalidInput(format!("position {p:?} lies outside the room")));
            }
        }
        Ok(())
    }

    /// Seeds for the target and interference utterances of this scene.
    pub fn utterance_seeds(&self) -> (u64, u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed ^ 0x5eed_5eed_5eed_5eed);
        (rng.random(), rng.random())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Draws a scene deterministically from `seed`, rejecting placements that
/// violate the distance and inside-room constraints.
pub fn sample_scene(seed: u64, catalog: &[ArrayGeometry], constraints: &SceneConstraints) -> Result<Scene> {
    if catalog.is_empty() {
        return Err(Error::InvalidInput("array catalog is empty".into()));
    }
    constraints.validate()?;
    let c = constraints;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let array = catalog[rng.random_range(0..catalog.len())].clone();
    let interf_gain_db = uniform(&mut rng, c.interf_gain_db.0, c.interf_gain_db.1);

    for _ in 0..c.max_attempts {
        let dims = [0, 1, 2].map(|a| uniform(&mut rng, c.room_min[a], c.room_max[a]));
        let room = RoomSpec {
            dimensions: dims,
            absorption: [c.absorption; 6],
            max_reflection_order: c.max_reflection_order,
            speed_of_sound: c.speed_of_sound,
        };
        let m = c.wall_margin;
        if dims[0] <= 2.0 * m || dims[1] <= 2.0 * m {
            continue;
        }
        let pose = ArrayPose {
            center: [
                uniform(&mut rng, m, dims[0] - m),
                uniform(&mut rng, m, dims[1] - m),
                uniform(&mut rng, c.array_height.0, c.array_height.1),
            ],
            azimuth: uniform(&mut rng, 0.0, std::f64::consts::TAU),
        };
        if pose.microphones(&array).iter().any(|p| room.wall_clearance(p) < m) {
            continue;
        }
        let draw_source = |rng: &mut ChaCha8Rng| -> Option<Point> {
            let p = [
                uniform(rng, m, dims[0] - m),
                uniform(rng, m, dims[1] - m),
                uniform(rng, c.source_height.0, c.source_height.1),
            ];
            let d = distance(&p, &pose.center);
            (room.wall_clearance(&p) >= m && d <= c.max_source_distance && d >= c.min_source_distance).then_some(p)
        };
        let Some(target_pos) = draw_source(&mut rng) else { continue };
        let Some(interf_pos) = draw_source(&mut rng) else { continue };
        if distance(&target_pos, &interf_pos) < c.min_source_separation {
            continue;
        }
        return Ok(Scene {
            room,
            array,
            pose,
            target_pos,
            interf_pos,
            interf_gain_db,
            rng_seed: seed,
            sample_rate: c.sample_rate,
        });
    }
    Err(Error::ConstraintUnsatisfiable {
        what: "scene placement".into(),
        attempts: c.max_attempts,
    })
}

/// Microphone signals plus the per-source images they are the sum of.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRender {
    pub mixture: MultichannelAudio,
    pub target_image: MultichannelAudio,
    pub interf_image: MultichannelAudio,
}

/// FFT convolution of one signal with several impulse responses, truncated
/// to the signal length.
struct Convolver {
    len: usize,
    fft_len: usize,
    spectrum: Vec<Complex64>,
    planner: RealFftPlanner<f64>,
}

impl Convolver {
    fn new(signal: &[f64], max_ir_len: usize) -> Self {
        let len = signal.len();
        let fft_len = (len + max_ir_len).next_power_of_two();
        let mut planner = RealFftPlanner::new();
        let fft = planner.plan_fft_forward(fft_len);
        let mut input = fft.make_input_vec();
        input[..len].copy_from_slice(signal);
        let mut spectrum = fft.make_output_vec();
        fft.process(&mut input, &mut spectrum).expect("plan sizes");
        Self {
            len,
            fft_len,
            spectrum,
            planner,
        }
    }

    fn apply(&mut self, ir: &[f64], gain: f64) -> Vec<f64> {
        let forward = self.planner.plan_fft_forward(self.fft_len);
        let inverse = self.planner.plan_fft_inverse(self.fft_len);
        let mut input = forward.make_input_vec();
        input[..ir.len()].copy_from_slice(ir);
        let mut h = forward.make_output_vec();
        forward.process(&mut input, &mut h).expect("plan sizes");
        for (a, b) in h.iter_mut().zip(&self.spectrum) {
            *a *= b;
        }
        h[0].im = 0.0;
        h[self.fft_len / 2].im = 0.0;
        let mut out = inverse.make_output_vec();
        inverse.process(&mut h, &mut out).expect("plan sizes");
        let scale = gain / self.fft_len as f64;
        out.truncate(self.len);
        out.iter_mut().for_each(|v| *v *= scale);
        out
    }
}

fn image(
    scene: &Scene,
    source: &AudioBuffer,
    position: &Point,
    len: usize,
    gain: f64,
) -> Result<MultichannelAudio> {
    let fs = scene.sample_rate;
    let rirs = scene
        .microphones()
        .iter()
        .map(|mic| compute_rir(&scene.room, position, mic, fs))
        .collect::<Result<Vec<_>>>()?;
    let mut padded = source.samples().to_vec();
    padded.resize(len, 0.0);
    let max_ir = rirs.iter().map(AudioBuffer::len).max().unwrap_or(1);
    let mut conv = Convolver::new(&padded, max_ir);
    let channels = rirs
        .iter()
        .map(|h| AudioBuffer::new(conv.apply(h.samples(), gain), fs))
        .collect::<Result<Vec<_>>>()?;
    MultichannelAudio::new(channels)
}

/// Convolves both sources with their room responses and mixes them. The
/// interference image carries the scene gain; there is no sensor noise.
pub fn render_scene(scene: &Scene, target: &AudioBuffer, interf: &AudioBuffer) -> Result<SceneRender> {
    scene.validate()?;
    for src in [target, interf] {
        if src.sample_rate() != scene.sample_rate {
            return Err(Error::SampleRateMismatch {
                expected: scene.sample_rate,
                found: src.sample_rate(),
            });
        }
    }
    let len = target.len().max(interf.len());
    let target_image = image(scene, target, &scene.target_pos, len, 1.0)?;
    let interf_image = image(scene, interf, &scene.interf_pos, len, scene.interf_gain())?;
    let mixture = target_image
        .channels()
        .iter()
        .zip(interf_image.channels())
        .map(|(s, b)| {
            let sum = s.samples().iter().zip(b.samples()).map(|(x, y)| x + y).collect();
            AudioBuffer::new(sum, scene.sample_rate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SceneRender {
        mixture: MultichannelAudio::new(mixture)?,
        target_image,
        interf_image,
    })
}
