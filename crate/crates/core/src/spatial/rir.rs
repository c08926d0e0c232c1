//! Shoebox room impulse responses via the image-source method.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::geometry::{distance, Point};
use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};

/// Half-width of the windowed-sinc fractional delay kernel (81 taps total).
pub const SINC_HALF_WIDTH: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    /// `(Lx, Ly, Lz)` in meters.
    pub dimensions: Point,
    /// Energy absorption per wall, ordered `x=0, x=Lx, y=0, y=Ly, z=0, z=Lz`.
    pub absorption: [f64; 6],
    pub max_reflection_order: u32,
    /// Meters per second.
    pub speed_of_sound: f64,
}

impl RoomSpec {
    pub fn shoebox(dimensions: Point, absorption: f64, max_reflection_order: u32) -> Self {
        Self {
            dimensions,
            absorption: [absorption; 6],
            max_reflection_order,
            speed_of_sound: 343.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config(format!("room dimensions must be positive, got {:?}", self.dimensions)));
        }
        if self.absorption.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(Error::Config(format!("absorption must lie in (0, 1], got {:?}", self.absorption)));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::Config("speed of sound must be positive".into()));
        }
        Ok(())
    }

    /// Strictly inside the room.
    pub fn contains(&self, p: &Point) -> bool {
        p.iter().zip(&self.dimensions).all(|(v, l)| *v > 0.0 && *v < *l)
    }

    /// Distance from `p` to the nearest wall.
    pub fn wall_clearance(&self, p: &Point) -> f64 {
        p.iter()
            .zip(&self.dimensions)
            .map(|(v, l)| v.min(l - v))
            .fold(f64::INFINITY, f64::min)
    }

    fn reflection_coefficients(&self) -> [f64; 6] {
        self.absorption.map(|a| (1.0 - a).sqrt())
    }
}

/// One mirrored copy of the source as seen from the microphone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point,
    pub order: u32,
    pub distance: f64,
    /// Arrival time in samples (fractional).
    pub delay: f64,
    pub amplitude: f64,
}

fn check_positions(room: &RoomSpec, src: &Point, mic: &Point) -> Result<()> {
    room.validate()?;
    for (what, p) in [("source", src), ("microphone", mic)] {
        if !room.contains(p) {
            return Err(Error::InvalidInput(format!(
                "{what} at {p:?} lies outside the room {:?}",
                room.dimensions
            )));
        }
    }
    if distance(src, mic) < 1e-9 {
        return Err(Error::InvalidInput("source and microphone coincide".into()));
    }
    Ok(())
}

/// Enumerates all images with at most `room.max_reflection_order` reflections.
pub fn image_sources(room: &RoomSpec, src: &Point, mic: &Point, sample_rate: u32) -> Result<Vec<ImageSource>> {
    check_positions(room, src, mic)?;
    let beta = room.reflection_coefficients();
    let max_order = room.max_reflection_order as i64;
    let fs = sample_rate as f64;
    let mut images = Vec::new();
    for parity in 0..8u32 {
        let q = [(parity & 1) as i64, ((parity >> 1) & 1) as i64, ((parity >> 2) & 1) as i64];
        for nx in -max_order..=max_order {
            for ny in -max_order..=max_order {
                for nz in -max_order..=max_order {
                    let n = [nx, ny, nz];
                    // Reflections off the wall at 0 and the wall at L along each axis.
                    let counts: Vec<(u32, u32)> = (0..3)
                        .map(|a| ((n[a] - q[a]).unsigned_abs() as u32, n[a].unsigned_abs() as u32))
                        .collect();
                    let order: u32 = counts.iter().map(|(lo, hi)| lo + hi).sum();
                    if order as i64 > max_order {
                        continue;
                    }
                    let mut position = [0.0; 3];
                    let mut gain = 1.0;
                    for a in 0..3 {
                        let sign = (1 - 2 * q[a]) as f64;
                        position[a] = sign * src[a] + 2.0 * n[a] as f64 * room.dimensions[a];
                        gain *= beta[2 * a].powi(counts[a].0 as i32) * beta[2 * a + 1].powi(counts[a].1 as i32);
                    }
                    let d = distance(&position, mic);
                    images.push(ImageSource {
                        position,
                        order,
                        distance: d,
                        delay: d * fs / room.speed_of_sound,
                        amplitude: gain / (4.0 * PI * d),
                    });
                }
            }
        }
    }
    Ok(images)
}

fn sinc(t: f64) -> f64 {
    if t == 0.0 {
        1.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Adds a windowed-sinc impulse of `amplitude` centered at fractional `delay`.
/// Taps that would fall before sample 0 are dropped.
fn add_fractional_impulse(out: &mut [f64], delay: f64, amplitude: f64) {
    let center = delay.round() as i64;
    let half = SINC_HALF_WIDTH as i64;
    let width = (SINC_HALF_WIDTH + 1) as f64;
    for n in (center - half)..=(center + half) {
        if n < 0 || n as usize >= out.len() {
            continue;
        }
        let t = n as f64 - delay;
        let window = 0.5 * (1.0 + (PI * t / width).cos());
        out[n as usize] += amplitude * sinc(t) * window;
    }
}

/// Impulse response from `src` to `mic`, with length set by the latest arrival.
pub fn compute_rir(room: &RoomSpec, src: &Point, mic: &Point, sample_rate: u32) -> Result<AudioBuffer> {
    let images = image_sources(room, src, mic, sample_rate)?;
    let last = images.iter().map(|im| im.delay).fold(0.0, f64::max);
    let len = last.ceil() as usize + SINC_HALF_WIDTH + 1;
    let mut taps = vec![0.0; len];
    for im in &images {
        add_fractional_impulse(&mut taps, im.delay, im.amplitude);
    }
    AudioBuffer::new(taps, sample_rate)
}
