use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Microphone coordinates in meters, relative to the array center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub name: String,
    pub positions: Vec<Point>,
}

impl ArrayGeometry {
    pub fn new(name: impl Into<String>, positions: Vec<Point>) -> Result<Self> {
        let geometry = Self {
            name: name.into(),
            positions,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return Err(Error::Config(format!("array '{}' has no microphones", self.name)));
        }
        for (i, a) in self.positions.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("array '{}' has a non-finite position", self.name)));
            }
            for b in &self.positions[i + 1..] {
                if distance(a, b) < 1e-6 {
                    return Err(Error::Config(format!(
                        "array '{}' has coincident microphones",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_mics(&self) -> usize {
        self.positions.len()
    }

    /// Largest distance from the array center to a microphone.
    pub fn radius(&self) -> f64 {
        self.positions
            .iter()
            .map(|p| distance(p, &[0.0; 3]))
            .fold(0.0, f64::max)
    }

    pub fn circular(name: &str, count: usize, radius: f64) -> Self {
        let positions = (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                [radius * a.cos(), radius * a.sin(), 0.0]
            })
            .collect();
        Self {
            name: name.to_string(),
            positions,
        }
    }

    pub fn linear(name: &str, count: usize, pitch: f64) -> Self {
        let offset = 0.5 * (count as f64 - 1.0) * pitch;
        let positions = (0..count).map(|i| [i as f64 * pitch - offset, 0.0, 0.0]).collect();
        Self {
            name: name.to_string(),
            positions,
        }
    }

    pub fn square(name: &str, side: f64) -> Self {
        let h = side / 2.0;
        Self {
            name: name.to_string(),
            positions: vec![[-h, -h, 0.0], [h, -h, 0.0], [h, h, 0.0], [-h, h, 0.0]],
        }
    }

    /// Built-in arrays used when no custom geometry is configured.
    pub fn catalog() -> Vec<Self> {
        vec![
            Self::circular("circular-4", 4, 0.05),
            Self::circular("circular-8", 8, 0.05),
            Self::linear("linear-4", 4, 0.04),
            Self::square("square-4", 0.05),
        ]
    }
}

/// Placement of an array in room coordinates: translation plus rotation about z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayPose {
    pub center: Point,
    pub azimuth: f64,
}

impl ArrayPose {
    pub fn place(&self, local: &Point) -> Point {
        let (s, c) = self.azimuth.sin_cos();
        [
            self.center[0] + c * local[0] - s * local[1],
            self.center[1] + s * local[0] + c * local[1],
            self.center[2] + local[2],
        ]
    }

    pub fn microphones(&self, geometry: &ArrayGeometry) -> Vec<Point> {
        geometry.positions.iter().map(|p| self.place(p)).collect()
    }
}
