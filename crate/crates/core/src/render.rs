//! Synthetic floor-view renderer.
//!
//! Every pixel's viewing ray is intersected with the floor plane; the floor
//! point is painted as line or floor depending on its distance to the
//! nearest marking. Rays that never reach the floor get the background color.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
pub use crate::image::ImageBuffer;
use crate::geometry::{CameraRig, CourtSpec, Point2, Pose2D};
use crate::preprocess::WhiteMaskConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderStyle {
    pub floor_color: [u8; 3],
    pub line_color: [u8; 3],
    /// Fill for rays at or above the horizon.
    pub background_color: [u8; 3],
    /// Standard deviation of additive per-channel Gaussian noise, in gray levels.
    pub noise_std: f64,
    pub antialias_samples: usize,
}

impl Default for RenderStyle {
    fn default() -> Self {
        RenderStyle {
            floor_color: [45, 110, 60],
            line_color: [255, 255, 255],
            background_color: [20, 20, 20],
            noise_std: 0.0,
            antialias_samples: 4,
        }
    }
}

impl RenderStyle {
    /// Checks the style against the white mask that will consume its frames.
    pub fn validate(&self, mask: &WhiteMaskConfig) -> Result<()> {
        if self.antialias_samples == 0 {
            return Err(Error::Domain("antialias_samples must be at least 1".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Domain(format!("invalid noise_std {}", self.noise_std)));
        }
        if !mask.is_white(self.line_color) {
            return Err(Error::Domain("line color does not pass the white mask".into()));
        }
        if mask.is_white(self.floor_color) || mask.is_white(self.background_color) {
            return Err(Error::Domain(
                "floor and background colors must fail the white mask".into(),
            ));
        }
        Ok(())
    }
}

/// Sub-pixel sample offsets in `[-0.5, 0.5)^2`: stratified in x, golden-ratio sequence in y.
pub fn sample_offsets(n: usize) -> Vec<Point2> {
    if n <= 1 {
        return vec![[0.0, 0.0]];
    }
    const GOLDEN: f64 = 0.618_033_988_749_894_9;
    (0..n)
        .map(|k| {
            let u = (k as f64 + 0.5) / n as f64;
            let v = ((k as f64 + 0.5) * GOLDEN).fract();
            [u - 0.5, v - 0.5]
        })
        .collect()
}

/// Floor intersection of the viewing ray through `px`, or `None` at/above the horizon.
pub fn backproject_pixel(rig: &CameraRig, pose: &Pose2D, px: Point2) -> Option<Point2> {
    rig.backproject_pixel(pose, px)
}

/// Renders the RGB camera view of the court from `pose`.
pub fn render_view(
    court: &CourtSpec,
    rig: &CameraRig,
    pose: &Pose2D,
    style: &RenderStyle,
    seed: u64,
) -> ImageBuffer {
    let (w, h) = (rig.width, rig.height);
    let mut img = ImageBuffer::rgb(w, h);
    let offsets = sample_offsets(style.antialias_samples);
    let n = offsets.len() as f64;
    let half_line = court.line_width / 2.0;

    img.data_mut()
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(row, line)| {
            for (col, out) in line.chunks_exact_mut(3).enumerate() {
                let mut acc = [0.0f64; 3];
                for off in &offsets {
                    let px = [col as f64 + off[0], row as f64 + off[1]];
                    let color = match rig.backproject_pixel(pose, px) {
                        None => style.background_color,
                        Some(p) if court.markings.iter().any(|m| m.distance(p) <= half_line) => {
                            style.line_color
                        }
                        Some(_) => style.floor_color,
                    };
                    for c in 0..3 {
                        acc[c] += color[c] as f64;
                    }
                }
                for c in 0..3 {
                    out[c] = (acc[c] / n).round() as u8;
                }
            }
        });

    if style.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, style.noise_std).expect("validated noise_std");
        for v in img.data_mut() {
            let noisy = *v as f64 + normal.sample(&mut rng);
            *v = noisy.round().clamp(0.0, 255.0) as u8;
        }
    }
    img
}
