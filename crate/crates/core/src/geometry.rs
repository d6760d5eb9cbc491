//! Court frame, line markings and camera pose math.
//!
//! The court frame has its origin at the court center, `x` along the long
//! (15 m) axis and `y` along the short (8 m) axis, `z` up. The robot frame is
//! `x` forward, `y` left. The camera frame follows the usual pinhole
//! convention: `x` right, `y` down, `z` along the optical axis. Pixel
//! coordinates are continuous with integer values at pixel centers.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::textfmt::{parse_args, token_lines};

/// Inset applied to the court rectangle when sampling robot positions.
pub const POSE_MARGIN: f64 = 0.3;

pub type Point2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LineMark {
    Segment {
        p0: Point2,
        p1: Point2,
    },
    /// Counter-clockwise arc from `start_angle` to `end_angle`.
    Arc {
        center: Point2,
        radius: f64,
        start_angle: f64,
        end_angle: f64,
    },
}

impl LineMark {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LineMark::Segment { p0, p1 } => {
                if !(p0.iter().chain(&p1).all(|v| v.is_finite())) {
                    return Err(Error::Domain("segment endpoints must be finite".into()));
                }
                if p0 == p1 {
                    return Err(Error::Domain("segment endpoints must be distinct".into()));
                }
            }
            LineMark::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                if !(center.iter().all(|v| v.is_finite()) && radius.is_finite() && radius > 0.0) {
                    return Err(Error::Domain("arc radius must be positive".into()));
                }
                let span = end_angle - start_angle;
                if !(span > 0.0 && span <= TAU + 1e-12) {
                    return Err(Error::Domain(format!(
                        "arc angle span {span} outside (0, 2pi]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Euclidean distance from `p` to this marking's centerline.
    pub fn distance(&self, p: Point2) -> f64 {
        match *self {
            LineMark::Segment { p0, p1 } => {
                let d = [p1[0] - p0[0], p1[1] - p0[1]];
                let w = [p[0] - p0[0], p[1] - p0[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let t = ((w[0] * d[0] + w[1] * d[1]) / len2).clamp(0.0, 1.0);
                let q = [p0[0] + t * d[0], p0[1] + t * d[1]];
                (p[0] - q[0]).hypot(p[1] - q[1])
            }
            LineMark::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => {
                let rel = [p[0] - center[0], p[1] - center[1]];
                let rho = rel[0].hypot(rel[1]);
                let span = end_angle - start_angle;
                if rho == 0.0 || span >= TAU {
                    return (rho - radius).abs();
                }
                let theta = rel[1].atan2(rel[0]);
                if (theta - start_angle).rem_euclid(TAU) <= span {
                    (rho - radius).abs()
                } else {
                    let [a, b] = self.arc_endpoints();
                    (p[0] - a[0])
                        .hypot(p[1] - a[1])
                        .min((p[0] - b[0]).hypot(p[1] - b[1]))
                }
            }
        }
    }

    fn arc_endpoints(&self) -> [Point2; 2] {
        match *self {
            LineMark::Arc {
                center,
                radius,
                start_angle,
                end_angle,
            } => [
                [
                    center[0] + radius * start_angle.cos(),
                    center[1] + radius * start_angle.sin(),
                ],
                [
                    center[0] + radius * end_angle.cos(),
                    center[1] + radius * end_angle.sin(),
                ],
            ],
            LineMark::Segment { p0, p1 } => [p0, p1],
        }
    }

    /// Axis-aligned bounding box `(min, max)` of the centerline.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut pts = self.arc_endpoints().to_vec();
        if let LineMark::Arc {
            center,
            radius,
            start_angle,
            end_angle,
        } = *self
        {
            let span = end_angle - start_angle;
            for k in 0..4 {
                let ang = k as f64 * PI / 2.0;
                if (ang - start_angle).rem_euclid(TAU) <= span {
                    pts.push([center[0] + radius * ang.cos(), center[1] + radius * ang.sin()]);
                }
            }
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in pts {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Evenly spaced points along the centerline, endpoints included.
    pub fn sample_points(&self, n: usize) -> Vec<Point2> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match *self {
                    LineMark::Segment { p0, p1 } => {
                        [p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1])]
                    }
                    LineMark::Arc {
                        center,
                        radius,
                        start_angle,
                        end_angle,
                    } => {
                        let a = start_angle + t * (end_angle - start_angle);
                        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                    }
                }
            })
            .collect()
    }
}

/// Metric description of the court and its painted lines.
#[derive(Debug, Clone, PartialEq)]
pub struct CourtSpec {
    pub length: f64,
    pub width: f64,
    pub line_width: f64,
    pub markings: Vec<LineMark>,
}

impl Default for CourtSpec {
    /// Boundary, half-court line, center circle and two three-point arcs.
    fn default() -> Self {
        let (hl, hw) = (7.5, 4.0);
        let seg = |x0, y0, x1, y1| LineMark::Segment {
            p0: [x0, y0],
            p1: [x1, y1],
        };
        let arc_center = hl - 1.575;
        let arc_radius: f64 = 3.0;
        // Three-point arcs run until they meet the baseline.
        let half_open = (-(hl - arc_center) / arc_radius).acos();
        CourtSpec {
            length: 2.0 * hl,
            width: 2.0 * hw,
            line_width: 0.05,
            markings: vec![
                seg(-hl, -hw, hl, -hw),
                seg(hl, -hw, hl, hw),
                seg(hl, hw, -hl, hw),
                seg(-hl, hw, -hl, -hw),
                seg(0.0, -hw, 0.0, hw),
                LineMark::Arc {
                    center: [0.0, 0.0],
                    radius: 1.8,
                    start_angle: 0.0,
                    end_angle: TAU,
                },
                LineMark::Arc {
                    center: [-arc_center, 0.0],
                    radius: arc_radius,
                    start_angle: -half_open,
                    end_angle: half_open,
                },
                LineMark::Arc {
                    center: [arc_center, 0.0],
                    radius: arc_radius,
                    start_angle: PI - half_open,
                    end_angle: PI + half_open,
                },
            ],
        }
    }
}

impl CourtSpec {
    pub fn half_length(&self) -> f64 {
        self.length / 2.0
    }

    pub fn half_width(&self) -> f64 {
        self.width / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("width", self.width),
            ("line_width", self.line_width),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain(format!("court {name} must be positive, got {v}")));
            }
        }
        let (hx, hy) = (
            self.half_length() + self.line_width,
            self.half_width() + self.line_width,
        );
        for (i, m) in self.markings.iter().enumerate() {
            m.validate()?;
            let (lo, hi) = m.bounds();
            let tol = 1e-9;
            if lo[0] < -hx - tol || hi[0] > hx + tol || lo[1] < -hy - tol || hi[1] > hy + tol {
                return Err(Error::Domain(format!(
                    "marking {i} extends beyond the court rectangle"
                )));
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest marking centerline; infinite when there are no markings.
    pub fn distance_to_nearest_marking(&self, p: Point2) -> f64 {
        self.markings
            .iter()
            .map(|m| m.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `p` lies on painted line (within half the line width of a centerline).
    pub fn is_on_line(&self, p: Point2) -> bool {
        let half = self.line_width / 2.0;
        self.markings.iter().any(|m| m.distance(p) <= half)
    }

    /// Canonical text form; [`CourtSpec::parse`] reads it back exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "length {}", self.length);
        let _ = writeln!(s, "width {}", self.width);
        let _ = writeln!(s, "line_width {}", self.line_width);
        for m in &self.markings {
            let _ = match *m {
                LineMark::Segment { p0, p1 } => {
                    writeln!(s, "segment {} {} {} {}", p0[0], p0[1], p1[0], p1[1])
                }
                LineMark::Arc {
                    center,
                    radius,
                    start_angle,
                    end_angle,
                } => writeln!(
                    s,
                    "arc {} {} {} {} {}",
                    center[0], center[1], radius, start_angle, end_angle
                ),
            };
        }
        s
    }

    /// Hex SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses a court definition.
    ///
    /// Grammar, one item per line, `#` starts a comment:
    ///
    /// ```text
    /// length <meters>
    /// width <meters>
    /// line_width <meters>
    /// segment <x0> <y0> <x1> <y1>
    /// arc <cx> <cy> <radius> <start_rad> <end_rad>
    /// ```
    ///
    /// Omitted dimensions keep their defaults. When the file lists no
    /// markings at all the court has none (there is no implicit layout).
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = CourtSpec::default();
        let mut court = CourtSpec {
            markings: Vec::new(),
            ..base
        };
        for (line, toks) in token_lines(text) {
            let mark = match toks[0] {
                "length" => {
                    court.length = parse_args::<f64>(path, line, &toks, 1)?[0];
                    None
                }
                "width" => {
                    court.width = parse_args::<f64>(path, line, &toks, 1)?[0];
                    None
                }
                "line_width" => {
                    court.line_width = parse_args::<f64>(path, line, &toks, 1)?[0];
                    None
                }
                "segment" => {
                    let v = parse_args::<f64>(path, line, &toks, 4)?;
                    Some(LineMark::Segment {
                        p0: [v[0], v[1]],
                        p1: [v[2], v[3]],
                    })
                }
                "arc" => {
                    let v = parse_args::<f64>(path, line, &toks, 5)?;
                    Some(LineMark::Arc {
                        center: [v[0], v[1]],
                        radius: v[2],
                        start_angle: v[3],
                        end_angle: v[4],
                    })
                }
                other => {
                    return Err(Error::parse(path, line, format!("unknown keyword `{other}`")))
                }
            };
            if let Some(m) = mark {
                m.validate()
                    .map_err(|e| Error::parse(path, line, e.to_string()))?;
                court.markings.push(m);
            }
        }
        court
            .validate()
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(court)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Planar robot pose in the court frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2D {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    /// Court-frame point expressed as (forward, left) in the robot frame.
    pub fn to_robot(&self, p: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let dx = p[0] - self.x;
        let dy = p[1] - self.y;
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_court(&self, fwd_left: Point2) -> Point2 {
        let (s, c) = self.yaw.sin_cos();
        let [f, l] = fwd_left;
        [self.x + c * f - s * l, self.y + s * f + c * l]
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YawMode {
    Fixed(f64),
    Uniform,
}

/// Samples a pose uniformly over the court inset by [`POSE_MARGIN`].
pub fn sample_pose(court: &CourtSpec, seed: u64, yaw_mode: YawMode) -> Pose2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pose_with(court, &mut rng, yaw_mode)
}

pub fn sample_pose_with<R: Rng + ?Sized>(court: &CourtSpec, rng: &mut R, yaw_mode: YawMode) -> Pose2D {
    let hx = (court.half_length() - POSE_MARGIN).max(0.0);
    let hy = (court.half_width() - POSE_MARGIN).max(0.0);
    let x = if hx > 0.0 { rng.gen_range(-hx..=hx) } else { 0.0 };
    let y = if hy > 0.0 { rng.gen_range(-hy..=hy) } else { 0.0 };
    let yaw = match yaw_mode {
        YawMode::Fixed(t) => t,
        YawMode::Uniform => rng.gen_range(-PI..PI),
    };
    Pose2D::new(x, y, yaw)
}

/// Pinhole camera mounted on the robot at a fixed height, pitched down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub mount_height: f64,
    /// Downward tilt of the optical axis, radians.
    pub mount_pitch: f64,
}

impl Default for CameraRig {
    fn default() -> Self {
        CameraRig {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
            mount_height: 0.5,
            mount_pitch: 0.1,
        }
    }
}

impl CameraRig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64
            && self.mount_height > 0.0
            && self.mount_pitch >= 0.0
            && self.mount_pitch < PI / 2.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid camera rig {self:?}")))
        }
    }

    /// Same optics at `factor` times the resolution (intrinsics scale with it).
    pub fn scaled(&self, factor: f64) -> CameraRig {
        CameraRig {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            width: (self.width as f64 * factor).round() as usize,
            height: (self.height as f64 * factor).round() as usize,
            ..*self
        }
    }

    /// Image row of the horizon; rays at or above it never reach the floor.
    pub fn horizon_row(&self) -> f64 {
        self.cy - self.fy * self.mount_pitch.tan()
    }

    fn in_frame(&self, u: f64, v: f64) -> bool {
        u >= -0.5 && u < self.width as f64 - 0.5 && v >= -0.5 && v < self.height as f64 - 0.5
    }

    /// Projects a floor point (`z = 0`) into the image.
    ///
    /// Returns `None` when the point is behind the camera or outside the frame.
    pub fn project_floor_point(&self, pose: &Pose2D, p: Point2) -> Option<Point2> {
        let [fwd, left] = pose.to_robot(p);
        let (s, c) = self.mount_pitch.sin_cos();
        let h = self.mount_height;
        let xc = -left;
        let yc = -s * fwd + h * c;
        let zc = c * fwd + h * s;
        if zc <= 0.0 {
            return None;
        }
        let u = self.fx * xc / zc + self.cx;
        let v = self.fy * yc / zc + self.cy;
        self.in_frame(u, v).then_some([u, v])
    }

    /// Intersects the viewing ray through pixel `(u, v)` with the floor.
    ///
    /// Returns `None` for rays at or above the horizon.
    pub fn backproject_pixel(&self, pose: &Pose2D, px: Point2) -> Option<Point2> {
        let dx = (px[0] - self.cx) / self.fx;
        let dy = (px[1] - self.cy) / self.fy;
        let (s, c) = self.mount_pitch.sin_cos();
        // Ray direction in the robot frame: forward, left, up.
        let fwd = -dy * s + c;
        let left = -dx;
        let up = -dy * c - s;
        if up >= 0.0 {
            return None;
        }
        let t = self.mount_height / -up;
        if !t.is_finite() {
            return None;
        }
        Some(pose.to_court([t * fwd, t * left]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn default_court_is_valid() {
        let court = CourtSpec::default();
        court.validate().unwrap();
        assert_eq!(court.markings.len(), 8);
        // three-point arcs meet the baseline
        let (lo, _) = court.markings[6].bounds();
        assert!((lo[0] + 7.5).abs() < 1e-12);
        let (_, hi) = court.markings[7].bounds();
        assert!((hi[0] - 7.5).abs() < 1e-12);
    }

    #[test]
    fn distance_on_endpoint_is_zero() {
        let court = CourtSpec::default();
        assert_eq!(court.distance_to_nearest_marking([7.5, 4.0]), 0.0);
        assert_eq!(court.distance_to_nearest_marking([0.0, -4.0]), 0.0);
    }

    #[test]
    fn perpendicular_distance_to_isolated_segment() {
        let m = LineMark::Segment {
            p0: [-1.0, 0.0],
            p1: [1.0, 0.0],
        };
        for d in [0.0, 0.1, 0.75, 3.0] {
            assert!((m.distance([0.0, d]) - d).abs() < 1e-15);
        }
        // beyond an endpoint the distance is to that endpoint
        assert!((m.distance([2.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arc_distance_outside_span_uses_endpoints() {
        let m = LineMark::Arc {
            center: [0.0, 0.0],
            radius: 1.0,
            start_angle: 0.0,
            end_angle: PI / 2.0,
        };
        assert!((m.distance([2.0, 0.0]) - 1.0).abs() < 1e-15);
        assert!((m.distance([-1.0, 0.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert!((m.distance([0.0, -1.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.distance([0.0, 0.0]), 1.0);
    }

    #[test]
    fn distance_agrees_with_dense_sampling() {
        let court = CourtSpec::default();
        let total_len: f64 = 2.0 * (15.0 + 8.0) + 8.0 + TAU * 1.8 + 2.0 * 3.0 * 4.25;
        let dense: Vec<Point2> = court
            .markings
            .iter()
            .flat_map(|m| {
                let (lo, hi) = m.bounds();
                let approx_len = (hi[0] - lo[0]).hypot(hi[1] - lo[1]) + 12.0;
                m.sample_points((100_000.0 * approx_len / total_len) as usize)
            })
            .collect();
        assert!(dense.len() >= 100_000);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = [rng.gen_range(-8.0..8.0), rng.gen_range(-4.5..4.5)];
            let brute = dense
                .iter()
                .map(|q| (p[0] - q[0]).hypot(p[1] - q[1]))
                .fold(f64::INFINITY, f64::min);
            let exact = court.distance_to_nearest_marking(p);
            assert!(exact <= brute + 1e-12);
            assert!((exact - brute).abs() < 1e-3, "{p:?}: {exact} vs {brute}");
        }
    }

    #[test]
    fn sample_pose_is_deterministic_and_bounded() {
        let court = CourtSpec::default();
        assert_eq!(
            sample_pose(&court, 42, YawMode::Uniform),
            sample_pose(&court, 42, YawMode::Uniform)
        );
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..10_000 {
            let p = sample_pose_with(&court, &mut rng, YawMode::Fixed(0.0));
            assert_eq!(p.yaw, 0.0);
            assert!(p.y.abs() <= 3.7);
            lo = lo.min(p.x);
            hi = hi.max(p.x);
        }
        assert!(lo >= -7.2 && lo < -7.1, "{lo}");
        assert!(hi <= 7.2 && hi > 7.1, "{hi}");
    }

    #[test]
    fn normalize_angle_range() {
        assert_eq!(normalize_angle(PI), -PI);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn point_on_optical_axis_hits_principal_point() {
        let rig = CameraRig {
            mount_pitch: 0.35,
            ..CameraRig::default()
        };
        let fwd = rig.mount_height / rig.mount_pitch.tan();
        for pose in [Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(1.0, -2.0, 0.7)] {
            let p = pose.to_court([fwd, 0.0]);
            let px = rig.project_floor_point(&pose, p).unwrap();
            assert!((px[0] - rig.cx).abs() < 1e-9 && (px[1] - rig.cy).abs() < 1e-9);
        }
    }

    #[test]
    fn point_behind_camera_is_not_visible() {
        let rig = CameraRig::default();
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        assert!(rig.project_floor_point(&pose, [-2.0, 0.0]).is_none());
    }

    /// Independent homogeneous-transform chain: world -> camera via a 4x4
    /// extrinsic built from explicit rotation matrices, then K.
    fn oracle_project(rig: &CameraRig, pose: &Pose2D, p: Point2) -> Option<Point2> {
        type M4 = [[f64; 4]; 4];
        fn mul(a: &M4, b: &M4) -> M4 {
            let mut r = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        r[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            r
        }
        let (sy, cy) = pose.yaw.sin_cos();
        // world -> robot: R(-yaw) * T(-x, -y, -h)
        let translate: M4 = [
            [1.0, 0.0, 0.0, -pose.x],
            [0.0, 1.0, 0.0, -pose.y],
            [0.0, 0.0, 1.0, -rig.mount_height],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let rot_yaw: M4 = [
            [cy, sy, 0.0, 0.0],
            [-sy, cy, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        // robot (fwd, left, up) -> level camera (right, down, fwd)
        let axes: M4 = [
            [0.0, -1.0, 0.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        // pitch down about camera x axis
        let (sp, cp) = rig.mount_pitch.sin_cos();
        let pitch: M4 = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, cp, -sp, 0.0],
            [0.0, sp, cp, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        let ext = mul(&pitch, &mul(&axes, &mul(&rot_yaw, &translate)));
        let w = [p[0], p[1], 0.0, 1.0];
        let mut c = [0.0; 4];
        for i in 0..4 {
            for k in 0..4 {
                c[i] += ext[i][k] * w[k];
            }
        }
        if c[2] <= 0.0 {
            return None;
        }
        Some([rig.fx * c[0] / c[2] + rig.cx, rig.fy * c[1] / c[2] + rig.cy])
    }

    #[test]
    fn projection_matches_matrix_chain_oracle() {
        let rig = CameraRig {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            mount_height: 0.5,
            mount_pitch: 0.3,
            ..CameraRig::default()
        };
        let pose = Pose2D::new(0.0, 0.0, 0.0);
        let got = rig.project_floor_point(&pose, [2.0, 0.0]).unwrap();
        let want = oracle_project(&rig, &pose, [2.0, 0.0]).unwrap();
        assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
        assert!((got[0] - 320.0).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 500 {
            let pose = Pose2D::new(rng.gen_range(-7.0..7.0), rng.gen_range(-3.0..3.0), rng.gen_range(-PI..PI));
            let p = [rng.gen_range(-8.0..8.0), rng.gen_range(-4.0..4.0)];
            if let Some(got) = rig.project_floor_point(&pose, p) {
                let want = oracle_project(&rig, &pose, p).unwrap();
                assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
                checked += 1;
            }
        }
    }

    #[test]
    fn backproject_roundtrip_and_horizon() {
        let rig = CameraRig::default();
        let pose = Pose2D::new(1.0, 2.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut n = 0;
        while n < 1000 {
            let p = pose.to_court([rng.gen_range(0.5..20.0), rng.gen_range(-10.0..10.0)]);
            if let Some(px) = rig.project_floor_point(&pose, p) {
                let q = rig.backproject_pixel(&pose, px).unwrap();
                assert!((q[0] - p[0]).hypot(q[1] - p[1]) < 1e-6);
                n += 1;
            }
        }
        let level = CameraRig {
            mount_pitch: 0.0,
            ..rig
        };
        assert!(level
            .backproject_pixel(&pose, [level.cx, level.cy])
            .is_none());
        let horizon = rig.horizon_row();
        for row in 0..(horizon.floor() as usize) {
            for col in [0.0, 100.0, 639.0] {
                assert!(rig.backproject_pixel(&pose, [col, row as f64]).is_none());
            }
        }
        assert!(rig
            .backproject_pixel(&pose, [320.0, horizon.ceil() + 1.0])
            .is_some());
    }

    #[test]
    fn court_text_roundtrip() {
        let court = CourtSpec::default();
        let parsed = CourtSpec::parse(&court.to_text(), Path::new("court.txt")).unwrap();
        assert_eq!(parsed, court);
        assert_eq!(parsed.hash(), court.hash());
    }

    #[test]
    fn court_parser_reports_line_numbers() {
        let text = "length 15\n# comment\n\nsegment 0 0 1\n";
        match CourtSpec::parse(text, Path::new("c.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        let text = "width 8\nblob 1 2\n";
        match CourtSpec::parse(text, Path::new("c.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match CourtSpec::parse("segment 1 1 1 1\n", Path::new("c.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        match CourtSpec::parse("segment 0 0 20 0\n", Path::new("c.txt")) {
            Err(Error::Parse { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn distance_is_one_lipschitz(
            px in -9.0..9.0f64, py in -5.0..5.0f64,
            qx in -9.0..9.0f64, qy in -5.0..5.0f64,
        ) {
            let court = CourtSpec::default();
            let dp = court.distance_to_nearest_marking([px, py]);
            let dq = court.distance_to_nearest_marking([qx, qy]);
            prop_assert!((dp - dq).abs() <= (px - qx).hypot(py - qy) + 1e-12);
        }

        #[test]
        fn projection_is_injective(
            x in -7.0..7.0f64, y in -3.5..3.5f64, yaw in -3.0..3.0f64,
            a in proptest::array::uniform4(-1.0..1.0f64),
        ) {
            let rig = CameraRig::default();
            let pose = Pose2D::new(x, y, yaw);
            let p = pose.to_court([1.0 + 4.0 * a[0].abs(), 2.0 * a[1]]);
            let q = pose.to_court([1.0 + 4.0 * a[2].abs(), 2.0 * a[3]]);
            if let (Some(u), Some(v)) = (rig.project_floor_point(&pose, p), rig.project_floor_point(&pose, q)) {
                if (p[0] - q[0]).hypot(p[1] - q[1]) > 1e-9 {
                    prop_assert!(u != v);
                }
            }
        }
    }
}
