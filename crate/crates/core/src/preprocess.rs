//! Frame preprocessing: HSV white masking, radial-scan line thinning, crop,
//! normalization and flattening.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageBuffer;
use crate::profile::Profile;
use crate::textfmt::{parse_args, token_lines};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    /// Degrees in `[0, 360)`; zero for achromatic pixels.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn rgb_to_hsv(p: [u8; 3]) -> HsvPixel {
    let [r, g, b] = p.map(|c| c as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max / 255.0;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    HsvPixel {
        h: if h >= 360.0 { h - 360.0 } else { h },
        s,
        v,
    }
}

/// Inclusive HSV box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvRange {
    pub h: (f64, f64),
    pub s: (f64, f64),
    pub v: (f64, f64),
}

impl HsvRange {
    pub fn contains(&self, p: &HsvPixel) -> bool {
        (self.h.0..=self.h.1).contains(&p.h)
            && (self.s.0..=self.s.1).contains(&p.s)
            && (self.v.0..=self.v.1).contains(&p.v)
    }

    fn validate(&self) -> Result<()> {
        for (lo, hi) in [self.h, self.s, self.v] {
            if !(lo <= hi) {
                return Err(Error::Domain(format!("HSV range bound {lo} > {hi}")));
            }
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 6] {
        [self.h.0, self.h.1, self.s.0, self.s.1, self.v.0, self.v.1]
    }

    fn from_slice(v: &[f64]) -> Self {
        HsvRange {
            h: (v[0], v[1]),
            s: (v[2], v[3]),
            v: (v[4], v[5]),
        }
    }
}

/// A pixel is white iff it falls in either range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WhiteMaskConfig {
    pub range_a: HsvRange,
    pub range_b: HsvRange,
}

impl Default for WhiteMaskConfig {
    fn default() -> Self {
        WhiteMaskConfig {
            // bright, near-achromatic
            range_a: HsvRange {
                h: (0.0, 360.0),
                s: (0.0, 0.25),
                v: (0.75, 1.0),
            },
            // antialiased or dimmer line pixels
            range_b: HsvRange {
                h: (0.0, 360.0),
                s: (0.0, 0.45),
                v: (0.55, 1.0),
            },
        }
    }
}

impl WhiteMaskConfig {
    pub fn is_white(&self, p: [u8; 3]) -> bool {
        let hsv = rgb_to_hsv(p);
        self.range_a.contains(&hsv) || self.range_b.contains(&hsv)
    }

    pub fn validate(&self) -> Result<()> {
        self.range_a.validate()?;
        self.range_b.validate()
    }
}

/// Ray fan for the radial scan. Angles in degrees, `angle_end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialScanConfig {
    pub angle_start: f64,
    pub angle_end: f64,
    pub angle_step: f64,
    /// Ray origin `(x, y)`; defaults to bottom center `(W/2, H)`.
    pub origin: Option<(f64, f64)>,
    /// Last marching distance; defaults to `max(H, W)`.
    pub max_d: Option<usize>,
}

impl Default for RadialScanConfig {
    fn default() -> Self {
        RadialScanConfig {
            angle_start: 0.0,
            angle_end: 180.0,
            angle_step: 2.0,
            origin: None,
            max_d: None,
        }
    }
}

impl RadialScanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.angle_step > 0.0 && self.angle_end >= self.angle_start) {
            return Err(Error::Domain(format!(
                "invalid ray fan {}..={} step {}",
                self.angle_start, self.angle_end, self.angle_step
            )));
        }
        Ok(())
    }

    /// Ray angles in degrees, both endpoints included when reachable.
    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.angle_end - self.angle_start) / self.angle_step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| self.angle_start + k as f64 * self.angle_step)
            .collect()
    }
}

/// Mask and scan settings, loadable from a key/value file.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PreprocessConfig {
    pub mask: WhiteMaskConfig,
    pub scan: RadialScanConfig,
}

impl PreprocessConfig {
    /// Parses `mask_a`/`mask_b` (six numbers: h_lo h_hi s_lo s_hi v_lo v_hi),
    /// `angle_start`, `angle_end`, `angle_step`, `origin <x> <y>` and `max_d`.
    /// Unlisted keys keep their defaults.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = PreprocessConfig::default();
        for (line, toks) in token_lines(text) {
            match toks[0] {
                "mask_a" => cfg.mask.range_a = HsvRange::from_slice(&parse_args(path, line, &toks, 6)?),
                "mask_b" => cfg.mask.range_b = HsvRange::from_slice(&parse_args(path, line, &toks, 6)?),
                "angle_start" => cfg.scan.angle_start = parse_args(path, line, &toks, 1)?[0],
                "angle_end" => cfg.scan.angle_end = parse_args(path, line, &toks, 1)?[0],
                "angle_step" => cfg.scan.angle_step = parse_args(path, line, &toks, 1)?[0],
                "origin" => {
                    let v: Vec<f64> = parse_args(path, line, &toks, 2)?;
                    cfg.scan.origin = Some((v[0], v[1]));
                }
                "max_d" => cfg.scan.max_d = Some(parse_args(path, line, &toks, 1)?[0]),
                other => {
                    return Err(Error::parse(path, line, format!("unknown key `{other}`")))
                }
            }
        }
        cfg.mask
            .validate()
            .and_then(|_| cfg.scan.validate())
            .map_err(|e| Error::parse(path, 0, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (key, r) in [("mask_a", &self.mask.range_a), ("mask_b", &self.mask.range_b)] {
            let v = r.as_array();
            let _ = writeln!(s, "{key} {} {} {} {} {} {}", v[0], v[1], v[2], v[3], v[4], v[5]);
        }
        let _ = writeln!(s, "angle_start {}", self.scan.angle_start);
        let _ = writeln!(s, "angle_end {}", self.scan.angle_end);
        let _ = writeln!(s, "angle_step {}", self.scan.angle_step);
        if let Some((x, y)) = self.scan.origin {
            let _ = writeln!(s, "origin {x} {y}");
        }
        if let Some(d) = self.scan.max_d {
            let _ = writeln!(s, "max_d {d}");
        }
        s
    }
}

/// Binary white mask: 255 where the pixel is white, 0 elsewhere.
pub fn mask_white(img: &ImageBuffer, cfg: &WhiteMaskConfig) -> Result<ImageBuffer> {
    if img.channels() != 3 {
        return Err(Error::InputShape(format!(
            "mask_white needs an RGB image, got {} channel(s)",
            img.channels()
        )));
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| if cfg.is_white([p[0], p[1], p[2]]) { 255 } else { 0 })
        .collect();
    ImageBuffer::from_raw(img.width(), img.height(), 1, data)
}

/// Pixel sampled at marching distance `d` along a ray, or `None` when out of bounds.
///
/// Both coordinates round to nearest (half away from zero). A row that rounds
/// to exactly `height` (the origin row sits one past the last pixel row) is
/// read from the last row instead.
#[inline]
pub fn ray_sample(
    origin: (f64, f64),
    cos_sin: (f64, f64),
    d: usize,
    width: usize,
    height: usize,
) -> Option<(usize, usize)> {
    let x = (origin.0 + d as f64 * cos_sin.0).round();
    let mut y = (origin.1 - d as f64 * cos_sin.1).round();
    if y == height as f64 {
        y -= 1.0;
    }
    if x >= 0.0 && x < width as f64 && y >= 0.0 && y < height as f64 {
        Some((y as usize, x as usize))
    } else {
        None
    }
}

/// Radial-scan downsampling of a binary mask.
///
/// Rays fan out from the bottom center. Along each ray, a pixel is marked
/// in the output when the previous in-bounds sample was 255 and this one is
/// not, which keeps only the far edge of every white band the ray crosses.
pub fn radial_downsample(binary: &ImageBuffer, cfg: &RadialScanConfig) -> Result<ImageBuffer> {
    if binary.channels() != 1 {
        return Err(Error::InputShape("radial_downsample needs a gray image".into()));
    }
    if let Some(v) = binary.data().iter().find(|&&v| v != 0 && v != 255) {
        return Err(Error::Domain(format!(
            "radial_downsample needs a binary image, found value {v}"
        )));
    }
    cfg.validate()?;
    let (w, h) = (binary.width(), binary.height());
    let mut out = ImageBuffer::gray(w, h);
    if w == 0 || h == 0 {
        return Ok(out);
    }
    let origin = cfg.origin.unwrap_or((w as f64 / 2.0, h as f64));
    let max_d = cfg.max_d.unwrap_or(w.max(h));
    let src = binary.data();
    let dst = out.data_mut();
    for angle in cfg.angles() {
        let (s, c) = angle.to_radians().sin_cos();
        let mut last = 0u8;
        for d in 0..=max_d {
            if let Some((row, col)) = ray_sample(origin, (c, s), d, w, h) {
                let idx = row * w + col;
                let pixel = src[idx];
                if last == 255 && pixel != 255 {
                    dst[idx] = 255;
                }
                last = pixel;
            }
        }
    }
    Ok(out)
}

/// Drops the top `rows` rows.
pub fn crop_top(img: &ImageBuffer, rows: usize) -> Result<ImageBuffer> {
    if rows >= img.height() {
        return Err(Error::InputShape(format!(
            "cannot crop {rows} rows from an image {} rows tall",
            img.height()
        )));
    }
    let stride = img.width() * img.channels();
    ImageBuffer::from_raw(
        img.width(),
        img.height() - rows,
        img.channels(),
        img.data()[rows * stride..].to_vec(),
    )
}

/// Row-major flatten with every byte scaled to `[0, 1]`.
pub fn normalize_flatten(img: &ImageBuffer, width: usize, height: usize) -> Result<Vec<f32>> {
    if img.channels() != 1 || img.width() != width || img.height() != height {
        return Err(Error::InputShape(format!(
            "expected a {width}x{height}x1 image, got {}x{}x{}",
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    Ok(img.data().iter().map(|&b| b as f32 / 255.0).collect())
}

/// Mask, radial scan, crop and flatten, in that order.
pub fn preprocess_pipeline(img: &ImageBuffer, cfg: &PreprocessConfig, profile: Profile) -> Result<Vec<f32>> {
    let (w, h) = (profile.width(), profile.height());
    if img.width() != w || img.height() != h || img.channels() != 3 {
        return Err(Error::InputShape(format!(
            "{profile} profile expects {w}x{h}x3 frames, got {}x{}x{}",
            img.width(),
            img.height(),
            img.channels()
        )));
    }
    let mask = mask_white(img, &cfg.mask)?;
    let thin = radial_downsample(&mask, &cfg.scan)?;
    let cropped = crop_top(&thin, profile.crop_rows())?;
    normalize_flatten(&cropped, w, profile.cropped_height())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hsv_reference_colors() {
        assert_eq!(rgb_to_hsv([255, 255, 255]), HsvPixel { h: 0.0, s: 0.0, v: 1.0 });
        assert_eq!(rgb_to_hsv([255, 0, 0]), HsvPixel { h: 0.0, s: 1.0, v: 1.0 });
        assert_eq!(rgb_to_hsv([0, 255, 0]), HsvPixel { h: 120.0, s: 1.0, v: 1.0 });
        assert_eq!(rgb_to_hsv([0, 0, 255]).h, 240.0);
        assert_eq!(rgb_to_hsv([0, 0, 0]), HsvPixel { h: 0.0, s: 0.0, v: 0.0 });
        // magenta-ish red: negative sector wraps
        let p = rgb_to_hsv([255, 0, 128]);
        assert!(p.h > 300.0 && p.h < 360.0);
    }

    #[test]
    fn default_floor_green_is_not_white() {
        let cfg = WhiteMaskConfig::default();
        // h = 138.46, s = 0.591, v = 0.431: fails both ranges on s and v
        let hsv = rgb_to_hsv([45, 110, 60]);
        assert!((hsv.s - 65.0 / 110.0).abs() < 1e-12);
        assert!((hsv.v - 110.0 / 255.0).abs() < 1e-12);
        assert!(!cfg.is_white([45, 110, 60]));
        assert!(!cfg.is_white([20, 20, 20]));
        assert!(cfg.is_white([255, 255, 255]));

        let mut img = ImageBuffer::rgb(4, 3);
        for p in img.data_mut().chunks_exact_mut(3) {
            p.copy_from_slice(&[45, 110, 60]);
        }
        assert!(mask_white(&img, &cfg).unwrap().data().iter().all(|&v| v == 0));
    }

    #[test]
    fn all_white_masks_to_all_255() {
        let img = ImageBuffer::from_raw(5, 4, 3, vec![255; 60]).unwrap();
        let m = mask_white(&img, &WhiteMaskConfig::default()).unwrap();
        assert_eq!(m.channels(), 1);
        assert!(m.data().iter().all(|&v| v == 255));
    }

    #[test]
    fn mask_is_idempotent_on_its_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<u8> = (0..30 * 3).map(|_| rng.gen()).collect();
        let img = ImageBuffer::from_raw(6, 5, 3, data).unwrap();
        let cfg = WhiteMaskConfig::default();
        let m = mask_white(&img, &cfg).unwrap();
        let as_rgb: Vec<u8> = m.data().iter().flat_map(|&v| [v, v, v]).collect();
        let again = mask_white(&ImageBuffer::from_raw(6, 5, 3, as_rgb).unwrap(), &cfg).unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn mask_rejects_gray() {
        assert!(matches!(
            mask_white(&ImageBuffer::gray(2, 2), &WhiteMaskConfig::default()),
            Err(Error::InputShape(_))
        ));
    }

    #[test]
    fn default_fan_has_91_rays() {
        let a = RadialScanConfig::default().angles();
        assert_eq!(a.len(), 91);
        assert_eq!(a[0], 0.0);
        assert_eq!(a[90], 180.0);
    }

    #[test]
    fn radial_edge_cases() {
        let cfg = RadialScanConfig::default();
        let black = ImageBuffer::gray(64, 48);
        assert_eq!(radial_downsample(&black, &cfg).unwrap(), black);
        let white = ImageBuffer::from_raw(64, 48, 1, vec![255; 64 * 48]).unwrap();
        assert_eq!(radial_downsample(&white, &cfg).unwrap(), black);
        let bad = ImageBuffer::from_raw(2, 1, 1, vec![0, 7]).unwrap();
        assert!(matches!(radial_downsample(&bad, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn vertical_ray_marks_far_edge_of_band() {
        // 90 degree ray runs up column 5 from the bottom.
        let (w, h) = (10, 20);
        let mut img = ImageBuffer::gray(w, h);
        for row in 8..12 {
            img.set_gray(row, 5, 255);
        }
        let cfg = RadialScanConfig {
            angle_start: 90.0,
            angle_end: 90.0,
            ..Default::default()
        };
        let out = radial_downsample(&img, &cfg).unwrap();
        let marked: Vec<_> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (r, c)))
            .filter(|&(r, c)| out.get_gray(r, c) == 255)
            .collect();
        assert_eq!(marked, vec![(7, 5)]);
    }

    #[test]
    fn bottom_row_ray_is_clamped() {
        // 0 degree ray: origin row H rounds to H and is read from row H-1.
        let (w, h) = (10, 4);
        let mut img = ImageBuffer::gray(w, h);
        img.set_gray(3, 6, 255);
        let cfg = RadialScanConfig {
            angle_start: 0.0,
            angle_end: 0.0,
            ..Default::default()
        };
        let out = radial_downsample(&img, &cfg).unwrap();
        assert_eq!(out.get_gray(3, 7), 255);
        assert_eq!(out.data().iter().filter(|&&v| v == 255).count(), 1);
    }

    #[test]
    fn crop_top_cases() {
        let mut img = ImageBuffer::gray(640, 480);
        img.set_gray(200, 17, 9);
        let c = crop_top(&img, 200).unwrap();
        assert_eq!((c.width(), c.height()), (640, 280));
        assert_eq!(c.get_gray(0, 17), 9);
        assert_eq!(crop_top(&img, 0).unwrap(), img);
        assert!(matches!(crop_top(&img, 480), Err(Error::InputShape(_))));
    }

    #[test]
    fn normalize_flatten_cases() {
        let mut img = ImageBuffer::gray(640, 280);
        let v = normalize_flatten(&img, 640, 280).unwrap();
        assert_eq!(v.len(), 179_200);
        assert!(v.iter().all(|&x| x == 0.0));
        img.set_gray(0, 0, 255);
        let v = normalize_flatten(&img, 640, 280).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        assert!(normalize_flatten(&ImageBuffer::gray(640, 281), 640, 280).is_err());
    }

    #[test]
    fn pipeline_black_frame_is_zero() {
        for profile in [Profile::Reduced, Profile::Full] {
            let img = ImageBuffer::rgb(profile.width(), profile.height());
            let v = preprocess_pipeline(&img, &PreprocessConfig::default(), profile).unwrap();
            assert_eq!(v.len(), profile.input_dim());
            assert!(v.iter().all(|&x| x == 0.0));
        }
        assert!(preprocess_pipeline(&ImageBuffer::rgb(10, 10), &PreprocessConfig::default(), Profile::Full).is_err());
    }

    #[test]
    fn config_file_roundtrip_and_errors() {
        let cfg = PreprocessConfig {
            scan: RadialScanConfig {
                angle_step: 3.0,
                origin: Some((10.0, 5.0)),
                max_d: Some(12),
                ..Default::default()
            },
            ..Default::default()
        };
        let p = Path::new("pre.txt");
        assert_eq!(PreprocessConfig::parse(&cfg.to_text(), p).unwrap(), cfg);
        assert!(matches!(
            PreprocessConfig::parse("mask_a 0 1 2\n", p),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(PreprocessConfig::parse("angle_step 0\n", p).is_err());
        assert!(PreprocessConfig::parse("mask_b 0 360 0.5 0.1 0 1\n", p).is_err());
    }

    proptest! {
        #[test]
        fn mask_commutes_with_mirroring(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<u8> = (0..7 * 5 * 3).map(|_| if rng.gen_bool(0.3) { 250 } else { rng.gen() }).collect();
            let img = ImageBuffer::from_raw(7, 5, 3, data).unwrap();
            let cfg = WhiteMaskConfig::default();
            prop_assert_eq!(
                mask_white(&img.mirrored(), &cfg).unwrap(),
                mask_white(&img, &cfg).unwrap().mirrored()
            );
        }

        #[test]
        fn crop_composes(a in 0usize..10, b in 0usize..10) {
            let data: Vec<u8> = (0..4 * 24).map(|i| i as u8).collect();
            let img = ImageBuffer::from_raw(4, 24, 1, data).unwrap();
            let twice = crop_top(&crop_top(&img, a).unwrap(), b).unwrap();
            prop_assert_eq!(twice, crop_top(&img, a + b).unwrap());
        }

        #[test]
        fn radial_output_bounded_by_transitions(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = (32, 24);
            let data: Vec<u8> = (0..w * h).map(|_| if rng.gen_bool(0.4) { 255 } else { 0 }).collect();
            let img = ImageBuffer::from_raw(w, h, 1, data).unwrap();
            let cfg = RadialScanConfig::default();
            let out = radial_downsample(&img, &cfg).unwrap();
            // count 255 -> non-255 transitions per ray
            let origin = (w as f64 / 2.0, h as f64);
            let mut max_trans = 0;
            let mut support = std::collections::HashSet::new();
            for a in cfg.angles() {
                let (s, c) = a.to_radians().sin_cos();
                let mut last = 0;
                let mut n = 0;
                for d in 0..=w.max(h) {
                    if let Some((r, col)) = ray_sample(origin, (c, s), d, w, h) {
                        support.insert((r, col));
                        let p = img.get_gray(r, col);
                        if last == 255 && p != 255 { n += 1; }
                        last = p;
                    }
                }
                max_trans = max_trans.max(n);
            }
            let marked: Vec<(usize, usize)> = (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .filter(|&(r, c)| out.get_gray(r, c) == 255)
                .collect();
            prop_assert!(marked.len() <= cfg.angles().len() * max_trans);
            for p in &marked {
                prop_assert!(support.contains(p));
                // marked pixels are never white themselves
                prop_assert_eq!(img.get_gray(p.0, p.1), 0);
            }
        }
    }
}
