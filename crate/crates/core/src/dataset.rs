//! Pose-labeled synthetic datasets: generation, train/test split, manifest IO
//! and loading through the preprocessing pipeline.
//!
//! On disk a dataset is a directory holding `manifest.txt`, the court
//! definition it was rendered from (`court.txt`) and one binary PPM per
//! sample under `images/`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sample_pose_with, CameraRig, CourtSpec, Pose2D, YawMode};
use crate::image::ImageBuffer;
use crate::nn::{Example, SparseVec};
use crate::preprocess::{preprocess_pipeline, PreprocessConfig};
use crate::profile::Profile;
use crate::render::{render_view, RenderStyle};

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const COURT_FILE: &str = "court.txt";
pub const IMAGE_DIR: &str = "images";
const MANIFEST_FORMAT: &str = "courtloc-manifest";
const MANIFEST_VERSION: u32 = 1;

/// Coverage grid used to make sure every part of the court is sampled.
pub const COVERAGE_GRID: (usize, usize) = (10, 6);
/// Datasets at least this large must occupy every coverage cell.
pub const COVERAGE_MIN_SAMPLES: usize = 500;
const COVERAGE_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Image path relative to the dataset root.
    pub image: String,
    pub pose: Pose2D,
    pub split: Option<Split>,
}

impl Sample {
    pub fn label(&self) -> [f64; 2] {
        [self.pose.x, self.pose.y]
    }
}

/// Everything needed to regenerate or load a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub profile: Profile,
    pub court_hash: String,
    pub rig: CameraRig,
    pub style: RenderStyle,
    pub preprocess: PreprocessConfig,
    pub seed: u64,
    pub yaw_mode: YawMode,
    pub train_fraction: Option<f64>,
    pub split_seed: Option<u64>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub court: CourtSpec,
    pub profile: Profile,
    pub rig: CameraRig,
    pub style: RenderStyle,
    pub preprocess: PreprocessConfig,
    pub count: usize,
    pub seed: u64,
    pub yaw_mode: YawMode,
}

impl GenerateConfig {
    pub fn new(profile: Profile, count: usize, seed: u64) -> Self {
        GenerateConfig {
            court: CourtSpec::default(),
            profile,
            rig: profile.rig(),
            style: RenderStyle::default(),
            preprocess: PreprocessConfig::default(),
            count,
            seed,
            yaw_mode: YawMode::Fixed(0.0),
        }
    }
}

/// Per-cell sample counts over the court rectangle, row-major in `y` then `x`.
pub fn grid_occupancy(court: &CourtSpec, poses: &[Pose2D], grid: (usize, usize)) -> Vec<usize> {
    let (nx, ny) = grid;
    let mut counts = vec![0; nx * ny];
    for p in poses {
        let fx = (p.x + court.half_length()) / court.length;
        let fy = (p.y + court.half_width()) / court.width;
        let cx = ((fx * nx as f64).floor() as isize).clamp(0, nx as isize - 1) as usize;
        let cy = ((fy * ny as f64).floor() as isize).clamp(0, ny as isize - 1) as usize;
        counts[cy * nx + cx] += 1;
    }
    counts
}

/// Draws `count` poses; for large sets the whole draw repeats until every coverage cell is hit.
pub fn sample_poses(court: &CourtSpec, count: usize, rng: &mut ChaCha8Rng, yaw_mode: YawMode) -> Result<Vec<Pose2D>> {
    for _ in 0..COVERAGE_MAX_ATTEMPTS {
        let poses: Vec<Pose2D> = (0..count)
            .map(|_| sample_pose_with(court, rng, yaw_mode))
            .collect();
        if count < COVERAGE_MIN_SAMPLES
            || grid_occupancy(court, &poses, COVERAGE_GRID).iter().all(|&c| c > 0)
        {
            return Ok(poses);
        }
    }
    Err(Error::Domain(format!(
        "could not cover the {}x{} grid with {count} samples",
        COVERAGE_GRID.0, COVERAGE_GRID.1
    )))
}

/// Renders `cfg.count` samples into `root` and writes the manifest (unsplit).
pub fn generate(cfg: &GenerateConfig, root: &Path) -> Result<DatasetManifest> {
    if cfg.count == 0 {
        return Err(Error::Domain("dataset needs at least one sample".into()));
    }
    cfg.court.validate()?;
    cfg.rig.validate()?;
    cfg.preprocess.mask.validate()?;
    cfg.preprocess.scan.validate()?;
    cfg.style.validate(&cfg.preprocess.mask)?;
    if (cfg.rig.width, cfg.rig.height) != (cfg.profile.width(), cfg.profile.height()) {
        return Err(Error::InputShape(format!(
            "rig renders {}x{} but the {} profile needs {}x{}",
            cfg.rig.width,
            cfg.rig.height,
            cfg.profile,
            cfg.profile.width(),
            cfg.profile.height()
        )));
    }

    let image_dir = root.join(IMAGE_DIR);
    std::fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let poses = sample_poses(&cfg.court, cfg.count, &mut rng, cfg.yaw_mode)?;
    let noise_seeds: Vec<u64> = (0..cfg.count).map(|_| rng.gen()).collect();

    let samples: Vec<Sample> = poses
        .par_iter()
        .zip(noise_seeds.par_iter())
        .enumerate()
        .map(|(i, (pose, &noise_seed))| {
            let rel = format!("{IMAGE_DIR}/{i:06}.ppm");
            let img = render_view(&cfg.court, &cfg.rig, pose, &cfg.style, noise_seed);
            img.save(&root.join(&rel))?;
            Ok(Sample {
                image: rel,
                pose: *pose,
                split: None,
            })
        })
        .collect::<Result<_>>()?;

    let court_path = root.join(COURT_FILE);
    std::fs::write(&court_path, cfg.court.to_text()).map_err(|e| Error::io(&court_path, e))?;

    let manifest = DatasetManifest {
        profile: cfg.profile,
        court_hash: cfg.court.hash(),
        rig: cfg.rig,
        style: cfg.style,
        preprocess: cfg.preprocess,
        seed: cfg.seed,
        yaw_mode: cfg.yaw_mode,
        train_fraction: None,
        split_seed: None,
        samples,
    };
    manifest.save(&root.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitSummary {
    pub train: usize,
    pub test: usize,
    pub warning: Option<String>,
}

/// Number of training samples: `floor(n * train_fraction)`.
pub fn train_count(n: usize, train_fraction: f64) -> usize {
    // the epsilon keeps products like 0.29 * 100 from flooring to 28
    ((n as f64 * train_fraction) + 1e-9).floor() as usize
}

/// Assigns every sample to train or test by a seeded shuffle.
pub fn split(manifest: &mut DatasetManifest, train_fraction: f64, seed: u64) -> Result<SplitSummary> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Domain(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = manifest.samples.len();
    let n_train = train_count(n, train_fraction).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (rank, &i) in order.iter().enumerate() {
        manifest.samples[i].split = Some(if rank < n_train { Split::Train } else { Split::Test });
    }
    manifest.train_fraction = Some(train_fraction);
    manifest.split_seed = Some(seed);
    let warning = (n_train == 0 || n_train == n).then(|| {
        let msg = format!("split of {n} sample(s) at {train_fraction} leaves {n_train} for training and {} for testing", n - n_train);
        log::warn!("{msg}");
        msg
    });
    Ok(SplitSummary {
        train: n_train,
        test: n - n_train,
        warning,
    })
}

fn fmt_color(c: [u8; 3]) -> String {
    format!("{} {} {}", c[0], c[1], c[2])
}

impl DatasetManifest {
    pub fn input_dim(&self) -> usize {
        self.profile.input_dim()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let r = &self.rig;
        let st = &self.style;
        let _ = writeln!(s, "format {MANIFEST_FORMAT} {MANIFEST_VERSION}");
        let _ = writeln!(s, "profile {}", self.profile);
        let _ = writeln!(s, "input_dim {}", self.input_dim());
        let _ = writeln!(s, "court_file {COURT_FILE}");
        let _ = writeln!(s, "court_hash {}", self.court_hash);
        let _ = writeln!(
            s,
            "rig {} {} {} {} {} {} {} {}",
            r.fx, r.fy, r.cx, r.cy, r.width, r.height, r.mount_height, r.mount_pitch
        );
        let _ = writeln!(s, "floor_color {}", fmt_color(st.floor_color));
        let _ = writeln!(s, "line_color {}", fmt_color(st.line_color));
        let _ = writeln!(s, "background_color {}", fmt_color(st.background_color));
        let _ = writeln!(s, "noise_std {}", st.noise_std);
        let _ = writeln!(s, "antialias_samples {}", st.antialias_samples);
        let _ = writeln!(s, "seed {}", self.seed);
        let _ = match self.yaw_mode {
            YawMode::Fixed(t) => writeln!(s, "yaw_mode fixed {t}"),
            YawMode::Uniform => writeln!(s, "yaw_mode uniform"),
        };
        if let (Some(f), Some(seed)) = (self.train_fraction, self.split_seed) {
            let _ = writeln!(s, "train_fraction {f}");
            let _ = writeln!(s, "split_seed {seed}");
        }
        s.push_str(&self.preprocess.to_text());
        let _ = writeln!(s, "samples {}", self.samples.len());
        for smp in &self.samples {
            let split = match smp.split {
                Some(Split::Train) => "train",
                Some(Split::Test) => "test",
                None => "-",
            };
            let _ = writeln!(
                s,
                "sample {} {} {} {} {split}",
                smp.image, smp.pose.x, smp.pose.y, smp.pose.yaw
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        fn bad(line: usize, msg: impl std::fmt::Display) -> Error {
            Error::MalformedManifest(format!("line {line}: {msg}"))
        }
        fn nums<T: FromStr>(line: usize, toks: &[&str], n: usize) -> Result<Vec<T>> {
            if toks.len() != n + 1 {
                return Err(bad(line, format!("`{}` expects {n} value(s)", toks[0])));
            }
            toks[1..]
                .iter()
                .map(|t| t.parse::<T>().map_err(|_| bad(line, format!("invalid value `{t}`"))))
                .collect()
        }
        fn color(line: usize, toks: &[&str]) -> Result<[u8; 3]> {
            let v: Vec<u8> = nums(line, toks, 3)?;
            Ok([v[0], v[1], v[2]])
        }

        let mut format_seen = false;
        let mut profile = None;
        let mut input_dim = None;
        let mut court_hash = None;
        let mut rig = None;
        let mut style = RenderStyle::default();
        let mut seed = None;
        let mut yaw_mode = None;
        let mut train_fraction = None;
        let mut split_seed = None;
        let mut pre_lines = String::new();
        let mut declared = None;
        let mut samples = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            if toks.is_empty() || toks[0].starts_with('#') {
                continue;
            }
            match toks[0] {
                "format" => {
                    if toks.len() != 3 || toks[1] != MANIFEST_FORMAT {
                        return Err(bad(line, "not a courtloc manifest"));
                    }
                    if toks[2] != MANIFEST_VERSION.to_string() {
                        return Err(bad(line, format!("unsupported manifest version {}", toks[2])));
                    }
                    format_seen = true;
                }
                "profile" => {
                    let name: Vec<String> = nums(line, &toks, 1)?;
                    profile = Some(name[0].parse::<Profile>().map_err(|e| bad(line, e))?);
                }
                "input_dim" => input_dim = Some(nums::<usize>(line, &toks, 1)?[0]),
                "court_file" => {}
                "court_hash" => court_hash = Some(nums::<String>(line, &toks, 1)?[0].clone()),
                "rig" => {
                    let v: Vec<f64> = nums(line, &toks, 8)?;
                    rig = Some(CameraRig {
                        fx: v[0],
                        fy: v[1],
                        cx: v[2],
                        cy: v[3],
                        width: v[4] as usize,
                        height: v[5] as usize,
                        mount_height: v[6],
                        mount_pitch: v[7],
                    });
                }
                "floor_color" => style.floor_color = color(line, &toks)?,
                "line_color" => style.line_color = color(line, &toks)?,
                "background_color" => style.background_color = color(line, &toks)?,
                "noise_std" => style.noise_std = nums(line, &toks, 1)?[0],
                "antialias_samples" => style.antialias_samples = nums(line, &toks, 1)?[0],
                "seed" => seed = Some(nums::<u64>(line, &toks, 1)?[0]),
                "yaw_mode" => {
                    yaw_mode = Some(match toks.get(1) {
                        Some(&"uniform") if toks.len() == 2 => YawMode::Uniform,
                        Some(&"fixed") if toks.len() == 3 => YawMode::Fixed(
                            toks[2].parse().map_err(|_| bad(line, "invalid fixed yaw"))?,
                        ),
                        _ => return Err(bad(line, "yaw_mode must be `uniform` or `fixed <rad>`")),
                    })
                }
                "train_fraction" => train_fraction = Some(nums::<f64>(line, &toks, 1)?[0]),
                "split_seed" => split_seed = Some(nums::<u64>(line, &toks, 1)?[0]),
                "mask_a" | "mask_b" | "angle_start" | "angle_end" | "angle_step" | "origin" | "max_d" => {
                    // keep line numbers aligned for error messages
                    while pre_lines.lines().count() < idx {
                        pre_lines.push('\n');
                    }
                    pre_lines.push_str(raw);
                    pre_lines.push('\n');
                }
                "samples" => declared = Some(nums::<usize>(line, &toks, 1)?[0]),
                "sample" => {
                    if toks.len() != 6 {
                        return Err(bad(line, "sample lines are `sample <path> <x> <y> <yaw> <split>`"));
                    }
                    let v: Vec<f64> = toks[2..5]
                        .iter()
                        .map(|t| t.parse().map_err(|_| bad(line, format!("invalid number `{t}`"))))
                        .collect::<Result<_>>()?;
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(bad(line, "non-finite pose"));
                    }
                    let split = match toks[5] {
                        "train" => Some(Split::Train),
                        "test" => Some(Split::Test),
                        "-" => None,
                        other => return Err(bad(line, format!("unknown split `{other}`"))),
                    };
                    samples.push(Sample {
                        image: toks[1].to_string(),
                        pose: Pose2D {
                            x: v[0],
                            y: v[1],
                            yaw: v[2],
                        },
                        split,
                    });
                }
                other => return Err(bad(line, format!("unknown key `{other}`"))),
            }
        }
        let missing = |what: &str| Error::MalformedManifest(format!("missing `{what}`"));
        if !format_seen {
            return Err(missing("format"));
        }
        let profile = profile.ok_or_else(|| missing("profile"))?;
        if let Some(d) = input_dim {
            if d != profile.input_dim() {
                return Err(Error::MalformedManifest(format!(
                    "input_dim {d} does not match the {profile} profile ({})",
                    profile.input_dim()
                )));
            }
        }
        let declared = declared.ok_or_else(|| missing("samples"))?;
        if declared != samples.len() {
            return Err(Error::MalformedManifest(format!(
                "declares {declared} samples but lists {}",
                samples.len()
            )));
        }
        let preprocess = PreprocessConfig::parse(&pre_lines, Path::new(MANIFEST_FILE))
            .map_err(|e| Error::MalformedManifest(e.to_string()))?;
        Ok(DatasetManifest {
            profile,
            court_hash: court_hash.ok_or_else(|| missing("court_hash"))?,
            rig: rig.ok_or_else(|| missing("rig"))?,
            style,
            preprocess,
            seed: seed.ok_or_else(|| missing("seed"))?,
            yaw_mode: yaw_mode.ok_or_else(|| missing("yaw_mode"))?,
            train_fraction,
            split_seed,
            samples,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn count(&self, split: Split) -> usize {
        self.samples.iter().filter(|s| s.split == Some(split)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSample {
    pub features: SparseVec,
    pub label: [f64; 2],
    pub split: Option<Split>,
}

/// A manifest with every image preprocessed into a sparse feature vector.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
    pub samples: Vec<LoadedSample>,
}

impl Dataset {
    pub fn input_dim(&self) -> usize {
        self.manifest.input_dim()
    }

    /// Training examples for one split, in manifest order.
    pub fn examples(&self, split: Split) -> Vec<Example<SparseVec>> {
        self.samples
            .iter()
            .filter(|s| s.split == Some(split))
            .map(|s| Example {
                input: s.features.clone(),
                target: s.label.to_vec(),
            })
            .collect()
    }
}

/// Preprocesses one frame with the manifest's recorded configuration.
pub fn featurize(manifest: &DatasetManifest, img: &ImageBuffer) -> Result<SparseVec> {
    let dense = preprocess_pipeline(img, &manifest.preprocess, manifest.profile)?;
    Ok(SparseVec::from_dense(&dense))
}

/// Loads `manifest.txt` (or the given manifest file) and preprocesses every image.
pub fn load(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let root = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let manifest = DatasetManifest::load(&manifest_path)?;

    let court_path = root.join(COURT_FILE);
    if court_path.exists() {
        let court = CourtSpec::load(&court_path)?;
        if court.hash() != manifest.court_hash {
            return Err(Error::MalformedManifest(format!(
                "{} does not match the recorded court hash",
                court_path.display()
            )));
        }
    }

    let samples = manifest
        .samples
        .par_iter()
        .map(|s| {
            let img = ImageBuffer::load(&root.join(&s.image))?;
            Ok(LoadedSample {
                features: featurize(&manifest, &img)?,
                label: s.label(),
                split: s.split,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        root,
        manifest,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_manifest(n: usize) -> DatasetManifest {
        DatasetManifest {
            profile: Profile::Reduced,
            court_hash: "abc".into(),
            rig: Profile::Reduced.rig(),
            style: RenderStyle::default(),
            preprocess: PreprocessConfig::default(),
            seed: 1,
            yaw_mode: YawMode::Fixed(0.0),
            train_fraction: None,
            split_seed: None,
            samples: (0..n)
                .map(|i| Sample {
                    image: format!("images/{i:06}.ppm"),
                    pose: Pose2D::new(i as f64 * 0.01, -0.5, 0.0),
                    split: None,
                })
                .collect(),
        }
    }

    #[test]
    fn split_counts() {
        assert_eq!(train_count(10, 0.9), 9);
        assert_eq!(train_count(6283, 0.9), 5654);
        assert_eq!(train_count(100, 0.29), 29);
        let mut m = tiny_manifest(10);
        let s = split(&mut m, 0.9, 3).unwrap();
        assert_eq!((s.train, s.test), (9, 1));
        assert!(s.warning.is_none());
        let mut one = tiny_manifest(1);
        let s = split(&mut one, 0.9, 3).unwrap();
        assert_eq!((s.train, s.test), (0, 1));
        assert!(s.warning.is_some());
        assert!(split(&mut one, 1.0, 3).is_err());
    }

    #[test]
    fn split_is_seeded() {
        let assign = |seed| {
            let mut m = tiny_manifest(100);
            split(&mut m, 0.9, seed).unwrap();
            m.samples.iter().map(|s| s.split).collect::<Vec<_>>()
        };
        assert_eq!(assign(4), assign(4));
        let distinct: std::collections::HashSet<_> = (0..20).map(|s| format!("{:?}", assign(s))).collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn manifest_text_roundtrip() {
        let mut m = tiny_manifest(5);
        m.yaw_mode = YawMode::Fixed(0.25);
        m.style.noise_std = 2.0;
        split(&mut m, 0.6, 0).unwrap();
        let back = DatasetManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_errors() {
        let m = tiny_manifest(2);
        let text = m.to_text();
        assert!(matches!(
            DatasetManifest::parse(&text.replace("samples 2", "samples 3")),
            Err(Error::MalformedManifest(_))
        ));
        assert!(matches!(
            DatasetManifest::parse(&text.replace("format courtloc-manifest", "format other")),
            Err(Error::MalformedManifest(_))
        ));
        assert!(matches!(
            DatasetManifest::parse(&text.replace("input_dim 44800", "input_dim 179200")),
            Err(Error::MalformedManifest(_))
        ));
        assert!(matches!(
            DatasetManifest::parse(&format!("{text}bogus 1\n")),
            Err(Error::MalformedManifest(_))
        ));
    }

    #[test]
    fn occupancy_grid() {
        let court = CourtSpec::default();
        let poses = [Pose2D::new(-7.4, -3.9, 0.0), Pose2D::new(7.4, 3.9, 0.0), Pose2D::new(0.1, 0.1, 0.0)];
        let occ = grid_occupancy(&court, &poses, (10, 6));
        assert_eq!(occ[0], 1);
        assert_eq!(occ[59], 1);
        assert_eq!(occ[3 * 10 + 5], 1);
        assert_eq!(occ.iter().sum::<usize>(), 3);
    }

    #[test]
    fn large_draws_cover_the_grid() {
        let court = CourtSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let poses = sample_poses(&court, 600, &mut rng, YawMode::Fixed(0.0)).unwrap();
        assert!(grid_occupancy(&court, &poses, COVERAGE_GRID).iter().all(|&c| c > 0));
    }
}
