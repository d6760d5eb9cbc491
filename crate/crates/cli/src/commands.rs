use std::path::{Path, PathBuf};
use std::time::Instant;

use courtloc::costmodel::{self, ConvSpec};
use courtloc::dataset::{self, DatasetManifest, GenerateConfig, Split};
use courtloc::nn::{self, MlpModel, SparseVec, TrainConfig};
use courtloc::preprocess::{preprocess_pipeline, PreprocessConfig};
use courtloc::stats::{self, table2, CorrelationResult};
use courtloc::xai;
use courtloc::{CourtSpec, Error, ImageBuffer, Profile, YawMode};

use crate::config::ConfigFile;
use crate::{AttributeArgs, CliError, Column, CostArgs, EvalArgs, GenArgs, InferArgs, SplitChoice, StatsArgs, TrainArgs};

pub struct Global {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub profile: Option<Profile>,
}

const DEFAULT_PROFILE: Profile = Profile::Reduced;
const DEFAULT_COUNT: u64 = 2000;
const DEFAULT_TRAIN_FRACTION: f64 = 0.9;
pub const MODEL_FILE: &str = "model.floc";
pub const LOSS_FILE: &str = "loss.csv";
pub const METRICS_FILE: &str = "metrics.csv";

type CliResult = Result<(), CliError>;

fn out_dir(global: &Global, default: &str) -> Result<PathBuf, CliError> {
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from(default));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn parse_yaw(s: &str) -> Result<YawMode, CliError> {
    if s == "uniform" {
        return Ok(YawMode::Uniform);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(YawMode::Fixed)
        .ok_or_else(|| CliError::Usage(format!("yaw must be `uniform` or an angle in radians, got `{s}`")))
}

fn load_preprocess(path: Option<&Path>) -> Result<PreprocessConfig, CliError> {
    Ok(match path {
        Some(p) => PreprocessConfig::load(p)?,
        None => PreprocessConfig::default(),
    })
}

/// Profile implied by a network input size, checked against `--profile` when given.
fn profile_for(model: &MlpModel<f32>, requested: Option<Profile>) -> Result<Profile, CliError> {
    let found = [Profile::Full, Profile::Reduced]
        .into_iter()
        .find(|p| p.input_dim() == model.input_dim());
    match (found, requested) {
        (Some(f), Some(r)) if f != r => Err(Error::InputShape(format!(
            "checkpoint takes {} inputs ({f} profile) but --profile {r} was given",
            model.input_dim()
        ))
        .into()),
        (Some(f), _) => Ok(f),
        (None, _) => Err(Error::InputShape(format!(
            "checkpoint input size {} matches no resolution profile",
            model.input_dim()
        ))
        .into()),
    }
}

pub fn gen(global: &Global, cfg: &ConfigFile, a: &GenArgs) -> CliResult {
    let count = cfg.resolve(a.n, "n", DEFAULT_COUNT)?;
    if count == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let profile = global.profile.unwrap_or(DEFAULT_PROFILE);
    let fraction = cfg.resolve(a.train_fraction, "train_fraction", DEFAULT_TRAIN_FRACTION)?;
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::Usage(format!("--train-fraction must lie in (0, 1), got {fraction}")));
    }
    let split_seed = cfg.resolve(a.split_seed, "split_seed", global.seed)?;
    let yaw = parse_yaw(&cfg.resolve(a.yaw.clone(), "yaw", "0".to_string())?)?;

    let mut gen_cfg = GenerateConfig::new(profile, count as usize, global.seed);
    gen_cfg.yaw_mode = yaw;
    gen_cfg.style.noise_std = cfg.resolve(a.noise_std, "noise_std", gen_cfg.style.noise_std)?;
    if let Some(p) = cfg.resolve_opt(a.court.clone(), "court")? {
        gen_cfg.court = CourtSpec::load(&p)?;
    }
    gen_cfg.preprocess = load_preprocess(cfg.resolve_opt(a.preprocess.clone(), "preprocess")?.as_deref())?;

    let dir = out_dir(global, "dataset")?;
    let mut manifest = dataset::generate(&gen_cfg, &dir)?;
    let summary = dataset::split(&mut manifest, fraction, split_seed)?;
    let manifest_path = dir.join(dataset::MANIFEST_FILE);
    manifest.save(&manifest_path)?;
    println!(
        "wrote {} samples ({} train, {} test, input dim {}) to {}",
        manifest.samples.len(),
        summary.train,
        summary.test,
        manifest.input_dim(),
        manifest_path.display()
    );
    Ok(())
}

fn parse_layers(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Usage(format!("--layers must be comma-separated integers, got `{s}`")))
}

pub fn train(global: &Global, cfg: &ConfigFile, a: &TrainArgs) -> CliResult {
    let data = dataset::load(&a.data)?;
    let profile = data.manifest.profile;
    if let Some(p) = global.profile.filter(|&p| p != profile) {
        return Err(Error::InputShape(format!("dataset uses the {profile} profile, not {p}")).into());
    }
    let defaults = TrainConfig::default();
    let train_cfg = TrainConfig {
        epochs: cfg.resolve(a.epochs, "epochs", defaults.epochs)?,
        batch_size: cfg.resolve(a.batch_size, "batch_size", defaults.batch_size)?,
        learning_rate: cfg.resolve(a.learning_rate, "learning_rate", defaults.learning_rate)?,
        seed: global.seed,
    };
    train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let dims = match cfg.resolve_opt(a.layers.clone(), "layers")? {
        Some(s) => parse_layers(&s)?,
        None => profile.default_layer_dims(),
    };
    if dims.first() != Some(&data.input_dim()) || dims.last() != Some(&2) {
        return Err(CliError::Usage(format!(
            "layers must start at the input size {} and end at 2, got {dims:?}",
            data.input_dim()
        )));
    }
    let examples = data.examples(Split::Train);
    let mut model = MlpModel::<f32>::he_uniform(&dims, global.seed)?;
    let curve = nn::train_with(&mut model, &examples, &train_cfg, |epoch, loss| {
        log::info!("epoch {} loss {loss:.6}", epoch + 1);
    })?;
    if !model.all_finite() {
        return Err(Error::Numeric("training diverged to non-finite weights".into()).into());
    }
    let dir = out_dir(global, "run")?;
    nn::save_checkpoint(&model, &dir.join(MODEL_FILE))?;
    nn::write_loss_csv(&curve, &dir.join(LOSS_FILE))?;
    println!(
        "trained {dims:?} on {} samples for {} epochs; final loss {:.6}; wrote {} and {}",
        examples.len(),
        train_cfg.epochs,
        curve.last().copied().unwrap_or(f64::NAN),
        dir.join(MODEL_FILE).display(),
        dir.join(LOSS_FILE).display()
    );
    Ok(())
}

pub fn eval(global: &Global, a: &EvalArgs) -> CliResult {
    let model: MlpModel<f32> = nn::load_checkpoint(&a.model)?;
    let data = dataset::load(&a.data)?;
    if model.input_dim() != data.input_dim() {
        return Err(Error::InputShape(format!(
            "checkpoint takes {} inputs but the dataset provides {}",
            model.input_dim(),
            data.input_dim()
        ))
        .into());
    }
    let examples = match a.split {
        SplitChoice::Train => data.examples(Split::Train),
        SplitChoice::Test => data.examples(Split::Test),
        SplitChoice::All => data
            .samples
            .iter()
            .map(|s| nn::Example {
                input: s.features.clone(),
                target: s.label.to_vec(),
            })
            .collect(),
    };
    let m = nn::evaluate(&model, &examples)?;
    let record = format!("{},{},{},{}", m.x_loss, m.y_loss, m.mse, m.count);
    println!("x_loss={:.6} y_loss={:.6} mse={:.6} n={}", m.x_loss, m.y_loss, m.mse, m.count);
    if let Some(dir) = &global.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(METRICS_FILE);
        std::fs::write(&path, format!("x_loss,y_loss,mse,count\n{record}\n")).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn infer(global: &Global, a: &InferArgs) -> CliResult {
    let model: MlpModel<f32> = nn::load_checkpoint(&a.model)?;
    let profile = profile_for(&model, global.profile)?;
    let pre = load_preprocess(a.preprocess.as_deref())?;
    let img = ImageBuffer::load(&a.image)?;
    let start = Instant::now();
    let features = SparseVec::from_dense(&preprocess_pipeline(&img, &pre, profile)?);
    let out = model.forward(&features)?;
    let elapsed = start.elapsed();
    if out.len() != 2 {
        return Err(Error::InputShape(format!("checkpoint has {} outputs, expected 2", out.len())).into());
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("prediction is not finite".into()).into());
    }
    println!("({:.3}, {:.3})", out[0], out[1]);
    println!("time_ms {:.3}", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

pub fn attribute(global: &Global, cfg: &ConfigFile, a: &AttributeArgs) -> CliResult {
    let model32: MlpModel<f32> = nn::load_checkpoint(&a.model)?;
    let steps = cfg.resolve(a.steps, "steps", xai::DEFAULT_STEPS)?;
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }
    let (profile, features) = match (&a.data, &a.image) {
        (Some(data), None) => {
            let manifest_path = if data.is_dir() {
                data.join(dataset::MANIFEST_FILE)
            } else {
                data.clone()
            };
            let manifest = DatasetManifest::load(&manifest_path)?;
            let index = a.index.unwrap_or(0);
            let sample = manifest.samples.get(index).ok_or_else(|| {
                CliError::Usage(format!("--index {index} out of range for {} samples", manifest.samples.len()))
            })?;
            let root = manifest_path.parent().unwrap_or(Path::new("."));
            let img = ImageBuffer::load(&root.join(&sample.image))?;
            (manifest.profile, dataset::featurize(&manifest, &img)?)
        }
        (None, Some(image)) => {
            let profile = profile_for(&model32, global.profile)?;
            let pre = load_preprocess(a.preprocess.as_deref())?;
            let img = ImageBuffer::load(image)?;
            (profile, SparseVec::from_dense(&preprocess_pipeline(&img, &pre, profile)?))
        }
        _ => return Err(CliError::Usage("give either --data (with --index) or --image".into())),
    };
    if model32.input_dim() != profile.input_dim() || model32.output_dim() != 2 {
        return Err(Error::InputShape(format!(
            "checkpoint dims {:?} do not fit the {profile} profile",
            model32.layer_dims()
        ))
        .into());
    }
    let model: MlpModel<f64> = model32.cast();
    let x: Vec<f64> = features.to_dense();
    let zeros = vec![0.0; x.len()];
    let (w, h) = (profile.width(), profile.cropped_height());
    let dir = out_dir(global, "attribution")?;
    let mut maps = Vec::new();
    for (index, name) in [(0, "x"), (1, "y")] {
        let att = xai::integrated_gradients(&model, &x, &zeros, steps, index)?;
        let gap = xai::completeness_gap(&model, &x, &zeros, &att)?;
        xai::export_saliency(&att, w, h, &dir.join(format!("saliency_{name}.pgm")))?;
        println!("{name}: attribution sum {:.6}, completeness gap {gap:.3e}", att.sum());
        maps.push(att);
    }
    let mut csv = String::from("index,x,y\n");
    for (i, (ax, ay)) in maps[0].values.iter().zip(&maps[1].values).enumerate() {
        csv.push_str(&format!("{i},{ax},{ay}\n"));
    }
    let path = dir.join("attributions.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    println!("wrote saliency_x.pgm, saliency_y.pgm and attributions.csv to {}", dir.display());
    Ok(())
}

fn read_pairs(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                xs.push(v[0]);
                ys.push(v[1]);
            }
            None if xs.is_empty() && i == 0 => {}
            _ => return Err(Error::parse(path, i + 1, "expected two numeric columns `x,y`").into()),
        }
    }
    Ok((xs, ys))
}

fn print_correlation(c: &CorrelationResult) {
    println!(
        "r={:.4} t={:.4} df={} p={:.4} decision={}",
        c.r,
        c.t,
        c.df,
        c.p,
        c.decision()
    );
}

pub fn stats(a: &StatsArgs) -> CliResult {
    if let Some(_fixture) = a.fixture {
        let (ys, reported) = match a.column {
            Column::X => (&table2::X_LOSS, table2::REPORTED_R_X),
            Column::Y => (&table2::Y_LOSS, table2::REPORTED_R_Y),
        };
        let c = stats::correlation_test(&table2::ITERATIONS, ys)?;
        print_correlation(&c);
        println!("reported_r={reported}");
        return Ok(());
    }
    if let Some(path) = &a.csv {
        let (xs, ys) = read_pairs(path)?;
        print_correlation(&stats::correlation_test(&xs, &ys)?);
        return Ok(());
    }
    match (a.r, a.n) {
        (Some(r), Some(n)) => {
            print_correlation(&stats::correlation_test_from_r(r, n)?);
            Ok(())
        }
        _ => Err(CliError::Usage("give --fixture, --csv, or --r with --n".into())),
    }
}

pub fn cost(a: &CostArgs) -> CliResult {
    let spec = ConvSpec::new(a.dk, a.m, a.n, a.df).map_err(|e| CliError::Usage(e.to_string()))?;
    let standard = costmodel::cost_standard(&spec)?;
    let separable = costmodel::cost_dw_separable(&spec)?;
    let ratio = costmodel::cost_ratio(&spec)?;
    println!("standard {standard}");
    println!("separable {separable}");
    println!("ratio {:.6} ({}/{})", costmodel::ratio_to_f64(&ratio), ratio.numer(), ratio.denom());
    Ok(())
}
