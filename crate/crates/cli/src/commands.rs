use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use speckle_core::compensation::{run_pipeline_traced, FeatureMap, Weights};
use speckle_core::image_io::{load_gray, save_pgm16, GrayImage};
use speckle_core::metrics::{evaluate, evaluate_directories, evaluate_files, BatchReport, MaskPair, MeanScores};
use speckle_core::solver::{run_triwcp, IntensityObjective, SolverOutcome};
use speckle_core::speckle::{forward_model, SimInstance};
use speckle_core::wpcf;
use speckle_core::{ComplexField, Propagator};

use crate::config::{Initializer, PipelineConfig};
use crate::error::{io_at, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub struct Context {
    pub config: PipelineConfig,
    pub out: PathBuf,
    pub dump_stages: bool,
}

impl Context {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare_out(&self) -> CliResult<()> {
        fs::create_dir_all(&self.out).map_err(io_at(&self.out))
    }

    /// Writes `<command>.json` with the provenance header merged into `body`.
    fn write_report(&self, command: &str, body: Value) -> CliResult<Value> {
        let mut report = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config": self.config,
        });
        if let (Some(target), Value::Object(extra)) = (report.as_object_mut(), body) {
            target.extend(extra);
        }
        let path = self.path(&format!("{command}.json"));
        let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
        text.push('\n');
        fs::write(&path, text).map_err(io_at(&path))?;
        Ok(report)
    }
}

/// Max-normalizes a non-negative image; returns the values and the scale.
fn max_normalized(values: &[f64]) -> (Vec<f64>, f64) {
    let scale = values.iter().cloned().fold(0.0, f64::max);
    if scale > 0.0 {
        (values.iter().map(|v| v / scale).collect(), scale)
    } else {
        (values.to_vec(), 1.0)
    }
}

fn save_intensity(path: &Path, width: usize, height: usize, values: &[f64]) -> CliResult<f64> {
    let (normalized, scale) = max_normalized(values);
    save_pgm16(path, width, height, &normalized)?;
    Ok(scale)
}

pub fn simulate(ctx: &Context) -> CliResult<Value> {
    let scene = &ctx.config.scene;
    let sim = forward_model(scene)?;
    ctx.prepare_out()?;
    let scale = save_intensity(&ctx.path("intensity.pgm"), scene.width, scene.height, &sim.measured_intensity)?;
    wpcf::save_field(ctx.path("ground_truth.wpcf"), &sim.ground_truth_field, Some(scene.wavelength_m))?;
    let sampling = scene.spec_total()?.sampling(scene.width, scene.height, scene.pitch_m);
    ctx.write_report(
        "simulate",
        json!({
            "snr_db": finite_or_null(sim.snr_db),
            "intensity_scale": scale,
            "sampling": sampling,
            "files": ["intensity.pgm", "ground_truth.wpcf", "simulate.json"],
        }),
    )
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub struct Reconstruction {
    pub initial: ComplexField,
    pub outcome: SolverOutcome,
}

/// Loads the measurement and runs the solver from the configured initializer.
pub fn reconstruct_from(config: &PipelineConfig, intensity: &GrayImage) -> CliResult<Reconstruction> {
    let scene = &config.scene;
    if (intensity.width, intensity.height) != (scene.width, scene.height) {
        return Err(speckle_core::Error::ShapeMismatch {
            expected: (scene.width, scene.height),
            found: (intensity.width, intensity.height),
        }
        .into());
    }
    let measured: Vec<f64> = intensity.values.iter().map(|v| v * config.io.intensity_scale).collect();
    let spec = config.propagation_spec()?;
    let objective = IntensityObjective::new(measured, scene.width, scene.height, scene.pitch_m, spec)?;
    let initial = match &config.reconstruct.initializer {
        Initializer::AdjointSqrt => {
            let amplitude: Vec<f64> = objective.measured().iter().map(|v| v.sqrt()).collect();
            let amplitude = ComplexField::from_real(scene.width, scene.height, scene.pitch_m, &amplitude)?;
            objective.propagator().adjoint(&amplitude)?
        }
        Initializer::Field { path } => {
            let (field, _) = wpcf::load_field(path)?;
            field.ensure_same_shape(&ComplexField::zeros(scene.width, scene.height, scene.pitch_m)?)?;
            field
        }
    };
    let outcome = run_triwcp(&initial, &objective, &config.solver)?;
    Ok(Reconstruction { initial, outcome })
}

pub fn reconstruct(ctx: &Context, input: Option<&Path>) -> CliResult<Value> {
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| ctx.config.io.intensity.clone())
        .ok_or(CliError::MissingInput("intensity"))?;
    let intensity = load_gray(&path)?;
    let r = reconstruct_from(&ctx.config, &intensity)?;
    let scene = &ctx.config.scene;
    let spec = ctx.config.propagation_spec()?;

    ctx.prepare_out()?;
    wpcf::save_field(ctx.path("reconstruction.wpcf"), &r.outcome.field, Some(spec.wavelength))?;
    let scale = save_intensity(&ctx.path("reconstruction.pgm"), scene.width, scene.height, &r.outcome.field.intensity())?;
    let initial_scale = save_intensity(&ctx.path("initial.pgm"), scene.width, scene.height, &r.initial.intensity())?;
    let propagator = Propagator::for_field(spec, &r.outcome.field)?;
    ctx.write_report(
        "reconstruct",
        json!({
            "input": path,
            "propagation": spec,
            "sampling": propagator.sampling(),
            "initial_objective": r.outcome.initial_objective,
            "phase_objectives": r.outcome.phase_objectives,
            "out_of_band_mass": propagator.out_of_band_mass(&r.outcome.field)?,
            "intensity_scale": scale,
            "initial_intensity_scale": initial_scale,
            "files": ["reconstruction.wpcf", "reconstruction.pgm", "initial.pgm", "reconstruct.json"],
        }),
    )
}

fn load_weights(config: &PipelineConfig, channels: usize, high_channels: usize) -> CliResult<Weights> {
    let c = &config.compensation;
    match &c.weights {
        Some(path) => Ok(Weights::load(path)?),
        None => {
            let d = c.attention_dim.unwrap_or(channels);
            let mut w = Weights::random(channels, high_channels, d, config.seed())?;
            w.branch.activation = c.activation;
            Ok(w)
        }
    }
}

#[derive(Serialize)]
struct StageInfo {
    name: &'static str,
    channels: usize,
    height: usize,
    width: usize,
    norm: f64,
}

pub fn filter(ctx: &Context, input: Option<&Path>) -> CliResult<Value> {
    let io = &ctx.config.io;
    let path = input
        .map(Path::to_path_buf)
        .or_else(|| io.features.clone())
        .ok_or(CliError::MissingInput("features"))?;
    let stack = wpcf::load_stack(&path)?;
    let low = FeatureMap::from_stack(&stack)?;
    let high = match &io.high_level {
        Some(p) => FeatureMap::from_stack(&wpcf::load_stack(p)?)?,
        None => low.clone(),
    };
    let weights = load_weights(&ctx.config, low.channels(), high.channels())?;
    let (fin, stages) = run_pipeline_traced(&low, &high, &weights)?;

    ctx.prepare_out()?;
    let save = |file: PathBuf, map: &FeatureMap| -> CliResult<()> {
        let mut s = map.to_stack(stack.pitch);
        s.wavelength = stack.wavelength;
        Ok(wpcf::save_stack(file, &s)?)
    };
    save(ctx.path("final.wpcf"), &fin)?;
    let mut files = vec!["final.wpcf".to_string()];
    if ctx.dump_stages {
        let dir = ctx.path("stages");
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        for (name, map) in &stages {
            save(dir.join(format!("{name}.wpcf")), map)?;
            files.push(format!("stages/{name}.wpcf"));
        }
    }
    let info: Vec<StageInfo> = stages
        .iter()
        .map(|(name, m)| StageInfo {
            name,
            channels: m.channels(),
            height: m.height(),
            width: m.width(),
            norm: m.norm_sqr().sqrt(),
        })
        .collect();
    files.push("filter.json".into());
    ctx.write_report(
        "filter",
        json!({
            "input": path,
            "weights": ctx.config.compensation.weights.as_ref().map_or("random".into(), |p| p.display().to_string()),
            "stages": info,
            "files": files,
        }),
    )
}

pub fn evaluate_cmd(ctx: &Context, pred: Option<&Path>, gt: Option<&Path>) -> CliResult<Value> {
    let io = &ctx.config.io;
    let pred = pred
        .map(Path::to_path_buf)
        .or_else(|| io.predictions.clone())
        .ok_or(CliError::MissingInput("predictions"))?;
    let gt = gt
        .map(Path::to_path_buf)
        .or_else(|| io.ground_truth.clone())
        .ok_or(CliError::MissingInput("ground_truth"))?;
    let options = &ctx.config.evaluate;
    let report = if pred.is_dir() && gt.is_dir() {
        evaluate_directories(&pred, &gt, options)?
    } else if pred.is_file() && gt.is_file() {
        let image = evaluate_files(&pred, &gt, options)?;
        BatchReport {
            mean: MeanScores::of(std::slice::from_ref(&image)),
            images: vec![image],
            unmatched_predictions: Vec::new(),
            unmatched_ground_truths: Vec::new(),
        }
    } else {
        return Err(CliError::Usage(format!(
            "{} and {} must both be files or both be directories",
            pred.display(),
            gt.display()
        )));
    };
    if report.images.is_empty() {
        return Err(CliError::NoMatches);
    }
    ctx.prepare_out()?;
    let mut body = serde_json::to_value(&report).expect("reports serialize");
    if let Value::Object(map) = &mut body {
        map.insert("predictions".into(), json!(pred));
        map.insert("ground_truths".into(), json!(gt));
    }
    ctx.write_report("evaluate", body)
}

#[derive(Serialize)]
struct Timing {
    name: &'static str,
    min_s: f64,
    mean_s: f64,
    max_s: f64,
}

fn time<T>(repeats: usize, mut f: impl FnMut() -> CliResult<T>) -> CliResult<(T, [f64; 3])> {
    let mut samples = Vec::with_capacity(repeats);
    let mut last = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        last = Some(f()?);
        samples.push(start.elapsed().as_secs_f64());
    }
    let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = samples.iter().cloned().fold(0.0, f64::max);
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok((last.expect("at least one run"), [min, mean, max]))
}

/// Wall-clock timings of each pipeline stage on the configured scene. Unlike
/// the other reports, timings differ between runs.
pub fn bench(ctx: &Context, repeats: usize) -> CliResult<Value> {
    let config = &ctx.config;
    let scene = &config.scene;
    let mut timings = Vec::new();
    let mut record = |name, t: [f64; 3]| {
        timings.push(Timing {
            name,
            min_s: t[0],
            mean_s: t[1],
            max_s: t[2],
        })
    };

    let (sim, t): (SimInstance, _) = time(repeats, || Ok(forward_model(scene)?))?;
    record("simulate", t);
    let spec = config.propagation_spec()?;
    let propagator = Propagator::new(spec, scene.width, scene.height, scene.pitch_m)?;
    let (_, t) = time(repeats, || Ok(propagator.propagate(&sim.ground_truth_field)?))?;
    record("propagate", t);
    let (_, t) = time(repeats, || Ok(propagator.adjoint(&sim.ground_truth_field)?))?;
    record("adjoint", t);
    let (_, t) = time(repeats, || Ok(propagator.project(&sim.ground_truth_field)?))?;
    record("project", t);

    let intensity = GrayImage {
        width: scene.width,
        height: scene.height,
        values: sim.measured_intensity.clone(),
    };
    let mut solver_config = config.clone();
    solver_config.io.intensity_scale = 1.0;
    let (r, t) = time(repeats, || reconstruct_from(&solver_config, &intensity))?;
    record("reconstruct", t);

    let (recon, _) = max_normalized(&r.outcome.field.intensity());
    let features = FeatureMap::new(1, scene.height, scene.width, recon.clone())?;
    let weights = load_weights(config, 1, 1)?;
    let (_, t) = time(repeats, || Ok(run_pipeline_traced(&features, &features, &weights)?))?;
    record("filter", t);

    let gt: Vec<bool> = sim.ground_truth_field.data().iter().map(|c| c.re > 0.5).collect();
    let pair = MaskPair::new(scene.width, scene.height, recon, gt)?;
    let (_, t) = time(repeats, || Ok(evaluate(&pair, &config.evaluate)))?;
    record("evaluate", t);

    ctx.prepare_out()?;
    ctx.write_report("bench", json!({ "repeats": repeats.max(1), "timings": timings }))
}
