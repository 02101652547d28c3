use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use super::{
    derive_seed, estimate_video, spec_for, Check, EstimateEntry, LoadedConfig, MetricRow, ParamRow, PipelineConfig,
    PipelineError, PredictionKind, Report, VideoEstimate, VideoInput, VideoRow,
};
use crate::calib::calibrate_intrinsics;
use crate::camera::CameraIntrinsics;
use crate::metrics::{self, MetricSeries, VideoBundle};
use crate::physics::{aggregate, MaterialTable, Quantity};
use crate::synth::{self, ScenarioConfig};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
    #[error("input missing: {0}")]
    InputMissing(String),
    #[error("{0}")]
    Failed(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::ConfigInvalid(_) => 2,
            RunError::InputMissing(_) => 3,
            RunError::Failed(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Simulate,
    Estimate,
    Metrics,
    Validate,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Estimate => "estimate",
            Mode::Metrics => "metrics",
            Mode::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: PathBuf,
    pub strict: bool,
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Used when neither the flag nor the config sets a seed.
    pub default_seed: Option<u64>,
    pub jobs: Option<usize>,
}

/// Run one batch mode and write its outputs. `Ok` carries the report and
/// whether the run counts as successful under `--strict`.
pub fn run(loaded: &LoadedConfig, mode: Mode, opts: &RunOptions) -> Result<(Report, bool), RunError> {
    let mut config = loaded.config.clone();
    config.check_common()?;
    if let Some(s) = opts.seed {
        config.seed = Some(s);
    } else if config.seed.is_none() {
        config.seed = opts.default_seed;
    }
    let seed = config.seed.unwrap_or(0);
    let table = match &config.material_table {
        Some(p) => {
            let path = loaded.resolve(p);
            if !path.exists() {
                return Err(RunError::InputMissing(path.display().to_string()));
            }
            MaterialTable::load(&path).map_err(|e| RunError::ConfigInvalid(e.to_string()))?
        }
        None => MaterialTable::builtin(),
    };
    let mut report = Report::new(mode.name(), config.digest(), seed, &config.model);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| RunError::Failed(format!("thread pool: {e}")))?;
    pool.install(|| -> Result<(), RunError> {
        match mode {
            Mode::Simulate => simulate_mode(&config, seed, &opts.out, &mut report),
            Mode::Estimate => estimate_mode(loaded, &config, &table, &mut report),
            Mode::Metrics => metrics_mode(loaded, &config, &mut report),
            Mode::Validate => validate_mode(&config, &table, seed, &opts.out, &mut report),
        }
    })?;
    report.count_failures();
    super::write_outputs(&report, &opts.out)
        .map_err(|e| RunError::Failed(format!("{}: {e}", opts.out.display())))?;
    let ok = !opts.strict || report.failures == 0;
    Ok((report, ok))
}

struct SimJob<'a> {
    material: &'a str,
    repeat: usize,
    scenario: ScenarioConfig,
}

impl SimJob<'_> {
    fn dir_name(&self) -> String {
        format!("bundles/{}_{:03}", self.material, self.repeat)
    }
}

fn sim_jobs(config: &PipelineConfig, seed: u64) -> Result<Vec<SimJob<'_>>, RunError> {
    if config.experiments.is_empty() {
        return Err(RunError::ConfigInvalid("no experiments configured".into()));
    }
    let mut names = std::collections::BTreeSet::new();
    let mut jobs = Vec::new();
    for (i, e) in config.experiments.iter().enumerate() {
        if !names.insert(&e.material) {
            return Err(RunError::ConfigInvalid(format!("material {:?} listed twice", e.material)));
        }
        for k in 0..e.repeats {
            let mut scenario = e.scenario.clone();
            scenario.seed = derive_seed(seed, i as u64, k as u64);
            jobs.push(SimJob { material: &e.material, repeat: k, scenario });
        }
    }
    Ok(jobs)
}

fn calibrated(config: &PipelineConfig, job: &SimJob) -> Result<Option<CameraIntrinsics>, PipelineError> {
    let Some(c) = config.calibration else { return Ok(None) };
    let cfg = &job.scenario;
    let views = synth::calibration_views(&cfg.camera, &cfg.board, c.views, c.noise_px, cfg.seed)?;
    let cal = calibrate_intrinsics(&views, &cfg.board, (cfg.camera.width, cfg.camera.height))?;
    Ok(Some(cal.intrinsics))
}

fn simulate_mode(config: &PipelineConfig, seed: u64, out: &Path, report: &mut Report) -> Result<(), RunError> {
    let jobs = sim_jobs(config, seed)?;
    let rows: Vec<VideoRow> = jobs
        .par_iter()
        .map(|job| {
            let source = job.dir_name();
            let result = synth::simulate(&job.scenario).and_then(|b| b.write_dir(&out.join(&source)));
            VideoRow {
                material: job.material.into(),
                source,
                seed: Some(job.scenario.seed),
                truth: spec_for(&job.scenario.motion).map(|(_, v)| v),
                estimate: None,
                error: result.err().map(|e| e.to_string()),
            }
        })
        .collect();
    report.videos = rows;
    Ok(())
}

fn tolerance_check(config: &PipelineConfig, quantity: Quantity, value: f64, truth: f64) -> (bool, String) {
    let t = config.tolerances;
    let (err, tol, what) = match quantity {
        Quantity::Gravity => ((value - truth).abs() / truth.abs(), t.gravity_rel, "relative"),
        Quantity::Friction => ((value - truth).abs(), t.friction_abs, "absolute"),
        Quantity::Viscosity => ((value - truth).abs() / truth.abs(), t.viscosity_rel, "relative"),
    };
    (err <= tol, format!("estimate {value:.6} vs truth {truth:.6}: {what} error {err:.3e} (tolerance {tol})"))
}

fn validate_mode(
    config: &PipelineConfig,
    table: &MaterialTable,
    seed: u64,
    out: &Path,
    report: &mut Report,
) -> Result<(), RunError> {
    if config.experiments.is_empty() && config.scenes.is_none() {
        return Err(RunError::ConfigInvalid("validate needs experiments or scenes".into()));
    }
    if !config.experiments.is_empty() {
        for e in &config.experiments {
            table.get(&e.material).map_err(|err| RunError::ConfigInvalid(err.to_string()))?;
        }
        let jobs = sim_jobs(config, seed)?;
        let rows: Vec<VideoRow> = jobs
            .par_iter()
            .map(|job| {
                let (spec, truth) = spec_for(&job.scenario.motion).expect("checked in config");
                let source = job.dir_name();
                let result = (|| -> Result<VideoEstimate, PipelineError> {
                    let dir = out.join(&source);
                    synth::simulate(&job.scenario)?.write_dir(&dir)?;
                    let mut input = VideoInput::load(&dir, None, None, job.scenario.up_axis)?;
                    if let Some(k) = calibrated(config, job)? {
                        input.intrinsics = k;
                    }
                    estimate_video(&input, &spec, config.regime)
                })();
                let (estimate, error) = match result {
                    Ok(e) => (Some(e), None),
                    Err(e) => (None, Some(e.to_string())),
                };
                VideoRow { material: job.material.into(), source, seed: Some(job.scenario.seed), truth: Some(truth), estimate, error }
            })
            .collect();
        for row in &rows {
            if let (Some(est), Some(truth)) = (&row.estimate, row.truth) {
                let (passed, detail) = tolerance_check(config, est.quantity, est.value, truth);
                report.checks.push(Check { name: format!("truth:{}", row.source), passed, detail });
            }
        }
        report.videos = rows;
        aggregate_rows(config, table, report)?;
        let params = report.params.clone();
        for p in &params {
            let e = &p.estimate;
            report.checks.push(Check {
                name: format!("in_range:{}", e.material),
                passed: e.in_range,
                detail: format!("mean {:.6} vs [{}, {}]", e.mean, e.gt_low, e.gt_high),
            });
        }
    }
    if let Some(scenes) = &config.scenes {
        let jobs: Vec<(usize, synth::Scenario, usize)> = scenes
            .scenarios
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| (0..scenes.videos).map(move |v| (i, s, v)))
            .collect();
        let series: Vec<Result<MetricSeries, PipelineError>> = jobs
            .par_iter()
            .map(|&(i, s, v)| {
                let spec = synth::sample_scene(s, derive_seed(seed, 1000 + i as u64, v as u64));
                let gt = synth::render_scene(&spec)?;
                let pred = match scenes.prediction {
                    PredictionKind::Frozen => synth::frozen_prediction(&gt, spec.conditioning_frames),
                    PredictionKind::Dilated => synth::dilated_prediction(&gt),
                    PredictionKind::Identity => gt.clone(),
                };
                Ok(metrics::sequence_metrics(&gt, &pred, spec.conditioning_frames)?)
            })
            .collect();
        let mut by_scenario: Vec<(String, Vec<MetricSeries>, Vec<String>)> = Vec::new();
        let mut all = Vec::new();
        for (&(i, s, v), r) in jobs.iter().zip(series) {
            if by_scenario.len() <= i {
                by_scenario.push((s.label().into(), Vec::new(), Vec::new()));
            }
            let source = format!("scene:{}#{v}", serde_json::to_value(s).expect("enum").as_str().unwrap_or_default());
            match r {
                Ok(m) => {
                    all.push(m.clone());
                    by_scenario[i].1.push(m);
                    by_scenario[i].2.push(source);
                }
                Err(e) => report.videos.push(VideoRow {
                    material: s.label().into(),
                    source,
                    seed: None,
                    truth: None,
                    estimate: None,
                    error: Some(e.to_string()),
                }),
            }
        }
        summarize_into(report, by_scenario, &all)?;
    }
    Ok(())
}

fn summarize_into(
    report: &mut Report,
    groups: Vec<(String, Vec<MetricSeries>, Vec<String>)>,
    all: &[MetricSeries],
) -> Result<(), RunError> {
    for (label, series, sources) in groups {
        if series.is_empty() {
            continue;
        }
        let summary = metrics::summarize(&series, &label).map_err(|e| RunError::Failed(e.to_string()))?;
        report.metrics.push(MetricRow { summary, sources });
    }
    if !all.is_empty() {
        report.over_time = metrics::summarize(all, "all").map_err(|e| RunError::Failed(e.to_string()))?.miou_vs_frame;
    }
    Ok(())
}

/// Collapse per-video values into one row per material, in config order.
fn aggregate_rows(config: &PipelineConfig, table: &MaterialTable, report: &mut Report) -> Result<(), RunError> {
    let mut order: Vec<&str> = Vec::new();
    for v in &report.videos {
        if !order.contains(&v.material.as_str()) {
            order.push(&v.material);
        }
    }
    let mut rows = Vec::new();
    for m in order {
        let ok: Vec<&VideoRow> = report.videos.iter().filter(|v| v.material == m && v.estimate.is_some()).collect();
        if ok.is_empty() {
            continue;
        }
        let values: Vec<f64> = ok.iter().map(|v| v.estimate.as_ref().expect("filtered").value).collect();
        let estimate = aggregate(&values, m, table, config.std).map_err(|e| RunError::ConfigInvalid(e.to_string()))?;
        rows.push(ParamRow { estimate, sources: ok.iter().map(|v| v.source.clone()).collect() });
    }
    report.params = rows;
    Ok(())
}

fn estimate_mode(
    loaded: &LoadedConfig,
    config: &PipelineConfig,
    table: &MaterialTable,
    report: &mut Report,
) -> Result<(), RunError> {
    if config.estimates.is_empty() {
        return Err(RunError::ConfigInvalid("no estimates configured".into()));
    }
    for e in &config.estimates {
        table.get(&e.material).map_err(|err| RunError::ConfigInvalid(err.to_string()))?;
        for p in std::iter::once(&e.bundle).chain(e.intrinsics.as_ref()) {
            let path = loaded.resolve(p);
            if !path.exists() {
                return Err(RunError::InputMissing(path.display().to_string()));
            }
        }
    }
    let one = |e: &EstimateEntry| -> Result<VideoEstimate, PipelineError> {
        let intr = e.intrinsics.as_ref().map(|p| loaded.resolve(p));
        let input = VideoInput::load(&loaded.resolve(&e.bundle), e.object_id.as_deref(), intr.as_deref(), e.up_axis)?;
        estimate_video(&input, &e.spec, config.regime)
    };
    report.videos = config
        .estimates
        .par_iter()
        .map(|e| {
            let r = one(e);
            VideoRow {
                material: e.material.clone(),
                source: e.bundle.display().to_string(),
                seed: None,
                truth: None,
                error: r.as_ref().err().map(ToString::to_string),
                estimate: r.ok(),
            }
        })
        .collect();
    aggregate_rows(config, table, report)
}

fn metrics_mode(loaded: &LoadedConfig, config: &PipelineConfig, report: &mut Report) -> Result<(), RunError> {
    if config.metrics.is_empty() {
        return Err(RunError::ConfigInvalid("no metrics entries configured".into()));
    }
    for m in &config.metrics {
        for p in [&m.gt, &m.pred] {
            let path = loaded.resolve(p);
            if !path.exists() {
                return Err(RunError::InputMissing(path.display().to_string()));
            }
        }
    }
    let results: Vec<Result<MetricSeries, PipelineError>> = config
        .metrics
        .par_iter()
        .map(|m| {
            let gt = VideoBundle::load(&loaded.resolve(&m.gt))?;
            let pred = VideoBundle::load(&loaded.resolve(&m.pred))?;
            let skip = m.skip.unwrap_or(gt.meta.conditioning_frames);
            Ok(metrics::sequence_metrics(&gt, &pred, skip)?)
        })
        .collect();
    let mut groups: Vec<(String, Vec<MetricSeries>, Vec<String>)> = Vec::new();
    let mut all = Vec::new();
    for (m, r) in config.metrics.iter().zip(results) {
        let source = format!("{} vs {}", m.pred.display(), m.gt.display());
        match r {
            Ok(s) => {
                let idx = match groups.iter().position(|g| g.0 == m.scenario) {
                    Some(i) => i,
                    None => {
                        groups.push((m.scenario.clone(), Vec::new(), Vec::new()));
                        groups.len() - 1
                    }
                };
                all.push(s.clone());
                groups[idx].1.push(s);
                groups[idx].2.push(source);
            }
            Err(e) => report.videos.push(VideoRow {
                material: m.scenario.clone(),
                source,
                seed: None,
                truth: None,
                estimate: None,
                error: Some(e.to_string()),
            }),
        }
    }
    summarize_into(report, groups, &all)
}
