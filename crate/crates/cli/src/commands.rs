//! Command configurations and their execution.
//!
//! Every command is described by a serializable config holding its fully
//! resolved settings. The config is stored in the run manifest, so
//! [`replay`] can re-run a command from its manifest alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ringtag_core::calibration::{self, CalibrationConfig, CalibrationReport};
use ringtag_core::contact::{self, ApproachTrajectory, ContactConfig, EpisodeLog, Outcome};
use ringtag_core::geometry::{delta_from_poses, PinholeCamera, RigidTransform};
use ringtag_core::layout::{LayoutParams, TagLayout};
use ringtag_core::pose::{estimate_pose, estimate_pose_warm, PoseError, PoseEstimate, SolverConfig};
use ringtag_core::seed::{derive_seed, stage_seed};
use ringtag_core::sensitivity::{self, DetectionParams, SensitivityResult};
use ringtag_core::simulator::{
    default_magnitudes, sweep_dataset, ComplianceModel, NoiseModel, Scene, Simulator, Wrench,
};

use crate::error::{Classify, CliError, ErrorKind};
use crate::formats::{
    ensure_dir, pairs_from_rows, read_csv, read_json, read_jsonl, write_csv, write_json, write_jsonl, FrameRecord,
    PoseRecord, SweepRow,
};
use crate::manifest::RunManifest;

pub const LAYOUT_FILE: &str = "layout.json";
pub const CAMERA_FILE: &str = "camera.json";
pub const COMPLIANCE_FILE: &str = "compliance.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FRAMES_FILE: &str = "frames.jsonl";
pub const REFERENCE_FRAMES_FILE: &str = "reference_frames.jsonl";
pub const POSES_FILE: &str = "poses.jsonl";
pub const REFERENCE_POSES_FILE: &str = "reference_poses.jsonl";
pub const ESTIMATED_SWEEP_FILE: &str = "estimated_sweep.csv";
pub const CALIB_FILE: &str = "calib.json";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.json";
pub const EPISODE_FILE: &str = "episode.json";

/// Zero-wrench frames captured before a sweep or an approach.
pub const DEFAULT_REFERENCE_FRAMES: usize = contact::REFERENCE_FRAMES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "snake_case")]
pub enum CommandConfig {
    Layout(LayoutConfig),
    Simulate(SimulateConfig),
    Estimate(EstimateConfig),
    Calibrate(CalibrateConfig),
    Sensitivity(SensitivityConfig),
    Monitor(MonitorConfig),
    Pipeline(PipelineConfig),
}

impl CommandConfig {
    pub fn name(&self) -> &'static str {
        match self {
            CommandConfig::Layout(_) => "layout",
            CommandConfig::Simulate(_) => "simulate",
            CommandConfig::Estimate(_) => "estimate",
            CommandConfig::Calibrate(_) => "calibrate",
            CommandConfig::Sensitivity(_) => "sensitivity",
            CommandConfig::Monitor(_) => "monitor",
            CommandConfig::Pipeline(_) => "pipeline",
        }
    }

    fn snapshot(&self) -> Result<serde_json::Value, CliError> {
        let tagged = serde_json::to_value(self).map_err(|e| CliError::validation(self.name(), e.to_string()))?;
        Ok(tagged["config"].clone())
    }

    fn from_snapshot(command: &str, snapshot: serde_json::Value) -> Result<Self, CliError> {
        let tagged = serde_json::json!({ "command": command, "config": snapshot });
        serde_json::from_value(tagged).map_err(|e| CliError::validation("replay", e.to_string()))
    }
}

/// Where a command writes. Multi-file commands treat `path` as a
/// directory; single-file commands accept either a file path (anything with
/// an extension) or a directory.
#[derive(Debug, Clone)]
pub struct Output {
    pub path: PathBuf,
    pub quiet: bool,
}

impl Output {
    fn dir(&self, stage: &str) -> Result<PathBuf, CliError> {
        ensure_dir(stage, &self.path)?;
        Ok(self.path.clone())
    }

    /// `(directory, file)` for a single-file command.
    fn file(&self, stage: &str, default_name: &str) -> Result<(PathBuf, PathBuf), CliError> {
        if self.path.extension().is_some() {
            let dir = match self.path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            ensure_dir(stage, &dir)?;
            Ok((dir, self.path.clone()))
        } else {
            let dir = self.dir(stage)?;
            let file = dir.join(default_name);
            Ok((dir, file))
        }
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

/// Runs `config`, writing outputs and a manifest under `out`.
pub fn execute(config: &CommandConfig, seed: u64, out: &Output) -> Result<(), CliError> {
    let mut manifest = RunManifest::new(config.name(), config.snapshot()?, seed);
    let dir = match config {
        CommandConfig::Layout(c) => run_layout(c, out)?,
        CommandConfig::Simulate(c) => run_simulate(c, seed, out, &mut manifest)?,
        CommandConfig::Estimate(c) => run_estimate(c, out, &mut manifest)?,
        CommandConfig::Calibrate(c) => run_calibrate(c, seed, out, &mut manifest)?,
        CommandConfig::Sensitivity(c) => run_sensitivity(c, out, &mut manifest)?,
        CommandConfig::Monitor(c) => run_monitor(c, out, &mut manifest)?,
        CommandConfig::Pipeline(c) => run_pipeline(c, seed, out)?,
    };
    manifest.write(&dir)
}

/// Re-runs the command recorded in a manifest.
pub fn replay(manifest_path: &Path, out: &Output) -> Result<(), CliError> {
    let m: RunManifest = read_json("replay", manifest_path)?;
    let config = CommandConfig::from_snapshot(&m.command, m.config_snapshot)?;
    for (path, digest) in &m.input_digests {
        let bytes = crate::formats::read_bytes("replay", Path::new(path))?;
        if crate::manifest::sha256_hex(&bytes) != *digest {
            return Err(CliError::validation("replay", format!("input {path} changed since the recorded run")));
        }
    }
    execute(&config, m.seed, out)
}

// ---------------------------------------------------------------- layout

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutConfig {
    pub params: LayoutParams,
}

impl LayoutConfig {
    /// Default layout, optionally with the outer ring moved to `ring_radius_mm`.
    pub fn with_ring_radius(ring_radius_mm: Option<f64>) -> Self {
        let mut params = LayoutParams::default();
        if let Some(r) = ring_radius_mm {
            params.outer_ring_radius_mm = r;
        }
        Self { params }
    }
}

fn run_layout(c: &LayoutConfig, out: &Output) -> Result<PathBuf, CliError> {
    let layout = TagLayout::<f64>::from_params(&c.params).map_err(|e| e.at("layout"))?;
    let (dir, file) = out.file("layout", LAYOUT_FILE)?;
    write_json("layout", &file, &layout)?;
    out.say(format!("layout: {} tags, {} corners -> {}", layout.len(), layout.corner_count(), file.display()));
    Ok(dir)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateConfig {
    pub axes: Vec<usize>,
    pub samples_per_axis: usize,
    pub corner_sigma_px: f64,
    pub magnitude_fraction: f64,
    pub reference_frames: usize,
    pub layout: Option<PathBuf>,
    pub camera: Option<PathBuf>,
    pub compliance: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            axes: (0..6).collect(),
            samples_per_axis: 170,
            corner_sigma_px: 0.25,
            magnitude_fraction: 0.8,
            reference_frames: DEFAULT_REFERENCE_FRAMES,
            layout: None,
            camera: None,
            compliance: None,
        }
    }
}

/// Simulated sweep and its zero-wrench reference frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub rows: Vec<SweepRow>,
    pub frames: Vec<FrameRecord>,
    pub reference_frames: Vec<FrameRecord>,
}

fn load_scene(
    stage: &str,
    layout: Option<&Path>,
    camera: Option<&Path>,
    compliance: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<Scene<f64>, CliError> {
    let mut scene = Scene::default_scene();
    if let Some(p) = layout {
        scene.layout = read_json(stage, p)?;
        manifest.add_input(stage, p)?;
    }
    if let Some(p) = camera {
        scene.camera = read_json(stage, p)?;
        manifest.add_input(stage, p)?;
    }
    if let Some(p) = compliance {
        scene.compliance = read_json::<ComplianceModel<f64>>(stage, p)?;
        manifest.add_input(stage, p)?;
    }
    Ok(scene)
}

pub fn simulate(scene: &Scene<f64>, c: &SimulateConfig, seed: u64) -> Result<SimOutput, CliError> {
    const STAGE: &str = "simulate";
    if c.axes.is_empty() {
        return Err(CliError::validation(STAGE, "no axes selected"));
    }
    if !(c.magnitude_fraction > 0.0 && c.magnitude_fraction <= 1.0) {
        return Err(CliError::validation(STAGE, "magnitude fraction must lie in (0, 1]"));
    }
    let noise = NoiseModel {
        corner_sigma: c.corner_sigma_px,
        occlusion_probability: 0.0,
        seed: stage_seed(seed, STAGE),
    };
    noise.validate().map_err(|e| e.at(STAGE))?;
    let mut rows = Vec::new();
    let mut frames = Vec::new();
    for &axis in &c.axes {
        let mags = default_magnitudes(&scene.compliance, axis, c.samples_per_axis, c.magnitude_fraction)
            .map_err(|e| e.at(STAGE))?;
        for s in sweep_dataset(axis, &mags, scene, &noise).map_err(|e| e.at(STAGE))? {
            frames.push(FrameRecord::from_set(frames.len(), &s.frame.correspondences));
            rows.push(SweepRow::new(Some(axis), s.magnitude, &s.wrench, &s.frame.deformation));
        }
    }
    let ref_seed = stage_seed(seed, "reference");
    let reference_frames = (0..c.reference_frames)
        .map(|k| {
            let f = Simulator::new(derive_seed(ref_seed, k as u64))
                .frame(scene, &Wrench::zero(), c.corner_sigma_px, 0.0)
                .map_err(|e| e.at(STAGE))?;
            Ok(FrameRecord::from_set(k, &f.correspondences))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(SimOutput {
        rows,
        frames,
        reference_frames,
    })
}

fn write_sim(stage: &str, dir: &Path, scene: &Scene<f64>, sim: &SimOutput) -> Result<(), CliError> {
    write_json(stage, &dir.join(LAYOUT_FILE), &scene.layout)?;
    write_json(stage, &dir.join(CAMERA_FILE), &scene.camera)?;
    write_json(stage, &dir.join(COMPLIANCE_FILE), &scene.compliance)?;
    write_csv(stage, &dir.join(SWEEP_FILE), &sim.rows)?;
    write_jsonl(stage, &dir.join(FRAMES_FILE), &sim.frames)?;
    write_jsonl(stage, &dir.join(REFERENCE_FRAMES_FILE), &sim.reference_frames)
}

fn run_simulate(c: &SimulateConfig, seed: u64, out: &Output, m: &mut RunManifest) -> Result<PathBuf, CliError> {
    let scene = load_scene("simulate", c.layout.as_deref(), c.camera.as_deref(), c.compliance.as_deref(), m)?;
    let sim = simulate(&scene, c, seed)?;
    let dir = out.dir("simulate")?;
    write_sim("simulate", &dir, &scene, &sim)?;
    out.say(format!("simulate: {} frames -> {}", sim.frames.len(), dir.display()));
    Ok(dir)
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub frames: PathBuf,
    pub camera: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub sweep: Option<PathBuf>,
    pub warm_start: bool,
    pub solver: SolverConfig<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOutput {
    pub poses: Vec<PoseRecord>,
    pub reference_poses: Vec<PoseRecord>,
    pub reference_pose: Option<RigidTransform<f64>>,
}

fn estimate_frames(
    stage: &str,
    camera: &PinholeCamera<f64>,
    frames: &[FrameRecord],
    warm_start: bool,
    solver: &SolverConfig<f64>,
) -> Result<Vec<PoseRecord>, CliError> {
    solver.validate().map_err(|e| e.at(stage))?;
    let mut previous: Option<RigidTransform<f64>> = None;
    let mut out = Vec::with_capacity(frames.len());
    for f in frames {
        let set = f
            .to_set()
            .map_err(|e| CliError::validation(stage, format!("frame {}: {e}", f.frame)))?;
        let r: Result<PoseEstimate<f64>, PoseError> = match (warm_start, previous) {
            (true, Some(prev)) => estimate_pose_warm(camera, &set, &prev, solver),
            _ => estimate_pose(camera, &set, solver),
        };
        if let Ok(e) = &r {
            previous = Some(e.pose);
        }
        out.push(PoseRecord::from_result(f.frame, &r));
    }
    Ok(out)
}

pub fn estimate(
    camera: &PinholeCamera<f64>,
    frames: &[FrameRecord],
    reference_frames: Option<&[FrameRecord]>,
    warm_start: bool,
    solver: &SolverConfig<f64>,
) -> Result<EstimateOutput, CliError> {
    const STAGE: &str = "estimate";
    let mut poses = estimate_frames(STAGE, camera, frames, warm_start, solver)?;
    let mut reference_poses = Vec::new();
    let mut reference_pose = None;
    if let Some(rf) = reference_frames {
        reference_poses = estimate_frames(STAGE, camera, rf, false, solver)?;
        let ok: Vec<_> = reference_poses.iter().filter_map(|p| p.pose).collect();
        let reference = contact::reference_from_poses(&ok)
            .map_err(|_| CliError::new(ErrorKind::Numerical, STAGE, "no reference frame could be estimated"))?;
        for p in poses.iter_mut() {
            if let Some(pose) = &p.pose {
                p.delta = Some(delta_from_poses(&reference, pose).map_err(|e| e.at(STAGE))?);
            }
        }
        reference_pose = Some(reference);
    }
    Ok(EstimateOutput {
        poses,
        reference_poses,
        reference_pose,
    })
}

/// Sweep rows with the true deformation replaced by the estimated one.
pub fn estimated_rows(rows: &[SweepRow], poses: &[PoseRecord]) -> Result<Vec<SweepRow>, CliError> {
    const STAGE: &str = "estimate";
    if rows.len() != poses.len() {
        return Err(CliError::validation(
            STAGE,
            format!("{} sweep rows but {} frames", rows.len(), poses.len()),
        ));
    }
    rows.iter()
        .zip(poses)
        .map(|(r, p)| {
            let d = p.delta.ok_or_else(|| {
                CliError::new(
                    ErrorKind::Numerical,
                    STAGE,
                    format!("frame {}: {}", p.frame, p.error.as_deref().unwrap_or("no pose change")),
                )
            })?;
            Ok(SweepRow::new(r.axis, r.magnitude, &r.wrench(), &d))
        })
        .collect()
}

fn run_estimate(c: &EstimateConfig, out: &Output, m: &mut RunManifest) -> Result<PathBuf, CliError> {
    const STAGE: &str = "estimate";
    let camera: PinholeCamera<f64> = match &c.camera {
        Some(p) => {
            m.add_input(STAGE, p)?;
            read_json(STAGE, p)?
        }
        None => PinholeCamera::default(),
    };
    let frames: Vec<FrameRecord> = read_jsonl(STAGE, &c.frames)?;
    m.add_input(STAGE, &c.frames)?;
    let reference: Option<Vec<FrameRecord>> = match &c.reference {
        Some(p) => {
            m.add_input(STAGE, p)?;
            Some(read_jsonl(STAGE, p)?)
        }
        None => None,
    };
    if c.sweep.is_some() && reference.is_none() {
        return Err(CliError::validation(STAGE, "--sweep needs --reference"));
    }
    let est = estimate(&camera, &frames, reference.as_deref(), c.warm_start, &c.solver)?;
    let dir = out.dir(STAGE)?;
    write_jsonl(STAGE, &dir.join(POSES_FILE), &est.poses)?;
    if !est.reference_poses.is_empty() {
        write_jsonl(STAGE, &dir.join(REFERENCE_POSES_FILE), &est.reference_poses)?;
    }
    if let Some(p) = &c.sweep {
        m.add_input(STAGE, p)?;
        let rows: Vec<SweepRow> = read_csv(STAGE, p)?;
        write_csv(STAGE, &dir.join(ESTIMATED_SWEEP_FILE), &estimated_rows(&rows, &est.poses)?)?;
    }
    let failed = est.poses.iter().filter(|p| p.pose.is_none()).count();
    out.say(format!("estimate: {} frames, {failed} failed -> {}", est.poses.len(), dir.display()));
    Ok(dir)
}

// ---------------------------------------------------------------- calibrate

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateConfig {
    pub data: PathBuf,
    pub degree: u8,
    pub split_fraction: f64,
    pub scatter_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterRow {
    pub axis: usize,
    pub input_component: usize,
    pub deformation: f64,
    pub measured: f64,
    pub predicted: f64,
    pub split: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateOutput {
    pub report: CalibrationReport<f64>,
    pub scatter: Vec<ScatterRow>,
}

pub fn calibrate(rows: &[SweepRow], degree: u8, split_fraction: f64, seed: u64) -> Result<CalibrateOutput, CliError> {
    const STAGE: &str = "calibrate";
    let pairs = pairs_from_rows(rows, STAGE)?;
    let config = CalibrationConfig {
        degree,
        split_fraction,
        seed: stage_seed(seed, STAGE),
    };
    let report = calibration::calibrate(&pairs, &config).map_err(|e| e.at(STAGE))?;
    let split = calibration::split_indices(pairs.len(), split_fraction, config.seed).map_err(|e| e.at(STAGE))?;
    let mut scatter = Vec::with_capacity(6 * pairs.len());
    for m in &report.models {
        for (indices, label) in [(&split.train, "train"), (&split.test, "test")] {
            for &i in indices.iter() {
                let p = &pairs[i];
                scatter.push(ScatterRow {
                    axis: m.axis,
                    input_component: m.input_component,
                    deformation: p.deformation.component(m.input_component),
                    measured: p.wrench.component(m.axis),
                    predicted: m.predict(&p.deformation),
                    split: label,
                });
            }
        }
    }
    Ok(CalibrateOutput { report, scatter })
}

fn run_calibrate(c: &CalibrateConfig, seed: u64, out: &Output, m: &mut RunManifest) -> Result<PathBuf, CliError> {
    const STAGE: &str = "calibrate";
    let rows: Vec<SweepRow> = read_csv(STAGE, &c.data)?;
    m.add_input(STAGE, &c.data)?;
    let res = calibrate(&rows, c.degree, c.split_fraction, seed)?;
    let (dir, file) = out.file(STAGE, CALIB_FILE)?;
    write_json(STAGE, &file, &res.report)?;
    if let Some(p) = &c.scatter_csv {
        write_csv(STAGE, p, &res.scatter)?;
    }
    for model in &res.report.models {
        out.say(format!(
            "calibrate: axis {} <- component {}: slope {:.6}, r2_test {:.6}, rmse_test {:.6}",
            model.axis,
            model.input_component,
            model.slope(),
            model.r2_test,
            model.rmse_test
        ));
    }
    Ok(dir)
}

// ---------------------------------------------------------------- sensitivity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityConfig {
    pub params: DetectionParams<f64>,
    pub params_file: Option<PathBuf>,
    pub calib: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityFile {
    pub params: DetectionParams<f64>,
    #[serde(flatten)]
    pub result: SensitivityResult<f64>,
}

pub fn analyze(params: &DetectionParams<f64>, report: &CalibrationReport<f64>) -> Result<SensitivityFile, CliError> {
    let result = sensitivity::analyze(params, report).map_err(|e| e.at("sensitivity"))?;
    Ok(SensitivityFile { params: *params, result })
}

fn run_sensitivity(c: &SensitivityConfig, out: &Output, m: &mut RunManifest) -> Result<PathBuf, CliError> {
    const STAGE: &str = "sensitivity";
    let params = match &c.params_file {
        Some(p) => {
            m.add_input(STAGE, p)?;
            read_json(STAGE, p)?
        }
        None => c.params,
    };
    let report: CalibrationReport<f64> = read_json(STAGE, &c.calib)?;
    m.add_input(STAGE, &c.calib)?;
    let res = analyze(&params, &report)?;
    let (dir, file) = out.file(STAGE, SENSITIVITY_FILE)?;
    write_json(STAGE, &file, &res)?;
    out.say(format!(
        "sensitivity: dl_min {:.6} mm, dtheta_min {:.6} rad, F_min {:?}",
        res.result.delta_l_min_mm,
        res.result.delta_theta_min_rad,
        res.result.wrench_floor.to_array()
    ));
    Ok(dir)
}

// ---------------------------------------------------------------- monitor

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub object: Option<String>,
    pub contact: ContactConfig<f64>,
    pub poses: PathBuf,
    pub reference_frames: usize,
    pub start_joints: Vec<f64>,
    pub target_joints: Vec<f64>,
}

impl MonitorConfig {
    /// Resolves the preset (if any) and applies explicit overrides.
    #[allow(clippy::too_many_arguments)]
    pub fn resolve(
        object: Option<String>,
        threshold_mm: Option<f64>,
        total_frames: Option<usize>,
        debounce: usize,
        poses: PathBuf,
        reference_frames: usize,
        start_joints: Vec<f64>,
        target_joints: Vec<f64>,
    ) -> Result<Self, CliError> {
        const STAGE: &str = "monitor";
        let preset = match &object {
            Some(name) => Some(ContactConfig::<f64>::for_object(name).map_err(|e| e.at(STAGE))?),
            None => None,
        };
        let threshold = threshold_mm
            .or(preset.map(|p| p.threshold_mm))
            .ok_or_else(|| CliError::validation(STAGE, "give --object or --threshold"))?;
        let frames = total_frames
            .or(preset.map(|p| p.total_frames))
            .ok_or_else(|| CliError::validation(STAGE, "give --object or --frames"))?;
        let contact = ContactConfig::new(threshold, frames)
            .and_then(|c| c.with_debounce(debounce))
            .map_err(|e| e.at(STAGE))?;
        Ok(Self {
            object,
            contact,
            poses,
            reference_frames,
            start_joints,
            target_joints,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFile {
    pub object: Option<String>,
    #[serde(flatten)]
    pub log: EpisodeLog<f64>,
}

/// Consumes `reference_frames` pre-roll poses for the reference, then runs
/// the approach on the remaining poses.
pub fn monitor(c: &MonitorConfig, records: &[PoseRecord]) -> Result<EpisodeLog<f64>, CliError> {
    const STAGE: &str = "monitor";
    if c.reference_frames == 0 || records.len() < c.reference_frames {
        return Err(CliError::validation(
            STAGE,
            format!("need {} pre-roll poses, stream has {}", c.reference_frames.max(1), records.len()),
        ));
    }
    let (pre, stream) = records.split_at(c.reference_frames);
    let pre_poses: Vec<_> = pre.iter().filter_map(|p| p.pose).collect();
    let reference = contact::reference_from_poses(&pre_poses)
        .map_err(|_| CliError::new(ErrorKind::Numerical, STAGE, "no pre-roll pose available"))?;
    let traj = ApproachTrajectory::new(c.start_joints.clone(), c.target_joints.clone(), c.contact.total_frames)
        .map_err(|e| e.at(STAGE))?;
    contact::run_episode(&traj, &c.contact, &reference, stream.iter().map(|p| p.pose)).map_err(|e| e.at(STAGE))
}

fn run_monitor(c: &MonitorConfig, out: &Output, m: &mut RunManifest) -> Result<PathBuf, CliError> {
    const STAGE: &str = "monitor";
    let records: Vec<PoseRecord> = read_jsonl(STAGE, &c.poses)?;
    m.add_input(STAGE, &c.poses)?;
    let log = monitor(c, &records)?;
    let (dir, file) = out.file(STAGE, EPISODE_FILE)?;
    match &log.outcome {
        Outcome::Contact { event } => out.say(format!(
            "monitor: contact at frame {} (dz {:.6} mm)",
            event.frame_index, event.delta_z_mm
        )),
        Outcome::NoContact => out.say(format!("monitor: no contact in {} frames", c.contact.total_frames)),
    }
    write_json(STAGE, &file, &EpisodeFile { object: c.object.clone(), log })?;
    Ok(dir)
}

// ---------------------------------------------------------------- pipeline

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub simulate: SimulateConfig,
    pub warm_start: bool,
    pub solver: SolverConfig<f64>,
    pub degree: u8,
    pub split_fraction: f64,
    pub detection: DetectionParams<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            simulate: SimulateConfig::default(),
            warm_start: false,
            solver: SolverConfig::default(),
            degree: 1,
            split_fraction: 0.8,
            detection: DetectionParams::default(),
        }
    }
}

/// Everything the pipeline produces, before it is written out.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub scene: Scene<f64>,
    pub sim: SimOutput,
    pub estimate: EstimateOutput,
    pub estimated_rows: Vec<SweepRow>,
    pub calibration: CalibrateOutput,
    pub sensitivity: SensitivityFile,
}

fn staged(e: CliError) -> CliError {
    CliError::new(e.kind, &format!("pipeline/{}", e.stage), e.message)
}

pub fn pipeline(c: &PipelineConfig, seed: u64) -> Result<PipelineOutput, CliError> {
    let scene = Scene::default_scene();
    if c.simulate.layout.is_some() || c.simulate.camera.is_some() || c.simulate.compliance.is_some() {
        return Err(CliError::validation("pipeline", "the pipeline always uses the default scene"));
    }
    let sim = simulate(&scene, &c.simulate, seed).map_err(staged)?;
    let est = estimate(&scene.camera, &sim.frames, Some(&sim.reference_frames), c.warm_start, &c.solver)
        .map_err(staged)?;
    let rows = estimated_rows(&sim.rows, &est.poses).map_err(staged)?;
    let calibration = calibrate(&rows, c.degree, c.split_fraction, seed).map_err(staged)?;
    let sensitivity = analyze(&c.detection, &calibration.report).map_err(staged)?;
    Ok(PipelineOutput {
        scene,
        sim,
        estimate: est,
        estimated_rows: rows,
        calibration,
        sensitivity,
    })
}

fn run_pipeline(c: &PipelineConfig, seed: u64, out: &Output) -> Result<PathBuf, CliError> {
    const STAGE: &str = "pipeline";
    let res = pipeline(c, seed)?;
    let dir = out.dir(STAGE)?;
    write_sim(STAGE, &dir, &res.scene, &res.sim)?;
    write_jsonl(STAGE, &dir.join(POSES_FILE), &res.estimate.poses)?;
    write_jsonl(STAGE, &dir.join(REFERENCE_POSES_FILE), &res.estimate.reference_poses)?;
    write_csv(STAGE, &dir.join(ESTIMATED_SWEEP_FILE), &res.estimated_rows)?;
    write_json(STAGE, &dir.join(CALIB_FILE), &res.calibration.report)?;
    write_csv(STAGE, &dir.join(SCATTER_FILE), &res.calibration.scatter)?;
    write_json(STAGE, &dir.join(SENSITIVITY_FILE), &res.sensitivity)?;
    for m in &res.calibration.report.models {
        out.say(format!("pipeline: axis {} r2_test {:.6}", m.axis, m.r2_test));
    }
    out.say(format!(
        "pipeline: F_min {:?} -> {}",
        res.sensitivity.result.wrench_floor.to_array(),
        dir.display()
    ));
    Ok(dir)
}
