//! Contact detection for delicate grasping.
//!
//! The fingertip approaches along a linearly interpolated joint trajectory
//! while the normal deformation `Δz` is monitored. When `Δz` reaches the
//! threshold on `debounce_frames` consecutive observed frames the approach
//! stops and a lift is commanded.
//!
//! Frames are numbered `0..total_frames`. At frame `f` the monitor reads the
//! sensor and, if still approaching, commands waypoint `f + 1`, so the last
//! approach command is the target itself.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{mean_pose, RigidTransform};
use crate::scalar::Real;

/// Frames used to establish the no-contact reference pose.
pub const REFERENCE_FRAMES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContactError {
    #[error("frame {frame} outside 0..={total}")]
    FrameOutOfRange { frame: usize, total: usize },
    #[error("sensor stream ended at frame {0}")]
    StreamEnded(usize),
    #[error("invalid contact config: {0}")]
    InvalidConfig(&'static str),
    #[error("start and target joints differ in length ({start} vs {target})")]
    DimensionMismatch { start: usize, target: usize },
    #[error("unknown object preset '{0}'")]
    UnknownObject(String),
    #[error("need at least one pose to form a reference")]
    EmptyReference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactConfig<T> {
    pub threshold_mm: T,
    pub total_frames: usize,
    pub control_interval_s: T,
    pub debounce_frames: usize,
}

impl<T: Real> ContactConfig<T> {
    pub fn new(threshold_mm: T, total_frames: usize) -> Result<Self, ContactError> {
        let c = Self {
            threshold_mm,
            total_frames,
            control_interval_s: T::lit(0.02),
            debounce_frames: 1,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_debounce(mut self, frames: usize) -> Result<Self, ContactError> {
        self.debounce_frames = frames;
        self.validate()?;
        Ok(self)
    }

    pub fn for_object(name: &str) -> Result<Self, ContactError> {
        let p = ObjectPreset::lookup(name).ok_or_else(|| ContactError::UnknownObject(name.into()))?;
        Self::new(T::lit(p.threshold_mm), p.total_frames)
    }

    pub fn validate(&self) -> Result<(), ContactError> {
        if !(self.threshold_mm > T::zero() && self.threshold_mm.is_finite()) {
            return Err(ContactError::InvalidConfig("threshold must be positive"));
        }
        if self.total_frames == 0 {
            return Err(ContactError::InvalidConfig("total_frames must be at least 1"));
        }
        if self.debounce_frames == 0 {
            return Err(ContactError::InvalidConfig("debounce_frames must be at least 1"));
        }
        if !(self.control_interval_s > T::zero()) {
            return Err(ContactError::InvalidConfig("control interval must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectPreset {
    pub name: &'static str,
    pub threshold_mm: f64,
    pub total_frames: usize,
}

impl ObjectPreset {
    pub const TABLE: [ObjectPreset; 10] = [
        ObjectPreset::new("chip", 0.10, 30),
        ObjectPreset::new("eggshell", 0.05, 20),
        ObjectPreset::new("cone", 0.10, 20),
        ObjectPreset::new("cookie", 0.05, 5),
        ObjectPreset::new("balloon", 0.05, 3),
        ObjectPreset::new("pencil", 0.02, 15),
        ObjectPreset::new("paper", 0.01, 50),
        ObjectPreset::new("paper_cup", 0.005, 10),
        ObjectPreset::new("grape", 0.006, 10),
        ObjectPreset::new("seaweed", 0.01, 150),
    ];

    const fn new(name: &'static str, threshold_mm: f64, total_frames: usize) -> Self {
        Self {
            name,
            threshold_mm,
            total_frames,
        }
    }

    /// Case-insensitive; spaces and hyphens match underscores.
    pub fn lookup(name: &str) -> Option<ObjectPreset> {
        let key: String = name
            .trim()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c.to_ascii_lowercase() })
            .collect();
        Self::TABLE.iter().copied().find(|p| p.name == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproachTrajectory<T> {
    start_joints: Vec<T>,
    target_joints: Vec<T>,
    total_frames: usize,
}

impl<T: Real> ApproachTrajectory<T> {
    pub fn new(start: Vec<T>, target: Vec<T>, total_frames: usize) -> Result<Self, ContactError> {
        if start.len() != target.len() {
            return Err(ContactError::DimensionMismatch {
                start: start.len(),
                target: target.len(),
            });
        }
        if total_frames == 0 {
            return Err(ContactError::InvalidConfig("total_frames must be at least 1"));
        }
        Ok(Self {
            start_joints: start,
            target_joints: target,
            total_frames,
        })
    }

    pub fn start(&self) -> &[T] {
        &self.start_joints
    }

    pub fn target(&self) -> &[T] {
        &self.target_joints
    }

    pub fn total_frames(&self) -> usize {
        self.total_frames
    }

    /// Waypoint `start + (frame / total) (target − start)`; exact at both ends.
    pub fn interpolate(&self, frame: usize) -> Result<Vec<T>, ContactError> {
        if frame > self.total_frames {
            return Err(ContactError::FrameOutOfRange {
                frame,
                total: self.total_frames,
            });
        }
        if frame == self.total_frames {
            return Ok(self.target_joints.clone());
        }
        let s = T::lit(frame as f64) / T::lit(self.total_frames as f64);
        Ok(self
            .start_joints
            .iter()
            .zip(&self.target_joints)
            .map(|(&a, &b)| a * (T::one() - s) + b * s)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Stopped,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent<T> {
    pub frame_index: usize,
    pub delta_z_mm: T,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Command<T> {
    Approach { frame: usize, waypoint: usize, joints: Vec<T> },
    Stop { frame: usize },
    Lift { frame: usize },
}

/// `|z|` of the reference-frame translation change.
pub fn normal_deformation<T: Real>(reference: &RigidTransform<T>, pose: &RigidTransform<T>) -> T {
    let d = reference.rotation().transpose() * (pose.translation() - reference.translation());
    d.z.abs()
}

/// Chordal mean of the first [`REFERENCE_FRAMES`] poses (fewer if fewer given).
pub fn reference_from_poses<T: Real>(poses: &[RigidTransform<T>]) -> Result<RigidTransform<T>, ContactError> {
    let n = poses.len().min(REFERENCE_FRAMES);
    if n == 0 {
        return Err(ContactError::EmptyReference);
    }
    mean_pose(&poses[..n]).ok_or(ContactError::EmptyReference)
}

/// Single-episode threshold monitor. Frame indices advance by one per
/// [`ContactMonitor::step`], so they are monotone by construction.
#[derive(Debug, Clone)]
pub struct ContactMonitor<T: Real> {
    config: ContactConfig<T>,
    reference: RigidTransform<T>,
    frame: usize,
    streak: usize,
    phase: Phase,
    event: Option<ContactEvent<T>>,
}

impl<T: Real> ContactMonitor<T> {
    pub fn new(config: ContactConfig<T>, reference: RigidTransform<T>) -> Result<Self, ContactError> {
        config.validate()?;
        Ok(Self {
            config,
            reference,
            frame: 0,
            streak: 0,
            phase: Phase::Approach,
            event: None,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn event(&self) -> Option<ContactEvent<T>> {
        self.event
    }

    /// Consumes one frame. `None` marks a frame whose pose could not be
    /// estimated; it neither extends nor resets the streak. Returns `Δz` for
    /// observed frames and the event on the frame that triggers it.
    pub fn step(&mut self, pose: Option<&RigidTransform<T>>) -> (Option<T>, Option<ContactEvent<T>>) {
        let frame = self.frame;
        self.frame += 1;
        let Some(pose) = pose else {
            return (None, None);
        };
        let dz = normal_deformation(&self.reference, pose);
        if self.phase != Phase::Approach {
            return (Some(dz), None);
        }
        if dz >= self.config.threshold_mm {
            self.streak += 1;
        } else {
            self.streak = 0;
        }
        if self.streak >= self.config.debounce_frames {
            self.phase = Phase::Stopped;
            let ev = ContactEvent {
                frame_index: frame,
                delta_z_mm: dz,
                phase: Phase::Stopped,
            };
            self.event = Some(ev);
            return (Some(dz), Some(ev));
        }
        (Some(dz), None)
    }

    pub fn lift(&mut self) {
        if self.phase == Phase::Stopped {
            self.phase = Phase::Lifted;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome<T> {
    Contact { event: ContactEvent<T> },
    NoContact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + DeserializeOwned"))]
pub struct EpisodeLog<T: Real> {
    pub config: ContactConfig<T>,
    pub reference: RigidTransform<T>,
    pub outcome: Outcome<T>,
    pub final_phase: Phase,
    /// One entry per frame; `None` where the pose was unavailable.
    pub delta_z_mm: Vec<Option<T>>,
    pub commands: Vec<Command<T>>,
}

/// Runs one approach. The stream yields one pose per frame (`None` for a
/// failed estimate) and must cover every frame up to the stop or to
/// `total_frames`.
pub fn run_episode<T, I>(
    trajectory: &ApproachTrajectory<T>,
    config: &ContactConfig<T>,
    reference: &RigidTransform<T>,
    stream: I,
) -> Result<EpisodeLog<T>, ContactError>
where
    T: Real,
    I: IntoIterator<Item = Option<RigidTransform<T>>>,
{
    let mut monitor = ContactMonitor::new(*config, *reference)?;
    let mut stream = stream.into_iter();
    let mut series = Vec::with_capacity(config.total_frames);
    let mut commands = Vec::new();
    let mut outcome = Outcome::NoContact;
    for frame in 0..config.total_frames {
        let obs = stream.next().ok_or(ContactError::StreamEnded(frame))?;
        let (dz, event) = monitor.step(obs.as_ref());
        series.push(dz);
        if let Some(event) = event {
            commands.push(Command::Stop { frame });
            monitor.lift();
            commands.push(Command::Lift { frame });
            outcome = Outcome::Contact { event };
            break;
        }
        let waypoint = (frame + 1).min(trajectory.total_frames());
        commands.push(Command::Approach {
            frame,
            waypoint,
            joints: trajectory.interpolate(waypoint)?,
        });
    }
    Ok(EpisodeLog {
        config: *config,
        reference: *reference,
        outcome,
        final_phase: monitor.phase(),
        delta_z_mm: series,
        commands,
    })
}

/// Scalar oracle: first frame closing a run of `debounce` consecutive
/// observed values at or above `threshold`.
pub fn first_trigger<T: Real>(series: &[Option<T>], threshold: T, debounce: usize) -> Option<usize> {
    let mut streak = 0;
    for (i, v) in series.iter().enumerate() {
        match v {
            Some(v) if *v >= threshold => streak += 1,
            Some(_) => streak = 0,
            None => {}
        }
        if streak >= debounce.max(1) {
            return Some(i);
        }
    }
    None
}
