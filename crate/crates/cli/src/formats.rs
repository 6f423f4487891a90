//! On-disk interchange formats.
//!
//! * sweep CSV: `axis,magnitude,fx,fy,fz,tx,ty,tz,dlx,dly,dlz,dthx,dthy,dthz`
//!   (mN, mN·m, mm, rad); `axis` is empty for rows that are not single-axis.
//! * frames JSONL: one [`FrameRecord`] per line.
//! * poses JSONL: one [`PoseRecord`] per line.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ringtag_core::calibration::CalibrationPair;
use ringtag_core::geometry::{DeformationVector, RigidTransform};
use ringtag_core::pose::{Correspondence, CorrespondenceSet, PoseError, PoseEstimate};
use ringtag_core::simulator::Wrench;

use crate::error::CliError;

/// Seconds between consecutive frames.
pub const FRAME_INTERVAL_S: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Option<usize>,
    pub magnitude: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub tx: f64,
    pub ty: f64,
    pub tz: f64,
    pub dlx: f64,
    pub dly: f64,
    pub dlz: f64,
    pub dthx: f64,
    pub dthy: f64,
    pub dthz: f64,
}

impl SweepRow {
    pub fn new(axis: Option<usize>, magnitude: f64, w: &Wrench<f64>, d: &DeformationVector<f64>) -> Self {
        let [fx, fy, fz, tx, ty, tz] = w.to_array();
        let [dlx, dly, dlz, dthx, dthy, dthz] = d.to_array();
        Self {
            axis,
            magnitude,
            fx,
            fy,
            fz,
            tx,
            ty,
            tz,
            dlx,
            dly,
            dlz,
            dthx,
            dthy,
            dthz,
        }
    }

    pub fn wrench(&self) -> Wrench<f64> {
        Wrench::from_array([self.fx, self.fy, self.fz, self.tx, self.ty, self.tz])
    }

    pub fn deformation_array(&self) -> [f64; 6] {
        [self.dlx, self.dly, self.dlz, self.dthx, self.dthy, self.dthz]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub tag_id: u32,
    pub corner: u8,
    pub ref_mm: [f64; 3],
    pub img_px: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub timestamp_s: f64,
    pub entries: Vec<EntryRecord>,
}

impl FrameRecord {
    pub fn from_set(frame: usize, set: &CorrespondenceSet<f64>) -> Self {
        Self {
            frame,
            timestamp_s: frame as f64 * FRAME_INTERVAL_S,
            entries: set
                .entries()
                .iter()
                .map(|e| EntryRecord {
                    tag_id: e.tag_id,
                    corner: e.corner,
                    ref_mm: [e.point_ref.x, e.point_ref.y, e.point_ref.z],
                    img_px: [e.point_img.x, e.point_img.y],
                })
                .collect(),
        }
    }

    pub fn to_set(&self) -> Result<CorrespondenceSet<f64>, PoseError> {
        CorrespondenceSet::new(
            self.entries
                .iter()
                .map(|e| Correspondence {
                    tag_id: e.tag_id,
                    corner: e.corner,
                    point_ref: Vector3::from(e.ref_mm),
                    point_img: Vector2::from(e.img_px),
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub frame: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<RigidTransform<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rms_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Pose change relative to the reference, when one was supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeformationVector<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PoseRecord {
    pub fn from_result(frame: usize, r: &Result<PoseEstimate<f64>, PoseError>) -> Self {
        match r {
            Ok(e) => Self {
                frame,
                pose: Some(e.pose),
                rms_px: Some(e.rms_reprojection_error),
                iterations: Some(e.iterations_used),
                converged: Some(e.converged),
                delta: None,
                error: None,
            },
            Err(err) => Self {
                frame,
                pose: None,
                rms_px: None,
                iterations: None,
                converged: None,
                delta: None,
                error: Some(err.to_string()),
            },
        }
    }
}

pub fn pairs_from_rows(rows: &[SweepRow], stage: &str) -> Result<Vec<CalibrationPair<f64>>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let deformation = DeformationVector::from_array(r.deformation_array())
                .map_err(|e| CliError::validation(stage, format!("row {}: {e}", i + 1)))?;
            Ok(CalibrationPair {
                deformation,
                wrench: r.wrench(),
            })
        })
        .collect()
}

pub fn ensure_dir(stage: &str, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(stage, dir, e))
}

pub fn read_bytes(stage: &str, path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(stage, path, e))
}

pub fn read_json<T: DeserializeOwned>(stage: &str, path: &Path) -> Result<T, CliError> {
    let bytes = read_bytes(stage, path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::parse(stage, path, e))
}

pub fn write_json<T: Serialize>(stage: &str, path: &Path, value: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(stage, path, e))?;
    s.push('\n');
    fs::write(path, s).map_err(|e| CliError::io(stage, path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(stage: &str, path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(stage, path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::io(stage, path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line)
            .map_err(|e| CliError::parse(stage, path, format!("line {}: {e}", i + 1)))?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(stage: &str, path: &Path, items: &[T]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(stage, path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| CliError::io(stage, path, e))?;
        w.write_all(b"\n").map_err(|e| CliError::io(stage, path, e))?;
    }
    w.flush().map_err(|e| CliError::io(stage, path, e))
}

pub fn read_csv<T: DeserializeOwned>(stage: &str, path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::io(stage, path, e))?;
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::parse(stage, path, format!("record {}: {e}", i + 1))))
        .collect()
}

pub fn write_csv<T: Serialize>(stage: &str, path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::io(stage, path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::io(stage, path, e))?;
    }
    w.flush().map_err(|e| CliError::io(stage, path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_header_is_fixed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let row = SweepRow::new(Some(2), 5.0, &Wrench::single_axis(2, 5.0).unwrap(), &DeformationVector::zeros());
        write_csv("t", &path, &[row]).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "axis,magnitude,fx,fy,fz,tx,ty,tz,dlx,dly,dlz,dthx,dthy,dthz"
        );
        let back: Vec<SweepRow> = read_csv("t", &path).unwrap();
        assert_eq!(back, vec![row]);
    }

    #[test]
    fn frame_record_round_trip() {
        let set = CorrespondenceSet::new(vec![Correspondence {
            tag_id: 3,
            corner: 1,
            point_ref: Vector3::new(1.0, -1.0, 0.0),
            point_img: Vector2::new(120.25, 130.5),
        }])
        .unwrap();
        let rec = FrameRecord::from_set(4, &set);
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"ref_mm\":[1.0,-1.0,0.0]"));
        let back: FrameRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_set().unwrap(), set);
        assert!((back.timestamp_s - 0.08).abs() < 1e-15);
    }
}
