//! Fiducial layout on the plate: tag placements, corner enumeration in the
//! plate (reference) frame and occlusion masking.
//!
//! The default layout is a 3 × 3 central grid surrounded by two concentric
//! rings (8 inner, 18 outer), 35 tags in total. Tag IDs are opaque integers
//! assigned grid first (row-major from the bottom-left), then the inner ring,
//! then the outer ring, each ring counter-clockwise from +x.

use std::collections::BTreeSet;

use nalgebra::{Matrix2, Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LayoutError {
    #[error("unknown tag id {0}")]
    UnknownTagId(u32),
    #[error("only {visible} tag(s) visible, at least {required} required")]
    TooFewTagsVisible { visible: usize, required: usize },
    #[error("footprints of tags {a} and {b} overlap")]
    Overlap { a: u32, b: u32 },
    #[error("duplicate tag id {0}")]
    DuplicateId(u32),
    #[error("invalid layout parameter: {0}")]
    InvalidParameter(String),
}

/// Minimum number of tags for the standard multi-tag solve.
pub const MIN_TAGS_STANDARD: usize = 2;

/// Standard mode needs two tags; degraded mode accepts a single tag
/// (planar P4P, more jitter).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VisibilityMode {
    #[default]
    Standard,
    Degraded,
}

impl VisibilityMode {
    pub fn min_tags(self) -> usize {
        match self {
            VisibilityMode::Standard => MIN_TAGS_STANDARD,
            VisibilityMode::Degraded => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagPlacement<T: Real> {
    pub tag_id: u32,
    /// Tag center in the plate plane (mm).
    pub center: Vector2<T>,
    /// In-plane rotation (rad).
    pub yaw: T,
}

/// Parametric description of the default cluster-and-rings layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayoutParams {
    pub tag_size_mm: f64,
    pub border_mm: f64,
    pub grid_pitch_mm: f64,
    pub inner_ring_count: usize,
    pub inner_ring_radius_mm: f64,
    pub outer_ring_count: usize,
    pub outer_ring_radius_mm: f64,
}

impl Default for LayoutParams {
    fn default() -> Self {
        Self {
            tag_size_mm: 2.0,
            border_mm: 0.2,
            grid_pitch_mm: 2.6,
            inner_ring_count: 8,
            inner_ring_radius_mm: 6.8,
            outer_ring_count: 18,
            outer_ring_radius_mm: 9.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TagLayout<T: Real> {
    tags: Vec<TagPlacement<T>>,
    tag_size: T,
    border: T,
}

impl<T: Real> TagLayout<T> {
    /// Validates id uniqueness, positive sizes and footprint separation.
    pub fn new(tags: Vec<TagPlacement<T>>, tag_size: T, border: T) -> Result<Self, LayoutError> {
        if !(tag_size > T::zero()) || !(border >= T::zero()) {
            return Err(LayoutError::InvalidParameter(
                "tag size must be positive and border non-negative".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        for t in &tags {
            if !seen.insert(t.tag_id) {
                return Err(LayoutError::DuplicateId(t.tag_id));
            }
        }
        let layout = Self {
            tags,
            tag_size,
            border,
        };
        if let Some((a, b)) = layout.first_overlap() {
            return Err(LayoutError::Overlap { a, b });
        }
        Ok(layout)
    }

    pub fn from_params(p: &LayoutParams) -> Result<Self, LayoutError> {
        let mut tags = Vec::with_capacity(9 + p.inner_ring_count + p.outer_ring_count);
        let pitch = T::lit(p.grid_pitch_mm);
        let mut id = 0u32;
        for row in -1i32..=1 {
            for col in -1i32..=1 {
                tags.push(TagPlacement {
                    tag_id: id,
                    center: Vector2::new(T::lit(col as f64) * pitch, T::lit(row as f64) * pitch),
                    yaw: T::zero(),
                });
                id += 1;
            }
        }
        let rings = [
            (p.inner_ring_count, p.inner_ring_radius_mm, 0.0),
            (p.outer_ring_count, p.outer_ring_radius_mm, 0.5),
        ];
        for (count, radius, phase) in rings {
            if count > 0 && !(radius > 0.0) {
                return Err(LayoutError::InvalidParameter(format!(
                    "ring radius {radius} must be positive"
                )));
            }
            for k in 0..count {
                let angle = std::f64::consts::TAU * (k as f64 + phase) / count as f64;
                tags.push(TagPlacement {
                    tag_id: id,
                    center: Vector2::new(T::lit(radius * angle.cos()), T::lit(radius * angle.sin())),
                    yaw: T::lit(angle),
                });
                id += 1;
            }
        }
        Self::new(tags, T::lit(p.tag_size_mm), T::lit(p.border_mm))
    }

    pub fn tags(&self) -> &[TagPlacement<T>] {
        &self.tags
    }

    pub fn tag_size(&self) -> T {
        self.tag_size
    }

    pub fn border(&self) -> T {
        self.border
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn corner_count(&self) -> usize {
        4 * self.tags.len()
    }

    pub fn tag(&self, tag_id: u32) -> Result<&TagPlacement<T>, LayoutError> {
        self.tags
            .iter()
            .find(|t| t.tag_id == tag_id)
            .ok_or(LayoutError::UnknownTagId(tag_id))
    }

    /// Corners of `tag_id` in the plate frame (z = 0), counter-clockwise
    /// starting from the bottom-left corner of the tag's local frame.
    pub fn corners_ref(&self, tag_id: u32) -> Result<[Vector3<T>; 4], LayoutError> {
        let tag = self.tag(tag_id)?;
        let c = square_corners(tag, self.tag_size / T::lit(2.0));
        Ok(c.map(|p| Vector3::new(p.x, p.y, T::zero())))
    }

    /// All `(tag_id, corner_index, point)` triples in tag order.
    pub fn all_corners(&self) -> Vec<(u32, u8, Vector3<T>)> {
        let half = self.tag_size / T::lit(2.0);
        self.tags
            .iter()
            .flat_map(|t| {
                square_corners(t, half)
                    .into_iter()
                    .enumerate()
                    .map(move |(j, p)| (t.tag_id, j as u8, Vector3::new(p.x, p.y, T::zero())))
            })
            .collect()
    }

    /// Removes the masked tags. Fails when fewer than two tags remain.
    pub fn visible_subset(&self, occlusion_mask: &BTreeSet<u32>) -> Result<Self, LayoutError> {
        self.visible_subset_in_mode(occlusion_mask, VisibilityMode::Standard)
    }

    pub fn visible_subset_in_mode(
        &self,
        occlusion_mask: &BTreeSet<u32>,
        mode: VisibilityMode,
    ) -> Result<Self, LayoutError> {
        let tags: Vec<_> = self
            .tags
            .iter()
            .filter(|t| !occlusion_mask.contains(&t.tag_id))
            .copied()
            .collect();
        if tags.len() < mode.min_tags() {
            return Err(LayoutError::TooFewTagsVisible {
                visible: tags.len(),
                required: mode.min_tags(),
            });
        }
        Ok(Self {
            tags,
            tag_size: self.tag_size,
            border: self.border,
        })
    }

    /// First pair of tags whose bordered footprints intersect.
    pub fn first_overlap(&self) -> Option<(u32, u32)> {
        let half = self.tag_size / T::lit(2.0) + self.border;
        let squares: Vec<_> = self.tags.iter().map(|t| square_corners(t, half)).collect();
        for i in 0..squares.len() {
            for j in (i + 1)..squares.len() {
                if convex_quads_intersect(&squares[i], &squares[j]) {
                    return Some((self.tags[i].tag_id, self.tags[j].tag_id));
                }
            }
        }
        None
    }
}

impl TagLayout<f64> {
    /// The 35-tag layout with 2 mm tags and 0.2 mm borders.
    pub fn default_layout() -> Self {
        Self::from_params(&LayoutParams::default()).expect("default layout is valid")
    }
}

fn square_corners<T: Real>(tag: &TagPlacement<T>, half: T) -> [Vector2<T>; 4] {
    let (s, c) = tag.yaw.sin_cos();
    let rot = Matrix2::new(c, -s, s, c);
    [
        Vector2::new(-half, -half),
        Vector2::new(half, -half),
        Vector2::new(half, half),
        Vector2::new(-half, half),
    ]
    .map(|p| rot * p + tag.center)
}

/// Separating-axis test. Touching edges do not count as overlap.
fn convex_quads_intersect<T: Real>(a: &[Vector2<T>; 4], b: &[Vector2<T>; 4]) -> bool {
    for poly in [a, b] {
        for i in 0..4 {
            let e = poly[(i + 1) % 4] - poly[i];
            let axis = Vector2::new(-e.y, e.x);
            let (amin, amax) = project_extent(a, &axis);
            let (bmin, bmax) = project_extent(b, &axis);
            if amax <= bmin || bmax <= amin {
                return false;
            }
        }
    }
    true
}

fn project_extent<T: Real>(poly: &[Vector2<T>; 4], axis: &Vector2<T>) -> (T, T) {
    poly.iter().map(|p| p.dot(axis)).fold(
        (T::max_value().unwrap(), T::min_value().unwrap()),
        |(lo, hi), v| (lo.min(v), hi.max(v)),
    )
}

#[derive(Serialize, Deserialize)]
struct TagEntry<T> {
    id: u32,
    center_mm: [T; 2],
    yaw_rad: T,
}

/// On-disk layout description.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: DeserializeOwned"))]
pub struct LayoutFile<T> {
    tag_size_mm: T,
    border_mm: T,
    tags: Vec<TagEntry<T>>,
}

impl<T: Real> From<&TagLayout<T>> for LayoutFile<T> {
    fn from(l: &TagLayout<T>) -> Self {
        Self {
            tag_size_mm: l.tag_size,
            border_mm: l.border,
            tags: l
                .tags
                .iter()
                .map(|t| TagEntry {
                    id: t.tag_id,
                    center_mm: [t.center.x, t.center.y],
                    yaw_rad: t.yaw,
                })
                .collect(),
        }
    }
}

impl<T: Real> TryFrom<LayoutFile<T>> for TagLayout<T> {
    type Error = LayoutError;

    fn try_from(f: LayoutFile<T>) -> Result<Self, Self::Error> {
        let tags = f
            .tags
            .into_iter()
            .map(|t| TagPlacement {
                tag_id: t.id,
                center: Vector2::new(t.center_mm[0], t.center_mm[1]),
                yaw: t.yaw_rad,
            })
            .collect();
        TagLayout::new(tags, f.tag_size_mm, f.border_mm)
    }
}

impl<T: Real + Serialize> Serialize for TagLayout<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        LayoutFile::from(self).serialize(s)
    }
}

impl<'de, T: Real + DeserializeOwned> Deserialize<'de> for TagLayout<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let f = LayoutFile::<T>::deserialize(d)?;
        TagLayout::try_from(f).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout_counts() {
        let l = TagLayout::default_layout();
        assert_eq!(l.len(), 35);
        assert_eq!(l.corner_count(), 140);
        assert_eq!(l.all_corners().len(), 140);
        assert_eq!(l.tag_size(), 2.0);
        assert_eq!(l.border(), 0.2);
        assert_eq!(l, TagLayout::default_layout());
    }

    #[test]
    fn default_layout_min_center_distance() {
        let l = TagLayout::default_layout();
        let tags = l.tags();
        let mut min_d = f64::INFINITY;
        for i in 0..tags.len() {
            for j in (i + 1)..tags.len() {
                min_d = min_d.min((tags[i].center - tags[j].center).norm());
            }
        }
        assert!(min_d > 2.0 + 2.0 * 0.2, "min center distance {min_d}");
    }

    #[test]
    fn corners_axis_aligned_tag() {
        let tags = vec![TagPlacement {
            tag_id: 7,
            center: Vector2::new(0.0, 0.0),
            yaw: 0.0,
        }];
        let l = TagLayout::new(tags, 2.0, 0.2).unwrap();
        let c = l.corners_ref(7).unwrap();
        let expect = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
        for (p, (x, y)) in c.iter().zip(expect) {
            assert_eq!(*p, Vector3::new(x, y, 0.0));
        }
        assert_eq!(l.corners_ref(8), Err(LayoutError::UnknownTagId(8)));
    }

    #[test]
    fn corners_quarter_turn_shift_cyclically() {
        let mk = |yaw| {
            TagLayout::new(
                vec![TagPlacement {
                    tag_id: 0,
                    center: Vector2::new(0.0, 0.0),
                    yaw,
                }],
                2.0,
                0.2,
            )
            .unwrap()
            .corners_ref(0)
            .unwrap()
        };
        let a = mk(0.0);
        let b = mk(std::f64::consts::FRAC_PI_2);
        for k in 0..4 {
            assert!((b[k] - a[(k + 1) % 4]).norm() < 1e-12);
        }
    }

    #[test]
    fn masking() {
        let l = TagLayout::default_layout();
        assert_eq!(l.visible_subset(&BTreeSet::new()).unwrap(), l);
        // Two remaining tags is the smallest accepted standard-mode subset.
        let mask: BTreeSet<u32> = (0..33).collect();
        assert_eq!(l.visible_subset(&mask).unwrap().len(), 2);
        let mask34: BTreeSet<u32> = (0..34).collect();
        assert!(matches!(
            l.visible_subset(&mask34),
            Err(LayoutError::TooFewTagsVisible { visible: 1, .. })
        ));
        assert_eq!(
            l.visible_subset_in_mode(&mask34, VisibilityMode::Degraded).unwrap().len(),
            1
        );
        let central: BTreeSet<u32> = (0..9).collect();
        let ring = l.visible_subset(&central).unwrap();
        assert_eq!(ring.len(), 26);
        assert_eq!(ring.corner_count(), 104);
    }

    #[test]
    fn overlap_and_duplicate_detection() {
        let p = LayoutParams {
            outer_ring_radius_mm: 7.0,
            ..LayoutParams::default()
        };
        assert!(matches!(
            TagLayout::<f64>::from_params(&p),
            Err(LayoutError::Overlap { .. })
        ));
        let t = TagPlacement {
            tag_id: 1,
            center: Vector2::new(0.0, 0.0),
            yaw: 0.0,
        };
        let u = TagPlacement {
            center: Vector2::new(5.0, 0.0),
            ..t
        };
        assert_eq!(TagLayout::new(vec![t, u], 2.0, 0.2), Err(LayoutError::DuplicateId(1)));
    }

    #[test]
    fn file_format_round_trip() {
        let l = TagLayout::default_layout();
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.starts_with(r#"{"tag_size_mm":2.0,"border_mm":0.2,"tags":[{"id":0,"center_mm":[-2.6,-2.6],"yaw_rad":0.0}"#));
        let back: TagLayout<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }
}
