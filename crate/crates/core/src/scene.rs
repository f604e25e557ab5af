//! Planar-tabletop world state: parts, end-effector, gripper.
//!
//! The world is deliberately simple: parts rest on the table plane, the
//! end-effector is a point with a vertical hover axis, and grasping is
//! top-down. No rigid-body dynamics, no collision checking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Aabb, Real, Vec3};

/// Identifier of an assembly part within an episode.
pub type PartId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Part {
    pub id: PartId,
    /// Centre position in metres; z is the table plane while on the table.
    pub position: Vec3,
    /// Planar orientation in radians (bookkeeping only; grasps are top-down).
    pub orientation: Real,
    /// True once the part has left the storage table (held or delivered).
    pub attached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gripper {
    Open,
    Holding(PartId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub parts: Vec<Part>,
    /// End-effector position in metres.
    pub ee_pose: Vec3,
    pub gripper: Gripper,
    pub workspace_bounds: Aabb,
    /// Radius of the disc around a part centre that counts as graspable.
    pub part_radius: Real,
}

impl Scene {
    /// Parts still lying free on the storage table.
    pub fn unattached(&self) -> impl Iterator<Item = &Part> {
        self.parts.iter().filter(|p| !p.attached)
    }

    pub fn unattached_count(&self) -> usize {
        self.unattached().count()
    }

    pub fn part(&self, id: PartId) -> Option<&Part> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn part_mut(&mut self, id: PartId) -> Option<&mut Part> {
        self.parts.iter_mut().find(|p| p.id == id)
    }

    /// Nearest unattached part to a point, by xy distance.
    pub fn nearest_unattached(&self, point: Vec3) -> Option<&Part> {
        self.unattached().min_by(|a, b| {
            let da = a.position.planar_distance(point);
            let db = b.position.planar_distance(point);
            da.partial_cmp(&db).unwrap()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !self.workspace_bounds.is_valid() {
            return Err(Error::config("workspace bounds are inverted"));
        }
        if !(self.part_radius > 0.0 && self.part_radius.is_finite()) {
            return Err(Error::config("part_radius must be positive"));
        }
        for p in self.unattached() {
            if !self.workspace_bounds.contains(p.position) {
                return Err(Error::config(format!(
                    "unattached part {} lies outside the workspace bounds",
                    p.id
                )));
            }
        }
        let mut ids: Vec<PartId> = self.parts.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.parts.len() {
            return Err(Error::config("duplicate part ids in scene"));
        }
        if let Gripper::Holding(id) = self.gripper {
            if self.part(id).is_none() {
                return Err(Error::config(format!("gripper holds unknown part {id}")));
            }
        }
        Ok(())
    }
}
