//! Unified and hybrid frames of reference.
//!
//! A frame takes its position, orientation and scale from three independent
//! references. A unified frame uses the same entity for all three. The local
//! position offset of an object is expressed in the resolved orientation
//! frame, so a `(user, world, user)` frame keeps an object at a fixed compass
//! offset from the user while it follows the user around.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designspace::{EntityRef, SpatialLayout};
use crate::geometry::{Pose, Rotation, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameError {
    #[error("reference `{0}` is not present in the scene state")]
    UnresolvedRef(String),
    #[error("no horizontal bearing from the position reference toward `{0}`")]
    DegenerateBearing(String),
}

/// How the orientation reference contributes an orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrientationMode {
    /// Use the orientation reference's own orientation.
    #[default]
    Inherit,
    /// Upright orientation facing from the position reference toward the
    /// orientation reference, measured in the horizontal plane.
    FaceToward,
}

impl OrientationMode {
    fn is_inherit(&self) -> bool {
        *self == OrientationMode::Inherit
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameOfReference {
    pub position_ref: EntityRef,
    pub orientation_ref: EntityRef,
    pub scale_ref: EntityRef,
    #[serde(default, skip_serializing_if = "OrientationMode::is_inherit")]
    pub orientation_mode: OrientationMode,
}

impl FrameOfReference {
    pub fn unified(entity: EntityRef) -> Self {
        FrameOfReference {
            position_ref: entity.clone(),
            orientation_ref: entity.clone(),
            scale_ref: entity,
            orientation_mode: OrientationMode::Inherit,
        }
    }

    pub fn hybrid(position_ref: EntityRef, orientation_ref: EntityRef, scale_ref: EntityRef) -> Self {
        FrameOfReference {
            position_ref,
            orientation_ref,
            scale_ref,
            orientation_mode: OrientationMode::Inherit,
        }
    }

    /// Position and scale from `anchor`; orientation faces from `anchor`
    /// toward `toward`.
    pub fn facing(anchor: EntityRef, toward: EntityRef) -> Self {
        FrameOfReference {
            position_ref: anchor.clone(),
            orientation_ref: toward,
            scale_ref: anchor,
            orientation_mode: OrientationMode::FaceToward,
        }
    }

    /// The single reference entity when this frame is unified.
    pub fn unified_entity(&self) -> Option<&EntityRef> {
        let same = self.position_ref == self.orientation_ref && self.orientation_ref == self.scale_ref;
        (same && self.orientation_mode == OrientationMode::Inherit).then_some(&self.position_ref)
    }
}

/// World poses of all entities at one instant.
///
/// `World` is always present with the identity pose.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneState {
    pub time: f64,
    entity_poses: BTreeMap<EntityRef, Pose>,
}

impl SceneState {
    pub fn new(time: f64) -> Self {
        SceneState {
            time,
            entity_poses: BTreeMap::from([(EntityRef::World, Pose::IDENTITY)]),
        }
    }

    /// Sets an entity's world pose. The world frame itself is fixed and
    /// attempts to move it are ignored.
    pub fn set(&mut self, entity: EntityRef, pose: Pose) -> &mut Self {
        if entity != EntityRef::World {
            self.entity_poses.insert(entity, pose);
        }
        self
    }

    pub fn with(mut self, entity: EntityRef, pose: Pose) -> Self {
        self.set(entity, pose);
        self
    }

    pub fn get(&self, entity: &EntityRef) -> Option<&Pose> {
        self.entity_poses.get(entity)
    }

    pub fn pose(&self, entity: &EntityRef) -> Result<&Pose, FrameError> {
        self.get(entity)
            .ok_or_else(|| FrameError::UnresolvedRef(entity.to_string()))
    }

    pub fn entities(&self) -> impl Iterator<Item = (&EntityRef, &Pose)> {
        self.entity_poses.iter()
    }

    /// Checks that the head sits within 0.5 m of the body's eye point.
    pub fn head_is_plausible(&self, eye_height: f64) -> bool {
        match (self.get(&EntityRef::UserBody), self.get(&EntityRef::UserHead)) {
            (Some(body), Some(head)) => {
                let eye = body.position + Vec3::UP * eye_height;
                head.position.distance(eye) <= 0.5
            }
            _ => true,
        }
    }
}

/// Upright orientation facing horizontally from `from` toward `to`.
pub fn facing_rotation(from: Vec3, to: Vec3) -> Option<Rotation> {
    let d = (to - from).horizontal();
    (d.norm() >= 1e-6).then(|| Rotation::from_heading(d.heading()))
}

/// Keeps an object's designed width:height ratio when the scale reference
/// is non-uniform: the height axis follows the width axis.
pub fn preserve_aspect(world_scale: Vec3, local_scale: Vec3) -> Vec3 {
    Vec3::new(
        world_scale.x,
        world_scale.x * (local_scale.y / local_scale.x),
        world_scale.z,
    )
}

/// World orientation contributed by a frame's orientation reference.
pub fn reference_orientation(frame: &FrameOfReference, state: &SceneState) -> Result<Rotation, FrameError> {
    let orient = state.pose(&frame.orientation_ref)?;
    match frame.orientation_mode {
        OrientationMode::Inherit => Ok(orient.orientation),
        OrientationMode::FaceToward => {
            let anchor = state.pose(&frame.position_ref)?;
            facing_rotation(anchor.position, orient.position)
                .ok_or_else(|| FrameError::DegenerateBearing(frame.orientation_ref.to_string()))
        }
    }
}

/// World pose of an object from its layout, resolving each reference axis
/// independently.
pub fn resolve_world_pose(layout: &SpatialLayout, state: &SceneState) -> Result<Pose, FrameError> {
    let frame = &layout.frame;
    let anchor = state.pose(&frame.position_ref)?;
    let scale_src = state.pose(&frame.scale_ref)?;
    let orientation = reference_orientation(frame, state)?;
    let local = layout.local_pose();
    debug_assert!(local.position.is_finite());
    Ok(Pose {
        position: anchor.position + orientation.rotate(local.position),
        orientation: orientation * local.orientation,
        scale: preserve_aspect(scale_src.scale.hadamard(local.scale), local.scale),
    })
}

/// World pose of an object fixed to a single entity, via pose composition.
pub fn resolve_unified(entity: &EntityRef, layout: &SpatialLayout, state: &SceneState) -> Result<Pose, FrameError> {
    let parent = state.pose(entity)?;
    let local = layout.local_pose();
    let mut world = parent.compose(&local);
    world.scale = preserve_aspect(world.scale, local.scale);
    Ok(world)
}
