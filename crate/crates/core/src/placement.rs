//! Placement strategies.
//!
//! Every strategy emits a [`SpatialLayout`] per panel; resolving the layout
//! against a [`SceneState`] yields the panel's world pose for that tick.
//! Body-fixed and environment-referenced placement also have direct
//! closed-form implementations, which double as oracles for the emitted
//! layouts.
//!
//! Environment-referenced placement anchors a panel's position and scale to
//! the user's body and derives its orientation from the panel's
//! intermediary: the panel sits on the horizontal ray from the user toward
//! the intermediary, at a fixed distance and height, facing the user.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::designspace::{EntityRef, Size, SpatialLayout};
use crate::frames::{facing_rotation, preserve_aspect, resolve_world_pose, FrameError, FrameOfReference, SceneState};
use crate::geometry::{Pose, Rotation, Vec3};

/// Horizontal user-intermediary separation below which no bearing exists.
pub const DEGENERATE_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlacementError {
    #[error("unknown panel id `{0}`")]
    UnknownPanelId(String),
    #[error("reference `{0}` is not present in the scene state")]
    UnresolvedRef(String),
    #[error("user is standing on intermediary of panel `{0}`")]
    DegenerateIntermediary(String),
    #[error("strategy {0} has no configuration")]
    MissingConfig(Strategy),
    #[error("invalid placement parameters: {0}")]
    InvalidParams(String),
    #[error("bearing {bearing} for panel `{panel}` is outside (-180, 180]")]
    InvalidBearing { panel: String, bearing: f64 },
}

impl From<FrameError> for PlacementError {
    fn from(e: FrameError) -> Self {
        match e {
            FrameError::UnresolvedRef(r) => PlacementError::UnresolvedRef(r),
            FrameError::DegenerateBearing(r) => PlacementError::DegenerateIntermediary(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementWarning {
    #[error("panel distance {0} m is outside the arm's-reach band [0.4, 2.0]")]
    DistanceOutsideReach(String),
    #[error("t={time}: panel `{panel}` held at its last pose (user on its intermediary)")]
    HeldLastPose { panel: String, time: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    WorldFixed,
    ObjectFixed,
    HeadFixed,
    BodyFixed,
    EnvironmentReferenced,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::WorldFixed,
        Strategy::ObjectFixed,
        Strategy::HeadFixed,
        Strategy::BodyFixed,
        Strategy::EnvironmentReferenced,
    ];

    /// Short name used on the command line and in exported tables.
    pub fn short_name(self) -> &'static str {
        match self {
            Strategy::WorldFixed => "world-fixed",
            Strategy::ObjectFixed => "object-fixed",
            Strategy::HeadFixed => "head-fixed",
            Strategy::BodyFixed => "body-fixed",
            Strategy::EnvironmentReferenced => "env-ref",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "world-fixed" | "world_fixed" => Ok(Strategy::WorldFixed),
            "object-fixed" | "object_fixed" => Ok(Strategy::ObjectFixed),
            "head-fixed" | "head_fixed" => Ok(Strategy::HeadFixed),
            "body-fixed" | "body_fixed" => Ok(Strategy::BodyFixed),
            "env-ref" | "environment_referenced" | "environment-referenced" => Ok(Strategy::EnvironmentReferenced),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

fn default_distance() -> f64 {
    1.2
}
fn default_height() -> f64 {
    1.5
}
fn default_eye_height() -> f64 {
    1.6
}
fn default_aspect() -> f64 {
    7.0 / 4.0
}

/// Uniform panel geometry shared by all strategies.
///
/// Heights are measured from the ground under the user's body position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementParams {
    #[serde(default = "default_distance")]
    pub panel_distance: f64,
    #[serde(default = "default_height")]
    pub panel_height: f64,
    #[serde(default = "unit")]
    pub panel_scale: Vec3,
    #[serde(default = "default_aspect")]
    pub panel_aspect_ratio: f64,
    #[serde(default = "default_eye_height")]
    pub eye_height: f64,
}

fn unit() -> Vec3 {
    Vec3::ONE
}

impl Default for PlacementParams {
    fn default() -> Self {
        PlacementParams {
            panel_distance: default_distance(),
            panel_height: default_height(),
            panel_scale: Vec3::ONE,
            panel_aspect_ratio: default_aspect(),
            eye_height: default_eye_height(),
        }
    }
}

impl PlacementParams {
    /// Hard errors for impossible values, warnings for unusual ones.
    pub fn validate(&self) -> Result<Vec<PlacementWarning>, PlacementError> {
        let s = self.panel_scale;
        if !(self.panel_distance > 0.0) || !self.panel_distance.is_finite() {
            return Err(PlacementError::InvalidParams("panel_distance must be positive".into()));
        }
        if !(s.x > 0.0 && s.y > 0.0 && s.z > 0.0) {
            return Err(PlacementError::InvalidParams("panel_scale must be positive".into()));
        }
        if !(self.panel_aspect_ratio > 0.0) {
            return Err(PlacementError::InvalidParams(
                "panel_aspect_ratio must be positive".into(),
            ));
        }
        if !(self.eye_height > 0.0) || !self.panel_height.is_finite() {
            return Err(PlacementError::InvalidParams(
                "heights must be finite, eye_height positive".into(),
            ));
        }
        let mut warnings = Vec::new();
        if !(0.4..=2.0).contains(&self.panel_distance) {
            warnings.push(PlacementWarning::DistanceOutsideReach(self.panel_distance.to_string()));
        }
        Ok(warnings)
    }

    fn size(&self) -> Size {
        Size {
            scale: self.panel_scale,
            aspect_ratio: self.panel_aspect_ratio,
        }
    }
}

/// Panel id to the entity whose position sets that panel's bearing.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntermediaryMap(pub BTreeMap<String, EntityRef>);

/// Panel id to bearing in degrees from the body's forward axis, positive to
/// the right.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BodyFixedConfig(pub BTreeMap<String, f64>);

impl BodyFixedConfig {
    pub fn validate(&self) -> Result<(), PlacementError> {
        for (panel, &bearing) in &self.0 {
            if !(bearing > -180.0 && bearing <= 180.0) {
                return Err(PlacementError::InvalidBearing {
                    panel: panel.clone(),
                    bearing,
                });
            }
        }
        Ok(())
    }
}

/// A panel attached to another entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectAnchor {
    pub entity: EntityRef,
    pub local: Pose,
}

/// Per-strategy configuration; only the block for the active strategy is
/// required.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_fixed: Option<BodyFixedConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediaries: Option<IntermediaryMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_fixed: Option<BTreeMap<String, Pose>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_fixed: Option<BTreeMap<String, Pose>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_fixed: Option<BTreeMap<String, ObjectAnchor>>,
}

impl StrategyConfig {
    /// Panel ids configured for `strategy`.
    pub fn panel_ids(&self, strategy: Strategy) -> Option<Vec<&str>> {
        fn keys<V>(m: &BTreeMap<String, V>) -> Vec<&str> {
            m.keys().map(String::as_str).collect()
        }
        match strategy {
            Strategy::BodyFixed => self.body_fixed.as_ref().map(|c| keys(&c.0)),
            Strategy::EnvironmentReferenced => self.intermediaries.as_ref().map(|c| keys(&c.0)),
            Strategy::WorldFixed => self.world_fixed.as_ref().map(keys),
            Strategy::HeadFixed => self.head_fixed.as_ref().map(keys),
            Strategy::ObjectFixed => self.object_fixed.as_ref().map(keys),
        }
    }

    /// Fails with `UnknownPanelId` for configured ids that are not panels.
    pub fn check_panels<'a>(
        &self,
        strategy: Strategy,
        panels: impl IntoIterator<Item = &'a str> + Clone,
    ) -> Result<(), PlacementError> {
        let ids = self
            .panel_ids(strategy)
            .ok_or(PlacementError::MissingConfig(strategy))?;
        for id in ids {
            if !panels.clone().into_iter().any(|p| p == id) {
                return Err(PlacementError::UnknownPanelId(id.to_owned()));
            }
        }
        Ok(())
    }
}

/// Local pose of a body-fixed panel at `bearing_deg`.
pub fn body_fixed_local(bearing_deg: f64, params: &PlacementParams) -> Pose {
    let r = Rotation::from_heading_deg(bearing_deg);
    Pose {
        position: r.rotate(Vec3::FORWARD * params.panel_distance) + Vec3::UP * params.panel_height,
        orientation: r,
        scale: params.panel_scale,
    }
}

/// Body-fixed placement: every panel keeps a fixed bearing, distance and
/// height in the user's body frame.
pub fn place_body_fixed(
    state: &SceneState,
    cfg: &BodyFixedConfig,
    params: &PlacementParams,
) -> Result<BTreeMap<String, Pose>, PlacementError> {
    cfg.validate()?;
    let body = state.pose(&EntityRef::UserBody)?;
    Ok(cfg
        .0
        .iter()
        .map(|(id, &bearing)| {
            let local = body_fixed_local(bearing, params);
            let mut world = body.compose(&local);
            world.scale = preserve_aspect(world.scale, local.scale);
            (id.clone(), world)
        })
        .collect())
}

/// Environment-referenced placement, computed directly from positions.
pub fn place_environment_referenced(
    state: &SceneState,
    inter: &IntermediaryMap,
    params: &PlacementParams,
) -> Result<BTreeMap<String, Pose>, PlacementError> {
    let body = state.pose(&EntityRef::UserBody)?;
    let mut out = BTreeMap::new();
    for (id, entity) in &inter.0 {
        let target = state.pose(entity)?;
        out.insert(id.clone(), env_ref_pose(id, body, target.position, params)?);
    }
    Ok(out)
}

fn env_ref_pose(id: &str, body: &Pose, intermediary: Vec3, params: &PlacementParams) -> Result<Pose, PlacementError> {
    let ray = (intermediary - body.position).horizontal();
    let len = ray.norm();
    if len < DEGENERATE_SEPARATION {
        return Err(PlacementError::DegenerateIntermediary(id.to_owned()));
    }
    let dir = ray * (1.0 / len);
    let position = body.position + dir * params.panel_distance + Vec3::UP * params.panel_height;
    // the panel's front (+Z) points back along the ray, toward the user
    let orientation = Rotation::from_heading(dir.heading());
    Ok(Pose {
        position,
        orientation,
        scale: preserve_aspect(body.scale.hadamard(params.panel_scale), params.panel_scale),
    })
}

/// The intermediary moved vertically onto the line from the user's eye point
/// through the panel center, keeping its horizontal position. The panel and
/// this point share a bearing and elevation as seen from the eye, which is
/// what makes a panel visible exactly when its intermediary is.
pub fn reheighted_intermediary(body: &Pose, intermediary: Vec3, params: &PlacementParams) -> Vec3 {
    let eye_y = body.position.y + params.eye_height;
    let panel_y = body.position.y + params.panel_height;
    let reach = body.position.horizontal_distance(intermediary);
    intermediary.with_y(eye_y + (panel_y - eye_y) * reach / params.panel_distance)
}

/// Layouts for every configured panel under `strategy`. The layouts do not
/// depend on the scene state; resolving them each tick yields the poses.
pub fn emit_layouts(
    strategy: Strategy,
    cfg: &StrategyConfig,
    params: &PlacementParams,
) -> Result<BTreeMap<String, SpatialLayout>, PlacementError> {
    let missing = || PlacementError::MissingConfig(strategy);
    let from_pose = |frame: FrameOfReference, local: &Pose, aspect: f64| SpatialLayout {
        frame,
        position: local.position,
        orientation: local.orientation,
        size: Size {
            scale: local.scale,
            aspect_ratio: aspect,
        },
    };
    let aspect = params.panel_aspect_ratio;
    let layouts = match strategy {
        Strategy::BodyFixed => {
            let c = cfg.body_fixed.as_ref().ok_or_else(missing)?;
            c.validate()?;
            c.0.iter()
                .map(|(id, &b)| {
                    let frame = FrameOfReference::unified(EntityRef::UserBody);
                    (id.clone(), from_pose(frame, &body_fixed_local(b, params), aspect))
                })
                .collect()
        }
        Strategy::EnvironmentReferenced => {
            let c = cfg.intermediaries.as_ref().ok_or_else(missing)?;
            c.0.iter()
                .map(|(id, entity)| {
                    let layout = SpatialLayout {
                        frame: FrameOfReference::facing(EntityRef::UserBody, entity.clone()),
                        position: Vec3::new(0.0, params.panel_height, -params.panel_distance),
                        orientation: Rotation::IDENTITY,
                        size: params.size(),
                    };
                    (id.clone(), layout)
                })
                .collect()
        }
        Strategy::WorldFixed => {
            let c = cfg.world_fixed.as_ref().ok_or_else(missing)?;
            c.iter()
                .map(|(id, p)| {
                    (
                        id.clone(),
                        from_pose(FrameOfReference::unified(EntityRef::World), p, aspect),
                    )
                })
                .collect()
        }
        Strategy::HeadFixed => {
            let c = cfg.head_fixed.as_ref().ok_or_else(missing)?;
            c.iter()
                .map(|(id, p)| {
                    (
                        id.clone(),
                        from_pose(FrameOfReference::unified(EntityRef::UserHead), p, aspect),
                    )
                })
                .collect()
        }
        Strategy::ObjectFixed => {
            let c = cfg.object_fixed.as_ref().ok_or_else(missing)?;
            c.iter()
                .map(|(id, a)| {
                    (
                        id.clone(),
                        from_pose(FrameOfReference::unified(a.entity.clone()), &a.local, aspect),
                    )
                })
                .collect()
        }
    };
    Ok(layouts)
}

/// Resolves a set of layouts against one scene state.
pub fn resolve_layouts(
    layouts: &BTreeMap<String, SpatialLayout>,
    state: &SceneState,
) -> Result<BTreeMap<String, Pose>, PlacementError> {
    layouts
        .iter()
        .map(|(id, l)| match resolve_world_pose(l, state) {
            Ok(p) => Ok((id.clone(), p)),
            Err(FrameError::DegenerateBearing(_)) => Err(PlacementError::DegenerateIntermediary(id.clone())),
            Err(e) => Err(e.into()),
        })
        .collect()
}

/// Per-simulation placement driver.
///
/// Holds the emitted layouts and, for each panel, its last valid pose. When
/// the user stands on an intermediary the panel keeps that pose and a
/// warning is recorded instead of failing the tick.
#[derive(Debug, Clone)]
pub struct Placer {
    strategy: Strategy,
    layouts: BTreeMap<String, SpatialLayout>,
    last: BTreeMap<String, Pose>,
    warnings: Vec<PlacementWarning>,
}

impl Placer {
    pub fn new(strategy: Strategy, cfg: &StrategyConfig, params: &PlacementParams) -> Result<Self, PlacementError> {
        params.validate()?;
        Ok(Placer {
            strategy,
            layouts: emit_layouts(strategy, cfg, params)?,
            last: BTreeMap::new(),
            warnings: Vec::new(),
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn layouts(&self) -> &BTreeMap<String, SpatialLayout> {
        &self.layouts
    }

    pub fn warnings(&self) -> &[PlacementWarning] {
        &self.warnings
    }

    pub fn place(&mut self, state: &SceneState) -> Result<&BTreeMap<String, Pose>, PlacementError> {
        for (id, layout) in &self.layouts {
            match resolve_world_pose(layout, state) {
                Ok(p) => {
                    self.last.insert(id.clone(), p);
                }
                Err(FrameError::DegenerateBearing(_)) => {
                    if !self.last.contains_key(id) {
                        return Err(PlacementError::DegenerateIntermediary(id.clone()));
                    }
                    self.warnings.push(PlacementWarning::HeldLastPose {
                        panel: id.clone(),
                        time: format!("{:.3}", state.time),
                    });
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(&self.last)
    }
}

/// Horizontal angle (radians) between the user-to-panel and
/// user-to-intermediary directions.
pub fn bearing_misalignment(body: &Pose, panel: Vec3, intermediary: Vec3) -> f64 {
    let a = (panel - body.position).horizontal();
    let b = (intermediary - body.position).horizontal();
    a.angle_to(b)
}

/// Whether `facing_rotation` has a defined bearing from user to target.
pub fn has_bearing(body: &Pose, target: Vec3) -> bool {
    facing_rotation(body.position, target).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angular_deviation, EPS_EQ};

    fn params() -> PlacementParams {
        PlacementParams {
            panel_distance: 1.2,
            panel_height: 1.6,
            ..PlacementParams::default()
        }
    }

    fn state_with(body: Pose, host: Vec3) -> SceneState {
        SceneState::new(0.0)
            .with(EntityRef::UserBody, body)
            .with(EntityRef::entity("host"), Pose::from_position(host))
    }

    fn inter() -> IntermediaryMap {
        IntermediaryMap(BTreeMap::from([("sports".to_string(), EntityRef::entity("host"))]))
    }

    fn bearings() -> BodyFixedConfig {
        BodyFixedConfig(BTreeMap::from([
            ("sports".to_string(), 0.0),
            ("food".to_string(), 90.0),
            ("movies".to_string(), -90.0),
        ]))
    }

    #[test]
    fn body_fixed_forward_and_right() {
        let p = PlacementParams::default();
        let state = SceneState::new(0.0).with(EntityRef::UserBody, Pose::IDENTITY);
        let poses = place_body_fixed(&state, &bearings(), &p).unwrap();
        assert!(poses["sports"].position.approx_eq(Vec3::new(0.0, 1.5, -1.2), 1e-12));
        // hand-built rotation of forward by 90 deg clockwise about +Y
        let m = [[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];
        let f = Vec3::FORWARD * 1.2;
        let right = Vec3::new(
            m[0][0] * f.x + m[0][1] * f.y + m[0][2] * f.z,
            m[1][0] * f.x + m[1][1] * f.y + m[1][2] * f.z,
            m[2][0] * f.x + m[2][1] * f.y + m[2][2] * f.z,
        );
        assert_eq!(right, Vec3::new(1.2, 0.0, 0.0));
        assert!(poses["food"].position.approx_eq(right.with_y(1.5), 1e-12));
        assert!(poses["movies"].position.approx_eq(Vec3::new(-1.2, 1.5, 0.0), 1e-12));
        // panels face the user and stay upright
        for pose in poses.values() {
            let to_user = (Vec3::UP * 1.6 - pose.position).horizontal().normalized().unwrap();
            assert!(pose.orientation.rotate(Vec3::BACK).approx_eq(to_user, 1e-12));
            assert!(pose.orientation.up().approx_eq(Vec3::UP, 1e-12));
        }
    }

    #[test]
    fn body_fixed_layouts_unchanged_by_yaw() {
        let p = PlacementParams::default();
        let cfg = StrategyConfig {
            body_fixed: Some(bearings()),
            ..StrategyConfig::default()
        };
        let before = emit_layouts(Strategy::BodyFixed, &cfg, &p).unwrap();
        let s0 = SceneState::new(0.0).with(EntityRef::UserBody, Pose::IDENTITY);
        let s1 = SceneState::new(1.0).with(
            EntityRef::UserBody,
            Pose::from_parts(Vec3::ZERO, Rotation::from_heading_deg(90.0)),
        );
        let after = emit_layouts(Strategy::BodyFixed, &cfg, &p).unwrap();
        assert_eq!(before, after);
        let w0 = resolve_layouts(&before, &s0).unwrap();
        let w1 = resolve_layouts(&after, &s1).unwrap();
        let b1 = *s1.get(&EntityRef::UserBody).unwrap();
        for id in w0.keys() {
            assert!(w1[id].relative_to(&b1).approx_eq(&w0[id], 1e-12));
        }
    }

    #[test]
    fn env_ref_collinear_forward_case() {
        let s = state_with(Pose::IDENTITY, Vec3::new(0.0, 0.0, -4.0));
        let poses = place_environment_referenced(&s, &inter(), &params()).unwrap();
        assert!(poses["sports"].position.approx_eq(Vec3::new(0.0, 1.6, -1.2), 1e-12));
    }

    #[test]
    fn env_ref_follows_user_toward_intermediary() {
        // user moved to within a meter of the intermediary; by hand the panel
        // is at user + 1.2 * unit(host - user) = (0, 1.6, -3 - 1.2)
        let s = state_with(Pose::translation(0.0, 0.0, -3.0), Vec3::new(0.0, 0.0, -4.0));
        let poses = place_environment_referenced(&s, &inter(), &params()).unwrap();
        assert!(poses["sports"].position.approx_eq(Vec3::new(0.0, 1.6, -4.2), 1e-12));

        let s = state_with(Pose::translation(1.0, 0.0, 1.0), Vec3::new(4.0, 1.7, 5.0));
        let poses = place_environment_referenced(&s, &inter(), &params()).unwrap();
        // (3, 4) / 5 * 1.2 = (0.72, 0.96)
        assert!(poses["sports"].position.approx_eq(Vec3::new(1.72, 1.6, 1.96), 1e-12));
    }

    #[test]
    fn env_ref_ignores_user_yaw() {
        let host = Vec3::new(2.0, 0.0, -3.0);
        let a = place_environment_referenced(&state_with(Pose::IDENTITY, host), &inter(), &params()).unwrap();
        for deg in [-170.0, -45.0, 10.0, 90.0, 180.0] {
            let body = Pose::from_parts(Vec3::ZERO, Rotation::from_heading_deg(deg));
            let b = place_environment_referenced(&state_with(body, host), &inter(), &params()).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn env_ref_degenerate_and_missing() {
        let s = state_with(Pose::IDENTITY, Vec3::new(0.0, 1.7, 0.0));
        assert_eq!(
            place_environment_referenced(&s, &inter(), &params()),
            Err(PlacementError::DegenerateIntermediary("sports".into()))
        );
        let s = SceneState::new(0.0).with(EntityRef::UserBody, Pose::IDENTITY);
        assert_eq!(
            place_environment_referenced(&s, &inter(), &params()),
            Err(PlacementError::UnresolvedRef("host".into()))
        );
    }

    #[test]
    fn emitted_env_ref_matches_direct() {
        let cfg = StrategyConfig {
            intermediaries: Some(inter()),
            ..StrategyConfig::default()
        };
        let layouts = emit_layouts(Strategy::EnvironmentReferenced, &cfg, &params()).unwrap();
        let s = state_with(
            Pose::from_parts(Vec3::new(0.5, 0.2, -1.0), Rotation::from_heading_deg(33.0)),
            Vec3::new(-2.0, 0.0, 3.0),
        );
        let via_frames = resolve_layouts(&layouts, &s).unwrap();
        let direct = place_environment_referenced(&s, &inter(), &params()).unwrap();
        assert!(via_frames["sports"].approx_eq(&direct["sports"], EPS_EQ));
    }

    #[test]
    fn missing_config_is_reported() {
        let cfg = StrategyConfig::default();
        for s in Strategy::ALL {
            assert_eq!(emit_layouts(s, &cfg, &params()), Err(PlacementError::MissingConfig(s)));
        }
    }

    #[test]
    fn head_and_world_fixed_definitions() {
        let local = Pose::translation(0.0, -0.1, -1.0);
        let cfg = StrategyConfig {
            head_fixed: Some(BTreeMap::from([("p".to_string(), local)])),
            world_fixed: Some(BTreeMap::from([("p".to_string(), Pose::translation(3.0, 1.5, 2.0))])),
            ..StrategyConfig::default()
        };
        let head_l = emit_layouts(Strategy::HeadFixed, &cfg, &params()).unwrap();
        let world_l = emit_layouts(Strategy::WorldFixed, &cfg, &params()).unwrap();
        for i in 0..20 {
            let t = i as f64 * 0.37;
            let head = Pose::from_parts(
                Vec3::new(t.sin(), 1.6, t.cos()),
                Rotation::from_heading_pitch(t * 2.0, 0.3 * t.sin()),
            );
            let s = SceneState::new(t)
                .with(EntityRef::UserHead, head)
                .with(EntityRef::UserBody, Pose::translation(t.sin(), 0.0, t.cos()));
            let hp = resolve_layouts(&head_l, &s).unwrap();
            assert!(hp["p"].relative_to(&head).approx_eq(&local, 1e-12));
            let wp = resolve_layouts(&world_l, &s).unwrap();
            assert!(wp["p"].position.approx_eq(Vec3::new(3.0, 1.5, 2.0), 0.0));
        }
    }

    #[test]
    fn placer_holds_last_pose_when_degenerate() {
        let cfg = StrategyConfig {
            intermediaries: Some(inter()),
            ..StrategyConfig::default()
        };
        let mut placer = Placer::new(Strategy::EnvironmentReferenced, &cfg, &params()).unwrap();
        let host = Vec3::new(0.0, 0.0, -2.0);
        let first = placer.place(&state_with(Pose::IDENTITY, host)).unwrap()["sports"];
        let on_top = state_with(Pose::from_position(host), host);
        let held = placer.place(&on_top).unwrap()["sports"];
        assert_eq!(first, held);
        assert_eq!(placer.warnings().len(), 1);

        let mut fresh = Placer::new(Strategy::EnvironmentReferenced, &cfg, &params()).unwrap();
        assert_eq!(
            fresh.place(&on_top).unwrap_err(),
            PlacementError::DegenerateIntermediary("sports".into())
        );
    }

    #[test]
    fn params_validation() {
        assert!(PlacementParams::default().validate().unwrap().is_empty());
        let far = PlacementParams {
            panel_distance: 3.0,
            ..PlacementParams::default()
        };
        assert_eq!(far.validate().unwrap().len(), 1);
        let bad = PlacementParams {
            panel_distance: 0.0,
            ..PlacementParams::default()
        };
        assert!(bad.validate().is_err());
        let mut cfg = bearings();
        cfg.0.insert("x".into(), -180.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn check_panels_flags_unknown_ids() {
        let cfg = StrategyConfig {
            body_fixed: Some(bearings()),
            ..StrategyConfig::default()
        };
        assert!(cfg
            .check_panels(Strategy::BodyFixed, ["sports", "food", "movies"])
            .is_ok());
        assert_eq!(
            cfg.check_panels(Strategy::BodyFixed, ["sports", "food"]),
            Err(PlacementError::UnknownPanelId("movies".into()))
        );
    }

    #[test]
    fn panel_and_reheighted_intermediary_share_direction() {
        let p = PlacementParams::default();
        let body = Pose::translation(0.3, 0.0, -0.4);
        let host = Vec3::new(-2.0, 1.7, -3.5);
        let s = state_with(body, host);
        let panel = place_environment_referenced(&s, &inter(), &p).unwrap()["sports"].position;
        let ghost = reheighted_intermediary(&body, host, &p);
        let eye = Pose::from_parts(
            body.position + Vec3::UP * p.eye_height,
            Rotation::looking_along(panel - body.position - Vec3::UP * p.eye_height).unwrap(),
        );
        assert!(angular_deviation(&eye, panel).unwrap() < 1e-6);
        assert!(angular_deviation(&eye, ghost).unwrap() < 1e-6);
        assert!(bearing_misalignment(&body, panel, host) < 1e-9);
    }
}
