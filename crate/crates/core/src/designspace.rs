//! XR objects and their design elements.
//!
//! Only the spatial layout (frame of reference, pose and size) is interpreted
//! by the rest of the engine. Content, presentation and input elements are
//! carried as validated metadata. Visual content design, appearance, and the
//! parameters of non-visual modalities live in `modality_params` under the
//! namespaced keys listed in [`PARAM_SCHEMA`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frames::FrameOfReference;
use crate::geometry::{Pose, Rotation, Vec3};

/// What a frame-of-reference axis is attached to.
///
/// Device-fixed frames are expressed as `Entity` of the input-device entity.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRef {
    World,
    UserBody,
    UserHead,
    Entity(String),
}

impl EntityRef {
    pub fn entity(id: impl Into<String>) -> Self {
        EntityRef::Entity(id.into())
    }
}

impl fmt::Display for EntityRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityRef::World => f.write_str("world"),
            EntityRef::UserBody => f.write_str("user_body"),
            EntityRef::UserHead => f.write_str("user_head"),
            EntityRef::Entity(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Availability {
    Open,
    Minimized,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AvailabilityMutability {
    User,
    ContextAware,
    Immutable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContentSpec {
    pub availability: Availability,
    pub availability_mutability: AvailabilityMutability,
    pub topic: String,
    #[serde(default)]
    pub level_of_detail: u8,
    #[serde(default)]
    pub info_focus: String,
    #[serde(default)]
    pub sub_objects: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Immersion {
    Immersive,
    NonImmersive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Audio,
    Haptic,
    Olfactory,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
    List(Vec<ParamValue>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresentationSpec {
    pub immersion: Immersion,
    pub modality: Modality,
    #[serde(default)]
    pub modality_params: BTreeMap<String, ParamValue>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Size {
    pub scale: Vec3,
    pub aspect_ratio: f64,
}

impl Default for Size {
    fn default() -> Self {
        Size {
            scale: Vec3::ONE,
            aspect_ratio: 1.0,
        }
    }
}

/// Frame of reference, local pose and size of an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialLayout {
    pub frame: FrameOfReference,
    pub position: Vec3,
    #[serde(default)]
    pub orientation: Rotation,
    #[serde(default)]
    pub size: Size,
}

impl SpatialLayout {
    /// The local pose within the frame; the size scale is the pose scale.
    pub fn local_pose(&self) -> Pose {
        Pose {
            position: self.position,
            orientation: self.orientation,
            scale: self.size.scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interactivity {
    #[default]
    None,
    OpenCloseOnly,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XrObject {
    pub id: String,
    pub content: ContentSpec,
    pub presentation: PresentationSpec,
    pub layout: SpatialLayout,
    #[serde(default)]
    pub interactivity: Interactivity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamKind {
    Number { min: f64, max: f64 },
    Text,
    Bool,
    List,
}

/// One published `modality_params` key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: ParamKind,
}

const fn num(key: &'static str, min: f64, max: f64) -> ParamSpec {
    ParamSpec {
        key,
        kind: ParamKind::Number { min, max },
    }
}

const fn text(key: &'static str) -> ParamSpec {
    ParamSpec {
        key,
        kind: ParamKind::Text,
    }
}

/// Published schema for `modality_params`.
pub const PARAM_SCHEMA: &[ParamSpec] = &[
    // visual content design
    text("visual.dimensionality"),
    text("visual.arrangement"),
    text("visual.asset"),
    text("visual.texture"),
    text("visual.brushstroke"),
    text("typography.font"),
    num("typography.size_pt", 0.0, f64::INFINITY),
    text("typography.weight"),
    text("typography.alignment"),
    // appearance
    num("appearance.transparency", 0.0, 1.0),
    text("appearance.lighting"),
    text("appearance.color"),
    text("appearance.dynamic.altered_element"),
    ParamSpec {
        key: "appearance.dynamic.values",
        kind: ParamKind::List,
    },
    num("appearance.dynamic.frequency_hz", 0.0, f64::INFINITY),
    // audio
    num("audio.duration_s", 0.0, f64::INFINITY),
    num("audio.volume", 0.0, 1.0),
    ParamSpec {
        key: "audio.spatialization",
        kind: ParamKind::Bool,
    },
    num("audio.reverberation", 0.0, 1.0),
    // haptic
    num("haptic.duration_s", 0.0, f64::INFINITY),
    num("haptic.intensity", 0.0, 1.0),
    num("haptic.frequency_hz", 0.0, f64::INFINITY),
    // olfactory
    num("olfactory.duration_s", 0.0, f64::INFINITY),
    num("olfactory.intensity", 0.0, 1.0),
    // input design
    text("input.modality"),
    text("input.technique"),
];

pub fn param_spec(key: &str) -> Option<&'static ParamSpec> {
    PARAM_SCHEMA.iter().find(|s| s.key == key)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    EmptyId,
    UnresolvedRef(String),
    UnknownSubObject(String),
    SubObjectCycle(String),
    HybridNeedsTwoModalities,
    NonPositiveScale,
    NonPositiveAspectRatio,
    UnknownParamKey(String),
    ParamType { key: String, expected: &'static str },
    ParamOutOfRange(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyId => f.write_str("object id is empty"),
            Violation::UnresolvedRef(id) => write!(f, "frame reference `{id}` does not resolve"),
            Violation::UnknownSubObject(id) => write!(f, "unknown sub-object `{id}`"),
            Violation::SubObjectCycle(id) => write!(f, "sub-object graph has a cycle through `{id}`"),
            Violation::HybridNeedsTwoModalities => {
                f.write_str("hybrid modality needs sub-objects with at least two distinct modalities")
            }
            Violation::NonPositiveScale => f.write_str("size scale must be strictly positive"),
            Violation::NonPositiveAspectRatio => f.write_str("aspect ratio must be positive"),
            Violation::UnknownParamKey(k) => write!(f, "unknown modality parameter `{k}`"),
            Violation::ParamType { key, expected } => {
                write!(f, "modality parameter `{key}` must be {expected}")
            }
            Violation::ParamOutOfRange(k) => write!(f, "modality parameter `{k}` is out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CatalogEntry {
    modality: Modality,
    sub_objects: Vec<String>,
}

/// Everything an object may refer to: scene entities and other objects.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneCatalog {
    entities: BTreeSet<String>,
    objects: BTreeMap<String, CatalogEntry>,
}

impl SceneCatalog {
    pub fn new<'a>(
        entity_ids: impl IntoIterator<Item = &'a str>,
        objects: impl IntoIterator<Item = &'a XrObject>,
    ) -> Self {
        SceneCatalog {
            entities: entity_ids.into_iter().map(str::to_owned).collect(),
            objects: objects
                .into_iter()
                .map(|o| {
                    (
                        o.id.clone(),
                        CatalogEntry {
                            modality: o.presentation.modality,
                            sub_objects: o.content.sub_objects.clone(),
                        },
                    )
                })
                .collect(),
        }
    }

    /// Entity ids and object ids are both valid `Entity` references.
    pub fn resolves(&self, r: &EntityRef) -> bool {
        match r {
            EntityRef::Entity(id) => self.entities.contains(id) || self.objects.contains_key(id),
            _ => true,
        }
    }

    fn reaches(&self, from: &[String], goal: &str) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<&str> = from.iter().map(String::as_str).collect();
        while let Some(id) = stack.pop() {
            if id == goal {
                return true;
            }
            if !seen.insert(id) {
                continue;
            }
            if let Some(e) = self.objects.get(id) {
                stack.extend(e.sub_objects.iter().map(String::as_str));
            }
        }
        false
    }
}

/// Checks an object against the design-space constraints. An empty result
/// means the object is valid; the list is sorted and free of duplicates.
pub fn validate_object(obj: &XrObject, scene: &SceneCatalog) -> Vec<Violation> {
    let mut out = BTreeSet::new();
    if obj.id.trim().is_empty() {
        out.insert(Violation::EmptyId);
    }

    let frame = &obj.layout.frame;
    for r in [&frame.position_ref, &frame.orientation_ref, &frame.scale_ref] {
        if !scene.resolves(r) {
            out.insert(Violation::UnresolvedRef(r.to_string()));
        }
    }

    let s = obj.layout.size.scale;
    if !(s.x > 0.0 && s.y > 0.0 && s.z > 0.0) {
        out.insert(Violation::NonPositiveScale);
    }
    if !(obj.layout.size.aspect_ratio > 0.0) {
        out.insert(Violation::NonPositiveAspectRatio);
    }

    for sub in &obj.content.sub_objects {
        if !scene.objects.contains_key(sub) {
            out.insert(Violation::UnknownSubObject(sub.clone()));
        }
    }
    if scene.reaches(&obj.content.sub_objects, &obj.id) {
        out.insert(Violation::SubObjectCycle(obj.id.clone()));
    }

    if obj.presentation.modality == Modality::Hybrid {
        let distinct: BTreeSet<Modality> = obj
            .content
            .sub_objects
            .iter()
            .filter_map(|id| scene.objects.get(id).map(|e| e.modality))
            .collect();
        if distinct.len() < 2 {
            out.insert(Violation::HybridNeedsTwoModalities);
        }
    }

    for (key, value) in &obj.presentation.modality_params {
        match param_spec(key) {
            None => {
                out.insert(Violation::UnknownParamKey(key.clone()));
            }
            Some(spec) => {
                if let Some(v) = check_param(key, spec.kind, value) {
                    out.insert(v);
                }
            }
        }
    }

    out.into_iter().collect()
}

fn check_param(key: &str, kind: ParamKind, value: &ParamValue) -> Option<Violation> {
    let wrong = |expected| {
        Some(Violation::ParamType {
            key: key.to_owned(),
            expected,
        })
    };
    match (kind, value) {
        (ParamKind::Number { min, max }, ParamValue::Number(n)) => {
            (!(*n >= min && *n <= max)).then(|| Violation::ParamOutOfRange(key.to_owned()))
        }
        (ParamKind::Number { .. }, _) => wrong("a number"),
        (ParamKind::Text, ParamValue::Text(_)) => None,
        (ParamKind::Text, _) => wrong("text"),
        (ParamKind::Bool, ParamValue::Bool(_)) => None,
        (ParamKind::Bool, _) => wrong("a boolean"),
        (ParamKind::List, ParamValue::List(_)) => None,
        (ParamKind::List, _) => wrong("a list"),
    }
}
