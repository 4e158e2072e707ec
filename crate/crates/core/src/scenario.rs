//! Scenario files: scripted entities, trajectories and trials.
//!
//! A scenario is a JSON document with a `schema` version header. Parsing is
//! total: malformed input yields a [`ScenarioError`], never a panic. After
//! deserialization every structural and geometric invariant is checked and
//! all violations are reported together, each with a JSON path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentParams;
use crate::designspace::EntityRef;
use crate::frames::SceneState;
use crate::geometry::{FovSpec, Pose, Rotation, Vec3};
use crate::placement::{PlacementParams, Strategy, StrategyConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Horizontal distance below which a user counts as near an intermediary.
pub const NEAR_THRESHOLD: f64 = 1.5;
/// Default delay between revealed question words.
pub const DEFAULT_WORD_INTERVAL: f64 = 0.45;
pub const GRID_ROWS: usize = 4;
pub const GRID_COLS: usize = 7;

/// Synthetic document labels, one document per country in each category.
pub const COUNTRIES: [&str; 28] = [
    "Argentina",
    "Australia",
    "Austria",
    "Belgium",
    "Brazil",
    "Canada",
    "Chile",
    "China",
    "Denmark",
    "Egypt",
    "Finland",
    "France",
    "Germany",
    "Greece",
    "India",
    "Ireland",
    "Italy",
    "Japan",
    "Kenya",
    "Mexico",
    "Morocco",
    "Netherlands",
    "Norway",
    "Peru",
    "Portugal",
    "Spain",
    "Sweden",
    "Thailand",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Food,
    Movies,
    Sports,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Food, Category::Movies, Category::Sports];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Food => "food",
            Category::Movies => "movies",
            Category::Sports => "sports",
        }
    }

    pub fn from_panel_id(id: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == id)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RwSetting {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserState {
    Stationary,
    Mobile,
}

/// Experimental context: real-world setting crossed with user state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    DynamicMobile,
    DynamicStationary,
    StaticMobile,
    StaticStationary,
}

impl Context {
    pub const ALL: [Context; 4] = [
        Context::DynamicMobile,
        Context::DynamicStationary,
        Context::StaticMobile,
        Context::StaticStationary,
    ];

    pub fn new(rw: RwSetting, user: UserState) -> Self {
        match (rw, user) {
            (RwSetting::Dynamic, UserState::Mobile) => Context::DynamicMobile,
            (RwSetting::Dynamic, UserState::Stationary) => Context::DynamicStationary,
            (RwSetting::Static, UserState::Mobile) => Context::StaticMobile,
            (RwSetting::Static, UserState::Stationary) => Context::StaticStationary,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Context::DynamicMobile => "dynamic_mobile",
            Context::DynamicStationary => "dynamic_stationary",
            Context::StaticMobile => "static_mobile",
            Context::StaticStationary => "static_stationary",
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    User,
    Poster,
    Host,
    Screen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    /// Category an intermediary stands for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    /// Height above the entity's position that a viewer looks at.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub look_height: f64,
    /// Screen pose in the user's body frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mount: Option<Pose>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl Entity {
    pub fn is_intermediary(&self) -> bool {
        matches!(self.kind, EntityKind::Poster | EntityKind::Host)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec3,
    /// Facing, degrees clockwise from -Z seen from above.
    #[serde(default)]
    pub yaw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoints {
    #[serde(default)]
    pub interpolation: Interpolation,
    pub points: Vec<Waypoint>,
}

impl Waypoints {
    /// Position and yaw (degrees) at `t`; clamps outside the scripted span.
    pub fn sample(&self, t: f64) -> (Vec3, f64) {
        let pts = &self.points;
        let Some(first) = pts.first() else {
            return (Vec3::ZERO, 0.0);
        };
        if t <= first.t {
            return (first.position, first.yaw_deg);
        }
        let k = pts.partition_point(|p| p.t <= t);
        let a = &pts[k - 1];
        if k == pts.len() || self.interpolation == Interpolation::Hold {
            return (a.position, a.yaw_deg);
        }
        let b = &pts[k];
        let u = (t - a.t) / (b.t - a.t);
        let mut dyaw = (b.yaw_deg - a.yaw_deg).rem_euclid(360.0);
        if dyaw > 180.0 {
            dyaw -= 360.0;
        }
        (a.position + (b.position - a.position) * u, a.yaw_deg + dyaw * u)
    }

    pub fn pose_at(&self, t: f64) -> Pose {
        let (p, yaw) = self.sample(t);
        Pose::from_parts(p, Rotation::from_heading_deg(yaw))
    }
}

fn default_repeat() -> f64 {
    30.0
}
fn default_duration() -> f64 {
    15.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub category: Category,
    pub country: String,
    pub question_words: Vec<String>,
    /// Time the first word is revealed.
    pub start: f64,
    /// Length of the trial window.
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Per-word reveal offsets from `start`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word_schedule: Option<Vec<f64>>,
    #[serde(default = "default_repeat")]
    pub repeat_interval: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<bool>,
}

impl Trial {
    pub fn word_offsets(&self) -> Vec<f64> {
        match &self.word_schedule {
            Some(s) => s.clone(),
            None => (0..self.question_words.len())
                .map(|i| i as f64 * DEFAULT_WORD_INTERVAL)
                .collect(),
        }
    }

    /// Time the whole question has first been presented.
    pub fn question_complete(&self) -> f64 {
        self.start + self.word_offsets().last().copied().unwrap_or(0.0)
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end()
    }

    pub fn is_near(&self) -> bool {
        self.near.unwrap_or(false)
    }
}

fn default_device() -> String {
    "HoloLens 2".into()
}
fn default_ppd() -> f64 {
    47.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default = "default_device")]
    pub device: String,
    #[serde(default = "default_ppd")]
    pub pixels_per_degree: f64,
    /// Question content and coordinates are invented fixture data.
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            device: default_device(),
            pixels_per_degree: default_ppd(),
            synthetic: false,
            description: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    pub rw_setting: RwSetting,
    pub user_state: UserState,
    pub strategy: Strategy,
    #[serde(default)]
    pub metadata: Metadata,
    #[serde(default)]
    pub fov: FovSpec,
    #[serde(default)]
    pub placement: PlacementParams,
    #[serde(default)]
    pub strategy_config: StrategyConfig,
    #[serde(default)]
    pub agent: AgentParams,
    pub entities: Vec<Entity>,
    pub trajectories: BTreeMap<String, Waypoints>,
    pub trials: Vec<Trial>,
}

/// One invariant violation, located by JSON path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("schema error at `{path}`: expected {expected}")]
    Schema { path: String, expected: String },
    #[error("{} invariant violation(s): {}", .0.len(), join(.0))]
    Invariant(Vec<Violation>),
    #[error("unknown country `{0}`")]
    UnknownCountry(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl ScenarioError {
    /// Each diagnostic with its JSON path, if any.
    pub fn diagnostics(&self) -> Vec<(Option<String>, String)> {
        match self {
            ScenarioError::Syntax { message, .. } => vec![(None, format!("syntax error: {message}"))],
            ScenarioError::Schema { path, expected } => {
                vec![(Some(path.clone()), format!("schema error: expected {expected}"))]
            }
            ScenarioError::Invariant(vs) => vs.iter().map(|v| (Some(v.path.clone()), v.message.clone())).collect(),
            ScenarioError::UnknownCountry(c) => vec![(None, format!("unknown country `{c}`"))],
        }
    }
}

/// Parses and validates a scenario.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario = deserialize(text)?;
    let violations = validate(&scenario);
    if violations.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Invariant(violations))
    }
}

/// Deserializes without checking invariants.
pub fn deserialize(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let result: Result<Scenario, _> = serde_path_to_error::deserialize(de);
    match result {
        Ok(s) => Ok(s),
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            match inner.classify() {
                serde_json::error::Category::Data => Err(ScenarioError::Schema {
                    path: if path == "." { String::new() } else { path },
                    expected: inner
                        .to_string()
                        .split(" at line ")
                        .next()
                        .unwrap_or_default()
                        .to_string(),
                }),
                _ => Err(ScenarioError::Syntax {
                    line: inner.line().max(1),
                    col: inner.column().max(1),
                    message: inner
                        .to_string()
                        .split(" at line ")
                        .next()
                        .unwrap_or_default()
                        .to_string(),
                }),
            }
        }
    }
}

pub fn serialize(scenario: &Scenario) -> String {
    let mut s = serde_json::to_string_pretty(scenario).expect("scenario serializes");
    s.push('\n');
    s
}

/// Row and column of a country's document: alphabetical, row-major.
pub fn grid_cell(_category: Category, country: &str) -> Result<(usize, usize), ScenarioError> {
    let i = COUNTRIES
        .iter()
        .position(|c| *c == country)
        .ok_or_else(|| ScenarioError::UnknownCountry(country.to_owned()))?;
    Ok((i / GRID_COLS, i % GRID_COLS))
}

/// Country shown at a grid cell.
pub fn country_at(row: usize, col: usize) -> Option<&'static str> {
    (row < GRID_ROWS && col < GRID_COLS).then(|| COUNTRIES[row * GRID_COLS + col])
}

/// Progress of the trial active at some instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPhase {
    pub index: usize,
    pub words_revealed: usize,
    /// The question is still being spoken.
    pub presenting: bool,
    /// Number of completed repeat intervals since the trial started.
    pub repeat_cycle: u32,
}

/// Scene and presentation state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFrame {
    pub state: SceneState,
    pub trial: Option<TrialPhase>,
    pub headers_transparent: bool,
}

impl Scenario {
    pub fn context(&self) -> Context {
        Context::new(self.rw_setting, self.user_state)
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn user(&self) -> Option<&Entity> {
        self.entities.iter().find(|e| e.kind == EntityKind::User)
    }

    pub fn screen(&self) -> Option<&Entity> {
        self.entities.iter().find(|e| e.kind == EntityKind::Screen)
    }

    pub fn intermediaries(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.is_intermediary())
    }

    pub fn intermediary(&self, category: Category) -> Option<&Entity> {
        self.intermediaries().find(|e| e.category == Some(category))
    }

    pub fn active_trial(&self, t: f64) -> Option<usize> {
        self.trials.iter().position(|tr| tr.contains(t))
    }

    /// Point a viewer looks at on `entity` in `state`.
    pub fn look_point(&self, state: &SceneState, entity: &Entity) -> Option<Vec3> {
        let pose = state.get(&EntityRef::entity(&entity.id))?;
        Some(pose.position + Vec3::UP * entity.look_height)
    }

    /// Intermediary nearest the user, horizontally, in `state`.
    pub fn nearest_intermediary(&self, state: &SceneState) -> Option<&Entity> {
        let body = state.get(&EntityRef::UserBody)?.position;
        self.intermediaries()
            .filter_map(|e| {
                let p = state.get(&EntityRef::entity(&e.id))?.position;
                Some((body.horizontal_distance(p), e))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.id.cmp(&b.1.id)))
            .map(|(_, e)| e)
    }

    /// Horizontal user distance to the trial category's intermediary at the
    /// trial's start.
    pub fn trial_distance(&self, index: usize) -> Option<f64> {
        let trial = self.trials.get(index)?;
        let inter = self.intermediary(trial.category)?;
        let user = self.user()?;
        let u = self.trajectories.get(&user.id)?.sample(trial.start).0;
        let p = self.trajectories.get(&inter.id)?.sample(trial.start).0;
        Some(u.horizontal_distance(p))
    }
}

/// Scene state and trial progress at time `t`. Depends only on the
/// scenario and `t`.
pub fn advance(scenario: &Scenario, t: f64) -> ScenarioFrame {
    let t = t.max(0.0);
    let mut state = SceneState::new(t);
    let mut body = Pose::IDENTITY;
    if let Some(user) = scenario.user() {
        if let Some(w) = scenario.trajectories.get(&user.id) {
            body = w.pose_at(t);
        }
    }
    state.set(EntityRef::UserBody, body);
    state.set(
        EntityRef::UserHead,
        Pose::from_parts(
            body.position + Vec3::UP * scenario.placement.eye_height,
            body.orientation,
        ),
    );
    for e in &scenario.entities {
        match e.kind {
            EntityKind::User => {}
            EntityKind::Screen => {
                if let Some(mount) = &e.mount {
                    state.set(EntityRef::entity(&e.id), body.compose(mount));
                }
            }
            EntityKind::Poster | EntityKind::Host => {
                if let Some(w) = scenario.trajectories.get(&e.id) {
                    state.set(EntityRef::entity(&e.id), w.pose_at(t));
                }
            }
        }
    }

    let trial = scenario.active_trial(t).map(|index| {
        let tr = &scenario.trials[index];
        let since = t - tr.start;
        let cycle = if tr.repeat_interval > 0.0 {
            (since / tr.repeat_interval).floor() as u32
        } else {
            0
        };
        let local = since - cycle as f64 * tr.repeat_interval;
        let offsets = tr.word_offsets();
        // absorb rounding in `t - start` so a word shows at its own instant
        let local = local + 1e-9;
        let words_revealed = offsets.iter().filter(|&&o| o <= local).count();
        TrialPhase {
            index,
            words_revealed,
            presenting: words_revealed < offsets.len(),
            repeat_cycle: cycle,
        }
    });
    let headers_transparent = trial.is_some_and(|p| p.presenting);
    ScenarioFrame {
        state,
        trial,
        headers_transparent,
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, path: impl Into<String>, message: impl Into<String>) {
        if !ok {
            self.fail(path, message);
        }
    }
}

/// All invariant violations of a deserialized scenario, sorted by path.
pub fn validate(s: &Scenario) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    c.check(
        s.schema == SCHEMA_VERSION,
        "schema",
        format!("unsupported schema version {} (expected {SCHEMA_VERSION})", s.schema),
    );
    c.check(!s.name.is_empty(), "name", "name must not be empty");
    check_entities(s, &mut c);
    check_trajectories(s, &mut c);
    check_trials(s, &mut c);
    check_start(s, &mut c);
    check_strategy(s, &mut c);
    if let Err(e) = s.placement.validate() {
        c.fail("placement", e.to_string());
    }
    for (field, msg) in s.agent.problems() {
        c.fail(format!("agent.{field}"), msg);
    }
    c.out.sort();
    c.out.dedup();
    c.out
}

fn check_entities(s: &Scenario, c: &mut Checker) {
    let mut seen = BTreeSet::new();
    for (i, e) in s.entities.iter().enumerate() {
        let p = format!("entities[{i}]");
        c.check(!e.id.is_empty(), format!("{p}.id"), "entity id must not be empty");
        c.check(
            seen.insert(e.id.as_str()),
            format!("{p}.id"),
            format!("duplicate entity id `{}`", e.id),
        );
        if e.is_intermediary() {
            c.check(e.category.is_some(), &p, "intermediary needs a category");
            let expected = match s.rw_setting {
                RwSetting::Static => EntityKind::Poster,
                RwSetting::Dynamic => EntityKind::Host,
            };
            c.check(
                e.kind == expected,
                format!("{p}.kind"),
                format!("intermediaries in a {:?} setting must be {:?}", s.rw_setting, expected).to_lowercase(),
            );
        } else {
            c.check(
                e.category.is_none(),
                format!("{p}.category"),
                "only intermediaries carry a category",
            );
        }
        match e.kind {
            EntityKind::Screen => c.check(e.mount.is_some(), &p, "screen needs a mount pose"),
            _ => c.check(e.mount.is_none(), format!("{p}.mount"), "only screens are mounted"),
        }
        c.check(
            e.look_height.is_finite(),
            format!("{p}.look_height"),
            "look_height must be finite",
        );
    }
    let users = s.entities.iter().filter(|e| e.kind == EntityKind::User).count();
    c.check(
        users == 1,
        "entities",
        format!("expected exactly one user, found {users}"),
    );
    for cat in Category::ALL {
        let n = s.intermediaries().filter(|e| e.category == Some(cat)).count();
        c.check(
            n == 1,
            "entities",
            format!("expected one {cat} intermediary, found {n}"),
        );
    }
    let screens = s.entities.iter().filter(|e| e.kind == EntityKind::Screen).count();
    match s.rw_setting {
        RwSetting::Static => c.check(screens == 1, "entities", "static scenarios need one question screen"),
        RwSetting::Dynamic => c.check(
            screens == 0,
            "entities",
            "dynamic scenarios are asked by hosts, not a screen",
        ),
    }
}

fn check_trajectories(s: &Scenario, c: &mut Checker) {
    for id in s.trajectories.keys() {
        let known = s.entity(id);
        c.check(
            known.is_some_and(|e| e.kind != EntityKind::Screen),
            format!("trajectories.{id}"),
            format!("trajectory for unknown or mounted entity `{id}`"),
        );
    }
    for e in s.entities.iter().filter(|e| e.kind != EntityKind::Screen) {
        c.check(
            s.trajectories.contains_key(&e.id),
            "trajectories",
            format!("missing trajectory for `{}`", e.id),
        );
    }
    for (id, w) in &s.trajectories {
        let p = format!("trajectories.{id}.points");
        c.check(!w.points.is_empty(), &p, "trajectory needs at least one waypoint");
        for (i, pt) in w.points.iter().enumerate() {
            c.check(
                pt.t.is_finite() && pt.t >= 0.0,
                format!("{p}[{i}].t"),
                "waypoint time must be finite and non-negative",
            );
            c.check(
                pt.position.is_finite() && pt.yaw_deg.is_finite(),
                format!("{p}[{i}]"),
                "waypoint must be finite",
            );
            if i > 0 {
                c.check(
                    pt.t > w.points[i - 1].t,
                    format!("{p}[{i}].t"),
                    "waypoint times must be strictly increasing",
                );
            }
        }
        let is_poster = s.entity(id).is_some_and(|e| e.kind == EntityKind::Poster);
        if is_poster && s.rw_setting == RwSetting::Static {
            if let Some(first) = w.points.first() {
                for (i, pt) in w.points.iter().enumerate().skip(1) {
                    c.check(
                        pt.position == first.position && pt.yaw_deg == first.yaw_deg,
                        format!("{p}[{i}]"),
                        "intermediaries in a static setting must not move",
                    );
                }
            }
        }
    }
}

fn check_trials(s: &Scenario, c: &mut Checker) {
    let expected = match s.user_state {
        UserState::Stationary => 3,
        UserState::Mobile => 6,
    };
    c.check(
        s.trials.len() == expected,
        "trials",
        format!(
            "{} scenarios have exactly {expected} trials, found {}",
            match s.user_state {
                UserState::Stationary => "stationary",
                UserState::Mobile => "mobile",
            },
            s.trials.len()
        ),
    );
    let per_cat = expected / 3;
    for cat in Category::ALL {
        let n = s.trials.iter().filter(|t| t.category == cat).count();
        c.check(
            n == per_cat,
            "trials",
            format!("expected {per_cat} {cat} trial(s), found {n}"),
        );
        if s.user_state == UserState::Mobile {
            let near = s
                .trials
                .iter()
                .filter(|t| t.category == cat && t.near == Some(true))
                .count();
            let far = s
                .trials
                .iter()
                .filter(|t| t.category == cat && t.near == Some(false))
                .count();
            c.check(
                near == 1 && far == 1,
                "trials",
                format!("mobile scenarios need one near and one far {cat} trial"),
            );
        }
    }

    for (i, t) in s.trials.iter().enumerate() {
        let p = format!("trials[{i}]");
        c.check(
            COUNTRIES.contains(&t.country.as_str()),
            format!("{p}.country"),
            format!("unknown country `{}`", t.country),
        );
        c.check(
            t.question_words.last() == Some(&t.country),
            format!("{p}.question_words"),
            "the country must be the final question word",
        );
        c.check(
            t.start.is_finite() && t.start >= 0.0,
            format!("{p}.start"),
            "start must be non-negative",
        );
        c.check(t.duration > 0.0, format!("{p}.duration"), "duration must be positive");
        c.check(
            t.repeat_interval > 0.0,
            format!("{p}.repeat_interval"),
            "repeat_interval must be positive",
        );
        let offsets = t.word_offsets();
        if let Some(ws) = &t.word_schedule {
            c.check(
                ws.len() == t.question_words.len(),
                format!("{p}.word_schedule"),
                "word_schedule needs one offset per word",
            );
        }
        c.check(
            offsets.first().is_none_or(|&o| o >= 0.0) && offsets.windows(2).all(|w| w[1] > w[0]),
            format!("{p}.word_schedule"),
            "word offsets must be non-negative and strictly increasing",
        );
        c.check(
            offsets.last().is_none_or(|&o| o < t.duration),
            format!("{p}.duration"),
            "the question must finish inside the trial window",
        );
        if i > 0 {
            let prev = &s.trials[i - 1];
            c.check(
                t.start >= prev.end(),
                format!("{p}.start"),
                "trials must be ordered and must not overlap",
            );
        }
        match s.user_state {
            UserState::Stationary => c.check(
                t.near != Some(true),
                format!("{p}.near"),
                "near trials only exist in mobile scenarios; stationary users are always far",
            ),
            UserState::Mobile => c.check(t.near.is_some(), &p, "mobile trials need a near flag"),
        }
        if let Some(d) = s.trial_distance(i) {
            let geometric_near = d < NEAR_THRESHOLD;
            if geometric_near != t.is_near() {
                c.fail(
                    format!("{p}.near"),
                    format!(
                        "user is {d:.2} m from the {} intermediary at trial start, which is {}",
                        t.category,
                        if geometric_near { "near" } else { "far" }
                    ),
                );
            }
        }
    }
}

fn check_start(s: &Scenario, c: &mut Checker) {
    let Some(user) = s.user() else { return };
    let Some(w) = s.trajectories.get(&user.id) else { return };
    let Some(start) = w.points.first() else { return };
    let path = format!("trajectories.{}.points[0]", user.id);
    let dists: Vec<f64> = s
        .intermediaries()
        .filter_map(|e| s.trajectories.get(&e.id)?.points.first())
        .map(|p| start.position.horizontal_distance(p.position))
        .collect();
    if let (Some(lo), Some(hi)) = (
        dists.iter().copied().reduce(f64::min),
        dists.iter().copied().reduce(f64::max),
    ) {
        c.check(
            hi - lo <= 0.01 + 1e-9,
            format!("{path}.position"),
            format!(
                "start point must be equidistant from all intermediaries (spread {:.3} m)",
                hi - lo
            ),
        );
    }
    let sports = s
        .intermediary(Category::Sports)
        .and_then(|e| s.trajectories.get(&e.id)?.points.first());
    if let Some(sp) = sports {
        let dir = (sp.position - start.position).horizontal();
        if dir.norm() > 1e-9 {
            let want = dir.heading().to_degrees();
            let mut diff = (start.yaw_deg - want).rem_euclid(360.0);
            if diff > 180.0 {
                diff = 360.0 - diff;
            }
            c.check(
                diff <= 1.0,
                format!("{path}.yaw_deg"),
                format!("user must start facing the sports intermediary (off by {diff:.1} deg)"),
            );
        }
    }
}

fn check_strategy(s: &Scenario, c: &mut Checker) {
    let cfg = &s.strategy_config;
    if let Some(b) = &cfg.body_fixed {
        if let Err(e) = b.validate() {
            c.fail("strategy_config.body_fixed", e.to_string());
        }
    }
    for strategy in Strategy::ALL {
        let Some(ids) = cfg.panel_ids(strategy) else { continue };
        let key = match strategy {
            Strategy::BodyFixed => "body_fixed",
            Strategy::EnvironmentReferenced => "intermediaries",
            Strategy::WorldFixed => "world_fixed",
            Strategy::HeadFixed => "head_fixed",
            Strategy::ObjectFixed => "object_fixed",
        };
        for id in &ids {
            c.check(
                Category::from_panel_id(id).is_some(),
                format!("strategy_config.{key}.{id}"),
                format!("unknown panel id `{id}`"),
            );
        }
        for cat in Category::ALL {
            c.check(
                ids.contains(&cat.as_str()),
                format!("strategy_config.{key}"),
                format!("no placement for the {cat} panel"),
            );
        }
    }
    let needs = matches!(s.strategy, Strategy::BodyFixed | Strategy::EnvironmentReferenced);
    c.check(
        !needs || cfg.panel_ids(s.strategy).is_some(),
        "strategy_config",
        format!("missing configuration for strategy {}", s.strategy),
    );
    let refs = cfg
        .intermediaries
        .iter()
        .flat_map(|m| {
            m.0.iter()
                .map(|(k, v)| (format!("strategy_config.intermediaries.{k}"), v))
        })
        .chain(cfg.object_fixed.iter().flat_map(|m| {
            m.iter()
                .map(|(k, v)| (format!("strategy_config.object_fixed.{k}.entity"), &v.entity))
        }));
    for (path, r) in refs {
        if let EntityRef::Entity(id) = r {
            c.check(
                s.entity(id).is_some(),
                path,
                format!("reference to unknown entity `{id}`"),
            );
        }
    }
}

/// Line and column (1-based) of the value at a JSON path such as
/// `trials[2].near`. Falls back to the deepest existing ancestor.
pub fn locate(text: &str, path: &str) -> (usize, usize) {
    let segs = parse_path(path);
    let mut w = Walker {
        s: text.as_bytes(),
        pos: 0,
    };
    w.ws();
    let offset = w.find(&segs);
    line_col(text, offset)
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

enum Seg {
    Key(String),
    Index(usize),
}

fn parse_path(path: &str) -> Vec<Seg> {
    let mut out = Vec::new();
    for part in path.split('.').filter(|p| !p.is_empty()) {
        let (key, rest) = part.split_at(part.find('[').unwrap_or(part.len()));
        if !key.is_empty() {
            out.push(Seg::Key(key.to_owned()));
        }
        for idx in rest.split('[').filter(|x| !x.is_empty()) {
            if let Ok(i) = idx.trim_end_matches(']').parse() {
                out.push(Seg::Index(i));
            }
        }
    }
    out
}

/// Minimal JSON scanner that only tracks where values start.
struct Walker<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Walker<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\n' | b'\r' | b'\t')) {
            self.pos += 1;
        }
    }

    fn string(&mut self) -> Option<String> {
        let start = self.pos;
        self.pos += 1;
        while let Some(b) = self.peek() {
            self.pos += 1;
            match b {
                b'\\' => self.pos += 1,
                b'"' => return serde_json::from_slice(&self.s[start..self.pos]).ok(),
                _ => {}
            }
        }
        None
    }

    fn skip(&mut self) -> Option<()> {
        match self.peek()? {
            b'"' => {
                self.string()?;
            }
            b'{' | b'[' => {
                let close = if self.peek()? == b'{' { b'}' } else { b']' };
                self.pos += 1;
                self.ws();
                if self.peek()? == close {
                    self.pos += 1;
                    return Some(());
                }
                loop {
                    self.ws();
                    if close == b'}' {
                        self.string()?;
                        self.ws();
                        self.pos += 1; // ':'
                        self.ws();
                    }
                    self.skip()?;
                    self.ws();
                    match self.peek()? {
                        b',' => self.pos += 1,
                        b if b == close => {
                            self.pos += 1;
                            return Some(());
                        }
                        _ => return None,
                    }
                }
            }
            _ => {
                while matches!(self.peek(), Some(b) if !b",}] \n\r\t".contains(&b)) {
                    self.pos += 1;
                }
            }
        }
        Some(())
    }

    /// Offset of the value at `segs` below the current value, or of the
    /// deepest value on the path that exists.
    fn find(&mut self, segs: &[Seg]) -> usize {
        let here = self.pos;
        let Some((first, rest)) = segs.split_first() else {
            return here;
        };
        match self.child(first) {
            Some(()) => self.find(rest),
            None => here,
        }
    }

    /// Moves to the start of the child value selected by `seg`.
    fn child(&mut self, seg: &Seg) -> Option<()> {
        let open = self.peek()?;
        if !matches!((open, seg), (b'{', Seg::Key(_)) | (b'[', Seg::Index(_))) {
            return None;
        }
        self.pos += 1;
        let mut index = 0;
        loop {
            self.ws();
            if matches!(self.peek()?, b'}' | b']') {
                return None;
            }
            let hit = match seg {
                Seg::Key(k) => {
                    let key = self.string()?;
                    self.ws();
                    self.pos += 1;
                    self.ws();
                    key == *k
                }
                Seg::Index(i) => *i == index,
            };
            if hit {
                return Some(());
            }
            self.skip()?;
            self.ws();
            if self.peek() == Some(b',') {
                self.pos += 1;
            }
            index += 1;
        }
    }
}

macro_rules! fixture {
    ($name:literal) => {
        ($name, include_str!(concat!("../fixtures/", $name, ".scn")))
    };
}

/// The eight bundled session scenarios.
pub const BUNDLED: [(&str, &str); 8] = [
    fixture!("dynamic_mobile_env_ref"),
    fixture!("dynamic_mobile_body_fixed"),
    fixture!("dynamic_stationary_env_ref"),
    fixture!("dynamic_stationary_body_fixed"),
    fixture!("static_mobile_env_ref"),
    fixture!("static_mobile_body_fixed"),
    fixture!("static_stationary_env_ref"),
    fixture!("static_stationary_body_fixed"),
];

macro_rules! invalid_fixture {
    ($name:literal) => {
        ($name, include_str!(concat!("../fixtures/invalid/", $name, ".scn")))
    };
}

/// Fixtures that must be rejected by the invariant checks.
pub const BUNDLED_INVALID: [(&str, &str); 3] = [
    invalid_fixture!("mobile_five_trials"),
    invalid_fixture!("stationary_near_trial"),
    invalid_fixture!("start_not_equidistant"),
];

/// Text of a bundled scenario. Accepts the file name with or without the
/// `.scn` suffix; a bare context name such as `dynamic_mobile` selects its
/// environment-referenced session.
pub fn bundled(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".scn").unwrap_or(name);
    BUNDLED
        .iter()
        .find(|(n, _)| *n == stem)
        .or_else(|| {
            let alias = format!("{stem}_env_ref");
            BUNDLED.iter().find(|(n, _)| *n == alias)
        })
        .map(|(_, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(name: &str) -> Scenario {
        parse_scenario(bundled(name).unwrap()).unwrap()
    }

    #[test]
    fn dynamic_mobile_has_six_trials_and_three_hosts() {
        let s = load("dynamic_mobile.scn");
        assert_eq!(s.trials.len(), 6);
        assert_eq!(s.entities.iter().filter(|e| e.kind == EntityKind::Host).count(), 3);
    }

    #[test]
    fn empty_file_is_syntax_error_at_origin() {
        match parse_scenario("") {
            Err(ScenarioError::Syntax { line, col, .. }) => assert_eq!((line, col), (1, 1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn garbage_never_panics() {
        for text in ["{", "[]", "{\"schema\":", "null", "{\"schema\": \"one\"}", "\u{0}"] {
            assert!(parse_scenario(text).is_err());
        }
    }

    #[test]
    fn schema_error_names_path() {
        let mut v: serde_json::Value = serde_json::from_str(bundled("static_stationary_env_ref").unwrap()).unwrap();
        v["trials"][1]["start"] = serde_json::json!("soon");
        match parse_scenario(&v.to_string()) {
            Err(ScenarioError::Schema { path, .. }) => assert_eq!(path, "trials[1].start"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn invalid_fixtures_rejected_with_expected_paths() {
        let expect = [
            ("mobile_five_trials", "trials"),
            ("stationary_near_trial", "trials[1].near"),
            ("start_not_equidistant", "trajectories.user.points[0].position"),
        ];
        for ((name, text), (want_name, want_path)) in BUNDLED_INVALID.iter().zip(expect) {
            assert_eq!(*name, want_name);
            let Err(ScenarioError::Invariant(vs)) = parse_scenario(text) else {
                panic!("{name} accepted");
            };
            assert!(vs.iter().any(|v| v.path == want_path), "{name}: {vs:?}");
        }
    }

    #[test]
    fn fixtures_round_trip() {
        for (name, text) in BUNDLED {
            let s = parse_scenario(text).unwrap();
            let again = parse_scenario(&serialize(&s)).unwrap();
            assert_eq!(s, again, "{name}");
        }
    }

    #[test]
    fn grid_cells() {
        assert_eq!(grid_cell(Category::Food, COUNTRIES[0]).unwrap(), (0, 0));
        assert_eq!(grid_cell(Category::Movies, COUNTRIES[7]).unwrap(), (1, 0));
        assert_eq!(grid_cell(Category::Sports, COUNTRIES[27]).unwrap(), (3, 6));
        assert!(matches!(
            grid_cell(Category::Food, "Atlantis"),
            Err(ScenarioError::UnknownCountry(_))
        ));
        let mut sorted = COUNTRIES;
        sorted.sort_unstable();
        assert_eq!(sorted, COUNTRIES);
        for (i, c) in COUNTRIES.iter().enumerate() {
            let (r, col) = grid_cell(Category::Food, c).unwrap();
            assert_eq!(country_at(r, col), Some(COUNTRIES[i]));
        }
    }

    #[test]
    fn start_faces_sports() {
        for (name, text) in BUNDLED {
            let s = parse_scenario(text).unwrap();
            let f = advance(&s, 0.0);
            let body = f.state.get(&EntityRef::UserBody).unwrap();
            let sports = s.intermediary(Category::Sports).unwrap();
            let target = f.state.get(&EntityRef::entity(&sports.id)).unwrap().position;
            let dir = (target - body.position).horizontal().normalized().unwrap();
            assert!(body.orientation.forward().approx_eq(dir, 1e-6), "{name}");
        }
    }

    #[test]
    fn static_intermediaries_never_move() {
        let s = load("static_mobile_body_fixed");
        let f0 = advance(&s, 0.0);
        for i in 0..200 {
            let f = advance(&s, i as f64 * 0.77);
            for e in s.intermediaries() {
                let r = EntityRef::entity(&e.id);
                assert_eq!(f.state.get(&r), f0.state.get(&r));
            }
        }
    }

    #[test]
    fn mobile_user_is_near_when_near_trial_begins() {
        for name in ["dynamic_mobile_env_ref", "static_mobile_env_ref"] {
            let s = load(name);
            for (i, t) in s.trials.iter().enumerate() {
                let f = advance(&s, t.start);
                let body = f.state.get(&EntityRef::UserBody).unwrap().position;
                let inter = s.intermediary(t.category).unwrap();
                let p = f.state.get(&EntityRef::entity(&inter.id)).unwrap().position;
                assert_eq!(
                    body.horizontal_distance(p) < NEAR_THRESHOLD,
                    t.is_near(),
                    "{name} trial {i}"
                );
            }
        }
    }

    #[test]
    fn advance_is_order_independent() {
        let s = load("dynamic_mobile_body_fixed");
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.41).collect();
        let forward: Vec<_> = times.iter().map(|&t| advance(&s, t)).collect();
        let backward: Vec<_> = times.iter().rev().map(|&t| advance(&s, t)).collect();
        for (a, b) in forward.iter().zip(backward.iter().rev()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn word_reveal_and_transparent_headers() {
        let s = load("static_stationary_env_ref");
        let tr = &s.trials[0];
        let f = advance(&s, tr.start);
        let phase = f.trial.unwrap();
        assert_eq!((phase.index, phase.words_revealed, phase.presenting), (0, 1, true));
        assert!(f.headers_transparent);
        let f = advance(&s, tr.question_complete());
        let phase = f.trial.unwrap();
        assert_eq!(phase.words_revealed, tr.question_words.len());
        assert!(!phase.presenting && !f.headers_transparent);
        assert!(advance(&s, tr.start - 0.5).trial.is_none());
    }

    #[test]
    fn waypoint_interpolation() {
        let w = Waypoints {
            interpolation: Interpolation::Linear,
            points: vec![
                Waypoint {
                    t: 1.0,
                    position: Vec3::ZERO,
                    yaw_deg: 170.0,
                },
                Waypoint {
                    t: 3.0,
                    position: Vec3::new(2.0, 0.0, -4.0),
                    yaw_deg: -170.0,
                },
            ],
        };
        assert_eq!(w.sample(0.0), (Vec3::ZERO, 170.0));
        let (p, yaw) = w.sample(2.0);
        assert!(p.approx_eq(Vec3::new(1.0, 0.0, -2.0), 1e-12));
        assert!((yaw - 180.0).abs() < 1e-12);
        assert_eq!(w.sample(9.0).0, Vec3::new(2.0, 0.0, -4.0));
        let hold = Waypoints {
            interpolation: Interpolation::Hold,
            ..w
        };
        assert_eq!(hold.sample(2.9).0, Vec3::ZERO);
    }

    #[test]
    fn locate_finds_nested_values() {
        let text =
            "{\n  \"a\": 1,\n  \"trials\": [\n    {\"near\": true},\n    {\"x\": [1, {\"near\": false}]}\n  ]\n}";
        assert_eq!(locate(text, "a"), (2, 8));
        assert_eq!(locate(text, "trials[0].near"), (4, 14));
        assert_eq!(locate(text, "trials[1].x[1].near"), (5, 24));
        assert_eq!(locate(text, "trials"), (3, 13));
        // missing leaf falls back to its parent
        assert_eq!(locate(text, "trials[0].far"), (4, 5));
    }
}
