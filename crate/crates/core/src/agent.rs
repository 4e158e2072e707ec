//! Synthetic participant.
//!
//! The agent looks at its scripted focus (the asking host, the question
//! screen or a nearby poster) until a question has been fully presented,
//! then searches the category panels for the requested document. The head
//! turns at a capped angular rate; while it is travelling the gaze target is
//! `None`. Everything advances in fixed ticks, so identical inputs give
//! bit-identical gaze streams.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designspace::EntityRef;
use crate::geometry::{Pose, Rotation, Vec3};
use crate::scenario::{
    grid_cell, Category, Entity, RwSetting, Scenario, ScenarioFrame, UserState, COUNTRIES, GRID_COLS,
};

/// Panels whose angular distances differ by less than this are tied.
pub const TIE_TOLERANCE_DEG: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanPolicy {
    /// Always turn to the unvisited panel closest to the current gaze.
    #[default]
    NearestPanelFirst,
    /// Visit panels by increasing bearing from where the search started,
    /// left before right.
    BearingOrder,
    /// Seeded random visiting order with occasional wrong opens.
    RandomSeeded,
}

fn d_fixation() -> f64 {
    0.15
}
fn d_cell() -> f64 {
    0.2
}
fn d_true() -> bool {
    true
}
fn d_seed() -> u64 {
    42
}
fn d_rate() -> f64 {
    180.0
}
fn d_hz() -> f64 {
    50.0
}
fn d_confusion() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentParams {
    #[serde(default = "d_fixation")]
    pub fixation_min: f64,
    #[serde(default)]
    pub scan_policy: ScanPolicy,
    #[serde(default = "d_cell")]
    pub per_cell_scan_time: f64,
    #[serde(default = "d_true")]
    pub known_grid: bool,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_rate")]
    pub head_rate_deg_s: f64,
    #[serde(default = "d_hz")]
    pub tick_hz: f64,
    /// Chance of opening a wrong document on each panel visited; only used
    /// by [`ScanPolicy::RandomSeeded`].
    #[serde(default = "d_confusion")]
    pub confusion_prob: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            fixation_min: d_fixation(),
            scan_policy: ScanPolicy::default(),
            per_cell_scan_time: d_cell(),
            known_grid: true,
            seed: d_seed(),
            head_rate_deg_s: d_rate(),
            tick_hz: d_hz(),
            confusion_prob: d_confusion(),
        }
    }
}

impl AgentParams {
    /// Field name and message for every out-of-range parameter.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut positive = |name: &'static str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                out.push((name, format!("{name} must be positive, got {v}")));
            }
        };
        positive("fixation_min", self.fixation_min);
        positive("per_cell_scan_time", self.per_cell_scan_time);
        positive("head_rate_deg_s", self.head_rate_deg_s);
        positive("tick_hz", self.tick_hz);
        if !(0.0..=1.0).contains(&self.confusion_prob) {
            out.push(("confusion_prob", "confusion_prob must lie in [0, 1]".into()));
        }
        out
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    /// Whole ticks needed to cover `duration`.
    pub fn ticks(&self, duration: f64) -> u32 {
        ((duration * self.tick_hz - 1e-9).ceil() as u32).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GazeTarget {
    Panel(Category),
    Document { category: Category, row: usize, col: usize },
    Intermediary(String),
    Screen,
    None,
}

impl GazeTarget {
    /// Category panel this target lies on, counting documents as part of
    /// their panel.
    pub fn panel(&self) -> Option<Category> {
        match self {
            GazeTarget::Panel(c) | GazeTarget::Document { category: c, .. } => Some(*c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub t: f64,
    pub target: GazeTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenEvent {
    pub t: f64,
    pub category: Category,
    pub country: String,
}

/// Trial whose asker is relevant at `t`: the active one, else the next,
/// else the last.
fn current_or_next_trial(scenario: &Scenario, t: f64) -> Option<usize> {
    scenario
        .active_trial(t)
        .or_else(|| scenario.trials.iter().position(|tr| tr.start > t))
        .or_else(|| scenario.trials.len().checked_sub(1))
}

/// The intermediary holding the agent's attention when not searching.
pub fn primary_focus<'a>(scenario: &'a Scenario, frame: &ScenarioFrame) -> Option<&'a Entity> {
    match (scenario.rw_setting, scenario.user_state) {
        (RwSetting::Dynamic, _) => {
            let i = current_or_next_trial(scenario, frame.state.time)?;
            scenario.intermediary(scenario.trials[i].category)
        }
        (RwSetting::Static, UserState::Mobile) => scenario.nearest_intermediary(&frame.state),
        (RwSetting::Static, UserState::Stationary) => scenario.intermediary(Category::Sports),
    }
}

/// Where the agent's attention belongs when it is not searching.
pub fn focus_target(scenario: &Scenario, frame: &ScenarioFrame) -> GazeTarget {
    let presenting = frame.trial.is_some_and(|p| p.presenting);
    if presenting && scenario.rw_setting == RwSetting::Static {
        return GazeTarget::Screen;
    }
    primary_focus(scenario, frame).map_or(GazeTarget::None, |e| GazeTarget::Intermediary(e.id.clone()))
}

fn focus_point(scenario: &Scenario, frame: &ScenarioFrame, target: &GazeTarget) -> Option<Vec3> {
    match target {
        GazeTarget::Intermediary(id) => scenario.look_point(&frame.state, scenario.entity(id)?),
        GazeTarget::Screen => {
            let screen = scenario.screen()?;
            Some(frame.state.get(&EntityRef::entity(&screen.id))?.position)
        }
        _ => None,
    }
}

/// Inputs for one tick.
pub struct Observation<'a> {
    pub scenario: &'a Scenario,
    pub frame: &'a ScenarioFrame,
    /// World poses of the category panels, keyed by panel id.
    pub panels: &'a BTreeMap<String, Pose>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub sample: GazeSample,
    pub open: Option<OpenEvent>,
}

/// One document fixation inside a panel.
#[derive(Debug, Clone, Copy)]
struct DocStep {
    cell: (usize, usize),
    ticks: u32,
    open: bool,
}

#[derive(Debug, Clone)]
enum Phase {
    Choose,
    Travel {
        panel: Category,
        aim: Vec3,
    },
    PanelDwell {
        panel: Category,
        left: u32,
    },
    Documents {
        category: Category,
        steps: VecDeque<DocStep>,
        left: u32,
        started: f64,
    },
}

#[derive(Debug, Clone)]
struct Search {
    trial: usize,
    rng: ChaCha8Rng,
    preference: [Category; 3],
    queue: Vec<Category>,
    visited: Vec<Category>,
    phase: Phase,
    /// Head aim held while dwelling on the current panel.
    aim: Option<Vec3>,
}

#[derive(Debug, Clone)]
enum Mode {
    Focus,
    Search(Box<Search>),
    Answered(usize),
}

/// Tick-driven agent state.
#[derive(Debug, Clone)]
pub struct Agent {
    params: AgentParams,
    forward: Vec3,
    eye_height: f64,
    mode: Mode,
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (trial as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per-trial category preference used to break ties. Depends only on the
/// seed and trial index, so every strategy sees the same order.
pub fn tie_preference(seed: u64, trial: usize) -> [Category; 3] {
    let mut order = Category::ALL;
    order.shuffle(&mut trial_rng(seed, trial));
    order
}

impl Agent {
    pub fn new(params: AgentParams, initial_forward: Vec3, eye_height: f64) -> Self {
        Agent {
            params,
            forward: initial_forward.normalized().unwrap_or(Vec3::FORWARD),
            eye_height,
            mode: Mode::Focus,
        }
    }

    pub fn params(&self) -> &AgentParams {
        &self.params
    }

    pub fn forward(&self) -> Vec3 {
        self.forward
    }

    /// Head pose for a body pose: eye height above the body, looking along
    /// the current gaze direction.
    pub fn head_pose(&self, body: &Pose) -> Pose {
        let orientation = Rotation::looking_along(self.forward).unwrap_or(body.orientation);
        Pose::from_parts(body.position + Vec3::UP * self.eye_height, orientation)
    }

    /// Turns the head toward `point`; true once it points straight at it.
    fn turn_toward(&mut self, eye: Vec3, point: Vec3) -> bool {
        let Some(dir) = (point - eye).normalized() else {
            return true;
        };
        let angle = self.forward.angle_to(dir);
        let step = self.params.head_rate_deg_s.to_radians() * self.params.dt();
        if angle <= step + 1e-12 {
            self.forward = dir;
            return true;
        }
        let axis = self.forward.cross(dir).normalized().unwrap_or(Vec3::UP);
        let r = Rotation::from_axis_angle(axis, step).unwrap_or(Rotation::IDENTITY);
        self.forward = r.rotate(self.forward).normalized().unwrap_or(dir);
        false
    }

    /// Advances one tick at `obs.frame.state.time`.
    pub fn step(&mut self, obs: &Observation<'_>) -> StepOutput {
        let t = obs.frame.state.time;
        let body = obs
            .frame
            .state
            .get(&EntityRef::UserBody)
            .copied()
            .unwrap_or(Pose::IDENTITY);
        let eye = body.position + Vec3::UP * self.eye_height;
        self.sync_mode(obs);

        let (target, open) = match &mut self.mode {
            Mode::Search(_) => self.search_tick(obs, eye),
            Mode::Focus | Mode::Answered(_) => {
                let target = focus_target(obs.scenario, obs.frame);
                let arrived = match focus_point(obs.scenario, obs.frame, &target) {
                    Some(p) => self.turn_toward(eye, p),
                    None => false,
                };
                (if arrived { target } else { GazeTarget::None }, None)
            }
        };
        StepOutput {
            sample: GazeSample { t, target },
            open,
        }
    }

    fn sync_mode(&mut self, obs: &Observation<'_>) {
        let t = obs.frame.state.time;
        let active = obs.frame.trial.map(|p| p.index);
        let in_trial = |i: usize| active == Some(i);
        match &self.mode {
            Mode::Search(s) if in_trial(s.trial) => return,
            Mode::Answered(i) if in_trial(*i) => return,
            _ => {}
        }
        self.mode = match active {
            Some(i) if t >= obs.scenario.trials[i].question_complete() => {
                // a separate stream from the one that drew the tie preference
                let mut rng = trial_rng(self.params.seed, i);
                rng.set_stream(1);
                let mut s = Search {
                    trial: i,
                    rng,
                    preference: tie_preference(self.params.seed, i),
                    queue: Vec::new(),
                    visited: Vec::new(),
                    phase: Phase::Choose,
                    aim: None,
                };
                s.queue = self.initial_queue(obs, &mut s);
                Mode::Search(Box::new(s))
            }
            _ => Mode::Focus,
        };
    }

    fn initial_queue(&self, obs: &Observation<'_>, s: &mut Search) -> Vec<Category> {
        match self.params.scan_policy {
            ScanPolicy::NearestPanelFirst => Vec::new(),
            ScanPolicy::RandomSeeded => {
                let mut q = Category::ALL.to_vec();
                q.shuffle(&mut s.rng);
                q
            }
            ScanPolicy::BearingOrder => {
                let body = obs
                    .frame
                    .state
                    .get(&EntityRef::UserBody)
                    .map_or(Vec3::ZERO, |p| p.position);
                let ref_heading = self.forward.heading();
                let mut q: Vec<(f64, usize, Category)> = Category::ALL
                    .iter()
                    .filter_map(|&c| {
                        let p = obs.panels.get(c.as_str())?.position;
                        let h = (p - body).heading() - ref_heading;
                        let b = h.sin().atan2(h.cos()).to_degrees();
                        let rank = s.preference.iter().position(|&x| x == c).unwrap_or(3);
                        Some((b, rank, c))
                    })
                    .collect();
                q.sort_by(|a, b| {
                    let (ma, mb) = (a.0.abs(), b.0.abs());
                    if (ma - mb).abs() >= TIE_TOLERANCE_DEG {
                        ma.total_cmp(&mb)
                    } else if (a.0 - b.0).abs() >= TIE_TOLERANCE_DEG {
                        a.0.total_cmp(&b.0)
                    } else {
                        a.1.cmp(&b.1)
                    }
                });
                q.into_iter().map(|x| x.2).collect()
            }
        }
    }

    fn next_panel(&self, obs: &Observation<'_>, s: &Search, eye: Vec3) -> Option<Category> {
        if self.params.scan_policy != ScanPolicy::NearestPanelFirst {
            return s.queue.iter().copied().find(|c| !s.visited.contains(c));
        }
        let mut best: Option<(f64, usize, Category)> = None;
        for c in Category::ALL.into_iter().filter(|c| !s.visited.contains(c)) {
            let Some(p) = obs.panels.get(c.as_str()) else { continue };
            let angle = self.forward.angle_to(p.position - eye).to_degrees();
            let rank = s.preference.iter().position(|&x| x == c).unwrap_or(3);
            let better = match best {
                None => true,
                Some((ba, br, _)) => {
                    if (angle - ba).abs() < TIE_TOLERANCE_DEG {
                        rank < br
                    } else {
                        angle < ba
                    }
                }
            };
            if better {
                best = Some((angle, rank, c));
            }
        }
        best.map(|b| b.2)
    }

    /// Document fixations that follow a panel dwell.
    fn document_plan(
        &self,
        rng: &mut ChaCha8Rng,
        panel: Category,
        wanted: Category,
        target: (usize, usize),
    ) -> VecDeque<DocStep> {
        let p = &self.params;
        let confused = p.scan_policy == ScanPolicy::RandomSeeded && rng.random::<f64>() < p.confusion_prob;
        let opened = |cell| DocStep {
            cell,
            ticks: p.ticks(p.fixation_min),
            open: true,
        };
        let mut steps = VecDeque::new();
        if panel != wanted {
            if confused {
                steps.push_back(opened(target));
            }
            return steps;
        }
        let target_index = target.0 * GRID_COLS + target.1;
        if !p.known_grid {
            for i in 0..target_index {
                steps.push_back(DocStep {
                    cell: (i / GRID_COLS, i % GRID_COLS),
                    ticks: p.ticks(p.per_cell_scan_time),
                    open: false,
                });
            }
        }
        if confused {
            let wrong = (target_index + 1 + rng.random_range(0..COUNTRIES.len() - 1)) % COUNTRIES.len();
            steps.push_back(opened((wrong / GRID_COLS, wrong % GRID_COLS)));
        }
        steps.push_back(opened(target));
        steps
    }

    fn search_tick(&mut self, obs: &Observation<'_>, eye: Vec3) -> (GazeTarget, Option<OpenEvent>) {
        let Mode::Search(mut s) = std::mem::replace(&mut self.mode, Mode::Focus) else {
            unreachable!("search_tick outside a search");
        };
        let trial = &obs.scenario.trials[s.trial];
        let target_cell = grid_cell(trial.category, &trial.country).unwrap_or((0, 0));
        let p = self.params;
        let t = obs.frame.state.time;

        if matches!(s.phase, Phase::Choose) {
            match self.next_panel(obs, &s, eye) {
                Some(panel) => {
                    let aim = obs.panels[panel.as_str()].position;
                    s.phase = Phase::Travel { panel, aim };
                }
                None => {
                    // nothing left to look at: give up on this trial
                    self.mode = Mode::Answered(s.trial);
                    return (GazeTarget::None, None);
                }
            }
        }

        let mut open = None;
        let target = match &mut s.phase {
            Phase::Choose => unreachable!("a panel was just chosen"),
            Phase::Travel { panel, aim } => {
                let (panel, aim) = (*panel, *aim);
                if self.turn_toward(eye, aim) {
                    s.aim = Some(aim);
                    s.visited.push(panel);
                    let dwell = if panel == trial.category {
                        p.per_cell_scan_time
                    } else {
                        p.fixation_min
                    };
                    s.phase = Phase::PanelDwell {
                        panel,
                        left: p.ticks(dwell),
                    };
                    GazeTarget::Panel(panel)
                } else {
                    GazeTarget::None
                }
            }
            Phase::PanelDwell { panel, .. } => GazeTarget::Panel(*panel),
            Phase::Documents { category, steps, .. } => {
                let (row, col) = steps.front().expect("pending document step").cell;
                GazeTarget::Document {
                    category: *category,
                    row,
                    col,
                }
            }
        };
        if let (Some(aim), false) = (s.aim, matches!(s.phase, Phase::Travel { .. })) {
            self.turn_toward(eye, aim);
        }

        // count down the sample just emitted and move on when done
        let mut finished = false;
        match &mut s.phase {
            Phase::PanelDwell { panel, left } => {
                *left -= 1;
                if *left == 0 {
                    let panel = *panel;
                    let steps = self.document_plan(&mut s.rng, panel, trial.category, target_cell);
                    s.phase = match steps.front() {
                        Some(first) => Phase::Documents {
                            category: panel,
                            left: first.ticks,
                            steps,
                            started: t + p.dt(),
                        },
                        None => Phase::Choose,
                    };
                }
            }
            Phase::Documents {
                category,
                steps,
                left,
                started,
            } => {
                *left -= 1;
                if *left == 0 {
                    let step = steps.pop_front().expect("pending document step");
                    if step.open {
                        let (row, col) = step.cell;
                        open = Some(OpenEvent {
                            t: *started + p.fixation_min,
                            category: *category,
                            country: COUNTRIES[row * GRID_COLS + col].to_string(),
                        });
                        finished = *category == trial.category && step.cell == target_cell;
                    }
                    match steps.front() {
                        Some(next) => {
                            *left = next.ticks;
                            *started = t + p.dt();
                        }
                        None if !finished => s.phase = Phase::Choose,
                        None => {}
                    }
                }
            }
            _ => {}
        }

        self.mode = if finished {
            Mode::Answered(s.trial)
        } else {
            Mode::Search(s)
        };
        (target, open)
    }
}
