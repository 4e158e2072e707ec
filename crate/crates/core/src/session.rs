//! Replays a scenario under one placement strategy and scores every trial.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentParams, GazeSample, Observation, OpenEvent, ScanPolicy};
use crate::designspace::EntityRef;
use crate::geometry::{Pose, Rotation, Vec3};
use crate::metrics::{
    aggregate, classify_relevance, error_events, fixations, gaze_switches, navigation_time, MetricsError,
    SessionSummary, TrialMetrics,
};
use crate::placement::{
    body_fixed_local, BodyFixedConfig, ObjectAnchor, PlacementError, Placer, Strategy, StrategyConfig,
};
use crate::scenario::{advance, Category, Context, Scenario};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("placement: {0}")]
    Placement(#[from] PlacementError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
}

/// Overrides applied on top of a scenario's own settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOptions {
    pub strategy: Option<Strategy>,
    pub seed: Option<u64>,
    pub tick_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialTrace {
    pub samples: Vec<GazeSample>,
    pub opens: Vec<OpenEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionTrace {
    pub sample_period: f64,
    pub trials: Vec<TrialTrace>,
    pub warnings: Vec<String>,
}

/// Parameters a session ran with, exported next to its metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub session: String,
    pub context: Context,
    pub strategy: Strategy,
    pub seed: u64,
    pub scan_policy: ScanPolicy,
    pub fixation_min: f64,
    pub per_cell_scan_time: f64,
    pub known_grid: bool,
    pub head_rate_deg_s: f64,
    pub tick_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionResult {
    pub session: String,
    pub strategy: Strategy,
    pub params: AgentParams,
    pub trials: Vec<TrialMetrics>,
    pub summary: SessionSummary,
    pub warnings: Vec<String>,
}

impl SessionResult {
    pub fn info(&self) -> RunInfo {
        let p = &self.params;
        RunInfo {
            session: self.session.clone(),
            context: self.summary.context,
            strategy: self.strategy,
            seed: p.seed,
            scan_policy: p.scan_policy,
            fixation_min: p.fixation_min,
            per_cell_scan_time: p.per_cell_scan_time,
            known_grid: p.known_grid,
            head_rate_deg_s: p.head_rate_deg_s,
            tick_hz: p.tick_hz,
        }
    }
}

fn default_bearings() -> BodyFixedConfig {
    BodyFixedConfig(BTreeMap::from([
        ("food".to_string(), 90.0),
        ("movies".to_string(), -90.0),
        ("sports".to_string(), 0.0),
    ]))
}

/// The scenario's strategy configuration with any missing world-, head- or
/// object-fixed block derived from the rest of the scene.
pub fn effective_config(scenario: &Scenario) -> StrategyConfig {
    let mut cfg = scenario.strategy_config.clone();
    let bearings = cfg.body_fixed.clone().unwrap_or_else(default_bearings);
    let params = &scenario.placement;
    if cfg.world_fixed.is_none() {
        // body-fixed layout frozen where the user starts
        let body = advance(scenario, 0.0)
            .state
            .get(&EntityRef::UserBody)
            .copied()
            .unwrap_or(Pose::IDENTITY);
        cfg.world_fixed = Some(
            bearings
                .0
                .iter()
                .map(|(id, &b)| (id.clone(), body.compose(&body_fixed_local(b, params))))
                .collect(),
        );
    }
    if cfg.head_fixed.is_none() {
        cfg.head_fixed = Some(
            bearings
                .0
                .iter()
                .map(|(id, &b)| {
                    let r = Rotation::from_heading_deg(b / 3.0);
                    let local = Pose {
                        position: r.rotate(Vec3::new(0.0, -0.1, -params.panel_distance)),
                        orientation: r,
                        scale: params.panel_scale,
                    };
                    (id.clone(), local)
                })
                .collect(),
        );
    }
    if cfg.object_fixed.is_none() {
        cfg.object_fixed = Some(
            Category::ALL
                .iter()
                .filter_map(|&c| {
                    let e = scenario.intermediary(c)?;
                    let anchor = ObjectAnchor {
                        entity: EntityRef::entity(&e.id),
                        local: Pose::translation(0.0, e.look_height + 0.4, 0.0),
                    };
                    Some((c.as_str().to_string(), anchor))
                })
                .collect(),
        );
    }
    cfg
}

/// Agent parameters after applying run overrides.
pub fn effective_agent(scenario: &Scenario, opts: &RunOptions) -> AgentParams {
    let mut p = scenario.agent;
    if let Some(seed) = opts.seed {
        p.seed = seed;
    }
    if let Some(hz) = opts.tick_hz {
        p.tick_hz = hz;
    }
    p
}

/// Ticks through the whole scenario and records gaze and opens per trial.
pub fn simulate(scenario: &Scenario, strategy: Strategy, params: AgentParams) -> Result<SessionTrace, SessionError> {
    let cfg = effective_config(scenario);
    let mut placer = Placer::new(strategy, &cfg, &scenario.placement)?;
    let start_body = advance(scenario, 0.0)
        .state
        .get(&EntityRef::UserBody)
        .copied()
        .unwrap_or(Pose::IDENTITY);
    let mut agent = Agent::new(params, start_body.forward(), scenario.placement.eye_height);
    let end = scenario.trials.iter().map(|t| t.end()).fold(0.0, f64::max);
    let ticks = (end * params.tick_hz).ceil() as u64;
    let mut trials = vec![TrialTrace::default(); scenario.trials.len()];

    for k in 0..=ticks {
        let t = k as f64 / params.tick_hz;
        let mut frame = advance(scenario, t);
        let body = frame.state.get(&EntityRef::UserBody).copied().unwrap_or(Pose::IDENTITY);
        frame.state.set(EntityRef::UserHead, agent.head_pose(&body));
        let panels: BTreeMap<String, Pose> = placer.place(&frame.state)?.clone();
        let out = agent.step(&Observation {
            scenario,
            frame: &frame,
            panels: &panels,
        });
        if let Some(phase) = frame.trial {
            let tr = &mut trials[phase.index];
            tr.samples.push(out.sample);
            tr.opens.extend(out.open);
        }
    }
    Ok(SessionTrace {
        sample_period: params.dt(),
        trials,
        warnings: placer.warnings().iter().map(ToString::to_string).collect(),
    })
}

/// Scores a recorded session.
pub fn evaluate(
    scenario: &Scenario,
    strategy: Strategy,
    trace: &SessionTrace,
    params: &AgentParams,
) -> Result<Vec<TrialMetrics>, SessionError> {
    scenario
        .trials
        .iter()
        .zip(&trace.trials)
        .enumerate()
        .map(|(i, (trial, tt))| {
            let fx = fixations(&tt.samples, trace.sample_period, params.fixation_min);
            let error_count = error_events(&tt.opens, trial);
            Ok(TrialMetrics {
                session: scenario.name.clone(),
                context: scenario.context(),
                strategy,
                trial_index: i,
                category: trial.category,
                country: trial.country.clone(),
                near: trial.is_near(),
                relevance: classify_relevance(scenario, i),
                navigation_time: navigation_time(&fx, trial, i)?,
                gaze_switches: gaze_switches(&fx, false),
                error_count,
                error_flag: error_count > 0,
            })
        })
        .collect()
}

pub fn run_session(scenario: &Scenario, opts: &RunOptions) -> Result<SessionResult, SessionError> {
    let strategy = opts.strategy.unwrap_or(scenario.strategy);
    let params = effective_agent(scenario, opts);
    let trace = simulate(scenario, strategy, params)?;
    let trials = evaluate(scenario, strategy, &trace, &params)?;
    let summary = aggregate(&trials)?;
    Ok(SessionResult {
        session: scenario.name.clone(),
        strategy,
        params,
        trials,
        summary,
        warnings: trace.warnings,
    })
}

/// Runs sessions in parallel. Results come back in input order.
pub fn run_batch(scenarios: &[Scenario], opts: &RunOptions) -> Vec<Result<SessionResult, SessionError>> {
    scenarios.par_iter().map(|s| run_session(s, opts)).collect()
}

/// Trial rows of several sessions, sorted by context, strategy and trial.
pub fn sorted_rows(results: &[SessionResult]) -> Vec<TrialMetrics> {
    let mut rows: Vec<TrialMetrics> = results.iter().flat_map(|r| r.trials.iter().cloned()).collect();
    rows.sort_by(|a, b| {
        (a.context, a.strategy, &a.session, a.trial_index).cmp(&(b.context, b.strategy, &b.session, b.trial_index))
    });
    rows
}

pub fn sorted_summaries(results: &[SessionResult]) -> Vec<SessionSummary> {
    let mut rows: Vec<SessionSummary> = results.iter().map(|r| r.summary.clone()).collect();
    rows.sort_by(|a, b| (a.context, a.strategy, &a.session).cmp(&(b.context, b.strategy, &b.session)));
    rows
}
