//! Trial and session metrics computed from gaze streams and open events.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{primary_focus, GazeSample, GazeTarget, OpenEvent};
use crate::placement::Strategy;
use crate::scenario::{advance, grid_cell, Category, Context, Scenario, Trial};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trial {0} never fixated the correct document")]
    IncompleteTrial(usize),
    #[error("cannot aggregate an empty trial set")]
    EmptyTrialSet,
    #[error("runs do not cover the same scenarios: {0}")]
    MismatchedScenarios(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A maximal run of samples on one target lasting at least the minimum
/// fixation duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixation {
    pub target: GazeTarget,
    pub start: f64,
    pub duration: f64,
}

/// Groups consecutive identical targets into fixations. Each sample stands
/// for one `sample_period`. `GazeTarget::None` never forms a fixation.
pub fn fixations(samples: &[GazeSample], sample_period: f64, fixation_min: f64) -> Vec<Fixation> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        let mut j = i + 1;
        while j < samples.len() && samples[j].target == samples[i].target {
            j += 1;
        }
        let duration = samples[j - 1].t - samples[i].t + sample_period;
        if samples[i].target != GazeTarget::None && duration + 1e-9 >= fixation_min {
            out.push(Fixation {
                target: samples[i].target.clone(),
                start: samples[i].t,
                duration,
            });
        }
        i = j;
    }
    out
}

/// Seconds from complete question presentation to the first fixation on
/// the correct document, clamped at zero.
pub fn navigation_time(fixations: &[Fixation], trial: &Trial, trial_index: usize) -> Result<f64, MetricsError> {
    let (row, col) =
        grid_cell(trial.category, &trial.country).map_err(|_| MetricsError::IncompleteTrial(trial_index))?;
    let wanted = GazeTarget::Document {
        category: trial.category,
        row,
        col,
    };
    fixations
        .iter()
        .find(|f| f.target == wanted)
        .map(|f| (f.start - trial.question_complete()).max(0.0))
        .ok_or(MetricsError::IncompleteTrial(trial_index))
}

/// Transitions between fixations on distinct category panels. A document
/// counts as its panel. Fixations elsewhere are skipped; with
/// `reset_on_other` they also clear the last-panel memory.
pub fn gaze_switches(fixations: &[Fixation], reset_on_other: bool) -> u32 {
    let mut last: Option<Category> = None;
    let mut n = 0;
    for f in fixations {
        match f.target.panel() {
            Some(p) => {
                if last.is_some_and(|l| l != p) {
                    n += 1;
                }
                last = Some(p);
            }
            None if reset_on_other => last = None,
            None => {}
        }
    }
    n
}

/// Opens of any document other than the trial's target.
pub fn error_events(opens: &[OpenEvent], trial: &Trial) -> u32 {
    opens
        .iter()
        .filter(|o| o.category != trial.category || o.country != trial.country)
        .count() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relevance {
    Relevant,
    Irrelevant,
}

/// Whether the trial's category matches the agent's primary focus when the
/// trial starts.
pub fn classify_relevance(scenario: &Scenario, trial_index: usize) -> Relevance {
    let trial = &scenario.trials[trial_index];
    let frame = advance(scenario, trial.start);
    match primary_focus(scenario, &frame).and_then(|e| e.category) {
        Some(c) if c == trial.category => Relevance::Relevant,
        _ => Relevance::Irrelevant,
    }
}

/// One exported row per trial. Column order is part of the output format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub session: String,
    pub context: Context,
    pub strategy: Strategy,
    pub trial_index: usize,
    pub category: Category,
    pub country: String,
    pub near: bool,
    pub relevance: Relevance,
    pub navigation_time: f64,
    pub gaze_switches: u32,
    pub error_count: u32,
    pub error_flag: bool,
}

/// Mean, median and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let m = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[m]
        } else {
            (sorted[m - 1] + sorted[m]) / 2.0
        };
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Stats { mean, median, sd })
    }
}

/// Per-session aggregate. `error_rate` is the share of trials with any
/// wrong open; `error_count` summarizes raw counts per trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session: String,
    pub context: Context,
    pub strategy: Strategy,
    pub trials: usize,
    pub navigation_time_mean: f64,
    pub navigation_time_median: f64,
    pub navigation_time_sd: f64,
    pub gaze_switches_mean: f64,
    pub gaze_switches_median: f64,
    pub gaze_switches_sd: f64,
    pub error_count_mean: f64,
    pub error_count_median: f64,
    pub error_count_sd: f64,
    pub error_rate: f64,
    pub relevant_share: f64,
}

/// Summarizes the trials of one session.
pub fn aggregate(trials: &[TrialMetrics]) -> Result<SessionSummary, MetricsError> {
    let first = trials.first().ok_or(MetricsError::EmptyTrialSet)?;
    let stat = |f: fn(&TrialMetrics) -> f64| Stats::of(&trials.iter().map(f).collect::<Vec<_>>()).expect("non-empty");
    let nav = stat(|t| t.navigation_time);
    let sw = stat(|t| t.gaze_switches as f64);
    let err = stat(|t| t.error_count as f64);
    let n = trials.len() as f64;
    Ok(SessionSummary {
        session: first.session.clone(),
        context: first.context,
        strategy: first.strategy,
        trials: trials.len(),
        navigation_time_mean: nav.mean,
        navigation_time_median: nav.median,
        navigation_time_sd: nav.sd,
        gaze_switches_mean: sw.mean,
        gaze_switches_median: sw.median,
        gaze_switches_sd: sw.sd,
        error_count_mean: err.mean,
        error_count_median: err.median,
        error_count_sd: err.sd,
        error_rate: trials.iter().filter(|t| t.error_flag).count() as f64 / n,
        relevant_share: trials.iter().filter(|t| t.relevance == Relevance::Relevant).count() as f64 / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Serializes rows as CSV with a header or as a pretty JSON array.
pub fn export<T: Serialize>(rows: &[T], format: Format) -> Result<String, MetricsError> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)?;
            }
            let bytes = w.into_inner().map_err(|e| MetricsError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Json => {
            let mut s = serde_json::to_string_pretty(rows)?;
            s.push('\n');
            Ok(s)
        }
    }
}

pub fn import<T: for<'de> Deserialize<'de>>(text: &str, format: Format) -> Result<Vec<T>, MetricsError> {
    match format {
        Format::Csv => csv::Reader::from_reader(text.as_bytes())
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(Into::into),
        Format::Json => Ok(serde_json::from_str(text)?),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "A<B")]
    Less,
    #[serde(rename = "A>B")]
    Greater,
    #[serde(rename = "tie")]
    Tie,
}

impl Direction {
    pub fn of(a: f64, b: f64, tolerance: f64) -> Direction {
        if (a - b).abs() <= tolerance {
            Direction::Tie
        } else if a < b {
            Direction::Less
        } else {
            Direction::Greater
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Less => "A<B",
            Direction::Greater => "A>B",
            Direction::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub context: Context,
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub direction: Direction,
}

/// Reads one metric off a session summary.
pub type Metric = fn(&SessionSummary) -> f64;

/// Metrics compared between runs, as (name, accessor).
pub const COMPARED: [(&str, Metric); 4] = [
    ("navigation_time_mean", |s| s.navigation_time_mean),
    ("gaze_switches_mean", |s| s.gaze_switches_mean),
    ("error_count_mean", |s| s.error_count_mean),
    ("error_rate", |s| s.error_rate),
];

/// Per-context, per-metric direction of run A relative to run B. Sessions
/// are matched by context; a context with several sessions pairs them in
/// strategy order and averages each side.
pub fn compare(a: &[SessionSummary], b: &[SessionSummary], tolerance: f64) -> Result<Vec<ComparisonRow>, MetricsError> {
    let group = |runs: &[SessionSummary]| {
        let mut m: BTreeMap<Context, Vec<SessionSummary>> = BTreeMap::new();
        for s in runs {
            m.entry(s.context).or_default().push(s.clone());
        }
        m
    };
    let (ga, gb) = (group(a), group(b));
    let keys_a: Vec<_> = ga.keys().collect();
    let keys_b: Vec<_> = gb.keys().collect();
    if keys_a != keys_b {
        return Err(MetricsError::MismatchedScenarios(format!(
            "contexts {keys_a:?} vs {keys_b:?}"
        )));
    }
    let mut rows = Vec::new();
    for (ctx, sa) in &ga {
        let sb = &gb[ctx];
        let trials = |v: &[SessionSummary]| v.iter().map(|s| s.trials).collect::<Vec<_>>();
        if trials(sa) != trials(sb) {
            return Err(MetricsError::MismatchedScenarios(format!(
                "{ctx}: trial counts {:?} vs {:?}",
                trials(sa),
                trials(sb)
            )));
        }
        for (name, get) in COMPARED {
            let mean = |v: &[SessionSummary]| v.iter().map(get).sum::<f64>() / v.len() as f64;
            let (va, vb) = (mean(sa), mean(sb));
            rows.push(ComparisonRow {
                context: *ctx,
                metric: name.to_string(),
                a: va,
                b: vb,
                direction: Direction::of(va, vb, tolerance),
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop, prop_assert, prop_assert_eq, proptest};

    fn fx(targets: &[GazeTarget]) -> Vec<Fixation> {
        targets
            .iter()
            .enumerate()
            .map(|(i, t)| Fixation {
                target: t.clone(),
                start: i as f64,
                duration: 0.5,
            })
            .collect()
    }

    fn trial() -> Trial {
        Trial {
            category: Category::Movies,
            country: "Japan".into(),
            question_words: vec!["Top".into(), "film".into(), "from".into(), "Japan".into()],
            start: 2.0,
            duration: 15.0,
            word_schedule: Some(vec![0.0, 1.0, 2.0, 3.0]),
            repeat_interval: 30.0,
            near: None,
        }
    }

    const SPORTS: GazeTarget = GazeTarget::Panel(Category::Sports);
    const FOOD: GazeTarget = GazeTarget::Panel(Category::Food);

    #[test]
    fn switch_examples() {
        assert_eq!(gaze_switches(&fx(&[SPORTS, SPORTS, FOOD, SPORTS]), false), 2);
        let host = GazeTarget::Intermediary("host".into());
        assert_eq!(gaze_switches(&fx(&[SPORTS, host.clone(), SPORTS]), false), 0);
        assert_eq!(gaze_switches(&fx(&[SPORTS, host, FOOD]), true), 0);
        assert_eq!(gaze_switches(&fx(&[SPORTS, SPORTS, SPORTS]), false), 0);
        let doc = GazeTarget::Document {
            category: Category::Sports,
            row: 0,
            col: 0,
        };
        assert_eq!(gaze_switches(&fx(&[SPORTS, doc]), false), 0);
    }

    #[test]
    fn navigation_time_examples() {
        let tr = trial();
        assert_eq!(tr.question_complete(), 5.0);
        let (row, col) = grid_cell(Category::Movies, "Japan").unwrap();
        let doc = GazeTarget::Document {
            category: Category::Movies,
            row,
            col,
        };
        let at = |t: f64| {
            vec![Fixation {
                target: doc.clone(),
                start: t,
                duration: 0.2,
            }]
        };
        assert!((navigation_time(&at(7.3), &tr, 0).unwrap() - 2.3).abs() < 1e-12);
        assert_eq!(navigation_time(&at(5.0), &tr, 0).unwrap(), 0.0);
        assert!(matches!(
            navigation_time(&fx(&[FOOD]), &tr, 3),
            Err(MetricsError::IncompleteTrial(3))
        ));
    }

    #[test]
    fn error_examples() {
        let tr = trial();
        let open = |c: Category, country: &str| OpenEvent {
            t: 0.0,
            category: c,
            country: country.into(),
        };
        let good = open(Category::Movies, "Japan");
        assert_eq!(error_events(std::slice::from_ref(&good), &tr), 0);
        assert_eq!(error_events(&[open(Category::Food, "Japan"), good.clone()], &tr), 1);
        assert_eq!(
            error_events(
                &[open(Category::Movies, "Peru"), open(Category::Sports, "Japan"), good],
                &tr
            ),
            2
        );
    }

    #[test]
    fn fixation_grouping() {
        let s = |t: f64, target: GazeTarget| GazeSample { t, target };
        let samples = vec![
            s(0.00, GazeTarget::None),
            s(0.02, SPORTS),
            s(0.04, SPORTS),
            s(0.06, FOOD),
            s(0.08, FOOD),
            s(0.10, FOOD),
        ];
        let f = fixations(&samples, 0.02, 0.05);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].target, FOOD);
        assert!((f[0].duration - 0.06).abs() < 1e-12);
        assert_eq!(fixations(&samples, 0.02, 0.04).len(), 2);
    }

    fn metrics_row(i: usize, nav: f64) -> TrialMetrics {
        TrialMetrics {
            session: "s".into(),
            context: Context::StaticMobile,
            strategy: Strategy::BodyFixed,
            trial_index: i,
            category: Category::Food,
            country: "Peru".into(),
            near: i % 2 == 0,
            relevance: Relevance::Irrelevant,
            navigation_time: nav,
            gaze_switches: i as u32,
            error_count: 0,
            error_flag: false,
        }
    }

    #[test]
    fn aggregate_single_and_empty() {
        let s = aggregate(&[metrics_row(0, 1.25)]).unwrap();
        assert_eq!(s.navigation_time_mean, 1.25);
        assert_eq!(s.navigation_time_sd, 0.0);
        assert!(matches!(aggregate(&[]), Err(MetricsError::EmptyTrialSet)));
        let s = aggregate(&[metrics_row(0, 1.0), metrics_row(1, 2.0), metrics_row(2, 6.0)]).unwrap();
        assert_eq!((s.navigation_time_mean, s.navigation_time_median), (3.0, 2.0));
    }

    #[test]
    fn export_import_round_trip() {
        let rows: Vec<_> = (0..6).map(|i| metrics_row(i, 0.1 * i as f64 + 1.0 / 3.0)).collect();
        for fmt in [Format::Csv, Format::Json] {
            let text = export(&rows, fmt).unwrap();
            let back: Vec<TrialMetrics> = import(&text, fmt).unwrap();
            assert_eq!(back, rows);
            let summary = vec![aggregate(&rows).unwrap()];
            let back: Vec<SessionSummary> = import(&export(&summary, fmt).unwrap(), fmt).unwrap();
            assert_eq!(back, summary);
        }
    }

    #[test]
    fn compare_ties_and_antisymmetry() {
        let mut a = aggregate(&[metrics_row(0, 1.0)]).unwrap();
        let b = a.clone();
        let rows = compare(std::slice::from_ref(&a), std::slice::from_ref(&b), 1e-9).unwrap();
        assert!(rows.iter().all(|r| r.direction == Direction::Tie));
        a.gaze_switches_mean = 0.0;
        a.navigation_time_mean = 3.0;
        let ab = compare(std::slice::from_ref(&a), std::slice::from_ref(&b), 1e-9).unwrap();
        let ba = compare(&[b], std::slice::from_ref(&a), 1e-9).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            let flipped = match x.direction {
                Direction::Less => Direction::Greater,
                Direction::Greater => Direction::Less,
                Direction::Tie => Direction::Tie,
            };
            assert_eq!(y.direction, flipped);
        }
        let mut other = a.clone();
        other.context = Context::DynamicMobile;
        assert!(matches!(
            compare(&[a], &[other], 0.0),
            Err(MetricsError::MismatchedScenarios(_))
        ));
    }

    proptest! {
        #[test]
        fn switches_ignore_subdivision(seq in prop::collection::vec(0usize..5, 0..30), splits in prop::collection::vec(1usize..4, 30)) {
            let target = |k: usize| match k {
                0 => GazeTarget::Panel(Category::Food),
                1 => GazeTarget::Panel(Category::Movies),
                2 => GazeTarget::Panel(Category::Sports),
                3 => GazeTarget::Screen,
                _ => GazeTarget::Intermediary("h".into()),
            };
            let base: Vec<_> = seq.iter().map(|&k| target(k)).collect();
            let split: Vec<_> = seq.iter().zip(&splits).flat_map(|(&k, &n)| std::iter::repeat_n(target(k), n)).collect();
            for reset in [false, true] {
                prop_assert_eq!(gaze_switches(&fx(&base), reset), gaze_switches(&fx(&split), reset));
            }
        }

        #[test]
        fn navigation_time_monotone(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let tr = trial();
            let (row, col) = grid_cell(Category::Movies, "Japan").unwrap();
            let doc = GazeTarget::Document { category: Category::Movies, row, col };
            let at = |t: f64| navigation_time(&[Fixation { target: doc.clone(), start: t, duration: 0.2 }], &tr, 0).unwrap();
            prop_assert!(at(a) >= 0.0);
            if a <= b {
                prop_assert!(at(a) <= at(b));
            }
        }
    }
}
