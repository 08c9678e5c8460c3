//! End-to-end what-if answering, model fitting, corpus evaluation and the
//! ground-truth substitution sweep.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind};
use crate::catalog::ObjectClass;
use crate::datagen::Example;
use crate::describer::{self, Description, Event, EventKind};
use crate::effects::{self, EffectsModel, GridResult, MotionSummary};
use crate::metrics::{evaluate_corpus, EvalReport};
use crate::parser::{self, argmax, Backend, LinearModel, Overrides, ParseOutcome, TrainConfig};
use crate::physics::{ContactEvent, SimulationResult, Simulator};
use crate::scene::Scene;
use crate::{exec, Error, Result};

/// Everything fitted from training data.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    /// Needed only by the linear parser backend.
    pub parser: Option<LinearModel>,
    pub effects: EffectsModel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Simulate,
    Describe,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Simulate => "simulate",
            Stage::Describe => "describe",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A pipeline failure and the one stage it came from.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

fn at(stage: Stage) -> impl FnOnce(Error) -> StageError {
    move |error| StageError { stage, error }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIfAnswer {
    pub parse: ParseOutcome,
    pub descriptions: BTreeMap<ObjectClass, Description>,
    pub simulation: SimulationResult,
}

impl WhatIfAnswer {
    pub fn action(&self) -> &Action {
        &self.parse.action
    }

    pub fn events(&self) -> Vec<&Event> {
        self.descriptions.values().map(|d| &d.event).collect()
    }

    pub fn contacts(&self) -> &[ContactEvent] {
        &self.simulation.contacts
    }
}

/// Parses `text`, simulates the action in `scene` and describes what
/// happens to every other object. Stops at the first failing stage.
pub fn answer_whatif(
    sim: &Simulator,
    scene: &Scene,
    text: &str,
    models: &Models,
    backend: Backend,
) -> std::result::Result<WhatIfAnswer, StageError> {
    let parse = parser::parse(text, backend, models.parser.as_ref(), Some(scene))
        .map_err(at(Stage::Parse))?;
    let simulation = sim
        .simulate(scene, &parse.action)
        .map_err(at(Stage::Simulate))?;
    let descriptions = describer::describe_with(&simulation, &parse.action, &scene.table, |tr| {
        models.effects.affected(tr)
    })
    .map_err(at(Stage::Describe))?;
    Ok(WhatIfAnswer {
        parse,
        descriptions,
        simulation,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub true_action_type: bool,
    pub true_acted_object: bool,
    pub true_action_params: bool,
    pub true_trajectories: bool,
    pub true_affected: bool,
}

impl AblationConfig {
    pub const NONE: AblationConfig = AblationConfig {
        true_action_type: false,
        true_acted_object: false,
        true_action_params: false,
        true_trajectories: false,
        true_affected: false,
    };

    pub const ALL: AblationConfig = AblationConfig {
        true_action_type: true,
        true_acted_object: true,
        true_action_params: true,
        true_trajectories: true,
        true_affected: true,
    };

    /// The first `n` flags set, in sweep order.
    pub fn cumulative(n: usize) -> AblationConfig {
        AblationConfig {
            true_action_type: n >= 1,
            true_acted_object: n >= 2,
            true_action_params: n >= 3,
            true_trajectories: n >= 4,
            true_affected: n >= 5,
        }
    }
}

/// Row names of the sweep, in order.
pub const SWEEP_ROWS: [&str; 6] = [
    "All Predictions",
    "With True Action Type",
    "...and True Acted Object",
    "...and True Action Parameters",
    "...and True Trajectories",
    "...and True Object Acted On",
];

pub fn sweep_configs() -> Vec<(&'static str, AblationConfig)> {
    SWEEP_ROWS
        .iter()
        .enumerate()
        .map(|(i, &name)| (name, AblationConfig::cumulative(i)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub config: AblationConfig,
    pub report: EvalReport,
    /// Examples whose predicted action could not be parsed or simulated.
    /// Every description of such an example is predicted as "nothing".
    pub failed: usize,
}

/// What a simulated action does to each non-acted object, reduced to what
/// the describer needs. Lets one simulation serve every affected-decision.
struct Outcome {
    subjects: BTreeMap<ObjectClass, SubjectOutcome>,
}

struct SubjectOutcome {
    summary: Option<MotionSummary>,
    event_if_affected: Event,
}

fn outcome(sim: &Simulator, scene: &Scene, action: &Action, models: &Models) -> Result<Outcome> {
    let result = sim.simulate(scene, action)?;
    let mut subjects = BTreeMap::new();
    for (&subject, tr) in &result.trajectories {
        if subject == action.target() {
            continue;
        }
        let summary = if tr.removed {
            None
        } else {
            Some(effects::summarize(tr, &models.effects.stats)?)
        };
        let event_if_affected =
            describer::event_given(subject, &result, action, &scene.table, true)?;
        subjects.insert(
            subject,
            SubjectOutcome {
                summary,
                event_if_affected,
            },
        );
    }
    Ok(Outcome { subjects })
}

/// The action the pipeline acts on under `config`.
fn configured_action(
    ex: &Example,
    config: &AblationConfig,
    models: &Models,
    backend: Backend,
) -> Result<Action> {
    let truth = &ex.action;
    let overrides = Overrides {
        kind: config.true_action_type.then(|| truth.kind()),
        target: config.true_acted_object.then(|| truth.target()),
        params: if config.true_action_params {
            truth.params()
        } else {
            None
        },
    };
    if config.true_action_type && config.true_acted_object && config.true_action_params {
        return Ok(truth.clone());
    }
    let heads = parser::heads(
        &ex.action_text,
        backend,
        models.parser.as_ref(),
        Some(&ex.scene),
    )?;
    Ok(heads.assemble(&overrides)?.0)
}

/// Predicted description for each ground-truth subject of `ex`.
fn predictions(
    ex: &Example,
    config: &AblationConfig,
    predicted: Option<&Outcome>,
    truth: &Outcome,
    models: &Models,
) -> Vec<String> {
    let source = if config.true_trajectories {
        Some(truth)
    } else {
        predicted
    };
    ex.gt_descriptions
        .keys()
        .map(|subject| {
            let Some(out) = source else {
                return "nothing".to_string();
            };
            let Some(so) = out.subjects.get(subject) else {
                // The subject is the predicted acted object.
                return "nothing".to_string();
            };
            let affected = match (config.true_affected, ex.affected_labels.get(subject)) {
                (true, Some(&label)) => label,
                _ => so
                    .summary
                    .is_some_and(|s| effects::is_affected(&s, &models.effects.thresholds)),
            };
            let event = if affected {
                so.event_if_affected.clone()
            } else {
                Event::nothing(*subject)
            };
            describer::realize(&event)
        })
        .collect()
}

/// Evaluates every config on the same examples. Simulations are shared
/// between configs that end up with the same action.
pub fn run_sweep(
    sim: &Simulator,
    examples: &[Example],
    configs: &[(&str, AblationConfig)],
    models: &Models,
    backend: Backend,
) -> Result<Vec<AblationRow>> {
    if examples.is_empty() {
        return Err(Error::NoExamples);
    }
    // Per example: for each config, predictions and whether the pipeline
    // failed.
    let per_example = exec::try_map(examples, |ex| -> Result<Vec<(Vec<String>, bool)>> {
        let truth = outcome(sim, &ex.scene, &ex.action, models)?;
        let mut cache: Vec<(Action, Option<Outcome>)> = Vec::new();
        let mut rows = Vec::with_capacity(configs.len());
        for (_, config) in configs {
            let predicted = match configured_action(ex, config, models, backend) {
                Ok(action) if action == ex.action => Some(&truth),
                Ok(action) => {
                    let i = match cache.iter().position(|(a, _)| *a == action) {
                        Some(i) => i,
                        None => {
                            let out = match outcome(sim, &ex.scene, &action, models) {
                                Ok(o) => Some(o),
                                Err(e) if e.is_data_error() => None,
                                Err(e) => return Err(e),
                            };
                            cache.push((action, out));
                            cache.len() - 1
                        }
                    };
                    cache[i].1.as_ref()
                }
                Err(e) if e.is_data_error() => None,
                Err(e) => return Err(e),
            };
            let failed = predicted.is_none() && !config.true_trajectories;
            rows.push((predictions(ex, config, predicted, &truth, models), failed));
        }
        Ok(rows)
    })?;

    configs
        .iter()
        .enumerate()
        .map(|(c, (name, config))| {
            let mut pairs = Vec::new();
            let mut failed = 0;
            for (ex, rows) in examples.iter().zip(&per_example) {
                let (preds, f) = &rows[c];
                failed += usize::from(*f);
                pairs.extend(
                    preds
                        .iter()
                        .cloned()
                        .zip(ex.gt_descriptions.values().cloned()),
                );
            }
            Ok(AblationRow {
                name: name.to_string(),
                config: *config,
                report: evaluate_corpus(&pairs)?,
                failed,
            })
        })
        .collect()
}

pub fn run_eval(
    sim: &Simulator,
    examples: &[Example],
    config: AblationConfig,
    models: &Models,
    backend: Backend,
) -> Result<EvalReport> {
    let rows = run_sweep(sim, examples, &[("", config)], models, backend)?;
    Ok(rows.into_iter().next().expect("one config").report)
}

/// The six-row table, one line per row.
pub fn format_sweep(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
    let mut out = format!(
        "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}\n",
        "Model", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE", "COM", "failed"
    );
    for r in rows {
        let b = r.report.bleu_n;
        out.push_str(&format!(
            "{:<width$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6}\n",
            r.name, b[0], b[1], b[2], b[3], r.report.rouge_l, r.report.com, r.failed
        ));
    }
    out
}

pub const COMPASS_NAMES: [&str; 8] = [
    "east",
    "north-east",
    "north",
    "north-west",
    "west",
    "south-west",
    "south",
    "south-east",
];

/// Index into [`COMPASS_NAMES`]. Bucket boundaries are the odd multiples
/// of pi/8.
pub fn direction_bucket(angle: f64) -> usize {
    let k = (angle.rem_euclid(TAU) / FRAC_PI_4).round() as usize;
    k % 8
}

/// Per-head accuracy of one backend. Parameter heads are scored on the
/// examples of their own action kind only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadAccuracy {
    pub backend: Backend,
    pub action_type: f64,
    pub acted_object: f64,
    pub push_direction: f64,
    pub rotation_sense: f64,
    pub drop_onto: f64,
    pub n_examples: usize,
}

fn rate(hits: usize, total: usize) -> f64 {
    if total == 0 {
        f64::NAN
    } else {
        hits as f64 / total as f64
    }
}

pub fn head_accuracy(
    examples: &[Example],
    backend: Backend,
    model: Option<&LinearModel>,
) -> Result<HeadAccuracy> {
    let scored = exec::try_map(examples, |ex| -> Result<[Option<bool>; 5]> {
        let h = parser::heads(&ex.action_text, backend, model, Some(&ex.scene))?;
        let a = &ex.action;
        let pick = |d: &Option<Vec<f64>>| d.as_ref().map(|d| argmax(d));
        let kind = Some(pick(&h.kind) == Some(a.kind().index()));
        let target = Some(pick(&h.target) == Some(a.target().index()));
        let mut out = [kind, target, None, None, None];
        match a {
            Action::Push {
                direction_angle, ..
            } => {
                out[2] = Some(
                    h.direction.map(|(t, _)| direction_bucket(t))
                        == Some(direction_bucket(*direction_angle)),
                );
            }
            Action::Rotate { sense, .. } => out[3] = Some(pick(&h.sense) == Some(sense.index())),
            Action::Drop { target, onto } => {
                // The acted object is never a drop surface.
                let guess = h.onto.map(|mut d| {
                    d[target.index()] = f64::NEG_INFINITY;
                    argmax(&d)
                });
                out[4] = Some(guess == Some(onto.index()));
            }
            Action::Remove { .. } => {}
        }
        Ok(out)
    })?;
    let col = |i: usize| {
        let vals: Vec<bool> = scored.iter().filter_map(|s| s[i]).collect();
        rate(vals.iter().filter(|v| **v).count(), vals.len())
    };
    Ok(HeadAccuracy {
        backend,
        action_type: col(0),
        acted_object: col(1),
        push_direction: col(2),
        rotation_sense: col(3),
        drop_onto: col(4),
        n_examples: examples.len(),
    })
}

/// Head accuracies of the rules backend and, when a model is given, the
/// linear one.
pub fn component_eval(
    examples: &[Example],
    model: Option<&LinearModel>,
) -> Result<Vec<HeadAccuracy>> {
    let mut out = vec![head_accuracy(examples, Backend::Rules, None)?];
    if let Some(m) = model {
        out.push(head_accuracy(examples, Backend::Linear, Some(m))?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_train: usize,
    pub n_trajectories: usize,
    pub grid: GridResult,
}

/// Trains the parser heads, the pose statistics and the thresholds on
/// `train`. Labels for the thresholds are the examples' affected labels.
pub fn fit(sim: &Simulator, train: &[Example], cfg: &TrainConfig) -> Result<(Models, FitReport)> {
    if train.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let corpus: Vec<(String, Action)> = train
        .iter()
        .map(|e| (e.action_text.clone(), e.action.clone()))
        .collect();
    let parser = parser::train_linear(&corpus, cfg)?;

    let runs = exec::try_map(train, |e| sim.simulate(&e.scene, &e.action))?;
    let stats = effects::fit_pose_stats(
        runs.iter()
            .flat_map(|r| r.trajectories.values())
            .filter(|tr| !tr.removed),
    )?;
    let mut labelled = Vec::new();
    for (e, run) in train.iter().zip(&runs) {
        for (subject, &label) in &e.affected_labels {
            let tr = run
                .trajectories
                .get(subject)
                .ok_or(Error::UnknownSubject(*subject))?;
            labelled.push((effects::summarize(tr, &stats)?, label));
        }
    }
    let grid = effects::grid_search(&labelled)?;
    let report = FitReport {
        n_train: train.len(),
        n_trajectories: labelled.len(),
        grid,
    };
    let models = Models {
        parser: Some(parser),
        effects: EffectsModel {
            stats,
            thresholds: grid.thresholds,
        },
    };
    Ok((models, report))
}

/// True when every description of `answer` is "nothing".
pub fn nothing_happens(answer: &WhatIfAnswer) -> bool {
    answer
        .descriptions
        .values()
        .all(|d| d.event.kind == EventKind::Nothing)
}

/// The acted object of an answer together with its kind.
pub fn acted(answer: &WhatIfAnswer) -> (ActionKind, ObjectClass) {
    (answer.action().kind(), answer.action().target())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen;
    use crate::describer::tests::{isolated, row_one_scene};
    use crate::effects::{PoseStats, Thresholds};
    use std::f64::consts::PI;

    /// Anything that moves at all counts as affected.
    fn simple_models() -> Models {
        Models {
            parser: None,
            effects: EffectsModel {
                stats: PoseStats::identity(),
                thresholds: Thresholds {
                    tau_t: 1e-4,
                    tau_r: 1e-4,
                },
            },
        }
    }

    #[test]
    fn row_one_from_raw_text() {
        let sim = Simulator::default();
        let scene = sim.settle(&row_one_scene()).unwrap();
        let ans = answer_whatif(
            &sim,
            &scene,
            "the robot drops the screw driver on the foam",
            &simple_models(),
            Backend::Rules,
        )
        .unwrap();
        let foam = &ans.descriptions[&ObjectClass::FoamBrick];
        assert_eq!(
            foam.event.agent,
            Some(ObjectClass::Screwdriver),
            "{}",
            foam.text
        );
        assert!(foam.text.contains("screw driver"), "{}", foam.text);
        assert_eq!(acted(&ans), (ActionKind::Drop, ObjectClass::Screwdriver));
    }

    #[test]
    fn remove_in_isolation_changes_nothing() {
        let sim = Simulator::default();
        let scene = sim.settle(&isolated()).unwrap();
        let target = scene.objects[0].class;
        let text = format!("the robot removes the {}", target.display_name());
        let ans = answer_whatif(&sim, &scene, &text, &simple_models(), Backend::Rules).unwrap();
        assert!(nothing_happens(&ans));
        assert_eq!(ans.descriptions.len(), 4);
    }

    #[test]
    fn gibberish_fails_at_parse() {
        let sim = Simulator::default();
        let scene = isolated();
        let err = answer_whatif(
            &sim,
            &scene,
            "colorless green ideas",
            &simple_models(),
            Backend::Rules,
        )
        .unwrap_err();
        assert_eq!(err.stage, Stage::Parse);
        let err = answer_whatif(
            &sim,
            &scene,
            "the robot pushes the banana left",
            &simple_models(),
            Backend::Linear,
        )
        .unwrap_err();
        assert_eq!(err.stage, Stage::Parse);
        assert!(matches!(err.error, Error::MissingModel(_)));
    }

    #[test]
    fn absent_object_fails_at_simulate() {
        let sim = Simulator::default();
        let scene = isolated();
        let missing = ObjectClass::ALL
            .into_iter()
            .find(|c| !scene.contains(*c))
            .unwrap();
        let text = format!("the robot removes the {}", missing.display_name());
        let err = answer_whatif(&sim, &scene, &text, &simple_models(), Backend::Rules).unwrap_err();
        assert_eq!(err.stage, Stage::Simulate);
    }

    #[test]
    fn sweep_rows_are_cumulative() {
        let rows = sweep_configs();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0].1, AblationConfig::NONE);
        assert_eq!(rows[5].1, AblationConfig::ALL);
        for w in rows.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            let flags = |c: AblationConfig| {
                [
                    c.true_action_type,
                    c.true_acted_object,
                    c.true_action_params,
                    c.true_trajectories,
                    c.true_affected,
                ]
            };
            let (fa, fb) = (flags(a), flags(b));
            assert_eq!(
                fb.iter().filter(|f| **f).count(),
                fa.iter().filter(|f| **f).count() + 1
            );
            assert!(fa.iter().zip(&fb).all(|(x, y)| !x || *y));
        }
    }

    #[test]
    fn compass_buckets() {
        assert_eq!(
            COMPASS_NAMES[direction_bucket(3.0 * PI / 4.0)],
            "north-west"
        );
        assert_eq!(COMPASS_NAMES[direction_bucket(PI)], "west");
        assert_eq!(COMPASS_NAMES[direction_bucket(-PI)], "west");
        assert_eq!(COMPASS_NAMES[direction_bucket(-PI / 2.0)], "south");
        assert_eq!(direction_bucket(PI / 8.0 - 1e-9), 0);
        assert_eq!(direction_bucket(PI / 8.0 + 1e-9), 1);
        assert_eq!(direction_bucket(TAU - 1e-9), 0);
        for (k, &a) in datagen::compass_angles().iter().enumerate() {
            // compass_angles runs from south-west (k = 0) counter-clockwise.
            assert_eq!(direction_bucket(a), (k + 5) % 8);
        }
    }

    #[test]
    fn upper_bound_is_exact_and_dominates() {
        let sim = Simulator::default();
        let seeds = datagen::example_seeds(11, 0);
        let examples: Vec<Example> = seeds
            .iter()
            .take(8)
            .enumerate()
            .map(|(i, &s)| datagen::gen_example(&sim, 0, i, s).unwrap())
            .collect();
        // A deliberately poor effects model: nothing is ever affected.
        let mut models = simple_models();
        models.effects.thresholds = Thresholds {
            tau_t: f64::INFINITY,
            tau_r: f64::INFINITY,
        };
        let rows = run_sweep(&sim, &examples, &sweep_configs(), &models, Backend::Rules).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(),
            SWEEP_ROWS
        );
        let top = &rows[5].report;
        assert_eq!((top.com, top.bleu, top.rouge_l), (1.0, 1.0, 1.0));
        assert!(rows[0].report.com <= top.com);
        assert_eq!(rows.iter().map(|r| r.failed).sum::<usize>(), 0);
        let single = run_eval(
            &sim,
            &examples,
            AblationConfig::ALL,
            &models,
            Backend::Rules,
        )
        .unwrap();
        assert_eq!(&single, top);
    }
}
