//! Synthetic dataset: random settled scenes, one random action per scene,
//! a generated sentence for the action and simulator-derived descriptions
//! of what happens to every other object.
//!
//! Everything is a function of a master seed. Batch `b` draws its example
//! seeds from ChaCha stream `b` of the master seed, so batches can be
//! generated independently and in any order.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind, RotationSense};
use crate::catalog::ObjectClass;
use crate::describer;
use crate::effects::ground_truth_affected;
use crate::physics::Simulator;
use crate::scene::{validate_scene, Scene, SceneObject, Table, OBJECTS_PER_SCENE};
use crate::{exec, Error, Result};

pub const EXAMPLES_PER_KIND: usize = 17;
pub const BATCH_SIZE: usize = EXAMPLES_PER_KIND * 4;
pub const TEST_BATCHES: usize = 3;
pub const MIN_SPLIT_BATCHES: usize = 15;
pub const MAX_REJECTIONS: usize = 1000;

/// Half-width of the square objects are placed in.
pub const PLACEMENT_HALF_WIDTH: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "ExampleRepr", try_from = "ExampleRepr")]
pub struct Example {
    pub scene: Scene,
    pub action: Action,
    pub action_text: String,
    pub gt_descriptions: BTreeMap<ObjectClass, String>,
    pub affected_labels: BTreeMap<ObjectClass, bool>,
    pub batch: usize,
    pub index: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DescriptionRecord {
    pub subject: ObjectClass,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affected: Option<bool>,
}

/// File form of an example: descriptions are a list of subject/text
/// records.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct ExampleRepr {
    scene: Scene,
    action_text: String,
    action: Action,
    descriptions: Vec<DescriptionRecord>,
    #[serde(default)]
    batch: usize,
    #[serde(default)]
    index: usize,
    #[serde(default)]
    seed: u64,
}

impl From<Example> for ExampleRepr {
    fn from(e: Example) -> Self {
        let descriptions = e
            .gt_descriptions
            .into_iter()
            .map(|(subject, text)| DescriptionRecord {
                subject,
                text,
                affected: e.affected_labels.get(&subject).copied(),
            })
            .collect();
        ExampleRepr {
            scene: e.scene,
            action_text: e.action_text,
            action: e.action,
            descriptions,
            batch: e.batch,
            index: e.index,
            seed: e.seed,
        }
    }
}

impl TryFrom<ExampleRepr> for Example {
    type Error = String;

    fn try_from(r: ExampleRepr) -> std::result::Result<Self, String> {
        let mut gt_descriptions = BTreeMap::new();
        let mut affected_labels = BTreeMap::new();
        for d in r.descriptions {
            if d.subject == r.action.target() {
                return Err(format!("description of the acted object {}", d.subject));
            }
            // Labels default to what the text says when not recorded.
            affected_labels.insert(d.subject, d.affected.unwrap_or(d.text != "nothing"));
            if gt_descriptions.insert(d.subject, d.text).is_some() {
                return Err(format!("duplicate description for {}", d.subject));
            }
        }
        Ok(Example {
            scene: r.scene,
            action: r.action,
            action_text: r.action_text,
            gt_descriptions,
            affected_labels,
            batch: r.batch,
            index: r.index,
            seed: r.seed,
        })
    }
}

impl Example {
    pub fn id(&self) -> String {
        format!("b{:03}-e{:02}", self.batch, self.index)
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Seed of every example in a batch, in index order.
pub fn example_seeds(master: u64, batch: usize) -> Vec<u64> {
    let mut r = rng(master, batch as u64);
    (0..BATCH_SIZE).map(|_| r.random()).collect()
}

/// Five distinct classes placed uniformly with random yaw, redrawn until
/// the layout is valid, then settled.
pub fn sample_scene(seed: u64) -> Result<Scene> {
    sample_scene_with(&Simulator::default(), seed)
}

pub fn sample_scene_with(sim: &Simulator, seed: u64) -> Result<Scene> {
    let mut r = rng(seed, 0);
    let id = format!("scene-{seed:016x}");
    for _ in 0..MAX_REJECTIONS {
        let mut classes: Vec<ObjectClass> = ObjectClass::ALL
            .choose_multiple(&mut r, OBJECTS_PER_SCENE)
            .copied()
            .collect();
        classes.sort();
        let objects = classes
            .into_iter()
            .map(|c| {
                let x = r.random_range(-PLACEMENT_HALF_WIDTH..=PLACEMENT_HALF_WIDTH);
                let y = r.random_range(-PLACEMENT_HALF_WIDTH..=PLACEMENT_HALF_WIDTH);
                let yaw = r.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                SceneObject::resting(c, x, y, yaw)
            })
            .collect();
        let scene = Scene {
            id: id.clone(),
            table: Table::default(),
            objects,
        };
        if !validate_scene(&scene).is_empty() {
            continue;
        }
        let settled = sim.settle(&scene)?;
        if validate_scene(&settled).is_empty() {
            return Ok(settled);
        }
    }
    Err(Error::CannotPlaceScene(MAX_REJECTIONS))
}

/// The eight compass directions, as exact multiples of pi/4 in (-pi, pi].
pub fn compass_angles() -> [f64; 8] {
    std::array::from_fn(|k| (k as f64 - 3.0) * FRAC_PI_4)
}

pub fn sample_action(scene: &Scene, kind: ActionKind, seed: u64) -> Result<Action> {
    let mut r = rng(seed, 1);
    let classes = scene.classes();
    let target = *classes
        .choose(&mut r)
        .ok_or_else(|| Error::InvalidValue("scene has no objects".into()))?;
    Ok(match kind {
        ActionKind::Push => Action::Push {
            target,
            direction_angle: *compass_angles().choose(&mut r).expect("non-empty"),
        },
        ActionKind::Rotate => Action::Rotate {
            target,
            sense: *RotationSense::ALL.choose(&mut r).expect("non-empty"),
        },
        ActionKind::Remove => Action::Remove { target },
        ActionKind::Drop => {
            let others: Vec<_> = classes.into_iter().filter(|c| *c != target).collect();
            let onto = *others
                .choose(&mut r)
                .ok_or_else(|| Error::InvalidValue("nothing to drop onto".into()))?;
            Action::Drop { target, onto }
        }
    })
}

const PUSH_VERBS: &[&str] = &["pushes", "shoves", "rolls", "slides", "nudges"];
const PUSH_IMPERATIVES: &[&str] = &["push", "shove", "roll", "slide", "nudge"];
const ROTATE_VERBS: &[&str] = &["spins", "rotates", "turns", "twists"];
const REMOVE_VERBS: &[&str] = &["removes", "takes", "lifts"];
const DROP_VERBS: &[&str] = &["drops", "puts", "places"];

fn direction_words(angle: f64) -> &'static [&'static str] {
    let k = (angle / FRAC_PI_4).round() as i64;
    match k {
        0 => &["right", "east"],
        1 => &["north-east", "top right", "upper right", "northeast"],
        2 => &["north", "top"],
        3 => &["north-west", "top left", "upper left", "northwest"],
        4 | -4 => &["left", "west"],
        -3 => &["south-west", "bottom left", "lower left", "southwest"],
        -2 => &["south", "bottom"],
        -1 => &["south-east", "bottom right", "lower right", "southeast"],
        _ => unreachable!("angle within (-pi, pi]"),
    }
}

fn sense_words(sense: RotationSense) -> &'static [&'static str] {
    match sense {
        RotationSense::Clockwise => &["clockwise"],
        RotationSense::CounterClockwise => &[
            "anti-clockwise",
            "anticlockwise",
            "counter-clockwise",
            "counterclockwise",
        ],
    }
}

fn pick<'a>(r: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words.choose(r).expect("non-empty word list")
}

fn name(r: &mut ChaCha8Rng, class: ObjectClass) -> &'static str {
    pick(r, class.synonyms())
}

/// One sentence describing `action`, drawn from a small grammar whose
/// words all come from the parser lexicon.
pub fn gen_action_text(action: &Action, seed: u64) -> String {
    let mut r = rng(seed, 2);
    let r = &mut r;
    match *action {
        Action::Push {
            target,
            direction_angle,
        } => {
            let (verb, obj, dir) = (
                pick(r, PUSH_VERBS),
                name(r, target),
                pick(r, direction_words(direction_angle)),
            );
            match r.random_range(0..4) {
                0 => format!("the robot {verb} the {obj} to the {dir}"),
                1 => format!("the robot {verb} the {obj} towards the {dir} side of the table"),
                2 => format!("the robot {verb} the {obj} in the {dir} direction"),
                _ => format!("{} the {obj} to the {dir}", pick(r, PUSH_IMPERATIVES)),
            }
        }
        Action::Rotate { target, sense } => {
            let (verb, obj, s) = (
                pick(r, ROTATE_VERBS),
                name(r, target),
                pick(r, sense_words(sense)),
            );
            match r.random_range(0..3) {
                0 => format!("the robot {verb} the {obj} {s}"),
                1 => format!("the robot {verb} the {obj} in {s} direction"),
                _ => format!("the robot {verb} the {obj} around {s}"),
            }
        }
        Action::Remove { target } => {
            let (verb, obj) = (pick(r, REMOVE_VERBS), name(r, target));
            match r.random_range(0..3) {
                0 => format!("the robot {verb} the {obj}"),
                1 => format!("the robot {verb} the {obj} off the table"),
                _ => format!("the robot {verb} the {obj} away from the table"),
            }
        }
        Action::Drop { target, onto } => {
            let (verb, t, o) = (pick(r, DROP_VERBS), name(r, target), name(r, onto));
            match r.random_range(0..3) {
                0 => format!("the robot {verb} the {t} on the {o}"),
                1 => format!("the robot {verb} the {t} on top of the {o}"),
                _ => format!("the robot {verb} the {t} onto the {o}"),
            }
        }
    }
}

/// Simulates `action` in `scene` and describes the outcome with the
/// simulator's own movement rule.
pub fn ground_truth(
    sim: &Simulator,
    scene: &Scene,
    action: &Action,
) -> Result<(BTreeMap<ObjectClass, String>, BTreeMap<ObjectClass, bool>)> {
    let result = sim.simulate(scene, action)?;
    let descriptions = describer::describe_with(&result, action, &scene.table, |tr| {
        Ok(ground_truth_affected(tr))
    })?;
    let labels = result
        .trajectories
        .values()
        .filter(|tr| tr.class != action.target())
        .map(|tr| (tr.class, ground_truth_affected(tr)))
        .collect();
    let texts = descriptions.into_iter().map(|(c, d)| (c, d.text)).collect();
    Ok((texts, labels))
}

pub fn gen_example(sim: &Simulator, batch: usize, index: usize, seed: u64) -> Result<Example> {
    let kind = ActionKind::ALL[index % 4];
    let scene = sample_scene_with(sim, seed)?;
    let action = sample_action(&scene, kind, seed)?;
    let action_text = gen_action_text(&action, seed);
    let (gt_descriptions, affected_labels) = ground_truth(sim, &scene, &action)?;
    Ok(Example {
        scene,
        action,
        action_text,
        gt_descriptions,
        affected_labels,
        batch,
        index,
        seed,
    })
}

/// The 68 examples of batch `batch`, 17 per action kind.
pub fn gen_batch(batch: usize, master_seed: u64) -> Result<Vec<Example>> {
    let sim = Simulator::default();
    let seeds: Vec<(usize, u64)> = example_seeds(master_seed, batch)
        .into_iter()
        .enumerate()
        .collect();
    exec::try_map(&seeds, |&(index, seed)| {
        gen_example(&sim, batch, index, seed)
    })
}

pub fn gen_dataset(batches: usize, master_seed: u64) -> Result<Vec<Example>> {
    let ids: Vec<usize> = (0..batches).collect();
    Ok(exec::try_map(&ids, |&b| gen_batch(b, master_seed))?
        .into_iter()
        .flatten()
        .collect())
}

/// Train and test parts: the last three batches are the test set.
pub fn split(dataset: &[Example]) -> Result<(Vec<Example>, Vec<Example>)> {
    let mut batches: Vec<usize> = dataset.iter().map(|e| e.batch).collect();
    batches.sort_unstable();
    batches.dedup();
    if batches.len() < MIN_SPLIT_BATCHES {
        return Err(Error::TooFewBatches(batches.len()));
    }
    let first_test = batches[batches.len() - TEST_BATCHES];
    Ok(dataset.iter().cloned().partition(|e| e.batch < first_test))
}

/// Fraction of ground-truth descriptions other than "nothing".
pub fn interaction_rate(dataset: &[Example]) -> f64 {
    let (hit, total) = dataset
        .iter()
        .flat_map(|e| e.gt_descriptions.values())
        .fold((0usize, 0usize), |(h, t), d| {
            (h + usize::from(d != "nothing"), t + 1)
        });
    hit as f64 / total.max(1) as f64
}

/// Shuffled copy, used to check order independence.
pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut rng(seed, 3));
    v
}
