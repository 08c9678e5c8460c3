//! Linear models over word counts.
//!
//! Features are the counts of every unigram and bigram of the training
//! vocabulary. Bigrams are needed because a drop description names two
//! objects, and only word order tells the dropped object from the one
//! underneath. The classification heads are averaged perceptrons; the push
//! head regresses the direction's (cos, sin) by ridge least squares and
//! squashes its outputs into [-1, 1] with tanh.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{angle_from_xy, Action, ActionKind, RotationSense};
use crate::catalog::ObjectClass;
use crate::scene::Scene;
use crate::{Error, Result};

use super::{argmax, tokenize, Backend, Heads, Overrides, ParseOutcome};

/// Regression targets are scaled by this before `atanh` so they stay
/// finite.
const TARGET_SCALE: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    /// Whether the heads have a bias term.
    pub bias: bool,
    /// Ridge penalty of the push regression.
    pub ridge: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            seed: 0,
            bias: true,
            ridge: 1.0,
        }
    }
}

/// Sparse feature counts, sorted by vocabulary index.
#[derive(Clone, Debug, PartialEq)]
pub struct CountVector {
    pub entries: Vec<(usize, f64)>,
}

impl CountVector {
    pub fn scaled(&self, k: f64) -> CountVector {
        CountVector {
            entries: self.entries.iter().map(|&(i, v)| (i, v * k)).collect(),
        }
    }

    fn dot(&self, w: &[f64]) -> f64 {
        self.entries.iter().map(|&(i, v)| w[i] * v).sum()
    }
}

fn features(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = tokens.to_vec();
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHead {
    /// One row per class.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl ClassHead {
    pub fn scores(&self, x: &CountVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| x.dot(w) + b)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionHead {
    /// Rows for the x and y outputs.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl RegressionHead {
    /// Squashed (x, y) in [-1, 1]².
    pub fn predict(&self, x: &CountVector) -> (f64, f64) {
        let out: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| (x.dot(w) + b).tanh())
            .collect();
        (out[0], out[1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelRepr", into = "ModelRepr")]
pub struct LinearModel {
    pub vocabulary: Vec<String>,
    pub kind: ClassHead,
    pub target: ClassHead,
    pub sense: ClassHead,
    pub onto: ClassHead,
    pub push: RegressionHead,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct ModelRepr {
    vocabulary: Vec<String>,
    kind: ClassHead,
    target: ClassHead,
    sense: ClassHead,
    onto: ClassHead,
    push: RegressionHead,
}

impl From<ModelRepr> for LinearModel {
    fn from(r: ModelRepr) -> Self {
        let index = r
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        LinearModel {
            vocabulary: r.vocabulary,
            kind: r.kind,
            target: r.target,
            sense: r.sense,
            onto: r.onto,
            push: r.push,
            index,
        }
    }
}

impl From<LinearModel> for ModelRepr {
    fn from(m: LinearModel) -> Self {
        ModelRepr {
            vocabulary: m.vocabulary,
            kind: m.kind,
            target: m.target,
            sense: m.sense,
            onto: m.onto,
            push: m.push,
        }
    }
}

fn softmax(scores: &[f64], allowed: &[bool]) -> Vec<f64> {
    let max = scores
        .iter()
        .zip(allowed)
        .filter(|(_, a)| **a)
        .map(|(s, _)| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores
        .iter()
        .zip(allowed)
        .map(|(s, a)| if *a { (s - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

impl LinearModel {
    pub fn vectorize(&self, tokens: &[String]) -> CountVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for f in features(tokens) {
            if let Some(&i) = self.index.get(&f) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        CountVector {
            entries: counts.into_iter().collect(),
        }
    }

    /// Per-head outputs. Object heads are restricted to the scene's
    /// classes when a scene is given.
    pub fn heads(&self, tokens: &[String], scene: Option<&Scene>) -> Heads {
        let x = self.vectorize(tokens);
        let present: Vec<bool> = ObjectClass::ALL
            .iter()
            .map(|c| scene.is_none_or(|s| s.contains(*c)))
            .collect();
        let (dx, dy) = self.push.predict(&x);
        let direction = match angle_from_xy(dx, dy) {
            Ok(angle) => (angle, dx.hypot(dy).min(1.0)),
            Err(_) => (0.0, 0.0),
        };
        Heads {
            kind: Some(softmax(&self.kind.scores(&x), &[true; 4])),
            target: Some(softmax(&self.target.scores(&x), &present)),
            sense: Some(softmax(&self.sense.scores(&x), &[true; 2])),
            onto: Some(softmax(&self.onto.scores(&x), &present)),
            direction: Some(direction),
        }
    }

    pub fn parse(&self, text: &str, scene: Option<&Scene>) -> Result<ParseOutcome> {
        let toks = tokenize(text)?;
        let (action, confidences) = self.heads(&toks, scene).assemble(&Overrides::default())?;
        Ok(ParseOutcome {
            action,
            confidences,
            backend: Backend::Linear,
        })
    }
}

/// Averaged multi-class perceptron.
fn train_classes(
    data: &[(CountVector, usize)],
    classes: usize,
    dim: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> ClassHead {
    let mut w = vec![vec![0.0; dim]; classes];
    let mut b = vec![0.0; classes];
    // Running sums of c * update, for the averaging trick.
    let mut uw = vec![vec![0.0; dim]; classes];
    let mut ub = vec![0.0; classes];
    let mut c = 1.0;
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for &k in &order {
            let (x, y) = &data[k];
            let scores: Vec<f64> = w.iter().zip(&b).map(|(wc, bc)| x.dot(wc) + bc).collect();
            let pred = argmax(&scores);
            if pred != *y {
                for &(i, v) in &x.entries {
                    w[*y][i] += v;
                    w[pred][i] -= v;
                    uw[*y][i] += c * v;
                    uw[pred][i] -= c * v;
                }
                if cfg.bias {
                    b[*y] += 1.0;
                    b[pred] -= 1.0;
                    ub[*y] += c;
                    ub[pred] -= c;
                }
            }
            c += 1.0;
        }
    }
    let avg =
        |w: &[f64], u: &[f64]| -> Vec<f64> { w.iter().zip(u).map(|(w, u)| w - u / c).collect() };
    ClassHead {
        weights: w.iter().zip(&uw).map(|(w, u)| avg(w, u)).collect(),
        biases: avg(&b, &ub),
    }
}

/// Ridge regression solved in its dual form, which is small because push
/// examples are far fewer than features.
fn train_regression(data: &[(CountVector, f64)], dim: usize, cfg: &TrainConfig) -> RegressionHead {
    let n = data.len();
    let bias = if cfg.bias { 1.0 } else { 0.0 };
    let mut dense = DMatrix::<f64>::zeros(n, dim);
    for (r, (x, _)) in data.iter().enumerate() {
        for &(i, v) in &x.entries {
            dense[(r, i)] = v;
        }
    }
    let mut gram = &dense * dense.transpose();
    gram.add_scalar_mut(bias);
    for i in 0..n {
        gram[(i, i)] += cfg.ridge;
    }
    let chol = gram
        .cholesky()
        .expect("ridge Gram matrix is positive definite");
    let mut weights = Vec::with_capacity(2);
    let mut biases = Vec::with_capacity(2);
    for component in [f64::cos, f64::sin] {
        let y = DVector::from_iterator(
            n,
            data.iter()
                .map(|(_, a)| (TARGET_SCALE * component(*a)).atanh()),
        );
        let alpha = chol.solve(&y);
        let w = dense.transpose() * &alpha;
        weights.push(w.iter().copied().collect());
        biases.push(bias * alpha.sum());
    }
    RegressionHead { weights, biases }
}

/// Fits all heads on `(text, action)` pairs. Deterministic in the corpus
/// order and `cfg.seed`.
pub fn train_linear(corpus: &[(String, Action)], cfg: &TrainConfig) -> Result<LinearModel> {
    if corpus.is_empty() {
        return Err(Error::NoTrainingData);
    }
    for kind in ActionKind::ALL {
        if !corpus.iter().any(|(_, a)| a.kind() == kind) {
            return Err(Error::InsufficientCoverage(format!("action kind `{kind}`")));
        }
    }
    for class in ObjectClass::ALL {
        if !corpus.iter().any(|(_, a)| a.target() == class) {
            return Err(Error::InsufficientCoverage(format!("object `{class}`")));
        }
    }

    let tokenized: Vec<Vec<String>> = corpus
        .iter()
        .map(|(t, _)| tokenize(t))
        .collect::<Result<_>>()?;
    let vocabulary: Vec<String> = tokenized
        .iter()
        .flat_map(|t| features(t))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dim = vocabulary.len();
    let empty_head = |classes: usize| ClassHead {
        weights: vec![vec![0.0; dim]; classes],
        biases: vec![0.0; classes],
    };
    let mut model = LinearModel::from(ModelRepr {
        vocabulary,
        kind: empty_head(4),
        target: empty_head(8),
        sense: empty_head(2),
        onto: empty_head(8),
        push: RegressionHead {
            weights: vec![vec![0.0; dim]; 2],
            biases: vec![0.0; 2],
        },
    });
    let xs: Vec<CountVector> = tokenized.iter().map(|t| model.vectorize(t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let labelled = |f: &dyn Fn(&Action) -> Option<usize>| -> Vec<(CountVector, usize)> {
        xs.iter()
            .zip(corpus)
            .filter_map(|(x, (_, a))| f(a).map(|y| (x.clone(), y)))
            .collect()
    };
    model.kind = train_classes(
        &labelled(&|a| Some(a.kind().index())),
        4,
        dim,
        cfg,
        &mut rng,
    );
    model.target = train_classes(
        &labelled(&|a| Some(a.target().index())),
        8,
        dim,
        cfg,
        &mut rng,
    );
    let senses = labelled(&|a| match a {
        Action::Rotate { sense, .. } => Some(sense.index()),
        _ => None,
    });
    model.sense = train_classes(&senses, RotationSense::ALL.len(), dim, cfg, &mut rng);
    let ontos = labelled(&|a| match a {
        Action::Drop { onto, .. } => Some(onto.index()),
        _ => None,
    });
    model.onto = train_classes(&ontos, 8, dim, cfg, &mut rng);
    let pushes: Vec<(CountVector, f64)> = xs
        .iter()
        .zip(corpus)
        .filter_map(|(x, (_, a))| match a {
            Action::Push {
                direction_angle, ..
            } => Some((x.clone(), *direction_angle)),
            _ => None,
        })
        .collect();
    model.push = train_regression(&pushes, dim, cfg);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;
    use crate::codec;
    use crate::parser::tokens;
    use proptest::prelude::*;

    fn toy_corpus() -> Vec<(String, Action)> {
        use ObjectClass::*;
        let mut c = vec![
            (
                "the robot pushes the foam to the left".to_string(),
                Action::Push {
                    target: FoamBrick,
                    direction_angle: PI,
                },
            ),
            (
                "the robot pushes the banana to the right".to_string(),
                Action::Push {
                    target: Banana,
                    direction_angle: 0.0,
                },
            ),
            (
                "the robot pushes the coffee can up".to_string(),
                Action::Push {
                    target: CoffeeCan,
                    direction_angle: FRAC_PI_2,
                },
            ),
            (
                "the robot spins the cheese box clockwise".to_string(),
                Action::Rotate {
                    target: CheezitBox,
                    sense: RotationSense::Clockwise,
                },
            ),
            (
                "the robot rotates the chocolate box anticlockwise".to_string(),
                Action::Rotate {
                    target: PuddingBox,
                    sense: RotationSense::CounterClockwise,
                },
            ),
            (
                "the robot removes the mustard container".to_string(),
                Action::Remove {
                    target: MustardBottle,
                },
            ),
            (
                "the robot drops the baseball on the screw driver".to_string(),
                Action::Drop {
                    target: Softball,
                    onto: Screwdriver,
                },
            ),
            (
                "the robot drops the screw driver on the baseball".to_string(),
                Action::Drop {
                    target: Screwdriver,
                    onto: Softball,
                },
            ),
        ];
        c.rotate_left(3);
        c
    }

    #[test]
    fn toy_corpus_is_memorized() {
        let corpus = toy_corpus();
        let model = train_linear(&corpus, &TrainConfig::default()).unwrap();
        for (text, action) in &corpus {
            let got = model.parse(text, None).unwrap().action;
            match (got, action) {
                (
                    Action::Push {
                        target,
                        direction_angle,
                    },
                    Action::Push {
                        target: t,
                        direction_angle: d,
                    },
                ) => {
                    assert_eq!(target, *t);
                    let err =
                        (direction_angle - d).sin().abs() + (1.0 - (direction_angle - d).cos());
                    assert!(err < 0.2, "{text}: {direction_angle} vs {d}");
                }
                _ => assert_eq!(got, *action, "{text}"),
            }
        }
    }

    #[test]
    fn missing_kind_is_reported() {
        let corpus: Vec<_> = toy_corpus()
            .into_iter()
            .filter(|(_, a)| a.kind() != ActionKind::Rotate)
            .collect();
        let err = train_linear(&corpus, &TrainConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::InsufficientCoverage(ref m) if m.contains("rotate")),
            "{err}"
        );
        assert!(matches!(
            train_linear(&[], &TrainConfig::default()),
            Err(Error::NoTrainingData)
        ));
    }

    #[test]
    fn confidences_are_distributions() {
        let model = train_linear(&toy_corpus(), &TrainConfig::default()).unwrap();
        let heads = model.heads(&tokens("the robot drops the foam on the banana"), None);
        for dist in [heads.kind, heads.target, heads.sense, heads.onto] {
            let dist = dist.unwrap();
            assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(dist.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn zero_push_output_falls_back_to_zero_angle() {
        let mut model = train_linear(&toy_corpus(), &TrainConfig::default()).unwrap();
        for w in &mut model.push.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        model.push.biases = vec![0.0, 0.0];
        let heads = model.heads(&tokens("the robot pushes the foam to the left"), None);
        assert_eq!(heads.direction, Some((0.0, 0.0)));
        let out = model
            .parse("the robot pushes the foam to the left", None)
            .unwrap();
        assert_eq!(out.confidences.direction, Some(0.0));
    }

    #[test]
    fn model_round_trips_through_text() {
        let model = train_linear(&toy_corpus(), &TrainConfig::default()).unwrap();
        let back: LinearModel = codec::decode(&codec::encode(&model)).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.index.len(), back.vocabulary.len());
    }

    #[test]
    fn training_is_deterministic() {
        let a = train_linear(&toy_corpus(), &TrainConfig::default()).unwrap();
        let b = train_linear(&toy_corpus(), &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn argmax_ignores_count_scaling(pick in 0usize..8, k in 0.01f64..100.0) {
            let cfg = TrainConfig { bias: false, ..TrainConfig::default() };
            let corpus = toy_corpus();
            let model = train_linear(&corpus, &cfg).unwrap();
            let x = model.vectorize(&tokens(&corpus[pick].0));
            let xk = x.scaled(k);
            for head in [&model.kind, &model.target, &model.sense, &model.onto] {
                prop_assert_eq!(argmax(&head.scores(&x)), argmax(&head.scores(&xk)));
            }
        }
    }
}
