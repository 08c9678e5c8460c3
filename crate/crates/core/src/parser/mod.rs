//! Turns an action description into an [`Action`].
//!
//! Both backends produce per-head outputs ([`Heads`]): a distribution for
//! the action kind, the acted object, the rotation sense and the object
//! dropped onto, plus a push angle. [`Heads::assemble`] combines them into
//! an action, optionally with some heads overridden by known values, which
//! is how the ablation harness substitutes ground truth stage by stage.

pub mod lexicon;
pub mod linear;
pub mod rules;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind, ActionParams, RotationSense};
use crate::catalog::ObjectClass;
use crate::scene::Scene;
use crate::{Error, Result};

pub use linear::{train_linear, LinearModel, TrainConfig};
pub use rules::parse_rules;

/// Lowercased words with surrounding punctuation removed; hyphenated words
/// stay whole. Fails on text without any word.
pub fn tokenize(text: &str) -> Result<Vec<String>> {
    let toks = tokens(text);
    if toks.is_empty() {
        return Err(Error::EmptyDescription);
    }
    Ok(toks)
}

/// [`tokenize`] without the emptiness check.
pub fn tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Rules,
    Linear,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rules" => Ok(Backend::Rules),
            "linear" => Ok(Backend::Linear),
            other => Err(Error::InvalidValue(format!("unknown backend `{other}`"))),
        }
    }
}

/// Raw per-head outputs. Distributions are indexed like
/// [`ActionKind::ALL`], [`ObjectClass::ALL`] and [`RotationSense::ALL`]; a
/// head that found nothing is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heads {
    pub kind: Option<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub sense: Option<Vec<f64>>,
    pub onto: Option<Vec<f64>>,
    /// Push angle and its confidence.
    pub direction: Option<(f64, f64)>,
}

/// Known values that replace head outputs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub kind: Option<ActionKind>,
    pub target: Option<ObjectClass>,
    /// Used only when it matches the final action kind.
    pub params: Option<ActionParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confidences {
    pub kind: Vec<f64>,
    pub target: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onto: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub action: Action,
    pub confidences: Confidences,
    pub backend: Backend,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn one_hot(len: usize, index: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[index] = 1.0;
    v
}

impl Heads {
    /// Builds the action, taking overridden heads from `overrides`.
    pub fn assemble(&self, overrides: &Overrides) -> Result<(Action, Confidences)> {
        let (kind, kind_conf) = match overrides.kind {
            Some(k) => (k, one_hot(ActionKind::ALL.len(), k.index())),
            None => {
                let dist = self
                    .kind
                    .clone()
                    .ok_or_else(|| Error::Unparseable("no action verb".into()))?;
                (ActionKind::ALL[argmax(&dist)], dist)
            }
        };
        let (target, target_conf) = match overrides.target {
            Some(t) => (t, one_hot(ObjectClass::COUNT, t.index())),
            None => {
                let dist = self.target.clone().ok_or(Error::UnknownTarget)?;
                (ObjectClass::ALL[argmax(&dist)], dist)
            }
        };
        let mut confidences = Confidences {
            kind: kind_conf,
            target: target_conf,
            sense: None,
            onto: None,
            direction: None,
        };
        let action = match (kind, overrides.params) {
            (ActionKind::Push, Some(ActionParams::Push { direction_angle })) => {
                confidences.direction = Some(1.0);
                Action::Push {
                    target,
                    direction_angle,
                }
            }
            (ActionKind::Push, _) => {
                let (direction_angle, conf) = self
                    .direction
                    .ok_or_else(|| Error::Unparseable("no push direction".into()))?;
                confidences.direction = Some(conf);
                Action::Push {
                    target,
                    direction_angle,
                }
            }
            (ActionKind::Rotate, Some(ActionParams::Rotate { sense })) => {
                confidences.sense = Some(one_hot(2, sense.index()));
                Action::Rotate { target, sense }
            }
            (ActionKind::Rotate, _) => {
                let dist = self
                    .sense
                    .clone()
                    .ok_or_else(|| Error::Unparseable("no rotation sense".into()))?;
                let sense = RotationSense::ALL[argmax(&dist)];
                confidences.sense = Some(dist);
                Action::Rotate { target, sense }
            }
            (ActionKind::Remove, _) => Action::Remove { target },
            (ActionKind::Drop, Some(ActionParams::Drop { onto })) => {
                confidences.onto = Some(one_hot(ObjectClass::COUNT, onto.index()));
                Action::Drop { target, onto }
            }
            (ActionKind::Drop, _) => {
                let mut dist = self
                    .onto
                    .clone()
                    .ok_or_else(|| Error::Unparseable("no object to drop onto".into()))?;
                dist[target.index()] = 0.0;
                let total: f64 = dist.iter().sum();
                if total <= 0.0 {
                    return Err(Error::Unparseable(format!(
                        "{target} cannot be dropped onto itself"
                    )));
                }
                dist.iter_mut().for_each(|p| *p /= total);
                let onto = ObjectClass::ALL[argmax(&dist)];
                confidences.onto = Some(dist);
                Action::Drop { target, onto }
            }
        };
        action.validate()?;
        Ok((action, confidences))
    }
}

/// Parses with whichever backend is requested. The linear backend needs a
/// trained model.
pub fn parse(
    text: &str,
    backend: Backend,
    model: Option<&LinearModel>,
    scene: Option<&Scene>,
) -> Result<ParseOutcome> {
    match backend {
        Backend::Rules => parse_rules(text, scene),
        Backend::Linear => model
            .ok_or(Error::MissingModel("parser"))?
            .parse(text, scene),
    }
}

/// Per-head outputs of either backend.
pub fn heads(
    text: &str,
    backend: Backend,
    model: Option<&LinearModel>,
    scene: Option<&Scene>,
) -> Result<Heads> {
    let toks = tokenize(text)?;
    match backend {
        Backend::Rules => Ok(rules::rule_heads(&toks, scene)),
        Backend::Linear => Ok(model
            .ok_or(Error::MissingModel("parser"))?
            .heads(&toks, scene)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_lowercases_and_strips() {
        assert_eq!(
            tokenize("The robot pushes the mustard container to the left").unwrap(),
            [
                "the",
                "robot",
                "pushes",
                "the",
                "mustard",
                "container",
                "to",
                "the",
                "left"
            ]
        );
        assert_eq!(
            tokenize("spins it in \"anti-clockwise\" direction.").unwrap(),
            ["spins", "it", "in", "anti-clockwise", "direction"]
        );
        assert!(matches!(tokenize(""), Err(Error::EmptyDescription)));
        assert!(matches!(tokenize("  \t "), Err(Error::EmptyDescription)));
        assert!(matches!(tokenize(" ... "), Err(Error::EmptyDescription)));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
    }

    #[test]
    fn overrides_replace_heads() {
        let heads = Heads {
            kind: Some(one_hot(4, ActionKind::Push.index())),
            target: Some(one_hot(8, ObjectClass::Banana.index())),
            sense: None,
            onto: Some(one_hot(8, ObjectClass::Banana.index())),
            direction: Some((0.5, 1.0)),
        };
        let (a, _) = heads.assemble(&Overrides::default()).unwrap();
        assert_eq!(
            a,
            Action::Push {
                target: ObjectClass::Banana,
                direction_angle: 0.5
            }
        );
        let (a, c) = heads
            .assemble(&Overrides {
                kind: Some(ActionKind::Remove),
                target: Some(ObjectClass::Softball),
                params: None,
            })
            .unwrap();
        assert_eq!(
            a,
            Action::Remove {
                target: ObjectClass::Softball
            }
        );
        assert_eq!(c.kind, one_hot(4, 2));
        // The only candidate surface is the target itself.
        let err = heads
            .assemble(&Overrides {
                kind: Some(ActionKind::Drop),
                ..Overrides::default()
            })
            .unwrap_err();
        assert!(matches!(err, Error::Unparseable(_)));
    }
}
