//! Deterministic keyword grammar.
//!
//! The first verb from the lexicon fixes the action kind, the first object
//! name after it is the acted object, and the parameters come from the
//! direction and sense word lists or from the object named after "on".

use crate::action::{angle_from_xy, ActionKind, RotationSense};
use crate::catalog::ObjectClass;
use crate::scene::Scene;
use crate::Result;

use super::lexicon::{self, Direction};
use super::{one_hot, tokenize, Backend, Heads, Overrides, ParseOutcome};

pub(crate) fn rule_heads(tokens: &[String], scene: Option<&Scene>) -> Heads {
    let verb = tokens
        .iter()
        .enumerate()
        .find_map(|(i, t)| lexicon::verb_kind(t).map(|k| (i, k)));
    let after_verb = verb.map_or(0, |(i, _)| i + 1);
    let mentions = lexicon::find_objects(tokens);
    let target = mentions.iter().find(|m| m.start >= after_verb);
    let rest = target.map_or(after_verb, |m| m.end);

    let onto = tokens
        .iter()
        .enumerate()
        .skip(rest)
        .find(|(_, t)| lexicon::ONTO_WORDS.contains(&t.as_str()))
        .and_then(|(i, _)| mentions.iter().find(|m| m.start > i))
        .map(|m| m.class);

    let direction = match lexicon::find_direction(tokens, rest) {
        Some(Direction::Angle(a)) => Some((a, 1.0)),
        Some(Direction::TableCenter) => target
            .zip(scene)
            .and_then(|(m, scene)| scene.object(m.class))
            .and_then(|obj| {
                let t = obj.pose.translation;
                angle_from_xy(-t.x, -t.y).ok()
            })
            .map(|a| (a, 1.0)),
        None => None,
    };

    Heads {
        kind: verb.map(|(_, k)| one_hot(ActionKind::ALL.len(), k.index())),
        target: target.map(|m| one_hot(ObjectClass::COUNT, m.class.index())),
        sense: lexicon::find_sense(tokens).map(|s| one_hot(RotationSense::ALL.len(), s.index())),
        onto: onto.map(|c| one_hot(ObjectClass::COUNT, c.index())),
        direction,
    }
}

/// Parses `text` with the keyword grammar. The scene is only consulted for
/// "middle of the table", whose direction depends on where the object is.
pub fn parse_rules(text: &str, scene: Option<&Scene>) -> Result<ParseOutcome> {
    let toks = tokenize(text)?;
    let (action, confidences) = rule_heads(&toks, scene)
        .assemble(&Overrides::default())
        .map_err(|e| match e {
            crate::Error::Unparseable(why) => {
                crate::Error::Unparseable(format!("{why} in `{text}`"))
            }
            other => other,
        })?;
    Ok(ParseOutcome {
        action,
        confidences,
        backend: Backend::Rules,
    })
}
