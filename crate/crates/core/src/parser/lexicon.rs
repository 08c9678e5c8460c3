//! Word lists shared by the rule parser, the sentence grammar and the
//! mention detector.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::action::{ActionKind, RotationSense};
use crate::catalog::ObjectClass;

/// Verb surface forms and the action they denote.
pub const VERBS: &[(&str, ActionKind)] = &[
    ("push", ActionKind::Push),
    ("pushes", ActionKind::Push),
    ("pushed", ActionKind::Push),
    ("pushing", ActionKind::Push),
    ("shove", ActionKind::Push),
    ("shoves", ActionKind::Push),
    ("shoved", ActionKind::Push),
    ("roll", ActionKind::Push),
    ("rolls", ActionKind::Push),
    ("rolled", ActionKind::Push),
    ("slide", ActionKind::Push),
    ("slides", ActionKind::Push),
    ("slid", ActionKind::Push),
    ("nudge", ActionKind::Push),
    ("nudges", ActionKind::Push),
    ("nudged", ActionKind::Push),
    ("spin", ActionKind::Rotate),
    ("spins", ActionKind::Rotate),
    ("spun", ActionKind::Rotate),
    ("rotate", ActionKind::Rotate),
    ("rotates", ActionKind::Rotate),
    ("rotated", ActionKind::Rotate),
    ("turn", ActionKind::Rotate),
    ("turns", ActionKind::Rotate),
    ("turned", ActionKind::Rotate),
    ("twist", ActionKind::Rotate),
    ("twists", ActionKind::Rotate),
    ("twisted", ActionKind::Rotate),
    ("remove", ActionKind::Remove),
    ("removes", ActionKind::Remove),
    ("removed", ActionKind::Remove),
    ("take", ActionKind::Remove),
    ("takes", ActionKind::Remove),
    ("took", ActionKind::Remove),
    ("lift", ActionKind::Remove),
    ("lifts", ActionKind::Remove),
    ("lifted", ActionKind::Remove),
    ("drop", ActionKind::Drop),
    ("drops", ActionKind::Drop),
    ("dropped", ActionKind::Drop),
    ("place", ActionKind::Drop),
    ("places", ActionKind::Drop),
    ("placed", ActionKind::Drop),
    ("put", ActionKind::Drop),
    ("puts", ActionKind::Drop),
];

pub fn verb_kind(token: &str) -> Option<ActionKind> {
    VERBS.iter().find(|(w, _)| *w == token).map(|&(_, k)| k)
}

/// Words introducing the object something is dropped onto.
pub const ONTO_WORDS: &[&str] = &["on", "onto", "upon"];

/// Single-token direction words.
const DIRECTION_WORDS: &[(&str, f64)] = &[
    ("right", 0.0),
    ("east", 0.0),
    ("rightwards", 0.0),
    ("left", PI),
    ("west", PI),
    ("leftwards", PI),
    ("north", FRAC_PI_2),
    ("up", FRAC_PI_2),
    ("top", FRAC_PI_2),
    ("upwards", FRAC_PI_2),
    ("south", -FRAC_PI_2),
    ("down", -FRAC_PI_2),
    ("bottom", -FRAC_PI_2),
    ("downwards", -FRAC_PI_2),
    ("north-east", FRAC_PI_4),
    ("northeast", FRAC_PI_4),
    ("top-right", FRAC_PI_4),
    ("upper-right", FRAC_PI_4),
    ("north-west", 3.0 * FRAC_PI_4),
    ("northwest", 3.0 * FRAC_PI_4),
    ("top-left", 3.0 * FRAC_PI_4),
    ("upper-left", 3.0 * FRAC_PI_4),
    ("south-west", -3.0 * FRAC_PI_4),
    ("southwest", -3.0 * FRAC_PI_4),
    ("bottom-left", -3.0 * FRAC_PI_4),
    ("lower-left", -3.0 * FRAC_PI_4),
    ("south-east", -FRAC_PI_4),
    ("southeast", -FRAC_PI_4),
    ("bottom-right", -FRAC_PI_4),
    ("lower-right", -FRAC_PI_4),
];

const VERTICAL: &[(&str, f64)] = &[
    ("north", 1.0),
    ("top", 1.0),
    ("upper", 1.0),
    ("south", -1.0),
    ("bottom", -1.0),
    ("lower", -1.0),
];

const HORIZONTAL: &[(&str, f64)] = &[
    ("east", 1.0),
    ("right", 1.0),
    ("west", -1.0),
    ("left", -1.0),
];

/// Words asking for a push toward the middle of the table.
pub const CENTER_WORDS: &[&str] = &["middle", "center", "centre"];

/// A direction phrase found in a token sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Direction {
    Angle(f64),
    TableCenter,
}

fn lookup(table: &[(&str, f64)], word: &str) -> Option<f64> {
    table.iter().find(|(w, _)| *w == word).map(|&(_, v)| v)
}

/// First direction phrase at or after `from`. Two-word diagonals such as
/// "north west" or "top left" take precedence over their first word.
pub fn find_direction(tokens: &[String], from: usize) -> Option<Direction> {
    for i in from..tokens.len() {
        let word = tokens[i].as_str();
        if CENTER_WORDS.contains(&word) {
            return Some(Direction::TableCenter);
        }
        if let (Some(v), Some(next)) = (lookup(VERTICAL, word), tokens.get(i + 1)) {
            if let Some(h) = lookup(HORIZONTAL, next) {
                return Some(Direction::Angle(v.atan2(h)));
            }
        }
        if let Some(angle) = lookup(DIRECTION_WORDS, word) {
            return Some(Direction::Angle(angle));
        }
    }
    None
}

/// Rotation sense named anywhere in the tokens.
pub fn find_sense(tokens: &[String]) -> Option<RotationSense> {
    for (i, t) in tokens.iter().enumerate() {
        match t.as_str() {
            "anti-clockwise" | "anticlockwise" | "counter-clockwise" | "counterclockwise" => {
                return Some(RotationSense::CounterClockwise)
            }
            "anti" | "counter" if tokens.get(i + 1).is_some_and(|n| n == "clockwise") => {
                return Some(RotationSense::CounterClockwise)
            }
            "clockwise" => return Some(RotationSense::Clockwise),
            _ => {}
        }
    }
    None
}

/// An object name occupying `tokens[start..end]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub class: ObjectClass,
}

/// Non-overlapping object names, scanning left to right and taking the
/// longest synonym at each position.
pub fn find_objects(tokens: &[String]) -> Vec<Mention> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut best: Option<Mention> = None;
        for class in ObjectClass::ALL {
            for syn in class.synonyms() {
                let words: Vec<&str> = syn.split(' ').collect();
                let end = i + words.len();
                if end <= tokens.len()
                    && tokens[i..end].iter().zip(&words).all(|(t, w)| t == w)
                    && best.is_none_or(|b| end > b.end)
                {
                    best = Some(Mention {
                        start: i,
                        end,
                        class,
                    });
                }
            }
        }
        match best {
            Some(m) => {
                out.push(m);
                i = m.end;
            }
            None => i += 1,
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::tokens;

    #[test]
    fn synonyms_resolve_to_one_class() {
        let mut seen = std::collections::HashMap::new();
        for class in ObjectClass::ALL {
            for syn in class.synonyms() {
                assert_eq!(*seen.entry(*syn).or_insert(class), class, "{syn}");
                let toks = tokens(syn);
                let found = find_objects(&toks);
                assert_eq!(found.len(), 1, "{syn}");
                assert_eq!(found[0].class, class);
                assert_eq!((found[0].start, found[0].end), (0, toks.len()));
            }
        }
    }

    #[test]
    fn longest_match_wins() {
        let found = find_objects(&tokens("the chocolate pudding box and the cheez-it box"));
        let classes: Vec<_> = found.iter().map(|m| m.class).collect();
        assert_eq!(
            classes,
            vec![ObjectClass::PuddingBox, ObjectClass::CheezitBox]
        );
        assert_eq!(found[0].end - found[0].start, 3);
    }

    #[test]
    fn compound_directions() {
        let d = |s: &str| find_direction(&tokens(s), 0);
        assert_eq!(
            d("to the north west"),
            Some(Direction::Angle(3.0 * FRAC_PI_4))
        );
        assert_eq!(
            d("to the top left corner"),
            Some(Direction::Angle(3.0 * FRAC_PI_4))
        );
        assert_eq!(d("to the bottom right"), Some(Direction::Angle(-FRAC_PI_4)));
        assert_eq!(
            d("to the south-west"),
            Some(Direction::Angle(-3.0 * FRAC_PI_4))
        );
        assert_eq!(
            d("towards the top of the table"),
            Some(Direction::Angle(FRAC_PI_2))
        );
        assert_eq!(
            d("to the middle of the table"),
            Some(Direction::TableCenter)
        );
        assert_eq!(d("gently"), None);
    }

    #[test]
    fn senses() {
        let s = |t: &str| find_sense(&tokens(t));
        assert_eq!(s("spins it clockwise"), Some(RotationSense::Clockwise));
        assert_eq!(
            s("in anti-clockwise direction"),
            Some(RotationSense::CounterClockwise)
        );
        assert_eq!(
            s("counter clockwise"),
            Some(RotationSense::CounterClockwise)
        );
        assert_eq!(s("spins it"), None);
    }
}
