use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Push,
    Rotate,
    Remove,
    Drop,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Push,
        ActionKind::Rotate,
        ActionKind::Remove,
        ActionKind::Drop,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ActionKind> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionKind::Push => "push",
            ActionKind::Rotate => "rotate",
            ActionKind::Remove => "remove",
            ActionKind::Drop => "drop",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sense of rotation seen from above; counter-clockwise is positive about
/// world z.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RotationSense {
    #[serde(rename = "CW")]
    Clockwise,
    #[serde(rename = "CCW")]
    CounterClockwise,
}

impl RotationSense {
    pub const ALL: [RotationSense; 2] = [RotationSense::Clockwise, RotationSense::CounterClockwise];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<RotationSense> {
        Self::ALL.get(index).copied()
    }

    /// +1 for counter-clockwise, -1 for clockwise.
    pub fn sign(self) -> f64 {
        match self {
            RotationSense::Clockwise => -1.0,
            RotationSense::CounterClockwise => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionParams {
    Push { direction_angle: f64 },
    Rotate { sense: RotationSense },
    Drop { onto: ObjectClass },
}

/// A parsed hypothetical action: what is done, to which object, and how.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionRepr", into = "ActionRepr")]
pub enum Action {
    Push {
        target: ObjectClass,
        direction_angle: f64,
    },
    Rotate {
        target: ObjectClass,
        sense: RotationSense,
    },
    Remove {
        target: ObjectClass,
    },
    Drop {
        target: ObjectClass,
        onto: ObjectClass,
    },
}

#[derive(Serialize, Deserialize)]
struct ActionRepr {
    kind: ActionKind,
    target: ObjectClass,
    params: Option<ActionParams>,
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Push { .. } => ActionKind::Push,
            Action::Rotate { .. } => ActionKind::Rotate,
            Action::Remove { .. } => ActionKind::Remove,
            Action::Drop { .. } => ActionKind::Drop,
        }
    }

    pub fn target(&self) -> ObjectClass {
        match *self {
            Action::Push { target, .. }
            | Action::Rotate { target, .. }
            | Action::Remove { target }
            | Action::Drop { target, .. } => target,
        }
    }

    pub fn params(&self) -> Option<ActionParams> {
        match *self {
            Action::Push {
                direction_angle, ..
            } => Some(ActionParams::Push { direction_angle }),
            Action::Rotate { sense, .. } => Some(ActionParams::Rotate { sense }),
            Action::Remove { .. } => None,
            Action::Drop { onto, .. } => Some(ActionParams::Drop { onto }),
        }
    }

    /// Checks the action invariants.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Action::Push {
                direction_angle, ..
            } if !(-PI..=PI).contains(&direction_angle) => Err(Error::InvalidValue(format!(
                "push direction {direction_angle} outside [-pi, pi]"
            ))),
            Action::Drop { target, onto } if target == onto => Err(Error::InvalidValue(format!(
                "{target} cannot be dropped onto itself"
            ))),
            _ => Ok(()),
        }
    }

    /// Every object the action refers to.
    pub fn mentioned(&self) -> Vec<ObjectClass> {
        match *self {
            Action::Drop { target, onto } => vec![target, onto],
            _ => vec![self.target()],
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Push {
                target,
                direction_angle,
            } => write!(f, "Push({target}, {direction_angle:.4} rad)"),
            Action::Rotate { target, sense } => write!(f, "Rotate({target}, {sense:?})"),
            Action::Remove { target } => write!(f, "Remove({target})"),
            Action::Drop { target, onto } => write!(f, "Drop({target} onto {onto})"),
        }
    }
}

impl TryFrom<ActionRepr> for Action {
    type Error = Error;

    fn try_from(repr: ActionRepr) -> Result<Self> {
        let target = repr.target;
        let action = match (repr.kind, repr.params) {
            (ActionKind::Push, Some(ActionParams::Push { direction_angle })) => Action::Push {
                target,
                direction_angle,
            },
            (ActionKind::Rotate, Some(ActionParams::Rotate { sense })) => {
                Action::Rotate { target, sense }
            }
            (ActionKind::Remove, None) => Action::Remove { target },
            (ActionKind::Drop, Some(ActionParams::Drop { onto })) => Action::Drop { target, onto },
            (kind, _) => {
                return Err(Error::InvalidValue(format!(
                    "params do not match action kind `{kind}`"
                )))
            }
        };
        action.validate()?;
        Ok(action)
    }
}

impl From<Action> for ActionRepr {
    fn from(action: Action) -> Self {
        ActionRepr {
            kind: action.kind(),
            target: action.target(),
            params: action.params(),
        }
    }
}

/// Direction of a push given as planar components, with the magnitude
/// discarded. Returns a value in (-pi, pi].
pub fn angle_from_xy(x: f64, y: f64) -> Result<f64> {
    if x == 0.0 && y == 0.0 {
        return Err(Error::DegeneratePushDirection);
    }
    Ok(y.atan2(x))
}
