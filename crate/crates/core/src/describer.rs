//! One sentence per object about what happened to it.
//!
//! An affected object is attributed to whichever object first touched it
//! before it started moving; the sentence comes from a small set of fixed
//! templates using the display names of the classes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::action::{Action, ActionKind};
use crate::catalog::ObjectClass;
use crate::effects::{self, PoseStats, Thresholds, DISPLACEMENT_THRESHOLD, ROTATION_THRESHOLD};
use crate::physics::SimulationResult;
use crate::scene::Table;
use crate::trajectory::Trajectory;
use crate::{Error, Result};

/// Displacement below which a push is described as slight, in meters.
pub const SLIGHT_DISPLACEMENT: f64 = 0.03;

/// Pose differences `subject - other` per time step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiffSeries {
    pub subject: ObjectClass,
    pub other: ObjectClass,
    pub deltas: Vec<[f64; 12]>,
}

pub fn diff_trajectories(subject: &Trajectory, other: &Trajectory) -> Result<DiffSeries> {
    for tr in [subject, other] {
        if tr.removed {
            return Err(Error::RemovedTrajectory(tr.class));
        }
    }
    let deltas = subject
        .samples
        .iter()
        .zip(&other.samples)
        .map(|(a, b)| {
            let (a, b) = (a.pose.components(), b.pose.components());
            std::array::from_fn(|c| a[c] - b[c])
        })
        .collect();
    Ok(DiffSeries {
        subject: subject.class,
        other: other.class,
        deltas,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Nothing,
    PushedBy,
    HitByDropped,
    FallsOffTable,
    Moved,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Magnitude {
    Slight,
    Normal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub subject: ObjectClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<ObjectClass>,
    pub magnitude: Magnitude,
}

impl Event {
    pub fn nothing(subject: ObjectClass) -> Self {
        Event {
            kind: EventKind::Nothing,
            subject,
            agent: None,
            magnitude: Magnitude::Slight,
        }
    }
}

/// Time of the first sample at which the subject has moved by the raw
/// displacement or rotation limits, or the last sample time if it never
/// does.
pub fn motion_onset(tr: &Trajectory) -> f64 {
    let Some(first) = tr.samples.first() else {
        return 0.0;
    };
    tr.samples
        .iter()
        .find(|s| {
            (s.pose.translation - first.pose.translation).norm() > DISPLACEMENT_THRESHOLD
                || s.pose.angle_to(&first.pose) > ROTATION_THRESHOLD
        })
        .or(tr.samples.last())
        .map_or(0.0, |s| s.t)
}

fn subject_trajectory<'a>(
    subject: ObjectClass,
    result: &'a SimulationResult,
    action: &Action,
) -> Result<&'a Trajectory> {
    if subject == action.target() {
        return Err(Error::SubjectIsActedObject(subject));
    }
    result
        .trajectories
        .get(&subject)
        .ok_or(Error::UnknownSubject(subject))
}

/// Event for `subject` once the affected decision has been made.
pub fn event_given(
    subject: ObjectClass,
    result: &SimulationResult,
    action: &Action,
    table: &Table,
    affected: bool,
) -> Result<Event> {
    let tr = subject_trajectory(subject, result, action)?;
    if !affected {
        return Ok(Event::nothing(subject));
    }
    let magnitude = if tr.max_displacement() < SLIGHT_DISPLACEMENT {
        Magnitude::Slight
    } else {
        Magnitude::Normal
    };
    if let Some(last) = tr.final_pose() {
        let p = last.translation;
        if !table.covers(p.x, p.y) && p.z < 0.0 {
            return Ok(Event {
                kind: EventKind::FallsOffTable,
                subject,
                agent: None,
                magnitude,
            });
        }
    }
    let onset = motion_onset(tr);
    let agent = result
        .contacts
        .iter()
        .filter(|c| c.t <= onset)
        .find_map(|c| c.counterparty(subject));
    let kind = match agent {
        None => EventKind::Moved,
        Some(a) if action.kind() == ActionKind::Drop && a == action.target() => {
            EventKind::HitByDropped
        }
        Some(_) => EventKind::PushedBy,
    };
    Ok(Event {
        kind,
        subject,
        agent,
        magnitude,
    })
}

/// Event for `subject`, deciding whether it moved from its normalized
/// trajectory statistics.
pub fn extract_event(
    subject: ObjectClass,
    result: &SimulationResult,
    action: &Action,
    table: &Table,
    stats: &PoseStats,
    thresholds: &Thresholds,
) -> Result<Event> {
    let tr = subject_trajectory(subject, result, action)?;
    let affected = effects::is_affected(&effects::summarize(tr, stats)?, thresholds);
    event_given(subject, result, action, table, affected)
}

pub fn realize(event: &Event) -> String {
    let subject = event.subject.display_name();
    let agent = event.agent.map_or("", |a| a.display_name());
    match (event.kind, event.magnitude) {
        (EventKind::Nothing, _) => "nothing".to_string(),
        (EventKind::PushedBy, Magnitude::Slight) => {
            format!("the {subject} is pushed a little by the {agent}")
        }
        (EventKind::PushedBy, Magnitude::Normal) | (EventKind::HitByDropped, _) => {
            format!("the {subject} is pushed by the {agent}")
        }
        (EventKind::FallsOffTable, _) => format!("the {subject} falls off the table"),
        (EventKind::Moved, _) => format!("the {subject} shakes a little from the impact"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub subject: ObjectClass,
    pub text: String,
    pub event: Event,
}

impl fmt::Display for Description {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

/// Describes every object but the acted one, given a decision rule.
pub fn describe_with(
    result: &SimulationResult,
    action: &Action,
    table: &Table,
    mut affected: impl FnMut(&Trajectory) -> Result<bool>,
) -> Result<BTreeMap<ObjectClass, Description>> {
    let mut out = BTreeMap::new();
    for (&subject, tr) in &result.trajectories {
        if subject == action.target() {
            continue;
        }
        let event = event_given(subject, result, action, table, affected(tr)?)?;
        out.insert(
            subject,
            Description {
                subject,
                text: realize(&event),
                event,
            },
        );
    }
    Ok(out)
}

pub fn describe_all(
    result: &SimulationResult,
    action: &Action,
    table: &Table,
    stats: &PoseStats,
    thresholds: &Thresholds,
) -> Result<BTreeMap<ObjectClass, Description>> {
    describe_with(result, action, table, |tr| {
        Ok(effects::is_affected(
            &effects::summarize(tr, stats)?,
            thresholds,
        ))
    })
}

/// Whether `text` is exactly one of the sentences [`realize`] can produce.
pub fn is_template_sentence(text: &str) -> bool {
    if text == "nothing" {
        return true;
    }
    let names = || ObjectClass::ALL.iter().map(|c| c.display_name());
    let Some(rest) = text.strip_prefix("the ") else {
        return false;
    };
    names().any(|s| {
        let Some(tail) = rest.strip_prefix(s) else {
            return false;
        };
        if tail == " falls off the table" || tail == " shakes a little from the impact" {
            return true;
        }
        [" is pushed by the ", " is pushed a little by the "]
            .iter()
            .filter_map(|p| tail.strip_prefix(p))
            .any(|agent| names().any(|a| a == agent && a != s))
    })
}
