//! Deterministic rigid-body simulation of a table-top scene.
//!
//! The integrator is semi-implicit Euler at the sampling rate, so every
//! integrator state is a trajectory sample. Contacts are resolved by the
//! sequential-impulse solver in [`solver`].

mod body;
pub(crate) mod collide;
mod solver;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::action::Action;
use crate::catalog::ObjectClass;
use crate::scene::{Pose, Scene, Shape, Table};
use crate::trajectory::{Trajectory, TrajectorySample, SAMPLES_PER_RUN, SAMPLE_RATE_HZ};
use crate::{Error, Result};

use body::RigidBody;
use collide::{Contact, Other};
use solver::{Cached, FeatureKey};

pub use collide::penetration_depth;

/// Tunable constants of the simulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub gravity: f64,
    /// Solver sweeps per step.
    pub iterations: usize,
    pub restitution: f64,
    /// Approach speed below which contacts are treated as inelastic.
    pub restitution_threshold: f64,
    pub friction_table: f64,
    pub friction_object: f64,
    pub friction_floor: f64,
    /// Linear impulse of a push, N·s.
    pub push_impulse: f64,
    /// Angular impulse of a rotation about world z, N·m·s.
    pub rotate_impulse: f64,
    /// Release height above the top of the object dropped onto, m.
    pub drop_height: f64,
    /// Tilt about its own x axis given to a dropped object on release, rad.
    pub drop_tilt: f64,
    pub settle_steps: usize,
    pub run_steps: usize,
    /// Height of the floor the table stands on.
    pub floor_z: f64,
    /// Fraction of penetration beyond `slop` removed per step.
    pub position_correction: f64,
    pub slop: f64,
    /// Base distance at which contacts are generated ahead of touching.
    pub contact_margin: f64,
    pub warm_start: bool,
    /// Rolling resistance of spheres, as a lever arm fraction of the radius.
    pub rolling_resistance: f64,
    /// A supported body slower than this is brought to rest.
    pub rest_linear_speed: f64,
    pub rest_angular_speed: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1.0 / SAMPLE_RATE_HZ as f64,
            gravity: 9.81,
            iterations: 20,
            restitution: 0.1,
            restitution_threshold: 0.25,
            friction_table: 0.5,
            friction_object: 0.4,
            friction_floor: 0.5,
            push_impulse: 0.6,
            rotate_impulse: 0.02,
            drop_height: 0.25,
            drop_tilt: 0.6,
            settle_steps: SAMPLE_RATE_HZ as usize,
            run_steps: SAMPLES_PER_RUN,
            floor_z: -0.75,
            position_correction: 0.2,
            slop: 5e-4,
            contact_margin: 2e-3,
            warm_start: false,
            rolling_resistance: 0.05,
            rest_linear_speed: 1e-3,
            rest_angular_speed: 1e-2,
        }
    }
}

/// Kinematic state of one body.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyState {
    pub class: ObjectClass,
    pub pose: Pose,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
}

/// The second party of a contact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Contactee {
    Object(ObjectClass),
    Table,
    Floor,
}

impl Contactee {
    pub fn object(self) -> Option<ObjectClass> {
        match self {
            Contactee::Object(c) => Some(c),
            _ => None,
        }
    }
}

impl fmt::Display for Contactee {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contactee::Object(c) => f.write_str(c.as_str()),
            Contactee::Table => f.write_str("table"),
            Contactee::Floor => f.write_str("floor"),
        }
    }
}

impl From<Contactee> for String {
    fn from(c: Contactee) -> String {
        c.to_string()
    }
}

impl TryFrom<String> for Contactee {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        match s.as_str() {
            "table" => Ok(Contactee::Table),
            "floor" => Ok(Contactee::Floor),
            other => ObjectClass::from_str(other).map(Contactee::Object),
        }
    }
}

/// Onset of contact between two bodies, or a body and static geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub t: f64,
    pub a: ObjectClass,
    pub b: Contactee,
    /// Total normal impulse of the pair in the step the contact began.
    pub impulse_magnitude: f64,
}

impl ContactEvent {
    pub fn involves(&self, class: ObjectClass) -> bool {
        self.a == class || self.b == Contactee::Object(class)
    }

    /// The other object when `class` is one party of an object pair.
    pub fn counterparty(&self, class: ObjectClass) -> Option<ObjectClass> {
        match self.b {
            Contactee::Object(b) if self.a == class => Some(b),
            Contactee::Object(b) if b == class => Some(self.a),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub trajectories: BTreeMap<ObjectClass, Trajectory>,
    /// Time-ordered.
    pub contacts: Vec<ContactEvent>,
}

/// Worst values seen over one run, each taken over all steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    /// Largest relative increase of mechanical energy in a single step.
    pub worst_energy_gain: f64,
    pub max_penetration: f64,
    pub max_orthonormality_error: f64,
}

/// Runs scenes under a fixed configuration.
#[derive(Clone, Debug, Default)]
pub struct Simulator {
    pub config: SimConfig,
}

impl Simulator {
    pub fn new(config: SimConfig) -> Self {
        Simulator { config }
    }

    /// Lets the scene come to rest for the configured settling time.
    pub fn settle(&self, scene: &Scene) -> Result<Scene> {
        let mut world = World::new(scene, &self.config);
        for _ in 0..self.config.settle_steps {
            world.step(None)?;
        }
        Ok(world.to_scene(scene))
    }

    /// Bodies of `scene` at rest in their scene poses.
    pub fn initial_state(scene: &Scene) -> Vec<BodyState> {
        World::new(scene, &SimConfig::default()).states()
    }

    /// Applies `action` to `state`; shapes and masses come from `scene`.
    pub fn apply_action(
        &self,
        scene: &Scene,
        state: &[BodyState],
        action: &Action,
    ) -> Result<Vec<BodyState>> {
        let mut world = World::new(scene, &self.config);
        world.set_states(state)?;
        world.apply_action(action)?;
        Ok(world.states())
    }

    /// Applies `action` at t = 0 and records every body for the run.
    pub fn simulate(&self, scene: &Scene, action: &Action) -> Result<SimulationResult> {
        let mut world = World::new(scene, &self.config);
        world.apply_action(action)?;
        world.run(self.config.run_steps)
    }

    /// Replays `simulate` while checking the run's physical invariants.
    pub fn audit(&self, scene: &Scene, action: &Action) -> Result<Audit> {
        let mut world = World::new(scene, &self.config);
        world.apply_action(action)?;
        let mut energy = world.energy();
        let mut audit = Audit::default();
        for _ in 0..self.config.run_steps {
            world.step(None)?;
            let e = world.energy();
            audit.worst_energy_gain = audit.worst_energy_gain.max((e - energy) / energy.abs());
            energy = e;
            audit.max_penetration = audit.max_penetration.max(world.max_penetration());
            for b in &world.bodies {
                audit.max_orthonormality_error = audit
                    .max_orthonormality_error
                    .max(b.pose().orthonormality_error());
            }
        }
        Ok(audit)
    }

    /// A run with no action applied.
    pub fn simulate_passive(&self, scene: &Scene) -> Result<SimulationResult> {
        World::new(scene, &self.config).run(self.config.run_steps)
    }
}

/// Settles `scene` with the default configuration. The integrator is
/// deterministic and draws no random numbers; `seed` is accepted so
/// callers can thread one through for reproducibility records.
pub fn settle(scene: &Scene, seed: u64) -> Result<Scene> {
    let _ = seed;
    Simulator::default().settle(scene)
}

/// Simulates `action` on `scene` with the default configuration. See
/// [`settle`] about `seed`.
pub fn simulate(scene: &Scene, action: &Action, seed: u64) -> Result<SimulationResult> {
    let _ = seed;
    Simulator::default().simulate(scene, action)
}

fn top_offset(shape: &Shape, rotation: &Matrix3<f64>) -> f64 {
    let flipped = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)) * rotation;
    shape.depth_below_center(&flipped)
}

pub(crate) struct World {
    cfg: SimConfig,
    table: Table,
    bodies: Vec<RigidBody>,
    removed: Vec<ObjectClass>,
    warm: HashMap<FeatureKey, Cached>,
    touching: BTreeSet<(usize, Other)>,
    steps: usize,
}

impl World {
    pub fn new(scene: &Scene, cfg: &SimConfig) -> World {
        World {
            cfg: cfg.clone(),
            table: scene.table,
            bodies: scene.objects.iter().map(RigidBody::from_object).collect(),
            removed: Vec::new(),
            warm: HashMap::new(),
            touching: BTreeSet::new(),
            steps: 0,
        }
    }

    fn index(&self, class: ObjectClass) -> Result<usize> {
        self.bodies
            .iter()
            .position(|b| b.class == class)
            .ok_or(Error::UnknownActionTarget(class))
    }

    pub fn states(&self) -> Vec<BodyState> {
        self.bodies
            .iter()
            .map(|b| BodyState {
                class: b.class,
                pose: b.pose(),
                linear_velocity: b.linear_velocity,
                angular_velocity: b.angular_velocity,
            })
            .collect()
    }

    fn set_states(&mut self, states: &[BodyState]) -> Result<()> {
        self.bodies
            .retain(|b| states.iter().any(|s| s.class == b.class));
        for s in states {
            let i = self.index(s.class)?;
            let b = &mut self.bodies[i];
            b.position = s.pose.translation;
            b.orientation = UnitQuaternion::from_matrix(&s.pose.rotation);
            b.linear_velocity = s.linear_velocity;
            b.angular_velocity = s.angular_velocity;
            b.refresh();
        }
        Ok(())
    }

    fn to_scene(&self, template: &Scene) -> Scene {
        let mut scene = template.clone();
        for obj in &mut scene.objects {
            if let Some(b) = self.bodies.iter().find(|b| b.class == obj.class) {
                obj.pose = b.pose();
            }
        }
        scene
    }

    pub fn apply_action(&mut self, action: &Action) -> Result<()> {
        let i = self.index(action.target())?;
        match *action {
            Action::Push {
                direction_angle, ..
            } => {
                let b = &mut self.bodies[i];
                let impulse = Vector3::new(direction_angle.cos(), direction_angle.sin(), 0.0)
                    * self.cfg.push_impulse;
                b.linear_velocity += impulse * b.inv_mass;
            }
            Action::Rotate { sense, .. } => {
                let b = &mut self.bodies[i];
                let impulse = Vector3::new(0.0, 0.0, sense.sign() * self.cfg.rotate_impulse);
                b.angular_velocity += b.inv_inertia_world * impulse;
            }
            Action::Remove { target } => {
                self.bodies.remove(i);
                self.removed.push(target);
            }
            Action::Drop { onto, .. } => {
                let j = self.index(onto)?;
                let base = &self.bodies[j];
                let top = base.position.z + top_offset(&base.shape, &base.rotation);
                let (x, y) = (base.position.x, base.position.y);
                let tilt = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), self.cfg.drop_tilt);
                let b = &mut self.bodies[i];
                b.orientation *= tilt;
                b.refresh();
                let lift = b.shape.depth_below_center(&b.rotation);
                b.position = Vector3::new(x, y, top + self.cfg.drop_height + lift);
                b.linear_velocity = Vector3::zeros();
                b.angular_velocity = Vector3::zeros();
                b.refresh();
            }
        }
        self.warm.clear();
        Ok(())
    }

    /// Deepest current penetration between any body and anything else.
    pub fn max_penetration(&self) -> f64 {
        self.contacts(false)
            .iter()
            .map(|c| c.depth)
            .fold(0.0, f64::max)
    }

    /// Mechanical energy with potential measured from the floor.
    pub fn energy(&self) -> f64 {
        self.bodies
            .iter()
            .map(|b| {
                b.kinetic_energy() + b.mass * self.cfg.gravity * (b.position.z - self.cfg.floor_z)
            })
            .sum()
    }

    fn friction(&self, c: &Contact) -> f64 {
        match c.other {
            Other::Body(_) => self.cfg.friction_object,
            Other::Table => self.cfg.friction_table,
            Other::Floor => self.cfg.friction_floor,
        }
    }

    fn contacts(&self, extra_margin: bool) -> Vec<Contact> {
        let dt = self.cfg.dt;
        let reach = |speed: f64| {
            if extra_margin {
                self.cfg.contact_margin + 1.2 * speed * dt
            } else {
                self.cfg.contact_margin
            }
        };
        let speeds: Vec<f64> = self.bodies.iter().map(|b| b.max_point_speed()).collect();
        let mut out = Vec::new();
        for i in 0..self.bodies.len() {
            let m = reach(speeds[i]);
            collide::against_table(&self.bodies, i, &self.table, m, &mut out);
            collide::against_floor(&self.bodies, i, self.cfg.floor_z, m, &mut out);
            for j in i + 1..self.bodies.len() {
                collide::between(&self.bodies, i, j, reach(speeds[i] + speeds[j]), &mut out);
            }
        }
        out
    }

    /// Advances one step. Contact onsets are appended to `events` when
    /// given.
    pub fn step(&mut self, events: Option<&mut Vec<ContactEvent>>) -> Result<()> {
        let dt = self.cfg.dt;
        for b in &mut self.bodies {
            b.linear_velocity.z -= self.cfg.gravity * dt;
        }

        let contacts = self.contacts(true);
        let mu: Vec<f64> = contacts.iter().map(|c| self.friction(c)).collect();
        let outcome = solver::solve(&mut self.bodies, &contacts, &mu, &mut self.warm, &self.cfg);

        let mut support = vec![0.0; self.bodies.len()];
        let mut pair_impulse: BTreeMap<(usize, Other), f64> = BTreeMap::new();
        for (c, &ln) in contacts.iter().zip(&outcome.normal_impulses) {
            if ln > 0.0 {
                support[c.a] += ln;
                if let Other::Body(b) = c.other {
                    support[b] += ln;
                }
                *pair_impulse.entry((c.a, c.other)).or_default() += ln;
            }
        }

        for (b, &load) in self.bodies.iter_mut().zip(&support) {
            if load <= 0.0 {
                continue;
            }
            if let Shape::Sphere { radius } = b.shape {
                let w = b.angular_velocity.norm();
                if w > 0.0 {
                    let inertia = b.inertia_body.x;
                    let max_dw = self.cfg.rolling_resistance * radius * load / inertia;
                    b.angular_velocity *= (1.0 - max_dw / w).max(0.0);
                }
            }
            if b.linear_velocity.norm() < self.cfg.rest_linear_speed
                && b.angular_velocity.norm() < self.cfg.rest_angular_speed
            {
                b.linear_velocity = Vector3::zeros();
                b.angular_velocity = Vector3::zeros();
            }
        }

        let mut free = vec![true; self.bodies.len()];
        for c in &contacts {
            free[c.a] = false;
            if let Other::Body(b) = c.other {
                free[b] = false;
            }
        }
        for ((b, (vp, wp)), free) in self.bodies.iter_mut().zip(&outcome.pseudo).zip(free) {
            let mut v = b.linear_velocity + vp;
            if free {
                // Average of the velocities before and after gravity, which
                // makes ballistic flight exact.
                v.z += 0.5 * self.cfg.gravity * dt;
            }
            let w = b.angular_velocity + wp;
            b.position += v * dt;
            if w != Vector3::zeros() {
                b.orientation = UnitQuaternion::from_scaled_axis(w * dt) * b.orientation;
                b.orientation.renormalize();
            }
            b.refresh();
        }

        self.steps += 1;
        if let Some(step) = self
            .bodies
            .iter()
            .any(|b| !b.is_finite() || b.position.norm() > 1e3)
            .then_some(self.steps)
        {
            return Err(Error::Diverged { step });
        }

        let t = self.steps as f64 * dt;
        if let Some(events) = events {
            for (&(a, other), &impulse) in &pair_impulse {
                if !self.touching.contains(&(a, other)) {
                    events.push(ContactEvent {
                        t,
                        a: self.bodies[a].class,
                        b: self.contactee(other),
                        impulse_magnitude: impulse,
                    });
                }
            }
        }
        self.touching = pair_impulse.into_keys().collect();
        Ok(())
    }

    fn contactee(&self, other: Other) -> Contactee {
        match other {
            Other::Body(b) => Contactee::Object(self.bodies[b].class),
            Other::Table => Contactee::Table,
            Other::Floor => Contactee::Floor,
        }
    }

    /// Pairs already touching now; their contact is not reported as an
    /// onset.
    fn mark_touching(&mut self) {
        self.touching = self
            .contacts(false)
            .iter()
            .filter(|c| c.depth > -1e-3)
            .map(|c| (c.a, c.other))
            .collect();
    }

    pub fn run(mut self, steps: usize) -> Result<SimulationResult> {
        self.mark_touching();
        let rate = SAMPLE_RATE_HZ;
        let mut samples: Vec<Vec<TrajectorySample>> =
            vec![Vec::with_capacity(steps); self.bodies.len()];
        let mut contacts = Vec::new();
        for k in 0..steps {
            self.step(Some(&mut contacts))?;
            let t = (k + 1) as f64 / rate as f64;
            for (b, s) in self.bodies.iter().zip(samples.iter_mut()) {
                s.push(TrajectorySample { t, pose: b.pose() });
            }
        }
        let mut trajectories: BTreeMap<ObjectClass, Trajectory> = self
            .bodies
            .iter()
            .zip(samples)
            .map(|(b, samples)| {
                (
                    b.class,
                    Trajectory {
                        class: b.class,
                        removed: false,
                        rate_hz: rate,
                        samples,
                    },
                )
            })
            .collect();
        for &class in &self.removed {
            trajectories.insert(class, Trajectory::removed(class));
        }
        Ok(SimulationResult {
            trajectories,
            contacts,
        })
    }
}
