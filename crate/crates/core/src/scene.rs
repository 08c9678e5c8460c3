use std::fmt;

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::catalog::ObjectClass;
use crate::physics::collide;
use crate::Error;

/// Number of objects in every scene.
pub const OBJECTS_PER_SCENE: usize = 5;

/// Largest allowed entry of `RᵀR − I` for a rotation matrix.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

/// Deepest allowed initial overlap between two objects, in meters.
pub const INTERPENETRATION_TOLERANCE: f64 = 1e-4;

/// How far an object may sink into the table top and still count as
/// resting on it, in meters.
pub const SUPPORT_TOLERANCE: f64 = 1e-3;

/// Rigid transform: translation in meters and a proper rotation matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseRepr", into = "PoseRepr")]
pub struct Pose {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    t: [f64; 3],
    /// Row-major.
    r: [f64; 9],
}

impl Pose {
    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Self {
        Pose {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Pose::new(Vector3::zeros(), Matrix3::identity())
    }

    pub fn from_translation_yaw(translation: Vector3<f64>, yaw: f64) -> Self {
        Pose::new(translation, rotation_z(yaw))
    }

    /// Row-major rotation entries.
    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    /// The 12 pose components: translation followed by row-major rotation.
    pub fn components(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[..3].copy_from_slice(self.translation.as_slice());
        out[3..].copy_from_slice(&self.rotation_row_major());
        out
    }

    /// Largest absolute entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let e = self.rotation.transpose() * self.rotation - Matrix3::identity();
        e.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_proper_rotation(&self, tolerance: f64) -> bool {
        self.orthonormality_error() <= tolerance && self.rotation.determinant() > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.translation
            .iter()
            .chain(self.rotation.iter())
            .all(|v| v.is_finite())
    }

    /// Rotation angle of `self.rotation * other.rotationᵀ`, in radians.
    pub fn angle_to(&self, other: &Pose) -> f64 {
        let rel = self.rotation * other.rotation.transpose();
        ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
    }
}

impl TryFrom<PoseRepr> for Pose {
    type Error = Error;

    fn try_from(repr: PoseRepr) -> Result<Self, Self::Error> {
        let pose = Pose::new(Vector3::from(repr.t), Matrix3::from_row_slice(&repr.r));
        if !pose.is_finite() {
            return Err(Error::InvalidValue("pose has non-finite entries".into()));
        }
        if !pose.is_proper_rotation(ROTATION_TOLERANCE) {
            return Err(Error::InvalidValue(format!(
                "rotation is not orthonormal with determinant +1 (max |RᵀR−I| = {:e})",
                pose.orthonormality_error()
            )));
        }
        Ok(pose)
    }
}

impl From<Pose> for PoseRepr {
    fn from(pose: Pose) -> Self {
        PoseRepr {
            t: [pose.translation.x, pose.translation.y, pose.translation.z],
            r: pose.rotation_row_major(),
        }
    }
}

pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    *Rotation3::from_axis_angle(&Vector3::z_axis(), angle).matrix()
}

/// Collision primitive, dimensions in meters. Cylinders are aligned with
/// their body z axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShapeRepr", into = "ShapeRepr")]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, height: f64 },
}

#[derive(Serialize, Deserialize)]
struct ShapeRepr {
    kind: String,
    dims: Vec<f64>,
}

impl Shape {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Box { .. } => "box",
            Shape::Sphere { .. } => "sphere",
            Shape::Cylinder { .. } => "cylinder",
        }
    }

    pub fn dims(&self) -> Vec<f64> {
        match *self {
            Shape::Box { half_extents } => half_extents.to_vec(),
            Shape::Sphere { radius } => vec![radius],
            Shape::Cylinder { radius, height } => vec![radius, height],
        }
    }

    pub fn is_valid(&self) -> bool {
        self.dims().iter().all(|d| d.is_finite() && *d > 0.0)
    }

    /// Radius of the smallest origin-centered sphere containing the shape.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents: h } => Vector3::from(h).norm(),
            Shape::Sphere { radius } => radius,
            Shape::Cylinder { radius, height } => radius.hypot(height / 2.0),
        }
    }

    /// Diagonal of the body-frame inertia tensor for a uniform solid.
    pub fn principal_inertia(&self, mass: f64) -> Vector3<f64> {
        match *self {
            Shape::Box {
                half_extents: [a, b, c],
            } => Vector3::new(
                mass * (b * b + c * c) / 3.0,
                mass * (a * a + c * c) / 3.0,
                mass * (a * a + b * b) / 3.0,
            ),
            Shape::Sphere { radius } => Vector3::repeat(0.4 * mass * radius * radius),
            Shape::Cylinder { radius, height } => {
                let side = mass * (3.0 * radius * radius + height * height) / 12.0;
                Vector3::new(side, side, 0.5 * mass * radius * radius)
            }
        }
    }

    /// Distance from the body origin down to the lowest point of the shape
    /// when oriented by `rotation`.
    pub fn depth_below_center(&self, rotation: &Matrix3<f64>) -> f64 {
        // Support function in the -z direction, expressed in the body frame.
        let d = rotation.transpose() * Vector3::new(0.0, 0.0, -1.0);
        match *self {
            Shape::Box { half_extents: h } => {
                h[0] * d.x.abs() + h[1] * d.y.abs() + h[2] * d.z.abs()
            }
            Shape::Sphere { radius } => radius,
            Shape::Cylinder { radius, height } => {
                radius * d.x.hypot(d.y) + height / 2.0 * d.z.abs()
            }
        }
    }
}

impl TryFrom<ShapeRepr> for Shape {
    type Error = Error;

    fn try_from(repr: ShapeRepr) -> Result<Self, Self::Error> {
        let shape = match (repr.kind.as_str(), repr.dims.as_slice()) {
            ("box", &[a, b, c]) => Shape::Box {
                half_extents: [a, b, c],
            },
            ("sphere", &[radius]) => Shape::Sphere { radius },
            ("cylinder", &[radius, height]) => Shape::Cylinder { radius, height },
            ("box" | "sphere" | "cylinder", dims) => {
                return Err(Error::InvalidValue(format!(
                    "wrong number of dims ({}) for {}",
                    dims.len(),
                    repr.kind
                )))
            }
            (kind, _) => return Err(Error::InvalidValue(format!("unknown shape kind `{kind}`"))),
        };
        Ok(shape)
    }
}

impl From<Shape> for ShapeRepr {
    fn from(shape: Shape) -> Self {
        ShapeRepr {
            kind: shape.kind_name().to_string(),
            dims: shape.dims(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class: ObjectClass,
    pub shape: Shape,
    pub mass: f64,
    pub pose: Pose,
}

impl SceneObject {
    /// An object with the catalog shape and mass for `class`.
    pub fn from_catalog(class: ObjectClass, pose: Pose) -> Self {
        SceneObject {
            class,
            shape: class.shape(),
            mass: class.mass(),
            pose,
        }
    }

    /// A catalog object in its resting orientation, turned by `yaw` and
    /// standing on the table top at `(x, y)`.
    pub fn resting(class: ObjectClass, x: f64, y: f64, yaw: f64) -> Self {
        let rotation = rotation_z(yaw) * class.rest_rotation();
        let z = class.shape().depth_below_center(&rotation);
        SceneObject::from_catalog(class, Pose::new(Vector3::new(x, y, z), rotation))
    }

    pub fn lowest_z(&self) -> f64 {
        self.pose.translation.z - self.shape.depth_below_center(&self.pose.rotation)
    }

    pub fn highest_z(&self) -> f64 {
        let flipped = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)) * self.pose.rotation;
        self.pose.translation.z + self.shape.depth_below_center(&flipped)
    }
}

/// Axis-aligned table whose top face is the plane z = 0, centered on the
/// origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub half_extents: [f64; 3],
}

impl Table {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.half_extents[2])
    }

    /// Whether `(x, y)` lies over the table top.
    pub fn covers(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_extents[0] && y.abs() <= self.half_extents[1]
    }
}

impl Default for Table {
    fn default() -> Self {
        Table {
            half_extents: [0.5, 0.5, 0.025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub table: Table,
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn object(&self, class: ObjectClass) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.class == class)
    }

    pub fn contains(&self, class: ObjectClass) -> bool {
        self.object(class).is_some()
    }

    pub fn classes(&self) -> Vec<ObjectClass> {
        self.objects.iter().map(|o| o.class).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    ObjectCount(usize),
    DuplicateClass,
    NonPositiveMass,
    InvalidShape,
    BadRotation,
    Interpenetration { depth: f64 },
    BelowTable { depth: f64 },
    OffTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub objects: Vec<ObjectClass>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.objects.iter().map(|c| c.as_str()).collect();
        let names = names.join(", ");
        match &self.kind {
            ViolationKind::ObjectCount(n) => {
                write!(f, "scene has {n} objects, expected {OBJECTS_PER_SCENE}")
            }
            ViolationKind::DuplicateClass => write!(f, "duplicate class: {names}"),
            ViolationKind::NonPositiveMass => write!(f, "non-positive mass: {names}"),
            ViolationKind::InvalidShape => write!(f, "non-positive shape dimension: {names}"),
            ViolationKind::BadRotation => write!(f, "rotation not orthonormal: {names}"),
            ViolationKind::Interpenetration { depth } => {
                write!(f, "interpenetration of {depth:.3e} m: {names}")
            }
            ViolationKind::BelowTable { depth } => {
                write!(f, "{depth:.3e} m below the table surface: {names}")
            }
            ViolationKind::OffTable => write!(f, "not above the table: {names}"),
        }
    }
}

/// Checks every scene invariant. An empty list means the scene is valid.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    if scene.objects.len() != OBJECTS_PER_SCENE {
        out.push(Violation {
            objects: scene.classes(),
            kind: ViolationKind::ObjectCount(scene.objects.len()),
        });
    }
    for (i, a) in scene.objects.iter().enumerate() {
        if scene.objects[..i].iter().any(|b| b.class == a.class) {
            out.push(Violation {
                objects: vec![a.class, a.class],
                kind: ViolationKind::DuplicateClass,
            });
        }
    }

    let mut well_formed = Vec::with_capacity(scene.objects.len());
    for obj in &scene.objects {
        let mut ok = true;
        if !(obj.mass.is_finite() && obj.mass > 0.0) {
            out.push(Violation {
                objects: vec![obj.class],
                kind: ViolationKind::NonPositiveMass,
            });
        }
        if !obj.shape.is_valid() {
            ok = false;
            out.push(Violation {
                objects: vec![obj.class],
                kind: ViolationKind::InvalidShape,
            });
        }
        if !obj.pose.is_finite() || !obj.pose.is_proper_rotation(ROTATION_TOLERANCE) {
            ok = false;
            out.push(Violation {
                objects: vec![obj.class],
                kind: ViolationKind::BadRotation,
            });
        }
        well_formed.push(ok);
    }

    for (i, a) in scene.objects.iter().enumerate() {
        if !well_formed[i] {
            continue;
        }
        let t = &a.pose.translation;
        if !scene.table.covers(t.x, t.y) {
            out.push(Violation {
                objects: vec![a.class],
                kind: ViolationKind::OffTable,
            });
        }
        let sink = -a.lowest_z();
        if sink > SUPPORT_TOLERANCE {
            out.push(Violation {
                objects: vec![a.class],
                kind: ViolationKind::BelowTable { depth: sink },
            });
        }
        for (j, b) in scene.objects.iter().enumerate().skip(i + 1) {
            if !well_formed[j] {
                continue;
            }
            let depth = collide::penetration_depth(a, b);
            if depth > INTERPENETRATION_TOLERANCE {
                out.push(Violation {
                    objects: vec![a.class, b.class],
                    kind: ViolationKind::Interpenetration { depth },
                });
            }
        }
    }
    out
}
