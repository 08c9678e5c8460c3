use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::catalog::ObjectClass;
use crate::scene::{Pose, SceneObject, Shape};

const RIM_SEGMENTS: usize = 16;
const EDGE_SAMPLES: usize = 3;
const SIDE_SAMPLES: usize = 3;

/// Body-frame sample points used by the point-versus-solid collision
/// tests. `hull` is enough against flat static geometry; `probes` adds
/// points along edges so that edge-on-edge contacts between objects are
/// caught too.
#[derive(Debug)]
pub(crate) struct SamplePoints {
    pub hull: Vec<Vector3<f64>>,
    pub probes: Vec<Vector3<f64>>,
}

impl SamplePoints {
    fn for_shape(shape: &Shape) -> SamplePoints {
        match *shape {
            Shape::Sphere { .. } => SamplePoints {
                hull: Vec::new(),
                probes: Vec::new(),
            },
            Shape::Box { half_extents: h } => {
                let h = Vector3::from(h);
                let mut hull = Vec::with_capacity(8);
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            hull.push(Vector3::new(sx * h.x, sy * h.y, sz * h.z));
                        }
                    }
                }
                let mut probes = hull.clone();
                for (i, a) in hull.iter().enumerate() {
                    for b in &hull[i + 1..] {
                        // Edges differ in exactly one coordinate.
                        let differing = (a - b).iter().filter(|d| d.abs() > 0.0).count();
                        if differing != 1 {
                            continue;
                        }
                        for k in 1..=EDGE_SAMPLES {
                            let s = k as f64 / (EDGE_SAMPLES + 1) as f64;
                            probes.push(a + (b - a) * s);
                        }
                    }
                }
                SamplePoints { hull, probes }
            }
            Shape::Cylinder { radius, height } => {
                let hh = height / 2.0;
                let ring: Vec<(f64, f64)> = (0..RIM_SEGMENTS)
                    .map(|k| {
                        let a = TAU * k as f64 / RIM_SEGMENTS as f64;
                        (radius * a.cos(), radius * a.sin())
                    })
                    .collect();
                let mut hull = Vec::with_capacity(2 * RIM_SEGMENTS);
                for z in [-hh, hh] {
                    hull.extend(ring.iter().map(|&(x, y)| Vector3::new(x, y, z)));
                }
                let mut probes = hull.clone();
                for &(x, y) in &ring {
                    for k in 1..=SIDE_SAMPLES {
                        let z = -hh + height * k as f64 / (SIDE_SAMPLES + 1) as f64;
                        probes.push(Vector3::new(x, y, z));
                    }
                }
                probes.push(Vector3::new(0.0, 0.0, -hh));
                probes.push(Vector3::new(0.0, 0.0, hh));
                SamplePoints { hull, probes }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct RigidBody {
    pub class: ObjectClass,
    pub shape: Shape,
    pub mass: f64,
    pub inv_mass: f64,
    pub inv_inertia_body: Vector3<f64>,
    pub inertia_body: Vector3<f64>,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
    pub linear_velocity: Vector3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub rotation: Matrix3<f64>,
    pub inv_inertia_world: Matrix3<f64>,
    pub bounding_radius: f64,
    pub points: Arc<SamplePoints>,
}

impl RigidBody {
    pub fn from_object(obj: &SceneObject) -> RigidBody {
        let inertia = obj.shape.principal_inertia(obj.mass);
        let orientation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(
            obj.pose.rotation,
        ));
        let mut body = RigidBody {
            class: obj.class,
            shape: obj.shape,
            mass: obj.mass,
            inv_mass: 1.0 / obj.mass,
            inertia_body: inertia,
            inv_inertia_body: inertia.map(|v| 1.0 / v),
            position: obj.pose.translation,
            orientation,
            linear_velocity: Vector3::zeros(),
            angular_velocity: Vector3::zeros(),
            rotation: Matrix3::identity(),
            inv_inertia_world: Matrix3::identity(),
            bounding_radius: obj.shape.bounding_radius(),
            points: Arc::new(SamplePoints::for_shape(&obj.shape)),
        };
        body.refresh();
        body
    }

    /// Recomputes the cached rotation matrix and world inverse inertia.
    pub fn refresh(&mut self) {
        self.rotation = self.orientation.to_rotation_matrix().into_inner();
        self.inv_inertia_world = self.rotation
            * Matrix3::from_diagonal(&self.inv_inertia_body)
            * self.rotation.transpose();
    }

    pub fn inertia_world(&self) -> Matrix3<f64> {
        self.rotation * Matrix3::from_diagonal(&self.inertia_body) * self.rotation.transpose()
    }

    pub fn pose(&self) -> Pose {
        Pose::new(self.position, self.rotation)
    }

    pub fn to_world(&self, local: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation * local
    }

    pub fn to_local(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (world - self.position)
    }

    /// Upper bound on the speed of any point of the body.
    pub fn max_point_speed(&self) -> f64 {
        self.linear_velocity.norm() + self.angular_velocity.norm() * self.bounding_radius
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.mass * self.linear_velocity.norm_squared()
            + 0.5
                * self
                    .angular_velocity
                    .dot(&(self.inertia_world() * self.angular_velocity))
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain(self.linear_velocity.iter())
            .chain(self.angular_velocity.iter())
            .chain(self.orientation.coords.iter())
            .all(|v| v.is_finite())
    }
}
