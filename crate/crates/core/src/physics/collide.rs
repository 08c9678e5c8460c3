//! Contact generation between primitive shapes.
//!
//! Spheres are handled analytically. Boxes and cylinders are tested by
//! checking their sample points against the other solid, which yields a
//! multi-point manifold for resting contact without a general
//! convex-convex routine.

use nalgebra::Vector3;

use super::body::RigidBody;
use crate::scene::{SceneObject, Shape, Table};

/// What a body touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Other {
    Body(usize),
    Table,
    Floor,
}

/// A contact on body `a`. `normal` points toward `a`; `depth` is positive
/// for penetration and negative for a speculative gap.
#[derive(Clone, Debug)]
pub(crate) struct Contact {
    pub a: usize,
    pub other: Other,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub depth: f64,
    /// Which sample point produced the contact, stable across steps.
    pub feature: u32,
}

/// Signed contact of a body-frame point with a solid: `(depth, outward
/// normal)`, if the point is inside or within `margin` of the surface.
pub(crate) fn point_contact(
    shape: &Shape,
    p: &Vector3<f64>,
    margin: f64,
) -> Option<(f64, Vector3<f64>)> {
    match *shape {
        Shape::Sphere { radius } => {
            let d = p.norm();
            if d > radius + margin {
                return None;
            }
            let n = if d > 0.0 { p / d } else { Vector3::z() };
            Some((radius - d, n))
        }
        Shape::Box { half_extents: h } => {
            let q = Vector3::new(
                p.x.clamp(-h[0], h[0]),
                p.y.clamp(-h[1], h[1]),
                p.z.clamp(-h[2], h[2]),
            );
            if q == *p {
                let mut axis = 0;
                let mut depth = f64::INFINITY;
                for i in 0..3 {
                    let d = h[i] - p[i].abs();
                    if d < depth {
                        depth = d;
                        axis = i;
                    }
                }
                let mut n = Vector3::zeros();
                n[axis] = if p[axis] < 0.0 { -1.0 } else { 1.0 };
                Some((depth, n))
            } else {
                outside(p - q, margin)
            }
        }
        Shape::Cylinder { radius, height } => {
            let hh = height / 2.0;
            let rho = p.x.hypot(p.y);
            let radial = if rho > 0.0 {
                Vector3::new(p.x / rho, p.y / rho, 0.0)
            } else {
                Vector3::x()
            };
            let axial = Vector3::new(0.0, 0.0, if p.z < 0.0 { -1.0 } else { 1.0 });
            if rho <= radius && p.z.abs() <= hh {
                let d_rad = radius - rho;
                let d_ax = hh - p.z.abs();
                if d_ax <= d_rad {
                    Some((d_ax, axial))
                } else {
                    Some((d_rad, radial))
                }
            } else {
                let q_rho = rho.min(radius);
                let q = Vector3::new(radial.x * q_rho, radial.y * q_rho, p.z.clamp(-hh, hh));
                outside(p - q, margin)
            }
        }
    }
}

fn outside(diff: Vector3<f64>, margin: f64) -> Option<(f64, Vector3<f64>)> {
    let dist = diff.norm();
    (dist <= margin).then(|| (-dist, diff / dist))
}

/// Closest point of a solid to a body-frame point outside it, or `None`
/// when the point is inside.
fn closest_surface_point(shape: &Shape, p: &Vector3<f64>) -> Option<Vector3<f64>> {
    match *shape {
        Shape::Sphere { radius } => {
            let d = p.norm();
            (d > radius).then(|| p * (radius / d))
        }
        Shape::Box { half_extents: h } => {
            let q = Vector3::new(
                p.x.clamp(-h[0], h[0]),
                p.y.clamp(-h[1], h[1]),
                p.z.clamp(-h[2], h[2]),
            );
            (q != *p).then_some(q)
        }
        Shape::Cylinder { radius, height } => {
            let hh = height / 2.0;
            let rho = p.x.hypot(p.y);
            if rho <= radius && p.z.abs() <= hh {
                return None;
            }
            let s = if rho > radius { radius / rho } else { 1.0 };
            Some(Vector3::new(p.x * s, p.y * s, p.z.clamp(-hh, hh)))
        }
    }
}

/// Sphere of `radius` centered at body-frame `c` against a solid. Returns
/// `(depth, outward normal, surface point)` in the body frame.
fn sphere_against(
    shape: &Shape,
    c: &Vector3<f64>,
    radius: f64,
    margin: f64,
) -> Option<(f64, Vector3<f64>, Vector3<f64>)> {
    match closest_surface_point(shape, c) {
        Some(q) => {
            let diff = c - q;
            let dist = diff.norm();
            (dist <= radius + margin).then(|| (radius - dist, diff / dist, q))
        }
        None => {
            let (depth, n) = point_contact(shape, c, 0.0)?;
            Some((depth + radius, n, c - n * depth))
        }
    }
}

/// Contacts of body `ia` with the static table box.
pub(crate) fn against_table(
    bodies: &[RigidBody],
    ia: usize,
    table: &Table,
    margin: f64,
    out: &mut Vec<Contact>,
) {
    let a = &bodies[ia];
    let center = table.center();
    let table_shape = Shape::Box {
        half_extents: table.half_extents,
    };
    let rel = a.position - center;
    let h = table.half_extents;
    let reach = a.bounding_radius + margin;
    if rel.x.abs() > h[0] + reach || rel.y.abs() > h[1] + reach || rel.z.abs() > h[2] + reach {
        return;
    }
    match a.shape {
        Shape::Sphere { radius } => {
            if let Some((depth, n, q)) = sphere_against(&table_shape, &rel, radius, margin) {
                out.push(Contact {
                    a: ia,
                    other: Other::Table,
                    point: q + center,
                    normal: n,
                    depth,
                    feature: 0,
                });
            }
        }
        _ => {
            for (k, p) in a.points.hull.iter().enumerate() {
                let w = a.to_world(p);
                if let Some((depth, n)) = point_contact(&table_shape, &(w - center), margin) {
                    out.push(Contact {
                        a: ia,
                        other: Other::Table,
                        point: w,
                        normal: n,
                        depth,
                        feature: k as u32,
                    });
                }
            }
        }
    }
}

/// Contacts of body `ia` with the floor plane `z = floor_z`.
pub(crate) fn against_floor(
    bodies: &[RigidBody],
    ia: usize,
    floor_z: f64,
    margin: f64,
    out: &mut Vec<Contact>,
) {
    let a = &bodies[ia];
    if a.position.z - a.bounding_radius > floor_z + margin {
        return;
    }
    let mut push = |point: Vector3<f64>, depth: f64, feature: usize| {
        out.push(Contact {
            a: ia,
            other: Other::Floor,
            point,
            normal: Vector3::z(),
            depth,
            feature: feature as u32,
        })
    };
    match a.shape {
        Shape::Sphere { radius } => {
            let depth = floor_z - (a.position.z - radius);
            if depth >= -margin {
                push(
                    Vector3::new(a.position.x, a.position.y, a.position.z - radius),
                    depth,
                    0,
                );
            }
        }
        _ => {
            for (k, p) in a.points.hull.iter().enumerate() {
                let w = a.to_world(p);
                let depth = floor_z - w.z;
                if depth >= -margin {
                    push(w, depth, k);
                }
            }
        }
    }
}

/// Contacts between two dynamic bodies, stored on `ia` with normals
/// pointing from `ib` toward `ia`.
pub(crate) fn between(
    bodies: &[RigidBody],
    ia: usize,
    ib: usize,
    margin: f64,
    out: &mut Vec<Contact>,
) {
    let a = &bodies[ia];
    let b = &bodies[ib];
    if (a.position - b.position).norm() > a.bounding_radius + b.bounding_radius + margin {
        return;
    }
    let other = Other::Body(ib);
    match (a.shape, b.shape) {
        (Shape::Sphere { radius: ra }, Shape::Sphere { radius: rb }) => {
            let d = a.position - b.position;
            let dist = d.norm();
            if dist <= ra + rb + margin {
                let n = if dist > 0.0 { d / dist } else { Vector3::z() };
                out.push(Contact {
                    a: ia,
                    other,
                    point: b.position + n * rb,
                    normal: n,
                    depth: ra + rb - dist,
                    feature: 0,
                });
            }
        }
        (Shape::Sphere { radius }, _) => {
            let c = b.to_local(&a.position);
            if let Some((depth, n, q)) = sphere_against(&b.shape, &c, radius, margin) {
                out.push(Contact {
                    a: ia,
                    other,
                    point: b.to_world(&q),
                    normal: b.rotation * n,
                    depth,
                    feature: 0,
                });
            }
        }
        (_, Shape::Sphere { radius }) => {
            let c = a.to_local(&b.position);
            if let Some((depth, n, q)) = sphere_against(&a.shape, &c, radius, margin) {
                out.push(Contact {
                    a: ia,
                    other,
                    point: a.to_world(&q),
                    normal: -(a.rotation * n),
                    depth,
                    feature: 0,
                });
            }
        }
        _ => {
            for (k, p) in a.points.probes.iter().enumerate() {
                let w = a.to_world(p);
                if let Some((depth, n)) = point_contact(&b.shape, &b.to_local(&w), margin) {
                    out.push(Contact {
                        a: ia,
                        other,
                        point: w,
                        normal: b.rotation * n,
                        depth,
                        feature: k as u32,
                    });
                }
            }
            for (k, p) in b.points.probes.iter().enumerate() {
                let w = b.to_world(p);
                if let Some((depth, n)) = point_contact(&a.shape, &a.to_local(&w), margin) {
                    out.push(Contact {
                        a: ia,
                        other,
                        point: w,
                        normal: -(a.rotation * n),
                        depth,
                        feature: (1 << 16) + k as u32,
                    });
                }
            }
        }
    }
}

/// Deepest penetration between two scene objects, or 0 if they are apart.
pub fn penetration_depth(a: &SceneObject, b: &SceneObject) -> f64 {
    let bodies = [RigidBody::from_object(a), RigidBody::from_object(b)];
    let mut contacts = Vec::new();
    between(&bodies, 0, 1, 0.0, &mut contacts);
    contacts.iter().map(|c| c.depth).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ObjectClass;
    use crate::scene::{rotation_z, Pose};
    use approx::assert_relative_eq;

    fn object(shape: Shape, at: Vector3<f64>) -> SceneObject {
        SceneObject {
            class: ObjectClass::FoamBrick,
            shape,
            mass: 1.0,
            pose: Pose::new(at, rotation_z(0.0)),
        }
    }

    #[test]
    fn box_point_picks_nearest_face() {
        let shape = Shape::Box {
            half_extents: [1.0, 1.0, 0.1],
        };
        let (d, n) = point_contact(&shape, &Vector3::new(0.2, 0.3, 0.08), 0.0).unwrap();
        assert_relative_eq!(d, 0.02, epsilon = 1e-12);
        assert_eq!(n, Vector3::z());
        let (d, n) = point_contact(&shape, &Vector3::new(1.005, 0.0, 0.0), 0.01).unwrap();
        assert_relative_eq!(d, -0.005, epsilon = 1e-12);
        assert_eq!(n, Vector3::x());
        assert!(point_contact(&shape, &Vector3::new(1.05, 0.0, 0.0), 0.01).is_none());
    }

    #[test]
    fn cylinder_point_radial_and_axial() {
        let shape = Shape::Cylinder {
            radius: 1.0,
            height: 4.0,
        };
        let (d, n) = point_contact(&shape, &Vector3::new(0.0, 0.9, 0.0), 0.0).unwrap();
        assert_relative_eq!(d, 0.1, epsilon = 1e-12);
        assert_relative_eq!(n, Vector3::y(), epsilon = 1e-12);
        let (d, n) = point_contact(&shape, &Vector3::new(0.0, 0.0, -1.95), 0.0).unwrap();
        assert_relative_eq!(d, 0.05, epsilon = 1e-12);
        assert_eq!(n, -Vector3::z());
    }

    #[test]
    fn sphere_sphere_depth_is_overlap() {
        let a = object(Shape::Sphere { radius: 0.5 }, Vector3::zeros());
        let b = object(Shape::Sphere { radius: 0.5 }, Vector3::new(0.9, 0.0, 0.0));
        assert_relative_eq!(penetration_depth(&a, &b), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn sphere_resting_on_box_top() {
        let a = object(Shape::Sphere { radius: 0.1 }, Vector3::new(0.0, 0.0, 0.195));
        let b = object(
            Shape::Box {
                half_extents: [0.5, 0.5, 0.1],
            },
            Vector3::zeros(),
        );
        assert_relative_eq!(penetration_depth(&a, &b), 0.005, epsilon = 1e-12);
        assert_relative_eq!(penetration_depth(&b, &a), 0.005, epsilon = 1e-12);
    }

    #[test]
    fn separated_boxes_do_not_touch() {
        let shape = Shape::Box {
            half_extents: [0.1, 0.1, 0.1],
        };
        let a = object(shape, Vector3::zeros());
        let b = object(shape, Vector3::new(0.21, 0.0, 0.0));
        assert_eq!(penetration_depth(&a, &b), 0.0);
        let b = object(shape, Vector3::new(0.19, 0.05, 0.05));
        assert_relative_eq!(penetration_depth(&a, &b), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn crossed_edges_are_detected() {
        // Two long thin boxes crossing at right angles; no vertex of either
        // lies inside the other, only edge samples do.
        let long_x = Shape::Box {
            half_extents: [0.4, 0.02, 0.02],
        };
        let a = object(long_x, Vector3::zeros());
        let mut b = object(long_x, Vector3::new(0.0, 0.0, 0.035));
        b.pose.rotation = rotation_z(std::f64::consts::FRAC_PI_2);
        assert!(penetration_depth(&a, &b) > 0.0);
    }
}
