//! Sequential-impulse contact solver.
//!
//! Velocities are solved with accumulated, clamped impulses (normal
//! impulses non-negative, friction inside the Coulomb box). Penetration is
//! removed by a separate pseudo-velocity pass that moves bodies without
//! feeding momentum back into the real velocities.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::body::RigidBody;
use super::collide::{Contact, Other};
use super::SimConfig;

/// Warm-start key: the body, what it touches, and the sample point.
pub(crate) type FeatureKey = (usize, Other, u32);

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Cached {
    pub normal: f64,
    pub friction: Vector3<f64>,
}

struct Row {
    a: usize,
    b: Option<usize>,
    ra: Vector3<f64>,
    rb: Vector3<f64>,
    n: Vector3<f64>,
    t1: Vector3<f64>,
    t2: Vector3<f64>,
    kn: f64,
    kt1: f64,
    kt2: f64,
    mu: f64,
    target: f64,
    bias: f64,
    ln: f64,
    lt1: f64,
    lt2: f64,
    lp: f64,
}

fn body_of(other: Other) -> Option<usize> {
    match other {
        Other::Body(b) => Some(b),
        _ => None,
    }
}

fn any_perpendicular(n: &Vector3<f64>) -> Vector3<f64> {
    let helper = if n.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    n.cross(&helper).normalize()
}

fn effective_mass(bodies: &[RigidBody], row: &Row, dir: &Vector3<f64>) -> f64 {
    let a = &bodies[row.a];
    let ca = row.ra.cross(dir);
    let mut k = a.inv_mass + ca.dot(&(a.inv_inertia_world * ca));
    if let Some(b) = row.b {
        let b = &bodies[b];
        let cb = row.rb.cross(dir);
        k += b.inv_mass + cb.dot(&(b.inv_inertia_world * cb));
    }
    k
}

fn relative_velocity(v: &[(Vector3<f64>, Vector3<f64>)], row: &Row) -> Vector3<f64> {
    let (la, wa) = &v[row.a];
    let mut rel = la + wa.cross(&row.ra);
    if let Some(b) = row.b {
        let (lb, wb) = &v[b];
        rel -= lb + wb.cross(&row.rb);
    }
    rel
}

fn apply(
    v: &mut [(Vector3<f64>, Vector3<f64>)],
    bodies: &[RigidBody],
    row: &Row,
    impulse: Vector3<f64>,
) {
    let a = &bodies[row.a];
    v[row.a].0 += impulse * a.inv_mass;
    v[row.a].1 += a.inv_inertia_world * row.ra.cross(&impulse);
    if let Some(ib) = row.b {
        let b = &bodies[ib];
        v[ib].0 -= impulse * b.inv_mass;
        v[ib].1 -= b.inv_inertia_world * row.rb.cross(&impulse);
    }
}

pub(crate) struct Outcome {
    /// Accumulated normal impulse per contact, in input order.
    pub normal_impulses: Vec<f64>,
    /// Position-correction velocities to add during integration only.
    pub pseudo: Vec<(Vector3<f64>, Vector3<f64>)>,
}

/// Resolves `contacts` in place on the bodies' velocities.
pub(crate) fn solve(
    bodies: &mut [RigidBody],
    contacts: &[Contact],
    friction: &[f64],
    warm: &mut HashMap<FeatureKey, Cached>,
    cfg: &SimConfig,
) -> Outcome {
    let mut vel: Vec<(Vector3<f64>, Vector3<f64>)> = bodies
        .iter()
        .map(|b| (b.linear_velocity, b.angular_velocity))
        .collect();

    let mut rows: Vec<Row> = Vec::with_capacity(contacts.len());
    for (c, &mu) in contacts.iter().zip(friction) {
        let b = body_of(c.other);
        let mut row = Row {
            a: c.a,
            b,
            ra: c.point - bodies[c.a].position,
            rb: b.map_or_else(Vector3::zeros, |b| c.point - bodies[b].position),
            n: c.normal,
            t1: Vector3::zeros(),
            t2: Vector3::zeros(),
            kn: 0.0,
            kt1: 0.0,
            kt2: 0.0,
            mu,
            target: 0.0,
            bias: 0.0,
            ln: 0.0,
            lt1: 0.0,
            lt2: 0.0,
            lp: 0.0,
        };
        let rel = relative_velocity(&vel, &row);
        let vn = rel.dot(&row.n);
        let vt = rel - row.n * vn;
        row.t1 = if vt.norm() > 1e-9 {
            vt.normalize()
        } else {
            any_perpendicular(&row.n)
        };
        row.t2 = row.n.cross(&row.t1);
        row.kn = effective_mass(bodies, &row, &row.n);
        row.kt1 = effective_mass(bodies, &row, &row.t1);
        row.kt2 = effective_mass(bodies, &row, &row.t2);
        row.target = if c.depth < 0.0 {
            // Speculative: the gap may close this step but not overshoot.
            c.depth / cfg.dt
        } else if vn < -cfg.restitution_threshold {
            -cfg.restitution * vn
        } else {
            0.0
        };
        row.bias = cfg.position_correction * (c.depth - cfg.slop).max(0.0) / cfg.dt;
        rows.push(row);
    }

    if cfg.warm_start {
        for (row, c) in rows.iter_mut().zip(contacts) {
            if let Some(w) = warm.get(&(c.a, c.other, c.feature)) {
                row.ln = w.normal;
                let limit = row.mu * row.ln;
                row.lt1 = w.friction.dot(&row.t1).clamp(-limit, limit);
                row.lt2 = w.friction.dot(&row.t2).clamp(-limit, limit);
                let impulse = row.n * row.ln + row.t1 * row.lt1 + row.t2 * row.lt2;
                apply(&mut vel, bodies, row, impulse);
            }
        }
    }

    for _ in 0..cfg.iterations {
        for row in rows.iter_mut() {
            if row.mu > 0.0 && row.ln > 0.0 {
                let limit = row.mu * row.ln;
                for axis in 0..2 {
                    let (t, k, old) = if axis == 0 {
                        (row.t1, row.kt1, row.lt1)
                    } else {
                        (row.t2, row.kt2, row.lt2)
                    };
                    let vt = relative_velocity(&vel, row).dot(&t);
                    let acc = (old - vt / k).clamp(-limit, limit);
                    if axis == 0 {
                        row.lt1 = acc;
                    } else {
                        row.lt2 = acc;
                    }
                    let delta = acc - old;
                    if delta != 0.0 {
                        apply(&mut vel, bodies, row, t * delta);
                    }
                }
            }
            let vn = relative_velocity(&vel, row).dot(&row.n);
            let old = row.ln;
            row.ln = (old + (row.target - vn) / row.kn).max(0.0);
            let delta = row.ln - old;
            if delta != 0.0 {
                apply(&mut vel, bodies, row, row.n * delta);
            }
        }
    }

    let mut pseudo = vec![(Vector3::zeros(), Vector3::zeros()); bodies.len()];
    if rows.iter().any(|r| r.bias > 0.0) {
        for _ in 0..cfg.iterations {
            for row in rows.iter_mut().filter(|r| r.bias > 0.0) {
                let vn = relative_velocity(&pseudo, row).dot(&row.n);
                let old = row.lp;
                row.lp = (old + (row.bias - vn) / row.kn).max(0.0);
                let delta = row.lp - old;
                if delta != 0.0 {
                    apply(&mut pseudo, bodies, row, row.n * delta);
                }
            }
        }
    }

    warm.clear();
    for (row, c) in rows.iter().zip(contacts) {
        if row.ln > 0.0 {
            warm.insert(
                (c.a, c.other, c.feature),
                Cached {
                    normal: row.ln,
                    friction: row.t1 * row.lt1 + row.t2 * row.lt2,
                },
            );
        }
    }

    for (body, (v, w)) in bodies.iter_mut().zip(vel) {
        body.linear_velocity = v;
        body.angular_velocity = w;
    }
    Outcome {
        normal_impulses: rows.iter().map(|r| r.ln).collect(),
        pseudo,
    }
}
