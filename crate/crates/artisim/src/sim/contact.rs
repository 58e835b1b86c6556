//! Penalty contacts between spheres, boxes, and the table plane.
//!
//! Every contact produces a normal force `kp·depth + kd·depth_rate`
//! (clamped non-negative) plus viscous tangential friction capped by the
//! Coulomb cone. Both velocity-dependent terms are additionally capped by
//! the impulse that would zero the corresponding relative velocity in one
//! step, which keeps light links stable against stiff gains.

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use crate::math::Pose;

/// Collision primitive attached to a link, in that link's body frame.
#[derive(Clone, Debug)]
pub enum ColliderShape {
    Sphere { radius: f64 },
    Box { half: Vector3<f64> },
}

#[derive(Clone, Debug)]
pub struct Collider {
    /// Pose of the shape in the owning link's body frame.
    pub local: Pose,
    pub shape: ColliderShape,
}

/// Contact material and solver parameters.
#[derive(Clone, Copy, Debug)]
pub struct ContactParams {
    /// Normal penalty stiffness [N/m].
    pub kp: f64,
    /// Normal penalty damping [N·s/m].
    pub kd: f64,
    /// Coulomb friction coefficient.
    pub mu: f64,
    /// Tangential viscous gain [N·s/m] feeding the friction force.
    pub kt: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        ContactParams { kp: 5e3, kd: 50.0, mu: 0.8, kt: 1e3 }
    }
}

/// Geometric overlap between two shapes, before force resolution.
#[derive(Clone, Copy, Debug)]
pub struct ContactGeom {
    /// World contact point.
    pub point: Vector3<f64>,
    /// Unit normal pointing from body B toward body A.
    pub normal: Vector3<f64>,
    /// Penetration depth, ≥ 0.
    pub depth: f64,
}

/// Resolved contact: geometry plus the world force applied to body A at
/// `point` (body B receives the opposite force).
#[derive(Clone, Debug)]
pub struct ContactPoint {
    /// Scene-wide link id of body A (the first body of the query pair).
    pub link_a: usize,
    /// Scene-wide link id of body B, or `usize::MAX` for the static table.
    pub link_b: usize,
    pub point: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub depth: f64,
    pub force: Vector3<f64>,
}

impl ContactPoint {
    /// Magnitude of the normal component of the force on A.
    pub fn normal_force(&self) -> f64 {
        self.force.dot(&self.normal)
    }
}

// --- shape queries ---------------------------------------------------------

/// Sphere (center `c`, radius `r`) against the table plane z = 0.
pub fn sphere_plane(c: &Vector3<f64>, r: f64) -> Option<ContactGeom> {
    let depth = r - c.z;
    (depth > 0.0).then(|| ContactGeom {
        point: Vector3::new(c.x, c.y, c.z - r),
        normal: Vector3::z(),
        depth,
    })
}

/// Sphere A against sphere B; normal points from B to A.
pub fn sphere_sphere(
    ca: &Vector3<f64>,
    ra: f64,
    cb: &Vector3<f64>,
    rb: f64,
) -> Option<ContactGeom> {
    let d = ca - cb;
    let dist = d.norm();
    let depth = ra + rb - dist;
    if depth <= 0.0 {
        return None;
    }
    // Coincident centers: pick +z deterministically.
    let normal = if dist > 1e-12 { d / dist } else { Vector3::z() };
    Some(ContactGeom { point: cb + normal * (rb - 0.5 * depth), normal, depth })
}

/// Sphere A against an oriented box B; normal points from the box to the
/// sphere.
pub fn sphere_box(
    c: &Vector3<f64>,
    r: f64,
    box_pose: &Pose,
    half: &Vector3<f64>,
) -> Option<ContactGeom> {
    let local = box_pose.inverse().transform_point(c);
    let clamped = Vector3::new(
        local.x.clamp(-half.x, half.x),
        local.y.clamp(-half.y, half.y),
        local.z.clamp(-half.z, half.z),
    );
    let delta = local - clamped;
    let dist = delta.norm();
    if dist > 1e-12 {
        // Center outside the box.
        let depth = r - dist;
        if depth <= 0.0 {
            return None;
        }
        let n_local = delta / dist;
        Some(ContactGeom {
            point: box_pose.transform_point(&clamped),
            normal: box_pose.rotate_vector(&n_local),
            depth,
        })
    } else {
        // Center inside the box: exit along the least-penetrated face.
        let mut best_axis = 0;
        let mut best_gap = f64::INFINITY;
        let mut best_sign = 1.0;
        for k in 0..3 {
            let up = half[k] - local[k];
            let down = local[k] + half[k];
            if up < best_gap {
                best_gap = up;
                best_axis = k;
                best_sign = 1.0;
            }
            if down < best_gap {
                best_gap = down;
                best_axis = k;
                best_sign = -1.0;
            }
        }
        let mut n_local = Vector3::zeros();
        n_local[best_axis] = best_sign;
        let mut surface = local;
        surface[best_axis] = best_sign * half[best_axis];
        Some(ContactGeom {
            point: box_pose.transform_point(&surface),
            normal: box_pose.rotate_vector(&n_local),
            depth: r + best_gap,
        })
    }
}

/// Oriented box against the table plane z = 0: one contact per submerged
/// corner (up to 8) for stable resting.
pub fn box_plane(box_pose: &Pose, half: &Vector3<f64>) -> Vec<ContactGeom> {
    let mut out = Vec::new();
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = box_pose
                    .transform_point(&Vector3::new(sx * half.x, sy * half.y, sz * half.z));
                if corner.z < 0.0 {
                    out.push(ContactGeom {
                        point: corner,
                        normal: Vector3::z(),
                        depth: -corner.z,
                    });
                }
            }
        }
    }
    out
}

// --- force resolution ------------------------------------------------------

/// Mobility of one body at a contact: how much the contact point
/// accelerates per unit force, including the rotational contribution.
#[derive(Clone, Copy, Debug)]
pub struct ContactMobility {
    pub inv_mass: f64,
    /// Inverse world-frame rotational inertia about the COM.
    pub inv_inertia: Matrix3<f64>,
    pub com: Vector3<f64>,
}

impl ContactMobility {
    /// A static partner (table, welded base): infinite mass.
    pub const STATIC: ContactMobility = ContactMobility {
        inv_mass: 0.0,
        inv_inertia: Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        com: Vector3::new(0.0, 0.0, 0.0),
    };

    pub fn from_link(mass: f64, inertia_world: &Matrix3<f64>, com: Vector3<f64>) -> Self {
        let inv_inertia = inertia_world.try_inverse().unwrap_or_else(Matrix3::zeros);
        ContactMobility { inv_mass: if mass > 0.0 { 1.0 / mass } else { 0.0 }, inv_inertia, com }
    }

    /// Point-velocity change per unit impulse along `dir` at `point`.
    fn compliance(&self, point: &Vector3<f64>, dir: &Vector3<f64>) -> f64 {
        if self.inv_mass == 0.0 {
            return 0.0;
        }
        let r = point - self.com;
        let ang = self.inv_inertia * r.cross(dir);
        self.inv_mass + dir.dot(&ang.cross(&r))
    }
}

/// Effective mass of the contact pair along `dir` at `point`.
pub fn effective_mass(
    a: &ContactMobility,
    b: &ContactMobility,
    point: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> f64 {
    let k = a.compliance(point, dir) + b.compliance(point, dir);
    if k > 1e-12 {
        1.0 / k
    } else {
        1e12
    }
}

/// Turn a geometric overlap into a contact force on body A.
///
/// `vel_a`/`vel_b` are the world velocities of the contact point as carried
/// by each body. The velocity-dependent force terms are capped by the
/// impulse that would zero the corresponding relative velocity component in
/// one step, using the pair's contact-space effective mass — this is what
/// keeps stiff gains stable on light links and prevents frictional chatter.
/// `shared` is the number of simultaneous contacts between the same two
/// links; the caps are split between them so the combined impulse cannot
/// overshoot (e.g. a box resting on four corners pumps energy otherwise).
pub fn resolve_contact(
    geom: &ContactGeom,
    vel_a: &Vector3<f64>,
    vel_b: &Vector3<f64>,
    mob_a: &ContactMobility,
    mob_b: &ContactMobility,
    shared: f64,
    dt: f64,
    params: &ContactParams,
) -> Vector3<f64> {
    let v_rel = vel_a - vel_b;
    let vn = v_rel.dot(&geom.normal);
    // Approaching contact: depth grows, rate = -vn.
    let mut damping = params.kd * (-vn);
    // Cap the damping force so its impulse cannot reverse the normal
    // relative velocity within one step.
    let m_n = effective_mass(mob_a, mob_b, &geom.point, &geom.normal);
    let cap = m_n * vn.abs() / (dt * shared);
    damping = damping.clamp(-cap, cap);
    let fn_mag = (params.kp * geom.depth + damping).max(0.0);

    let v_t = v_rel - vn * geom.normal;
    let t_norm = v_t.norm();
    let mut f_t = -params.kt * v_t;
    let t_mag = f_t.norm();
    if t_mag > 0.0 && t_norm > 0.0 {
        // Coulomb cone plus the slip-zeroing impulse cap.
        let m_t = effective_mass(mob_a, mob_b, &geom.point, &(v_t / t_norm));
        let t_cap = (params.mu * fn_mag).min(m_t * t_norm / (dt * shared));
        if t_mag > t_cap {
            f_t *= t_cap / t_mag;
        }
    }
    fn_mag * geom.normal + f_t
}

/// World pose of a collider given its owning link pose.
pub fn collider_world(link_pose: &Pose, collider: &Collider) -> Pose {
    link_pose.compose(&collider.local)
}

/// Convenience: world center of a sphere collider.
pub fn sphere_center(link_pose: &Pose, collider: &Collider) -> Vector3<f64> {
    link_pose.compose(&collider.local).position
}

/// Quaternion sanity helper used by file loaders.
pub fn is_unit_quaternion(q: &UnitQuaternion<f64>) -> bool {
    (q.coords.norm() - 1.0).abs() < 1e-6
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Translational-only mobility of a body with the given mass.
    fn mob(mass: f64) -> ContactMobility {
        ContactMobility { inv_mass: 1.0 / mass, inv_inertia: Matrix3::zeros(), com: Vector3::zeros() }
    }

    #[test]
    fn sphere_plane_depth_and_point() {
        let g = sphere_plane(&Vector3::new(0.1, 0.2, 0.005), 0.008).unwrap();
        assert_relative_eq!(g.depth, 0.003, epsilon = 1e-12);
        assert_relative_eq!(g.point, Vector3::new(0.1, 0.2, -0.003), epsilon = 1e-12);
        assert!(sphere_plane(&Vector3::new(0.0, 0.0, 0.02), 0.008).is_none());
    }

    #[test]
    fn sphere_box_face_contact() {
        let pose = Pose::from_position(Vector3::new(0.0, 0.0, 0.0));
        let half = Vector3::new(0.05, 0.05, 0.04);
        // Sphere just touching the +x face.
        let g = sphere_box(&Vector3::new(0.055, 0.0, 0.0), 0.008, &pose, &half).unwrap();
        assert_relative_eq!(g.normal, Vector3::x(), epsilon = 1e-12);
        assert_relative_eq!(g.depth, 0.003, epsilon = 1e-12);
        assert_relative_eq!(g.point, Vector3::new(0.05, 0.0, 0.0), epsilon = 1e-12);
        // Rotated box: same contact expressed in world.
        let rot = Pose::from_rotation(UnitQuaternion::from_euler_angles(0.0, 0.0, 0.5));
        let center_world = rot.transform_point(&Vector3::new(0.055, 0.0, 0.0));
        let g2 = sphere_box(&center_world, 0.008, &rot, &half).unwrap();
        assert_relative_eq!(g2.depth, 0.003, epsilon = 1e-12);
        assert_relative_eq!(g2.normal, rot.rotate_vector(&Vector3::x()), epsilon = 1e-12);
    }

    #[test]
    fn sphere_box_center_inside_pushes_out_nearest_face() {
        let pose = Pose::IDENTITY;
        let half = Vector3::new(0.05, 0.05, 0.04);
        let g = sphere_box(&Vector3::new(0.048, 0.0, 0.0), 0.008, &pose, &half).unwrap();
        assert_relative_eq!(g.normal, Vector3::x(), epsilon = 1e-12);
        assert_relative_eq!(g.depth, 0.002 + 0.008, epsilon = 1e-12);
    }

    #[test]
    fn box_plane_corner_contacts() {
        let pose = Pose::from_position(Vector3::new(0.0, 0.0, 0.035));
        let half = Vector3::new(0.05, 0.05, 0.04);
        let contacts = box_plane(&pose, &half);
        assert_eq!(contacts.len(), 4);
        for c in &contacts {
            assert_relative_eq!(c.depth, 0.005, epsilon = 1e-12);
            assert_relative_eq!(c.normal, Vector3::z(), epsilon = 1e-12);
        }
    }

    #[test]
    fn normal_force_never_adhesive() {
        let geom = ContactGeom { point: Vector3::zeros(), normal: Vector3::z(), depth: 1e-4 };
        let params = ContactParams::default();
        // Fast separation: damping would exceed the spring; force clamps to 0.
        let f = resolve_contact(
            &geom,
            &Vector3::new(0.0, 0.0, 5.0),
            &Vector3::zeros(),
            &mob(0.03),
            &ContactMobility::STATIC,
            1.0,
            2.5e-3,
            &params,
        );
        assert!(f.dot(&geom.normal) >= 0.0);
        assert_relative_eq!(f.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn friction_stays_inside_cone() {
        let geom = ContactGeom { point: Vector3::zeros(), normal: Vector3::z(), depth: 2e-3 };
        let params = ContactParams::default();
        let f = resolve_contact(
            &geom,
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::zeros(),
            &mob(10.0),
            &ContactMobility::STATIC,
            1.0,
            2.5e-3,
            &params,
        );
        let fn_mag = f.dot(&geom.normal);
        let ft = f - fn_mag * geom.normal;
        assert!(ft.norm() <= params.mu * fn_mag + 1e-9);
        // Friction opposes sliding.
        assert!(ft.x < 0.0);
    }

    #[test]
    fn damping_impulse_capped_for_light_bodies() {
        let geom = ContactGeom { point: Vector3::zeros(), normal: Vector3::z(), depth: 1e-3 };
        let params = ContactParams::default();
        let m = 0.005;
        let dt = 2.5e-3;
        let vn = -0.5; // approaching fast
        let f = resolve_contact(
            &geom,
            &Vector3::new(0.0, 0.0, vn),
            &Vector3::zeros(),
            &mob(m),
            &ContactMobility::STATIC,
            1.0,
            dt,
            &params,
        );
        let spring = params.kp * geom.depth;
        let cap = m * vn.abs() / dt;
        assert!(f.dot(&geom.normal) <= spring + cap + 1e-9);
    }
}
