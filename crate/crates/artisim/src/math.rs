//! Small geometry helpers shared by the simulator and the learning stack.
//!
//! A [`Pose`] is a rigid transform stored as translation plus unit
//! quaternion. Composition follows the usual convention: `a.compose(&b)`
//! maps a point from `b`'s local frame through `b` then `a`.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};

/// Rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vector3::new(0.0, 0.0, 0.0),
        orientation: UnitQuaternion::new_unchecked(nalgebra::Quaternion::new(1.0, 0.0, 0.0, 0.0)),
    };

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Pose { position, orientation }
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Pose { position, orientation: UnitQuaternion::identity() }
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Pose { position: Vector3::zeros(), orientation }
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation * other.position,
            orientation: self.orientation * other.orientation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv_rot = self.orientation.inverse();
        Pose { position: -(inv_rot * self.position), orientation: inv_rot }
    }

    /// Map a point expressed in this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.orientation * p
    }

    /// Rotate a free vector (no translation).
    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * v
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.orientation.to_rotation_matrix().into_inner()
    }

    /// Linear position blend plus quaternion slerp, `t` in [0, 1].
    pub fn interpolate(&self, other: &Pose, t: f64) -> Pose {
        Pose {
            position: self.position.lerp(&other.position, t),
            orientation: self.orientation.slerp(&other.orientation, t),
        }
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Rotation vector (axis * angle) taking `from` to `to`: log(from^-1 * to).
pub fn rotation_vector_between(
    from: &UnitQuaternion<f64>,
    to: &UnitQuaternion<f64>,
) -> Vector3<f64> {
    (from.inverse() * to).scaled_axis()
}

/// Geodesic distance between two orientations, in radians.
pub fn rotation_angle_between(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    (a.inverse() * b).angle()
}

/// Unit quaternion from a rotation vector.
pub fn quat_from_rotvec(v: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*v)
}

/// Integrate a world-frame angular velocity over `dt` onto an orientation.
pub fn integrate_orientation(
    q: &UnitQuaternion<f64>,
    omega_world: &Vector3<f64>,
    dt: f64,
) -> UnitQuaternion<f64> {
    let dq = UnitQuaternion::from_scaled_axis(omega_world * dt);
    let out = dq * q;
    // Renormalize to keep drift out of long rollouts.
    UnitQuaternion::new_normalize(*out.quaternion())
}

/// Skew-symmetric cross-product matrix of `v`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inertia of a solid box with the given half extents, about its COM.
pub fn box_inertia(mass: f64, half: &Vector3<f64>) -> Matrix3<f64> {
    let (x2, y2, z2) = (half.x * half.x, half.y * half.y, half.z * half.z);
    let k = mass / 3.0;
    Matrix3::from_diagonal(&Vector3::new(k * (y2 + z2), k * (x2 + z2), k * (x2 + y2)))
}

/// Inertia of a solid sphere, about its COM.
pub fn sphere_inertia(mass: f64, radius: f64) -> Matrix3<f64> {
    let i = 0.4 * mass * radius * radius;
    Matrix3::from_diagonal(&Vector3::new(i, i, i))
}

/// Inertia of a solid cylinder along +x, about its COM.
pub fn cylinder_inertia_x(mass: f64, radius: f64, length: f64) -> Matrix3<f64> {
    let ix = 0.5 * mass * radius * radius;
    let iperp = mass * (3.0 * radius * radius + length * length) / 12.0;
    Matrix3::from_diagonal(&Vector3::new(ix, iperp, iperp))
}

/// Shift an inertia tensor from the COM to a point displaced by `r`.
pub fn parallel_axis(inertia_com: &Matrix3<f64>, mass: f64, r: &Vector3<f64>) -> Matrix3<f64> {
    let r2 = r.dot(r);
    inertia_com + mass * (Matrix3::identity() * r2 - r * r.transpose())
}

/// Axis helper: unit vector from components.
pub fn unit(x: f64, y: f64, z: f64) -> Unit<Vector3<f64>> {
    Unit::new_normalize(Vector3::new(x, y, z))
}

// ---------------------------------------------------------------------------
