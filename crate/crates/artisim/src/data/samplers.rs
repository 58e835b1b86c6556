//! Target samplers: goal poses and angles derived from a reference pose.
//!
//! One captured reference is stretched into many training/evaluation goals
//! by perturbing where the object should end up. All samplers draw a fixed
//! number of values per sample in a fixed order, so outputs are pure in
//! (rng seed, n) and a shorter run is a prefix of a longer one.

use nalgebra::{UnitQuaternion, Vector3};
use rand::Rng;

use crate::math::Pose;

/// Default number of relocation goals generated per grasp reference.
pub const DEFAULT_GRASP_TARGETS: usize = 30;

/// Relocation goals for grasp training: the object is to be carried to a
/// pose offset from `initial` by x, y ~ U[-0.15, 0.15], a lift of
/// z ~ U[0.15, 0.45], and an orientation nudge of up to 0.3 rad per axis.
pub fn sample_grasp_targets(initial: &Pose, n: usize, rng: &mut impl Rng) -> Vec<Pose> {
    (0..n)
        .map(|_| {
            let dx = rng.gen_range(-0.15..=0.15);
            let dy = rng.gen_range(-0.15..=0.15);
            let dz = rng.gen_range(0.15..=0.45);
            let rot = Vector3::new(
                rng.gen_range(-0.3..=0.3),
                rng.gen_range(-0.3..=0.3),
                rng.gen_range(-0.3..=0.3),
            );
            Pose::new(
                initial.position + Vector3::new(dx, dy, dz),
                UnitQuaternion::from_scaled_axis(rot) * initial.orientation,
            )
        })
        .collect()
}

/// Articulation goal angles [rad]: a fixed ladder, not sampled, so success
/// rates at each opening width are directly comparable across runs.
pub fn articulation_target_angles() -> [f64; 5] {
    [0.5, 0.75, 1.0, 1.25, 1.5]
}

/// Combined goal for the full manipulation task: where the object should
/// be placed and how far its hinge should then be opened.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskTarget {
    pub pose: Pose,
    /// Hinge angle to reach after placement [rad].
    pub angle: f64,
}

/// Placement-plus-articulation goals: the object slides across the table
/// (x, y ~ U[-0.1, -0.05], no lift) with a yaw of up to 0.4 rad, then the
/// hinge opens to an angle ~ U[0.5, 0.6].
pub fn sample_task_targets(initial: &Pose, n: usize, rng: &mut impl Rng) -> Vec<TaskTarget> {
    (0..n)
        .map(|_| {
            let dx = rng.gen_range(-0.1..=-0.05);
            let dy = rng.gen_range(-0.1..=-0.05);
            let yaw = rng.gen_range(-0.4..=0.4);
            let angle = rng.gen_range(0.5..=0.6);
            TaskTarget {
                pose: Pose::new(
                    initial.position + Vector3::new(dx, dy, 0.0),
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
                        * initial.orientation,
                ),
                angle,
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rest() -> Pose {
        Pose::from_position(Vector3::new(0.0, 0.0, 0.03))
    }

    #[test]
    fn grasp_targets_stay_in_their_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let targets = sample_grasp_targets(&rest(), 200, &mut rng);
        assert_eq!(targets.len(), 200);
        for t in &targets {
            assert!(t.position.x.abs() <= 0.15);
            assert!(t.position.y.abs() <= 0.15);
            assert!(t.position.z >= 0.18 && t.position.z <= 0.48);
            let tilt = t.orientation.angle();
            // Per-axis noise of 0.3 rad bounds the total rotation by its norm.
            assert!(tilt <= 0.3 * 3f64.sqrt() + 1e-12);
        }
        // The box is actually explored, not collapsed to a point.
        let zs: Vec<f64> = targets.iter().map(|t| t.position.z).collect();
        let spread = zs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - zs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.2);
    }

    #[test]
    fn task_targets_keep_table_height_and_bounded_yaw() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let targets = sample_task_targets(&rest(), 100, &mut rng);
        for t in &targets {
            assert_eq!(t.pose.position.z, 0.03);
            assert!(t.pose.position.x >= -0.1 && t.pose.position.x <= -0.05);
            assert!(t.pose.position.y >= -0.1 && t.pose.position.y <= -0.05);
            assert!(t.pose.orientation.angle() <= 0.4 + 1e-12);
            let axis = t.pose.orientation.axis().map(|a| a.into_inner());
            if let Some(axis) = axis {
                assert!(axis.x.abs() < 1e-12 && axis.y.abs() < 1e-12);
            }
            assert!(t.angle >= 0.5 && t.angle <= 0.6);
        }
    }

    #[test]
    fn same_seed_gives_same_targets_and_prefixes_agree() {
        let a = sample_grasp_targets(&rest(), 10, &mut ChaCha8Rng::seed_from_u64(7));
        let b = sample_grasp_targets(&rest(), 10, &mut ChaCha8Rng::seed_from_u64(7));
        let long = sample_grasp_targets(&rest(), 25, &mut ChaCha8Rng::seed_from_u64(7));
        for k in 0..10 {
            assert_eq!(a[k].position, b[k].position);
            assert_eq!(a[k].position, long[k].position);
            assert_eq!(a[k].orientation, long[k].orientation);
        }
        let t1 = sample_task_targets(&rest(), 5, &mut ChaCha8Rng::seed_from_u64(9));
        let t2 = sample_task_targets(&rest(), 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(t1, t2);
    }

    #[test]
    fn angle_ladder_is_fixed() {
        assert_eq!(articulation_target_angles(), [0.5, 0.75, 1.0, 1.25, 1.5]);
    }
}
