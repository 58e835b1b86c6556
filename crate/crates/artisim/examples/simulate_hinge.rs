//! Passive articulated-object dynamics on the table.
//!
//! Drops a built-in object at its rest pose, settles it, drives the hinge
//! with a constant torque, then releases it. The printed time series makes
//! limit bounce or base drift visible at a glance: a healthy run settles to
//! zero rates with the base where it started.
//!
//! ```text
//! cargo run --example simulate_hinge                    # hinged_box
//! cargo run --example simulate_hinge -- clamshell 0.15  # heavier lid needs more torque
//! ```

use artisim::models::object::ObjectModel;
use artisim::sim::pd::PdTargets;
use artisim::sim::{Scene, SimConfig};

fn report(scene: &Scene, body: usize) {
    let s = &scene.bodies[body].state;
    println!(
        "t={:5.2} s  angle={:7.4} rad  rate={:8.4} rad/s  base=({:6.3}, {:6.3}, {:6.3}) m",
        scene.time, s.q[0], s.qd[0], s.base.position.x, s.base.position.y, s.base.position.z
    );
}

fn main() {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "hinged_box".to_string());
    let torque: f64 = match args.next().map(|t| t.parse()).transpose() {
        Ok(t) => t.unwrap_or(0.02),
        Err(_) => {
            eprintln!("error: the second argument must be a hinge torque in N*m");
            std::process::exit(2);
        }
    };
    let object = match ObjectModel::by_name(&name) {
        Ok(o) => o,
        Err(err) => {
            eprintln!("error: {err}");
            eprintln!("built-in objects: hinged_box, clamshell, lever_jar");
            std::process::exit(2);
        }
    };
    println!(
        "{}: base {:.2} kg, moving part {:.2} kg, hinge travel [{:.1}, {:.1}] rad",
        object.name,
        object.base_mass(),
        object.art_mass(),
        object.hinge_limits.0,
        object.hinge_limits.1
    );

    let config = SimConfig::default();
    let mut scene = Scene::new(config);
    let body = scene.add_body(object.scene_body(false, object.rest_pose(), &config));
    let ndof = scene.bodies[body].model.dofs.len();
    let report_every = (0.2 / config.dt).round() as usize;

    let run = |scene: &mut Scene, label: &str, seconds: f64, hinge_torque: f64| {
        println!("-- {label}");
        for i in 0..(seconds / config.dt).round() as usize {
            // Passive joint forces (hinge damping, travel-limit springs) come
            // from the controller; the drive torque rides on top, on the
            // hinge — the last generalized coordinate after the free base.
            let b = &scene.bodies[body];
            let mut tau = b.controller.forces(&b.model, &b.state, &PdTargets::hold(&b.state));
            tau[ndof - 1] += hinge_torque;
            scene.step_torques(std::slice::from_ref(&tau)).expect("state stayed finite");
            if (i + 1) % report_every == 0 {
                report(scene, body);
            }
        }
    };

    run(&mut scene, "settle under gravity", 0.4, 0.0);
    run(&mut scene, "drive the hinge", 1.2, torque);
    run(&mut scene, "release", 1.0, 0.0);

    let s = &scene.bodies[body].state;
    let drift = (s.base.position - object.rest_pose().position).norm();
    println!("base drift from the rest pose: {:.2e} m", drift);
}
