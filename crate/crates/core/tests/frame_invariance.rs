use std::f64::consts::TAU;

use fuzzdrive_core::machine::{step, MachineInput, MachineParams, MachineState};

/// Direct-on-line start with a balanced 60 Hz supply, simulated once in the
/// stationary frame and once in the synchronous frame.
fn open_loop_speeds(synchronous: bool) -> Vec<f64> {
    let p = MachineParams::reference_50hp();
    let (amp, omega_e, dt) = (391.9, TAU * 60.0, 20e-6);
    let mut s = MachineState::default();
    let mut speeds = Vec::new();
    for k in 0..50_000 {
        let t = k as f64 * dt;
        let load = if t < 1.0 { 0.0 } else { 100.0 };
        let input = if synchronous {
            MachineInput {
                v_ds: amp,
                v_qs: 0.0,
                omega_frame: omega_e,
                load_torque: load,
            }
        } else {
            // Zero-order hold over the step, matching the constant input of
            // the synchronous run only as dt → 0.
            let mid = omega_e * (t + 0.5 * dt);
            MachineInput {
                v_ds: amp * mid.cos(),
                v_qs: amp * mid.sin(),
                omega_frame: 0.0,
                load_torque: load,
            }
        };
        s = step(&s, &input, dt, &p, t).unwrap();
        speeds.push(s.omega_r);
    }
    speeds
}

#[test]
fn stationary_and_synchronous_frames_agree_on_speed() {
    let a = open_loop_speeds(false);
    let b = open_loop_speeds(true);
    let rms = |v: &mut dyn Iterator<Item = f64>, n: usize| {
        (v.map(|x| x * x).sum::<f64>() / n as f64).sqrt()
    };
    let diff = rms(&mut a.iter().zip(&b).map(|(x, y)| x - y), a.len());
    let base = rms(&mut b.iter().copied(), b.len());
    assert!(base > 100.0, "machine did not start: {base}");
    assert!(
        diff / base < 1e-3,
        "relative RMS difference {}",
        diff / base
    );
}
