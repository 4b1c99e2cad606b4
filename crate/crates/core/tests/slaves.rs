use std::sync::Arc;

use missiles_core::models::{make_lotka_volterra, make_two_mass, ModularModel};
use missiles_core::poly::{Frame, PolyInput};
use missiles_core::slave::{Capabilities, OdeSlave, Slave, MICRO_STEPS};
use missiles_core::{Capability, Error};

/// Ten macro-steps of every slave of `model` under fixed cubic inputs.
fn drive(model: &ModularModel, micro_steps: usize, dt: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for (k, sys) in model.systems.iter().enumerate() {
        let u0 = &model.initial_coupling[model.topology.inputs_of(k)];
        let mut s = OdeSlave::new(Arc::clone(sys), 0.0, u0)
            .unwrap()
            .with_micro_steps(micro_steps);
        let channels: Vec<[f64; 4]> = u0.iter().map(|&v| [v, 0.1 * v, -0.5 * v, 2.0]).collect();
        for _ in 0..10 {
            s.set_inputs(PolyInput::from_channels(&channels, Frame::Local))
                .unwrap();
            let rec = s.do_step(dt).unwrap();
            out.push(rec.y);
        }
    }
    out
}

#[test]
fn halving_micro_step_changes_little() {
    for model in [make_two_mass(), make_lotka_volterra()] {
        let coarse = drive(&model, MICRO_STEPS, 1e-3);
        let fine = drive(&model, 2 * MICRO_STEPS, 1e-3);
        for (a, b) in coarse.iter().flatten().zip(fine.iter().flatten()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1e-3), "{a} {b}");
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let model = make_two_mass();
    assert_eq!(
        drive(&model, MICRO_STEPS, 1e-3),
        drive(&model, MICRO_STEPS, 1e-3)
    );
}

#[test]
fn rollback_replays_the_step_exactly() {
    let model = make_lotka_volterra();
    let mut s = model.slaves().remove(0);
    s.do_step(1e-2).unwrap();
    let snap = s.save_state().unwrap();
    let input = PolyInput::from_channels(&[[1.0, 0.2, 0.0, 0.0]], Frame::Local);
    s.set_inputs(input.clone()).unwrap();
    let first = s.do_step(1e-2).unwrap();
    s.restore_state(&snap).unwrap();
    assert_eq!(s.current_time(), snap.time());
    // A different step in between must not leak into the replay.
    s.set_inputs(PolyInput::constant(&[5.0])).unwrap();
    s.do_step(1e-2).unwrap();
    s.restore_state(&snap).unwrap();
    s.set_inputs(input).unwrap();
    assert_eq!(s.do_step(1e-2).unwrap(), first);
}

#[test]
fn capabilities_are_enforced() {
    let model = make_two_mass();
    let mut s = model.slaves_with(Capabilities::NO_ROLLBACK).remove(0);
    assert!(matches!(
        s.save_state(),
        Err(Error::CapabilityMissing {
            capability: Capability::Rollback,
            ..
        })
    ));
    assert!(s.linearization().is_ok());

    let mut basic = model.slaves_with(Capabilities::BASIC).remove(0);
    assert!(basic.set_inputs(PolyInput::constant(&[1.0])).is_ok());
    assert!(basic
        .set_inputs(PolyInput::from_channels(
            &[[1.0, 1.0, 0.0, 0.0]],
            Frame::Local
        ))
        .is_err());
    assert!(basic.states().is_err());
    assert!(basic.do_step(1e-3).unwrap().y_dot.is_none());
    s.do_step(1e-3).unwrap();
}

#[test]
fn step_record_is_consistent_with_queries() {
    let model = make_two_mass();
    let mut s = model.slaves().remove(1);
    let rec = s.do_step(1e-3).unwrap();
    assert_eq!(rec.y, s.outputs());
    let (x, f) = s.states().unwrap();
    assert_eq!(rec.x, x);
    assert_eq!(rec.f, f);
    assert!((s.current_time() - 1e-3).abs() < 1e-18);
}
