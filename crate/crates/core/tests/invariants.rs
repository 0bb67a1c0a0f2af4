//! Property suites over the physics invariants.

mod properties;

use nzgate::dynamics::NoiseModel;
use nzgate::metrics::gate_error;
use nzgate::scenario::Scenario;
use nzgate::Element;
use properties::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn gate_propagators_are_unitary(x in gate_inputs()) {
        unitarity(x)?;
    }

    #[test]
    fn lindblad_keeps_a_valid_state(x in state_inputs()) {
        lindblad_state(x)?;
    }

    #[test]
    fn cphase_ignores_a_common_frequency_offset(delta in offsets()) {
        offset_invariance(delta)?;
    }

    #[test]
    fn cphase_is_invariant_under_local_z(x in local_phases()) {
        local_z_invariance(x)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn bipolar_control_is_net_zero(x in pulse_inputs()) {
        net_zero(x)?;
    }

    #[test]
    fn zeta_is_symmetric_in_the_qubits(x in device_inputs()) {
        zeta_symmetry(x)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn decoupled_decay_is_exponential(x in coherence_times()) {
        exponential_decay(x)?;
    }
}

#[test]
fn more_noise_never_helps() {
    let sys = Scenario::device_2q().idle_system().unwrap();
    let gp = calibrated_protocol();
    let all = NoiseModel::gate_point();
    let mut last = 0.0;
    for elements in [&[][..], &[Element::Coupler], &[Element::Coupler, Element::Q1], &[Element::Coupler, Element::Q1, Element::Q2]] {
        let e = gate_error(&sys, &gp, &all.only(elements)).unwrap().error;
        assert!(e >= last - 1e-12, "{elements:?}: {e:e} < {last:e}");
        last = e;
    }
}
