mod common;

use common::*;
use stirap::adiabatic_basis::dark_family;
use stirap::adiabaticity::{adiabaticity_scan, conventional_adiabaticity, AdiabaticityConfig, AdiabaticityReport};
use stirap::hamiltonian::RwaHamiltonian;
use stirap::linalg::{c, CMatrix};
use stirap::linkage::CouplingPair;
use stirap::morris_shore::DEFAULT_ZERO_TOL;
use stirap::propagator::time_grid;

fn scan(h: &RwaHamiltonian, window: (f64, f64), samples: usize) -> AdiabaticityReport {
    let family = dark_family(&h.couplings, DEFAULT_ZERO_TOL);
    adiabaticity_scan(&family, h, &time_grid(window, samples), &AdiabaticityConfig::default()).unwrap()
}

fn fig4_with(pump_rabi: f64, stokes_rabi: f64, extra_pump_phase: f64) -> CouplingPair {
    let ph = fig4_phases();
    angular(
        1,
        2,
        3,
        sigma_pm(pump_rabi, FIG4_ETA, ph.phi_p + extra_pump_phase, ph.psi_p + extra_pump_phase),
        sigma_pm(stokes_rabi, FIG4_THETA, ph.phi_s, ph.psi_s),
    )
}

#[test]
fn proportional_envelopes_are_adiabatic() {
    for pair in [fig4_pair(), fig8_pair(), twin_diamond(0.3)] {
        let h = gaussians(pair, 0.0, 0.0, 6.0, 0.5);
        let r = scan(&h, (-20.0, 20.0), 401);
        assert!(r.max_ratio < 1e-8, "{}", r.max_ratio);
    }
}

#[test]
fn fig4_sequence_is_adiabatic() {
    let r = scan(&fig4_hamiltonian(), (-27.0, 27.0), 541);
    assert!(r.adiabatic && r.max_ratio < 0.1, "{}", r.max_ratio);
    assert!(r.max_ratio > 0.0);
}

#[test]
fn weaker_fields_scale_the_ratio() {
    let strong = gaussians(fig4_pair(), 3.0, -3.0, 6.0, 0.0);
    let weak = gaussians(fig4_with(0.52, 0.42, 0.0), 3.0, -3.0, 6.0, 0.0);
    let (a, b) = (scan(&strong, (-27.0, 27.0), 541), scan(&weak, (-27.0, 27.0), 541));
    assert!((b.max_ratio / a.max_ratio - 100.0).abs() < 1e-6, "{} vs {}", a.max_ratio, b.max_ratio);
    assert!(!b.adiabatic);
}

#[test]
fn scalar_system_is_twice_the_conventional_ratio() {
    let (op, os, delta) = (10.0, 8.0, 3.0);
    let pair = CouplingPair::new(CMatrix::from_element(1, 1, c(op / 2.0, 0.0)), CMatrix::from_element(1, 1, c(os / 2.0, 0.0))).unwrap();
    let h = gaussians(pair, 2.0, -2.0, 4.0, delta);
    let times = time_grid((-12.0, 12.0), 241);
    let r = scan(&h, (-12.0, 12.0), 241);
    let conv = conventional_adiabaticity(&h.pump, &h.stokes, op, os, delta, &times);
    assert_eq!(r.pairs.len(), 2);
    for series in &r.pairs {
        for (k, point) in conv.points.iter().enumerate() {
            let Some(closed) = series.closed_form[k] else { continue };
            // bright states are ordered by eigenvalue, the upper one pairs with sin/cot
            let expect = 2.0 * if series.bright == 1 { point.ratio_sin_cot } else { point.ratio_cos_tan };
            assert!((closed - expect).abs() < 1e-9 * expect.max(1e-3), "t={} bright {}: {closed} vs {expect}", times[k], series.bright);
        }
    }
}

#[test]
fn closed_form_agrees_with_finite_differences() {
    for h in [fig4_hamiltonian(), gaussians(fig8_pair(), 2.0, -2.0, 4.0, 1.5), gaussians(twin_diamond(0.3), 2.0, -2.0, 4.0, 0.0)] {
        let r = scan(&h, (-18.0, 18.0), 721);
        assert!(
            r.closed_form_max_deviation <= 1.5 * r.truncation_estimate + 1e-12,
            "{:e} vs {:e}",
            r.closed_form_max_deviation,
            r.truncation_estimate
        );
    }
}

#[test]
fn global_pump_phase_does_not_change_ratios() {
    let a = scan(&gaussians(fig4_with(52.0, 42.0, 0.0), 3.0, -3.0, 6.0, 0.0), (-27.0, 27.0), 541);
    let b = scan(&gaussians(fig4_with(52.0, 42.0, 0.77), 3.0, -3.0, 6.0, 0.0), (-27.0, 27.0), 541);
    assert!((a.max_ratio - b.max_ratio).abs() < 1e-9 * a.max_ratio);
}
