use crate::hamiltonian::ManifoldLayout;
use crate::linalg::{c, fix_phase, hermitian_eigen, CMatrix, CVector};
use crate::linkage::CouplingPair;
use crate::morris_shore::{ms_decompose_with_tol, pump_side_ms_with_tol, second_stage_ms_with_tol, split_pump, MsDecomposition, SecondStageMs};

use super::{classify, metric_matrix, BasisError, DarkKind, DarkMember, DarkStateFamily, DegeneracyCase};

/// A constant part whose coupling falls below this fraction of the coupling norm
/// is treated as decoupled.
const DECOUPLED_TOL: f64 = 1e-8;

fn layout_of(pair: &CouplingPair) -> ManifoldLayout {
    ManifoldLayout { n_g: pair.n_g(), n_e: pair.n_e(), n_f: pair.n_f() }
}

fn unit(n: usize, k: usize) -> CVector {
    let mut v = CVector::zeros(n);
    v[k] = c(1.0, 0.0);
    v
}

/// Constant f states with no Stokes partner: columns of A† beyond the coupled block.
fn uncoupled_final(dec: &MsDecomposition) -> Vec<DarkMember> {
    let nf = dec.cols();
    (dec.coupled_count()..nf)
        .map(|k| DarkMember {
            g_part: CVector::zeros(0),
            f_part: dec.a.adjoint() * unit(nf, k),
            kind: DarkKind::UncoupledFinal,
            metric_eigenvalue: 0.0,
        })
        .collect()
}

fn with_g_dim(mut members: Vec<DarkMember>, n_g: usize) -> Vec<DarkMember> {
    for m in &mut members {
        if m.g_part.len() != n_g {
            m.g_part = CVector::zeros(n_g);
        }
    }
    members
}

/// Builds transfer/trapped members from constant g parts x₀ and the Stokes MS data.
fn members_from_x0(
    x0s: &[(CVector, f64)],
    pa: &CMatrix,
    stokes: &MsDecomposition,
    pump_scale: f64,
) -> Vec<DarkMember> {
    let nc = stokes.coupled_count();
    let nf = stokes.cols();
    x0s.iter()
        .map(|(x0, mu)| {
            let coupling = pa.adjoint() * x0;
            if coupling.norm() <= DECOUPLED_TOL * pump_scale {
                return DarkMember { g_part: x0.clone(), f_part: CVector::zeros(nf), kind: DarkKind::PumpDecoupled, metric_eigenvalue: 0.0 };
            }
            let mut ft = CVector::zeros(nf);
            for k in 0..nc {
                ft[k] = -coupling[k] / c(stokes.sigma[k], 0.0);
            }
            DarkMember { g_part: x0.clone(), f_part: stokes.a.adjoint() * ft, kind: DarkKind::Transfer, metric_eigenvalue: *mu }
        })
        .collect()
}

fn eigen_columns(m: &CMatrix, basis: &CMatrix) -> Vec<(CVector, f64)> {
    let (vals, vecs) = hermitian_eigen(m);
    vals.iter()
        .enumerate()
        .map(|(k, &mu)| (fix_phase(&(basis * vecs.column(k))), mu))
        .collect()
}

/// Dark states for N_g ≤ N_e ≤ N_f with nonsingular Σ: Φ ∝ [s x₀; 0; −p A†Σ⁻¹P̃†x₀],
/// x₀ eigenvectors of the metric M, plus N_f − N_e constant f states.
pub fn dark_states_case_a(pair: &CouplingPair, dec: &MsDecomposition) -> Result<DarkStateFamily, BasisError> {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    if classify(ng, ne, nf) != DegeneracyCase::A {
        return Err(BasisError::Ordering(ng, ne, nf));
    }
    let m = metric_matrix(&pair.p, &pair.s, dec)?;
    let x0s = eigen_columns(&m, &CMatrix::identity(ng, ng));
    let pa = &pair.p * dec.b.adjoint();
    let mut members = members_from_x0(&x0s, &pa, dec, pair.p.norm());
    members.extend(with_g_dim(uncoupled_final(dec), ng));
    Ok(DarkStateFamily { members, case: DegeneracyCase::A, layout: layout_of(pair) })
}

/// Dark states for N_g > N_e > N_f via the pump-side transformation B P A† = [Π̃; 0]:
/// Φ ∝ [s B†Π̃⁻¹S̃z₀; 0; −p z₀] plus N_g − N_e trapped g states. A singular Π̃ falls
/// back to the general construction.
pub fn dark_states_case_b(pair: &CouplingPair, zero_tol: f64) -> Result<DarkStateFamily, BasisError> {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    if classify(ng, ne, nf) != DegeneracyCase::B {
        return Err(BasisError::Ordering(ng, ne, nf));
    }
    let pump = pump_side_ms_with_tol(&pair.p, zero_tol);
    if pump.null_count > 0 {
        let stokes = ms_decompose_with_tol(&pair.s, zero_tol);
        return Ok(dark_states_general(pair, &stokes, zero_tol));
    }
    let s_t = &pump.a * &pair.s;
    let inv_pi = CMatrix::from_fn(ne, ne, |i, j| if i == j { c(1.0 / pump.sigma[i], 0.0) } else { c(0.0, 0.0) });
    let w = &inv_pi * &s_t;
    let metric = w.adjoint() * &w;
    let (vals, vecs) = hermitian_eigen(&metric);
    let stokes_scale = pair.s.norm();
    let mut members = Vec::new();
    for (k, &mu) in vals.iter().enumerate() {
        let z0 = fix_phase(&vecs.column(k).into_owned());
        let sz = &s_t * &z0;
        if sz.norm() <= DECOUPLED_TOL * stokes_scale {
            members.push(DarkMember { g_part: CVector::zeros(ng), f_part: z0, kind: DarkKind::UncoupledFinal, metric_eigenvalue: 0.0 });
            continue;
        }
        let mut gt = CVector::zeros(ng);
        gt.rows_mut(0, ne).copy_from(&(&inv_pi * sz));
        members.push(DarkMember { g_part: pump.b.adjoint() * gt, f_part: -z0, kind: DarkKind::Transfer, metric_eigenvalue: mu });
    }
    for k in ne..ng {
        members.push(DarkMember {
            g_part: pump.b.adjoint() * unit(ng, k),
            f_part: CVector::zeros(nf),
            kind: DarkKind::PumpDecoupled,
            metric_eigenvalue: 0.0,
        });
    }
    Ok(DarkStateFamily { members, case: DegeneracyCase::B, layout: layout_of(pair) })
}

/// Dark states for N_g, N_f < N_e: the constant g parts live in span{x̃} ⊕ null(Π̃) and
/// diagonalize the metric restricted to that subspace.
pub fn dark_states_case_c(
    pair: &CouplingPair,
    dec: &MsDecomposition,
    second: &SecondStageMs,
) -> Result<DarkStateFamily, BasisError> {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    if classify(ng, ne, nf) != DegeneracyCase::C {
        return Err(BasisError::Ordering(ng, ne, nf));
    }
    let (pa, _) = split_pump(&pair.p, dec)?;
    Ok(from_second_stage(pair, dec, &pa, second, DegeneracyCase::C))
}

/// Columns spanning the g states not coupled to Stokes-uncoupled e states:
/// the free rows of A′ plus the rows behind vanishing Π entries.
fn allowed_g_subspace(second: &SecondStageMs) -> CMatrix {
    let ng = second.a_prime.nrows();
    let coupled = second.pi_values.len() - second.pi_null_count;
    let cols: Vec<usize> = (0..second.n_free)
        .chain((coupled..second.pi_values.len()).map(|k| second.n_free + k))
        .collect();
    let a_dag = second.a_prime.adjoint();
    CMatrix::from_fn(ng, cols.len(), |i, j| a_dag[(i, cols[j])])
}

fn from_second_stage(
    pair: &CouplingPair,
    dec: &MsDecomposition,
    pa: &CMatrix,
    second: &SecondStageMs,
    case: DegeneracyCase,
) -> DarkStateFamily {
    let k = allowed_g_subspace(second);
    let mut members = restricted_members(pair, dec, pa, &k);
    members.extend(with_g_dim(uncoupled_final(dec), pair.n_g()));
    DarkStateFamily { members, case, layout: layout_of(pair) }
}

fn restricted_members(pair: &CouplingPair, dec: &MsDecomposition, pa: &CMatrix, k: &CMatrix) -> Vec<DarkMember> {
    let nc = dec.coupled_count();
    let scaled = CMatrix::from_fn(pa.nrows(), nc, |i, j| pa[(i, j)] / c(dec.sigma[j], 0.0));
    let restricted = k.adjoint() * &scaled;
    let metric = &restricted * restricted.adjoint();
    let x0s = eigen_columns(&metric, k);
    members_from_x0(&x0s, pa, dec, pair.p.norm())
}

/// Construction valid for every size ordering, including vanishing Stokes MS Rabi
/// frequencies: Stokes MS first, then the second-stage transform of the pump block
/// that reaches the Stokes-uncoupled e states.
pub fn dark_states_general(pair: &CouplingPair, dec: &MsDecomposition, zero_tol: f64) -> DarkStateFamily {
    let ng = pair.n_g();
    let case = classify(pair.n_g(), pair.n_e(), pair.n_f());
    match split_pump(&pair.p, dec) {
        Ok((pa, pb)) => {
            let second = second_stage_ms_with_tol(&pa, &pb, zero_tol).expect("split guarantees an uncoupled block");
            from_second_stage(pair, dec, &pa, &second, case)
        }
        Err(_) => {
            let pa = &pair.p * dec.b.adjoint();
            let mut members = restricted_members(pair, dec, &pa, &CMatrix::identity(ng, ng));
            members.extend(with_g_dim(uncoupled_final(dec), ng));
            DarkStateFamily { members, case, layout: layout_of(pair) }
        }
    }
}

/// Picks the construction matching the size ordering of the linkage.
pub fn dark_family(pair: &CouplingPair, zero_tol: f64) -> DarkStateFamily {
    let dec = ms_decompose_with_tol(&pair.s, zero_tol);
    match classify(pair.n_g(), pair.n_e(), pair.n_f()) {
        DegeneracyCase::A if dec.null_count == 0 => dark_states_case_a(pair, &dec).expect("preconditions checked"),
        DegeneracyCase::B => dark_states_case_b(pair, zero_tol).expect("ordering checked"),
        _ => dark_states_general(pair, &dec, zero_tol),
    }
}
