use serde::{Deserialize, Serialize};

use crate::linkage::CouplingPair;
use crate::morris_shore::{ms_decompose_with_tol, pump_side_ms_with_tol, split_pump};

use super::{dark_count, dark_family, DarkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Any initial g population can be moved to f.
    CompleteAnyInitial,
    /// Some g population is unavoidably left behind.
    Partial,
    /// Complete transfer requires the pump coupling to the Stokes-uncoupled e states
    /// to vanish; `condition_met` tells whether it does for these fields.
    Conditional,
    /// No transfer dark state exists.
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub verdict: Verdict,
    pub condition_met: Option<bool>,
    pub sizes: (usize, usize, usize),
    pub n_dark: usize,
    pub n_dark_generic: usize,
    pub n_transfer: usize,
    /// Dark g states with P†x = 0 (population stays in g).
    pub uncoupled_g_count: usize,
    /// Vanishing Stokes MS Rabi frequencies.
    pub null_sigma_count: usize,
    pub rank_p: usize,
    pub notes: Vec<String>,
}

impl FeasibilityVerdict {
    pub fn label(&self) -> String {
        match (self.verdict, self.condition_met) {
            (Verdict::CompleteAnyInitial, _) => "complete_any_initial".into(),
            (Verdict::Partial, _) => "partial".into(),
            (Verdict::Conditional, Some(true)) => "conditional: condition satisfied".into(),
            (Verdict::Conditional, _) => "conditional: condition violated".into(),
            (Verdict::None, _) => "none".into(),
        }
    }
}

/// Decides whether adiabatic transfer g → f is possible for every initial g state.
///
/// The size ordering N_g ≤ N_e ≤ N_f is necessary but not sufficient: at least N_g
/// Stokes MS Rabi frequencies must be nonvanishing, P must have rank N_g, and every
/// g direction must belong to a transfer dark state.
pub fn feasibility(pair: &CouplingPair, zero_tol: f64) -> FeasibilityVerdict {
    let (ng, ne, nf) = (pair.n_g(), pair.n_e(), pair.n_f());
    let stokes = ms_decompose_with_tol(&pair.s, zero_tol);
    let pump = pump_side_ms_with_tol(&pair.p, zero_tol);
    let rank_p = pump.coupled_count();
    let family = dark_family(pair, zero_tol);
    let n_transfer = family.count_of(DarkKind::Transfer);
    let uncoupled_g = family.count_of(DarkKind::PumpDecoupled);
    let mut notes = Vec::new();

    let ordered = ng <= ne && ne <= nf;
    let leading_ok = stokes.coupled_count() >= ng;
    let has_uncoupled_e = split_pump(&pair.p, &stokes).is_ok();

    let (verdict, condition_met) = if ng == 0 {
        (Verdict::CompleteAnyInitial, None)
    } else if n_transfer == 0 {
        notes.push("no dark state connects g to f".into());
        (Verdict::None, None)
    } else if ordered {
        if leading_ok && rank_p == ng && n_transfer == ng {
            (Verdict::CompleteAnyInitial, None)
        } else {
            if !leading_ok {
                notes.push(format!(
                    "{} vanishing Stokes MS Rabi frequencies leave fewer than N_g = {ng} coupled pairs",
                    stokes.null_count
                ));
            }
            if rank_p < ng {
                notes.push(format!("pump coupling has rank {rank_p} < N_g = {ng}"));
            }
            (Verdict::Partial, None)
        }
    } else if has_uncoupled_e && ng <= nf && ng <= ne {
        let met = n_transfer == ng;
        notes.push(if met {
            "pump coupling to the Stokes-uncoupled e states vanishes".into()
        } else {
            "pump couples g to e states without a Stokes partner".into()
        });
        (Verdict::Conditional, Some(met))
    } else {
        if ng > ne {
            notes.push(format!("N_g = {ng} exceeds N_e = {ne}"));
        }
        if ng > nf {
            notes.push(format!("N_g = {ng} exceeds N_f = {nf}"));
        }
        (Verdict::Partial, None)
    };

    FeasibilityVerdict {
        verdict,
        condition_met,
        sizes: (ng, ne, nf),
        n_dark: family.count(),
        n_dark_generic: dark_count(ng, ne, nf),
        n_transfer,
        uncoupled_g_count: uncoupled_g,
        null_sigma_count: stokes.null_count,
        rank_p,
        notes,
    }
}
