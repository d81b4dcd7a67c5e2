//! Dormand-Prince 5(4) with Hairer's continuous extension, for complex matrix ODEs.

use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMatrix};

use super::PropagationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; `None` means the whole interval.
    pub max_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig { rtol: 1e-10, atol: 1e-12, max_steps: 2_000_000, max_step: None }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn lin(terms: &[(f64, &CMatrix)], base: &CMatrix, h: f64) -> CMatrix {
    let mut out = base.clone();
    for (w, k) in terms {
        if *w != 0.0 {
            out.zip_apply(*k, |o, kv| *o += kv * (w * h));
        }
    }
    out
}

/// Integrates y' = f(t, y) from `t0` to the last of `outputs` (ascending, all ≥ t0),
/// returning y at every output time.
pub fn integrate<F>(f: F, y0: &CMatrix, t0: f64, outputs: &[f64], cfg: &IntegratorConfig) -> Result<(Vec<CMatrix>, IntegratorStats), PropagationError>
where
    F: Fn(f64, &CMatrix) -> CMatrix,
{
    let mut stats = IntegratorStats::default();
    let mut results = Vec::with_capacity(outputs.len());
    let mut next_out = 0;
    while next_out < outputs.len() && outputs[next_out] <= t0 {
        results.push(y0.clone());
        next_out += 1;
    }
    let Some(&t_end) = outputs.last() else {
        return Ok((results, stats));
    };
    if next_out == outputs.len() {
        return Ok((results, stats));
    }

    let span = t_end - t0;
    let max_step = cfg.max_step.unwrap_or(span).min(span);
    let mut t = t0;
    let mut y = y0.clone();
    let mut k1 = f(t, &y);
    stats.rhs_evaluations += 1;
    let mut h = initial_step(&y, &k1, span, cfg).min(max_step);
    let mut err_prev: f64 = 1e-4;

    while next_out < outputs.len() {
        if stats.accepted + stats.rejected >= cfg.max_steps {
            return Err(PropagationError::StepBudget { steps: cfg.max_steps, reached: t });
        }
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= f64::EPSILON * t.abs().max(1.0) * 4.0 {
            return Err(PropagationError::StepUnderflow { at: t });
        }
        let k2 = f(t + C2 * h, &lin(&[(A21, &k1)], &y, h));
        let k3 = f(t + C3 * h, &lin(&[(A31, &k1), (A32, &k2)], &y, h));
        let k4 = f(t + C4 * h, &lin(&[(A41, &k1), (A42, &k2), (A43, &k3)], &y, h));
        let k5 = f(t + C5 * h, &lin(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &y, h));
        let k6 = f(t + h, &lin(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &y, h));
        let y1 = lin(&[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], &y, h);
        let k7 = f(t + h, &y1);
        stats.rhs_evaluations += 6;

        let err_vec = lin(&[(E1, &k1), (E3, &k3), (E4, &k4), (E5, &k5), (E6, &k6), (E7, &k7)], &CMatrix::zeros(y.nrows(), y.ncols()), h);
        let mut acc = 0.0;
        for ((e, a), b) in err_vec.iter().zip(y.iter()).zip(y1.iter()) {
            let sc = cfg.atol + cfg.rtol * a.norm().max(b.norm());
            acc += (e.norm() / sc).powi(2);
        }
        let err = (acc / err_vec.len().max(1) as f64).sqrt();

        if err <= 1.0 {
            stats.accepted += 1;
            let t_new = t + h;
            // dense output on (t, t_new]
            while next_out < outputs.len() && outputs[next_out] <= t_new + 1e-15 * t_new.abs().max(1.0) {
                let theta = ((outputs[next_out] - t) / h).clamp(0.0, 1.0);
                results.push(dense(&y, &y1, &k1, &k3, &k4, &k5, &k6, &k7, h, theta));
                next_out += 1;
            }
            t = t_new;
            y = y1;
            k1 = k7;
            // PI step-size control
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            h = h.min(max_step);
            err_prev = err.max(1e-4);
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() { 0.9 * err.powf(-0.2) } else { 0.1 };
            h *= fac.clamp(0.1, 0.9);
        }
    }
    Ok((results, stats))
}

fn initial_step(y: &CMatrix, k: &CMatrix, span: f64, cfg: &IntegratorConfig) -> f64 {
    let mut dy = 0.0;
    let mut d0 = 0.0;
    for (a, b) in y.iter().zip(k.iter()) {
        let sc = cfg.atol + cfg.rtol * a.norm();
        d0 += (a.norm() / sc).powi(2);
        dy += (b.norm() / sc).powi(2);
    }
    let n = y.len().max(1) as f64;
    let (d0, dy) = ((d0 / n).sqrt(), (dy / n).sqrt());
    let h = if d0 < 1e-5 || dy < 1e-5 { 1e-6 } else { 0.01 * d0 / dy };
    h.min(span).max(span * 1e-12)
}

#[allow(clippy::too_many_arguments)]
fn dense(
    y0: &CMatrix,
    y1: &CMatrix,
    k1: &CMatrix,
    k3: &CMatrix,
    k4: &CMatrix,
    k5: &CMatrix,
    k6: &CMatrix,
    k7: &CMatrix,
    h: f64,
    theta: f64,
) -> CMatrix {
    let r2 = y1 - y0;
    let r3 = k1 * c(h, 0.0) - &r2;
    let r4 = &r2 - k7 * c(h, 0.0) - &r3;
    let r5 = lin(&[(D1, k1), (D3, k3), (D4, k4), (D5, k5), (D6, k6), (D7, k7)], &CMatrix::zeros(y0.nrows(), y0.ncols()), h);
    let t1 = 1.0 - theta;
    let inner = &r4 + r5 * c(t1, 0.0);
    let inner = &r3 + inner * c(theta, 0.0);
    let inner = &r2 + inner * c(t1, 0.0);
    y0 + inner * c(theta, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, CMatrix};

    #[test]
    fn exponential_with_dense_output() {
        // y' = -i ω y, y = e^{-iωt}
        let w = 2.3;
        let f = |_t: f64, y: &CMatrix| y * c(0.0, -w);
        let outs: Vec<f64> = (0..=40).map(|k| k as f64 * 0.137).collect();
        let cfg = IntegratorConfig { rtol: 1e-11, atol: 1e-13, ..Default::default() };
        let (ys, stats) = integrate(f, &CMatrix::from_element(1, 1, c(1.0, 0.0)), 0.0, &outs, &cfg).unwrap();
        assert_eq!(ys.len(), outs.len());
        for (t, y) in outs.iter().zip(&ys) {
            let exact = c(0.0, -w * t).exp();
            assert!((y[(0, 0)] - exact).norm() < 1e-9, "t={t}");
        }
        assert!(stats.accepted > 0);
    }

    #[test]
    fn step_budget_reported() {
        let f = |_t: f64, y: &CMatrix| y * c(0.0, -1000.0);
        let cfg = IntegratorConfig { max_steps: 10, ..Default::default() };
        let r = integrate(f, &CMatrix::from_element(1, 1, c(1.0, 0.0)), 0.0, &[100.0], &cfg);
        assert!(matches!(r, Err(PropagationError::StepBudget { .. })));
    }
}
