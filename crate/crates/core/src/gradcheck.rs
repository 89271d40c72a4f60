//! Central finite-difference gradient checking.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Result;
use crate::params::{Grads, ParamId, ParamRegistry};
use crate::tape::{Tape, Var};

/// Denominator floor for the relative error, so that entries whose true
/// gradient is zero are compared in absolute terms.
pub const REL_ERR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    /// Set when any evaluation of `f` was NaN or infinite.
    pub non_finite: bool,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.non_finite && self.max_rel_err <= self.tol
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
    (analytic - numeric).abs() / denom
}

fn eval<F>(params: &ParamRegistry, f: &F) -> Result<f64>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let mut tape = Tape::new(params);
    let out = f(&mut tape)?;
    Ok(tape.value(out).item())
}

/// Finite-difference formula used as the numeric oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`, error O(h²).
    Central,
    /// `(−f(x+2h) + 8f(x+h) − 8f(x−h) + f(x−2h)) / 12h`, error O(h⁴).
    /// Lets a larger `h` keep round-off down on entries with tiny gradients.
    FivePoint,
}

/// Checks every entry of every parameter with central differences.
pub fn grad_check<F>(params: &ParamRegistry, f: F, eps: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let ids: Vec<ParamId> = params.ids().collect();
    grad_check_with(params, &ids, f, Stencil::Central, eps, tol)
}

/// Checks only the listed parameters with central differences.
pub fn grad_check_subset<F>(
    params: &ParamRegistry,
    ids: &[ParamId],
    f: F,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    grad_check_with(params, ids, f, Stencil::Central, eps, tol)
}

pub fn grad_check_with<F>(
    params: &ParamRegistry,
    ids: &[ParamId],
    f: F,
    stencil: Stencil,
    eps: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<'_>) -> Result<Var>,
{
    let mut grads = Grads::for_registry(params);
    let mut non_finite;
    {
        let mut tape = Tape::new(params);
        let out = f(&mut tape)?;
        non_finite = !tape.value(out).is_finite();
        let adj = tape.backward(out)?;
        tape.accumulate(&adj, &mut grads, 1.0);
    }
    non_finite |= !grads.is_finite();

    let mut work = params.clone();
    let mut checks = Vec::with_capacity(ids.len());
    for &id in ids {
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in 0..params.get(id).len() {
            let orig = params.get(id).data()[k];
            let mut at = |delta: f64| -> Result<f64> {
                work.get_mut(id).data_mut()[k] = orig + delta;
                let v = eval(&work, &f);
                work.get_mut(id).data_mut()[k] = orig;
                v
            };
            let numeric = match stencil {
                Stencil::Central => (at(eps)? - at(-eps)?) / (2.0 * eps),
                Stencil::FivePoint => {
                    let (p1, m1) = (at(eps)?, at(-eps)?);
                    let (p2, m2) = (at(2.0 * eps)?, at(-2.0 * eps)?);
                    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * eps)
                }
            };
            if !numeric.is_finite() {
                non_finite = true;
                continue;
            }
            let analytic = grads.get(id)[k];
            let err = rel_err(analytic, numeric);
            if err > check.max_rel_err || k == 0 {
                check.max_rel_err = err;
                check.worst_index = k;
                check.analytic = analytic;
                check.numeric = numeric;
            }
        }
        checks.push(check);
    }
    let max_rel_err = checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport {
        params: checks,
        max_rel_err,
        non_finite,
        tol,
    })
}
