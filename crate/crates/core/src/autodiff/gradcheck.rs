use std::fmt;

use crate::error::Result;
use crate::params::{ParamGrads, ParamSet};

/// Denominator floor for the relative error, so entries whose true gradient
/// is essentially zero are judged on absolute error instead.
const REL_ERROR_FLOOR: f64 = 1e-6;

/// The worst-matching parameter entry found by [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct Offender {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub eps: f64,
    pub tol: f64,
    pub entries_checked: usize,
    pub max_rel_error: f64,
    pub worst: Option<Offender>,
    /// Largest relative error seen in each parameter, in parameter order.
    pub per_param: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tol
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} max_rel_error={:.3e} tol={:.0e} entries={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_rel_error,
            self.tol,
            self.entries_checked
        )?;
        if let Some(w) = &self.worst {
            write!(
                f,
                " worst={}[{}] analytic={:.6e} numeric={:.6e}",
                w.param, w.index, w.analytic, w.numeric
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares the analytic gradient returned by `f` with central differences
/// `(f(p + eps) - f(p - eps)) / (2 eps)` for every entry of every parameter.
///
/// `f` must be deterministic. `params` is restored before returning.
pub fn grad_check<F>(params: &mut ParamSet, eps: f64, tol: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamSet) -> Result<(f64, ParamGrads)>,
{
    let (_, analytic) = f(params)?;
    let mut report = GradCheckReport {
        eps,
        tol,
        entries_checked: 0,
        max_rel_error: 0.0,
        worst: None,
        per_param: Vec::with_capacity(params.len()),
    };

    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let mut param_max = 0.0f64;
        for k in 0..params.value(id).numel() {
            let original = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = original + eps;
            let plus = f(params)?.0;
            params.value_mut(id).data_mut()[k] = original - eps;
            let minus = f(params)?.0;
            params.value_mut(id).data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic.get(id).data()[k];
            let err = relative_error(a, numeric);
            report.entries_checked += 1;
            param_max = param_max.max(err);
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some(Offender {
                    param: params.get(id).name.clone(),
                    index: k,
                    analytic: a,
                    numeric,
                    rel_error: err,
                });
            }
        }
        report.per_param.push((params.get(id).name.clone(), param_max));
    }
    Ok(report)
}
