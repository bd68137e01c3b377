//! Central finite-difference verification of analytic gradients.
//!
//! Parameters are `f32`, so each perturbation is divided by the step actually
//! realized after rounding, and loss differences are taken in `f64`.

use super::params::{Grads, ParamStore};

/// Relative-error bound for smooth components.
pub const RELATIVE_TOLERANCE: f64 = 1e-4;
/// Relative-error bound for the straight-through path and joint losses.
pub const STRAIGHT_THROUGH_TOLERANCE: f64 = 1e-3;
/// Gradients below this magnitude are compared in absolute terms.
pub const MAGNITUDE_FLOOR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Compares `analytic` against central differences of `loss` for every
/// parameter entry. Parameters missing from `analytic` are expected to have
/// zero gradient.
pub fn check_gradients<F>(store: &ParamStore, analytic: &Grads, loss: F, eps: f64) -> GradCheckReport
where
    F: Fn(&ParamStore) -> f64,
{
    check_gradients_filtered(store, analytic, loss, eps, |_| true)
}

pub fn check_gradients_filtered<F, P>(
    store: &ParamStore,
    analytic: &Grads,
    loss: F,
    eps: f64,
    include: P,
) -> GradCheckReport
where
    F: Fn(&ParamStore) -> f64,
    P: Fn(&str) -> bool,
{
    let mut work = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    let names: Vec<String> = store.names().filter(|n| include(n)).cloned().collect();
    for name in names {
        let n = store.get(&name).expect("listed").len();
        for i in 0..n {
            let orig = store.get(&name).expect("listed").data()[i];
            let plus = (orig as f64 + eps) as f32;
            let minus = (orig as f64 - eps) as f32;
            work.get_mut(&name).expect("listed").data_mut()[i] = plus;
            let lp = loss(&work);
            work.get_mut(&name).expect("listed").data_mut()[i] = minus;
            let lm = loss(&work);
            work.get_mut(&name).expect("listed").data_mut()[i] = orig;
            let numeric = (lp - lm) / (plus as f64 - minus as f64);
            let a = analytic.get(&name).map_or(0.0, |g| g[i]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                if err >= report.max_rel_error {
                    report.worst = Some((name.clone(), i, a, numeric));
                }
            }
        }
    }
    report
}
