//! Central-difference gradient verification over every flat parameter.

use super::params::ParamStore;

/// Gradients smaller than this are compared on an absolute scale.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Times an entry is re-estimated with a tenfold smaller step after failing.
pub const REFINE_STEPS: usize = 2;

/// `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
    (analytic - numeric).abs() / denom
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub n_checked: usize,
    pub max_rel_error: f64,
    /// Flat index with the largest relative error.
    pub worst_index: usize,
    pub worst_param: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares analytic gradients against `(f(θ+h) - f(θ-h)) / 2h`.
///
/// `loss_and_grad` must compute the loss and overwrite the store's
/// gradients; `loss` evaluates the loss only. The store's values are
/// restored exactly afterwards. An entry that misses `tol` is re-estimated
/// with `h / 10` up to [`REFINE_STEPS`] times, which handles a ReLU kink
/// lying inside the perturbation interval.
pub fn grad_check<G, F>(
    store: &mut ParamStore,
    loss_and_grad: G,
    mut loss: F,
    h: f64,
    tol: f64,
) -> GradCheckReport
where
    G: FnOnce(&mut ParamStore) -> f64,
    F: FnMut(&ParamStore) -> f64,
{
    store.zero_grad();
    loss_and_grad(store);
    let analytic = store.flat_grads();

    let mut report = GradCheckReport {
        n_checked: 0,
        max_rel_error: 0.0,
        worst_index: 0,
        worst_param: String::new(),
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        tolerance: tol,
    };
    for i in 0..store.flat_len() {
        let orig = store.flat_get(i);
        let mut step = h;
        let mut numeric;
        let mut err;
        let mut attempt = 0;
        loop {
            store.flat_set(i, orig + step);
            let up = loss(store);
            store.flat_set(i, orig - step);
            let down = loss(store);
            store.flat_set(i, orig);
            numeric = (up - down) / (2.0 * step);
            err = relative_error(analytic[i], numeric);
            if err < tol || attempt == REFINE_STEPS {
                break;
            }
            attempt += 1;
            step /= 10.0;
        }
        report.n_checked += 1;
        if err > report.max_rel_error || i == 0 {
            report.max_rel_error = err;
            report.worst_index = i;
            report.worst_param = store.flat_owner(i).0.to_string();
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn quadratic_at_three() {
        let mut s = ParamStore::new();
        let id = s.add("theta", Tensor::from_vec(vec![3.0]));
        let report = grad_check(
            &mut s,
            |s| {
                let t = s.value(id)[0];
                s.grad_mut(id)[0] = 2.0 * t;
                t * t
            },
            |s| s.value(id)[0].powi(2),
            1e-4,
            1e-8,
        );
        assert!((report.worst_analytic - 6.0).abs() < 1e-12);
        assert!((report.worst_numeric - 6.0).abs() < 1e-8);
        assert!(report.passed());
        assert_eq!(s.value(id), &[3.0]);
    }

    #[test]
    fn constant_function_has_zero_gradients() {
        let mut s = ParamStore::new();
        s.add("a", Tensor::from_vec(vec![1.0, -2.0]));
        let report = grad_check(&mut s, |_| 4.0, |_| 4.0, 1e-4, 1e-10);
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.worst_numeric, 0.0);
        assert_eq!(report.n_checked, 2);
    }

    #[test]
    fn detects_wrong_gradient() {
        let mut s = ParamStore::new();
        let id = s.add("x", Tensor::from_vec(vec![1.0]));
        let report = grad_check(
            &mut s,
            |s| {
                s.grad_mut(id)[0] = 1.0;
                0.0
            },
            |s| 3.0 * s.value(id)[0],
            1e-4,
            1e-4,
        );
        assert!(!report.passed());
    }
}
