use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, ParamSet, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub rel_tol: f64,
    /// Entries whose analytic/numeric difference is below this are accepted
    /// regardless of relative error (covers gradients that are ~0).
    pub abs_tol: f64,
    /// Check at most this many randomly chosen entries per tensor.
    pub max_entries: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-7,
            max_entries: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_abs_error: f64,
    /// Largest relative error among entries that exceeded `abs_tol`.
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ParamCheck> {
        self.params.iter().filter(|p| !p.passed)
    }
}

fn evaluate<F>(params: &ParamSet, f: &F) -> Result<f64>
where
    F: for<'p> Fn(&mut Graph<'p>) -> Result<Var>,
{
    let mut g = Graph::new(params);
    let loss = f(&mut g)?;
    let t = g.value(loss);
    if !t.is_scalar() {
        return Err(Error::NonScalarLoss(t.shape().to_vec()));
    }
    let v = t.item();
    if !v.is_finite() {
        return Err(Error::NonFinite("grad_check objective".into()));
    }
    Ok(v)
}

/// Compares backpropagated gradients of `f` against central differences.
///
/// `f` must build the same scalar on every call; it is re-run twice per
/// checked entry on a perturbed copy of `params`.
pub fn grad_check<F>(params: &ParamSet, f: F, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: for<'p> Fn(&mut Graph<'p>) -> Result<Var>,
{
    if cfg.step.is_nan() || cfg.step <= 0.0 {
        return Err(Error::invalid("grad_check", "step must be positive"));
    }
    let analytic = {
        let mut g = Graph::new(params);
        let loss = f(&mut g)?;
        if !g.value(loss).item().is_finite() {
            return Err(Error::NonFinite("grad_check objective".into()));
        }
        g.backward(loss)?;
        g.param_grads()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut work = params.clone();
    let mut report = GradCheckReport { params: Vec::new() };
    for id in params.ids() {
        let n = params.get(id).len();
        let entries: Vec<usize> = match cfg.max_entries {
            Some(k) if k < n => {
                let mut idx = sample(&mut rng, n, k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..n).collect(),
        };
        let mut check = ParamCheck {
            name: params.name(id).to_string(),
            checked: entries.len(),
            max_abs_error: 0.0,
            max_rel_error: 0.0,
            passed: true,
        };
        for j in entries {
            let orig = params.get(id).data()[j];
            work.get_mut(id).data_mut()[j] = orig + cfg.step;
            let up = evaluate(&work, &f)?;
            work.get_mut(id).data_mut()[j] = orig - cfg.step;
            let down = evaluate(&work, &f)?;
            work.get_mut(id).data_mut()[j] = orig;

            let numeric = (up - down) / (2.0 * cfg.step);
            let exact = analytic[id.0].data()[j];
            let abs = (numeric - exact).abs();
            check.max_abs_error = check.max_abs_error.max(abs);
            if abs > cfg.abs_tol {
                let rel = abs / numeric.abs().max(exact.abs());
                check.max_rel_error = check.max_rel_error.max(rel);
                if rel > cfg.rel_tol {
                    check.passed = false;
                }
            }
        }
        report.params.push(check);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn quadratic_at_three() {
        let mut ps = ParamSet::new();
        let x = ps.insert("x", Tensor::scalar(3.0));
        let f = |g: &mut Graph<'_>| {
            let v = g.param(x);
            g.mul(v, v)
        };
        let mut g = Graph::new(&ps);
        let loss = f(&mut g).unwrap();
        g.backward(loss).unwrap();
        let xv = g.param(x);
        assert!((g.grad(xv).unwrap().item() - 6.0).abs() < 1e-12);

        let report = grad_check(&ps, f, &GradCheckConfig::default()).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn unused_parameter_is_compared_absolutely() {
        let mut ps = ParamSet::new();
        let x = ps.insert("x", Tensor::vector(&[0.3, -0.2]));
        ps.insert("unused", Tensor::vector(&[1.0, 2.0, 3.0]));
        let report = grad_check(
            &ps,
            |g| {
                let v = g.param(x);
                let t = g.tanh(v);
                Ok(g.sum(t))
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        let unused = &report.params[1];
        assert_eq!(unused.name, "unused");
        assert!(unused.passed);
        assert!(unused.max_abs_error < 1e-10);
        assert_eq!(unused.max_rel_error, 0.0);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let mut ps = ParamSet::new();
        let x = ps.insert("x", Tensor::scalar(-1.0));
        let res = grad_check(
            &ps,
            |g| {
                let v = g.param(x);
                Ok(g.log(v))
            },
            &GradCheckConfig::default(),
        );
        assert!(matches!(res, Err(Error::NonFinite(_))));
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // d/dx of min(x, 1) at x = 1 + h/2 straddles the kink: analytic 0,
        // numeric 0.25, so the check must fail.
        let mut ps = ParamSet::new();
        let x = ps.insert("x", Tensor::scalar(1.0 + 5e-6));
        let report = grad_check(
            &ps,
            |g| {
                let v = g.param(x);
                let one = g.constant(Tensor::scalar(1.0));
                g.min(v, one)
            },
            &GradCheckConfig::default(),
        )
        .unwrap();
        assert!(!report.passed());
    }
}
