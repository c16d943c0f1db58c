use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Weighted least-squares solution with its parameter covariance `(JᵀWJ)⁻¹`.
#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl LmResult {
    pub fn reduced_chi2(&self) -> f64 {
        self.chi2 / self.dof.max(1) as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when every parameter moves by less than this fraction of itself.
    pub rel_step: f64,
    /// Also converged when chi2 falls by less than this over ten iterations: the
    /// remaining motion is far inside the parameters' own error bars.
    pub chi2_stall: f64,
    /// Undamped steps taken after convergence.
    pub polish_steps: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            rel_step: 1e-9,
            chi2_stall: 1e-3,
            polish_steps: 10,
        }
    }
}

/// Damped least squares (Marquardt diagonal scaling) with an analytic Jacobian.
///
/// `model(params, x, grad)` returns the model value at `x` and fills `grad` with its
/// partial derivatives.
pub fn levenberg_marquardt<F>(
    x: &[f64],
    y: &[f64],
    sigma: &[f64],
    init: &[f64],
    model: F,
    opts: &LmOptions,
) -> Result<LmResult>
where
    F: Fn(&[f64], f64, &mut [f64]) -> f64,
{
    let np = init.len();
    let nd = x.len();
    if nd <= np {
        return Err(Error::FitDiverged {
            reason: format!("{nd} points for {np} parameters"),
        });
    }
    let mut grad = vec![0.0; np];
    let eval = |p: &[f64], grad: &mut [f64], jac: Option<&mut DMatrix<f64>>, res: &mut DVector<f64>| {
        let mut chi2 = 0.0;
        let mut jac = jac;
        for i in 0..nd {
            let m = model(p, x[i], grad);
            let r = (y[i] - m) / sigma[i];
            res[i] = r;
            chi2 += r * r;
            if let Some(j) = jac.as_deref_mut() {
                for k in 0..np {
                    j[(i, k)] = grad[k] / sigma[i];
                }
            }
        }
        chi2
    };

    let mut p = init.to_vec();
    let mut jac = DMatrix::<f64>::zeros(nd, np);
    let mut res = DVector::<f64>::zeros(nd);
    let mut trial_res = DVector::<f64>::zeros(nd);
    let mut chi2 = eval(&p, &mut grad, Some(&mut jac), &mut res);
    if !chi2.is_finite() {
        return Err(Error::FitDiverged { reason: "non-finite residual at start".into() });
    }
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut history = std::collections::VecDeque::with_capacity(11);
    while iterations < opts.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        let mut accepted = false;
        for _ in 0..60 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(f64::MIN_POSITIVE);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let c = eval(&trial, &mut grad, None, &mut trial_res);
            if c.is_finite() && c <= chi2 {
                let small = p
                    .iter()
                    .zip(step.iter())
                    .all(|(v, s)| s.abs() <= opts.rel_step * v.abs().max(f64::MIN_POSITIVE));
                p = trial;
                chi2 = eval(&p, &mut grad, Some(&mut jac), &mut res);
                lambda = (lambda * 0.1).max(1e-12);
                accepted = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: already at the minimum to working precision
            converged = true;
        }
        history.push_back(chi2);
        if history.len() > 10 {
            let old = history.pop_front().unwrap_or(chi2);
            converged |= old - chi2 < opts.chi2_stall;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::FitDiverged {
            reason: format!("no convergence in {} iterations", opts.max_iterations),
        });
    }
    // undamped polish: the step test stops anywhere inside the tolerance, a few
    // Gauss-Newton steps land on the fixed point itself
    for _ in 0..opts.polish_steps {
        let Some(step) = (jac.transpose() * &jac).cholesky().map(|c| c.solve(&(jac.transpose() * &res))) else {
            break;
        };
        let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        let c = eval(&trial, &mut grad, None, &mut trial_res);
        // at the minimum chi2 is flat to its rounding noise; tolerate that much
        if !(c.is_finite() && c <= chi2 * (1.0 + 1e-10)) {
            break;
        }
        let done = p.iter().zip(step.iter()).all(|(v, s)| s.abs() <= 1e-15 * v.abs());
        p = trial;
        chi2 = eval(&p, &mut grad, Some(&mut jac), &mut res);
        if done {
            break;
        }
    }
    let covariance = (jac.transpose() * &jac)
        .try_inverse()
        .ok_or_else(|| Error::FitDiverged { reason: "singular normal matrix".into() })?;
    Ok(LmResult {
        params: p,
        covariance,
        chi2,
        dof: nd - np,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|t| 3.0 * (-1.7 * t).exp() + 0.2).collect();
        let s = vec![1.0; x.len()];
        let r = levenberg_marquardt(
            &x,
            &y,
            &s,
            &[1.0, 1.0, 0.0],
            |p, t, g| {
                let e = (-p[1] * t).exp();
                g[0] = e;
                g[1] = -p[0] * t * e;
                g[2] = 1.0;
                p[0] * e + p[2]
            },
            &LmOptions::default(),
        )
        .unwrap();
        for (got, want) in r.params.iter().zip([3.0, 1.7, 0.2]) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}
