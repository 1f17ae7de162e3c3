//! Bounded Levenberg–Marquardt least squares with forward-difference
//! Jacobians.
//!
//! The damping follows Marquardt's diagonal scaling, `(JᵀJ + λ·diag(JᵀJ))δ = −Jᵀr`.
//! Bounds are enforced by projection with an active set: a parameter sitting
//! on a bound whose step points outward is frozen for that step.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::types::FitResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when `‖Jᵀr‖∞` falls below this.
    pub gtol: f64,
    /// Forward-difference step relative to `max(|x|, 1)`.
    pub rel_step: f64,
    /// Condition number of the scaled normal matrix above which the fit is
    /// flagged ill-conditioned.
    pub condition_limit: f64,
    /// Residuals are already divided by known one-sigma errors: report
    /// `(JᵀJ)⁻¹` without rescaling by the reduced chi-square.
    pub absolute_sigma: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-12,
            gtol: 1e-10,
            rel_step: 1e-6,
            condition_limit: 1e12,
            absolute_sigma: false,
        }
    }
}

/// Closed interval for one parameter; infinite ends are allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub lower: f64,
    pub upper: f64,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

fn evaluate<F>(f: &F, x: &[f64]) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    match f(x) {
        Ok(r) if all_finite(&r) => Some(r),
        _ => None,
    }
}

fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], bounds: &[Bound], rel_step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let (m, n) = (r0.len(), x.len());
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = rel_step * x[j].abs().max(1.0);
        let forward = if x[j] + h <= bounds[j].upper { h } else { -h };
        for step in [forward, -forward] {
            let xj = x[j] + step;
            if xj < bounds[j].lower || xj > bounds[j].upper {
                continue;
            }
            probe[j] = xj;
            let r = evaluate(f, &probe);
            probe[j] = x[j];
            if let Some(r) = r {
                if r.len() == m {
                    for i in 0..m {
                        jac[(i, j)] = (r[i] - r0[i]) / step;
                    }
                    break;
                }
            }
        }
    }
    jac
}

/// Solves the damped normal equations over the free parameters.
fn damped_step(a: &DMatrix<f64>, g: &DVector<f64>, lambda: f64, free: &[bool]) -> Option<DVector<f64>> {
    let idx: Vec<usize> = (0..free.len()).filter(|&j| free[j]).collect();
    let k = idx.len();
    let mut delta = DVector::zeros(free.len());
    if k == 0 {
        return Some(delta);
    }
    let max_diag = idx.iter().map(|&j| a[(j, j)]).fold(0.0, f64::max);
    let floor = if max_diag > 0.0 { max_diag * 1e-15 } else { 1.0 };
    let mut sub = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    for (p, &i) in idx.iter().enumerate() {
        rhs[p] = -g[i];
        for (q, &j) in idx.iter().enumerate() {
            sub[(p, q)] = a[(i, j)];
        }
        sub[(p, p)] += lambda * a[(i, i)].max(floor);
    }
    let sol = sub.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| sub.lu().solve(&rhs))?;
    for (p, &i) in idx.iter().enumerate() {
        delta[i] = sol[p];
    }
    Some(delta)
}

/// Covariance and condition number from the final Jacobian.
fn covariance(jac: &DMatrix<f64>, cost: f64, dof: usize, absolute: bool) -> (DMatrix<f64>, f64) {
    let n = jac.ncols();
    let a = jac.transpose() * jac;
    let scale: Vec<f64> = (0..n).map(|j| a[(j, j)].sqrt()).collect();
    let mut unbounded = vec![false; n];
    let mut scaled = DMatrix::zeros(n, n);
    for i in 0..n {
        if !(scale[i] > 0.0) {
            unbounded[i] = true;
        }
        for j in 0..n {
            if scale[i] > 0.0 && scale[j] > 0.0 {
                scaled[(i, j)] = a[(i, j)] / (scale[i] * scale[j]);
            }
        }
    }
    let eig = SymmetricEigen::new(scaled);
    let max_ev = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min_ev > 0.0 && !unbounded.iter().any(|&u| u) {
        max_ev / min_ev
    } else {
        f64::INFINITY
    };
    let threshold = max_ev * 1e-15;
    let variance = if absolute {
        1.0
    } else if dof > 0 {
        cost / dof as f64
    } else {
        cost
    };
    let mut cov_scaled = DMatrix::zeros(n, n);
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if ev > threshold {
            cov_scaled += v * v.transpose() / ev;
        } else {
            for j in 0..n {
                if v[j].abs() > 1e-6 {
                    unbounded[j] = true;
                }
            }
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] = if unbounded[i] || unbounded[j] {
                if i == j {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                variance * cov_scaled[(i, j)] / (scale[i] * scale[j])
            };
        }
    }
    (cov, condition)
}

/// Minimizes `Σ r_i(x)²` starting from `p0` within `bounds`.
///
/// The residual closure may fail (e.g. a model evaluated outside its
/// domain); failed trial points are treated as rejected steps. It must
/// succeed at `p0`.
pub fn lm_minimize<F>(residuals: F, p0: &[f64], bounds: &[Bound], names: &[&str], opts: &LmOptions) -> Result<FitResult>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = p0.len();
    assert_eq!(bounds.len(), n, "one bound per parameter");
    assert_eq!(names.len(), n, "one name per parameter");
    for (i, (&x, b)) in p0.iter().zip(bounds).enumerate() {
        if !(x >= b.lower && x <= b.upper) {
            return Err(Error::BoundsViolation {
                index: i,
                value: x,
                lower: b.lower,
                upper: b.upper,
            });
        }
    }
    let mut x = p0.to_vec();
    let mut r = residuals(&x)?;
    if !all_finite(&r) {
        return Err(Error::InvalidParameter("residuals are not finite at the initial point".into()));
    }
    let m = r.len();
    let mut cost = sum_sq(&r);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian(&residuals, &x, &r, bounds, opts.rel_step);
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);

        let mut free = vec![true; n];
        for j in 0..n {
            let at_lower = x[j] <= bounds[j].lower && g[j] > 0.0;
            let at_upper = x[j] >= bounds[j].upper && g[j] < 0.0;
            if at_lower || at_upper {
                free[j] = false;
            }
        }
        let g_free_norm = (0..n).filter(|&j| free[j]).map(|j| g[j].abs()).fold(0.0, f64::max);
        if g_free_norm < opts.gtol {
            converged = true;
            break;
        }

        loop {
            let mut active = free.clone();
            let mut delta = match damped_step(&a, &g, lambda, &active) {
                Some(d) => d,
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        converged = true;
                        break 'outer;
                    }
                    continue;
                }
            };
            // freeze parameters pushed through a bound and re-solve
            for _ in 0..n {
                let mut changed = false;
                for j in 0..n {
                    if !active[j] {
                        continue;
                    }
                    let target = x[j] + delta[j];
                    if (target < bounds[j].lower && x[j] <= bounds[j].lower)
                        || (target > bounds[j].upper && x[j] >= bounds[j].upper)
                    {
                        active[j] = false;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
                match damped_step(&a, &g, lambda, &active) {
                    Some(d) => delta = d,
                    None => break,
                }
            }
            let trial: Vec<f64> = (0..n).map(|j| bounds[j].clamp(x[j] + delta[j])).collect();
            if trial == x {
                converged = true;
                break 'outer;
            }
            let accepted = evaluate(&residuals, &trial)
                .filter(|rt| rt.len() == m)
                .map(|rt| (sum_sq(&rt), rt))
                .filter(|(c, _)| *c < cost);
            match accepted {
                Some((new_cost, new_r)) => {
                    let rel = (cost - new_cost) / cost;
                    let step_norm = trial.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    let x_norm = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
                    x = trial;
                    r = new_r;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    if rel < opts.ftol || step_norm <= 1e-15 * (x_norm + 1e-15) {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e16 {
                        // no descent direction left at working precision
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }

    if !converged {
        return Err(Error::NoConvergence { iterations });
    }

    let jac = jacobian(&residuals, &x, &r, bounds, opts.rel_step);
    let dof = m.saturating_sub(n);
    let (cov, condition) = covariance(&jac, cost, dof, opts.absolute_sigma);
    Ok(FitResult {
        names: names.iter().map(|s| s.to_string()).collect(),
        values: x,
        covariance: cov,
        residual_norm: cost,
        dof,
        converged,
        iterations,
        ill_conditioned: !(condition <= opts.condition_limit),
        condition,
    })
}
