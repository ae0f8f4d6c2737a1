//! Levenberg-Marquardt nonlinear least squares: damped Gauss-Newton steps
//! `(J'J + mu I) delta = -J'r`, accepted on strict cost decrease.

use crate::error::{Error, Result};
use crate::linalg::{lu_solve, Matrix};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions<T> {
    /// Initial damping.
    pub mu0: T,
    /// Damping multiplier on rejection, divisor on acceptance.
    pub mu_factor: T,
    pub max_iters: usize,
    /// Infinity-norm threshold on the gradient J'r.
    pub grad_tol: T,
    /// 2-norm threshold on an accepted step.
    pub step_tol: T,
    /// Stop when the mean-square cost reaches this value.
    pub cost_tol: T,
    /// Damping inflations allowed per iteration before giving up on a step.
    pub max_inflations: usize,
}

impl<T: Real> Default for LmOptions<T> {
    fn default() -> Self {
        LmOptions {
            mu0: T::c(1e-3),
            mu_factor: T::c(10.0),
            max_iters: 200,
            grad_tol: T::c(1e-8),
            step_tol: T::c(1e-10),
            cost_tol: T::zero(),
            max_inflations: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    GradTol,
    StepTol,
    MaxIters,
    CostTol,
}

/// One accepted iteration, for the optimizer log.
#[derive(Debug, Clone, PartialEq)]
pub struct LmIterRecord<T> {
    pub iter: usize,
    pub cost: T,
    pub mu: T,
    pub grad_inf_norm: T,
    pub step_norm: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub theta: Vec<T>,
    /// Final mean-square residual.
    pub cost: T,
    /// Accepted iterations.
    pub iterations: usize,
    pub termination: Termination,
    /// Initial cost followed by the cost after each accepted step.
    pub cost_history: Vec<T>,
    pub log: Vec<LmIterRecord<T>>,
}

/// A least-squares problem: residual vector and its Jacobian at given
/// parameters.
pub trait ResidualProblem<T: Real> {
    fn residuals(&mut self, theta: &[T]) -> Result<Vec<T>>;
    /// Rows follow `residuals`, columns follow `theta`.
    fn jacobian(&mut self, theta: &[T]) -> Result<Matrix<T>>;
}

/// Closure-backed problem.
pub struct FnProblem<R, J> {
    pub residuals_fn: R,
    pub jacobian_fn: J,
}

impl<T, R, J> ResidualProblem<T> for FnProblem<R, J>
where
    T: Real,
    R: FnMut(&[T]) -> Result<Vec<T>>,
    J: FnMut(&[T]) -> Result<Matrix<T>>,
{
    fn residuals(&mut self, theta: &[T]) -> Result<Vec<T>> {
        (self.residuals_fn)(theta)
    }

    fn jacobian(&mut self, theta: &[T]) -> Result<Matrix<T>> {
        (self.jacobian_fn)(theta)
    }
}

/// Mean squared error `(1/N) sum_t |y(t) - y_hat(t)|^2`, vector residuals
/// summed over channels (rows are time samples).
pub fn mse<T: Real>(y: &Matrix<T>, y_hat: &Matrix<T>) -> Result<T> {
    if y.rows() != y_hat.rows() || y.cols() != y_hat.cols() {
        return Err(Error::BadShape("mse requires matching shapes".into()));
    }
    if y.rows() == 0 {
        return Err(Error::EmptySequence);
    }
    let sum = y
        .data()
        .iter()
        .zip(y_hat.data())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    Ok(sum / T::of_usize(y.rows()))
}

/// Scalar-sequence convenience form of [`mse`].
pub fn mse_slices<T: Real>(y: &[T], y_hat: &[T]) -> Result<T> {
    if y.len() != y_hat.len() {
        return Err(Error::BadShape("mse requires equal lengths".into()));
    }
    if y.is_empty() {
        return Err(Error::EmptySequence);
    }
    let sum = y.iter().zip(y_hat).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
    Ok(sum / T::of_usize(y.len()))
}

fn mean_sq<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |acc, &x| acc + x * x) / T::of_usize(r.len().max(1))
}

fn all_finite<T: Real>(r: &[T]) -> bool {
    r.iter().all(|x| x.is_finite())
}

/// Trial-step residual failures that count as a rejected step rather than a
/// hard error (the step went somewhere the model cannot evaluate).
fn is_recoverable(e: &Error) -> bool {
    matches!(e, Error::Overflow(_) | Error::DivergentRollout(_))
}

/// Minimize the mean-square residual from `theta0`. The cost history
/// decreases strictly across accepted steps; termination reports the first
/// satisfied criterion.
pub fn lm_minimize<T: Real, P: ResidualProblem<T>>(
    problem: &mut P,
    theta0: &[T],
    opts: &LmOptions<T>,
) -> Result<FitResult<T>> {
    if !theta0.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteResidual);
    }
    let mut theta = theta0.to_vec();
    let n = theta.len();
    let r0 = problem.residuals(&theta)?;
    if r0.is_empty() {
        return Err(Error::EmptySequence);
    }
    if !all_finite(&r0) {
        return Err(Error::NonFiniteResidual);
    }
    let m = r0.len();
    let mut r = r0;
    let mut cost = mean_sq(&r);
    let mut cost_history = vec![cost];
    let mut log = Vec::new();
    let mut mu = opts.mu0;
    let mut termination = Termination::MaxIters;

    'outer: for iter in 1..=opts.max_iters {
        let jac = problem.jacobian(&theta)?;
        if jac.rows() != m || jac.cols() != n {
            return Err(Error::BadShape(format!(
                "jacobian {}x{} for {} residuals and {} parameters",
                jac.rows(),
                jac.cols(),
                m,
                n
            )));
        }
        // gradient J'r and normal matrix J'J
        let grad = jac.t_matvec(&r);
        let grad_inf = grad.iter().fold(T::zero(), |a, &g| a.max(g.abs()));
        if grad_inf <= opts.grad_tol {
            termination = Termination::GradTol;
            break;
        }
        if cost <= opts.cost_tol {
            termination = Termination::CostTol;
            break;
        }
        let jtj = jac.gram();
        let neg_grad = Matrix::column_vector(&grad.iter().map(|&g| -g).collect::<Vec<T>>());

        let mut inflations = 0usize;
        loop {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[(i, i)] = damped[(i, i)] + mu;
            }
            let delta = match lu_solve(&damped, &neg_grad) {
                Ok(d) => d.column(0),
                Err(e) => {
                    inflations += 1;
                    mu = mu * opts.mu_factor;
                    if inflations > opts.max_inflations {
                        return Err(Error::LinearSolveFailure(e.to_string()));
                    }
                    continue;
                }
            };
            let theta_try: Vec<T> = theta.iter().zip(&delta).map(|(&t, &d)| t + d).collect();
            let cost_try = match problem.residuals(&theta_try) {
                Ok(rt) if all_finite(&rt) => {
                    let c = mean_sq(&rt);
                    Some((c, rt))
                }
                Ok(_) => None,
                Err(e) if is_recoverable(&e) => None,
                Err(e) => return Err(e),
            };
            match cost_try {
                Some((c, rt)) if c < cost => {
                    let step_norm = delta.iter().fold(T::zero(), |a, &d| a + d * d).sqrt();
                    theta = theta_try;
                    r = rt;
                    cost = c;
                    cost_history.push(cost);
                    mu = mu / opts.mu_factor;
                    log.push(LmIterRecord { iter, cost, mu, grad_inf_norm: grad_inf, step_norm });
                    if cost <= opts.cost_tol {
                        termination = Termination::CostTol;
                        break 'outer;
                    }
                    if step_norm <= opts.step_tol {
                        termination = Termination::StepTol;
                        break 'outer;
                    }
                    break;
                }
                _ => {
                    inflations += 1;
                    mu = mu * opts.mu_factor;
                    if inflations > opts.max_inflations {
                        // no improving step at any damping: converged as far
                        // as the damping ladder can resolve
                        termination = Termination::StepTol;
                        break 'outer;
                    }
                }
            }
        }
    }

    Ok(FitResult {
        theta,
        cost,
        iterations: cost_history.len() - 1,
        termination,
        cost_history,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Mlp;
    use crate::rng::Pcg;

    #[test]
    fn mse_of_equal_sequences_is_zero() {
        let y = Matrix::<f64>::from_fn(5, 2, |k, j| (k + j) as f64);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn mse_hand_arithmetic() {
        let y = Matrix::new(2, 1, vec![1.0, 2.0]);
        let z = Matrix::<f64>::zeros(2, 1);
        assert_eq!(mse(&y, &z).unwrap(), 2.5);
    }

    #[test]
    fn mse_matches_naive_two_pass_summation() {
        let mut rng = Pcg::new(31);
        let y = Matrix::<f64>::from_fn(200, 3, |_, _| rng.uniform_in(-2.0, 2.0));
        let z = Matrix::<f64>::from_fn(200, 3, |_, _| rng.uniform_in(-2.0, 2.0));
        // oracle: accumulate squared differences first, divide at the end
        let mut diffs = Vec::new();
        for k in 0..200 {
            for j in 0..3 {
                let d: f64 = y[(k, j)] - z[(k, j)];
                diffs.push(d * d);
            }
        }
        let want = diffs.iter().sum::<f64>() / 200.0;
        assert!((mse(&y, &z).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn mse_rejects_empty() {
        let y: Vec<f64> = vec![];
        assert!(matches!(mse_slices(&y, &y), Err(Error::EmptySequence)));
    }

    fn linear_problem(c: Vec<f64>) -> impl ResidualProblem<f64> {
        let n = c.len();
        FnProblem {
            residuals_fn: move |theta: &[f64]| {
                Ok(theta.iter().zip(&c).map(|(&t, &ci)| t - ci).collect())
            },
            jacobian_fn: move |_: &[f64]| Ok(Matrix::identity(n)),
        }
    }

    #[test]
    fn linear_least_squares_in_three_iterations() {
        let c = vec![3.0, -4.0];
        let mut p = linear_problem(c.clone());
        let res = lm_minimize(&mut p, &[100.0, -50.0], &LmOptions::default()).unwrap();
        assert!(res.iterations <= 3, "{} iterations", res.iterations);
        for (t, ci) in res.theta.iter().zip(&c) {
            assert!((t - ci).abs() < 1e-6, "{t} vs {ci}");
        }
    }

    fn rosenbrock() -> impl ResidualProblem<f64> {
        FnProblem {
            residuals_fn: |t: &[f64]| Ok(vec![1.0 - t[0], 10.0 * (t[1] - t[0] * t[0])]),
            jacobian_fn: |t: &[f64]| {
                Ok(Matrix::from_rows(&[vec![-1.0, 0.0], vec![-20.0 * t[0], 10.0]]))
            },
        }
    }

    #[test]
    fn rosenbrock_reaches_minimum() {
        let mut p = rosenbrock();
        let res = lm_minimize(&mut p, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        assert!((res.theta[0] - 1.0).abs() < 1e-6, "theta1 {}", res.theta[0]);
        assert!((res.theta[1] - 1.0).abs() < 1e-6, "theta2 {}", res.theta[1]);
    }

    #[test]
    fn cost_history_strictly_decreases() {
        let mut p = rosenbrock();
        let res = lm_minimize(&mut p, &[-1.2, 1.0], &LmOptions::default()).unwrap();
        for w in res.cost_history.windows(2) {
            assert!(w[1] < w[0], "history not strictly decreasing: {w:?}");
        }
        assert_eq!(res.cost, *res.cost_history.last().unwrap());
        assert_eq!(res.iterations, res.cost_history.len() - 1);
    }

    #[test]
    fn gradient_zero_at_start_returns_unchanged() {
        // residual r = theta - c evaluated at theta = c: J'r = 0
        let mut p = linear_problem(vec![2.0, 5.0]);
        let res = lm_minimize(&mut p, &[2.0, 5.0], &LmOptions::default()).unwrap();
        assert_eq!(res.termination, Termination::GradTol);
        assert_eq!(res.theta, vec![2.0, 5.0]);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn huge_damping_follows_steepest_descent() {
        // seeded linear least-squares; with mu = 1e6 the step must align
        // with -J'r to better than one degree
        let mut rng = Pcg::new(77);
        let a = Matrix::<f64>::from_fn(6, 3, |_, _| rng.uniform_in(-1.0, 1.0));
        let b: Vec<f64> = (0..6).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let theta0 = [0.5, -0.3, 0.8];
        let r0: Vec<f64> = {
            let ax = a.matvec(&theta0);
            ax.iter().zip(&b).map(|(&p, &q)| p - q).collect()
        };
        let grad = a.transpose().matvec(&r0);
        let a2 = a.clone();
        let mut p = FnProblem {
            residuals_fn: move |t: &[f64]| {
                let ax = a.matvec(t);
                Ok(ax.iter().zip(&b).map(|(&p, &q)| p - q).collect())
            },
            jacobian_fn: move |_: &[f64]| Ok(a2.clone()),
        };
        let opts = LmOptions { mu0: 1e6, max_iters: 1, ..LmOptions::default() };
        let res = lm_minimize(&mut p, &theta0, &opts).unwrap();
        assert_eq!(res.iterations, 1);
        let step: Vec<f64> = res.theta.iter().zip(&theta0).map(|(&t, &t0)| t - t0).collect();
        let dot: f64 = step.iter().zip(&grad).map(|(&s, &g)| s * -g).sum();
        let ns = step.iter().map(|s| s * s).sum::<f64>().sqrt();
        let ng = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let angle = (dot / (ns * ng)).clamp(-1.0, 1.0).acos().to_degrees();
        assert!(angle < 1.0, "angle {angle} deg");
    }

    #[test]
    fn deterministic_results() {
        let run = || {
            let mut p = rosenbrock();
            lm_minimize(&mut p, &[-1.2, 1.0], &LmOptions::default()).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_initial_residual_is_an_error() {
        let mut p = FnProblem {
            residuals_fn: |_: &[f64]| Ok(vec![f64::NAN]),
            jacobian_fn: |_: &[f64]| Ok(Matrix::identity(1)),
        };
        assert!(matches!(
            lm_minimize(&mut p, &[0.0], &LmOptions::default()),
            Err(Error::NonFiniteResidual)
        ));
    }

    /// Fit a 1-10-1 tanh network to sin(x) on [-pi, pi]: at least one of 10
    /// seeded restarts reaches mse < 1e-4.
    #[test]
    fn fits_sine_with_small_network() {
        let n = 50;
        let xs: Vec<f64> = (0..n)
            .map(|k| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let mut best = f64::INFINITY;
        for seed in 0..10u64 {
            let mlp0 = Mlp::<f64>::init(&[1, 10, 1], seed).unwrap();
            let mut net = mlp0.clone();
            let xs2 = xs.clone();
            let ys2 = ys.clone();
            let mut p = FnProblem {
                residuals_fn: move |theta: &[f64]| {
                    net.unflatten(theta)?;
                    xs2.iter()
                        .zip(&ys2)
                        .map(|(&x, &y)| Ok(net.forward(&[x])?[0] - y))
                        .collect()
                },
                jacobian_fn: {
                    let mut net = mlp0.clone();
                    let xs3 = xs.clone();
                    move |theta: &[f64]| {
                        net.unflatten(theta)?;
                        let mut j = Matrix::zeros(xs3.len(), theta.len());
                        for (row, &x) in xs3.iter().enumerate() {
                            let jp = net.jacobian_params(&[x])?;
                            for c in 0..theta.len() {
                                j[(row, c)] = jp[(0, c)];
                            }
                        }
                        Ok(j)
                    }
                },
            };
            let theta0 = mlp0.flatten();
            let res = lm_minimize(&mut p, &theta0, &LmOptions::default()).unwrap();
            best = best.min(res.cost);
            if best < 1e-4 {
                break;
            }
        }
        assert!(best < 1e-4, "best mse {best}");
    }
}
