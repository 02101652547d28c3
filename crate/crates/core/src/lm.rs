//! Damped least squares (Levenberg–Marquardt) over a user-defined parameter
//! manifold.

use nalgebra::{DMatrix, DVector};

/// A nonlinear least-squares problem. `apply` maps a tangent-space step onto
/// the parameter set so rotations can be updated multiplicatively.
pub trait LeastSquares {
    type Params: Clone;

    fn residuals(&self, p: &Self::Params) -> DVector<f64>;
    fn jacobian(&self, p: &Self::Params) -> DMatrix<f64>;
    fn apply(&self, p: &Self::Params, delta: &DVector<f64>) -> Self::Params;
}

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step changes the cost by less than this fraction.
    pub relative_tolerance: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self { lambda0: 1e-3, lambda_up: 10.0, lambda_down: 10.0, max_iterations: 100, relative_tolerance: 1e-12 }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<P> {
    pub params: P,
    /// Sum of squared residuals at the starting point.
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
}

const LAMBDA_MAX: f64 = 1e16;

pub fn minimize<P: LeastSquares>(problem: &P, start: P::Params, settings: &LmSettings) -> LmOutcome<P::Params> {
    let mut params = start;
    let mut r = problem.residuals(&params);
    let initial_cost = r.norm_squared();
    let mut cost = initial_cost;
    let mut lambda = settings.lambda0;
    let mut iterations = 0;

    while iterations < settings.max_iterations && cost > 0.0 {
        iterations += 1;
        let j = problem.jacobian(&params);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-15;

        let mut accepted = false;
        while lambda < LAMBDA_MAX {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda * jtj[(i, i)].max(diag_floor);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= settings.lambda_up;
                    continue;
                }
            };
            let candidate = problem.apply(&params, &step);
            let r_new = problem.residuals(&candidate);
            let new_cost = r_new.norm_squared();
            if new_cost.is_finite() && new_cost < cost {
                let rel_change = (cost - new_cost) / cost;
                params = candidate;
                r = r_new;
                cost = new_cost;
                lambda /= settings.lambda_down;
                accepted = true;
                if rel_change < settings.relative_tolerance {
                    return LmOutcome { params, initial_cost, cost, iterations };
                }
                break;
            }
            lambda *= settings.lambda_up;
        }
        if !accepted {
            break;
        }
    }
    LmOutcome { params, initial_cost, cost, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fit y = a·exp(b·x).
    struct ExpFit {
        x: Vec<f64>,
        y: Vec<f64>,
    }

    impl LeastSquares for ExpFit {
        type Params = [f64; 2];
        fn residuals(&self, p: &[f64; 2]) -> DVector<f64> {
            DVector::from_iterator(self.x.len(), self.x.iter().zip(&self.y).map(|(x, y)| p[0] * (p[1] * x).exp() - y))
        }
        fn jacobian(&self, p: &[f64; 2]) -> DMatrix<f64> {
            let mut j = DMatrix::zeros(self.x.len(), 2);
            for (i, x) in self.x.iter().enumerate() {
                j[(i, 0)] = (p[1] * x).exp();
                j[(i, 1)] = p[0] * x * (p[1] * x).exp();
            }
            j
        }
        fn apply(&self, p: &[f64; 2], d: &DVector<f64>) -> [f64; 2] {
            [p[0] + d[0], p[1] + d[1]]
        }
    }

    #[test]
    fn recovers_exponential() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|x| 2.5 * (-0.7 * x).exp()).collect();
        let out = minimize(&ExpFit { x, y }, [1.0, 0.0], &LmSettings::default());
        assert!((out.params[0] - 2.5).abs() < 1e-8, "{:?}", out.params);
        assert!((out.params[1] + 0.7).abs() < 1e-8);
        assert!(out.cost <= out.initial_cost);
    }
}
