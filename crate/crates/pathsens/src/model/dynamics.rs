//! Transition-kernel chains and drift/diffusion systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::ParameterVector;

/// Discrete-time Markov chain with an enumerable finite next-state support.
///
/// States are indices `0..state_count()`. The estimators evaluate the inner
/// integral of the instantaneous quantities as an exact finite sum over
/// `transition_row`, so the kernel must put all its mass on this finite set;
/// continuous-support chains are out of scope.
pub trait DtmcModel: Send + Sync {
    fn state_count(&self) -> usize;

    /// Dense transition row p^θ(x, ·). Must be a probability vector: entries
    /// in [0, 1] summing to 1 within 1e-12 (checked by the simulator and
    /// estimators via [`validate_row`]).
    fn transition_row(&self, theta: &ParameterVector, x: usize) -> Vec<f64>;

    /// ∇_θ log p^θ(x, y), dense length-K vector. Only queried where
    /// p^θ(x, y) > 0.
    fn grad_log_transition(&self, theta: &ParameterVector, x: usize, y: usize) -> Vec<f64>;
}

/// Row-sum and range check shared by simulator and estimators.
pub(crate) fn validate_row(row: &[f64], x: usize) -> Result<()> {
    let mut sum = 0.0;
    for &p in row {
        if !(0.0..=1.0 + 1e-12).contains(&p) {
            return Err(Error::InvalidModel(format!(
                "transition row of state {x} has entry {p} outside [0, 1]"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "transition row of state {x} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

/// Two-state chain with p(0→1) = θ[p01] and p(1→0) = θ[p10].
#[derive(Debug, Clone)]
pub struct TwoStateChain {
    pub p01_param: usize,
    pub p10_param: usize,
}

impl TwoStateChain {
    pub fn new(p01_param: usize, p10_param: usize) -> Self {
        Self {
            p01_param,
            p10_param,
        }
    }

    /// Stationary distribution (π₀, π₁) solving πP = π.
    pub fn stationary(&self, theta: &ParameterVector) -> [f64; 2] {
        let p01 = theta.get(self.p01_param);
        let p10 = theta.get(self.p10_param);
        [p10 / (p01 + p10), p01 / (p01 + p10)]
    }
}

impl DtmcModel for TwoStateChain {
    fn state_count(&self) -> usize {
        2
    }

    fn transition_row(&self, theta: &ParameterVector, x: usize) -> Vec<f64> {
        let p01 = theta.get(self.p01_param);
        let p10 = theta.get(self.p10_param);
        match x {
            0 => vec![1.0 - p01, p01],
            _ => vec![p10, 1.0 - p10],
        }
    }

    fn grad_log_transition(&self, theta: &ParameterVector, x: usize, y: usize) -> Vec<f64> {
        let mut grad = vec![0.0; theta.len()];
        let (param, moved) = match x {
            0 => (self.p01_param, y == 1),
            _ => (self.p10_param, y == 0),
        };
        let p = theta.get(param);
        grad[param] += if moved { 1.0 / p } else { -1.0 / (1.0 - p) };
        grad
    }
}

/// Drift/diffusion system dX = b^θ(X) dt + σ(X) dW.
///
/// σ must be invertible at every state the estimators visit; a singular
/// solve surfaces as [`Error::SingularDiffusion`].
pub trait SdeModel: Send + Sync {
    fn dimension(&self) -> usize;

    fn drift(&self, theta: &ParameterVector, x: &[f64]) -> Vec<f64>;

    /// d×K Jacobian ∇_θ b^θ(x).
    fn drift_jacobian(&self, theta: &ParameterVector, x: &[f64]) -> DMatrix<f64>;

    /// d×d diffusion matrix σ(x).
    fn diffusion(&self, x: &[f64]) -> DMatrix<f64>;
}

/// One-dimensional Ornstein-Uhlenbeck process dX = −θ[rate] X dt + σ dW.
#[derive(Debug, Clone)]
pub struct OrnsteinUhlenbeck {
    pub rate_param: usize,
    pub sigma: f64,
}

impl OrnsteinUhlenbeck {
    pub fn new(rate_param: usize, sigma: f64) -> Self {
        Self { rate_param, sigma }
    }
}

impl SdeModel for OrnsteinUhlenbeck {
    fn dimension(&self) -> usize {
        1
    }

    fn drift(&self, theta: &ParameterVector, x: &[f64]) -> Vec<f64> {
        vec![-theta.get(self.rate_param) * x[0]]
    }

    fn drift_jacobian(&self, theta: &ParameterVector, x: &[f64]) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(1, theta.len());
        jac[(0, self.rate_param)] = -x[0];
        jac
    }

    fn diffusion(&self, _x: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, self.sigma)
    }
}
