//! Pathwise sensitivity estimators.
//!
//! Instantaneous relative entropy (IRE) and instantaneous Fisher information
//! (IFIM) for CTMC reaction networks, finite-support DTMCs and SDEs, their
//! time-integrated pathwise forms, and the stationary relative entropy rate.
//! All ensemble estimates carry plain iid Monte Carlo standard errors.
//!
//! Estimation is a pure fold over immutable ensembles. Per-trajectory values
//! are collected in trajectory order and reduced by pairwise summation, so
//! parallel and serial runs produce bit-identical results.

mod ctmc;
mod dtmc;
mod sde;

pub use ctmc::{
    averaged_re, estimate_ifim_ctmc, estimate_ire_ctmc, fim_rer_stationary_ctmc,
    ifim_integrand_ctmc, ire_integrand_ctmc, pathwise_fim_ctmc, pathwise_re_ctmc,
    rer_stationary_ctmc,
};
pub use dtmc::{ifim_dtmc, ire_dtmc, pathwise_re_dtmc};
pub use sde::{estimate_ifim_sde, estimate_ire_sde, ifim_sde, ire_sde};

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{CountState, Perturbation};

/// Uniform evaluation lattice over `[0, T]` for reported curves.
///
/// Time integrals never use this grid — CTMC integrals are sojourn-exact —
/// it only fixes where curves are sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, n_points: usize) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidConfig("grid needs at least 2 points".into()));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "horizon {horizon} must be > 0"
            )));
        }
        let step = horizon / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
        points[n_points - 1] = horizon;
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// Reliability tag for a reported standard error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeFlag {
    /// Plain iid ensemble standard error.
    Iid,
    /// Single-sample ensemble: SE is 0 by construction and meaningless.
    Degenerate,
    /// Ergodic average of one long trajectory: SE is nominal, no
    /// autocorrelation correction is applied.
    ErgodicNominal,
}

impl fmt::Display for SeFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeFlag::Iid => write!(f, "iid"),
            SeFlag::Degenerate => write!(f, "degenerate-single-sample"),
            SeFlag::ErgodicNominal => write!(f, "ergodic-average-nominal"),
        }
    }
}

/// Scalar Monte Carlo estimate with its ensemble standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub value: f64,
    pub std_error: f64,
    pub ensemble_size: usize,
    pub se_flag: SeFlag,
}

/// Time-gridded IRE estimate in nats per unit time.
#[derive(Debug, Clone)]
pub struct IreCurve {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ensemble_size: usize,
    pub se_flag: SeFlag,
}

/// Time-gridded K×K IFIM estimate with elementwise standard errors.
#[derive(Debug, Clone)]
pub struct IfimCurve {
    pub grid: TimeGrid,
    pub matrices: Vec<DMatrix<f64>>,
    pub std_errors: Vec<DMatrix<f64>>,
    pub ensemble_size: usize,
    pub se_flag: SeFlag,
}

/// Initial distribution ν of a process, used for sampling ensembles and for
/// the initial terms of the pathwise decompositions.
#[derive(Debug, Clone)]
pub enum InitialDistribution<S> {
    PointMass {
        state: S,
    },
    Discrete {
        states: Vec<S>,
        probabilities: Vec<f64>,
        /// Optional ∇_θ log ν per atom, required for the initial FIM.
        grad_log: Option<Vec<Vec<f64>>>,
    },
}

impl<S: Clone> InitialDistribution<S> {
    pub fn point(state: S) -> Self {
        Self::PointMass { state }
    }

    pub fn discrete(states: Vec<S>, probabilities: Vec<f64>) -> Result<Self> {
        Self::discrete_with_grad(states, probabilities, None)
    }

    pub fn discrete_with_grad(
        states: Vec<S>,
        probabilities: Vec<f64>,
        grad_log: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if states.len() != probabilities.len() || states.is_empty() {
            return Err(Error::InvalidModel(
                "initial distribution needs matching nonempty states/probabilities".into(),
            ));
        }
        if probabilities.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidModel(
                "initial probabilities must be nonnegative".into(),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "initial probabilities sum to {sum}, not 1 (within 1e-12)"
            )));
        }
        if let Some(g) = &grad_log {
            if g.len() != states.len() {
                return Err(Error::InvalidModel(
                    "one ∇ log ν atom per state required".into(),
                ));
            }
        }
        Ok(Self::Discrete {
            states,
            probabilities,
            grad_log,
        })
    }

    /// Draw a state. A point mass consumes no randomness, so point-mass
    /// ensembles line up stream-for-stream with the single-trajectory API.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> S {
        match self {
            Self::PointMass { state } => state.clone(),
            Self::Discrete {
                states,
                probabilities,
                ..
            } => {
                let u: f64 = rng.random::<f64>();
                let mut cum = 0.0;
                for (s, &p) in states.iter().zip(probabilities) {
                    cum += p;
                    if u < cum {
                        return s.clone();
                    }
                }
                states.last().unwrap().clone()
            }
        }
    }

    fn atoms(&self) -> Vec<(&S, f64)> {
        match self {
            Self::PointMass { state } => vec![(state, 1.0)],
            Self::Discrete {
                states,
                probabilities,
                ..
            } => states.iter().zip(probabilities.iter().copied()).collect(),
        }
    }
}

impl InitialDistribution<CountState> {
    /// Poisson(λ) marginal on one species (all other species zero),
    /// truncated where the tail mass drops below 1e-12.
    pub fn truncated_poisson(lambda: f64, species: usize, n_species: usize) -> Self {
        let (states, probabilities) = poisson_atoms(lambda, species, n_species);
        Self::Discrete {
            states,
            probabilities,
            grad_log: None,
        }
    }

    /// Same, carrying ∇_θ log ν = x/λ − 1 in coordinate `param` so the
    /// initial FIM (= 1/λ for a Poisson mean) is available.
    pub fn truncated_poisson_with_grad(
        lambda: f64,
        species: usize,
        n_species: usize,
        param: usize,
        n_params: usize,
    ) -> Self {
        let (states, probabilities) = poisson_atoms(lambda, species, n_species);
        let grad_log = states
            .iter()
            .map(|s| {
                let mut g = vec![0.0; n_params];
                g[param] = s.counts()[species] as f64 / lambda - 1.0;
                g
            })
            .collect();
        Self::Discrete {
            states,
            probabilities,
            grad_log: Some(grad_log),
        }
    }
}

fn poisson_atoms(lambda: f64, species: usize, n_species: usize) -> (Vec<CountState>, Vec<f64>) {
    let mut states = Vec::new();
    let mut probabilities = Vec::new();
    let mut pmf = (-lambda).exp();
    let mut cum = 0.0;
    let mut x: u64 = 0;
    loop {
        let mut counts = vec![0u64; n_species];
        counts[species] = x;
        states.push(CountState::new(counts));
        probabilities.push(pmf);
        cum += pmf;
        if 1.0 - cum < 1e-12 {
            break;
        }
        x += 1;
        pmf *= lambda / x as f64;
    }
    (states, probabilities)
}

/// Relative entropy Σ ν(x) log(ν(x)/ν̄(x)) of two initial distributions.
///
/// Returns the definition's "otherwise" branch — positive infinity — when ν
/// puts mass where ν̄ does not, rather than raising an error.
pub fn initial_re<S: Eq + Hash + Clone>(
    nu: &InitialDistribution<S>,
    nu_bar: &InitialDistribution<S>,
) -> f64 {
    let mut bar: HashMap<&S, f64> = HashMap::new();
    for (s, p) in nu_bar.atoms() {
        *bar.entry(s).or_insert(0.0) += p;
    }
    let mut re = 0.0;
    for (s, p) in nu.atoms() {
        if p == 0.0 {
            continue;
        }
        match bar.get(s) {
            Some(&q) if q > 0.0 => re += p * (p / q).ln(),
            _ => return f64::INFINITY,
        }
    }
    re.max(0.0)
}

/// FIM of an initial distribution, E_ν[∇ log ν ∇ log νᵀ].
///
/// A point mass carries no parameter dependence and contributes the zero
/// matrix; a discrete distribution must supply its gradient atoms.
pub fn initial_fim<S>(nu: &InitialDistribution<S>, n_params: usize) -> Result<DMatrix<f64>> {
    match nu {
        InitialDistribution::PointMass { .. } => Ok(DMatrix::zeros(n_params, n_params)),
        InitialDistribution::Discrete {
            probabilities,
            grad_log,
            ..
        } => {
            let grads = grad_log.as_ref().ok_or(Error::MissingGradients)?;
            let mut fim = DMatrix::zeros(n_params, n_params);
            for (g, &p) in grads.iter().zip(probabilities) {
                for i in 0..n_params {
                    for j in 0..n_params {
                        fim[(i, j)] += p * g[i] * g[j];
                    }
                }
            }
            Ok(fim)
        }
    }
}

/// Diagnostic ratio RE / (½ εᵀ F ε); approaches 1 as |ε| → 0.
pub fn re_quadratic_ratio(re: f64, fim: &DMatrix<f64>, eps: &Perturbation) -> Result<f64> {
    let d = eps.delta();
    let mut quad = 0.0;
    for i in 0..d.len() {
        for j in 0..d.len() {
            quad += d[i] * fim[(i, j)] * d[j];
        }
    }
    quad *= 0.5;
    if quad.is_nan() || quad <= 0.0 {
        return Err(Error::DegenerateQuadraticForm(quad));
    }
    Ok(re / quad)
}

/// Deterministic pairwise sum; reassociation error stays O(log n)·ε.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Ensemble mean and iid standard error of per-trajectory values.
pub(crate) fn mean_se(values: &[f64]) -> Result<(f64, f64, SeFlag)> {
    let m = values.len();
    if m == 0 {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    let mean = pairwise_sum(values) / m as f64;
    if m == 1 {
        return Ok((mean, 0.0, SeFlag::Degenerate));
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt(), SeFlag::Iid))
}

/// Entrywise mean and iid standard error over same-shape matrices.
pub(crate) fn mean_se_matrices(mats: &[DMatrix<f64>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = mats.len();
    if m == 0 {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    let (rows, cols) = mats[0].shape();
    let mut mean = DMatrix::zeros(rows, cols);
    let mut se = DMatrix::zeros(rows, cols);
    let mut scratch = vec![0.0; m];
    for r in 0..rows {
        for c in 0..cols {
            for (idx, mat) in mats.iter().enumerate() {
                scratch[idx] = mat[(r, c)];
            }
            let (mu, s, _) = mean_se(&scratch)?;
            mean[(r, c)] = mu;
            se[(r, c)] = s;
        }
    }
    Ok((mean, se))
}
