//! IRE/IFIM estimators for finite-support discrete-time chains.
//!
//! The inner integral over next states is computed exactly as a finite sum
//! over the transition row; only the expectation over the step-(i−1) state is
//! Monte Carlo. Rows are precomputed per state, so the per-trajectory work is
//! a table lookup.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{initial_re, mean_se, InitialDistribution, MonteCarloEstimate};
use crate::model::{validate_row, DtmcModel, ParameterVector, Perturbation};
use crate::simulate::{DiscreteTrajectory, PathEnsemble};

/// Exact inner sum Σ_{x'} p(x,x') log(p(x,x')/p̄(x,x')) for every state x.
fn row_kl_table(
    model: &dyn DtmcModel,
    theta: &ParameterVector,
    theta_bar: &ParameterVector,
) -> Result<Vec<f64>> {
    let n = model.state_count();
    let mut table = Vec::with_capacity(n);
    for x in 0..n {
        let row = model.transition_row(theta, x);
        let row_bar = model.transition_row(theta_bar, x);
        validate_row(&row, x)?;
        validate_row(&row_bar, x)?;
        let mut kl = 0.0;
        for (y, (&p, &q)) in row.iter().zip(&row_bar).enumerate() {
            match (p > 0.0, q > 0.0) {
                (true, true) => kl += p * (p / q).ln(),
                (false, false) => {}
                _ => {
                    return Err(Error::AbsoluteContinuityViolation(format!(
                        "transition ({x} → {y}): probability {p} vs {q}; supports differ"
                    )))
                }
            }
        }
        // KL of two rows is ≥ 0 exactly; clip the last-bit rounding
        table.push(kl.max(0.0));
    }
    Ok(table)
}

/// Σ_{x'} p ∇log p ∇log pᵀ for every state x.
fn row_fim_table(model: &dyn DtmcModel, theta: &ParameterVector) -> Result<Vec<DMatrix<f64>>> {
    let n = model.state_count();
    let k = theta.len();
    let mut table = Vec::with_capacity(n);
    for x in 0..n {
        let row = model.transition_row(theta, x);
        validate_row(&row, x)?;
        let mut fim = DMatrix::zeros(k, k);
        for (y, &p) in row.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let g = model.grad_log_transition(theta, x, y);
            for i in 0..k {
                for j in 0..k {
                    fim[(i, j)] += p * g[i] * g[j];
                }
            }
        }
        table.push(fim);
    }
    Ok(table)
}

fn check_step(ens: &PathEnsemble<DiscreteTrajectory>, step: usize) -> Result<()> {
    if ens.is_empty() {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    let steps = ens.trajectories[0].steps();
    if step == 0 || step > steps {
        return Err(Error::OutOfRange(format!(
            "step i = {step} outside 1..={steps}"
        )));
    }
    Ok(())
}

/// Instantaneous RE at step `i`: the ensemble average over step-(i−1)
/// states of the exact inner sum.
pub fn ire_dtmc(
    model: &dyn DtmcModel,
    ens: &PathEnsemble<DiscreteTrajectory>,
    theta: &ParameterVector,
    eps: &Perturbation,
    step: usize,
) -> Result<MonteCarloEstimate> {
    check_step(ens, step)?;
    let theta_bar = theta.perturbed(eps)?;
    let table = row_kl_table(model, theta, &theta_bar)?;
    let samples: Vec<f64> = ens
        .trajectories
        .iter()
        .map(|traj| table[traj.states[step - 1]])
        .collect();
    let (value, std_error, se_flag) = mean_se(&samples)?;
    Ok(MonteCarloEstimate {
        value,
        std_error,
        ensemble_size: ens.len(),
        se_flag,
    })
}

/// Instantaneous FIM at step `i`.
pub fn ifim_dtmc(
    model: &dyn DtmcModel,
    ens: &PathEnsemble<DiscreteTrajectory>,
    theta: &ParameterVector,
    step: usize,
) -> Result<DMatrix<f64>> {
    check_step(ens, step)?;
    let table = row_fim_table(model, theta)?;
    let samples: Vec<DMatrix<f64>> = ens
        .trajectories
        .iter()
        .map(|traj| table[traj.states[step - 1]].clone())
        .collect();
    let (mean, _) = crate::estimators::mean_se_matrices(&samples)?;
    Ok(mean)
}

/// Pathwise relative entropy over `steps` transitions:
/// RE(ν‖ν̄) + Σ_{i=1}^{T} IRE(i), with the per-trajectory sums estimated
/// jointly so the reported standard error covers the whole path term.
pub fn pathwise_re_dtmc(
    model: &dyn DtmcModel,
    ens: &PathEnsemble<DiscreteTrajectory>,
    theta: &ParameterVector,
    eps: &Perturbation,
    steps: usize,
    nu: &InitialDistribution<usize>,
    nu_bar: &InitialDistribution<usize>,
) -> Result<MonteCarloEstimate> {
    if ens.is_empty() {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    let available = ens.trajectories[0].steps();
    if steps > available {
        return Err(Error::OutOfRange(format!(
            "requested {steps} steps, trajectories have {available}"
        )));
    }
    let theta_bar = theta.perturbed(eps)?;
    let table = row_kl_table(model, theta, &theta_bar)?;
    let totals: Vec<f64> = ens
        .trajectories
        .iter()
        .map(|traj| traj.states[..steps].iter().map(|&x| table[x]).sum())
        .collect();
    let (mean, std_error, se_flag) = mean_se(&totals)?;
    Ok(MonteCarloEstimate {
        value: initial_re(nu, nu_bar) + mean,
        std_error,
        ensemble_size: ens.len(),
        se_flag,
    })
}
