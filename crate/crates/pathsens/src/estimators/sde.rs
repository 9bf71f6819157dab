//! IRE/IFIM estimators for SDEs over Euler-Maruyama ensembles.
//!
//! Estimates are defined only on the integration lattice; there is no
//! interpolation between steps. Finiteness of the drift-difference
//! exponential moment (the Novikov condition) is a model assumption the
//! caller asserts — it is not checkable at runtime.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    mean_se, mean_se_matrices, IfimCurve, IreCurve, MonteCarloEstimate, SeFlag, TimeGrid,
};
use crate::model::{ParameterVector, Perturbation, SdeModel};
use crate::simulate::{PathEnsemble, SdeTrajectory};

fn check_nonempty(ens: &PathEnsemble<SdeTrajectory>) -> Result<()> {
    if ens.is_empty() {
        return Err(Error::InvalidConfig("empty ensemble".into()));
    }
    Ok(())
}

/// ½ |σ(x)⁻¹ (b^{θ+ε}(x) − b^θ(x))|² at one state.
fn ire_term(
    sde: &dyn SdeModel,
    theta: &ParameterVector,
    theta_bar: &ParameterVector,
    x: &[f64],
) -> Result<f64> {
    let d = sde.dimension();
    let b = sde.drift(theta, x);
    let b_bar = sde.drift(theta_bar, x);
    let diff = nalgebra::DVector::from_iterator(d, b_bar.iter().zip(&b).map(|(&u, &v)| u - v));
    let sigma = sde.diffusion(x);
    let u = sigma.lu().solve(&diff).ok_or(Error::SingularDiffusion)?;
    Ok(0.5 * u.norm_squared())
}

/// ∇b(x)ᵀ (σσᵀ)⁻¹ ∇b(x) at one state, symmetrized against solve rounding.
fn ifim_term(sde: &dyn SdeModel, theta: &ParameterVector, x: &[f64]) -> Result<DMatrix<f64>> {
    let jac = sde.drift_jacobian(theta, x);
    let sigma = sde.diffusion(x);
    let gram = &sigma * sigma.transpose();
    let solved = gram.lu().solve(&jac).ok_or(Error::SingularDiffusion)?;
    let fim = jac.transpose() * solved;
    Ok(0.5 * (&fim + fim.transpose()))
}

/// Instantaneous RE at lattice time `t`.
pub fn ire_sde(
    sde: &dyn SdeModel,
    ens: &PathEnsemble<SdeTrajectory>,
    theta: &ParameterVector,
    eps: &Perturbation,
    t: f64,
) -> Result<MonteCarloEstimate> {
    check_nonempty(ens)?;
    let theta_bar = theta.perturbed(eps)?;
    let step = ens.trajectories[0].step_index_of(t)?;
    let samples = ens
        .trajectories
        .par_iter()
        .map(|traj| ire_term(sde, theta, &theta_bar, traj.state_at_step(step)))
        .collect::<Result<Vec<f64>>>()?;
    let (value, std_error, se_flag) = mean_se(&samples)?;
    Ok(MonteCarloEstimate {
        value,
        std_error,
        ensemble_size: ens.len(),
        se_flag,
    })
}

/// Instantaneous FIM at lattice time `t`.
pub fn ifim_sde(
    sde: &dyn SdeModel,
    ens: &PathEnsemble<SdeTrajectory>,
    theta: &ParameterVector,
    t: f64,
) -> Result<DMatrix<f64>> {
    Ok(ifim_sde_with_se(sde, ens, theta, t)?.0)
}

fn ifim_sde_with_se(
    sde: &dyn SdeModel,
    ens: &PathEnsemble<SdeTrajectory>,
    theta: &ParameterVector,
    t: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_nonempty(ens)?;
    let step = ens.trajectories[0].step_index_of(t)?;
    let samples = ens
        .trajectories
        .par_iter()
        .map(|traj| ifim_term(sde, theta, traj.state_at_step(step)))
        .collect::<Result<Vec<_>>>()?;
    mean_se_matrices(&samples)
}

/// IRE curve on grid points that lie on the integration lattice.
pub fn estimate_ire_sde(
    ens: &PathEnsemble<SdeTrajectory>,
    grid: &TimeGrid,
    sde: &dyn SdeModel,
    theta: &ParameterVector,
    eps: &Perturbation,
) -> Result<IreCurve> {
    check_nonempty(ens)?;
    let mut values = Vec::with_capacity(grid.len());
    let mut std_errors = Vec::with_capacity(grid.len());
    let mut flag = SeFlag::Iid;
    for &t in grid.points() {
        let est = ire_sde(sde, ens, theta, eps, t)?;
        values.push(est.value);
        std_errors.push(est.std_error);
        flag = est.se_flag;
    }
    Ok(IreCurve {
        grid: grid.clone(),
        values,
        std_errors,
        ensemble_size: ens.len(),
        se_flag: flag,
    })
}

/// IFIM curve on grid points that lie on the integration lattice.
pub fn estimate_ifim_sde(
    ens: &PathEnsemble<SdeTrajectory>,
    grid: &TimeGrid,
    sde: &dyn SdeModel,
    theta: &ParameterVector,
) -> Result<IfimCurve> {
    check_nonempty(ens)?;
    let mut matrices = Vec::with_capacity(grid.len());
    let mut std_errors = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let (mean, se) = ifim_sde_with_se(sde, ens, theta, t)?;
        matrices.push(mean);
        std_errors.push(se);
    }
    let se_flag = if ens.len() == 1 {
        SeFlag::Degenerate
    } else {
        SeFlag::Iid
    };
    Ok(IfimCurve {
        grid: grid.clone(),
        matrices,
        std_errors,
        ensemble_size: ens.len(),
        se_flag,
    })
}
