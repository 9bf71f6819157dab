//! Observable sensitivity indices and Cramér-Rao screening.
//!
//! Finite-difference sensitivity estimates use common random numbers: the
//! paired ensembles share per-trajectory seeds, so an unperturbed comparison
//! is bit-identical and paired differences carry far less variance than
//! independent runs would.
//!
//! The screening bound |∂_k E[f]| ≤ √Var(f) √F_kk needs one ensemble at θ
//! regardless of K, which is what makes bound-then-estimate cheaper than a
//! finite-difference pass over every parameter.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{mean_se, pairwise_sum, pathwise_fim_ctmc, InitialDistribution, TimeGrid};
use crate::model::{CountState, ParameterVector, Perturbation, ReactionNetwork};
use crate::simulate::{ssa_ensemble, JumpTrajectory, PathEnsemble};

/// Default floor under which a relative-difference denominator counts as zero.
pub const DEFAULT_DENOMINATOR_FLOOR: f64 = 1e-9;

/// Path functional mapping a trajectory to a real.
#[derive(Debug, Clone, PartialEq)]
pub enum Observable {
    /// Species count at a fixed time.
    SpeciesCountAt { species: usize, t: f64 },
    /// (1/T) ∫₀ᵀ X_s ds for one species, sojourn-exact.
    TimeAveragedCount { species: usize },
}

impl Observable {
    pub fn name(&self, net: &ReactionNetwork) -> String {
        match self {
            Observable::SpeciesCountAt { species, t } => {
                format!("count[{}]@t={t}", net.species_names()[*species])
            }
            Observable::TimeAveragedCount { species } => {
                format!("timeavg[{}]", net.species_names()[*species])
            }
        }
    }

    pub fn evaluate(&self, traj: &JumpTrajectory) -> Result<f64> {
        match self {
            Observable::SpeciesCountAt { species, t } => {
                Ok(traj.state_at(*t)?.counts()[*species] as f64)
            }
            Observable::TimeAveragedCount { species } => {
                let horizon = traj.horizon();
                let mut integral = 0.0;
                for (state, duration) in traj.sojourns(0.0, horizon) {
                    integral += duration * state.counts()[*species] as f64;
                }
                Ok(integral / horizon)
            }
        }
    }
}

/// One-sided relative species differences S_{k,ℓ,t} for a single perturbed
/// parameter ℓ, on a time grid.
#[derive(Debug, Clone)]
pub struct SpeciesSiMatrix {
    pub grid: TimeGrid,
    pub parameter: usize,
    pub eps: f64,
    /// `values[species][grid point]`; `None` marks an undefined entry whose
    /// denominator fell below the floor (never coerced to 0).
    pub values: Vec<Vec<Option<f64>>>,
}

/// S_{k,ℓ,t} = (m_k^θ(t) − m_k^{θ+ε_ℓ}(t)) / m_k^θ(t) with ensemble means m
/// and common random numbers across the two ensembles.
#[allow(clippy::too_many_arguments)]
pub fn fd_species_si(
    net: &ReactionNetwork,
    theta: &ParameterVector,
    x0: &CountState,
    parameter: usize,
    eps: f64,
    grid: &TimeGrid,
    ensemble_size: usize,
    base_seed: u64,
    floor: f64,
) -> Result<SpeciesSiMatrix> {
    if parameter >= theta.len() {
        return Err(Error::IndexOutOfRange {
            what: "parameter",
            index: parameter,
            len: theta.len(),
        });
    }
    let theta_bar = theta.perturbed(&Perturbation::single(theta.len(), parameter, eps))?;
    let init = InitialDistribution::point(x0.clone());
    let horizon = grid.horizon();
    let base = ssa_ensemble(net, theta, &init, horizon, ensemble_size, base_seed)?;
    let perturbed = ssa_ensemble(net, &theta_bar, &init, horizon, ensemble_size, base_seed)?;

    let n = net.species_count();
    let mut values = vec![Vec::with_capacity(grid.len()); n];
    let mut scratch = vec![0.0; ensemble_size];
    for &t in grid.points() {
        for (species, series) in values.iter_mut().enumerate() {
            let mut mean_at = |ens: &PathEnsemble<JumpTrajectory>| -> Result<f64> {
                for (slot, traj) in scratch.iter_mut().zip(&ens.trajectories) {
                    *slot = traj.state_at(t)?.counts()[species] as f64;
                }
                Ok(pairwise_sum(&scratch) / ensemble_size as f64)
            };
            let m_base = mean_at(&base)?;
            let m_pert = mean_at(&perturbed)?;
            series.push(if m_base.abs() < floor {
                None
            } else {
                Some((m_base - m_pert) / m_base)
            });
        }
    }
    Ok(SpeciesSiMatrix {
        grid: grid.clone(),
        parameter,
        eps,
        values,
    })
}

/// Total sensitivity per grid point: the mean of the defined per-species
/// entries, plus how many entries were skipped as undefined.
pub fn total_si(matrix: &SpeciesSiMatrix) -> (Vec<f64>, Vec<usize>) {
    let n_grid = matrix.grid.len();
    let mut totals = Vec::with_capacity(n_grid);
    let mut skipped = Vec::with_capacity(n_grid);
    for g in 0..n_grid {
        let mut sum = 0.0;
        let mut defined = 0usize;
        let mut missing = 0usize;
        for species_row in &matrix.values {
            match species_row[g] {
                Some(v) => {
                    sum += v;
                    defined += 1;
                }
                None => missing += 1,
            }
        }
        totals.push(if defined > 0 {
            sum / defined as f64
        } else {
            0.0
        });
        skipped.push(missing);
    }
    (totals, skipped)
}

/// Central-difference sensitivity index ∂_k E[f] with common random numbers.
///
/// Returns (estimate, standard error); the SE comes from the per-trajectory
/// paired differences.
#[allow(clippy::too_many_arguments)]
pub fn fd_observable_si(
    net: &ReactionNetwork,
    theta: &ParameterVector,
    x0: &CountState,
    parameter: usize,
    observable: &Observable,
    horizon: f64,
    ensemble_size: usize,
    base_seed: u64,
    h: f64,
) -> Result<(f64, f64)> {
    let pairs = fd_observable_pairs(
        net,
        theta,
        x0,
        parameter,
        std::slice::from_ref(observable),
        horizon,
        ensemble_size,
        base_seed,
        h,
    )?;
    Ok(pairs[0])
}

/// Shared paired-ensemble machinery: one ±h ensemble pair evaluates any
/// number of observables.
#[allow(clippy::too_many_arguments)]
fn fd_observable_pairs(
    net: &ReactionNetwork,
    theta: &ParameterVector,
    x0: &CountState,
    parameter: usize,
    observables: &[Observable],
    horizon: f64,
    ensemble_size: usize,
    base_seed: u64,
    h: f64,
) -> Result<Vec<(f64, f64)>> {
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidConfig(format!("step h = {h} must be > 0")));
    }
    let k = theta.len();
    let down = Perturbation::single(k, parameter, -h);
    theta.perturbed(&down).map_err(|_| Error::StepTooLarge {
        name: theta.names()[parameter].clone(),
        h,
    })?;
    let theta_up = theta.perturbed(&Perturbation::single(k, parameter, h))?;
    let theta_down = theta.perturbed(&down)?;

    let init = InitialDistribution::point(x0.clone());
    let ens_up = ssa_ensemble(net, &theta_up, &init, horizon, ensemble_size, base_seed)?;
    let ens_down = ssa_ensemble(net, &theta_down, &init, horizon, ensemble_size, base_seed)?;

    let mut out = Vec::with_capacity(observables.len());
    for observable in observables {
        let diffs = ens_up
            .trajectories
            .par_iter()
            .zip(&ens_down.trajectories)
            .map(|(up, dn)| Ok((observable.evaluate(up)? - observable.evaluate(dn)?) / (2.0 * h)))
            .collect::<Result<Vec<f64>>>()?;
        let (mean, se, _) = mean_se(&diffs)?;
        out.push((mean, se));
    }
    Ok(out)
}

/// Cramér-Rao screening bound √Var(f) · √F_kk.
pub fn screening_bound(var_f: f64, fim: &nalgebra::DMatrix<f64>, parameter: usize) -> f64 {
    (var_f.max(0.0)).sqrt() * fim[(parameter, parameter)].max(0.0).sqrt()
}

/// One (observable, parameter) row of a sensitivity report.
#[derive(Debug, Clone)]
pub struct ReportEntry {
    pub observable: usize,
    pub parameter: usize,
    pub bound: f64,
    pub variance: f64,
    pub fim_diag: f64,
    pub fd_estimate: Option<f64>,
    pub fd_std_error: Option<f64>,
    pub screened: bool,
    /// 1-based rank by descending bound within the observable; ties broken
    /// by parameter index.
    pub rank: usize,
}

/// Screening report: per observable, parameters ranked by bound.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub observable_names: Vec<String>,
    pub parameter_names: Vec<String>,
    pub threshold: f64,
    /// Sorted by (observable, rank).
    pub entries: Vec<ReportEntry>,
}

/// Rank parameters per observable by descending bound and flag pairs whose
/// bound falls below the threshold as screened-out. FD fields start empty.
pub fn rank_parameters(
    net: &ReactionNetwork,
    observables: &[Observable],
    variances: &[f64],
    fim: &nalgebra::DMatrix<f64>,
    threshold: f64,
) -> SensitivityReport {
    let k = net.parameter_count();
    let mut entries = Vec::with_capacity(observables.len() * k);
    for (obs_idx, &var_f) in variances.iter().enumerate() {
        let mut rows: Vec<ReportEntry> = (0..k)
            .map(|parameter| ReportEntry {
                observable: obs_idx,
                parameter,
                bound: screening_bound(var_f, fim, parameter),
                variance: var_f,
                fim_diag: fim[(parameter, parameter)],
                fd_estimate: None,
                fd_std_error: None,
                screened: false,
                rank: 0,
            })
            .collect();
        rows.sort_by(|a, b| {
            b.bound
                .partial_cmp(&a.bound)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.parameter.cmp(&b.parameter))
        });
        for (i, row) in rows.iter_mut().enumerate() {
            row.rank = i + 1;
            row.screened = row.bound < threshold;
        }
        entries.extend(rows);
    }
    SensitivityReport {
        observable_names: observables.iter().map(|o| o.name(net)).collect(),
        parameter_names: net.parameter_names().to_vec(),
        threshold,
        entries,
    }
}

/// Configuration of the full screening workflow.
#[derive(Debug, Clone)]
pub struct ScreeningConfig {
    pub horizon: f64,
    pub ensemble_size: usize,
    pub base_seed: u64,
    pub threshold: f64,
    /// Run finite differences for surviving pairs after screening.
    pub estimate_survivors: bool,
    /// FD step as a fraction of θ_k (the 0.1 θ convention by default).
    pub fd_relative_step: f64,
}

/// Bound-then-rank workflow over one θ-ensemble; optionally follows up with
/// central-difference estimates for the pairs that survive screening.
pub fn screen_parameters(
    net: &ReactionNetwork,
    theta: &ParameterVector,
    x0: &CountState,
    observables: &[Observable],
    config: &ScreeningConfig,
) -> Result<SensitivityReport> {
    let init = InitialDistribution::point(x0.clone());
    let ens = ssa_ensemble(
        net,
        theta,
        &init,
        config.horizon,
        config.ensemble_size,
        config.base_seed,
    )?;
    let fim = pathwise_fim_ctmc(&ens, net, theta, config.horizon, &init)?;

    let mut variances = Vec::with_capacity(observables.len());
    for observable in observables {
        let samples = ens
            .trajectories
            .par_iter()
            .map(|traj| observable.evaluate(traj))
            .collect::<Result<Vec<f64>>>()?;
        let (_, se, _) = mean_se(&samples)?;
        variances.push(se * se * samples.len() as f64);
    }

    let mut report = rank_parameters(net, observables, &variances, &fim, config.threshold);

    if config.estimate_survivors {
        let survivors: Vec<usize> = {
            let mut params: Vec<usize> = report
                .entries
                .iter()
                .filter(|e| !e.screened)
                .map(|e| e.parameter)
                .collect();
            params.sort_unstable();
            params.dedup();
            params
        };
        for parameter in survivors {
            let h = config.fd_relative_step * theta.get(parameter);
            let pairs = fd_observable_pairs(
                net,
                theta,
                x0,
                parameter,
                observables,
                config.horizon,
                config.ensemble_size,
                config.base_seed,
                h,
            )?;
            for entry in report.entries.iter_mut() {
                if entry.parameter == parameter && !entry.screened {
                    let (est, se) = pairs[entry.observable];
                    entry.fd_estimate = Some(est);
                    entry.fd_std_error = Some(se);
                }
            }
        }
    }
    Ok(report)
}
