//! Command-line front end: model ingestion, ensemble runs, estimator
//! invocation, screening workflow, CSV emission.
//!
//! Output is assembled fully in memory and written in one shot, so a failing
//! run never leaves a partial file behind. Nothing time- or
//! scheduling-dependent enters the output: rerunning a command with the same
//! config and seed reproduces the bytes exactly, regardless of
//! `PATHSENS_THREADS`.
//!
//! Exit codes: 1 config/parse error, 2 model-invariant violation,
//! 3 runtime estimator error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{
    averaged_re, estimate_ifim_ctmc, estimate_ire_ctmc, fim_rer_stationary_ctmc,
    re_quadratic_ratio, rer_stationary_ctmc, InitialDistribution, TimeGrid,
};
use crate::model::{load_network, NetworkModel, ParameterVector, Perturbation};
use crate::oracle;
use crate::sensitivity::{
    fd_species_si, screen_parameters, total_si, Observable, ScreeningConfig,
    DEFAULT_DENOMINATOR_FLOOR,
};
use crate::simulate::ssa_ensemble;

#[derive(Parser)]
#[command(
    name = "pathsens",
    version,
    about = "Pathwise sensitivity analysis for stochastic reaction networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an SSA ensemble and dump trajectories as CSV.
    Simulate(RunArgs),
    /// Instantaneous relative entropy curve over the time grid.
    Ire(RunArgs),
    /// Instantaneous Fisher information curve (long form).
    Ifim(RunArgs),
    /// Averaged relative entropy (1/t)∫ IRE over the time grid.
    AvgRe(RunArgs),
    /// Stationary relative entropy rate (add --fim for the stationary FIM).
    Rer(RunArgs),
    /// Per-species relative-difference sensitivity for one parameter.
    FdSi(RunArgs),
    /// Cramér-Rao screening bounds, ranking, optional FD follow-up.
    Screen(RunArgs),
    /// Print oracle reference values as labeled CSV.
    Verify {
        /// Output CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Run configuration shared by all model-driven subcommands.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Network definition file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    /// Time horizon T.
    #[arg(long)]
    pub horizon: f64,
    /// SDE lattice step (accepted for config compatibility; the network
    /// commands have no use for it).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of points of the reporting grid over [0, T].
    #[arg(long, default_value_t = 51)]
    pub grid: usize,
    /// Ensemble size M.
    #[arg(long, default_value_t = 1000)]
    pub ensemble: usize,
    /// Base seed; per-trajectory seeds derive from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturbation spec: NAME=VAL, NAME=rel:F (ε = F·θ), or rel:F for all
    /// coordinates. Repeatable.
    #[arg(long)]
    pub perturb: Vec<String>,
    /// Screening threshold on the Cramér-Rao bound.
    #[arg(long, default_value_t = 0.0)]
    pub threshold: f64,
    /// Burn-in window start for stationary averages.
    #[arg(long, default_value_t = 0.0)]
    pub burn_in: f64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Finite-difference step as a fraction of θ_k.
    #[arg(long, default_value_t = 0.1)]
    pub fd_step: f64,
    /// After screening, run finite differences for the surviving pairs.
    #[arg(long)]
    pub screen_then_estimate: bool,
    /// Emit the stationary FIM matrix instead of the scalar RER.
    #[arg(long)]
    pub fim: bool,
    /// Floor under which relative-difference denominators are undefined.
    #[arg(long, default_value_t = DEFAULT_DENOMINATOR_FLOOR)]
    pub floor: f64,
}

/// Entry point used by `main`; returns the process exit code.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    configure_thread_pool();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("pathsens: error kind=config code=1 msg={:?}", e.to_string());
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!(
                "pathsens: error kind={} code={} msg={:?}",
                e.kind(),
                e.exit_code(),
                e.to_string()
            );
            e.exit_code()
        }
    }
}

fn configure_thread_pool() {
    if let Ok(spec) = std::env::var("PATHSENS_THREADS") {
        if let Ok(n) = spec.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let (csv, out) = match cli.command {
        Command::Simulate(args) => (cmd_simulate(&args)?, args.out),
        Command::Ire(args) => (cmd_ire(&args)?, args.out),
        Command::Ifim(args) => (cmd_ifim(&args)?, args.out),
        Command::AvgRe(args) => (cmd_avg_re(&args)?, args.out),
        Command::Rer(args) => (cmd_rer(&args)?, args.out),
        Command::FdSi(args) => (cmd_fd_si(&args)?, args.out),
        Command::Screen(args) => (cmd_screen(&args)?, args.out),
        Command::Verify { out } => (cmd_verify()?, out),
    };
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Perturbation specs and metadata
// ---------------------------------------------------------------------------

/// Resolve `--perturb` specs against the model's parameter names.
pub fn resolve_perturbation(theta: &ParameterVector, specs: &[String]) -> Result<Perturbation> {
    let mut delta = vec![0.0; theta.len()];
    for spec in specs {
        if let Some(factor) = spec.strip_prefix("rel:") {
            let f: f64 = factor
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("bad relative factor '{factor}'")))?;
            for (i, d) in delta.iter_mut().enumerate() {
                *d = f * theta.get(i);
            }
        } else if let Some((name, value)) = spec.split_once('=') {
            let idx = theta.index_of(name).ok_or_else(|| {
                Error::InvalidConfig(format!("perturbation names unknown parameter '{name}'"))
            })?;
            delta[idx] = if let Some(factor) = value.strip_prefix("rel:") {
                let f: f64 = factor
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad relative factor '{factor}'")))?;
                f * theta.get(idx)
            } else {
                value.parse().map_err(|_| {
                    Error::InvalidConfig(format!("bad perturbation value '{value}'"))
                })?
            };
        } else {
            return Err(Error::InvalidConfig(format!(
                "perturbation spec '{spec}' is neither NAME=VAL nor rel:F"
            )));
        }
    }
    Ok(Perturbation::new(delta))
}

/// FNV-1a fingerprint of the model file, recorded in output metadata.
fn model_hash(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::ModelFile(format!("{}: {e}", path.display())))?;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    Ok(format!("fnv1a:{hash:016x}"))
}

fn named_values(names: &[String], values: &[f64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n}:{v}"))
        .collect::<Vec<_>>()
        .join(",")
}

struct LoadedRun {
    model: NetworkModel,
    eps: Perturbation,
    header: String,
}

fn load_run(args: &RunArgs, command: &str) -> Result<LoadedRun> {
    if !args.horizon.is_finite() || args.horizon <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "horizon {} must be > 0",
            args.horizon
        )));
    }
    if args.ensemble == 0 {
        return Err(Error::InvalidConfig("ensemble size must be ≥ 1".into()));
    }
    if let Some(dt) = args.dt {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidConfig(format!("dt {dt} must be > 0")));
        }
    }
    let model = load_network(&args.model)?;
    let eps = resolve_perturbation(&model.theta, &args.perturb)?;
    let mut header = String::new();
    writeln!(
        header,
        "# pathsens={} command={command}",
        env!("CARGO_PKG_VERSION")
    )
    .unwrap();
    writeln!(
        header,
        "# model={} hash={}",
        args.model.display(),
        model_hash(&args.model)?
    )
    .unwrap();
    writeln!(
        header,
        "# theta={}",
        named_values(model.network.parameter_names(), model.theta.values())
    )
    .unwrap();
    writeln!(
        header,
        "# epsilon={}",
        named_values(model.network.parameter_names(), eps.delta())
    )
    .unwrap();
    writeln!(
        header,
        "# ensemble={} seed={} horizon={} grid={}",
        args.ensemble, args.seed, args.horizon, args.grid
    )
    .unwrap();
    Ok(LoadedRun { model, eps, header })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn cmd_simulate(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "simulate")?;
    let net = &run.model.network;
    let init = InitialDistribution::point(run.model.initial.clone());
    let ens = ssa_ensemble(
        net,
        &run.model.theta,
        &init,
        args.horizon,
        args.ensemble,
        args.seed,
    )?;
    let mut csv = run.header;
    write!(csv, "trajectory_id,jump_index,time").unwrap();
    for name in net.species_names() {
        write!(csv, ",{name}").unwrap();
    }
    csv.push('\n');
    for (id, traj) in ens.trajectories.iter().enumerate() {
        for (k, (&t, state)) in traj.jump_times().iter().zip(traj.states()).enumerate() {
            write!(csv, "{id},{k},{t}").unwrap();
            for &c in state.counts() {
                write!(csv, ",{c}").unwrap();
            }
            csv.push('\n');
        }
    }
    Ok(csv)
}

fn cmd_ire(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "ire")?;
    let net = &run.model.network;
    let grid = TimeGrid::uniform(args.horizon, args.grid)?;
    let init = InitialDistribution::point(run.model.initial.clone());
    let ens = ssa_ensemble(
        net,
        &run.model.theta,
        &init,
        args.horizon,
        args.ensemble,
        args.seed,
    )?;
    let curve = estimate_ire_ctmc(&ens, &grid, net, &run.model.theta, &run.eps)?;
    let mut csv = run.header;
    writeln!(csv, "# se_flag={}", curve.se_flag).unwrap();
    csv.push_str("t,value,std_error\n");
    for ((t, v), se) in grid
        .points()
        .iter()
        .zip(&curve.values)
        .zip(&curve.std_errors)
    {
        writeln!(csv, "{t},{v},{se}").unwrap();
    }
    Ok(csv)
}

fn cmd_ifim(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "ifim")?;
    let net = &run.model.network;
    let grid = TimeGrid::uniform(args.horizon, args.grid)?;
    let init = InitialDistribution::point(run.model.initial.clone());
    let ens = ssa_ensemble(
        net,
        &run.model.theta,
        &init,
        args.horizon,
        args.ensemble,
        args.seed,
    )?;
    let curve = estimate_ifim_ctmc(&ens, &grid, net, &run.model.theta)?;
    let mut csv = run.header;
    writeln!(csv, "# se_flag={}", curve.se_flag).unwrap();
    csv.push_str("t,i,j,value,std_error\n");
    let k = net.parameter_count();
    for ((t, m), se) in grid
        .points()
        .iter()
        .zip(&curve.matrices)
        .zip(&curve.std_errors)
    {
        for i in 0..k {
            for j in 0..k {
                writeln!(csv, "{t},{i},{j},{},{}", m[(i, j)], se[(i, j)]).unwrap();
            }
        }
    }
    Ok(csv)
}

fn cmd_avg_re(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "avg-re")?;
    let net = &run.model.network;
    let grid = TimeGrid::uniform(args.horizon, args.grid)?;
    let init = InitialDistribution::point(run.model.initial.clone());
    let ens = ssa_ensemble(
        net,
        &run.model.theta,
        &init,
        args.horizon,
        args.ensemble,
        args.seed,
    )?;
    let mut csv = run.header;
    csv.push_str("t,value,std_error\n");
    // the averaged RE divides by t, so the t = 0 grid point is skipped
    for &t in grid.points().iter().filter(|&&t| t > 0.0) {
        let est = averaged_re(&ens, net, &run.model.theta, &run.eps, t)?;
        writeln!(csv, "{t},{},{}", est.value, est.std_error).unwrap();
    }
    Ok(csv)
}

fn cmd_rer(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "rer")?;
    let net = &run.model.network;
    let init = InitialDistribution::point(run.model.initial.clone());
    let ens = ssa_ensemble(
        net,
        &run.model.theta,
        &init,
        args.horizon,
        args.ensemble,
        args.seed,
    )?;
    let mut csv = run.header;
    writeln!(csv, "# burn_in={}", args.burn_in).unwrap();
    if args.fim {
        let fim = fim_rer_stationary_ctmc(&ens, net, &run.model.theta, args.burn_in)?;
        csv.push_str(&matrix_csv(&fim, net.parameter_names()));
    } else {
        let est = rer_stationary_ctmc(&ens, net, &run.model.theta, &run.eps, args.burn_in)?;
        writeln!(csv, "# se_flag={}", est.se_flag).unwrap();
        csv.push_str("value,std_error,ensemble_size\n");
        writeln!(csv, "{},{},{}", est.value, est.std_error, est.ensemble_size).unwrap();
    }
    Ok(csv)
}

/// Row-major matrix CSV with a header naming the parameters.
pub fn matrix_csv(matrix: &DMatrix<f64>, parameter_names: &[String]) -> String {
    let mut csv = String::new();
    csv.push_str(&parameter_names.join(","));
    csv.push('\n');
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols())
            .map(|j| matrix[(i, j)].to_string())
            .collect();
        csv.push_str(&row.join(","));
        csv.push('\n');
    }
    csv
}

fn cmd_fd_si(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "fd-si")?;
    let net = &run.model.network;
    let moved = run.eps.moved_indices();
    if moved.len() != 1 {
        return Err(Error::InvalidConfig(format!(
            "fd-si needs --perturb moving exactly one parameter, got {}",
            moved.len()
        )));
    }
    let parameter = moved[0];
    let eps_value = run.eps.delta()[parameter];
    let grid = TimeGrid::uniform(args.horizon, args.grid)?;
    let matrix = fd_species_si(
        net,
        &run.model.theta,
        &run.model.initial,
        parameter,
        eps_value,
        &grid,
        args.ensemble,
        args.seed,
        args.floor,
    )?;
    let (totals, skipped) = total_si(&matrix);
    let mut csv = run.header;
    writeln!(
        csv,
        "# parameter={} eps={eps_value}",
        net.parameter_names()[parameter]
    )
    .unwrap();
    csv.push_str("t,species,si,undefined_count\n");
    for (g, &t) in grid.points().iter().enumerate() {
        for (s, name) in net.species_names().iter().enumerate() {
            let v = matrix.values[s][g];
            writeln!(
                csv,
                "{t},{name},{},{}",
                fmt_opt(v),
                usize::from(v.is_none())
            )
            .unwrap();
        }
        writeln!(csv, "{t},__total__,{},{}", totals[g], skipped[g]).unwrap();
    }
    Ok(csv)
}

fn cmd_screen(args: &RunArgs) -> Result<String> {
    let run = load_run(args, "screen")?;
    let net = &run.model.network;
    let observables: Vec<Observable> = (0..net.species_count())
        .map(|species| Observable::TimeAveragedCount { species })
        .collect();
    let config = ScreeningConfig {
        horizon: args.horizon,
        ensemble_size: args.ensemble,
        base_seed: args.seed,
        threshold: args.threshold,
        estimate_survivors: args.screen_then_estimate,
        fd_relative_step: args.fd_step,
    };
    let report = screen_parameters(
        net,
        &run.model.theta,
        &run.model.initial,
        &observables,
        &config,
    )?;
    let mut csv = run.header;
    writeln!(
        csv,
        "# threshold={} screen_then_estimate={}",
        args.threshold, args.screen_then_estimate
    )
    .unwrap();
    csv.push_str("observable,parameter,bound,fd_estimate,fd_se,screened,rank\n");
    for e in &report.entries {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            report.observable_names[e.observable],
            report.parameter_names[e.parameter],
            e.bound,
            fmt_opt(e.fd_estimate),
            fmt_opt(e.fd_std_error),
            e.screened,
            e.rank
        )
        .unwrap();
    }
    Ok(csv)
}

fn cmd_verify() -> Result<String> {
    let mut csv = String::new();
    writeln!(
        csv,
        "# pathsens={} command=verify",
        env!("CARGO_PKG_VERSION")
    )
    .unwrap();
    csv.push_str("name,value\n");
    let mut put = |name: &str, value: f64| {
        writeln!(csv, "{name},{value}").unwrap();
    };

    put("poisson_rer_k1_to_1.1", oracle::poisson_rer(1.0, 1.1)?);
    put("poisson_rer_k1_to_1.05", oracle::poisson_rer(1.0, 1.05)?);
    put("poisson_rer_k1_to_1.025", oracle::poisson_rer(1.0, 1.025)?);

    let (chain, chain_bar) = oracle::two_state_pair();
    let nu = [1.0, 0.0];
    put(
        "two_state_pathwise_re_T1",
        oracle::exact_dtmc_pathwise_re(&chain, &chain_bar, &nu, &nu, 1)?,
    );
    put(
        "two_state_pathwise_re_T10",
        oracle::exact_dtmc_pathwise_re(&chain, &chain_bar, &nu, &nu, 10)?,
    );
    put(
        "two_state_enumerated_re_T8",
        oracle::enumerate_paths_re(&chain, &chain_bar, &nu, &nu, 8)?,
    );

    put(
        "ou_ire_theta1_eps0.1_t1",
        oracle::ou_ire(1.0, 0.1, 1.0, 0.0, 1.0)?,
    );
    put("ou_ifim_theta1_t1", oracle::ou_ifim(1.0, 1.0, 0.0, 1.0)?);
    put("ou_ifim_stationary", 0.5);

    let fim = DMatrix::from_element(1, 1, 1.0);
    for eps in [0.1, 0.05, 0.025] {
        let re = oracle::poisson_rer(1.0, 1.0 + eps)?;
        let ratio = re_quadratic_ratio(re, &fim, &Perturbation::new(vec![eps]))?;
        put(&format!("poisson_quadratic_ratio_eps{eps}"), ratio);
    }

    // rate-law evaluations, re-derived through the model layer
    use crate::model::{
        binomial, CountState, DtmcModel, ParameterVector, Reaction, ReactionNetwork, TwoStateChain,
    };
    let net = ReactionNetwork::new(
        vec!["A".into(), "B".into(), "C".into()],
        vec!["k1".into(), "k2".into(), "V".into(), "K".into()],
        vec![
            Reaction::mass_action(vec![1, 1, 0], vec![0, 0, 1], 0),
            Reaction::mass_action(vec![2, 0, 0], vec![0, 1, 0], 1),
            Reaction::michaelis_menten(vec![1, 0, 0], vec![0, 0, 1], 2, 3, 0),
        ],
    )?;
    let theta = ParameterVector::new(
        vec![2.0, 1.0, 5.0, 10.0],
        vec!["k1".into(), "k2".into(), "V".into(), "K".into()],
    )?;
    put(
        "mass_action_a3_b5_k2",
        net.propensity(&theta, &CountState::new(vec![3, 5, 0]), 0)?,
    );
    put("binomial_4_choose_2", binomial(4, 2)? as f64);
    put(
        "michaelis_menten_V5_K10_x10",
        net.propensity(&theta, &CountState::new(vec![10, 0, 0]), 2)?,
    );
    let grad = net.grad_log_propensity(&theta, &CountState::new(vec![10, 0, 0]), 2)?;
    put("mm_grad_log_V", grad[0].1);
    put("mm_grad_log_K", grad[1].1);

    // two-state chain: stationary law and the Bernoulli-row Fisher information
    let chain = TwoStateChain::new(0, 1);
    let chain_theta = ParameterVector::new(vec![0.3, 0.5], vec!["p01".into(), "p10".into()])?;
    put(
        "two_state_stationary_pi0",
        chain.stationary(&chain_theta)[0],
    );
    let row = chain.transition_row(&chain_theta, 0);
    let fisher: f64 = row
        .iter()
        .enumerate()
        .map(|(y, &p)| p * chain.grad_log_transition(&chain_theta, 0, y)[0].powi(2))
        .sum();
    put("bernoulli_row_fisher_p0.3", fisher);
    Ok(csv)
}
