//! Property tests for the simulator and estimator invariants: distributional
//! checks on the SSA sampler, exact-arithmetic identities of the sojourn
//! integrals, and randomized model-level properties.

use proptest::prelude::*;

use pathsens::estimators::{
    averaged_re, estimate_ire_ctmc, ire_integrand_ctmc, pathwise_re_ctmc, rer_stationary_ctmc,
    InitialDistribution, TimeGrid,
};
use pathsens::model::{CountState, ParameterVector, Perturbation, Reaction, ReactionNetwork};
use pathsens::simulate::{derive_seed, ssa_ensemble, ssa_simulate};

fn poisson_network(k: f64) -> (ReactionNetwork, ParameterVector) {
    let net = ReactionNetwork::new(
        vec!["A".into()],
        vec!["k".into()],
        vec![Reaction::mass_action(vec![0], vec![1], 0)],
    )
    .unwrap();
    (net, ParameterVector::from_values(vec![k]).unwrap())
}

fn birth_death(k: f64, gamma: f64) -> (ReactionNetwork, ParameterVector) {
    let net = ReactionNetwork::new(
        vec!["A".into()],
        vec!["k".into(), "gamma".into()],
        vec![
            Reaction::mass_action(vec![0], vec![1], 0),
            Reaction::mass_action(vec![1], vec![0], 1),
        ],
    )
    .unwrap();
    (net, ParameterVector::from_values(vec![k, gamma]).unwrap())
}

/// Kolmogorov-Smirnov distance of samples against Exponential(rate).
fn ks_distance_exponential(samples: &mut [f64], rate: f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let cdf = 1.0 - (-rate * x).exp();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
    }
    d
}

/// Sojourn times at a constant-rate state are Exponential(total_rate):
/// KS test at significance 1e-3 with 10^4 samples.
#[test]
fn ssa_sojourns_are_exponential() {
    let (net, theta) = poisson_network(1.0);
    let traj = ssa_simulate(&net, &theta, &CountState::new(vec![0]), 10_600.0, 2718).unwrap();
    let mut sojourns: Vec<f64> = traj.jump_times().windows(2).map(|w| w[1] - w[0]).collect();
    assert!(
        sojourns.len() >= 10_000,
        "need 1e4 sojourns, got {}",
        sojourns.len()
    );
    sojourns.truncate(10_000);
    let d = ks_distance_exponential(&mut sojourns, 1.0);
    // critical value sqrt(ln(2/α)/2n) at α = 1e-3, n = 1e4
    let critical = (f64::ln(2.0 / 1e-3) / (2.0 * 10_000.0)).sqrt();
    assert!(d < critical, "KS distance {d} ≥ {critical}");
}

/// Channel selection frequencies converge to a_j / a_0 within binomial 3σ.
#[test]
fn ssa_channel_frequencies_match_propensities() {
    // two sources with rates 1 and 3: channel 2 fires with probability 3/4
    let net = ReactionNetwork::new(
        vec!["A".into(), "B".into()],
        vec!["k1".into(), "k2".into()],
        vec![
            Reaction::mass_action(vec![0, 0], vec![1, 0], 0),
            Reaction::mass_action(vec![0, 0], vec![0, 1], 1),
        ],
    )
    .unwrap();
    let theta = ParameterVector::from_values(vec![1.0, 3.0]).unwrap();
    let traj = ssa_simulate(&net, &theta, &CountState::new(vec![0, 0]), 2_600.0, 11).unwrap();
    let n = traj.jump_count();
    assert!(n >= 10_000);
    let b_jumps = traj
        .states()
        .windows(2)
        .filter(|w| w[1].counts()[1] > w[0].counts()[1])
        .count();
    let freq = b_jumps as f64 / n as f64;
    let sigma = (0.75f64 * 0.25 / n as f64).sqrt();
    assert!((freq - 0.75).abs() < 3.0 * sigma, "freq {freq}");
}

/// Linear birth-death started from its stationary law keeps a flat mean.
#[test]
fn birth_death_poisson_marginal_is_time_invariant() {
    let (net, theta) = birth_death(1.0, 1.0);
    let init = InitialDistribution::truncated_poisson(1.0, 0, 1);
    let m = 4000;
    let ens = ssa_ensemble(&net, &theta, &init, 8.0, m, 5150).unwrap();
    for t in [0.0, 2.0, 4.0, 8.0] {
        let mean: f64 = ens
            .trajectories
            .iter()
            .map(|traj| traj.state_at(t).unwrap().counts()[0] as f64)
            .sum::<f64>()
            / m as f64;
        let se = (1.0 / m as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} at t = {t}");
    }
}

/// Every consecutive state pair of an SSA path differs by exactly one
/// reaction's state-change vector.
#[test]
fn ssa_transitions_are_single_reaction_jumps() {
    let (net, theta) = birth_death(1.3, 0.8);
    let traj = ssa_simulate(&net, &theta, &CountState::new(vec![2]), 50.0, 99).unwrap();
    assert!(traj.jump_count() > 20);
    for w in traj.states().windows(2) {
        let diff: Vec<i64> = w[1]
            .counts()
            .iter()
            .zip(w[0].counts())
            .map(|(&b, &a)| b as i64 - a as i64)
            .collect();
        assert!(
            net.reactions().iter().any(|r| r.state_change() == diff),
            "jump {diff:?} matches no reaction"
        );
    }
}

/// Two-state chain started from νP = ν keeps ν at every step.
#[test]
fn dtmc_stationary_marginals_are_fixed() {
    use pathsens::model::TwoStateChain;
    use pathsens::simulate::dtmc_ensemble;
    let chain = TwoStateChain::new(0, 1);
    let theta = ParameterVector::from_values(vec![0.3, 0.5]).unwrap();
    let pi = chain.stationary(&theta);
    let init = InitialDistribution::discrete(vec![0usize, 1], pi.to_vec()).unwrap();
    let m = 20_000;
    let ens = dtmc_ensemble(&chain, &theta, &init, 5, m, 808).unwrap();
    let sigma = (pi[0] * pi[1] / m as f64).sqrt();
    for step in 0..=5 {
        let frac0 = ens
            .trajectories
            .iter()
            .filter(|t| t.states[step] == 0)
            .count() as f64
            / m as f64;
        assert!(
            (frac0 - pi[0]).abs() < 3.0 * sigma,
            "step {step}: {frac0} vs {}",
            pi[0]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Identical inputs give bit-identical trajectories; the ensemble path
    /// and the single-trajectory path agree through the derived seeds.
    #[test]
    fn ssa_seeding_is_deterministic(seed in any::<u64>(), k in 0.2f64..4.0) {
        let (net, theta) = poisson_network(k);
        let x0 = CountState::new(vec![0]);
        let a = ssa_simulate(&net, &theta, &x0, 5.0, seed).unwrap();
        let b = ssa_simulate(&net, &theta, &x0, 5.0, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let init = InitialDistribution::point(x0.clone());
        let ens = ssa_ensemble(&net, &theta, &init, 5.0, 3, seed).unwrap();
        for (i, traj) in ens.trajectories.iter().enumerate() {
            let single = ssa_simulate(&net, &theta, &x0, 5.0, derive_seed(seed, i as u64)).unwrap();
            prop_assert_eq!(traj, &single);
        }
    }

    /// Propensity zero-structure is ε-independent for the shipped rate laws.
    #[test]
    fn propensity_support_is_epsilon_independent(
        counts in prop::collection::vec(0u64..6, 2),
        k in 0.1f64..5.0,
        factor in -0.5f64..0.5,
    ) {
        let net = ReactionNetwork::new(
            vec!["A".into(), "B".into()],
            vec!["k".into(), "V".into(), "K".into()],
            vec![
                Reaction::mass_action(vec![2, 0], vec![0, 1], 0),
                Reaction::michaelis_menten(vec![1, 0], vec![0, 1], 1, 2, 0),
            ],
        ).unwrap();
        let theta = ParameterVector::from_values(vec![k, 2.0, 7.0]).unwrap();
        let eps = Perturbation::relative_all(&theta, factor);
        let theta_bar = theta.perturbed(&eps).unwrap();
        let x = CountState::new(counts);
        for j in 0..2 {
            let a = net.propensity(&theta, &x, j).unwrap();
            let a_bar = net.propensity(&theta_bar, &x, j).unwrap();
            prop_assert_eq!(a > 0.0, a_bar > 0.0, "support changed on channel {}", j);
        }
        // consequently the integrand never trips absolute continuity
        prop_assert!(ire_integrand_ctmc(&net, &theta, &eps, &x).unwrap() >= 0.0);
    }

    /// Pathwise RE over [0, T] equals the [0, s] part plus the [s, T]
    /// window integral, up to floating-point reassociation.
    #[test]
    fn pathwise_re_window_additivity(seed in any::<u64>(), split in 0.2f64..0.8) {
        let (net, theta) = birth_death(1.0, 0.7);
        let eps = Perturbation::new(vec![0.1, -0.05]);
        let init = InitialDistribution::point(CountState::new(vec![2]));
        let horizon = 6.0;
        let s = split * horizon;
        let ens = ssa_ensemble(&net, &theta, &init, horizon, 16, seed).unwrap();
        let full = pathwise_re_ctmc(&ens, &net, &theta, &eps, horizon, &init, &init).unwrap();
        let head = pathwise_re_ctmc(&ens, &net, &theta, &eps, s, &init, &init).unwrap();
        let tail = rer_stationary_ctmc(&ens, &net, &theta, &eps, s).unwrap();
        let recomposed = head.value + tail.value * (horizon - s);
        prop_assert!(
            (full.value - recomposed).abs() <= 1e-12 * full.value.abs().max(1.0),
            "{} vs {}", full.value, recomposed
        );
        // per-path nonnegative integrand makes the head a lower bound
        prop_assert!(full.value >= head.value - 1e-15);
    }

    /// The averaged RE at the full horizon equals the windowless RER.
    #[test]
    fn averaged_re_matches_full_window_rer(seed in any::<u64>()) {
        let (net, theta) = birth_death(1.2, 0.9);
        let eps = Perturbation::new(vec![0.12, 0.0]);
        let init = InitialDistribution::point(CountState::new(vec![1]));
        let ens = ssa_ensemble(&net, &theta, &init, 4.0, 12, seed).unwrap();
        let avg = averaged_re(&ens, &net, &theta, &eps, 4.0).unwrap();
        let rer = rer_stationary_ctmc(&ens, &net, &theta, &eps, 0.0).unwrap();
        prop_assert!((avg.value - rer.value).abs() <= 1e-12 * avg.value.abs().max(1.0));
    }

    /// Curve estimates are nonnegative with nonnegative standard errors.
    #[test]
    fn ire_curves_are_nonnegative(seed in any::<u64>(), factor in 0.01f64..0.4) {
        let (net, theta) = birth_death(1.0, 1.0);
        let eps = Perturbation::relative_all(&theta, factor);
        let init = InitialDistribution::point(CountState::new(vec![3]));
        let ens = ssa_ensemble(&net, &theta, &init, 3.0, 8, seed).unwrap();
        let grid = TimeGrid::uniform(3.0, 4).unwrap();
        let curve = estimate_ire_ctmc(&ens, &grid, &net, &theta, &eps).unwrap();
        for (v, se) in curve.values.iter().zip(&curve.std_errors) {
            prop_assert!(*v >= 0.0);
            prop_assert!(*se >= 0.0);
        }
    }

    /// Mass-action propensities are monotone in every reactant count.
    #[test]
    fn mass_action_monotone_in_counts(
        a in 0u64..20, b in 0u64..20, k in 0.1f64..3.0,
    ) {
        let net = ReactionNetwork::new(
            vec!["A".into(), "B".into()],
            vec!["k".into()],
            vec![Reaction::mass_action(vec![2, 1], vec![0, 0], 0)],
        ).unwrap();
        let theta = ParameterVector::from_values(vec![k]).unwrap();
        let base = net.propensity(&theta, &CountState::new(vec![a, b]), 0).unwrap();
        let up_a = net.propensity(&theta, &CountState::new(vec![a + 1, b]), 0).unwrap();
        let up_b = net.propensity(&theta, &CountState::new(vec![a, b + 1]), 0).unwrap();
        prop_assert!(up_a >= base);
        prop_assert!(up_b >= base);
    }
}
