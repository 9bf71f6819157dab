//! Exact and brute-force reference computations.
//!
//! These routines are deliberately independent of the estimator code paths
//! they verify: marginal propagation is a direct matrix-vector recursion and
//! the path-space sum enumerates every trajectory. They ship in the library
//! (not test-only) and back the `verify` CLI subcommand so every reference
//! constant can be re-derived locally.

use crate::error::{Error, Result};
use crate::model::{DtmcModel, ParameterVector};

/// Largest chain the exact marginal propagation accepts.
pub const MAX_ORACLE_STATES: usize = 64;
/// Path-enumeration caps keeping the n^(T+1) sum under a second.
pub const MAX_ENUM_STATES: usize = 4;
pub const MAX_ENUM_STEPS: usize = 8;

/// A finite chain pinned at one parameter point: its transition matrix and,
/// optionally, the gradient tensor ∂θ p(x,y) for Fisher-information checks.
#[derive(Debug, Clone)]
pub struct FiniteDtmc {
    matrix: Vec<Vec<f64>>,
    grad: Option<Vec<Vec<Vec<f64>>>>,
}

impl FiniteDtmc {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_grad(matrix, None)
    }

    pub fn with_grad(matrix: Vec<Vec<f64>>, grad: Option<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        let n = matrix.len();
        if n == 0 || n > MAX_ORACLE_STATES {
            return Err(Error::OracleCap(format!(
                "chain must have 1..={MAX_ORACLE_STATES} states, got {n}"
            )));
        }
        for (x, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidModel(format!("row {x} is not length {n}")));
            }
            let mut sum = 0.0;
            for &p in row {
                if !(0.0..=1.0 + 1e-12).contains(&p) {
                    return Err(Error::InvalidModel(format!(
                        "row {x} has entry {p} outside [0, 1]"
                    )));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidModel(format!("row {x} sums to {sum}")));
            }
        }
        if let Some(g) = &grad {
            if g.len() != n || g.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidModel("gradient tensor must be n×n×K".into()));
            }
        }
        Ok(Self { matrix, grad })
    }

    pub fn state_count(&self) -> usize {
        self.matrix.len()
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }
}

/// A [`FiniteDtmc`] is usable wherever a parametric chain is expected; its
/// kernel simply ignores θ (it is already pinned at one parameter point).
impl DtmcModel for FiniteDtmc {
    fn state_count(&self) -> usize {
        self.matrix.len()
    }

    fn transition_row(&self, _theta: &ParameterVector, x: usize) -> Vec<f64> {
        self.matrix[x].clone()
    }

    fn grad_log_transition(&self, theta: &ParameterVector, x: usize, y: usize) -> Vec<f64> {
        match &self.grad {
            Some(g) => g[x][y].iter().map(|&d| d / self.matrix[x][y]).collect(),
            None => vec![0.0; theta.len()],
        }
    }
}

/// Chapman-Kolmogorov propagation: ν_i = ν_{i−1} P for i = 1..=T.
pub fn exact_dtmc_marginals(
    chain: &FiniteDtmc,
    nu0: &[f64],
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = chain.state_count();
    check_probability_vector(nu0, n)?;
    let mut marginals = Vec::with_capacity(steps + 1);
    marginals.push(nu0.to_vec());
    for _ in 0..steps {
        let prev = marginals.last().unwrap();
        let mut next = vec![0.0; n];
        for (x, &w) in prev.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (y, &p) in chain.matrix[x].iter().enumerate() {
                next[y] += w * p;
            }
        }
        marginals.push(next);
    }
    Ok(marginals)
}

/// Deterministic pathwise relative entropy:
/// RE(ν₀‖ν̄₀) + Σ_i Σ_x ν_{i−1}(x) Σ_{x'} p log(p/p̄). No Monte Carlo.
pub fn exact_dtmc_pathwise_re(
    chain: &FiniteDtmc,
    chain_bar: &FiniteDtmc,
    nu0: &[f64],
    nu0_bar: &[f64],
    steps: usize,
) -> Result<f64> {
    let n = chain.state_count();
    if chain_bar.state_count() != n {
        return Err(Error::InvalidModel(
            "chains must share the state space".into(),
        ));
    }
    check_probability_vector(nu0, n)?;
    check_probability_vector(nu0_bar, n)?;

    let mut row_kl = vec![0.0; n];
    for (x, slot) in row_kl.iter_mut().enumerate() {
        let mut kl = 0.0;
        for y in 0..n {
            let p = chain.matrix[x][y];
            let q = chain_bar.matrix[x][y];
            match (p > 0.0, q > 0.0) {
                (true, true) => kl += p * (p / q).ln(),
                (false, false) => {}
                _ => {
                    return Err(Error::AbsoluteContinuityViolation(format!(
                        "kernels disagree on support at ({x}, {y})"
                    )))
                }
            }
        }
        *slot = kl.max(0.0);
    }

    let marginals = exact_dtmc_marginals(chain, nu0, steps)?;
    let mut total = discrete_re(nu0, nu0_bar);
    for marginal in marginals.iter().take(steps) {
        for (x, &w) in marginal.iter().enumerate() {
            total += w * row_kl[x];
        }
    }
    Ok(total)
}

/// Brute-force pathwise relative entropy: the sum over all n^(T+1) paths of
/// Q(path) log(Q(path)/Q̄(path)). Caps: n ≤ 4, T ≤ 8.
pub fn enumerate_paths_re(
    chain: &FiniteDtmc,
    chain_bar: &FiniteDtmc,
    nu0: &[f64],
    nu0_bar: &[f64],
    steps: usize,
) -> Result<f64> {
    let n = chain.state_count();
    if n > MAX_ENUM_STATES || steps > MAX_ENUM_STEPS {
        return Err(Error::OracleCap(format!(
            "path enumeration needs n ≤ {MAX_ENUM_STATES} and T ≤ {MAX_ENUM_STEPS}, got n = {n}, T = {steps}"
        )));
    }
    if chain_bar.state_count() != n {
        return Err(Error::InvalidModel(
            "chains must share the state space".into(),
        ));
    }
    check_probability_vector(nu0, n)?;
    check_probability_vector(nu0_bar, n)?;

    let mut total = 0.0;
    let mut path = vec![0usize; steps + 1];
    loop {
        let mut q = nu0[path[0]];
        let mut q_bar = nu0_bar[path[0]];
        for w in path.windows(2) {
            q *= chain.matrix[w[0]][w[1]];
            q_bar *= chain_bar.matrix[w[0]][w[1]];
        }
        if q > 0.0 {
            if q_bar == 0.0 {
                return Ok(f64::INFINITY);
            }
            total += q * (q / q_bar).ln();
        }

        // odometer increment over state indices
        let mut pos = 0;
        loop {
            if pos > steps {
                return Ok(total.max(0.0));
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

fn check_probability_vector(v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::InvalidModel(format!(
            "distribution has {} entries, chain has {n} states",
            v.len()
        )));
    }
    if v.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidModel("negative probability".into()));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidModel(format!(
            "distribution sums to {sum}, not 1"
        )));
    }
    Ok(())
}

fn discrete_re(nu: &[f64], nu_bar: &[f64]) -> f64 {
    let mut re = 0.0;
    for (&p, &q) in nu.iter().zip(nu_bar) {
        if p > 0.0 {
            if q == 0.0 {
                return f64::INFINITY;
            }
            re += p * (p / q).ln();
        }
    }
    re.max(0.0)
}

/// Relative entropy rate of a Poisson process: λ log(λ/λ̄) − (λ − λ̄).
pub fn poisson_rer(lambda: f64, lambda_bar: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda_bar > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rates must be positive, got {lambda} and {lambda_bar}"
        )));
    }
    Ok(lambda * (lambda / lambda_bar).ln() - (lambda - lambda_bar))
}

/// Second moment of the Ornstein-Uhlenbeck process dX = −θX dt + σ dW
/// started at x0: m₂(t) = x0² e^(−2θt) + (σ²/2θ)(1 − e^(−2θt)).
fn ou_second_moment(theta: f64, sigma: f64, x0: f64, t: f64) -> f64 {
    let decay = (-2.0 * theta * t).exp();
    x0 * x0 * decay + sigma * sigma / (2.0 * theta) * (1.0 - decay)
}

/// Instantaneous RE of the OU pair (θ, θ+ε): (ε²/2σ²) m₂(t).
pub fn ou_ire(theta: f64, eps: f64, sigma: f64, x0: f64, t: f64) -> Result<f64> {
    check_ou(theta, sigma)?;
    Ok(eps * eps / (2.0 * sigma * sigma) * ou_second_moment(theta, sigma, x0, t))
}

/// Instantaneous FIM of the OU drift parameter: m₂(t)/σ².
pub fn ou_ifim(theta: f64, sigma: f64, x0: f64, t: f64) -> Result<f64> {
    check_ou(theta, sigma)?;
    Ok(ou_second_moment(theta, sigma, x0, t) / (sigma * sigma))
}

fn check_ou(theta: f64, sigma: f64) -> Result<()> {
    if !(theta > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "OU needs θ > 0 and σ > 0, got θ = {theta}, σ = {sigma}"
        )));
    }
    Ok(())
}

/// The canonical two-state test chain (p(0,1) = 0.3, p(1,0) = 0.5) and its
/// perturbed partner (p(0,1) = 0.33).
pub fn two_state_pair() -> (FiniteDtmc, FiniteDtmc) {
    let chain = FiniteDtmc::new(vec![vec![0.7, 0.3], vec![0.5, 0.5]]).unwrap();
    let chain_bar = FiniteDtmc::new(vec![vec![0.67, 0.33], vec![0.5, 0.5]]).unwrap();
    (chain, chain_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn marginals_identity_chain_is_constant() {
        let chain = FiniteDtmc::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let marginals = exact_dtmc_marginals(&chain, &[0.25, 0.75], 5).unwrap();
        for m in &marginals {
            assert_eq!(m, &vec![0.25, 0.75]);
        }
    }

    #[test]
    fn marginals_two_state_one_step() {
        let (chain, _) = two_state_pair();
        let marginals = exact_dtmc_marginals(&chain, &[1.0, 0.0], 1).unwrap();
        assert_eq!(marginals[1], vec![0.7, 0.3]);
    }

    #[test]
    fn marginals_stationary_start_is_fixed() {
        let (chain, _) = two_state_pair();
        let pi = [5.0 / 8.0, 3.0 / 8.0];
        let marginals = exact_dtmc_marginals(&chain, &pi, 10).unwrap();
        for m in &marginals {
            assert!((m[0] - pi[0]).abs() < 1e-14);
            assert!((m[1] - pi[1]).abs() < 1e-14);
        }
    }

    #[test]
    fn pathwise_re_identical_chains_is_zero() {
        let (chain, _) = two_state_pair();
        let nu = [1.0, 0.0];
        let re = exact_dtmc_pathwise_re(&chain, &chain, &nu, &nu, 7).unwrap();
        assert_eq!(re, 0.0);
    }

    #[test]
    fn pathwise_re_single_step_inner_sum() {
        let (chain, chain_bar) = two_state_pair();
        let re = exact_dtmc_pathwise_re(&chain, &chain_bar, &[1.0, 0.0], &[1.0, 0.0], 1).unwrap();
        let expected = 0.3f64 * (0.3f64 / 0.33).ln() + 0.7 * (0.7f64 / 0.67).ln();
        assert!((re - expected).abs() < 1e-15);
        assert!((re - 0.0020688).abs() < 1e-7);
    }

    #[test]
    fn pathwise_re_nondecreasing_in_horizon() {
        let (chain, chain_bar) = two_state_pair();
        let nu = [1.0, 0.0];
        let mut last = 0.0;
        for steps in 1..=10 {
            let re = exact_dtmc_pathwise_re(&chain, &chain_bar, &nu, &nu, steps).unwrap();
            assert!(re >= last);
            last = re;
        }
    }

    fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> FiniteDtmc {
        let mut matrix = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
            let sum: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= sum;
            }
            // force exact unit sum so validation at 1e-12 always passes
            let correction: f64 = 1.0 - row.iter().sum::<f64>();
            row[n - 1] += correction;
            matrix.push(row);
        }
        FiniteDtmc::new(matrix).unwrap()
    }

    fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
        let sum: f64 = v.iter().sum();
        for p in v.iter_mut() {
            *p /= sum;
        }
        let correction: f64 = 1.0 - v.iter().sum::<f64>();
        v[n - 1] += correction;
        v
    }

    #[test]
    fn enumeration_equals_decomposition_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..100 {
            let n = 2 + (case % 3); // 2..=4 states
            let steps = 1 + (case % MAX_ENUM_STEPS);
            let chain = random_chain(&mut rng, n);
            let chain_bar = random_chain(&mut rng, n);
            let nu0 = random_distribution(&mut rng, n);
            let nu0_bar = random_distribution(&mut rng, n);
            let exact = exact_dtmc_pathwise_re(&chain, &chain_bar, &nu0, &nu0_bar, steps).unwrap();
            let brute = enumerate_paths_re(&chain, &chain_bar, &nu0, &nu0_bar, steps).unwrap();
            assert!(
                (exact - brute).abs() < 1e-12,
                "case {case}: {exact} vs {brute}"
            );
        }
    }

    #[test]
    fn enumeration_respects_caps() {
        let chain = random_chain(&mut ChaCha8Rng::seed_from_u64(1), 3);
        let nu = random_distribution(&mut ChaCha8Rng::seed_from_u64(2), 3);
        assert!(matches!(
            enumerate_paths_re(&chain, &chain, &nu, &nu, MAX_ENUM_STEPS + 1),
            Err(Error::OracleCap(_))
        ));
    }

    #[test]
    fn poisson_rer_reference_values() {
        assert!((poisson_rer(1.0, 1.1).unwrap() - 0.00468982).abs() < 1e-8);
        assert_eq!(poisson_rer(2.5, 2.5).unwrap(), 0.0);
        assert!(poisson_rer(1.0, 1.3).unwrap() > 0.0);
        assert!(poisson_rer(1.0, 0.7).unwrap() > 0.0);
        assert!(poisson_rer(0.0, 1.0).is_err());
    }

    #[test]
    fn poisson_rer_convex_in_perturbed_rate() {
        // positive second difference in λ̄
        let f = |lb: f64| poisson_rer(1.0, lb).unwrap();
        for lb in [0.5, 0.9, 1.0, 1.4, 2.0] {
            let h = 1e-3;
            let second = f(lb + h) - 2.0 * f(lb) + f(lb - h);
            assert!(second > 0.0, "second difference at {lb}: {second}");
        }
    }

    #[test]
    fn ou_reference_values() {
        assert!((ou_ifim(1.0, 1.0, 0.0, 1.0).unwrap() - 0.432332).abs() < 1e-6);
        assert!((ou_ire(1.0, 0.1, 1.0, 0.0, 1.0).unwrap() - 0.00216166).abs() < 1e-8);
        assert_eq!(ou_ire(1.0, 0.0, 1.0, 3.0, 2.0).unwrap(), 0.0);
        // long-time limit is the stationary variance σ²/2θ
        assert!((ou_ifim(1.0, 1.0, 5.0, 100.0).unwrap() - 0.5).abs() < 1e-9);
        assert!(ou_ire(-1.0, 0.1, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn finite_dtmc_rejects_bad_rows() {
        assert!(FiniteDtmc::new(vec![vec![0.6, 0.3], vec![0.5, 0.5]]).is_err());
        assert!(FiniteDtmc::new(vec![vec![1.2, -0.2], vec![0.5, 0.5]]).is_err());
        assert!(FiniteDtmc::new(vec![]).is_err());
    }
}
