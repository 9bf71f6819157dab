//! Parametrized stochastic models.
//!
//! A [`ReactionNetwork`] is a continuous-time Markov chain over molecule
//! counts whose jump rates are mass-action or Michaelis-Menten propensities.
//! Chains with an explicit transition kernel ([`DtmcModel`]) and
//! drift/diffusion systems ([`SdeModel`]) cover the discrete-time and SDE
//! process classes. Everything here is immutable after construction and all
//! operations are pure functions of their arguments, so models can be shared
//! freely across parallel workers.

mod dynamics;
mod file;

pub(crate) use dynamics::validate_row;
pub use dynamics::{DtmcModel, OrnsteinUhlenbeck, SdeModel, TwoStateChain};
pub use file::{load_network, parse_network, NetworkModel};

use crate::error::{Error, Result};

/// Parameter vector θ ∈ R^K with one label per coordinate.
///
/// Every coordinate must be strictly positive: the rate laws enter the
/// estimators through log c^θ and the log-gradients 1/θ_k, both of which
/// blow up at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    names: Vec<String>,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidModel(
                "parameter vector must have K ≥ 1 entries".into(),
            ));
        }
        if values.len() != names.len() {
            return Err(Error::InvalidModel(format!(
                "{} parameter values but {} names",
                values.len(),
                names.len()
            )));
        }
        for (name, &v) in names.iter().zip(&values) {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "parameter '{name}' = {v}; all parameters must be finite and > 0"
                )));
            }
        }
        Ok(Self { values, names })
    }

    /// Unnamed constructor for tests and library use; labels are `theta0..`.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let names = (0..values.len()).map(|i| format!("theta{i}")).collect();
        Self::new(values, names)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// θ + ε, failing if any coordinate leaves the positive orthant.
    pub fn perturbed(&self, eps: &Perturbation) -> Result<Self> {
        if eps.len() != self.len() {
            return Err(Error::InvalidModel(format!(
                "perturbation has {} coordinates, parameter vector has {}",
                eps.len(),
                self.len()
            )));
        }
        let mut values = self.values.clone();
        for (i, v) in values.iter_mut().enumerate() {
            *v += eps.delta()[i];
            if !v.is_finite() || *v <= 0.0 {
                return Err(Error::NonPositivePerturbation {
                    name: self.names[i].clone(),
                    value: *v,
                });
            }
        }
        Ok(Self {
            values,
            names: self.names.clone(),
        })
    }
}

/// Perturbation vector ε ∈ R^K applied to a [`ParameterVector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    delta: Vec<f64>,
}

impl Perturbation {
    pub fn new(delta: Vec<f64>) -> Self {
        Self { delta }
    }

    pub fn zero(k: usize) -> Self {
        Self {
            delta: vec![0.0; k],
        }
    }

    /// ε with a single nonzero coordinate.
    pub fn single(k: usize, index: usize, value: f64) -> Self {
        let mut delta = vec![0.0; k];
        delta[index] = value;
        Self { delta }
    }

    /// ε_ℓ = factor · θ_ℓ in coordinate `index` only (the ε' = 0.1 θ_ℓ convention).
    pub fn relative_single(theta: &ParameterVector, index: usize, factor: f64) -> Self {
        Self::single(theta.len(), index, factor * theta.get(index))
    }

    /// ε = factor · θ in every coordinate.
    pub fn relative_all(theta: &ParameterVector, factor: f64) -> Self {
        Self {
            delta: theta.values().iter().map(|v| factor * v).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn is_zero(&self) -> bool {
        self.delta.iter().all(|&d| d == 0.0)
    }

    /// Indices of the coordinates this perturbation actually moves.
    pub fn moved_indices(&self) -> Vec<usize> {
        self.delta
            .iter()
            .enumerate()
            .filter(|(_, &d)| d != 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Molecule counts, one nonnegative integer per species.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CountState(pub Vec<u64>);

impl CountState {
    pub fn new(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Rate law attached to a reaction channel.
#[derive(Debug, Clone, PartialEq)]
pub enum RateLaw {
    /// a_j(x) = k · ∏_s C(x_s, order_s). An empty reactant list is a
    /// zeroth-order source with a_j = k.
    MassAction {
        rate_param: usize,
        /// (species index, stoichiometric order), order ≥ 1.
        reactant_orders: Vec<(usize, u32)>,
    },
    /// a_j(x) = V · x_A / (K + x_A) on raw molecule counts.
    MichaelisMenten {
        v_param: usize,
        k_param: usize,
        substrate: usize,
    },
}

/// One reaction channel: stoichiometry plus its rate law.
#[derive(Debug, Clone, PartialEq)]
pub struct Reaction {
    reactants: Vec<u64>,
    products: Vec<u64>,
    state_change: Vec<i64>,
    rate_law: RateLaw,
}

impl Reaction {
    /// Mass-action channel; reactant orders are derived from `reactants` so
    /// the two representations cannot disagree.
    pub fn mass_action(reactants: Vec<u64>, products: Vec<u64>, rate_param: usize) -> Self {
        let reactant_orders = reactants
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| (s, c as u32))
            .collect();
        let state_change = state_change_of(&reactants, &products);
        Self {
            reactants,
            products,
            state_change,
            rate_law: RateLaw::MassAction {
                rate_param,
                reactant_orders,
            },
        }
    }

    /// Michaelis-Menten channel saturating in the substrate count.
    pub fn michaelis_menten(
        reactants: Vec<u64>,
        products: Vec<u64>,
        v_param: usize,
        k_param: usize,
        substrate: usize,
    ) -> Self {
        let state_change = state_change_of(&reactants, &products);
        Self {
            reactants,
            products,
            state_change,
            rate_law: RateLaw::MichaelisMenten {
                v_param,
                k_param,
                substrate,
            },
        }
    }

    pub fn reactants(&self) -> &[u64] {
        &self.reactants
    }

    pub fn products(&self) -> &[u64] {
        &self.products
    }

    pub fn state_change(&self) -> &[i64] {
        &self.state_change
    }

    pub fn rate_law(&self) -> &RateLaw {
        &self.rate_law
    }
}

fn state_change_of(reactants: &[u64], products: &[u64]) -> Vec<i64> {
    reactants
        .iter()
        .zip(products)
        .map(|(&r, &p)| p as i64 - r as i64)
        .collect()
}

/// A well-mixed reaction network: the CTMC generator of the toolkit.
#[derive(Debug, Clone)]
pub struct ReactionNetwork {
    species_names: Vec<String>,
    parameter_names: Vec<String>,
    reactions: Vec<Reaction>,
}

impl ReactionNetwork {
    pub fn new(
        species_names: Vec<String>,
        parameter_names: Vec<String>,
        reactions: Vec<Reaction>,
    ) -> Result<Self> {
        let n = species_names.len();
        let k = parameter_names.len();
        if n == 0 {
            return Err(Error::InvalidModel("network needs N ≥ 1 species".into()));
        }
        if reactions.is_empty() {
            return Err(Error::InvalidModel("network needs M ≥ 1 reactions".into()));
        }
        for names in [&species_names, &parameter_names] {
            for (i, a) in names.iter().enumerate() {
                if names[..i].contains(a) {
                    return Err(Error::InvalidModel(format!("duplicate name '{a}'")));
                }
            }
        }
        for (j, r) in reactions.iter().enumerate() {
            if r.reactants.len() != n || r.products.len() != n || r.state_change.len() != n {
                return Err(Error::InvalidModel(format!(
                    "reaction {j}: stoichiometry vectors must have length N = {n}"
                )));
            }
            let expect = state_change_of(&r.reactants, &r.products);
            if r.state_change != expect {
                return Err(Error::InvalidModel(format!(
                    "reaction {j}: state_change disagrees with products − reactants"
                )));
            }
            match &r.rate_law {
                RateLaw::MassAction {
                    rate_param,
                    reactant_orders,
                } => {
                    if *rate_param >= k {
                        return Err(Error::IndexOutOfRange {
                            what: "parameter",
                            index: *rate_param,
                            len: k,
                        });
                    }
                    let mut derived: Vec<(usize, u32)> = r
                        .reactants
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c > 0)
                        .map(|(s, &c)| (s, c as u32))
                        .collect();
                    derived.sort_unstable();
                    let mut given = reactant_orders.clone();
                    given.sort_unstable();
                    if given != derived {
                        return Err(Error::InvalidModel(format!(
                            "reaction {j}: mass-action orders disagree with reactants"
                        )));
                    }
                    for &(s, order) in reactant_orders {
                        if s >= n {
                            return Err(Error::IndexOutOfRange {
                                what: "species",
                                index: s,
                                len: n,
                            });
                        }
                        if order == 0 {
                            return Err(Error::InvalidModel(format!(
                                "reaction {j}: zero reactant order"
                            )));
                        }
                    }
                }
                RateLaw::MichaelisMenten {
                    v_param,
                    k_param,
                    substrate,
                } => {
                    for &p in [v_param, k_param] {
                        if p >= k {
                            return Err(Error::IndexOutOfRange {
                                what: "parameter",
                                index: p,
                                len: k,
                            });
                        }
                    }
                    if *substrate >= n {
                        return Err(Error::IndexOutOfRange {
                            what: "species",
                            index: *substrate,
                            len: n,
                        });
                    }
                }
            }
        }
        Ok(Self {
            species_names,
            parameter_names,
            reactions,
        })
    }

    pub fn species_count(&self) -> usize {
        self.species_names.len()
    }

    pub fn reaction_count(&self) -> usize {
        self.reactions.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_names.len()
    }

    pub fn species_names(&self) -> &[String] {
        &self.species_names
    }

    pub fn parameter_names(&self) -> &[String] {
        &self.parameter_names
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    fn check_theta(&self, theta: &ParameterVector) -> Result<()> {
        if theta.len() != self.parameter_count() {
            return Err(Error::InvalidModel(format!(
                "parameter vector has {} entries, network declares {}",
                theta.len(),
                self.parameter_count()
            )));
        }
        Ok(())
    }

    /// Propensity a_j(x) of channel `j` at state `x`.
    pub fn propensity(&self, theta: &ParameterVector, x: &CountState, j: usize) -> Result<f64> {
        self.check_theta(theta)?;
        let r = self.reactions.get(j).ok_or(Error::IndexOutOfRange {
            what: "reaction",
            index: j,
            len: self.reactions.len(),
        })?;
        if x.len() != self.species_count() {
            return Err(Error::InvalidModel(format!(
                "state has {} species, network declares {}",
                x.len(),
                self.species_count()
            )));
        }
        propensity_of(r, theta, x)
    }

    /// Total jump intensity a_0(x) = Σ_j a_j(x).
    pub fn total_rate(&self, theta: &ParameterVector, x: &CountState) -> Result<f64> {
        self.check_theta(theta)?;
        let mut total = 0.0;
        for r in &self.reactions {
            total += propensity_of(r, theta, x)?;
        }
        Ok(total)
    }

    /// All propensities at once, written into `out` (len M).
    pub fn propensities_into(
        &self,
        theta: &ParameterVector,
        x: &CountState,
        out: &mut Vec<f64>,
    ) -> Result<f64> {
        out.clear();
        let mut total = 0.0;
        for r in &self.reactions {
            let a = propensity_of(r, theta, x)?;
            out.push(a);
            total += a;
        }
        Ok(total)
    }

    /// ∇_θ log a_j(x) as sparse (parameter index, value) pairs; every
    /// parameter the law does not reference has derivative exactly zero.
    ///
    /// Errors when a_j(x) = 0: the gradient is undefined there and the
    /// caller must skip the channel.
    pub fn grad_log_propensity(
        &self,
        theta: &ParameterVector,
        x: &CountState,
        j: usize,
    ) -> Result<Vec<(usize, f64)>> {
        let a = self.propensity(theta, x, j)?;
        if a == 0.0 {
            return Err(Error::ZeroPropensityGradient { reaction: j });
        }
        let mut entries = match self.reactions[j].rate_law {
            RateLaw::MassAction { rate_param, .. } => {
                vec![(rate_param, 1.0 / theta.get(rate_param))]
            }
            RateLaw::MichaelisMenten {
                v_param,
                k_param,
                substrate,
            } => {
                let xa = x.counts()[substrate] as f64;
                vec![
                    (v_param, 1.0 / theta.get(v_param)),
                    (k_param, -1.0 / (theta.get(k_param) + xa)),
                ]
            }
        };
        merge_sparse(&mut entries);
        Ok(entries)
    }

    /// log(a_j^θ(x) / a_j^{θ+ε}(x)), with the convention that a channel
    /// inactive under both parameter values contributes 0.
    pub fn propensity_log_ratio(
        &self,
        theta: &ParameterVector,
        eps: &Perturbation,
        x: &CountState,
        j: usize,
    ) -> Result<f64> {
        let theta_bar = theta.perturbed(eps)?;
        let a = self.propensity(theta, x, j)?;
        let a_bar = self.propensity(&theta_bar, x, j)?;
        log_ratio(a, a_bar, j)
    }
}

pub(crate) fn log_ratio(a: f64, a_bar: f64, j: usize) -> Result<f64> {
    match (a > 0.0, a_bar > 0.0) {
        (true, true) => Ok((a / a_bar).ln()),
        (false, false) => Ok(0.0),
        _ => Err(Error::AbsoluteContinuityViolation(format!(
            "channel {j}: propensity {a} vs {a_bar}; exactly one is zero"
        ))),
    }
}

fn merge_sparse(entries: &mut Vec<(usize, f64)>) {
    entries.sort_unstable_by_key(|&(i, _)| i);
    entries.dedup_by(|b, a| {
        if a.0 == b.0 {
            a.1 += b.1;
            true
        } else {
            false
        }
    });
}

pub(crate) fn propensity_of(r: &Reaction, theta: &ParameterVector, x: &CountState) -> Result<f64> {
    match &r.rate_law {
        RateLaw::MassAction {
            rate_param,
            reactant_orders,
        } => {
            let mut a = theta.get(*rate_param);
            for &(s, order) in reactant_orders {
                let c = binomial(x.counts()[s], order as u64)?;
                if c == 0 {
                    return Ok(0.0);
                }
                a *= c as f64;
            }
            Ok(a)
        }
        RateLaw::MichaelisMenten {
            v_param,
            k_param,
            substrate,
        } => {
            let xa = x.counts()[*substrate] as f64;
            Ok(theta.get(*v_param) * xa / (theta.get(*k_param) + xa))
        }
    }
}

/// C(n, k) in checked 64-bit arithmetic. Counts large enough to overflow
/// raise [`Error::CountOverflow`] instead of silently saturating.
pub fn binomial(n: u64, k: u64) -> Result<u64> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut result: u64 = 1;
    for i in 1..=k {
        // r * (n-k+i) / i is exact: i consecutive integers contain a multiple of i!.
        result = result
            .checked_mul(n - k + i)
            .ok_or(Error::CountOverflow { n, k })?
            / i;
    }
    Ok(result)
}

/// Apply a reaction's state change with a nonnegativity check.
pub(crate) fn apply_state_change(
    counts: &mut [u64],
    change: &[i64],
    reaction: usize,
) -> Result<()> {
    for (species, (&d, c)) in change.iter().zip(counts.iter_mut()).enumerate() {
        let next = *c as i64 + d;
        if next < 0 {
            return Err(Error::NegativeCount { reaction, species });
        }
        *c = next as u64;
    }
    Ok(())
}
