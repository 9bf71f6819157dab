//! Pathwise information-theoretic sensitivity analysis for stochastic models.
//!
//! The toolkit computes the instantaneous relative entropy (IRE) and the
//! instantaneous Fisher information matrix (IFIM) of a parametrized process
//! against its perturbed twin, their time-integrated pathwise forms, and the
//! stationary relative entropy rate, for three process classes:
//!
//! * reaction-network CTMCs simulated with the Gillespie direct method,
//! * discrete-time Markov chains with finite next-state support,
//! * SDEs integrated with fixed-step Euler-Maruyama.
//!
//! On top of the information-theoretic estimators, [`sensitivity`] provides
//! observable-based finite-difference sensitivity indices and the Cramér-Rao
//! screening bound |∂_k E[f]| ≤ √Var(f)·√F_kk used to rank and discard
//! low-sensitivity parameters before any finite-difference pass.
//!
//! [`oracle`] holds the exact references (Chapman-Kolmogorov propagation,
//! brute-force path enumeration, Poisson and Ornstein-Uhlenbeck closed
//! forms) that the test suites and the `verify` subcommand check against.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod model;
pub mod oracle;
pub mod sensitivity;
pub mod simulate;

pub use error::{Error, Result};
