//! Decision support for time-critical action under uncertainty.
//!
//! - [`bayes`]: discrete Bayesian networks, exact posteriors over
//!   pathological processes, value of information of unobserved findings.
//! - [`tdutility`]: time-dependent utility curves and models.
//! - [`ecda`]: best action, expected cost of delayed action and its
//!   variants (onset uncertainty, misdiagnosis, transport time, local
//!   treatment), criticality.
//! - [`triage`]: multi-patient transport plans ranked by expected cost.

pub mod bayes;
pub mod ecda;
pub mod tdutility;
pub mod triage;
