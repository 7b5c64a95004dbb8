//! Weighted fair division of mixed manna (goods, chores and everything in
//! between) in exact rational arithmetic.
//!
//! * [`instance`]: instances, item classification, allocations.
//! * [`fairness`]: WEF / WEF1 / WEF1T envy checks with witnesses.
//! * [`sequences`]: weighted picking sequences and the goods/chores composer.
//! * [`market`]: Fisher-market equilibria and the two-agent local search.
//! * [`search`]: exhaustive enumeration oracles and impossibility reproductions.
//! * [`gen`]: seeded random instance generation.
//!
//! Algorithms are generic over [`Scalar`]; the aliases below fix the scalar to
//! the exact [`Rational`] type used by the file formats and the CLI.

pub mod fairness;
pub mod gen;
pub mod instance;
pub mod io;
pub mod market;
pub mod scalar;
pub mod search;
pub mod sequences;

pub use fairness::{check_allocation, EnvyReport, EnvyVerdict, Notion};
pub use instance::{ordinally_compatible, Allocation, Instance, ItemKind};
pub use scalar::{Rational, Scalar};

/// Instance over exact rationals.
pub type ExactInstance = Instance<Rational>;
/// Envy report over exact rationals.
pub type ExactEnvyReport = EnvyReport<Rational>;
/// Fisher market over exact rationals.
pub type ExactMarket = market::FisherMarket<Rational>;
/// Equilibrium certificate over exact rationals.
pub type ExactCertificate = market::EquilibriumCertificate<Rational>;
/// Two-agent solver trace over exact rationals.
pub type ExactTrace = market::SolveTrace<Rational>;

/// Instance over `f64`, for quick non-exact experiments.
pub type FloatInstance = Instance<f64>;
