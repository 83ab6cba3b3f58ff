//! Posted pricing for budget-constrained worker recruitment.
//!
//! A requester posts either one `(base, bonus)` offer per worker (personalized
//! pricing) or a single offer shared by everyone (common pricing). A worker with
//! quality `r` and opportunity cost `c` takes the task when `base + bonus * r >= c`.
//! The crate computes optimal and approximate policies under a budget, classifies
//! the structure of the recruited sets, and audits the bounds that relate the
//! two pricing families.
//!
//! Module map:
//!
//! - [`worker`]: worker profiles, the acceptance rule, cost-quality curves and regimes.
//! - [`utility`]: utility functions, majorization predicates, randomized property audits.
//! - [`pp`]: personalized pricing (knapsack reduction, greedy, relaxation, exact oracle).
//! - [`lp2d`]: feasibility of small half-plane systems over `(base, bonus)`.
//! - [`cp`]: common pricing solvers per regime and an exact arrangement oracle.
//! - [`analysis`]: power-of-bonus instances and price-of-agnosticity certificates.
//! - [`bonus`]: bonus qualification policies mapping ability to quality.
//! - [`scenario`]: scenario configuration, the sweep runner and plot-data emission.

pub mod analysis;
pub mod bonus;
pub mod cp;
mod error;
pub mod io;
pub mod lp2d;
pub mod numeric;
pub mod pp;
pub mod scenario;
pub mod suite;
pub mod utility;
pub mod worker;

pub use error::{Error, Result};
pub use utility::{Utility, UtilityFlags, UtilityFunction};
pub use worker::{decide, expected_payment, Offer, PersonalizedPolicy, Regime, WorkerProfile};

/// Version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
