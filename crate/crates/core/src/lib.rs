//! Set-valued systemic risk measures on a finite-dimensional allocation space.
//!
//! The crate models acceptance sets `R(Y) = {k : rho(Lambda(Y + k)) <= 0}` of a
//! random vector `Y` of bank exposures, their identification functions,
//! strictly consistent and order-sensitive exhaustive scores, Diebold-Mariano
//! style comparative backtests, efficient allocations, and the simulation
//! harness used to study them.
//!
//! Everything here is `no_std` + `alloc`. File formats, configuration, the
//! parallel runner and the command-line tool live in the `sysrisk` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod aggregation;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod scalar_risk;
pub mod scoring;
pub mod simharness;
pub mod stats;
pub mod systemic;
pub mod upper_set;

pub use aggregation::{Aggregation, ClearingResult, LiabilityNetwork};
pub use data::EmpiricalDistribution;
pub use error::{Error, Result};
pub use evaluation::{DmResult, MurphyGrid, Zone};
pub use scalar_risk::{RiskKind, ScalarRiskMeasure};
pub use scoring::{EsPair, MixtureMeasure, VarSurface};
pub use systemic::{EarQuery, EarResult, EarVerdict, SystemicMeasure};
pub use upper_set::{SetKind, UpperSet};
