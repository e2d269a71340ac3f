//! Discrete-event simulation of 802.11 EDCA uplink contention.
//!
//! The [`policy`] module computes the EDCA parameter sets an access point
//! advertises: the fixed defaults, or the QCAAAE adaptation driven by how
//! many stations of each access category are associated. [`kernel`] runs
//! the slot-accurate contention procedure for a [`runner::ScenarioSpec`],
//! producing a [`metrics::MetricsLedger`]. [`runner`] parses scenario files
//! and sweeps scenario grids across policies and seeds.
//!
//! ```
//! use edca_core::policy::{compute_cw, PolicyKind};
//! use edca_core::runner::{ScenarioSpec, StationGroup};
//! use edca_core::policy::AccessCategory;
//! use edca_core::metrics::Scope;
//!
//! assert_eq!(compute_cw(30).unwrap(), (15, 63));
//!
//! let spec = ScenarioSpec::new(
//!     "8BE",
//!     vec![StationGroup::saturated(AccessCategory::Be, 8).unwrap()],
//! )
//! .with_duration(1.0, 0.2);
//! let ledger = edca_core::kernel::run(&spec, PolicyKind::Qcaaae, 1).unwrap();
//! assert!(ledger.normalized_throughput(Scope::Global).unwrap() > 0.9);
//! ```

pub mod error;
pub mod event;
pub mod kernel;
pub mod metrics;
pub mod policy;
pub mod runner;
pub mod time;
pub mod traffic;

pub use error::{Error, Result};
