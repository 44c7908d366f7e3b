//! Attrition-robust treatment-effect estimation for two-period randomized
//! studies with follow-up nonresponse.
//!
//! The core idea: under time invariance of the unit-level unobservable,
//! quantile-quantile maps estimated from each arm's respondents identify the
//! missing follow-up outcome distributions, which yields point estimates of
//! respondent and population average effects without missing-at-random
//! assumptions. The crate also ships inverse-probability-weighting
//! comparators, a percentile bootstrap, and the threshold-response
//! simulation engine used to validate everything.

pub mod bootstrap;
pub mod cic;
pub mod empirical;
pub mod error;
pub mod ipw;
pub mod panel;
pub mod report;
pub mod sim;

pub use bootstrap::{BaseStatistic, BootstrapResult, BootstrapSpec, ResampleUnit, Statistic};
pub use cic::{CicTransforms, EstimandValue};
pub use empirical::EmpiricalCdf;
pub use error::{Error, Result};
pub use panel::{AttritionSummary, Cell, CsvSchema, CsvScan, OutcomeField, PanelSample, UnitRecord};
pub use report::{EstimateReport, EstimateRow};
pub use sim::{McSummary, SimDesign};
