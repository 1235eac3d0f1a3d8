//! Weighted trajectory analysis of combined efficacy and toxicity outcomes.
//!
//! Patients move through ordinal health states scored by a toxicity x efficacy
//! matrix. Groups are summarised by a weighted product-limit curve and compared
//! with a weighted logrank test; a stochastic trial simulator and a Monte Carlo
//! harness estimate power and sample-size requirements.

pub mod ingest;
pub mod matrices;
pub mod power;
pub mod report;
pub mod seeding;
pub mod sim;
pub mod stats;
pub mod trajectory;

pub use matrices::{HealthScore, RbaMatrix};
pub use stats::{LogrankResult, TestMethod, WeightedCurve};
pub use trajectory::{Endpoint, PatientTrajectory, TimeUnit, TrialDataset};
