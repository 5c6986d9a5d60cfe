//! Causal effect estimation for cluster-randomized vaccine trials in which
//! individuals choose whether to participate.
//!
//! The crate covers the whole loop:
//!
//! * [`model`]: trial data and cluster-level outcomes per principal stratum,
//! * [`estimators`]: overall, indirect and total effects with Wald intervals,
//!   plus the (non-causal) naive direct contrast and a confounding check,
//! * [`randomization`]: complete and stratified cluster assignment,
//! * [`margins`]: synthetic datasets matching published summary margins,
//! * [`causal`]: a generative model with full potential outcomes and
//!   brute-force true estimands,
//! * [`mc`]: Monte Carlo bias and coverage studies,
//! * [`io`], [`config`], [`cli`]: files and the command-line front end.

pub mod causal;
pub mod cli;
pub mod config;
pub mod estimators;
pub mod io;
pub mod margins;
pub mod mc;
pub mod model;
pub mod randomization;
pub mod rng;

pub use estimators::{Contrast, EffectEstimate, EffectKind, EmptyPolicy, EstimationError, Estimator};
pub use model::{
    Arm, ClusterId, ClusterOutcome, ClusterRecord, ClusterTally, IndividualRecord, StratumSelector,
    TrialDataset,
};
