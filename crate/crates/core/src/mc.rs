//! Monte Carlo randomization studies.
//!
//! With a fixed [`PotentialWorld`], each replicate draws a fresh cluster
//! assignment, observes the matching potential outcomes and runs every
//! estimator. Truth is the world's finite-population estimand, so bias and
//! coverage measure randomization-based behaviour only. Replicate `r` uses
//! its own random stream, which makes the report independent of thread
//! count and execution order.
//!
//! For the naive direct contrast the "truth" row holds its probability
//! limit, which is not a causal effect.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::causal::{
    generate_world, true_estimands, CausalError, GenerativeConfig, PotentialWorld, TrueEstimands,
};
use crate::estimators::{Contrast, EffectKind, EmptyPolicy, EstimationError, Estimator};
use crate::model::{Arm, ClusterId, ClusterTally};
use crate::randomization::{AssignmentPlan, RandomizationError, SchemeKind};
use crate::rng::{self, purpose};

#[derive(Debug, Error)]
pub enum McError {
    #[error(transparent)]
    Randomization(#[from] RandomizationError),
    #[error(transparent)]
    World(#[from] CausalError),
    #[error("need at least 2 replicates, got {0}")]
    TooFewReplicates(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct McOptions {
    pub n_replicates: usize,
    pub seed: u64,
    pub empty_policy: EmptyPolicy,
    pub parallel: bool,
}

impl McOptions {
    pub fn new(n_replicates: usize, seed: u64) -> Self {
        McOptions { n_replicates, seed, empty_policy: EmptyPolicy::Error, parallel: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicateEstimate {
    pub point: f64,
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
}

/// Estimates of one replicate, indexed like [`EffectKind::ALL`].
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub estimates: Vec<Result<ReplicateEstimate, EstimationError>>,
    /// Truth of the replicate's own world (regenerating mode only).
    pub truth: Option<TrueEstimands>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McRow {
    pub effect_kind: EffectKind,
    pub true_value: Option<f64>,
    /// False for the two within-arm contrasts, whose truth is a limit
    /// rather than an effect.
    pub truth_is_causal: bool,
    pub mean_estimate: f64,
    pub bias: Option<f64>,
    pub empirical_sd: f64,
    pub mean_estimated_se: f64,
    /// Share of successful replicates whose interval contains the truth.
    pub coverage: Option<f64>,
    /// Successful replicates; the denominator of every average above.
    pub n_replicates: usize,
    pub n_failed: usize,
    pub mc_standard_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McReport {
    pub seed: u64,
    pub n_replicates: usize,
    pub regenerated_worlds: bool,
    pub rows: Vec<McRow>,
}

impl McReport {
    pub fn row(&self, kind: EffectKind) -> &McRow {
        self.rows.iter().find(|r| r.effect_kind == kind).expect("one row per effect kind")
    }
}

fn estimate_all(
    estimator: &Estimator,
    ids: &[ClusterId],
    tallies: &[ClusterTally],
) -> Vec<Result<ReplicateEstimate, EstimationError>> {
    EffectKind::ALL
        .iter()
        .map(|&k| {
            estimator.estimate_tallies(ids, tallies, k, Contrast::RiskDifference).map(|e| ReplicateEstimate {
                point: e.point,
                standard_error: e.standard_error,
                ci_lower: e.ci_lower,
                ci_upper: e.ci_upper,
            })
        })
        .collect()
}

fn observed_tallies(potential: &[[ClusterTally; 2]], arms: &[Arm]) -> Vec<ClusterTally> {
    potential.iter().zip(arms).map(|(t, &a)| t[usize::from(a.bit())]).collect()
}

fn map_indices<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Replicate-level results for a fixed world, in replicate order.
pub fn run_replicates(
    world: &PotentialWorld,
    scheme: &SchemeKind,
    options: &McOptions,
) -> Result<Vec<ReplicateResult>, McError> {
    if options.n_replicates < 2 {
        return Err(McError::TooFewReplicates(options.n_replicates));
    }
    let plan = AssignmentPlan::new(&world.stratum_labels(), scheme)?;
    let ids = world.cluster_ids();
    let potential = world.potential_tallies();
    let estimator = Estimator::new(options.empty_policy);
    Ok(map_indices(options.n_replicates, options.parallel, |r| {
        let mut rng = rng::stream(options.seed, purpose::MC_REPLICATE, r as u64);
        let arms = plan.draw(&mut rng);
        let tallies = observed_tallies(&potential, &arms);
        ReplicateResult { index: r, estimates: estimate_all(&estimator, &ids, &tallies), truth: None }
    }))
}

pub fn run_mc(
    world: &PotentialWorld,
    scheme: &SchemeKind,
    n_replicates: usize,
    seed: u64,
) -> Result<McReport, McError> {
    run_mc_with(world, scheme, &McOptions::new(n_replicates, seed))
}

pub fn run_mc_with(
    world: &PotentialWorld,
    scheme: &SchemeKind,
    options: &McOptions,
) -> Result<McReport, McError> {
    let reps = run_replicates(world, scheme, options)?;
    Ok(aggregate(&true_estimands(world), &reps, options, false))
}

/// Super-population variant: every replicate generates a new world from
/// `config` (seeded per replicate) before randomizing it. The reported
/// truth is the average of the replicate worlds' finite-population truths.
pub fn run_mc_regenerating(
    config: &GenerativeConfig,
    scheme: &SchemeKind,
    options: &McOptions,
) -> Result<McReport, McError> {
    if options.n_replicates < 2 {
        return Err(McError::TooFewReplicates(options.n_replicates));
    }
    config.validate()?;
    let estimator = Estimator::new(options.empty_policy);
    let reps = map_indices(options.n_replicates, options.parallel, |r| {
        let cfg = GenerativeConfig {
            seed: rng::derive_seed(options.seed, purpose::MC_WORLD, r as u64),
            ..config.clone()
        };
        let world = generate_world(&cfg)?;
        let plan = AssignmentPlan::new(&world.stratum_labels(), scheme)?;
        let mut rng = rng::stream(options.seed, purpose::MC_REPLICATE, r as u64);
        let arms = plan.draw(&mut rng);
        let tallies = observed_tallies(&world.potential_tallies(), &arms);
        Ok::<_, McError>(ReplicateResult {
            index: r,
            estimates: estimate_all(&estimator, &world.cluster_ids(), &tallies),
            truth: Some(true_estimands(&world)),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;

    let average = |f: &dyn Fn(&TrueEstimands) -> Option<f64>| {
        let mut sum = 0.0;
        for r in &reps {
            sum += f(r.truth.as_ref().expect("set above"))?;
        }
        Some(sum / reps.len() as f64)
    };
    let truth = TrueEstimands {
        overall: average(&|t| Some(t.overall)).expect("always defined"),
        indirect: average(&|t| t.indirect),
        total: average(&|t| t.total),
        naive_limit: average(&|t| t.naive_limit),
        control_contrast_limit: average(&|t| t.control_contrast_limit),
    };
    Ok(aggregate(&truth, &reps, options, true))
}

/// Folds replicate results into a report, serially and in replicate order.
pub fn aggregate(
    truth: &TrueEstimands,
    reps: &[ReplicateResult],
    options: &McOptions,
    regenerated_worlds: bool,
) -> McReport {
    let rows = EffectKind::ALL
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let ok: Vec<&ReplicateEstimate> =
                reps.iter().filter_map(|r| r.estimates[k].as_ref().ok()).collect();
            let n = ok.len();
            let nf = n as f64;
            let mean_estimate = ok.iter().map(|e| e.point).sum::<f64>() / nf;
            let empirical_sd = if n > 1 {
                (ok.iter().map(|e| (e.point - mean_estimate).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            let true_value = truth.get(kind);
            McRow {
                effect_kind: kind,
                true_value,
                truth_is_causal: kind.is_causal(),
                mean_estimate,
                bias: true_value.map(|t| mean_estimate - t),
                empirical_sd,
                mean_estimated_se: ok.iter().map(|e| e.standard_error).sum::<f64>() / nf,
                coverage: true_value
                    .map(|t| ok.iter().filter(|e| e.ci_lower <= t && t <= e.ci_upper).count() as f64 / nf),
                n_replicates: n,
                n_failed: reps.len() - n,
                mc_standard_error: empirical_sd / nf.sqrt(),
            }
        })
        .collect();
    McReport { seed: options.seed, n_replicates: reps.len(), regenerated_worlds, rows }
}
