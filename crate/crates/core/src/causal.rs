//! Generative model with full potential outcomes.
//!
//! Each generated individual carries a participation decision (the same
//! under both arms) and two disease outcomes, one per arm. Because both
//! columns exist, the true overall, indirect and total effects of the
//! generated clusters, and the limit of the naive direct contrast, can be
//! computed exactly by averaging over the table.
//!
//! Mechanism, per individual `j` of cluster `i` under arm `a`:
//!
//! ```text
//! frailty     f_ij ~ N(0, 1)
//! participate S_ij ~ Bernoulli(logistic(intercept + confounding * f_ij))
//! coverage    c_i  = mean_j S_ij if a = vaccine, else 0
//! risk        p    = baseline * exp(h f_ij - h^2 / 2)
//!                    * (1 - efficacy * S_ij * a) * spillover(c_i)
//! outcome     Y_ij^a = U_ij < p     (one uniform U_ij shared by both arms)
//! ```
//!
//! The shared uniform makes `Y^vaccine = Y^control` whenever the two risks
//! are equal, so null scenarios have exactly zero true effects.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Arm, ClusterId, ClusterRecord, ClusterTally, IndividualRecord, StratumSelector, TrialDataset,
};
use crate::randomization::Assignment;
use crate::rng::{self, purpose};

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeConfig {
    pub n_clusters: usize,
    pub mean_size: f64,
    /// Standard deviation of cluster sizes (normal, rounded, at least 1).
    pub size_sd: f64,
    pub baseline_risk: f64,
    /// Scale of the log-normal individual frailty multiplier.
    pub risk_heterogeneity: f64,
    pub participation_intercept: f64,
    /// Log-odds of participation per unit of frailty; 0 means participation
    /// is unrelated to risk.
    pub confounding_strength: f64,
    /// Relative risk reduction of a vaccinated individual.
    pub direct_efficacy: f64,
    /// Rate of the exponential spillover `exp(-strength * coverage)`.
    pub spillover_strength: f64,
    /// Clusters are labelled `s0..s{n_strata-1}` round-robin.
    #[serde(default = "one")]
    pub n_strata: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for GenerativeConfig {
    fn default() -> Self {
        GenerativeConfig {
            n_clusters: 40,
            mean_size: 120.0,
            size_sd: 30.0,
            baseline_risk: 0.1,
            risk_heterogeneity: 0.5,
            participation_intercept: 0.4,
            confounding_strength: 0.0,
            direct_efficacy: 0.5,
            spillover_strength: 0.5,
            n_strata: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CausalError {
    #[error("invalid generative config: {0}")]
    InvalidConfig(String),
    #[error("risk {risk} exceeds 1 in cluster {cluster}; lower baseline_risk or risk_heterogeneity")]
    RiskOutOfRange { cluster: ClusterId, risk: f64 },
    #[error("cluster {0} has no assigned arm")]
    MissingAssignment(ClusterId),
    #[error("world cluster {0} is empty")]
    EmptyCluster(ClusterId),
    #[error("world cluster id {0} appears more than once")]
    DuplicateCluster(ClusterId),
    #[error("expected {expected} arms, got {got}")]
    ArmCount { expected: usize, got: usize },
}

impl GenerativeConfig {
    pub fn validate(&self) -> Result<(), CausalError> {
        let bad = |m: &str| Err(CausalError::InvalidConfig(m.to_owned()));
        if self.n_clusters < 2 {
            return bad("n_clusters must be at least 2");
        }
        if !(self.mean_size.is_finite() && self.mean_size >= 1.0) {
            return bad("mean_size must be at least 1");
        }
        if !(self.size_sd.is_finite() && self.size_sd >= 0.0) {
            return bad("size_sd must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.baseline_risk) {
            return bad("baseline_risk must be a probability");
        }
        if !(self.risk_heterogeneity.is_finite() && self.risk_heterogeneity >= 0.0) {
            return bad("risk_heterogeneity must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.direct_efficacy) {
            return bad("direct_efficacy must lie in [0, 1]");
        }
        if !(self.spillover_strength.is_finite() && self.spillover_strength >= 0.0) {
            return bad("spillover_strength must be non-negative");
        }
        if !(self.participation_intercept.is_finite() && self.confounding_strength.is_finite()) {
            return bad("participation parameters must be finite");
        }
        if self.n_strata == 0 || self.n_strata > self.n_clusters {
            return bad("n_strata must lie in [1, n_clusters]");
        }
        Ok(())
    }
}

/// Risk multiplier applied to everyone in a vaccine cluster as a function of
/// the cluster's vaccine coverage. Control clusters have coverage 0.
pub trait SpilloverMechanism: Sync {
    fn risk_multiplier(&self, coverage: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialSpillover {
    pub strength: f64,
}

impl SpilloverMechanism for ExponentialSpillover {
    fn risk_multiplier(&self, coverage: f64) -> f64 {
        (-self.strength * coverage).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PotentialIndividual {
    pub participation: bool,
    pub outcome_if_vaccine: bool,
    pub outcome_if_control: bool,
}

impl PotentialIndividual {
    pub fn outcome(&self, arm: Arm) -> bool {
        match arm {
            Arm::Vaccine => self.outcome_if_vaccine,
            Arm::Control => self.outcome_if_control,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorldCluster {
    pub id: ClusterId,
    pub stratum_label: Option<String>,
    pub individuals: Vec<PotentialIndividual>,
}

impl WorldCluster {
    pub fn tally(&self, arm: Arm) -> ClusterTally {
        let observed: Vec<IndividualRecord> = self.observed(arm);
        ClusterTally::from_individuals(arm, &observed)
    }

    fn observed(&self, arm: Arm) -> Vec<IndividualRecord> {
        self.individuals.iter().map(|p| IndividualRecord::new(p.participation, p.outcome(arm))).collect()
    }
}

/// Both potential outcome columns for every individual of every cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PotentialWorld {
    clusters: Vec<WorldCluster>,
}

impl PotentialWorld {
    pub fn new(clusters: Vec<WorldCluster>) -> Result<Self, CausalError> {
        let mut seen = HashSet::new();
        for c in &clusters {
            if c.individuals.is_empty() {
                return Err(CausalError::EmptyCluster(c.id.clone()));
            }
            if !seen.insert(&c.id) {
                return Err(CausalError::DuplicateCluster(c.id.clone()));
            }
        }
        Ok(PotentialWorld { clusters })
    }

    pub fn clusters(&self) -> &[WorldCluster] {
        &self.clusters
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn cluster_ids(&self) -> Vec<ClusterId> {
        self.clusters.iter().map(|c| c.id.clone()).collect()
    }

    pub fn stratum_labels(&self) -> Vec<Option<&str>> {
        self.clusters.iter().map(|c| c.stratum_label.as_deref()).collect()
    }

    /// `[control, vaccine]` tallies per cluster.
    pub fn potential_tallies(&self) -> Vec<[ClusterTally; 2]> {
        self.clusters.iter().map(|c| [c.tally(Arm::Control), c.tally(Arm::Vaccine)]).collect()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_world(config: &GenerativeConfig) -> Result<PotentialWorld, CausalError> {
    generate_world_with(config, &ExponentialSpillover { strength: config.spillover_strength })
}

/// Like [`generate_world`] with a custom spillover mechanism; the config's
/// `spillover_strength` is ignored.
pub fn generate_world_with(
    config: &GenerativeConfig,
    spillover: &dyn SpilloverMechanism,
) -> Result<PotentialWorld, CausalError> {
    config.validate()?;
    let h = config.risk_heterogeneity;
    let width = config.n_clusters.to_string().len().max(3);
    let clusters = (0..config.n_clusters)
        .into_par_iter()
        .map(|i| {
            let id = ClusterId(format!("W{i:0width$}"));
            let mut rng = rng::stream(config.seed, purpose::WORLD_CLUSTER, i as u64);
            let draw: f64 = rng.sample(StandardNormal);
            let size = (config.mean_size + config.size_sd * draw).round().max(1.0) as usize;

            // (participation, frailty multiplier, shared uniform)
            let people: Vec<(bool, f64, f64)> = (0..size)
                .map(|_| {
                    let f: f64 = rng.sample(StandardNormal);
                    let p_part = logistic(config.participation_intercept + config.confounding_strength * f);
                    let s = rng.random::<f64>() < p_part;
                    let u = rng.random::<f64>();
                    (s, (h * f - 0.5 * h * h).exp(), u)
                })
                .collect();
            let coverage = people.iter().filter(|p| p.0).count() as f64 / size as f64;
            let herd = spillover.risk_multiplier(coverage);
            let herd_control = spillover.risk_multiplier(0.0);

            let mut individuals = Vec::with_capacity(size);
            for (s, frailty, u) in people {
                let base = config.baseline_risk * frailty;
                let vaccinated = if s { 1.0 - config.direct_efficacy } else { 1.0 };
                let risk_control = base * herd_control;
                let risk_vaccine = base * vaccinated * herd;
                for risk in [risk_control, risk_vaccine] {
                    if !(0.0..=1.0).contains(&risk) {
                        return Err(CausalError::RiskOutOfRange { cluster: id.clone(), risk });
                    }
                }
                individuals.push(PotentialIndividual {
                    participation: s,
                    outcome_if_vaccine: u < risk_vaccine,
                    outcome_if_control: u < risk_control,
                });
            }
            let stratum_label = (config.n_strata > 1).then(|| format!("s{}", i % config.n_strata));
            Ok(WorldCluster { id, stratum_label, individuals })
        })
        .collect::<Result<Vec<_>, _>>()?;
    PotentialWorld::new(clusters)
}

/// Finite-population estimands of a world, as risk differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrueEstimands {
    pub overall: f64,
    /// `None` when some cluster has no non-participants.
    pub indirect: Option<f64>,
    /// `None` when some cluster has no participants.
    pub total: Option<f64>,
    /// Probability limit of the naive direct contrast: mean participant
    /// outcome minus mean non-participant outcome, both under vaccine.
    /// Not a causal effect. `None` unless every cluster has both strata.
    pub naive_limit: Option<f64>,
    /// The same contrast under control; zero when participation is
    /// unrelated to risk.
    pub control_contrast_limit: Option<f64>,
}

impl TrueEstimands {
    pub fn get(&self, kind: crate::estimators::EffectKind) -> Option<f64> {
        use crate::estimators::EffectKind::*;
        match kind {
            Overall => Some(self.overall),
            Indirect => self.indirect,
            Total => self.total,
            NaiveDirect => self.naive_limit,
            ControlArmStratumContrast => self.control_contrast_limit,
        }
    }
}

fn mean_over<F>(tallies: &[[ClusterTally; 2]], f: F) -> Option<f64>
where
    F: Fn(&[ClusterTally; 2]) -> Option<f64>,
{
    let mut sum = 0.0;
    for t in tallies {
        sum += f(t)?;
    }
    Some(sum / tallies.len() as f64)
}

pub fn true_estimands(world: &PotentialWorld) -> TrueEstimands {
    let tallies = world.potential_tallies();
    let effect = |stratum: StratumSelector| {
        mean_over(&tallies, |[c, v]| Some(v.proportion(stratum)? - c.proportion(stratum)?))
    };
    let stratum_gap = |arm: Arm| {
        let idx = usize::from(arm.bit());
        let p = mean_over(&tallies, |t| t[idx].proportion(StratumSelector::Participators))?;
        let n = mean_over(&tallies, |t| t[idx].proportion(StratumSelector::NonParticipators))?;
        Some(p - n)
    };
    TrueEstimands {
        overall: effect(StratumSelector::Overall).expect("clusters are nonempty"),
        indirect: effect(StratumSelector::NonParticipators),
        total: effect(StratumSelector::Participators),
        naive_limit: stratum_gap(Arm::Vaccine),
        control_contrast_limit: stratum_gap(Arm::Control),
    }
}

/// Reveals, per cluster, the potential outcome column of its assigned arm.
pub fn observe(world: &PotentialWorld, assignment: &Assignment) -> Result<TrialDataset, CausalError> {
    let arms = world
        .clusters
        .iter()
        .map(|c| assignment.get(&c.id).copied().ok_or_else(|| CausalError::MissingAssignment(c.id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    observe_arms(world, &arms)
}

/// [`observe`] with arms given in cluster order.
pub fn observe_arms(world: &PotentialWorld, arms: &[Arm]) -> Result<TrialDataset, CausalError> {
    if arms.len() != world.n_clusters() {
        return Err(CausalError::ArmCount { expected: world.n_clusters(), got: arms.len() });
    }
    let clusters = world
        .clusters
        .iter()
        .zip(arms)
        .map(|(c, &arm)| {
            ClusterRecord::new(c.id.clone(), arm, c.stratum_label.clone(), c.observed(arm))
                .expect("world clusters are nonempty")
        })
        .collect();
    Ok(TrialDataset::new(clusters).expect("world ids are unique"))
}
