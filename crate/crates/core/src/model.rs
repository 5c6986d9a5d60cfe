//! Trial data model.
//!
//! A [`TrialDataset`] holds clusters, each with its randomized arm and the
//! individual participation/outcome records. Outcomes are kept at the
//! individual level; the cluster summaries consumed by the estimators are
//! built on demand by [`cluster_outcome`] or, in bulk, by [`ClusterTally`].

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a cluster.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub String);

impl ClusterId {
    pub fn new(id: impl Into<String>) -> Self {
        ClusterId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ClusterId {
    fn from(s: &str) -> Self {
        ClusterId(s.to_owned())
    }
}

/// Randomized arm of a cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    #[default]
    Control,
    Vaccine,
}

impl Arm {
    pub fn from_bit(bit: u8) -> Option<Arm> {
        match bit {
            0 => Some(Arm::Control),
            1 => Some(Arm::Vaccine),
            _ => None,
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Arm::Control => 0,
            Arm::Vaccine => 1,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Vaccine,
            Arm::Vaccine => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Control => "control",
            Arm::Vaccine => "vaccine",
        })
    }
}

/// One person: whether they chose to participate and whether they developed
/// disease. Cluster membership is given by the enclosing [`ClusterRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct IndividualRecord {
    pub participation: bool,
    pub outcome: bool,
}

impl IndividualRecord {
    pub fn new(participation: bool, outcome: bool) -> Self {
        IndividualRecord { participation, outcome }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("cluster {0} has no individuals")]
    EmptyCluster(ClusterId),
    #[error("cluster id {0} appears more than once")]
    DuplicateCluster(ClusterId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterRecord {
    id: ClusterId,
    arm: Arm,
    stratum_label: Option<String>,
    individuals: Vec<IndividualRecord>,
}

impl ClusterRecord {
    pub fn new(
        id: ClusterId,
        arm: Arm,
        stratum_label: Option<String>,
        individuals: Vec<IndividualRecord>,
    ) -> Result<Self, ModelError> {
        if individuals.is_empty() {
            return Err(ModelError::EmptyCluster(id));
        }
        Ok(ClusterRecord { id, arm, stratum_label, individuals })
    }

    pub fn id(&self) -> &ClusterId {
        &self.id
    }

    pub fn arm(&self) -> Arm {
        self.arm
    }

    pub fn stratum_label(&self) -> Option<&str> {
        self.stratum_label.as_deref()
    }

    pub fn individuals(&self) -> &[IndividualRecord] {
        &self.individuals
    }

    /// Cluster size `m_i`.
    pub fn size(&self) -> usize {
        self.individuals.len()
    }

    pub fn tally(&self) -> ClusterTally {
        ClusterTally::from_individuals(self.arm, &self.individuals)
    }

    /// Same individuals, different arm.
    pub fn with_arm(&self, arm: Arm) -> ClusterRecord {
        ClusterRecord { arm, ..self.clone() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TrialDataset {
    clusters: Vec<ClusterRecord>,
}

impl TrialDataset {
    pub fn new(clusters: Vec<ClusterRecord>) -> Result<Self, ModelError> {
        let mut seen = HashSet::with_capacity(clusters.len());
        for c in &clusters {
            if !seen.insert(c.id()) {
                return Err(ModelError::DuplicateCluster(c.id().clone()));
            }
        }
        Ok(TrialDataset { clusters })
    }

    pub fn clusters(&self) -> &[ClusterRecord] {
        &self.clusters
    }

    /// Number of clusters `n`.
    pub fn n(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_individuals(&self) -> usize {
        self.clusters.iter().map(ClusterRecord::size).sum()
    }

    pub fn arm_count(&self, arm: Arm) -> usize {
        self.clusters.iter().filter(|c| c.arm() == arm).count()
    }

    pub fn cluster_ids(&self) -> Vec<ClusterId> {
        self.clusters.iter().map(|c| c.id().clone()).collect()
    }

    pub fn tallies(&self) -> Vec<ClusterTally> {
        self.clusters.iter().map(ClusterRecord::tally).collect()
    }

    /// Swaps vaccine and control for every cluster.
    pub fn relabel_arms(&self) -> TrialDataset {
        TrialDataset { clusters: self.clusters.iter().map(|c| c.with_arm(c.arm().other())).collect() }
    }
}

/// Which individuals of a cluster enter its summary outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StratumSelector {
    /// Everybody: the overall effect.
    Overall,
    /// Always participators: the total effect.
    Participators,
    /// Never participators: the indirect effect.
    NonParticipators,
}

impl StratumSelector {
    pub const ALL: [StratumSelector; 3] =
        [StratumSelector::Overall, StratumSelector::Participators, StratumSelector::NonParticipators];

    pub fn includes(self, participation: bool) -> bool {
        match self {
            StratumSelector::Overall => true,
            StratumSelector::Participators => participation,
            StratumSelector::NonParticipators => !participation,
        }
    }
}

impl fmt::Display for StratumSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StratumSelector::Overall => "overall",
            StratumSelector::Participators => "participators",
            StratumSelector::NonParticipators => "non-participators",
        })
    }
}

/// Event and head counts of one cluster split by participation.
///
/// This is everything the estimators need from a cluster, so simulation
/// code can work on tallies directly instead of materializing individuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ClusterTally {
    pub arm: Arm,
    pub participants: u64,
    pub participant_events: u64,
    pub nonparticipants: u64,
    pub nonparticipant_events: u64,
}

impl ClusterTally {
    pub fn from_individuals(arm: Arm, individuals: &[IndividualRecord]) -> Self {
        let mut t = ClusterTally { arm, ..Default::default() };
        for ind in individuals {
            let events = u64::from(ind.outcome);
            if ind.participation {
                t.participants += 1;
                t.participant_events += events;
            } else {
                t.nonparticipants += 1;
                t.nonparticipant_events += events;
            }
        }
        t
    }

    pub fn size(&self) -> u64 {
        self.participants + self.nonparticipants
    }

    /// `(events, denominator)` for the selected stratum.
    pub fn counts(&self, stratum: StratumSelector) -> (u64, u64) {
        match stratum {
            StratumSelector::Overall => (self.participant_events + self.nonparticipant_events, self.size()),
            StratumSelector::Participators => (self.participant_events, self.participants),
            StratumSelector::NonParticipators => (self.nonparticipant_events, self.nonparticipants),
        }
    }

    /// Proportion with disease in the stratum, `None` if the stratum is empty.
    pub fn proportion(&self, stratum: StratumSelector) -> Option<f64> {
        let (events, denom) = self.counts(stratum);
        (denom > 0).then(|| events as f64 / denom as f64)
    }
}

/// Summary outcome `Y_i` of one cluster for one stratum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterOutcome {
    pub cluster_id: ClusterId,
    pub arm: Arm,
    pub events: u64,
    pub denominator: u64,
}

impl ClusterOutcome {
    pub fn value(&self) -> f64 {
        self.events as f64 / self.denominator as f64
    }
}

/// Averages the outcome over the cluster members in `stratum`.
///
/// Returns `None` (undefined) when no member of the cluster belongs to the
/// stratum; the estimation layer decides what to do with such clusters.
pub fn cluster_outcome(cluster: &ClusterRecord, stratum: StratumSelector) -> Option<ClusterOutcome> {
    let (events, denominator) = cluster.tally().counts(stratum);
    (denominator > 0).then(|| ClusterOutcome {
        cluster_id: cluster.id().clone(),
        arm: cluster.arm(),
        events,
        denominator,
    })
}

/// Principal stratum of an individual. Participation is assumed not to
/// depend on the arm, so the observed choice identifies the stratum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrincipalStratum {
    AlwaysParticipator,
    NeverParticipator,
}

impl PrincipalStratum {
    pub fn from_participation(participation: bool) -> Self {
        if participation {
            PrincipalStratum::AlwaysParticipator
        } else {
            PrincipalStratum::NeverParticipator
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StrataAnnotation {
    pub clusters: Vec<(ClusterId, Vec<PrincipalStratum>)>,
}

impl StrataAnnotation {
    pub fn count(&self, stratum: PrincipalStratum) -> usize {
        self.clusters.iter().flat_map(|(_, s)| s.iter()).filter(|&&s| s == stratum).count()
    }
}

/// Labels every individual with its principal stratum, in dataset order.
pub fn infer_strata(dataset: &TrialDataset) -> StrataAnnotation {
    StrataAnnotation {
        clusters: dataset
            .clusters()
            .iter()
            .map(|c| {
                let strata = c
                    .individuals()
                    .iter()
                    .map(|i| PrincipalStratum::from_participation(i.participation))
                    .collect();
                (c.id().clone(), strata)
            })
            .collect(),
    }
}
