//! Cluster-level treatment assignment.
//!
//! Both schemes fix the number of vaccine clusters, overall or per
//! stratum, and pick which clusters by a partial Fisher–Yates shuffle so
//! every subset of the required size is equally likely.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Arm, ClusterId, ClusterRecord};
use crate::rng::{self, purpose};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Exactly `n_treated` of the clusters receive vaccine.
    #[serde(alias = "complete")]
    CompletelyRandomized { n_treated: usize },
    /// `treated[label]` clusters receive vaccine within each stratum.
    #[serde(alias = "stratified")]
    StratifiedBlocked { treated: BTreeMap<String, usize> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomizationScheme {
    #[serde(flatten)]
    pub kind: SchemeKind,
    #[serde(default)]
    pub seed: u64,
}

impl RandomizationScheme {
    pub fn complete(n_treated: usize, seed: u64) -> Self {
        RandomizationScheme { kind: SchemeKind::CompletelyRandomized { n_treated }, seed }
    }

    pub fn stratified(treated: BTreeMap<String, usize>, seed: u64) -> Self {
        RandomizationScheme { kind: SchemeKind::StratifiedBlocked { treated }, seed }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RandomizationError {
    #[error("infeasible scheme: {0}")]
    InfeasibleScheme(String),
    #[error("no treated count given for stratum `{0}`")]
    UnknownStratumLabel(String),
}

/// Cluster id to arm.
pub type Assignment = BTreeMap<ClusterId, Arm>;

const UNLABELED: &str = "<none>";

/// A scheme checked against a fixed list of clusters, ready to draw from.
///
/// Draws return one arm per cluster, in the order the clusters were given.
#[derive(Clone, Debug)]
pub struct AssignmentPlan {
    n_clusters: usize,
    // (cluster positions in the block, number to treat)
    blocks: Vec<(Vec<usize>, usize)>,
}

impl AssignmentPlan {
    /// `labels[i]` is the stratum label of cluster `i` (ignored by the
    /// completely randomized scheme).
    pub fn new(labels: &[Option<&str>], kind: &SchemeKind) -> Result<Self, RandomizationError> {
        let n = labels.len();
        let blocks = match kind {
            SchemeKind::CompletelyRandomized { n_treated } => {
                if *n_treated == 0 || *n_treated >= n {
                    return Err(RandomizationError::InfeasibleScheme(format!(
                        "need 1 <= n_treated <= n - 1, got n_treated = {n_treated} with n = {n}"
                    )));
                }
                vec![((0..n).collect(), *n_treated)]
            }
            SchemeKind::StratifiedBlocked { treated } => {
                let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
                for (i, label) in labels.iter().enumerate() {
                    let label = label.unwrap_or(UNLABELED);
                    if !treated.contains_key(label) {
                        return Err(RandomizationError::UnknownStratumLabel(label.to_owned()));
                    }
                    members.entry(label).or_default().push(i);
                }
                let mut blocks = Vec::with_capacity(treated.len());
                for (label, &count) in treated {
                    let Some(idx) = members.remove(label.as_str()) else {
                        return Err(RandomizationError::InfeasibleScheme(format!(
                            "stratum `{label}` has no clusters"
                        )));
                    };
                    if count > idx.len() {
                        return Err(RandomizationError::InfeasibleScheme(format!(
                            "stratum `{label}` has {} clusters but {count} treated requested",
                            idx.len()
                        )));
                    }
                    blocks.push((idx, count));
                }
                let total_treated: usize = blocks.iter().map(|b| b.1).sum();
                if total_treated == 0 || total_treated == n {
                    return Err(RandomizationError::InfeasibleScheme(
                        "need at least one vaccine and one control cluster".to_owned(),
                    ));
                }
                blocks
            }
        };
        Ok(AssignmentPlan { n_clusters: n, blocks })
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Arm> {
        let mut arms = vec![Arm::Control; self.n_clusters];
        let mut scratch = Vec::new();
        for (members, count) in &self.blocks {
            scratch.clear();
            scratch.extend_from_slice(members);
            let (chosen, _) = scratch.partial_shuffle(rng, *count);
            for &i in chosen.iter() {
                arms[i] = Arm::Vaccine;
            }
        }
        arms
    }
}

/// Randomizes `clusters` under `scheme`; deterministic in `scheme.seed`.
pub fn assign(
    clusters: &[ClusterRecord],
    scheme: &RandomizationScheme,
) -> Result<Assignment, RandomizationError> {
    let labels: Vec<Option<&str>> = clusters.iter().map(ClusterRecord::stratum_label).collect();
    let ids: Vec<&ClusterId> = clusters.iter().map(ClusterRecord::id).collect();
    assign_labeled(&ids, &labels, scheme)
}

/// Like [`assign`] for clusters known only by id and stratum label.
pub fn assign_labeled(
    ids: &[&ClusterId],
    labels: &[Option<&str>],
    scheme: &RandomizationScheme,
) -> Result<Assignment, RandomizationError> {
    let unique: BTreeSet<_> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(RandomizationError::InfeasibleScheme("duplicate cluster ids".to_owned()));
    }
    let plan = AssignmentPlan::new(labels, &scheme.kind)?;
    let arms = plan.draw(&mut rng::stream(scheme.seed, purpose::ASSIGNMENT, 0));
    Ok(ids.iter().map(|&id| id.clone()).zip(arms).collect())
}

/// Treat `floor(size / 2)` clusters of every stratum, as in a balanced design.
pub fn balanced_strata<'a>(labels: impl IntoIterator<Item = Option<&'a str>>) -> BTreeMap<String, usize> {
    let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *sizes.entry(l.unwrap_or(UNLABELED).to_owned()).or_default() += 1;
    }
    sizes.into_iter().map(|(l, n)| (l, n / 2)).collect()
}
