//! Difference-in-means estimators over cluster-level outcomes.
//!
//! Every cluster is weighted equally: an arm's mean is the plain average of
//! its clusters' stratum proportions. Standard errors use the unpooled
//! two-sample variance of those proportions and intervals are Wald intervals
//! with a fixed normal critical value ([`WALD_Z`] unless overridden).
//!
//! The naive direct contrast (participants minus non-participants within
//! vaccine clusters) is provided because it is commonly reported, but it is
//! not a causal effect: the two strata are self-selected. Every estimate of
//! that kind carries [`NON_CAUSAL_WARNING`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Arm, ClusterId, ClusterTally, StratumSelector, TrialDataset};

/// Normal critical value of a two-sided 95% Wald interval.
pub const WALD_Z: f64 = 1.96;

pub const NON_CAUSAL_WARNING: &str = "not a causal effect: compares self-selected participants \
     with non-participants, so the contrast mixes vaccine protection with confounding";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EffectKind {
    Overall,
    Indirect,
    Total,
    NaiveDirect,
    #[serde(rename = "control-contrast")]
    ControlArmStratumContrast,
}

impl EffectKind {
    pub const ALL: [EffectKind; 5] = [
        EffectKind::Overall,
        EffectKind::Indirect,
        EffectKind::Total,
        EffectKind::NaiveDirect,
        EffectKind::ControlArmStratumContrast,
    ];

    /// The stratum compared across arms, for the three causal effects.
    pub fn stratum(self) -> Option<StratumSelector> {
        match self {
            EffectKind::Overall => Some(StratumSelector::Overall),
            EffectKind::Indirect => Some(StratumSelector::NonParticipators),
            EffectKind::Total => Some(StratumSelector::Participators),
            EffectKind::NaiveDirect | EffectKind::ControlArmStratumContrast => None,
        }
    }

    pub fn is_causal(self) -> bool {
        self.stratum().is_some()
    }

    pub fn name(self) -> &'static str {
        match self {
            EffectKind::Overall => "overall",
            EffectKind::Indirect => "indirect",
            EffectKind::Total => "total",
            EffectKind::NaiveDirect => "naive-direct",
            EffectKind::ControlArmStratumContrast => "control-contrast",
        }
    }
}

impl fmt::Display for EffectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EffectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EffectKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown effect `{s}`"))
    }
}

/// Contrast function `g(x, y)` applied to the vaccine and control means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contrast {
    #[default]
    RiskDifference,
    RiskRatio,
}

impl Contrast {
    pub fn apply(self, treated: f64, control: f64) -> f64 {
        match self {
            Contrast::RiskDifference => treated - control,
            Contrast::RiskRatio => treated / control,
        }
    }

    /// `g(x, x)`.
    pub fn null_value(self) -> f64 {
        match self {
            Contrast::RiskDifference => 0.0,
            Contrast::RiskRatio => 1.0,
        }
    }
}

impl fmt::Display for Contrast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Contrast::RiskDifference => "risk-difference",
            Contrast::RiskRatio => "risk-ratio",
        })
    }
}

/// What to do with a cluster whose selected stratum is empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmptyPolicy {
    #[default]
    Error,
    Drop,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("no clusters in the {0} arm")]
    EmptyArm(Arm),
    #[error("cluster {cluster} has no {stratum}")]
    UndefinedOutcome { cluster: ClusterId, stratum: StratumSelector },
    #[error("every {0} cluster was dropped for an empty stratum")]
    AllClustersDropped(Arm),
    #[error("standard error needs at least 2 clusters in the {arm} arm, found {found}")]
    InsufficientClusters { arm: Arm, found: usize },
    #[error("risk ratio undefined: {0} arm mean is zero")]
    ZeroArmMean(Arm),
    #[error("{kind} supports only the risk difference, not the {contrast}")]
    UnsupportedContrast { kind: EffectKind, contrast: Contrast },
    #[error("{0} is not a between-arm effect")]
    NotBetweenArms(EffectKind),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub effect_kind: EffectKind,
    pub contrast: Contrast,
    pub point: f64,
    /// Standard error on the scale the interval is built: the proportion
    /// scale for risk differences, the log scale for risk ratios.
    pub standard_error: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n_treated_clusters: usize,
    pub n_control_clusters: usize,
    pub dropped_clusters: Vec<ClusterId>,
    pub warning: Option<String>,
}

impl EffectEstimate {
    pub fn ci_contains(&self, value: f64) -> bool {
        self.ci_lower <= value && value <= self.ci_upper
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmMean {
    pub mean: f64,
    /// Clusters contributing to the mean.
    pub k: usize,
    pub dropped: Vec<ClusterId>,
    pub values: Vec<f64>,
}

impl ArmMean {
    fn from_values(values: Vec<f64>, dropped: Vec<ClusterId>) -> Self {
        ArmMean { mean: mean(&values), k: values.len(), dropped, values }
    }

    pub fn sample_variance(&self) -> Option<f64> {
        sample_variance(&self.values)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Variance with denominator `k - 1`; `None` for fewer than two values.
pub(crate) fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(ss / (values.len() - 1) as f64)
}

/// Estimation settings. The defaults are the error policy and `WALD_Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimator {
    pub empty_policy: EmptyPolicy,
    pub critical_value: f64,
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator { empty_policy: EmptyPolicy::Error, critical_value: WALD_Z }
    }
}

impl Estimator {
    pub fn new(empty_policy: EmptyPolicy) -> Self {
        Estimator { empty_policy, ..Default::default() }
    }

    pub fn with_critical_value(mut self, z: f64) -> Self {
        self.critical_value = z;
        self
    }

    pub fn arm_mean(
        &self,
        dataset: &TrialDataset,
        arm: Arm,
        stratum: StratumSelector,
    ) -> Result<ArmMean, EstimationError> {
        let (ids, tallies) = split(dataset);
        self.arm_mean_tallies(&ids, &tallies, arm, stratum)
    }

    pub fn arm_mean_tallies(
        &self,
        ids: &[ClusterId],
        tallies: &[ClusterTally],
        arm: Arm,
        stratum: StratumSelector,
    ) -> Result<ArmMean, EstimationError> {
        let mut values = Vec::new();
        let mut dropped = Vec::new();
        let mut in_arm = 0usize;
        for (id, t) in ids.iter().zip(tallies).filter(|(_, t)| t.arm == arm) {
            in_arm += 1;
            match (t.proportion(stratum), self.empty_policy) {
                (Some(v), _) => values.push(v),
                (None, EmptyPolicy::Drop) => dropped.push(id.clone()),
                (None, EmptyPolicy::Error) => {
                    return Err(EstimationError::UndefinedOutcome { cluster: id.clone(), stratum })
                }
            }
        }
        if in_arm == 0 {
            return Err(EstimationError::EmptyArm(arm));
        }
        if values.is_empty() {
            return Err(EstimationError::AllClustersDropped(arm));
        }
        Ok(ArmMean::from_values(values, dropped))
    }

    /// Point estimate only; needs one usable cluster per arm.
    pub fn point(
        &self,
        dataset: &TrialDataset,
        kind: EffectKind,
        contrast: Contrast,
    ) -> Result<f64, EstimationError> {
        let (ids, tallies) = split(dataset);
        match kind.stratum() {
            Some(stratum) => {
                let treated = self.arm_mean_tallies(&ids, &tallies, Arm::Vaccine, stratum)?;
                let control = self.arm_mean_tallies(&ids, &tallies, Arm::Control, stratum)?;
                Ok(contrast.apply(treated.mean, control.mean))
            }
            None => {
                require_rd(kind, contrast)?;
                let arm = within_arm(kind);
                let (diffs, _) = self.paired_differences(&ids, &tallies, arm)?;
                Ok(mean(&diffs))
            }
        }
    }

    pub fn estimate(
        &self,
        dataset: &TrialDataset,
        kind: EffectKind,
        contrast: Contrast,
    ) -> Result<EffectEstimate, EstimationError> {
        let (ids, tallies) = split(dataset);
        self.estimate_tallies(&ids, &tallies, kind, contrast)
    }

    /// [`Estimator::estimate`] over precomputed cluster tallies; `ids[i]`
    /// names `tallies[i]`.
    pub fn estimate_tallies(
        &self,
        ids: &[ClusterId],
        tallies: &[ClusterTally],
        kind: EffectKind,
        contrast: Contrast,
    ) -> Result<EffectEstimate, EstimationError> {
        match kind.stratum() {
            Some(stratum) => self.between_arms(ids, tallies, kind, stratum, contrast),
            None => {
                require_rd(kind, contrast)?;
                self.within_arm(ids, tallies, within_arm(kind), kind)
            }
        }
    }

    pub fn naive_direct(&self, dataset: &TrialDataset) -> Result<EffectEstimate, EstimationError> {
        self.estimate(dataset, EffectKind::NaiveDirect, Contrast::RiskDifference)
    }

    pub fn control_arm_contrast(&self, dataset: &TrialDataset) -> Result<EffectEstimate, EstimationError> {
        self.estimate(dataset, EffectKind::ControlArmStratumContrast, Contrast::RiskDifference)
    }

    fn between_arms(
        &self,
        ids: &[ClusterId],
        tallies: &[ClusterTally],
        kind: EffectKind,
        stratum: StratumSelector,
        contrast: Contrast,
    ) -> Result<EffectEstimate, EstimationError> {
        let treated = self.arm_mean_tallies(ids, tallies, Arm::Vaccine, stratum)?;
        let control = self.arm_mean_tallies(ids, tallies, Arm::Control, stratum)?;
        let var1 = treated
            .sample_variance()
            .ok_or(EstimationError::InsufficientClusters { arm: Arm::Vaccine, found: treated.k })?;
        let var0 = control
            .sample_variance()
            .ok_or(EstimationError::InsufficientClusters { arm: Arm::Control, found: control.k })?;
        let (k1, k0) = (treated.k as f64, control.k as f64);
        let z = self.critical_value;

        let (point, se, lo, hi) = match contrast {
            Contrast::RiskDifference => {
                let point = treated.mean - control.mean;
                let se = (var1 / k1 + var0 / k0).sqrt();
                (point, se, point - z * se, point + z * se)
            }
            Contrast::RiskRatio => {
                if control.mean == 0.0 {
                    return Err(EstimationError::ZeroArmMean(Arm::Control));
                }
                if treated.mean == 0.0 {
                    return Err(EstimationError::ZeroArmMean(Arm::Vaccine));
                }
                // delta method: Var(log m) ~ Var(m) / m^2
                let se = (var1 / (k1 * treated.mean.powi(2)) + var0 / (k0 * control.mean.powi(2))).sqrt();
                let log_point = (treated.mean / control.mean).ln();
                (log_point.exp(), se, (log_point - z * se).exp(), (log_point + z * se).exp())
            }
        };

        let mut dropped = treated.dropped;
        dropped.extend(control.dropped);
        Ok(EffectEstimate {
            effect_kind: kind,
            contrast,
            point,
            standard_error: se,
            ci_lower: lo,
            ci_upper: hi,
            n_treated_clusters: treated.k,
            n_control_clusters: control.k,
            dropped_clusters: dropped,
            warning: None,
        })
    }

    /// Per-cluster participant minus non-participant proportions within `arm`.
    fn paired_differences(
        &self,
        ids: &[ClusterId],
        tallies: &[ClusterTally],
        arm: Arm,
    ) -> Result<(Vec<f64>, Vec<ClusterId>), EstimationError> {
        let mut diffs = Vec::new();
        let mut dropped = Vec::new();
        let mut in_arm = 0usize;
        for (id, t) in ids.iter().zip(tallies).filter(|(_, t)| t.arm == arm) {
            in_arm += 1;
            let part = t.proportion(StratumSelector::Participators);
            let non = t.proportion(StratumSelector::NonParticipators);
            match (part, non, self.empty_policy) {
                (Some(p), Some(n), _) => diffs.push(p - n),
                (_, _, EmptyPolicy::Drop) => dropped.push(id.clone()),
                (p, _, EmptyPolicy::Error) => {
                    let stratum = if p.is_none() {
                        StratumSelector::Participators
                    } else {
                        StratumSelector::NonParticipators
                    };
                    return Err(EstimationError::UndefinedOutcome { cluster: id.clone(), stratum });
                }
            }
        }
        if in_arm == 0 {
            return Err(EstimationError::EmptyArm(arm));
        }
        if diffs.is_empty() {
            return Err(EstimationError::AllClustersDropped(arm));
        }
        Ok((diffs, dropped))
    }

    fn within_arm(
        &self,
        ids: &[ClusterId],
        tallies: &[ClusterTally],
        arm: Arm,
        kind: EffectKind,
    ) -> Result<EffectEstimate, EstimationError> {
        let (diffs, dropped) = self.paired_differences(ids, tallies, arm)?;
        let k = diffs.len();
        let var = sample_variance(&diffs).ok_or(EstimationError::InsufficientClusters { arm, found: k })?;
        let point = mean(&diffs);
        let se = (var / k as f64).sqrt();
        let z = self.critical_value;
        let (n_treated, n_control) = match arm {
            Arm::Vaccine => (k, 0),
            Arm::Control => (0, k),
        };
        Ok(EffectEstimate {
            effect_kind: kind,
            contrast: Contrast::RiskDifference,
            point,
            standard_error: se,
            ci_lower: point - z * se,
            ci_upper: point + z * se,
            n_treated_clusters: n_treated,
            n_control_clusters: n_control,
            dropped_clusters: dropped,
            warning: Some(NON_CAUSAL_WARNING.to_owned()),
        })
    }
}

fn within_arm(kind: EffectKind) -> Arm {
    match kind {
        EffectKind::ControlArmStratumContrast => Arm::Control,
        _ => Arm::Vaccine,
    }
}

fn require_rd(kind: EffectKind, contrast: Contrast) -> Result<(), EstimationError> {
    match contrast {
        Contrast::RiskDifference => Ok(()),
        Contrast::RiskRatio => Err(EstimationError::UnsupportedContrast { kind, contrast }),
    }
}

fn split(dataset: &TrialDataset) -> (Vec<ClusterId>, Vec<ClusterTally>) {
    (dataset.cluster_ids(), dataset.tallies())
}

pub fn arm_mean(
    dataset: &TrialDataset,
    arm: Arm,
    stratum: StratumSelector,
    empty_policy: EmptyPolicy,
) -> Result<ArmMean, EstimationError> {
    Estimator::new(empty_policy).arm_mean(dataset, arm, stratum)
}

pub fn estimate_effect(
    dataset: &TrialDataset,
    kind: EffectKind,
    contrast: Contrast,
    empty_policy: EmptyPolicy,
) -> Result<EffectEstimate, EstimationError> {
    Estimator::new(empty_policy).estimate(dataset, kind, contrast)
}

/// Participants minus non-participants within vaccine clusters. Not causal.
pub fn naive_direct_estimate(
    dataset: &TrialDataset,
    empty_policy: EmptyPolicy,
) -> Result<EffectEstimate, EstimationError> {
    Estimator::new(empty_policy).naive_direct(dataset)
}

/// Participants minus non-participants within control clusters. With no
/// confounding (and no placebo effect) this is centred on zero, so a clear
/// departure is evidence that participation is associated with risk.
pub fn control_arm_stratum_contrast(
    dataset: &TrialDataset,
    empty_policy: EmptyPolicy,
) -> Result<EffectEstimate, EstimationError> {
    Estimator::new(empty_policy).control_arm_contrast(dataset)
}
