//! Synthetic trial datasets that reproduce published cluster-level margins.
//!
//! Only summaries of a trial are usually public: per arm, the number of
//! clusters, mean and SD of cluster size and of participants per cluster,
//! stratum totals and event counts. [`synthesize`] builds an individual-level
//! dataset whose totals match exactly and whose means and SDs match after
//! rounding to the printed precision.
//!
//! Construction per arm:
//!
//! 1. cluster sizes: a seeded standard-normal vector, standardized exactly,
//!    scaled to the target mean and SD, rounded by largest remainder to the
//!    exact total, then nudged by pairwise ±1 moves until the SD rounds to
//!    the target;
//! 2. participants per cluster: the same recipe on a vector correlated with
//!    the size draws, bounded so every cluster keeps at least one member of
//!    each stratum (when both stratum totals are positive);
//! 3. events: allocated one at a time with probability proportional to the
//!    stratum head count, or to Dirichlet weights around it when an
//!    overdispersion concentration is given.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{Contrast, EffectKind, Estimator};
use crate::model::{Arm, ClusterId, ClusterRecord, ClusterTally, IndividualRecord, TrialDataset};
use crate::rng::{self, purpose};

/// Published margins of one arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmMargins {
    pub n_clusters: usize,
    pub mean_size: f64,
    pub sd_size: f64,
    pub mean_participants: f64,
    pub sd_participants: f64,
    pub total_participants: u64,
    pub total_nonparticipants: u64,
    pub events_participants: u64,
    pub events_nonparticipants: u64,
}

fn default_correlation() -> f64 {
    0.7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationSettings {
    /// Dirichlet concentration of the event weights. `None` allocates
    /// events proportionally to head counts (plain multinomial); smaller
    /// values spread events more unevenly across clusters.
    #[serde(default)]
    pub concentration: Option<f64>,
    /// Correlation between the normal draws behind cluster size and
    /// participants per cluster.
    #[serde(default = "default_correlation")]
    pub size_participant_correlation: f64,
    /// Decimal places the means and SDs were printed with.
    #[serde(default)]
    pub printed_decimals: u32,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        AllocationSettings {
            concentration: None,
            size_participant_correlation: default_correlation(),
            printed_decimals: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginSpec {
    pub vaccine: ArmMargins,
    pub control: ArmMargins,
    #[serde(default)]
    pub allocation: AllocationSettings,
}

impl MarginSpec {
    pub fn arm(&self, arm: Arm) -> &ArmMargins {
        match arm {
            Arm::Vaccine => &self.vaccine,
            Arm::Control => &self.control,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarginError {
    #[error("invalid margins for the {arm} arm: {reason}")]
    InvalidSpec { arm: Arm, reason: String },
    #[error("infeasible margins for the {arm} arm: {constraint}")]
    InfeasibleMargins { arm: Arm, constraint: String },
}

/// Rounds to `decimals` places, half away from zero.
pub fn round_to(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale).round() / scale
}

fn mean_sd(values: &[i64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-arm summary of an individual-level dataset, in the layout of the
/// margin table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmSummary {
    pub n_clusters: usize,
    pub mean_size: f64,
    pub sd_size: f64,
    pub mean_participants: f64,
    pub sd_participants: f64,
    pub total_participants: u64,
    pub total_nonparticipants: u64,
    pub events_participants: u64,
    pub events_nonparticipants: u64,
}

impl ArmSummary {
    pub fn from_tallies<'a>(tallies: impl IntoIterator<Item = &'a ClusterTally>) -> Self {
        let tallies: Vec<&ClusterTally> = tallies.into_iter().collect();
        let sizes: Vec<i64> = tallies.iter().map(|t| t.size() as i64).collect();
        let parts: Vec<i64> = tallies.iter().map(|t| t.participants as i64).collect();
        let (mean_size, sd_size) = mean_sd(&sizes);
        let (mean_participants, sd_participants) = mean_sd(&parts);
        ArmSummary {
            n_clusters: tallies.len(),
            mean_size,
            sd_size,
            mean_participants,
            sd_participants,
            total_participants: tallies.iter().map(|t| t.participants).sum(),
            total_nonparticipants: tallies.iter().map(|t| t.nonparticipants).sum(),
            events_participants: tallies.iter().map(|t| t.participant_events).sum(),
            events_nonparticipants: tallies.iter().map(|t| t.nonparticipant_events).sum(),
        }
    }

    /// Differences from `target`: totals exact, means and SDs after rounding.
    pub fn mismatches(&self, target: &ArmMargins, decimals: u32) -> Vec<String> {
        let mut out = Vec::new();
        let mut exact = |name: &str, got: u64, want: u64| {
            if got != want {
                out.push(format!("{name}: {got} != {want}"));
            }
        };
        exact("n_clusters", self.n_clusters as u64, target.n_clusters as u64);
        exact("total_participants", self.total_participants, target.total_participants);
        exact("total_nonparticipants", self.total_nonparticipants, target.total_nonparticipants);
        exact("events_participants", self.events_participants, target.events_participants);
        exact("events_nonparticipants", self.events_nonparticipants, target.events_nonparticipants);
        for (name, got, want) in [
            ("mean_size", self.mean_size, target.mean_size),
            ("sd_size", self.sd_size, target.sd_size),
            ("mean_participants", self.mean_participants, target.mean_participants),
            ("sd_participants", self.sd_participants, target.sd_participants),
        ] {
            if round_to(got, decimals) != round_to(want, decimals) {
                out.push(format!("{name}: {got} does not round to {want}"));
            }
        }
        out
    }
}

impl fmt::Display for ArmSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} clusters, size {:.1} ± {:.1}, participants {:.1} ± {:.1}, \
             {} participants ({} events), {} non-participants ({} events)",
            self.n_clusters,
            self.mean_size,
            self.sd_size,
            self.mean_participants,
            self.sd_participants,
            self.total_participants,
            self.events_participants,
            self.total_nonparticipants,
            self.events_nonparticipants
        )
    }
}

pub fn summarize(dataset: &TrialDataset, arm: Arm) -> ArmSummary {
    let tallies = dataset.tallies();
    ArmSummary::from_tallies(tallies.iter().filter(|t| t.arm == arm))
}

fn validate(m: &ArmMargins, settings: &AllocationSettings, arm: Arm) -> Result<(), MarginError> {
    let invalid = |reason: String| Err(MarginError::InvalidSpec { arm, reason });
    if m.n_clusters == 0 {
        return invalid("n_clusters must be positive".into());
    }
    for (name, v) in [
        ("mean_size", m.mean_size),
        ("sd_size", m.sd_size),
        ("mean_participants", m.mean_participants),
        ("sd_participants", m.sd_participants),
    ] {
        if !v.is_finite() || v < 0.0 {
            return invalid(format!("{name} must be a finite non-negative number"));
        }
    }
    if m.events_participants > m.total_participants {
        return invalid("more participant events than participants".into());
    }
    if m.events_nonparticipants > m.total_nonparticipants {
        return invalid("more non-participant events than non-participants".into());
    }
    let half_unit = 0.5 * 10f64.powi(-(settings.printed_decimals as i32)) + 1e-9;
    let n = m.n_clusters as f64;
    let total = (m.total_participants + m.total_nonparticipants) as f64;
    if (total / n - m.mean_size).abs() > half_unit {
        return invalid(format!(
            "total of {total} people over {n} clusters has mean {:.3}, not {}",
            total / n,
            m.mean_size
        ));
    }
    if (m.total_participants as f64 / n - m.mean_participants).abs() > half_unit {
        return invalid(format!(
            "{} participants over {n} clusters has mean {:.3}, not {}",
            m.total_participants,
            m.total_participants as f64 / n,
            m.mean_participants
        ));
    }
    if let Some(c) = settings.concentration {
        if !(c.is_finite() && c > 0.0) {
            return invalid("concentration must be positive".into());
        }
    }
    let rho = settings.size_participant_correlation;
    if !(-1.0..=1.0).contains(&rho) {
        return invalid("size_participant_correlation must lie in [-1, 1]".into());
    }
    Ok(())
}

fn standardize(z: &mut [f64]) {
    let n = z.len() as f64;
    let mean = z.iter().sum::<f64>() / n;
    let sd = if z.len() > 1 {
        (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    for v in z.iter_mut() {
        *v = if sd > 0.0 { (*v - mean) / sd } else { 0.0 };
    }
}

/// Integer vector with the exact `total`, bounds `lo[i] <= x[i] <= hi[i]`,
/// shaped like `mean + sd * z` and with sample SD rounding to `sd`.
fn integer_vector(
    total: i64,
    sd: f64,
    z: &[f64],
    lo: &[i64],
    hi: &[i64],
    decimals: u32,
) -> Result<Vec<i64>, String> {
    let n = z.len();
    let lo_sum: i64 = lo.iter().sum();
    let hi_sum: i64 = hi.iter().sum();
    if total < lo_sum || total > hi_sum {
        return Err(format!("total {total} outside the feasible range [{lo_sum}, {hi_sum}]"));
    }
    let mean = total as f64 / n as f64;
    let target: Vec<f64> = z
        .iter()
        .zip(lo.iter().zip(hi))
        .map(|(z, (&l, &h))| (mean + sd * z).clamp(l as f64, h as f64))
        .collect();
    let mut x: Vec<i64> = target.iter().map(|t| t.floor() as i64).collect();

    // largest remainder towards the exact total
    let mut order: Vec<usize> = (0..n).collect();
    let frac = |i: usize| target[i] - target[i].floor();
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    let mut remaining = total - x.iter().sum::<i64>();
    while remaining != 0 {
        let before = remaining;
        if remaining > 0 {
            for &i in &order {
                if remaining == 0 {
                    break;
                }
                if x[i] < hi[i] {
                    x[i] += 1;
                    remaining -= 1;
                }
            }
        } else {
            for &i in order.iter().rev() {
                if remaining == 0 {
                    break;
                }
                if x[i] > lo[i] {
                    x[i] -= 1;
                    remaining += 1;
                }
            }
        }
        if remaining == before {
            return Err("could not distribute the total within the bounds".into());
        }
    }

    // pairwise +1/-1 moves keep the total and steer the sum of squares
    let want = round_to(sd, decimals);
    let target_ss = (n.saturating_sub(1)) as f64 * sd * sd;
    let max_steps = 20 * n + 10_000;
    for _ in 0..max_steps {
        let (_, got) = mean_sd(&x);
        if round_to(got, decimals) == want {
            return Ok(x);
        }
        let ss: f64 = {
            let m = mean;
            x.iter().map(|&v| (v as f64 - m).powi(2)).sum()
        };
        let needed = target_ss - ss;
        // moving +1 to i and -1 from j changes the sum of squares by 2 (x_i - x_j + 1)
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if x[i] >= hi[i] {
                continue;
            }
            for j in 0..n {
                if i == j || x[j] <= lo[j] {
                    continue;
                }
                let delta = 2.0 * ((x[i] - x[j]) as f64 + 1.0);
                if delta.signum() != needed.signum() || delta == 0.0 {
                    continue;
                }
                let miss = (needed - delta).abs();
                if best.is_none_or(|(m, _, _)| miss < m) {
                    best = Some((miss, i, j));
                }
            }
        }
        let Some((miss, i, j)) = best else {
            return Err(format!("no admissible move brings the SD from {got:.3} to {want}"));
        };
        if miss >= needed.abs() {
            return Err(format!("SD stuck at {got:.3}, target {want}"));
        }
        x[i] += 1;
        x[j] -= 1;
    }
    Err(format!("SD adjustment did not converge to {want}"))
}

fn allocate_events<R: Rng + ?Sized>(
    capacity: &[u64],
    events: u64,
    concentration: Option<f64>,
    rng: &mut R,
) -> Vec<u64> {
    let n = capacity.len();
    let mut out = vec![0u64; n];
    if events == 0 {
        return out;
    }
    let total_cap: f64 = capacity.iter().map(|&c| c as f64).sum();
    let mut weights: Vec<f64> = match concentration {
        None => capacity.iter().map(|&c| c as f64).collect(),
        Some(alpha) => capacity
            .iter()
            .map(|&c| {
                if c == 0 {
                    0.0
                } else {
                    let shape = alpha * c as f64 / total_cap;
                    Gamma::new(shape, 1.0).expect("positive shape").sample(rng)
                }
            })
            .collect(),
    };
    let mut left = events;
    while left > 0 {
        if weights.iter().all(|&w| w <= 0.0) {
            // Dirichlet weights can underflow to zero for tiny shapes
            weights = (0..n).map(|i| if out[i] < capacity[i] { capacity[i] as f64 } else { 0.0 }).collect();
        }
        let dist = WeightedIndex::new(&weights).expect("some positive weight");
        let i = dist.sample(rng);
        if out[i] < capacity[i] {
            out[i] += 1;
            left -= 1;
        }
        if out[i] == capacity[i] {
            weights[i] = 0.0;
        }
    }
    out
}

fn arm_tallies(
    m: &ArmMargins,
    settings: &AllocationSettings,
    arm: Arm,
    seed: u64,
) -> Result<Vec<ClusterTally>, MarginError> {
    validate(m, settings, arm)?;
    let infeasible = |constraint: String| MarginError::InfeasibleMargins { arm, constraint };
    let n = m.n_clusters;
    let (tp, tn) = (m.total_participants as i64, m.total_nonparticipants as i64);
    let need_part = i64::from(tp > 0);
    let need_non = i64::from(tn > 0);
    if tp > 0 && tp < n as i64 {
        return Err(infeasible(format!("{tp} participants cannot give each of {n} clusters at least one")));
    }
    if tn > 0 && tn < n as i64 {
        return Err(infeasible(format!(
            "{tn} non-participants cannot give each of {n} clusters at least one"
        )));
    }
    let arm_index = u64::from(arm.bit());
    let decimals = settings.printed_decimals;

    let mut size_rng = rng::stream(seed, purpose::MARGIN_SIZES, arm_index);
    let mut z_size: Vec<f64> = (0..n).map(|_| size_rng.sample(StandardNormal)).collect();
    standardize(&mut z_size);
    let size_lo = vec![(need_part + need_non).max(1); n];
    let size_hi = vec![tp + tn; n];
    let sizes = integer_vector(tp + tn, m.sd_size, &z_size, &size_lo, &size_hi, decimals)
        .map_err(|e| infeasible(format!("cluster sizes: {e}")))?;

    let rho = settings.size_participant_correlation;
    let mut part_rng = rng::stream(seed, purpose::MARGIN_PARTICIPANTS, arm_index);
    let mut z_part: Vec<f64> = z_size
        .iter()
        .map(|&zs| {
            let e: f64 = part_rng.sample(StandardNormal);
            rho * zs + (1.0 - rho * rho).sqrt() * e
        })
        .collect();
    standardize(&mut z_part);
    let part_lo: Vec<i64> = sizes.iter().map(|&s| if tn == 0 { s } else { need_part }).collect();
    let part_hi: Vec<i64> = sizes.iter().map(|&s| if tp == 0 { 0 } else { s - need_non }).collect();
    let parts = integer_vector(tp, m.sd_participants, &z_part, &part_lo, &part_hi, decimals)
        .map_err(|e| infeasible(format!("participants per cluster: {e}")))?;

    let part_cap: Vec<u64> = parts.iter().map(|&p| p as u64).collect();
    let non_cap: Vec<u64> = sizes.iter().zip(&parts).map(|(&s, &p)| (s - p) as u64).collect();
    let mut event_rng = rng::stream(seed, purpose::MARGIN_EVENTS, arm_index);
    let conc = settings.concentration;
    let ev_part = allocate_events(&part_cap, m.events_participants, conc, &mut event_rng);
    let ev_non = allocate_events(&non_cap, m.events_nonparticipants, conc, &mut event_rng);

    Ok((0..n)
        .map(|i| ClusterTally {
            arm,
            participants: part_cap[i],
            participant_events: ev_part[i],
            nonparticipants: non_cap[i],
            nonparticipant_events: ev_non[i],
        })
        .collect())
}

fn cluster_ids(arm: Arm, n: usize) -> Vec<ClusterId> {
    let prefix = match arm {
        Arm::Vaccine => 'V',
        Arm::Control => 'C',
    };
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| ClusterId(format!("{prefix}{i:0width$}"))).collect()
}

/// Cluster ids and tallies of the synthesized dataset, vaccine arm first.
/// Cheaper than [`synthesize`] when only estimates are needed.
pub fn synthesize_tallies(
    spec: &MarginSpec,
    seed: u64,
) -> Result<(Vec<ClusterId>, Vec<ClusterTally>), MarginError> {
    let mut ids = Vec::new();
    let mut tallies = Vec::new();
    for arm in [Arm::Vaccine, Arm::Control] {
        let m = spec.arm(arm);
        tallies.extend(arm_tallies(m, &spec.allocation, arm, seed)?);
        ids.extend(cluster_ids(arm, m.n_clusters));
    }
    Ok((ids, tallies))
}

/// Builds the individual-level dataset. Deterministic in `(spec, seed)`.
pub fn synthesize(spec: &MarginSpec, seed: u64) -> Result<TrialDataset, MarginError> {
    let (ids, tallies) = synthesize_tallies(spec, seed)?;
    let clusters = ids
        .into_iter()
        .zip(tallies)
        .enumerate()
        .map(|(k, (id, t))| {
            let mut individuals = Vec::with_capacity(t.size() as usize);
            individuals
                .extend((0..t.participants).map(|j| IndividualRecord::new(true, j < t.participant_events)));
            individuals.extend(
                (0..t.nonparticipants).map(|j| IndividualRecord::new(false, j < t.nonparticipant_events)),
            );
            individuals.shuffle(&mut rng::stream(seed, purpose::MARGIN_LAYOUT, k as u64));
            ClusterRecord::new(id, t.arm, None, individuals).expect("sizes are at least one")
        })
        .collect();
    Ok(TrialDataset::new(clusters).expect("generated ids are unique"))
}

/// Published estimates to calibrate the event allocation against, as
/// proportions (not per 1000).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PanelTargets {
    pub overall: f64,
    pub overall_se: f64,
    pub indirect: f64,
    pub indirect_se: f64,
    pub total: f64,
    pub total_se: f64,
    pub naive_direct: f64,
    pub control_contrast: f64,
}

impl PanelTargets {
    /// Same targets expressed per 1000 people.
    pub fn from_per_1000(per_1000: &PanelTargets) -> Self {
        let s = |v: f64| v / 1000.0;
        PanelTargets {
            overall: s(per_1000.overall),
            overall_se: s(per_1000.overall_se),
            indirect: s(per_1000.indirect),
            indirect_se: s(per_1000.indirect_se),
            total: s(per_1000.total),
            total_se: s(per_1000.total_se),
            naive_direct: s(per_1000.naive_direct),
            control_contrast: s(per_1000.control_contrast),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CalibrationResult {
    pub seed: u64,
    pub concentration: Option<f64>,
    /// Sum of squared deviations from the targets, in per-1000 units.
    pub loss: f64,
}

/// Squared per-1000 deviations of a tallied dataset from `targets`.
pub fn panel_loss(ids: &[ClusterId], tallies: &[ClusterTally], targets: &PanelTargets) -> Option<f64> {
    let est = Estimator::default();
    let rd = Contrast::RiskDifference;
    let get = |k| est.estimate_tallies(ids, tallies, k, rd).ok();
    let overall = get(EffectKind::Overall)?;
    let indirect = get(EffectKind::Indirect)?;
    let total = get(EffectKind::Total)?;
    let naive = get(EffectKind::NaiveDirect)?;
    let control = get(EffectKind::ControlArmStratumContrast)?;
    let pairs = [
        (overall.point, targets.overall),
        (overall.standard_error, targets.overall_se),
        (indirect.point, targets.indirect),
        (indirect.standard_error, targets.indirect_se),
        (total.point, targets.total),
        (total.standard_error, targets.total_se),
        (naive.point, targets.naive_direct),
        (control.point, targets.control_contrast),
    ];
    Some(pairs.iter().map(|(got, want)| (1000.0 * (got - want)).powi(2)).sum())
}

/// Grid search over seeds and concentrations for the synthesized dataset
/// whose estimates sit closest to `targets`. Ties go to the earlier
/// candidate, so the result does not depend on thread scheduling.
pub fn calibrate(
    spec: &MarginSpec,
    targets: &PanelTargets,
    seeds: impl IntoIterator<Item = u64>,
    concentrations: &[Option<f64>],
) -> Result<CalibrationResult, MarginError> {
    let seeds: Vec<u64> = seeds.into_iter().collect();
    let candidates: Vec<(Option<f64>, u64)> =
        concentrations.iter().flat_map(|&c| seeds.iter().map(move |&s| (c, s))).collect();
    let scored: Vec<Result<Option<CalibrationResult>, MarginError>> = candidates
        .par_iter()
        .map(|&(concentration, seed)| {
            let mut spec = spec.clone();
            spec.allocation.concentration = concentration;
            let (ids, tallies) = synthesize_tallies(&spec, seed)?;
            Ok(panel_loss(&ids, &tallies, targets).map(|loss| CalibrationResult {
                seed,
                concentration,
                loss,
            }))
        })
        .collect();
    let mut best: Option<CalibrationResult> = None;
    for r in scored {
        if let Some(c) = r? {
            if best.as_ref().is_none_or(|b| c.loss < b.loss) {
                best = Some(c);
            }
        }
    }
    best.ok_or(MarginError::InfeasibleMargins {
        arm: Arm::Vaccine,
        constraint: "no candidate produced estimable data".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arm(n: usize, size: f64, sd: f64, part: f64, sd_p: f64, totals: [u64; 4]) -> ArmMargins {
        ArmMargins {
            n_clusters: n,
            mean_size: size,
            sd_size: sd,
            mean_participants: part,
            sd_participants: sd_p,
            total_participants: totals[0],
            total_nonparticipants: totals[1],
            events_participants: totals[2],
            events_nonparticipants: totals[3],
        }
    }

    fn small_spec() -> MarginSpec {
        MarginSpec {
            vaccine: arm(12, 50.0, 8.0, 30.0, 6.0, [360, 240, 9, 4]),
            control: arm(10, 45.0, 5.0, 25.0, 4.0, [250, 200, 12, 7]),
            allocation: AllocationSettings::default(),
        }
    }

    #[test]
    fn small_spec_round_trips() {
        let spec = small_spec();
        for seed in 0..20 {
            let d = synthesize(&spec, seed).unwrap();
            for a in [Arm::Vaccine, Arm::Control] {
                let s = summarize(&d, a);
                assert!(s.mismatches(spec.arm(a), 0).is_empty(), "seed {seed}: {s}");
            }
            for c in d.clusters() {
                let t = c.tally();
                assert!(t.participants >= 1 && t.nonparticipants >= 1);
            }
        }
    }

    #[test]
    fn degenerate_single_cluster() {
        let m = arm(1, 10.0, 0.0, 10.0, 0.0, [10, 0, 0, 0]);
        let spec = MarginSpec { vaccine: m.clone(), control: m, allocation: Default::default() };
        let d = synthesize(&spec, 3).unwrap();
        let v = &d.clusters()[0];
        assert_eq!(v.size(), 10);
        assert!(v.individuals().iter().all(|i| i.participation && !i.outcome));
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = small_spec();
        assert_eq!(synthesize(&spec, 11).unwrap(), synthesize(&spec, 11).unwrap());
        assert_ne!(synthesize(&spec, 11).unwrap(), synthesize(&spec, 12).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small_spec();
        spec.vaccine.events_participants = 1000;
        assert!(matches!(synthesize(&spec, 0), Err(MarginError::InvalidSpec { .. })));

        let mut spec = small_spec();
        spec.control.mean_size = 60.0;
        assert!(matches!(synthesize(&spec, 0), Err(MarginError::InvalidSpec { arm: Arm::Control, .. })));

        let mut spec = small_spec();
        spec.vaccine.n_clusters = 0;
        assert!(synthesize(&spec, 0).is_err());
    }

    #[test]
    fn infeasible_specs_name_the_constraint() {
        // 3 non-participants cannot be spread over 12 clusters
        let mut spec = small_spec();
        spec.vaccine = arm(12, 30.25, 8.0, 30.0, 6.0, [360, 3, 0, 0]);
        match synthesize(&spec, 0) {
            Err(MarginError::InfeasibleMargins { arm: Arm::Vaccine, constraint }) => {
                assert!(constraint.contains("non-participants"), "{constraint}")
            }
            other => panic!("unexpected {other:?}"),
        }
        // a single cluster cannot have a positive SD
        let mut spec = small_spec();
        spec.control = arm(1, 10.0, 3.0, 5.0, 0.0, [5, 5, 0, 0]);
        assert!(matches!(synthesize(&spec, 0), Err(MarginError::InfeasibleMargins { .. })));
    }

    #[test]
    fn integer_vector_hits_total_and_sd() {
        let mut z: Vec<f64> = (0..30).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        standardize(&mut z);
        let lo = vec![1; 30];
        let hi = vec![1_000; 30];
        let x = integer_vector(3_000, 17.0, &z, &lo, &hi, 1).unwrap();
        assert_eq!(x.iter().sum::<i64>(), 3_000);
        assert_eq!(round_to(mean_sd(&x).1, 1), 17.0);
    }

    #[test]
    fn events_respect_capacity() {
        let mut r = rng::stream(1, "test/events", 0);
        let cap = [1, 0, 2, 5];
        for conc in [None, Some(0.1), Some(50.0)] {
            let e = allocate_events(&cap, 8, conc, &mut r);
            assert_eq!(e.iter().sum::<u64>(), 8);
            assert!(e.iter().zip(cap).all(|(&e, c)| e <= c));
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_to(776.875, 0), 777.0);
        assert_eq!(round_to(470.1, 0), 470.0);
        assert_eq!(round_to(2.345, 2), 2.35);
    }
}
