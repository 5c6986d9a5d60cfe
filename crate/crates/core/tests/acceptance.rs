//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestError, TestRunner};

use crt_effects::causal::{
    generate_world, observe_arms, true_estimands, GenerativeConfig, PotentialIndividual, PotentialWorld,
    WorldCluster,
};
use crt_effects::config::ConfigFile;
use crt_effects::io::{dataset_to_bytes, sha256_hex};
use crt_effects::margins::synthesize;
use crt_effects::mc::{run_mc, run_mc_with, McOptions, McReport};
use crt_effects::model::cluster_outcome;
use crt_effects::randomization::{balanced_strata, SchemeKind};
use crt_effects::{
    Arm, ClusterId, ClusterRecord, Contrast, EffectKind, Estimator, IndividualRecord, StratumSelector,
    TrialDataset,
};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_crt-effects")
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run_timed(args: &[&str]) -> Result<Duration, String> {
    let t = Instant::now();
    let out = Command::new(bin()).args(args).output().map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    if !out.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(elapsed)
}

/// Per-arm cluster summaries computed straight from the CSV text.
struct Summary {
    n: usize,
    sizes: Vec<f64>,
    parts: Vec<f64>,
    totals: [u64; 4],
}

fn summarize_csv(text: &str) -> BTreeMap<String, Summary> {
    // cluster -> (arm, size, participants, participant events, other events)
    let mut per_cluster: BTreeMap<String, (String, u64, u64, u64, u64)> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let e = per_cluster.entry(f[0].to_string()).or_insert((f[1].to_string(), 0, 0, 0, 0));
        e.1 += 1;
        if f[2] == "1" {
            e.2 += 1;
            e.3 += (f[3] == "1") as u64;
        } else {
            e.4 += (f[3] == "1") as u64;
        }
    }
    let mut out: BTreeMap<String, Summary> = BTreeMap::new();
    for (arm, size, part, ev_p, ev_n) in per_cluster.into_values() {
        let s = out.entry(arm).or_insert(Summary { n: 0, sizes: vec![], parts: vec![], totals: [0; 4] });
        s.n += 1;
        s.sizes.push(size as f64);
        s.parts.push(part as f64);
        s.totals[0] += part;
        s.totals[1] += size - part;
        s.totals[2] += ev_p;
        s.totals[3] += ev_n;
    }
    out
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn reference_dataset(dir: &Path) -> Result<(PathBuf, Duration), String> {
    let out = dir.join("reference.csv");
    let config = fixture("typhoid_margins.toml");
    let t = run_timed(&[
        "generate",
        "margins",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])?;
    Ok((out, t))
}

fn criterion_1(dir: &Path) -> Outcome {
    let (path, elapsed) = reference_dataset(dir)?;
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let s = summarize_csv(&text);
    let expected = [
        ("1", 40, [18869, 12206, 34, 16], [777.0, 136.0, 472.0, 103.0]),
        ("0", 40, [18804, 12877, 96, 31], [792.0, 142.0, 470.0, 104.0]),
    ];
    for (arm, n, totals, moments) in expected {
        let a = s.get(arm).ok_or(format!("arm {arm} missing"))?;
        check(a.n == n, format!("arm {arm}: {} clusters", a.n))?;
        check(a.totals == totals, format!("arm {arm}: totals {:?}", a.totals))?;
        let (ms, ss) = mean_sd(&a.sizes);
        let (mp, sp) = mean_sd(&a.parts);
        let got = [ms.round(), ss.round(), mp.round(), sp.round()];
        check(got == moments, format!("arm {arm}: rounded moments {got:?}"))?;
    }
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    let pinned = std::fs::read_to_string(fixture("reference_dataset.sha256")).map_err(|e| e.to_string())?;
    let sum = sha256_hex(text.as_bytes());
    check(
        pinned.split_whitespace().next() == Some(sum.as_str()),
        format!("checksum {sum} differs from pinned"),
    )?;
    Ok(format!("exact totals, rounded moments match, {:.0} ms, checksum pinned", elapsed.as_secs_f64() * 1e3))
}

fn estimate_report(dir: &Path) -> Result<(serde_json::Value, Duration), String> {
    let (data, _) = reference_dataset(dir)?;
    let report = dir.join("report.json");
    let t = run_timed(&["estimate", data.to_str().unwrap(), "--out", report.to_str().unwrap()])?;
    let text = std::fs::read_to_string(report).map_err(|e| e.to_string())?;
    Ok((serde_json::from_str(&text).map_err(|e| e.to_string())?, t))
}

fn entry<'a>(report: &'a serde_json::Value, kind: &str) -> Result<&'a serde_json::Value, String> {
    report["effects"]
        .as_array()
        .and_then(|a| a.iter().find(|e| e["kind"] == kind))
        .ok_or(format!("no {kind} entry"))
}

fn num(e: &serde_json::Value, field: &str) -> Result<f64, String> {
    e[field].as_f64().ok_or(format!("{} has no {field}", e["kind"]))
}

fn criterion_2(dir: &Path) -> Outcome {
    let (report, elapsed) = estimate_report(dir)?;
    let mut parts = Vec::new();
    for (kind, point, se) in [("overall", -2.49, 0.47), ("indirect", -1.29, 0.56), ("total", -3.30, 0.67)] {
        let e = entry(&report, kind)?;
        check(e["scale"] == "per1000", "not per 1000")?;
        let (p, s) = (num(e, "point")?, num(e, "standard_error")?);
        check((p - point).abs() <= 0.40, format!("{kind} {p:.3} vs {point}"))?;
        check((s - se).abs() <= 0.30, format!("{kind} se {s:.3} vs {se}"))?;
        parts.push(format!("{kind} {p:.2} ({s:.2})"));
    }
    check(elapsed < Duration::from_secs(1), format!("took {elapsed:?}"))?;
    Ok(format!("{}, {:.0} ms", parts.join(", "), elapsed.as_secs_f64() * 1e3))
}

fn criterion_3(dir: &Path) -> Outcome {
    let (report, _) = estimate_report(dir)?;
    let n = entry(&report, "naive-direct")?;
    let (np, nl, nu) = (num(n, "point")?, num(n, "ci_lower")?, num(n, "ci_upper")?);
    check((np - 0.56).abs() <= 0.40, format!("naive {np:.3}"))?;
    check(nl < 0.0 && nu > 0.0, format!("naive CI ({nl:.2}, {nu:.2}) does not cross 0"))?;
    check(
        n["warnings"].as_array().is_some_and(|w| !w.is_empty()),
        "naive entry lacks the non-causal warning",
    )?;
    let c = entry(&report, "control-contrast")?;
    let (cp, cl, cu) = (num(c, "point")?, num(c, "ci_lower")?, num(c, "ci_upper")?);
    check((cp - 2.57).abs() <= 0.40, format!("control {cp:.3}"))?;
    check(cl > 0.0 || cu < 0.0, format!("control CI ({cl:.2}, {cu:.2}) contains 0"))?;
    Ok(format!("naive {np:.2} ({nl:.2}, {nu:.2}); control {cp:.2} ({cl:.2}, {cu:.2})"))
}

fn mc_world() -> Result<(PotentialWorld, u64, usize), String> {
    let cfg = ConfigFile::load(&fixture("mc_world.toml")).map_err(|e| e.to_string())?;
    let world = generate_world(cfg.causal().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let mc = cfg.mc.ok_or("no [mc] section")?;
    Ok((world, mc.seed, mc.replicates))
}

fn mc_reports() -> Result<Vec<(&'static str, McReport)>, String> {
    let (world, seed, reps) = mc_world()?;
    check(world.n_clusters() >= 40 && reps == 10_000, "world or replicate count too small")?;
    let schemes = [
        ("complete", SchemeKind::CompletelyRandomized { n_treated: world.n_clusters() / 2 }),
        ("stratified", SchemeKind::StratifiedBlocked { treated: balanced_strata(world.stratum_labels()) }),
    ];
    schemes
        .into_iter()
        .map(|(name, s)| Ok((name, run_mc(&world, &s, reps, seed).map_err(|e| e.to_string())?)))
        .collect()
}

const CAUSAL: [EffectKind; 3] = [EffectKind::Overall, EffectKind::Indirect, EffectKind::Total];

fn criterion_4(reports: &[(&str, McReport)], elapsed: Duration) -> Outcome {
    let mut worst: f64 = 0.0;
    for (name, r) in reports {
        for k in CAUSAL {
            let row = r.row(k);
            check(row.n_failed == 0, format!("{name} {}: {} failures", k.name(), row.n_failed))?;
            let z = row.bias.ok_or("no truth")? / row.mc_standard_error;
            check(z.abs() < 3.0, format!("{name} {}: bias = {z:.2} MC-SE", k.name()))?;
            worst = worst.max(z.abs());
        }
    }
    check(elapsed < Duration::from_secs(120), format!("took {elapsed:?}"))?;
    Ok(format!("max |bias|/MC-SE {worst:.2} over 2 schemes x 3 effects, {:.1} s", elapsed.as_secs_f64()))
}

fn criterion_5(reports: &[(&str, McReport)]) -> Outcome {
    let mut lines = Vec::new();
    for (name, r) in reports {
        let cov: Vec<f64> = CAUSAL.iter().map(|&k| r.row(k).coverage.unwrap_or(f64::NAN)).collect();
        for (k, c) in CAUSAL.iter().zip(&cov) {
            check((0.93..=0.97).contains(c), format!("{name} {} coverage {c:.4}", k.name()))?;
        }
        lines.push(format!("{name} {:.3}/{:.3}/{:.3}", cov[0], cov[1], cov[2]));
    }
    Ok(lines.join(", "))
}

fn criterion_6() -> Outcome {
    let cfg = GenerativeConfig {
        n_clusters: 40,
        confounding_strength: 1.0,
        direct_efficacy: 0.0,
        spillover_strength: 0.0,
        seed: 6,
        ..GenerativeConfig::default()
    };
    let world = generate_world(&cfg).map_err(|e| e.to_string())?;
    let truth = true_estimands(&world);
    check(truth.total == Some(0.0), format!("total truth {:?}", truth.total))?;
    check(truth.overall == 0.0 && truth.indirect == Some(0.0), "null world has non-zero effects")?;
    let limit = truth.naive_limit.ok_or("naive limit undefined")?;
    let r = run_mc(&world, &SchemeKind::CompletelyRandomized { n_treated: 20 }, 10_000, 61)
        .map_err(|e| e.to_string())?;
    let naive = r.row(EffectKind::NaiveDirect);
    check(!naive.truth_is_causal, "naive truth row marked causal")?;
    let z = (naive.mean_estimate - limit) / naive.mc_standard_error;
    check(z.abs() < 3.0, format!("naive mean {} vs limit {limit}: {z:.2} MC-SE", naive.mean_estimate))?;
    check(limit.abs() > 3.0 * naive.mc_standard_error, "naive limit indistinguishable from 0")?;
    Ok(format!(
        "naive limit {:.2}/1000, MC mean {:.2}/1000 ({z:+.2} MC-SE); true total exactly 0",
        limit * 1e3,
        naive.mean_estimate * 1e3
    ))
}

// Three clusters of potential outcomes, as (participates, Y if vaccine, Y if control).
const TINY: [&[(u8, u8, u8)]; 3] = [
    &[(1, 0, 1), (1, 0, 0), (0, 1, 1), (0, 0, 1)],
    &[(1, 1, 1), (0, 0, 0), (0, 1, 1), (1, 0, 1), (0, 0, 0)],
    &[(1, 0, 0), (0, 0, 1), (1, 0, 1), (0, 1, 1), (1, 1, 1), (0, 0, 0)],
];

fn tiny_world() -> PotentialWorld {
    let clusters = TINY
        .iter()
        .enumerate()
        .map(|(i, people)| WorldCluster {
            id: ClusterId::new(format!("t{i}")),
            stratum_label: None,
            individuals: people
                .iter()
                .map(|&(s, y1, y0)| PotentialIndividual {
                    participation: s == 1,
                    outcome_if_vaccine: y1 == 1,
                    outcome_if_control: y0 == 1,
                })
                .collect(),
        })
        .collect();
    PotentialWorld::new(clusters).unwrap()
}

/// Mean outcome of cluster `i` under `arm` (1 vaccine), restricted by `keep`.
fn tiny_prop(i: usize, arm: u8, keep: fn(u8) -> bool) -> f64 {
    let people: Vec<_> = TINY[i].iter().filter(|p| keep(p.0)).collect();
    let cases = people.iter().filter(|p| if arm == 1 { p.1 == 1 } else { p.2 == 1 }).count();
    cases as f64 / people.len() as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

fn criterion_7() -> Outcome {
    let world = tiny_world();
    let truth = true_estimands(&world);
    // Worked by hand from the table above.
    let hand = [
        ("overall", truth.overall, -31.0 / 90.0),
        ("indirect", truth.indirect.unwrap_or(f64::NAN), -5.0 / 18.0),
        ("total", truth.total.unwrap_or(f64::NAN), -4.0 / 9.0),
        ("naive limit", truth.naive_limit.unwrap_or(f64::NAN), -1.0 / 9.0),
        ("control limit", truth.control_contrast_limit.unwrap_or(f64::NAN), 1.0 / 18.0),
    ];
    for (name, got, want) in hand {
        check(close(got, want), format!("{name}: {got} vs hand {want}"))?;
    }

    let all: fn(u8) -> bool = |_| true;
    let part: fn(u8) -> bool = |s| s == 1;
    let non: fn(u8) -> bool = |s| s == 0;
    let est = Estimator::default();
    let mut checked = 0;
    for n_treated in 1..=2usize {
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        let assignments: Vec<[u8; 3]> = (0u8..8)
            .map(|m| [m & 1, (m >> 1) & 1, (m >> 2) & 1])
            .filter(|a| a.iter().map(|&x| x as usize).sum::<usize>() == n_treated)
            .collect();
        for a in &assignments {
            let arms: Vec<Arm> =
                a.iter().map(|&x| if x == 1 { Arm::Vaccine } else { Arm::Control }).collect();
            let data = observe_arms(&world, &arms).map_err(|e| e.to_string())?;
            let arm_mean = |arm: u8, keep: fn(u8) -> bool| {
                let v: Vec<f64> = (0..3).filter(|&i| a[i] == arm).map(|i| tiny_prop(i, arm, keep)).collect();
                v.iter().sum::<f64>() / v.len() as f64
            };
            let within = |arm: u8| -> Vec<f64> {
                (0..3)
                    .filter(|&i| a[i] == arm)
                    .map(|i| tiny_prop(i, arm, part) - tiny_prop(i, arm, non))
                    .collect()
            };
            let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let oracle = [
                ("overall", EffectKind::Overall, arm_mean(1, all) - arm_mean(0, all)),
                ("indirect", EffectKind::Indirect, arm_mean(1, non) - arm_mean(0, non)),
                ("total", EffectKind::Total, arm_mean(1, part) - arm_mean(0, part)),
                ("naive", EffectKind::NaiveDirect, avg(&within(1))),
                ("control", EffectKind::ControlArmStratumContrast, avg(&within(0))),
            ];
            for (name, kind, want) in oracle {
                let got = est.point(&data, kind, Contrast::RiskDifference).map_err(|e| e.to_string())?;
                check(close(got, want), format!("{name} under {a:?}: {got} vs {want}"))?;
                *sums.entry(name).or_default() += got / assignments.len() as f64;
                checked += 1;
            }
            let rr = est.point(&data, EffectKind::Overall, Contrast::RiskRatio).map_err(|e| e.to_string())?;
            check(close(rr, arm_mean(1, all) / arm_mean(0, all)), format!("risk ratio under {a:?}"))?;
            // Paired standard error of the within-arm contrasts, where defined.
            for (arm, kind) in [(1u8, EffectKind::NaiveDirect), (0, EffectKind::ControlArmStratumContrast)] {
                let d = within(arm);
                if d.len() == 2 {
                    let m = avg(&d);
                    let se = (((d[0] - m).powi(2) + (d[1] - m).powi(2)) / 1.0 / 2.0).sqrt();
                    let e = est.estimate(&data, kind, Contrast::RiskDifference).map_err(|e| e.to_string())?;
                    check(close(e.standard_error, se), format!("{} se under {a:?}", kind.name()))?;
                    check(close(e.ci_lower, m - 1.96 * se) && close(e.ci_upper, m + 1.96 * se), "paired CI")?;
                }
            }
        }
        // Averaging over every equiprobable assignment recovers the truth.
        let targets = [
            ("overall", -31.0 / 90.0),
            ("indirect", -5.0 / 18.0),
            ("total", -4.0 / 9.0),
            ("naive", -1.0 / 9.0),
            ("control", 1.0 / 18.0),
        ];
        for (name, want) in targets {
            check(
                close(sums[name], want),
                format!("{name} randomization mean {} vs {want} ({n_treated} treated)", sums[name]),
            )?;
        }
    }
    // Two hand-worked observed values: t0 treated alone, and t1, t2 treated.
    let one = observe_arms(&world, &[Arm::Vaccine, Arm::Control, Arm::Control]).unwrap();
    check(
        close(est.point(&one, EffectKind::Overall, Contrast::RiskDifference).unwrap(), 0.25 - 19.0 / 30.0),
        "hand overall",
    )?;
    let two = observe_arms(&world, &[Arm::Control, Arm::Vaccine, Arm::Vaccine]).unwrap();
    check(
        close(
            est.point(&two, EffectKind::NaiveDirect, Contrast::RiskDifference).unwrap(),
            (1.0 / 6.0 + 0.0) / 2.0,
        ),
        "hand naive",
    )?;
    Ok(format!("5 truths by hand, {checked} estimator outputs over 6 assignments, to 1e-12"))
}

fn arb_people() -> impl Strategy<Value = Vec<(bool, bool)>> {
    prop::collection::vec((any::<bool>(), any::<bool>()), 1..30)
}

fn arb_dataset() -> impl Strategy<Value = TrialDataset> {
    (prop::collection::vec(arb_people(), 2..8), prop::collection::vec(arb_people(), 2..8)).prop_map(
        |(v, c)| {
            let mk = |arm: Arm, tag: &str, groups: Vec<Vec<(bool, bool)>>| {
                groups
                    .into_iter()
                    .enumerate()
                    .map(move |(i, p)| {
                        let people = p.into_iter().map(|(s, y)| IndividualRecord::new(s, y)).collect();
                        ClusterRecord::new(ClusterId::new(format!("{tag}{i}")), arm, None, people).unwrap()
                    })
                    .collect::<Vec<_>>()
            };
            let mut all = mk(Arm::Vaccine, "v", v);
            all.extend(mk(Arm::Control, "c", c));
            TrialDataset::new(all).unwrap()
        },
    )
}

fn ols_slope(data: &TrialDataset) -> f64 {
    let pts: Vec<(f64, f64)> = data
        .clusters()
        .iter()
        .map(|c| {
            let y = c.individuals().iter().filter(|p| p.outcome).count() as f64 / c.size() as f64;
            (c.arm().bit() as f64, y)
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn report<T: std::fmt::Debug>(name: &str, r: Result<(), TestError<T>>) -> Result<(), String> {
    r.map_err(|e| format!("{name}: {e}"))
}

fn criterion_8() -> Outcome {
    let mut runner =
        TestRunner::new(PropConfig { cases: 256, failure_persistence: None, ..PropConfig::default() });

    report(
        "mixture identity",
        runner.run(&arb_people(), |people| {
            let individuals: Vec<_> = people.iter().map(|&(s, y)| IndividualRecord::new(s, y)).collect();
            let c = ClusterRecord::new(ClusterId::new("x"), Arm::Vaccine, None, individuals).unwrap();
            let all = cluster_outcome(&c, StratumSelector::Overall).unwrap();
            let p = cluster_outcome(&c, StratumSelector::Participators);
            let n = cluster_outcome(&c, StratumSelector::NonParticipators);
            let (pe, pd) = p.map_or((0, 0), |o| (o.events, o.denominator));
            let (ne, nd) = n.map_or((0, 0), |o| (o.events, o.denominator));
            prop_assert_eq!(all.events, pe + ne);
            prop_assert_eq!(all.denominator, pd + nd);
            prop_assert_eq!(all.denominator as usize, people.len());
            Ok(())
        }),
    )?;

    let est = Estimator::default();
    report(
        "regression slope",
        runner.run(&arb_dataset(), |d| {
            let point = est.point(&d, EffectKind::Overall, Contrast::RiskDifference).unwrap();
            prop_assert!((point - ols_slope(&d)).abs() <= 1e-10);
            Ok(())
        }),
    )?;

    report(
        "arm relabel",
        runner.run(&arb_dataset(), |d| {
            let flipped = d.relabel_arms();
            let rd = est.point(&d, EffectKind::Overall, Contrast::RiskDifference).unwrap();
            let rd_f = est.point(&flipped, EffectKind::Overall, Contrast::RiskDifference).unwrap();
            prop_assert!((rd + rd_f).abs() <= 1e-12);
            if let (Ok(rr), Ok(rr_f)) = (
                est.point(&d, EffectKind::Overall, Contrast::RiskRatio),
                est.point(&flipped, EffectKind::Overall, Contrast::RiskRatio),
            ) {
                if rr > 0.0 {
                    prop_assert!((rr * rr_f - 1.0).abs() <= 1e-12);
                }
            }
            Ok(())
        }),
    )?;

    let spec = ConfigFile::load(&fixture("typhoid_margins.toml"))
        .map_err(|e| e.to_string())?
        .margins
        .ok_or("no margins")?
        .spec;
    let mut slow =
        TestRunner::new(PropConfig { cases: 8, failure_persistence: None, ..PropConfig::default() });
    report(
        "determinism",
        slow.run(&any::<u64>(), |seed| {
            let a = dataset_to_bytes(&synthesize(&spec, seed).unwrap());
            let b = dataset_to_bytes(&synthesize(&spec, seed).unwrap());
            prop_assert_eq!(sha256_hex(&a), sha256_hex(&b));
            let cfg = GenerativeConfig {
                n_clusters: 12,
                mean_size: 40.0,
                size_sd: 8.0,
                seed,
                ..Default::default()
            };
            let w = generate_world(&cfg).unwrap();
            prop_assert_eq!(&w, &generate_world(&cfg).unwrap());
            let scheme = SchemeKind::CompletelyRandomized { n_treated: 6 };
            let mut serial = McOptions::new(200, seed);
            serial.parallel = false;
            prop_assert_eq!(
                run_mc_with(&w, &scheme, &serial).unwrap(),
                run_mc(&w, &scheme, 200, seed).unwrap()
            );
            Ok(())
        }),
    )?;
    Ok("mixture identity, regression slope, arm relabel (256 cases each); determinism (8 seeds)".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "margin reproduction", criterion_1(dir.path())),
        (2, "published effect panel", criterion_2(dir.path())),
        (3, "naive and control-arm diagnostics", criterion_3(dir.path())),
    ];
    let t = Instant::now();
    match mc_reports() {
        Ok(reports) => {
            let elapsed = t.elapsed();
            results.push((4, "unbiasedness", criterion_4(&reports, elapsed)));
            results.push((5, "coverage", criterion_5(&reports)));
        }
        Err(e) => {
            results.push((4, "unbiasedness", Err(e.clone())));
            results.push((5, "coverage", Err(e)));
        }
    }
    results.push((6, "naive limit oracle", criterion_6()));
    results.push((7, "tiny-world enumeration", criterion_7()));
    results.push((8, "structural invariants", criterion_8()));

    let mut failed = 0;
    for (n, name, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {n} ({name}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {msg}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
