//! Rollout harness: seeded Monte-Carlo rollouts, outcome classification,
//! the success/verification/time metrics, experiment manifests, and
//! persistence (JSONL records plus a CSV summary).

use crate::cable::{generate_initial_state, KnotRequest};
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::policy::{Action, Policy, StepRecord};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    /// Timed out with knots remaining and the cable still workable.
    FailureA,
    /// Most of the cable left the reachable workspace.
    FailureB,
    /// Declared done while knots remained.
    FailureC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub seed: u64,
    pub tier: u8,
    pub config_hash: String,
    pub k0: usize,
    pub steps: Vec<StepRecord>,
    /// Sim-clock seconds at the Done step, if one was emitted.
    pub done_time: Option<f64>,
    pub outcome: Outcome,
    /// Host seconds; excluded from replay comparisons.
    pub wall_clock: f64,
}

/// Run one rollout to Done or the time limit and classify the outcome.
pub fn run_rollout(
    cfg: &SimConfig,
    tier: u8,
    seed: u64,
    frame_dir: Option<&Path>,
) -> Result<RolloutRecord> {
    if !(1..=3).contains(&tier) {
        return Err(SimError::ConfigInvalid(format!("tier {tier} not in 1..=3")));
    }
    let wall_start = std::time::Instant::now();
    let requests = KnotRequest::defaults(tier, seed);
    let mut state = generate_initial_state(tier, &requests, seed, cfg)?;
    let k0 = state.knot_spans().len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = Policy::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut done_time = None;

    while state.sim_clock < cfg.t_max_s {
        let rec = policy.step(&mut state, cfg, &mut rng, steps.len(), frame_dir);
        let is_done = rec.action == Action::Done;
        steps.push(rec);
        if is_done {
            done_time = Some(state.sim_clock);
            break;
        }
    }

    let reached_zero = k0 == 0 || steps.iter().any(|s| s.k_t == 0);
    let outcome = match done_time {
        Some(_) if steps.last().map(|s| s.k_t) == Some(0) && reached_zero => Outcome::Success,
        Some(_) => Outcome::FailureC,
        None if state.irrecoverable => Outcome::FailureB,
        None => Outcome::FailureA,
    };

    Ok(RolloutRecord {
        seed,
        tier,
        config_hash: cfg.config_hash(),
        k0,
        steps,
        done_time,
        outcome,
        wall_clock: wall_start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMetric {
    pub k: usize,
    /// Fraction of rollouts that removed at least k knots in time.
    pub rate: f64,
    /// Mean first time (s) at which k knots were gone, over achievers.
    pub avg_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rollouts: usize,
    pub untangling: Vec<KMetric>,
    /// Fraction reaching zero knots and then declaring Done.
    pub verification_rate: f64,
    pub avg_verification_time_s: Option<f64>,
    pub successes: usize,
    pub failures_a: usize,
    pub failures_b: usize,
    pub failures_c: usize,
    pub actions_mean: f64,
    pub actions_sd: f64,
}

/// Cumulative sim time at the end of each step.
fn step_times(r: &RolloutRecord) -> Vec<f64> {
    let mut t = 0.0;
    r.steps
        .iter()
        .map(|s| {
            t += s.duration_s;
            t
        })
        .collect()
}

/// First time k_t drops to `k0 - k`, if it ever does.
fn time_to_remove(r: &RolloutRecord, k: usize) -> Option<f64> {
    if r.k0 < k {
        return None;
    }
    let times = step_times(r);
    r.steps
        .iter()
        .zip(&times)
        .find(|(s, _)| s.k_t <= r.k0 - k)
        .map(|(_, &t)| t)
}

/// Verified iff the rollout reached zero knots and then declared Done.
fn verification_time(r: &RolloutRecord) -> Option<f64> {
    let done = r.done_time?;
    if r.outcome == Outcome::Success {
        Some(done)
    } else {
        None
    }
}

pub fn compute_metrics(records: &[RolloutRecord]) -> Result<MetricsReport> {
    if records.is_empty() {
        return Err(SimError::EmptyInput("no rollout records".into()));
    }
    let n = records.len() as f64;
    let max_k = records.iter().map(|r| r.k0).max().unwrap_or(0);
    let untangling = (1..=max_k)
        .map(|k| {
            let times: Vec<f64> = records.iter().filter_map(|r| time_to_remove(r, k)).collect();
            KMetric {
                k,
                rate: times.len() as f64 / n,
                avg_time_s: if times.is_empty() {
                    None
                } else {
                    Some(times.iter().sum::<f64>() / times.len() as f64)
                },
            }
        })
        .collect();
    let verif: Vec<f64> = records.iter().filter_map(verification_time).collect();
    let counts = |o: Outcome| records.iter().filter(|r| r.outcome == o).count();
    let actions: Vec<f64> = records
        .iter()
        .map(|r| {
            r.steps
                .iter()
                .filter(|s| s.action != Action::Done)
                .count() as f64
        })
        .collect();
    let mean = actions.iter().sum::<f64>() / n;
    let var = actions.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    Ok(MetricsReport {
        rollouts: records.len(),
        untangling,
        verification_rate: verif.len() as f64 / n,
        avg_verification_time_s: if verif.is_empty() {
            None
        } else {
            Some(verif.iter().sum::<f64>() / verif.len() as f64)
        },
        successes: counts(Outcome::Success),
        failures_a: counts(Outcome::FailureA),
        failures_b: counts(Outcome::FailureB),
        failures_c: counts(Outcome::FailureC),
        actions_mean: mean,
        actions_sd: var.sqrt(),
    })
}

/// One experiment cell: a tier and seed list sharing one config variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestCell {
    pub label: String,
    pub tier: u8,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub ablate_uncertainty: bool,
    #[serde(default)]
    pub noise_off: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub cells: Vec<ManifestCell>,
    /// Base config; cells derive their variants from it.
    #[serde(default)]
    pub config: SimConfig,
}

pub fn cell_config(base: &SimConfig, cell: &ManifestCell) -> SimConfig {
    let mut cfg = base.clone();
    if cell.noise_off {
        cfg = cfg.with_noise_off();
    }
    if cell.ablate_uncertainty {
        cfg = cfg.with_uncertainty_disabled();
    }
    cfg
}

pub struct ExperimentOutput {
    pub records: Vec<RolloutRecord>,
    /// One report per cell, in manifest order.
    pub reports: Vec<(String, MetricsReport)>,
}

/// Run every cell of the manifest across a worker pool and persist
/// records.jsonl plus summary.csv under `out_dir`.
pub fn run_experiment(manifest: &Manifest, workers: usize, out_dir: &Path) -> Result<ExperimentOutput> {
    if manifest.cells.is_empty() {
        return Err(SimError::ConfigInvalid("manifest has no cells".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::ConfigInvalid(format!("worker pool: {e}")))?;

    let jobs: Vec<(usize, SimConfig, u8, u64)> = manifest
        .cells
        .iter()
        .enumerate()
        .flat_map(|(ci, cell)| {
            let cfg = cell_config(&manifest.config, cell);
            cell.seeds
                .iter()
                .map(move |&s| (ci, cfg.clone(), cell.tier, s))
                .collect::<Vec<_>>()
        })
        .collect();

    let mut results: Vec<(usize, RolloutRecord)> = pool.install(|| {
        jobs.par_iter()
            .map(|(ci, cfg, tier, seed)| {
                let rec = run_rollout(cfg, *tier, *seed, None).unwrap_or_else(|_| RolloutRecord {
                    seed: *seed,
                    tier: *tier,
                    config_hash: cfg.config_hash(),
                    k0: 0,
                    steps: Vec::new(),
                    done_time: None,
                    outcome: Outcome::FailureA,
                    wall_clock: 0.0,
                });
                (*ci, rec)
            })
            .collect()
    });
    // Manifest order, not completion order, so persisted bytes replay.
    results.sort_by_key(|(ci, r)| (*ci, r.seed));

    std::fs::create_dir_all(out_dir)?;
    write_records(
        &out_dir.join("records.jsonl"),
        results.iter().map(|(_, r)| r),
    )?;

    let mut reports = Vec::new();
    for (ci, cell) in manifest.cells.iter().enumerate() {
        let recs: Vec<RolloutRecord> = results
            .iter()
            .filter(|(c, _)| *c == ci)
            .map(|(_, r)| r.clone())
            .collect();
        reports.push((cell.label.clone(), compute_metrics(&recs)?));
    }
    write_summary_csv(&out_dir.join("summary.csv"), &reports)?;

    Ok(ExperimentOutput {
        records: results.into_iter().map(|(_, r)| r).collect(),
        reports,
    })
}

pub fn write_records<'a>(
    path: &Path,
    records: impl Iterator<Item = &'a RolloutRecord>,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<RolloutRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

fn write_summary_csv(path: &Path, reports: &[(String, MetricsReport)]) -> Result<()> {
    let max_k = reports
        .iter()
        .flat_map(|(_, r)| r.untangling.iter().map(|m| m.k))
        .max()
        .unwrap_or(0);
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(f, "cell,rollouts")?;
    for k in 1..=max_k {
        write!(f, ",knot_{k}_success_rate,knot_{k}_avg_time_s")?;
    }
    writeln!(
        f,
        ",verification_rate,avg_verification_time_s,success,failure_a,failure_b,failure_c,actions_mean,actions_sd"
    )?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "NA".into());
    for (label, r) in reports {
        write!(f, "{label},{}", r.rollouts)?;
        for k in 1..=max_k {
            match r.untangling.iter().find(|m| m.k == k) {
                Some(m) => write!(f, ",{:.3},{}", m.rate, opt(m.avg_time_s))?,
                None => write!(f, ",NA,NA")?,
            }
        }
        writeln!(
            f,
            ",{:.3},{},{},{},{},{},{:.3},{:.3}",
            r.verification_rate,
            opt(r.avg_verification_time_s),
            r.successes,
            r.failures_a,
            r.failures_b,
            r.failures_c,
            r.actions_mean,
            r.actions_sd
        )?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::StepRecord;

    fn rec(seed: u64, k0: usize, steps: &[(f64, usize)], done: Option<f64>, outcome: Outcome) -> RolloutRecord {
        RolloutRecord {
            seed,
            tier: 2,
            config_hash: "x".into(),
            k0,
            steps: steps
                .iter()
                .enumerate()
                .map(|(i, &(d, k))| StepRecord {
                    step: i,
                    action: Action::Reidemeister,
                    duration_s: d,
                    events: Vec::new(),
                    k_t: k,
                    trace_statuses: Vec::new(),
                    network_status: None,
                    error: None,
                    frame: None,
                })
                .collect(),
            done_time: done,
            outcome,
            wall_clock: 1.0,
        }
    }

    #[test]
    fn metrics_worked_examples() {
        // One of two rollouts verifies at t=100.
        let a = rec(1, 1, &[(50.0, 0.0 as usize), (50.0, 0)], Some(100.0), Outcome::Success);
        let b = rec(2, 1, &[(900.0, 1)], None, Outcome::FailureA);
        let m = compute_metrics(&[a, b]).unwrap();
        assert_eq!(m.verification_rate, 0.5);
        assert_eq!(m.avg_verification_time_s, Some(100.0));
        // k0=2 dropping to 1 at t=50 and 0 at t=120.
        let c = rec(3, 2, &[(50.0, 1), (70.0, 0), (30.0, 0)], Some(150.0), Outcome::Success);
        let m = compute_metrics(&[c]).unwrap();
        assert_eq!(m.untangling[0], KMetric { k: 1, rate: 1.0, avg_time_s: Some(50.0) });
        assert_eq!(m.untangling[1], KMetric { k: 2, rate: 1.0, avg_time_s: Some(120.0) });
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(compute_metrics(&[]), Err(SimError::EmptyInput(_))));
        let m = Manifest { cells: Vec::new(), config: SimConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_experiment(&m, 1, dir.path()),
            Err(SimError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn rollout_replay_is_identical_minus_wall_clock() {
        let cfg = SimConfig::default().with_noise_off();
        let strip = |r: &RolloutRecord| {
            let mut v = serde_json::to_value(r).unwrap();
            v.as_object_mut().unwrap().remove("wall_clock");
            serde_json::to_string(&v).unwrap()
        };
        let a = run_rollout(&cfg, 1, 3, None).unwrap();
        let b = run_rollout(&cfg, 1, 3, None).unwrap();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn timeout_classifies_failure_a() {
        let mut cfg = SimConfig::default().with_noise_off();
        cfg.t_max_s = 50.0;
        let r = run_rollout(&cfg, 1, 3, None).unwrap();
        assert_eq!(r.outcome, Outcome::FailureA);
        assert!(r.done_time.is_none());
    }

    #[test]
    fn records_round_trip_through_jsonl() {
        let cfg = SimConfig::default().with_noise_off();
        let r = run_rollout(&cfg, 1, 4, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        write_records(&path, std::iter::once(&r)).unwrap();
        let back = read_records(&path).unwrap();
        assert_eq!(back, vec![r]);
    }
}
