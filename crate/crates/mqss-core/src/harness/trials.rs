//! Seeded Monte Carlo execution.
//!
//! Trial `t` runs on the child stream derived from `(seed, t)`, so results
//! are independent of execution order and of how many workers rayon uses;
//! aggregation is a commutative fold over per-trial records.

use rayon::prelude::*;
use serde::Serialize;

use crate::attack::{default_tree_depth, trojan_infer, AttackStrategy};
use crate::harness::config::{ExperimentConfig, ProtocolKind};
use crate::photonics::{bunching_flag_probability, make_signal};
use crate::protocol::{
    run_improved, run_original, OpSet, RunResult, SecretMessage, Verdict,
};
use crate::qubit::{apply, state_of, StateLabel};
use crate::rng::RandomStream;
use crate::Result;

/// z for a two-sided 95% interval.
const Z95: f64 = 1.959963984540054;

/// Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z95 / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Pooled summary of one proportion metric.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MetricSummary {
    /// Pooled proportion: successes / total.
    pub mean: f64,
    /// Binomial standard error of the pooled proportion.
    pub std_error: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub successes: u64,
    pub total: u64,
    pub trials: u64,
}

impl MetricSummary {
    fn from_counts(successes: u64, total: u64, trials: u64) -> Self {
        let (lo, hi) = wilson_interval(successes, total);
        let mean = if total == 0 { 0.0 } else { successes as f64 / total as f64 };
        let std_error = if total == 0 {
            0.0
        } else {
            (mean * (1.0 - mean) / total as f64).sqrt()
        };
        Self {
            mean,
            std_error,
            wilson_low: lo,
            wilson_high: hi,
            successes,
            total,
            trials,
        }
    }
}

/// Summary across all trials of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryStats {
    /// Interval method used for every metric below.
    pub interval_method: &'static str,
    pub epsilon_r: MetricSummary,
    pub p_m: MetricSummary,
    pub recovery_rate: MetricSummary,
    pub ambiguity: MetricSummary,
    pub detection: MetricSummary,
}

/// One trial's outcome. The first nine fields are the canonical report
/// columns; the raw counts after them feed the pooled statistics.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub protocol: String,
    pub attack: String,
    pub epsilon_r: f64,
    pub p_m: f64,
    pub verdict: String,
    pub recovery_rate: f64,
    pub ambiguous_count: u64,
    pub signals: u64,
    pub error_count: u64,
    pub error_samples: u64,
    pub flag_count: u64,
    pub flag_samples: u64,
    pub recovered_count: u64,
    pub carrier_count: u64,
    pub inference_count: u64,
    pub detected: bool,
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "pass",
        Verdict::AbortErrorRate => "abort_error_rate",
        Verdict::AbortMultiphoton => "abort_multiphoton",
    }
}

fn attack_name(cfg: &ExperimentConfig) -> String {
    format!("{:?}", cfg.attack).to_lowercase()
}

fn protocol_name(cfg: &ExperimentConfig) -> String {
    format!("{:?}", cfg.protocol).to_lowercase()
}

fn record_from_run(cfg: &ExperimentConfig, trial: u64, result: &RunResult) -> TrialRecord {
    let count = |rate: f64, n: usize| (rate * n as f64).round() as u64;

    let (epsilon_r, error_count, error_samples) = match (&result.alice_check, &result.charlie_check)
    {
        (Some(check), _) | (None, Some(check)) => (
            check.error_rate,
            count(check.error_rate, check.error_samples),
            check.error_samples as u64,
        ),
        (None, None) => (0.0, 0, 0),
    };
    let (p_m, flag_count, flag_samples) = match &result.charlie_check {
        Some(check) => (
            check.multiphoton_rate,
            count(check.multiphoton_rate, check.samples_used),
            check.samples_used as u64,
        ),
        None => (0.0, 0, 0),
    };
    let (recovery_rate, recovered_count, carrier_count, ambiguous_count, inference_count, detected) =
        match &result.attacker_view {
            Some(view) => {
                let carriers = view.recovered_bits.as_ref().map_or(0, Vec::len) as u64;
                (
                    view.recovery_rate,
                    count(view.recovery_rate, carriers as usize),
                    carriers,
                    view.inferences.iter().filter(|i| i.ambiguous).count() as u64,
                    view.inferences.len() as u64,
                    view.detected,
                )
            }
            None => (0.0, 0, 0, 0, 0, result.aborted()),
        };

    TrialRecord {
        trial,
        protocol: protocol_name(cfg),
        attack: attack_name(cfg),
        epsilon_r,
        p_m,
        verdict: verdict_name(result.verdict()).to_string(),
        recovery_rate,
        ambiguous_count,
        signals: cfg.signals as u64,
        error_count,
        error_samples,
        flag_count,
        flag_samples,
        recovered_count,
        carrier_count,
        inference_count,
        detected,
    }
}

/// Executes one seeded trial of the configured experiment.
pub fn run_one_trial(cfg: &ExperimentConfig, trial: u64, master: &RandomStream) -> Result<RunResult> {
    let mut rng = master.child(trial);
    let message = SecretMessage::random(cfg.msg_len, &mut rng);
    let pcfg = cfg.protocol_config(message);
    match cfg.protocol {
        ProtocolKind::Original => run_original(&pcfg, cfg.attack_strategy(), &mut rng),
        ProtocolKind::Improved => run_improved(&pcfg, cfg.attack_strategy(), &mut rng),
    }
}

/// Runs every trial on its own child stream and pools the statistics.
///
/// Returns the summary, the per-trial records, and (when requested) the full
/// transcripts.
pub fn run_trials(
    cfg: &ExperimentConfig,
) -> Result<(SummaryStats, Vec<TrialRecord>, Vec<RunResult>)> {
    let master = RandomStream::new(cfg.seed);
    let outcomes: Vec<(TrialRecord, Option<RunResult>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let result = run_one_trial(cfg, t, &master)?;
            let record = record_from_run(cfg, t, &result);
            Ok((record, cfg.save_transcripts.then_some(result)))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::with_capacity(outcomes.len());
    let mut kept_runs = Vec::new();
    for (record, result) in outcomes {
        records.push(record);
        if let Some(result) = result {
            kept_runs.push(result);
        }
    }

    let sum = |f: &dyn Fn(&TrialRecord) -> u64| records.iter().map(f).sum::<u64>();
    let trials = cfg.trials;
    let stats = SummaryStats {
        interval_method: "wilson-95",
        epsilon_r: MetricSummary::from_counts(
            sum(&|r| r.error_count),
            sum(&|r| r.error_samples),
            trials,
        ),
        p_m: MetricSummary::from_counts(sum(&|r| r.flag_count), sum(&|r| r.flag_samples), trials),
        recovery_rate: MetricSummary::from_counts(
            sum(&|r| r.recovered_count),
            sum(&|r| r.carrier_count),
            trials,
        ),
        ambiguity: MetricSummary::from_counts(
            sum(&|r| r.ambiguous_count),
            sum(&|r| r.inference_count),
            trials,
        ),
        detection: MetricSummary::from_counts(sum(&|r| u64::from(r.detected)), trials, trials),
    };
    Ok((stats, records, kept_runs))
}

/// One row of the photon-count sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub photons: usize,
    /// The printed closed form (1/3)(1/2)^n.
    pub pe_paper: f64,
    /// The enumeration oracle for the implemented decision rule.
    pub pe_exact: f64,
    pub monte_carlo: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub misclassified: u64,
    pub trials: u64,
}

/// Single-pulse inference experiments across photon counts.
///
/// Each trial prepares one n-photon pulse in a random state, encrypts it with
/// a random three-set operation, measures every photon through the splitter
/// tree, and asks whether the classifier named the wrong operation. The
/// Monte Carlo column is checked against the enumeration oracle by the
/// acceptance suite.
pub fn sweep_photon_count(n_values: &[usize], trials: u64, seed: u64) -> Result<Vec<SweepRow>> {
    if n_values.is_empty() {
        return Err(crate::SimError::InvalidArgument(
            "sweep needs at least one photon count".into(),
        ));
    }
    let master = RandomStream::new(seed);
    let mut rows = Vec::with_capacity(n_values.len());
    for (n_idx, &n) in n_values.iter().enumerate() {
        if n == 0 {
            return Err(crate::SimError::InvalidArgument(
                "photon counts must be at least 1".into(),
            ));
        }
        let stream = master.child(n_idx as u64);
        let misclassified: u64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream.child(t);
                let label = StateLabel::random(&mut rng);
                let ops = OpSet::ThreeOp.ops();
                let op = ops[rng.next_index(ops.len())];
                let mut signal = make_signal(state_of(label), n, 0)?;
                for photon in &mut signal.photons {
                    *photon = apply(op, photon);
                }
                let (guess, _) = trojan_infer(
                    signal,
                    label,
                    OpSet::ThreeOp,
                    false,
                    default_tree_depth(n),
                    &mut rng,
                )?;
                Ok(u64::from(guess.guessed_op != op))
            })
            .try_reduce(|| 0, |a, b| Ok(a + b))?;
        let (lo, hi) = wilson_interval(misclassified, trials);
        rows.push(SweepRow {
            photons: n,
            pe_paper: crate::attack::pe_paper(n as u32),
            pe_exact: crate::attack::pe_exact(n, OpSet::ThreeOp, n)?,
            monte_carlo: misclassified as f64 / trials as f64,
            wilson_low: lo,
            wilson_high: hi,
            misclassified,
            trials,
        });
    }
    Ok(rows)
}

/// One row of the detection-curve table.
#[derive(Debug, Clone, Serialize)]
pub struct DetectRow {
    pub photons: usize,
    pub pns_depth: u32,
    pub runs: u64,
    pub sampled: u64,
    pub flag_rate: f64,
    /// Closed-form bunching flag probability 1 − L^(1−n).
    pub flag_theory: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub abort_rate: f64,
}

/// Improved-protocol detection statistics across Trojan pulse sizes.
pub fn detect_curves(
    cfg: &ExperimentConfig,
    n_values: &[usize],
) -> Result<Vec<DetectRow>> {
    if n_values.is_empty() {
        return Err(crate::SimError::InvalidArgument(
            "detect needs at least one photon count".into(),
        ));
    }
    let master = RandomStream::new(cfg.seed);
    let mut rows = Vec::with_capacity(n_values.len());
    for (n_idx, &n) in n_values.iter().enumerate() {
        let mut variant = cfg.clone();
        variant.protocol = ProtocolKind::Improved;
        variant.photons = n;
        variant.attack = if n >= 2 {
            crate::harness::config::AttackKind::Trojan
        } else {
            crate::harness::config::AttackKind::None
        };
        let stream = master.child(n_idx as u64);
        let per_run: Vec<(u64, u64, bool)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream.child(t);
                let message = SecretMessage::random(variant.msg_len, &mut rng);
                let pcfg = variant.protocol_config(message);
                let result = run_improved(&pcfg, variant.attack_strategy(), &mut rng)?;
                let (flags, samples) = match &result.charlie_check {
                    Some(check) => (
                        (check.multiphoton_rate * check.samples_used as f64).round() as u64,
                        check.samples_used as u64,
                    ),
                    None => (0, 0),
                };
                Ok((flags, samples, result.aborted()))
            })
            .collect::<Result<_>>()?;
        let flags: u64 = per_run.iter().map(|r| r.0).sum();
        let sampled: u64 = per_run.iter().map(|r| r.1).sum();
        let aborts: u64 = per_run.iter().map(|r| u64::from(r.2)).sum();
        let (lo, hi) = wilson_interval(flags, sampled);
        rows.push(DetectRow {
            photons: n,
            pns_depth: cfg.pns_depth,
            runs: cfg.trials,
            sampled,
            flag_rate: if sampled == 0 { 0.0 } else { flags as f64 / sampled as f64 },
            flag_theory: bunching_flag_probability(n, cfg.pns_depth),
            wilson_low: lo,
            wilson_high: hi,
            abort_rate: aborts as f64 / cfg.trials as f64,
        });
    }
    Ok(rows)
}

/// Build an `AttackStrategy` for tests and bindings without a full config.
pub fn quick_attack(kind: &str, photons: usize) -> AttackStrategy {
    match kind {
        "trojan" => AttackStrategy::TrojanBob {
            n_photons: photons,
            forward_one: true,
            tree_depth: default_tree_depth(photons),
        },
        "eve" => AttackStrategy::InterceptResendEve {
            segment: crate::attack::EveSegment::CharlieToAlice,
        },
        _ => AttackStrategy::None,
    }
}
