//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).

use std::process::Command;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use mqss_core::attack::{pe_exact, pe_paper, AttackStrategy, EveSegment};
use mqss_core::harness::config::AttackKind;
use mqss_core::harness::{run_trials, sweep_photon_count, ExperimentConfig, ProtocolKind};
use mqss_core::protocol::{
    run_improved, run_original, OpSet, ProtocolConfig, SecretMessage, Verdict,
};
use mqss_core::qubit::{
    apply, fidelity, gate_matrix, prob_of, state_of, Basis, GateOp, PureState, StateLabel,
};
use mqss_core::RandomStream;

fn binomial_sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Photon-count sweep: Monte Carlo matches the enumeration oracle at 3 sigma
/// for every n, the printed formula column reproduces its quoted values, and
/// a million trials per count stay under the time budget.
#[test]
fn criterion_1_pe_sweep() {
    let counts = [2usize, 4, 6, 8, 10];
    let trials = 1_000_000u64;
    let start = Instant::now();
    let rows = sweep_photon_count(&counts, trials, 20250810).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "sweep took {elapsed:.1}s, budget is 60s");

    for row in &rows {
        let oracle = pe_exact(row.photons, OpSet::ThreeOp, row.photons).unwrap();
        assert_eq!(row.pe_exact, oracle);
        let tol = 3.0 * binomial_sigma(oracle, trials);
        assert!(
            (row.monte_carlo - oracle).abs() <= tol,
            "n={}: monte carlo {} vs oracle {} (3 sigma = {tol})",
            row.photons,
            row.monte_carlo,
            oracle
        );
        // The formula column halves the enumerated rate: both are reported.
        assert!((row.pe_paper - oracle / 2.0).abs() < 1e-15);
    }
    assert!((pe_paper(4) - 1.0 / 48.0).abs() < 1e-15);
    assert_eq!(format!("{:.1}%", 100.0 * pe_paper(4)), "2.1%");
    assert_eq!(format!("{:.2e}", pe_paper(10)), "3.26e-4");
    assert!((pe_exact(4, OpSet::ThreeOp, 4).unwrap() - 1.0 / 24.0).abs() < 1e-12);

    println!(
        "criterion 1 PASS: 5x{trials} sweep trials in {elapsed:.1}s, all counts within 3 sigma of the enumeration oracle"
    );
}

/// The multi-photon attack with one forwarded photon is invisible to Alice's
/// check and reads at least 95% of the message.
#[test]
fn criterion_2_attack_invisibility() {
    let cfg = ExperimentConfig {
        protocol: ProtocolKind::Original,
        attack: AttackKind::Trojan,
        photons: 4,
        forward_one: true,
        signals: 200,
        trials: 1000,
        msg_len: 64,
        seed: 60602,
        ..ExperimentConfig::default()
    };
    let (stats, records, _) = run_trials(&cfg).unwrap();
    for r in &records {
        assert_eq!(r.epsilon_r, 0.0, "trial {}: Alice saw an error", r.trial);
    }
    let recovery = stats.recovery_rate.mean;
    assert!(recovery >= 0.95, "mean recovery {recovery}");

    println!(
        "criterion 2 PASS: 1000 runs, Alice's error rate exactly 0 in every run, mean recovery {recovery:.4}"
    );
}

/// The improved protocol's splitter check flags four-photon pulses at the
/// enumerated bunching rate and aborts every attacked run; honest
/// single-photon runs never flag.
#[test]
fn criterion_3_defense_detection() {
    let cfg = ExperimentConfig {
        protocol: ProtocolKind::Improved,
        attack: AttackKind::Trojan,
        photons: 4,
        pns_depth: 1,
        signals: 400, // 100 sampled pulses per run
        trials: 1000,
        msg_len: 16,
        seed: 60603,
        ..ExperimentConfig::default()
    };
    let (stats, records, _) = run_trials(&cfg).unwrap();
    for r in &records {
        assert_eq!(r.verdict, "abort_multiphoton", "trial {}", r.trial);
        assert_eq!(r.flag_samples, 100);
    }
    let total = stats.p_m.total;
    assert!(total >= 10_000, "pooled samples {total}");
    let expect = 7.0 / 8.0;
    let tol = 3.0 * binomial_sigma(expect, total);
    assert!(
        (stats.p_m.mean - expect).abs() <= tol,
        "flag rate {} vs 7/8 (3 sigma = {tol})",
        stats.p_m.mean
    );

    // Degenerate control: honest single photons never double-fire.
    let honest = ExperimentConfig {
        protocol: ProtocolKind::Improved,
        attack: AttackKind::None,
        signals: 400,
        trials: 100,
        msg_len: 16,
        seed: 60604,
        ..ExperimentConfig::default()
    };
    let (_, honest_records, _) = run_trials(&honest).unwrap();
    for r in &honest_records {
        assert_eq!(r.p_m, 0.0, "trial {}: honest pulse flagged", r.trial);
        assert_eq!(r.verdict, "pass");
    }

    println!(
        "criterion 3 PASS: flag rate {:.4} vs 7/8 over {total} sampled pulses, 1000/1000 aborts, honest control at exactly 0",
        stats.p_m.mean
    );
}

/// Intercept-resend by an outsider disturbs a quarter of the checked samples
/// in both protocols, and with 50 checked samples and a zero tolerance the
/// abort fires in every run.
#[test]
fn criterion_4_outsider_detection() {
    // Part A: pooled error rate vs the enumerated 1/4, both protocols.
    for (protocol, signals, trials, seed) in [
        (ProtocolKind::Original, 400usize, 100u64, 60605u64),
        (ProtocolKind::Improved, 400, 104, 60606),
    ] {
        let cfg = ExperimentConfig {
            protocol,
            attack: AttackKind::Eve,
            eve_segment: EveSegment::CharlieToAlice,
            signals,
            trials,
            msg_len: 16,
            seed,
            ..ExperimentConfig::default()
        };
        let (stats, _, _) = run_trials(&cfg).unwrap();
        let total = stats.epsilon_r.total;
        assert!(total >= 10_000, "{protocol:?}: pooled samples {total}");
        let tol = 3.0 * binomial_sigma(0.25, total);
        assert!(
            (stats.epsilon_r.mean - 0.25).abs() <= tol,
            "{protocol:?}: error rate {} vs 0.25 (3 sigma = {tol})",
            stats.epsilon_r.mean
        );
    }

    // Part B: k = 50 checked samples, abort on any error.
    let cfg = ExperimentConfig {
        protocol: ProtocolKind::Original,
        attack: AttackKind::Eve,
        eve_segment: EveSegment::CharlieToAlice,
        signals: 200, // 50 checked samples per run
        trials: 1000,
        msg_len: 16,
        seed: 60607,
        error_threshold: 0.0,
        ..ExperimentConfig::default()
    };
    let (stats, records, _) = run_trials(&cfg).unwrap();
    for r in &records {
        assert_eq!(r.error_samples, 50);
        assert_eq!(r.verdict, "abort_error_rate", "trial {}", r.trial);
    }
    let bound = 1.0 - 0.75f64.powi(50);
    assert!(stats.detection.mean >= bound);

    println!(
        "criterion 4 PASS: pooled error rate 0.25 within 3 sigma on both protocols; 1000/1000 aborts at k=50 (bound {bound:.8})"
    );
}

/// Honest runs decode the boss's message bit-exactly with zero error and
/// zero multi-photon rates, in both protocols.
#[test]
fn criterion_5_honest_completeness() {
    let run_one = |protocol: ProtocolKind, t: u64, master: &RandomStream| {
        let mut rng = master.child(t);
        let msg = SecretMessage::random(64, &mut rng);
        let result = match protocol {
            ProtocolKind::Original => {
                let mut cfg = ProtocolConfig::original(msg.clone());
                cfg.num_signals = 256;
                run_original(&cfg, AttackStrategy::None, &mut rng).unwrap()
            }
            ProtocolKind::Improved => {
                let mut cfg = ProtocolConfig::improved(msg.clone());
                cfg.num_signals = 256;
                cfg.decoys_enabled = true;
                cfg.decoy_fraction = 0.15;
                run_improved(&cfg, AttackStrategy::None, &mut rng).unwrap()
            }
        };
        assert_eq!(result.verdict(), Verdict::Pass, "trial {t}");
        assert_eq!(result.decoded.as_ref(), Some(&msg), "trial {t}: decode mismatch");
        if let Some(check) = &result.charlie_check {
            assert_eq!(check.error_rate, 0.0);
            assert_eq!(check.multiphoton_rate, 0.0);
        }
        assert_eq!(result.alice_check.unwrap().error_rate, 0.0);
        assert_eq!(result.final_check.unwrap().error_rate, 0.0);
        if let Some(check) = &result.decoy_check {
            assert_eq!(check.error_rate, 0.0);
        }
    };

    let master_original = RandomStream::new(60608);
    (0..1000u64)
        .into_par_iter()
        .for_each(|t| run_one(ProtocolKind::Original, t, &master_original));
    let master_improved = RandomStream::new(60609);
    (0..1000u64)
        .into_par_iter()
        .for_each(|t| run_one(ProtocolKind::Improved, t, &master_improved));

    println!("criterion 5 PASS: 1000+1000 honest runs decoded bit-exactly with zero error and multi-photon rates");
}

/// Algebraic identities at 1e-12: unitarity, the double-basis flip, both
/// basis exchanges, and Born normalization over a thousand random states.
#[test]
fn criterion_6_algebraic_suite() {
    for gate in GateOp::ALL {
        let m = gate_matrix(gate);
        for row in 0..2 {
            for col in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for m_row in &m {
                    acc += m_row[row].conj() * m_row[col];
                }
                let expect = if row == col { 1.0 } else { 0.0 };
                assert!(
                    (acc - Complex64::new(expect, 0.0)).norm() <= 1e-12,
                    "{gate:?} fails unitarity"
                );
            }
        }
    }

    for label in StateLabel::ALL {
        let flipped = apply(GateOp::U, &state_of(label));
        let p = prob_of(&flipped, label.basis_of(), 1 - label.bit_of());
        assert!((p - 1.0).abs() <= 1e-12, "{label:?}: U flip probability {p}");
    }

    for label in [StateLabel::Zero, StateLabel::One] {
        let h = apply(GateOp::H, &state_of(label));
        assert!((fidelity(&h, &Basis::X.eigenstate(label.bit_of())) - 1.0).abs() <= 1e-12);
        let hbar = apply(GateOp::Hbar, &state_of(label));
        assert!((fidelity(&hbar, &Basis::X.eigenstate(1 - label.bit_of())) - 1.0).abs() <= 1e-12);
    }
    for label in [StateLabel::U, StateLabel::D] {
        let h = apply(GateOp::H, &state_of(label));
        assert!((fidelity(&h, &Basis::Z.eigenstate(label.bit_of())) - 1.0).abs() <= 1e-12);
    }

    let mut rng = RandomStream::new(60610);
    for _ in 0..1000 {
        let theta = rng.next_f64() * std::f64::consts::PI;
        let phi = rng.next_f64() * 2.0 * std::f64::consts::PI;
        let state = PureState::new(
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        )
        .unwrap();
        for basis in [Basis::Z, Basis::X] {
            let total = prob_of(&state, basis, 0) + prob_of(&state, basis, 1);
            assert!((total - 1.0).abs() <= 1e-12);
        }
    }

    println!("criterion 6 PASS: unitarity, flip, basis exchange and Born normalization all hold at 1e-12");
}

/// Identical configurations produce byte-identical reports.
#[test]
fn criterion_7_reproducibility() {
    let exe = env!("CARGO_BIN_EXE_mqss");
    let dir = tempfile::tempdir().unwrap();

    let run_report = dir.path().join("run.json");
    let run_args = |out: &std::path::Path| {
        vec![
            "run".to_string(),
            "--protocol".into(),
            "original".into(),
            "--attack".into(),
            "trojan".into(),
            "--photons".into(),
            "4".into(),
            "--signals".into(),
            "200".into(),
            "--trials".into(),
            "50".into(),
            "--seed".into(),
            "777".into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let status = Command::new(exe).args(run_args(&run_report)).status().unwrap();
    assert!(status.success());
    let first = std::fs::read(&run_report).unwrap();
    let status = Command::new(exe).args(run_args(&run_report)).status().unwrap();
    assert!(status.success());
    let second = std::fs::read(&run_report).unwrap();
    assert_eq!(first, second, "run reports differ between executions");

    let sweep_report = dir.path().join("sweep.csv");
    let sweep_args = |seed: &str| {
        vec![
            "sweep".to_string(),
            "--photon-counts".into(),
            "2,4".into(),
            "--trials".into(),
            "20000".into(),
            "--seed".into(),
            seed.to_string(),
            "--format".into(),
            "csv".into(),
            "--out".into(),
            sweep_report.display().to_string(),
        ]
    };
    let status = Command::new(exe).args(sweep_args("5")).status().unwrap();
    assert!(status.success());
    let first = std::fs::read(&sweep_report).unwrap();
    let status = Command::new(exe).args(sweep_args("5")).status().unwrap();
    assert!(status.success());
    let second = std::fs::read(&sweep_report).unwrap();
    assert_eq!(first, second, "sweep reports differ between executions");

    let status = Command::new(exe).args(sweep_args("6")).status().unwrap();
    assert!(status.success());
    let different = std::fs::read(&sweep_report).unwrap();
    assert_ne!(first, different, "different seeds should change the report");

    println!("criterion 7 PASS: repeated executions are byte-identical; changing the seed changes the report");
}
