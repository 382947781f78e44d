//! Adversary strategies.
//!
//! The dishonest signal preparer Bob can replace each single-photon pulse
//! with an N-photon one, keep N−1 copies while forwarding one, read Charlie's
//! encryption operation off the copies with a splitter tree and detectors,
//! and then intercept the encoded photons on their way back in the eigenbasis
//! he now knows — stealing the message without touching the error rate.
//!
//! An outside eavesdropper has no such foothold: intercept-resend in a random
//! basis disturbs a quarter of the checked samples.

use serde::{Deserialize, Serialize};

use crate::photonics::{split_tree, PhotonSignal};
use crate::protocol::{basis_after, expected_bit, OpSet};
use crate::qubit::{apply, measure, prob_of, state_of, Basis, GateOp, PureState, StateLabel};
use crate::rng::RandomStream;
use crate::{Result, SimError};

/// Which channel hop an outside intercept-resend eavesdropper taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EveSegment {
    BobToCharlie,
    CharlieToAlice,
    AliceToCharlie,
}

/// The adversary model for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AttackStrategy {
    /// All parties honest.
    None,
    /// Bob prepares `n_photons` identical photons per pulse. With
    /// `forward_one` he measures all but one and forwards the last untouched;
    /// otherwise he measures everything and resends a reconstruction.
    /// `n_photons = 1` degenerates to honest behaviour.
    TrojanBob {
        n_photons: usize,
        forward_one: bool,
        tree_depth: u32,
    },
    /// Outside eavesdropper measuring every photon of one hop in a random
    /// basis and forwarding the collapsed state.
    InterceptResendEve { segment: EveSegment },
}

impl AttackStrategy {
    pub fn trojan(n_photons: usize) -> Self {
        AttackStrategy::TrojanBob {
            n_photons,
            forward_one: true,
            tree_depth: default_tree_depth(n_photons),
        }
    }
}

/// ⌈log2(n)⌉: the splitter-tree depth that gives every photon of an n-photon
/// pulse its own detector leaf on average.
pub fn default_tree_depth(n: usize) -> u32 {
    match n {
        0 | 1 => 0,
        _ => {
            let floor = n.ilog2();
            if n.is_power_of_two() {
                floor
            } else {
                floor + 1
            }
        }
    }
}

/// Bob's raw read of one pulse: the classified operation and the detector
/// pattern it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TrojanGuess {
    pub guessed_op: GateOp,
    pub outcome_pattern: Vec<(Basis, u8)>,
}

/// A graded inference for one pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub guessed_op: GateOp,
    pub correct: bool,
    /// True when a basis-exchanging operation produced a detector pattern
    /// indistinguishable from a basis-preserving one (the unanimity event),
    /// so the classifier picked the wrong operation.
    pub ambiguous: bool,
    pub outcome_pattern: Vec<(Basis, u8)>,
}

/// What the attacker walked away with after one full run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub inferences: Vec<InferenceResult>,
    /// Bob's reconstruction of the message bits, aligned with the carriers.
    pub recovered_bits: Option<Vec<u8>>,
    /// Fraction of the boss's message bits the attacker read correctly.
    pub recovery_rate: f64,
    /// Whether the run aborted while this attack was active.
    pub detected: bool,
}

/// Replaces one honest pulse with `n` identical photons in the labelled state.
pub fn trojan_prepare(label: StateLabel, n: usize, origin_index: usize) -> Result<PhotonSignal> {
    if n < 2 {
        return Err(SimError::InvalidArgument(format!(
            "a Trojan pulse needs at least 2 photons, got {n}"
        )));
    }
    crate::photonics::make_signal(state_of(label), n, origin_index)
}

/// Measurement bases for `m` detector slots.
///
/// With three candidate operations every slot measures in the preparation
/// basis. With four, the first ⌈m/2⌉ slots stay in the preparation basis and
/// the rest take the conjugate one, so both the {I, U} and the {H, H̄} class
/// leave a deterministic block.
pub fn measurement_bases(label: StateLabel, op_set: OpSet, m: usize) -> Vec<Basis> {
    let own = label.basis_of();
    match op_set {
        OpSet::ThreeOp => vec![own; m],
        OpSet::FourOp => {
            let k = m.div_ceil(2);
            let mut bases = vec![own; k];
            bases.extend(std::iter::repeat_n(own.conjugate(), m - k));
            bases
        }
    }
}

/// The decision rule mapping a detector pattern to a guessed operation.
///
/// Three-operation rule: a unanimous pattern equal to the prepared bit means
/// I, unanimously flipped means U, anything mixed means H. Unanimity is what
/// a basis-exchanged pulse produces with probability 2^(1−m), which is
/// exactly the attacker's misclassification event.
///
/// Four-operation rule: whichever basis block is unanimous names the class
/// ({I, U} for the preparation basis, {H, H̄} for the conjugate), and the
/// unanimous bit picks the member; the preparation-basis block wins ties.
pub fn classify_pattern(pattern: &[(Basis, u8)], label: StateLabel, op_set: OpSet) -> GateOp {
    let b = label.bit_of();
    let own = label.basis_of();
    match op_set {
        OpSet::ThreeOp => {
            if pattern.iter().all(|&(_, bit)| bit == b) {
                GateOp::I
            } else if pattern.iter().all(|&(_, bit)| bit == 1 - b) {
                GateOp::U
            } else {
                GateOp::H
            }
        }
        OpSet::FourOp => {
            let block = |basis: Basis| -> Option<u8> {
                let mut bits = pattern.iter().filter(|&&(bb, _)| bb == basis).map(|&(_, bit)| bit);
                let first = bits.next()?;
                bits.all(|x| x == first).then_some(first)
            };
            let own_unanimous = block(own);
            let conj_unanimous = block(own.conjugate());
            match (own_unanimous, conj_unanimous) {
                // Preparation-basis unanimity wins ties.
                (Some(v), _) => {
                    if v == b {
                        GateOp::I
                    } else {
                        GateOp::U
                    }
                }
                (None, Some(v)) => {
                    if v == b {
                        GateOp::H
                    } else {
                        GateOp::Hbar
                    }
                }
                // Unreachable when all photons carry one operation from the
                // set; kept as a total fallback.
                (None, None) => GateOp::H,
            }
        }
    }
}

/// Splits a post-encryption pulse through Bob's detector tree and classifies
/// Charlie's operation.
///
/// With `forward_one` the first photon is set aside untouched and returned
/// for forwarding; everything else is measured. The splitter tree does not
/// change any state, it only models the detector fan-out.
pub fn trojan_infer(
    signal: PhotonSignal,
    label: StateLabel,
    op_set: OpSet,
    forward_one: bool,
    tree_depth: u32,
    rng: &mut RandomStream,
) -> Result<(TrojanGuess, Option<PhotonSignal>)> {
    let origin = signal.origin_index;
    let mut photons = signal.photons;
    let forwarded = if forward_one {
        if photons.len() < 2 {
            return Err(SimError::InvalidArgument(
                "forwarding one photon leaves nothing to measure".into(),
            ));
        }
        let kept = photons.remove(0);
        Some(PhotonSignal {
            photons: vec![kept],
            origin_index: origin,
        })
    } else if photons.is_empty() {
        return Err(SimError::InvalidArgument("no photons to measure".into()));
    } else {
        None
    };

    let leaves = split_tree(
        PhotonSignal {
            photons,
            origin_index: origin,
        },
        tree_depth,
        rng,
    );
    let measured: Vec<PureState> = leaves.into_iter().flat_map(|l| l.photons).collect();
    let bases = measurement_bases(label, op_set, measured.len());
    let outcome_pattern: Vec<(Basis, u8)> = measured
        .iter()
        .zip(&bases)
        .map(|(photon, &basis)| (basis, measure(photon, basis, rng).0))
        .collect();
    let guessed_op = classify_pattern(&outcome_pattern, label, op_set);
    Ok((TrojanGuess { guessed_op, outcome_pattern }, forwarded))
}

/// Grades a guess against the operation Charlie actually applied.
pub fn grade_inference(guess: &TrojanGuess, true_op: GateOp) -> InferenceResult {
    let correct = guess.guessed_op == true_op;
    InferenceResult {
        guessed_op: guess.guessed_op,
        correct,
        ambiguous: !correct && matches!(true_op, GateOp::H | GateOp::Hbar),
        outcome_pattern: guess.outcome_pattern.clone(),
    }
}

/// Bob's tap on an encoded photon travelling back to Charlie.
///
/// He measures in the basis his inferred operation predicts, reads the
/// encoded bit as "did the outcome differ from the no-op expectation", and
/// forwards the collapsed state. When the inference was right this is an
/// eigenbasis measurement: full information, zero disturbance.
pub fn final_intercept(
    photon: &PureState,
    label: StateLabel,
    inferred_op: GateOp,
    rng: &mut RandomStream,
) -> (u8, PureState) {
    let basis = basis_after(label, inferred_op);
    let (bit, collapsed) = measure(photon, basis, rng);
    let stolen = u8::from(bit != expected_bit(label, inferred_op, GateOp::I));
    (stolen, collapsed)
}

/// Intercept-resend by an outsider: measure in a uniformly random basis,
/// forward the collapsed eigenstate.
pub fn eve_intercept_resend(photon: &PureState, rng: &mut RandomStream) -> (PureState, u8, Basis) {
    let basis = if rng.next_bit() == 0 { Basis::Z } else { Basis::X };
    let (bit, collapsed) = measure(photon, basis, rng);
    (collapsed, bit, basis)
}

/// The printed closed form for the attacker's failure probability with an
/// n-photon pulse under three operations: (1/3)·(1/2)^n.
pub fn pe_paper(n: u32) -> f64 {
    (1.0 / 3.0) * 0.5f64.powi(n as i32)
}

/// Exact misclassification probability of the detector decision rule,
/// computed by exhaustive enumeration — not from a closed form.
///
/// Enumerates Charlie's operation (uniform over the set) and every detector
/// pattern of `measured_photons` outcomes, weighting each pattern with its
/// Born-rule probability, and accumulates the mass where the classifier
/// names the wrong operation. For the three-operation rule this comes out
/// to (1/3)·2^(1−m); the four-operation split-basis rule gives
/// (1/2)·2^(1−⌈m/2⌉).
pub fn pe_exact(n: usize, op_set: OpSet, measured_photons: usize) -> Result<f64> {
    if measured_photons == 0 {
        return Err(SimError::InvalidArgument(
            "need at least one measured photon".into(),
        ));
    }
    if n == 0 || measured_photons > n {
        return Err(SimError::InvalidArgument(format!(
            "cannot measure {measured_photons} photons out of {n}"
        )));
    }
    let ops = op_set.ops();
    let mut total = 0.0;
    for label in StateLabel::ALL {
        let bases = measurement_bases(label, op_set, measured_photons);
        for &op in ops {
            let transformed = apply(op, &state_of(label));
            let mut err_mass = 0.0;
            for mask in 0u64..(1u64 << measured_photons) {
                let pattern: Vec<(Basis, u8)> = bases
                    .iter()
                    .enumerate()
                    .map(|(i, &basis)| (basis, ((mask >> i) & 1) as u8))
                    .collect();
                let mut weight = 1.0;
                for &(basis, bit) in &pattern {
                    weight *= prob_of(&transformed, basis, bit);
                    if weight == 0.0 {
                        break;
                    }
                }
                if weight == 0.0 {
                    continue;
                }
                if classify_pattern(&pattern, label, op_set) != op {
                    err_mass += weight;
                }
            }
            total += err_mass / ops.len() as f64;
        }
    }
    Ok(total / StateLabel::ALL.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photonics::make_signal;
    use crate::qubit::fidelity;

    #[test]
    fn trojan_prepare_replicates_the_labelled_state() {
        let sig = trojan_prepare(StateLabel::Zero, 4, 0).unwrap();
        assert_eq!(sig.len(), 4);
        for p in &sig.photons {
            assert!((fidelity(p, &state_of(StateLabel::Zero)) - 1.0).abs() < 1e-12);
        }
        assert_eq!(trojan_prepare(StateLabel::D, 10, 1).unwrap().len(), 10);
        assert_eq!(trojan_prepare(StateLabel::One, 2, 2).unwrap().len(), 2);
        assert!(trojan_prepare(StateLabel::Zero, 1, 0).is_err());
    }

    #[test]
    fn default_tree_depth_covers_the_pulse() {
        assert_eq!(default_tree_depth(2), 1);
        assert_eq!(default_tree_depth(4), 2);
        assert_eq!(default_tree_depth(5), 3);
        assert_eq!(default_tree_depth(10), 4);
    }

    fn infer_once(
        label: StateLabel,
        op: GateOp,
        n: usize,
        op_set: OpSet,
        rng: &mut RandomStream,
    ) -> TrojanGuess {
        let mut sig = make_signal(state_of(label), n, 0).unwrap();
        for p in sig.photons.iter_mut() {
            *p = apply(op, p);
        }
        let (guess, forwarded) =
            trojan_infer(sig, label, op_set, false, default_tree_depth(n), rng).unwrap();
        assert!(forwarded.is_none());
        guess
    }

    #[test]
    fn basis_preserving_ops_are_read_with_certainty() {
        let mut rng = RandomStream::new(8);
        // Charlie applied U to |0⟩ photons: all four detectors read 1.
        let guess = infer_once(StateLabel::Zero, GateOp::U, 4, OpSet::ThreeOp, &mut rng);
        assert_eq!(guess.guessed_op, GateOp::U);
        assert!(guess.outcome_pattern.iter().all(|&(b, bit)| b == Basis::Z && bit == 1));
        let graded = grade_inference(&guess, GateOp::U);
        assert!(graded.correct && !graded.ambiguous);

        let guess = infer_once(StateLabel::Zero, GateOp::I, 2, OpSet::ThreeOp, &mut rng);
        assert_eq!(guess.guessed_op, GateOp::I);
    }

    #[test]
    fn forward_one_sets_aside_an_untouched_photon() {
        let mut rng = RandomStream::new(9);
        let mut sig = trojan_prepare(StateLabel::Zero, 4, 3).unwrap();
        for p in sig.photons.iter_mut() {
            *p = apply(GateOp::H, p);
        }
        let (_, forwarded) =
            trojan_infer(sig, StateLabel::Zero, OpSet::ThreeOp, true, 2, &mut rng).unwrap();
        let fwd = forwarded.unwrap();
        assert_eq!(fwd.len(), 1);
        assert_eq!(fwd.origin_index, 3);
        assert!((fidelity(&fwd.photons[0], &state_of(StateLabel::U)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forward_one_needs_two_photons() {
        let mut rng = RandomStream::new(9);
        let sig = make_signal(state_of(StateLabel::Zero), 1, 0).unwrap();
        assert!(trojan_infer(sig, StateLabel::Zero, OpSet::ThreeOp, true, 1, &mut rng).is_err());
    }

    #[test]
    fn hadamard_unanimity_rate_matches_enumeration_not_the_printed_value() {
        // Enumeration over 2^4 patterns: both all-0 and all-1 fool the
        // classifier, so the rate is 2/16 = 1/8 (the printed account keeps
        // only one of them, giving 1/16).
        let trials = 100_000u32;
        let mut rng = RandomStream::new(404);
        let mut fooled = 0u32;
        for _ in 0..trials {
            let guess = infer_once(StateLabel::Zero, GateOp::H, 4, OpSet::ThreeOp, &mut rng);
            if guess.guessed_op != GateOp::H {
                fooled += 1;
            }
        }
        let freq = f64::from(fooled) / f64::from(trials);
        let expect = 0.125;
        let sigma = (expect * (1.0 - expect) / f64::from(trials)).sqrt();
        assert!((freq - expect).abs() <= 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn pe_paper_reproduces_printed_values() {
        assert!((pe_paper(4) - 1.0 / 48.0).abs() < 1e-15);
        assert_eq!(format!("{:.2e}", pe_paper(10)), "3.26e-4");
        assert!((pe_paper(1) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn pe_exact_three_op_values() {
        assert!((pe_exact(4, OpSet::ThreeOp, 4).unwrap() - 1.0 / 24.0).abs() < 1e-12);
        assert!((pe_exact(1, OpSet::ThreeOp, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let p10 = pe_exact(10, OpSet::ThreeOp, 10).unwrap();
        assert!((p10 - (1.0 / 3.0) * 0.5f64.powi(9)).abs() < 1e-12);
        // Bob measuring N−1 of N photons.
        assert!((pe_exact(4, OpSet::ThreeOp, 3).unwrap() - 1.0 / 12.0).abs() < 1e-12);
        assert!(pe_exact(4, OpSet::ThreeOp, 0).is_err());
        assert!(pe_exact(2, OpSet::ThreeOp, 3).is_err());
    }

    #[test]
    fn pe_exact_four_op_matches_split_basis_combinatorics() {
        for m in 1..=8usize {
            let k = m.div_ceil(2);
            let expect = 0.5 * 2.0f64.powi(1 - k as i32);
            let got = pe_exact(m.max(2), OpSet::FourOp, m).unwrap();
            assert!((got - expect).abs() < 1e-12, "m={m}: {got} vs {expect}");
        }
    }

    #[test]
    fn monte_carlo_misclassification_tracks_pe_exact() {
        let trials = 100_000u32;
        for (n, seed) in [(2usize, 11u64), (4, 12), (10, 13)] {
            let oracle = pe_exact(n, OpSet::ThreeOp, n).unwrap();
            let mut rng = RandomStream::new(seed);
            let mut wrong = 0u32;
            for _ in 0..trials {
                let label = StateLabel::random(&mut rng);
                let op = [GateOp::I, GateOp::U, GateOp::H][rng.next_index(3)];
                let guess = infer_once(label, op, n, OpSet::ThreeOp, &mut rng);
                if guess.guessed_op != op {
                    wrong += 1;
                }
            }
            let freq = f64::from(wrong) / f64::from(trials);
            let sigma = (oracle * (1.0 - oracle) / f64::from(trials)).sqrt();
            assert!(
                (freq - oracle).abs() <= 3.0 * sigma,
                "n={n}: freq {freq} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn four_op_monte_carlo_tracks_enumeration() {
        let trials = 100_000u32;
        let n = 4usize;
        let oracle = pe_exact(n, OpSet::FourOp, n).unwrap();
        let mut rng = RandomStream::new(21);
        let mut wrong = 0u32;
        for _ in 0..trials {
            let label = StateLabel::random(&mut rng);
            let op = OpSet::FourOp.ops()[rng.next_index(4)];
            let guess = infer_once(label, op, n, OpSet::FourOp, &mut rng);
            if guess.guessed_op != op {
                wrong += 1;
            }
        }
        let freq = f64::from(wrong) / f64::from(trials);
        let sigma = (oracle * (1.0 - oracle) / f64::from(trials)).sqrt();
        assert!((freq - oracle).abs() <= 3.0 * sigma, "freq {freq} vs {oracle}");
    }

    #[test]
    fn correct_inference_steals_every_bit_invisibly() {
        // Exhaustive over 4 labels × 3 operations × 2 encoded bits.
        let mut rng = RandomStream::new(55);
        for label in StateLabel::ALL {
            for op in [GateOp::I, GateOp::U, GateOp::H] {
                for alice_op in [GateOp::I, GateOp::U] {
                    let photon = apply(alice_op, &apply(op, &state_of(label)));
                    let (stolen, resent) = final_intercept(&photon, label, op, &mut rng);
                    assert_eq!(stolen, u8::from(alice_op == GateOp::U));
                    // Charlie's decode of the resent photon is unperturbed.
                    let basis = basis_after(label, op);
                    let (bit, _) = measure(&resent, basis, &mut rng);
                    assert_eq!(bit != expected_bit(label, op, GateOp::I), alice_op == GateOp::U);
                }
            }
        }
    }

    #[test]
    fn wrong_inference_halves_the_take_and_disturbs_half() {
        // Bob guessed I but Charlie applied H: conjugate-basis interception.
        let trials = 10_000u32;
        let mut rng = RandomStream::new(56);
        let mut stolen_right = 0u32;
        let mut charlie_disturbed = 0u32;
        for _ in 0..trials {
            let alice_op = if rng.next_bit() == 0 { GateOp::I } else { GateOp::U };
            let photon = apply(alice_op, &apply(GateOp::H, &state_of(StateLabel::Zero)));
            let (stolen, resent) = final_intercept(&photon, StateLabel::Zero, GateOp::I, &mut rng);
            if stolen == u8::from(alice_op == GateOp::U) {
                stolen_right += 1;
            }
            let basis = basis_after(StateLabel::Zero, GateOp::H);
            let (bit, _) = measure(&resent, basis, &mut rng);
            let decoded_u = bit != expected_bit(StateLabel::Zero, GateOp::H, GateOp::I);
            if decoded_u != (alice_op == GateOp::U) {
                charlie_disturbed += 1;
            }
        }
        let sigma = (0.25 / f64::from(trials)).sqrt();
        let steal_freq = f64::from(stolen_right) / f64::from(trials);
        let disturb_freq = f64::from(charlie_disturbed) / f64::from(trials);
        assert!((steal_freq - 0.5).abs() <= 3.0 * sigma, "steal {steal_freq}");
        assert!((disturb_freq - 0.5).abs() <= 3.0 * sigma, "disturb {disturb_freq}");
    }

    #[test]
    fn intercept_resend_error_rate_is_one_quarter() {
        // Exact enumeration over 4 states × 2 bases × outcomes.
        let mut exact = 0.0;
        for label in StateLabel::ALL {
            for basis in [Basis::Z, Basis::X] {
                for outcome in [0u8, 1u8] {
                    let p_outcome = prob_of(&state_of(label), basis, outcome);
                    let collapsed = basis.eigenstate(outcome);
                    let p_err = prob_of(&collapsed, label.basis_of(), 1 - label.bit_of());
                    exact += p_outcome * p_err / 8.0;
                }
            }
        }
        assert!((exact - 0.25).abs() < 1e-12);

        // Monte Carlo against the enumerated value.
        let trials = 10_000u32;
        let mut rng = RandomStream::new(77);
        let mut errors = 0u32;
        for _ in 0..trials {
            let label = StateLabel::random(&mut rng);
            let (resent, _, _) = eve_intercept_resend(&state_of(label), &mut rng);
            let (bit, _) = measure(&resent, label.basis_of(), &mut rng);
            if bit != label.bit_of() {
                errors += 1;
            }
        }
        let freq = f64::from(errors) / f64::from(trials);
        let sigma = (0.25 * 0.75 / f64::from(trials)).sqrt();
        assert!((freq - 0.25).abs() <= 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn eve_in_the_right_basis_is_invisible() {
        let mut rng = RandomStream::new(78);
        loop {
            let (resent, bit, basis) = eve_intercept_resend(&state_of(StateLabel::Zero), &mut rng);
            if basis == Basis::Z {
                assert_eq!(bit, 0);
                assert!((fidelity(&resent, &state_of(StateLabel::Zero)) - 1.0).abs() < 1e-12);
                break;
            }
            // Conjugate guess: the resent state is an X eigenstate.
            assert!((prob_of(&resent, Basis::X, bit) - 1.0).abs() < 1e-12);
        }
    }
}
