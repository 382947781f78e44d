//! The two protocol state machines.
//!
//! Original flow: Bob prepares a batch of single photons in random
//! preparation states and sends them to Charlie; Charlie encrypts each with a
//! random operation from {I, U, H} and forwards the batch to Alice; Alice
//! checks a sample against the announced states and operations, encodes her
//! message with I/U on the survivors (salting in disclosed random-operation
//! check samples), and returns them; Charlie decodes with Bob's announced
//! states. Neither agent's record alone determines the message.
//!
//! Improved flow adds: Charlie's splitter check on arrival (multi-photon
//! pulses light up several detector leaves), the fourth encryption unitary
//! H̄, Pauli-tagged check samples, and optionally decoy photons Charlie
//! inserts at secret positions before the batch travels to Alice.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::attack::{
    eve_intercept_resend, final_intercept, grade_inference, trojan_infer, trojan_prepare,
    AttackReport, AttackStrategy, EveSegment, TrojanGuess,
};
use crate::photonics::{make_signal, split_tree, transmit, ChannelModel, PhotonSignal};
use crate::qubit::{
    apply, measure, prob_of, state_of, Basis, GateOp, StateLabel, CERTAINTY_TOL,
};
use crate::rng::RandomStream;
use crate::transcript::{
    Announcement, AnnouncementContent, Party, SignalRecord, SignalRole,
};
use crate::{Result, SimError};

/// The boss's secret bit string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecretMessage {
    bits: Vec<u8>,
}

impl SecretMessage {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(SimError::InvalidArgument("message bits must be 0 or 1".into()));
        }
        Ok(Self { bits })
    }

    pub fn random(len: usize, rng: &mut RandomStream) -> Self {
        Self {
            bits: (0..len).map(|_| rng.next_bit()).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// Charlie's encryption repertoire: the original three operations or the
/// extended four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpSet {
    ThreeOp,
    FourOp,
}

impl OpSet {
    pub fn ops(self) -> &'static [GateOp] {
        match self {
            OpSet::ThreeOp => &[GateOp::I, GateOp::U, GateOp::H],
            OpSet::FourOp => &[GateOp::I, GateOp::U, GateOp::H, GateOp::Hbar],
        }
    }
}

/// Everything one run needs besides the adversary and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub num_signals: usize,
    /// Fraction of arriving pulses Charlie feeds to his splitter check
    /// (improved protocol only).
    pub charlie_sample_fraction: f64,
    /// Fraction Alice samples for her check, and the fraction of her encoded
    /// survivors she turns into disclosed check samples.
    pub alice_sample_fraction: f64,
    pub error_threshold: f64,
    pub multiphoton_threshold: f64,
    pub op_set: OpSet,
    pub pns_check_depth: u32,
    pub decoys_enabled: bool,
    /// Decoys inserted per original pulse forwarded to Alice.
    pub decoy_fraction: f64,
    /// Fraction of Charlie's surviving pulses he Pauli-tags (improved only).
    pub sc_fraction: f64,
    pub channel: ChannelModel,
    pub message: SecretMessage,
}

impl ProtocolConfig {
    pub fn original(message: SecretMessage) -> Self {
        Self {
            num_signals: 256,
            charlie_sample_fraction: 0.25,
            alice_sample_fraction: 0.25,
            error_threshold: 0.1,
            multiphoton_threshold: 0.02,
            op_set: OpSet::ThreeOp,
            pns_check_depth: 1,
            decoys_enabled: false,
            decoy_fraction: 0.0,
            sc_fraction: 0.0,
            channel: ChannelModel::noiseless(),
            message,
        }
    }

    pub fn improved(message: SecretMessage) -> Self {
        Self {
            op_set: OpSet::FourOp,
            sc_fraction: 0.1,
            ..Self::original(message)
        }
    }

    /// Deterministic pulse accounting: how many message carriers survive all
    /// sampling stages.
    pub fn carriers_available(&self, improved: bool) -> usize {
        let n = self.num_signals;
        let consumed_by_charlie = if improved {
            (n as f64 * self.charlie_sample_fraction).floor() as usize
        } else {
            0
        };
        let remaining = n - consumed_by_charlie;
        let pauli_tagged = if improved {
            (remaining as f64 * self.sc_fraction).floor() as usize
        } else {
            0
        };
        let eligible = remaining - pauli_tagged;
        let alice_samples = (eligible as f64 * self.alice_sample_fraction).floor() as usize;
        let survivors = eligible - alice_samples;
        let disclosed = (survivors as f64 * self.alice_sample_fraction).floor() as usize;
        survivors - disclosed
    }

    /// Validates every field, returning all problems at once.
    pub fn validate(&self, improved: bool) -> std::result::Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.num_signals == 0 {
            errs.push("num_signals: must be at least 1".into());
        }
        for (name, v) in [
            ("charlie_sample_fraction", self.charlie_sample_fraction),
            ("alice_sample_fraction", self.alice_sample_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                errs.push(format!("{name}: must be strictly between 0 and 1, got {v}"));
            }
        }
        for (name, v) in [
            ("error_threshold", self.error_threshold),
            ("multiphoton_threshold", self.multiphoton_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                errs.push(format!("{name}: must be in [0, 1], got {v}"));
            }
        }
        for (name, v) in [("decoy_fraction", self.decoy_fraction), ("sc_fraction", self.sc_fraction)] {
            if !(0.0..1.0).contains(&v) {
                errs.push(format!("{name}: must be in [0, 1), got {v}"));
            }
        }
        if self.pns_check_depth == 0 {
            errs.push("pns_check_depth: must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.channel.flip_probability) {
            errs.push(format!(
                "flip_probability: must be in [0, 1], got {}",
                self.channel.flip_probability
            ));
        }
        if errs.is_empty() && self.carriers_available(improved) < self.message.len() {
            errs.push(format!(
                "num_signals: {} signals leave {} message carriers after sampling, need {}",
                self.num_signals,
                self.carriers_available(improved),
                self.message.len()
            ));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    AbortErrorRate,
    AbortMultiphoton,
}

/// The outcome of one eavesdropping check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub error_rate: f64,
    pub multiphoton_rate: f64,
    /// Pulses examined by this check.
    pub samples_used: usize,
    /// Pulses that contributed to the error-rate estimate (after sifting).
    pub error_samples: usize,
    pub verdict: Verdict,
}

impl CheckReport {
    fn gate(
        error_rate: f64,
        error_samples: usize,
        multiphoton_rate: f64,
        samples_used: usize,
        cfg: &ProtocolConfig,
    ) -> Self {
        let verdict = if multiphoton_rate > cfg.multiphoton_threshold {
            Verdict::AbortMultiphoton
        } else if error_rate > cfg.error_threshold {
            Verdict::AbortErrorRate
        } else {
            Verdict::Pass
        };
        Self {
            error_rate,
            multiphoton_rate,
            samples_used,
            error_samples,
            verdict,
        }
    }
}

/// Everything a finished (or aborted) run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub decoded: Option<SecretMessage>,
    /// Charlie's splitter check (improved protocol only).
    pub charlie_check: Option<CheckReport>,
    /// Alice's eavesdropping check; absent when an earlier check aborted.
    pub alice_check: Option<CheckReport>,
    /// Decoy verification after the batch returned (when decoys are on).
    pub decoy_check: Option<CheckReport>,
    /// The return-transmission check on Alice's disclosed samples.
    pub final_check: Option<CheckReport>,
    pub transcript: Vec<SignalRecord>,
    pub attacker_view: Option<AttackReport>,
}

impl RunResult {
    /// First failing verdict in protocol order, or `Pass`.
    pub fn verdict(&self) -> Verdict {
        for report in [
            &self.charlie_check,
            &self.alice_check,
            &self.decoy_check,
            &self.final_check,
        ]
        .into_iter()
        .flatten()
        {
            if report.verdict != Verdict::Pass {
                return report.verdict;
            }
        }
        Verdict::Pass
    }

    pub fn aborted(&self) -> bool {
        self.verdict() != Verdict::Pass
    }
}

/// The unique basis in which a preparation state sits after one of the six
/// operations, found by state algebra rather than lookup.
pub fn basis_after(label: StateLabel, charlie_op: GateOp) -> Basis {
    let s = apply(charlie_op, &state_of(label));
    for basis in [Basis::Z, Basis::X] {
        for bit in [0u8, 1u8] {
            if prob_of(&s, basis, bit) >= 1.0 - CERTAINTY_TOL {
                return basis;
            }
        }
    }
    unreachable!("every protocol operation maps preparation states to basis eigenstates")
}

/// The certain outcome of measuring `alice_op · charlie_op · |label⟩` in
/// `basis_after(label, charlie_op)`. Decoding rule: Alice applied I exactly
/// when the measured bit equals `expected_bit(label, charlie_op, I)`.
pub fn expected_bit(label: StateLabel, charlie_op: GateOp, alice_op: GateOp) -> u8 {
    assert!(
        matches!(alice_op, GateOp::I | GateOp::U),
        "encoding uses I and U only"
    );
    let s = apply(alice_op, &apply(charlie_op, &state_of(label)));
    let basis = basis_after(label, charlie_op);
    if prob_of(&s, basis, 0) >= 1.0 - CERTAINTY_TOL {
        0
    } else {
        debug_assert!(prob_of(&s, basis, 1) >= 1.0 - CERTAINTY_TOL);
        1
    }
}

/// Fraction of mismatching (expected, measured) pairs.
pub fn estimate_error_rate(samples: &[(u8, u8)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(SimError::InvalidArgument(
            "cannot estimate an error rate from zero samples".into(),
        ));
    }
    let errors = samples.iter().filter(|(e, m)| e != m).count();
    Ok(errors as f64 / samples.len() as f64)
}

/// Positions and states of the decoys Charlie slipped into a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyRegistry {
    /// (position in the augmented sequence, preparation label), sorted.
    pub entries: Vec<(usize, StateLabel)>,
}

/// Inserts `floor(fraction · len)` single-photon decoys in uniformly random
/// preparation states at uniformly random positions. The registry stays
/// secret until check time.
pub fn insert_decoys(
    sequence: Vec<PhotonSignal>,
    fraction: f64,
    rng: &mut RandomStream,
) -> Result<(Vec<PhotonSignal>, DecoyRegistry)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(SimError::InvalidArgument(format!(
            "decoy fraction must be in [0, 1), got {fraction}"
        )));
    }
    let count = (sequence.len() as f64 * fraction).floor() as usize;
    if count == 0 {
        return Ok((sequence, DecoyRegistry { entries: Vec::new() }));
    }
    let total = sequence.len() + count;
    let positions = rng.sample_indices(total, count);
    let mut entries = Vec::with_capacity(count);
    let mut augmented = Vec::with_capacity(total);
    let mut originals = sequence.into_iter();
    let mut next_decoy = positions.iter().peekable();
    for slot in 0..total {
        if next_decoy.peek() == Some(&&slot) {
            next_decoy.next();
            let label = StateLabel::random(rng);
            entries.push((slot, label));
            augmented.push(make_signal(state_of(label), 1, slot)?);
        } else {
            augmented.push(originals.next().expect("slot accounting"));
        }
    }
    Ok((augmented, DecoyRegistry { entries }))
}

/// Measures each returned decoy in its preparation basis and reports the
/// mismatch fraction. `returned` is indexed by augmented-sequence position.
pub fn check_decoys(
    returned: &[PhotonSignal],
    registry: &DecoyRegistry,
    rng: &mut RandomStream,
) -> Result<f64> {
    if registry.entries.is_empty() {
        return Err(SimError::InvalidArgument("no decoys registered".into()));
    }
    let mut samples = Vec::with_capacity(registry.entries.len());
    for &(pos, label) in &registry.entries {
        let pulse = returned.get(pos).ok_or_else(|| {
            SimError::InvalidArgument(format!("returned sequence missing decoy position {pos}"))
        })?;
        let photon = pulse.photons.first().ok_or_else(|| {
            SimError::InvalidArgument(format!("decoy at position {pos} carries no photon"))
        })?;
        let (bit, _) = measure(photon, label.basis_of(), rng);
        samples.push((label.bit_of(), bit));
    }
    estimate_error_rate(&samples)
}

/// Runs the original three-operation protocol.
pub fn run_original(
    config: &ProtocolConfig,
    attack: AttackStrategy,
    rng: &mut RandomStream,
) -> Result<RunResult> {
    if config.op_set != OpSet::ThreeOp {
        return Err(SimError::InvalidConfig(
            "the original protocol encrypts with the three-operation set".into(),
        ));
    }
    if config.decoys_enabled {
        return Err(SimError::InvalidConfig(
            "decoys belong to the improved protocol".into(),
        ));
    }
    Engine::new(config, attack, false)?.execute(rng)
}

/// Runs the improved protocol: splitter check, four operations, Pauli-tagged
/// samples, and optional decoys.
pub fn run_improved(
    config: &ProtocolConfig,
    attack: AttackStrategy,
    rng: &mut RandomStream,
) -> Result<RunResult> {
    if config.op_set != OpSet::FourOp {
        return Err(SimError::InvalidConfig(
            "the improved protocol encrypts with the four-operation set".into(),
        ));
    }
    Engine::new(config, attack, true)?.execute(rng)
}

// ---------------------------------------------------------------------------
// Run engine
// ---------------------------------------------------------------------------

/// Per-pulse working state while a run executes.
struct Pulse {
    /// Bob's preparation index; `None` for Charlie's decoys.
    origin: Option<usize>,
    /// Transcript index: batch position, with decoys numbered after it.
    index: usize,
    label: StateLabel,
    signal: PhotonSignal,
    charlie_op: Option<GateOp>,
    alice_op: Option<GateOp>,
    role: Option<SignalRole>,
    announcements: Vec<Announcement>,
    final_bit: Option<u8>,
}

impl Pulse {
    fn announce(&mut self, party: Party, content: AnnouncementContent) {
        self.announcements.push(Announcement { party, content });
    }
}

/// What the attacker accumulated during the run.
#[derive(Default)]
struct AttackerState {
    /// Bob's per-pulse reads of Charlie's operation, keyed by origin index.
    guesses: BTreeMap<usize, TrojanGuess>,
    /// Bits stolen off the return transmission, keyed by origin index.
    stolen: BTreeMap<usize, u8>,
}

struct Engine<'a> {
    cfg: &'a ProtocolConfig,
    attack: AttackStrategy,
    improved: bool,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a ProtocolConfig, attack: AttackStrategy, improved: bool) -> Result<Self> {
        cfg.validate(improved)
            .map_err(|errs| SimError::InvalidConfig(errs.join("; ")))?;
        if let AttackStrategy::TrojanBob { n_photons, .. } = attack {
            if n_photons == 0 {
                return Err(SimError::InvalidArgument(
                    "a Trojan pulse needs at least one photon".into(),
                ));
            }
        }
        Ok(Self { cfg, attack, improved })
    }

    fn execute(&self, rng: &mut RandomStream) -> Result<RunResult> {
        let n = self.cfg.num_signals;
        let mut attacker = AttackerState::default();

        // Bob prepares the batch (multi-photon when he cheats).
        let mut pulses: Vec<Pulse> = Vec::with_capacity(n);
        for i in 0..n {
            let label = StateLabel::random(rng);
            let signal = match self.attack {
                AttackStrategy::TrojanBob { n_photons, .. } if n_photons >= 2 => {
                    trojan_prepare(label, n_photons, i)?
                }
                _ => make_signal(state_of(label), 1, i)?,
            };
            pulses.push(Pulse {
                origin: Some(i),
                index: i,
                label,
                signal,
                charlie_op: None,
                alice_op: None,
                role: None,
                announcements: Vec::new(),
                final_bit: None,
            });
        }

        // Hop 1: Bob -> Charlie.
        for pulse in &mut pulses {
            self.hop(pulse, EveSegment::BobToCharlie, rng);
        }

        // Charlie's splitter check on arrival (improved only).
        let mut charlie_check = None;
        if self.improved {
            let k = (n as f64 * self.cfg.charlie_sample_fraction).floor() as usize;
            let picked = rng.sample_indices(n, k);
            let mut flagged = 0usize;
            let mut sifted: Vec<(u8, u8)> = Vec::new();
            for &i in &picked {
                let pulse = &mut pulses[i];
                pulse.role = Some(SignalRole::CharliePnsSample);
                let signal = std::mem::replace(
                    &mut pulse.signal,
                    PhotonSignal { photons: Vec::new(), origin_index: i },
                );
                // Split first, measure each occupied leaf in a random basis,
                // then ask Bob for the state.
                let leaves = split_tree(signal, self.cfg.pns_check_depth, rng);
                let mut registered: Vec<(Basis, u8)> = Vec::new();
                for leaf in leaves {
                    let Some(photon) = leaf.photons.first() else {
                        continue;
                    };
                    let basis = if rng.next_bit() == 0 { Basis::Z } else { Basis::X };
                    let (bit, _) = measure(photon, basis, rng);
                    registered.push((basis, bit));
                }
                pulse.announce(Party::Bob, AnnouncementContent::InitialState(pulse.label));
                if registered.len() >= 2 {
                    flagged += 1;
                } else if let [(basis, bit)] = registered[..] {
                    pulse.final_bit = Some(bit);
                    if basis == pulse.label.basis_of() {
                        sifted.push((pulse.label.bit_of(), bit));
                    }
                }
            }
            let multiphoton_rate = if picked.is_empty() {
                0.0
            } else {
                flagged as f64 / picked.len() as f64
            };
            let error_rate = if sifted.is_empty() {
                0.0
            } else {
                estimate_error_rate(&sifted)?
            };
            let report =
                CheckReport::gate(error_rate, sifted.len(), multiphoton_rate, picked.len(), self.cfg);
            let abort = report.verdict != Verdict::Pass;
            charlie_check = Some(report);
            if abort {
                return Ok(self.finish(pulses, attacker, charlie_check, None, None, None, None));
            }
        }

        // Charlie encrypts the survivors; some become Pauli-tagged samples.
        let remaining: Vec<usize> = (0..pulses.len())
            .filter(|&i| pulses[i].role.is_none())
            .collect();
        let sc_count = if self.improved {
            (remaining.len() as f64 * self.cfg.sc_fraction).floor() as usize
        } else {
            0
        };
        let sc_picks: Vec<usize> = rng
            .sample_indices(remaining.len(), sc_count)
            .into_iter()
            .map(|j| remaining[j])
            .collect();
        for &i in &sc_picks {
            pulses[i].role = Some(SignalRole::CharlieCheckSample);
        }
        let ops = self.cfg.op_set.ops();
        for &i in &remaining {
            let pulse = &mut pulses[i];
            let op = if pulse.role == Some(SignalRole::CharlieCheckSample) {
                [GateOp::PauliX, GateOp::PauliZ][rng.next_index(2)]
            } else {
                ops[rng.next_index(ops.len())]
            };
            pulse.charlie_op = Some(op);
            for photon in &mut pulse.signal.photons {
                *photon = apply(op, photon);
            }
        }

        // Assemble the wire sequence for the trip to Alice; slip in decoys.
        let mut wire: Vec<usize> = remaining.clone();
        if self.improved && self.cfg.decoys_enabled && self.cfg.decoy_fraction > 0.0 {
            let count = (wire.len() as f64 * self.cfg.decoy_fraction).floor() as usize;
            let total = wire.len() + count;
            let positions = rng.sample_indices(total, count);
            let mut new_wire = Vec::with_capacity(total);
            let mut originals = wire.into_iter();
            let mut next_decoy = positions.iter().peekable();
            for slot in 0..total {
                if next_decoy.peek() == Some(&&slot) {
                    next_decoy.next();
                    let label = StateLabel::random(rng);
                    let index = pulses.len();
                    pulses.push(Pulse {
                        origin: None,
                        index,
                        label,
                        signal: make_signal(state_of(label), 1, slot)?,
                        charlie_op: None,
                        alice_op: None,
                        role: Some(SignalRole::Decoy),
                        announcements: Vec::new(),
                        final_bit: None,
                    });
                    new_wire.push(index);
                } else {
                    new_wire.push(originals.next().expect("wire accounting"));
                }
            }
            wire = new_wire;
        }

        // Hop 2: Charlie -> Alice. Bob taps his own multi-photon pulses here.
        for &i in &wire {
            let pulse = &mut pulses[i];
            self.hop(pulse, EveSegment::CharlieToAlice, rng);
            if let AttackStrategy::TrojanBob { forward_one, tree_depth, .. } = self.attack {
                let Some(origin) = pulse.origin else { continue };
                if pulse.signal.len() < 2 {
                    continue;
                }
                let signal = std::mem::replace(
                    &mut pulse.signal,
                    PhotonSignal { photons: Vec::new(), origin_index: origin },
                );
                let (guess, forwarded) = trojan_infer(
                    signal,
                    pulse.label,
                    self.cfg.op_set,
                    forward_one,
                    tree_depth,
                    rng,
                )?;
                pulse.signal = match forwarded {
                    Some(f) => f,
                    // Nothing left untouched: resend a reconstruction from
                    // the inferred operation.
                    None => make_signal(apply(guess.guessed_op, &state_of(pulse.label)), 1, origin)?,
                };
                attacker.guesses.insert(origin, guess);
            }
        }

        // Alice's check phase. Charlie first discloses decoy positions and
        // the Pauli-tagged positions with their operations.
        for &i in &wire {
            let pulse = &mut pulses[i];
            match pulse.role {
                Some(SignalRole::Decoy) => {
                    pulse.announce(Party::Charlie, AnnouncementContent::DecoyPosition);
                }
                Some(SignalRole::CharlieCheckSample) => {
                    let op = pulse.charlie_op.expect("tagged pulses carry an operation");
                    pulse.announce(Party::Charlie, AnnouncementContent::PauliOp(op));
                }
                _ => {}
            }
        }

        let eligible: Vec<usize> = wire
            .iter()
            .copied()
            .filter(|&i| pulses[i].role.is_none())
            .collect();
        let k_a = (eligible.len() as f64 * self.cfg.alice_sample_fraction).floor() as usize;
        let alice_picks: Vec<usize> = rng
            .sample_indices(eligible.len(), k_a)
            .into_iter()
            .map(|j| eligible[j])
            .collect();

        let mut samples: Vec<(u8, u8)> = Vec::new();
        for &i in &alice_picks {
            let pulse = &mut pulses[i];
            pulse.role = Some(SignalRole::AliceSample);
            let op = pulse.charlie_op.expect("sampled pulses carry an operation");
            pulse.announce(Party::Bob, AnnouncementContent::InitialState(pulse.label));
            pulse.announce(Party::Charlie, AnnouncementContent::EncryptOp(op));
            let basis = basis_after(pulse.label, op);
            let (bit, _) = measure(&pulse.signal.photons[0], basis, rng);
            pulse.final_bit = Some(bit);
            samples.push((expected_bit(pulse.label, op, GateOp::I), bit));
        }
        for &i in &wire {
            let pulse = &mut pulses[i];
            if pulse.role != Some(SignalRole::CharlieCheckSample) {
                continue;
            }
            let op = pulse.charlie_op.expect("tagged pulses carry an operation");
            pulse.announce(Party::Bob, AnnouncementContent::InitialState(pulse.label));
            let basis = basis_after(pulse.label, op);
            let (bit, _) = measure(&pulse.signal.photons[0], basis, rng);
            pulse.final_bit = Some(bit);
            samples.push((expected_bit(pulse.label, op, GateOp::I), bit));
        }
        let error_rate = if samples.is_empty() {
            0.0
        } else {
            estimate_error_rate(&samples)?
        };
        let alice_check =
            Some(CheckReport::gate(error_rate, samples.len(), 0.0, samples.len(), self.cfg));
        if alice_check.as_ref().is_some_and(|c| c.verdict != Verdict::Pass) {
            return Ok(self.finish(pulses, attacker, charlie_check, alice_check, None, None, None));
        }

        // Alice encodes: message bits on the first carriers, disclosed random
        // operations on her sampled share and on any surplus.
        let survivors: Vec<usize> = wire
            .iter()
            .copied()
            .filter(|&i| pulses[i].role.is_none())
            .collect();
        let k_f = (survivors.len() as f64 * self.cfg.alice_sample_fraction).floor() as usize;
        let disclosed: std::collections::BTreeSet<usize> =
            rng.sample_indices(survivors.len(), k_f).into_iter().collect();
        let message = &self.cfg.message;
        let mut carriers: Vec<usize> = Vec::with_capacity(message.len());
        for (slot, &i) in survivors.iter().enumerate() {
            let encode_message = !disclosed.contains(&slot) && carriers.len() < message.len();
            let pulse = &mut pulses[i];
            let op = if encode_message {
                let bit = message.bits()[carriers.len()];
                carriers.push(i);
                pulse.role = Some(SignalRole::MessageCarrier);
                if bit == 0 {
                    GateOp::I
                } else {
                    GateOp::U
                }
            } else {
                pulse.role = Some(SignalRole::AliceEncodedSample);
                if rng.next_bit() == 0 {
                    GateOp::I
                } else {
                    GateOp::U
                }
            };
            pulse.alice_op = Some(op);
            for photon in &mut pulse.signal.photons {
                *photon = apply(op, photon);
            }
        }
        if carriers.len() < message.len() {
            return Err(SimError::InsufficientSignals {
                needed: message.len(),
                available: carriers.len(),
            });
        }

        // Hop 3: Alice -> Charlie. Bob intercepts every pulse he holds an
        // inference for; decoys are not in his books and pass untouched.
        for &i in &wire {
            let pulse = &mut pulses[i];
            if pulse.role == Some(SignalRole::AliceSample)
                || pulse.role == Some(SignalRole::CharlieCheckSample)
            {
                continue; // consumed by Alice's measurements
            }
            self.hop(pulse, EveSegment::AliceToCharlie, rng);
            if let AttackStrategy::TrojanBob { .. } = self.attack {
                let Some(origin) = pulse.origin else { continue };
                if let Some(guess) = attacker.guesses.get(&origin) {
                    let (stolen, resent) =
                        final_intercept(&pulse.signal.photons[0], pulse.label, guess.guessed_op, rng);
                    pulse.signal.photons[0] = resent;
                    attacker.stolen.insert(origin, stolen);
                }
            }
        }

        // Charlie's closing phase: decoys first, then the disclosed samples,
        // then the message itself.
        let mut decoy_check = None;
        if self.improved && self.cfg.decoys_enabled {
            let decoy_idxs: Vec<usize> = wire
                .iter()
                .copied()
                .filter(|&i| pulses[i].role == Some(SignalRole::Decoy))
                .collect();
            if !decoy_idxs.is_empty() {
                let mut decoy_samples: Vec<(u8, u8)> = Vec::new();
                for &i in &decoy_idxs {
                    let pulse = &mut pulses[i];
                    pulse.announce(
                        Party::Charlie,
                        AnnouncementContent::DecoyReveal(pulse.label),
                    );
                    let (bit, _) = measure(&pulse.signal.photons[0], pulse.label.basis_of(), rng);
                    pulse.final_bit = Some(bit);
                    decoy_samples.push((pulse.label.bit_of(), bit));
                }
                let rate = estimate_error_rate(&decoy_samples)?;
                let report =
                    CheckReport::gate(rate, decoy_samples.len(), 0.0, decoy_samples.len(), self.cfg);
                let abort = report.verdict != Verdict::Pass;
                decoy_check = Some(report);
                if abort {
                    return Ok(self.finish(
                        pulses,
                        attacker,
                        charlie_check,
                        alice_check,
                        decoy_check,
                        None,
                        None,
                    ));
                }
            }
        }

        let mut final_samples: Vec<(u8, u8)> = Vec::new();
        for &i in &wire {
            let pulse = &mut pulses[i];
            if pulse.role != Some(SignalRole::AliceEncodedSample) {
                continue;
            }
            let charlie_op = pulse.charlie_op.expect("encoded pulses carry an operation");
            let alice_op = pulse.alice_op.expect("encoded pulses carry Alice's operation");
            pulse.announce(Party::Bob, AnnouncementContent::InitialState(pulse.label));
            pulse.announce(Party::Alice, AnnouncementContent::EncodedOp(alice_op));
            let basis = basis_after(pulse.label, charlie_op);
            let (bit, _) = measure(&pulse.signal.photons[0], basis, rng);
            pulse.final_bit = Some(bit);
            let decoded_u = bit != expected_bit(pulse.label, charlie_op, GateOp::I);
            final_samples.push((u8::from(alice_op == GateOp::U), u8::from(decoded_u)));
        }
        let final_rate = if final_samples.is_empty() {
            0.0
        } else {
            estimate_error_rate(&final_samples)?
        };
        let final_check = Some(CheckReport::gate(
            final_rate,
            final_samples.len(),
            0.0,
            final_samples.len(),
            self.cfg,
        ));
        if final_check.as_ref().is_some_and(|c| c.verdict != Verdict::Pass) {
            return Ok(self.finish(
                pulses,
                attacker,
                charlie_check,
                alice_check,
                decoy_check,
                final_check,
                None,
            ));
        }

        // Decode: Bob announces the carrier states, Charlie measures in the
        // correlated basis and reads Alice's operations.
        let mut bits = Vec::with_capacity(carriers.len());
        for &i in &carriers {
            let pulse = &mut pulses[i];
            let charlie_op = pulse.charlie_op.expect("carriers carry an operation");
            pulse.announce(Party::Bob, AnnouncementContent::InitialState(pulse.label));
            let basis = basis_after(pulse.label, charlie_op);
            let (bit, _) = measure(&pulse.signal.photons[0], basis, rng);
            pulse.final_bit = Some(bit);
            bits.push(u8::from(bit != expected_bit(pulse.label, charlie_op, GateOp::I)));
        }
        let decoded = Some(SecretMessage { bits });

        Ok(self.finish(
            pulses,
            attacker,
            charlie_check,
            alice_check,
            decoy_check,
            final_check,
            decoded,
        ))
    }

    /// Channel noise plus the outside eavesdropper, when she taps this hop.
    fn hop(&self, pulse: &mut Pulse, segment: EveSegment, rng: &mut RandomStream) {
        let origin = pulse.signal.origin_index;
        let signal = std::mem::replace(
            &mut pulse.signal,
            PhotonSignal { photons: Vec::new(), origin_index: origin },
        );
        let mut signal = transmit(signal, &self.cfg.channel, rng);
        if self.attack == (AttackStrategy::InterceptResendEve { segment }) {
            for photon in &mut signal.photons {
                let (resent, _, _) = eve_intercept_resend(photon, rng);
                *photon = resent;
            }
        }
        pulse.signal = signal;
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        pulses: Vec<Pulse>,
        attacker: AttackerState,
        charlie_check: Option<CheckReport>,
        alice_check: Option<CheckReport>,
        decoy_check: Option<CheckReport>,
        final_check: Option<CheckReport>,
        decoded: Option<SecretMessage>,
    ) -> RunResult {
        // Carrier origins in wire order, for the attacker's reconstruction.
        let carrier_origins: Vec<usize> = pulses
            .iter()
            .filter(|p| p.role == Some(SignalRole::MessageCarrier))
            .filter_map(|p| p.origin)
            .collect();

        let transcript: Vec<SignalRecord> = {
            let mut recs: Vec<SignalRecord> = pulses
                .iter()
                .map(|p| SignalRecord {
                    index: p.index,
                    prepared_label: p.label,
                    charlie_op: p.charlie_op,
                    alice_op: p.alice_op,
                    role: p.role,
                    announcements: p.announcements.clone(),
                    final_bit: p.final_bit,
                })
                .collect();
            recs.sort_by_key(|r| r.index);
            recs
        };

        let mut result = RunResult {
            decoded,
            charlie_check,
            alice_check,
            decoy_check,
            final_check,
            transcript,
            attacker_view: None,
        };

        result.attacker_view = match self.attack {
            AttackStrategy::None => None,
            AttackStrategy::InterceptResendEve { .. } => Some(AttackReport {
                inferences: Vec::new(),
                recovered_bits: None,
                recovery_rate: 0.0,
                detected: result.aborted(),
            }),
            AttackStrategy::TrojanBob { .. } => {
                let inferences = attacker
                    .guesses
                    .iter()
                    .map(|(&origin, guess)| {
                        let true_op = pulses[origin]
                            .charlie_op
                            .expect("inferred pulses carry an operation");
                        grade_inference(guess, true_op)
                    })
                    .collect();
                let recovered_bits: Option<Vec<u8>> = if carrier_origins.is_empty() {
                    None
                } else {
                    carrier_origins
                        .iter()
                        .map(|origin| attacker.stolen.get(origin).copied())
                        .collect()
                };
                let recovery_rate = match &recovered_bits {
                    Some(bits) => {
                        let hits = bits
                            .iter()
                            .zip(self.cfg.message.bits())
                            .filter(|(a, b)| a == b)
                            .count();
                        hits as f64 / bits.len().max(1) as f64
                    }
                    None => 0.0,
                };
                Some(AttackReport {
                    inferences,
                    recovered_bits,
                    recovery_rate,
                    detected: result.aborted(),
                })
            }
        };

        result
    }
}
