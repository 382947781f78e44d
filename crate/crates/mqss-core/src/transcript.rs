//! Per-pulse bookkeeping of a protocol run: who announced what, in which
//! order, and what every measurement returned. The validator re-checks the
//! declared announcement discipline over a finished run.

use serde::{Deserialize, Serialize};

use crate::protocol::RunResult;
use crate::qubit::{GateOp, StateLabel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
    Charlie,
}

/// One classical broadcast about a single pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AnnouncementContent {
    /// Bob reveals the preparation state.
    InitialState(StateLabel),
    /// Charlie reveals the encryption operation he applied.
    EncryptOp(GateOp),
    /// Charlie reveals the Pauli he tagged a check sample with.
    PauliOp(GateOp),
    /// Alice reveals the operation she encoded on a post-encoding sample.
    EncodedOp(GateOp),
    /// Charlie discloses that this position holds a decoy (state withheld).
    DecoyPosition,
    /// Charlie reveals a decoy's preparation state at check time.
    DecoyReveal(StateLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Announcement {
    pub party: Party,
    pub content: AnnouncementContent,
}

/// What a pulse ended up being used for. A pulse has at most one role;
/// `None` means the run aborted before the pulse was assigned one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalRole {
    /// Carries one secret message bit.
    MessageCarrier,
    /// Consumed by Charlie's splitter check on arrival.
    CharliePnsSample,
    /// Measured by Alice during her eavesdropping check.
    AliceSample,
    /// Returned to Charlie carrying a disclosed random operation, for the
    /// final transmission check.
    AliceEncodedSample,
    /// Pauli-tagged by Charlie and verified during Alice's check.
    CharlieCheckSample,
    /// Prepared by Charlie in a secret state at a secret position.
    Decoy,
}

/// The full record of one pulse across the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    /// Preparation position: Bob's pulses use their batch index, decoys are
    /// numbered after the batch.
    pub index: usize,
    /// The preparer's state label (Bob's, or Charlie's for decoys).
    pub prepared_label: StateLabel,
    pub charlie_op: Option<GateOp>,
    pub alice_op: Option<GateOp>,
    pub role: Option<SignalRole>,
    /// Broadcasts about this pulse, in the order they were made.
    pub announcements: Vec<Announcement>,
    /// The last measurement outcome recorded for this pulse.
    pub final_bit: Option<u8>,
}

impl SignalRecord {
    fn position_of(&self, pred: impl Fn(&Announcement) -> bool) -> Option<usize> {
        self.announcements.iter().position(pred)
    }
}

fn is_initial_state(a: &Announcement) -> bool {
    matches!(a.content, AnnouncementContent::InitialState(_))
}

/// Checks every record of a finished run against the declared announcement
/// discipline:
///
/// - samples Alice measures: Bob's state first, then Charlie's operation;
/// - Pauli-tagged samples: Charlie's operation first, then Bob's state;
/// - post-encoding samples: Bob's state first, then Alice's disclosed
///   operation;
/// - message carriers: Bob's state only, and never any operation
///   announcement by Alice;
/// - decoys: position disclosure before the state reveal, and nothing from
///   Bob or Alice;
/// - once a check fails, no later-phase announcements exist.
///
/// Returns the list of violations (empty on success).
pub fn validate_transcript(result: &RunResult) -> Result<(), Vec<String>> {
    let decoded = result.decoded.is_some();
    let alice_phase_ran = result.alice_check.is_some();
    let encoding_ran = alice_phase_ran
        && result
            .alice_check
            .as_ref()
            .is_some_and(|c| c.verdict == crate::protocol::Verdict::Pass);
    let decoy_check_ran = result.decoy_check.is_some();
    let final_check_ran = result.final_check.is_some();

    let mut violations = Vec::new();
    let mut complain = |idx: usize, msg: String| violations.push(format!("pulse {idx}: {msg}"));

    for rec in &result.transcript {
        // Party/content pairing is fixed by the protocol.
        for a in &rec.announcements {
            let legit = match a.content {
                AnnouncementContent::InitialState(_) => Party::Bob,
                AnnouncementContent::EncryptOp(_)
                | AnnouncementContent::PauliOp(_)
                | AnnouncementContent::DecoyPosition
                | AnnouncementContent::DecoyReveal(_) => Party::Charlie,
                AnnouncementContent::EncodedOp(_) => Party::Alice,
            };
            if a.party != legit {
                complain(rec.index, format!("{:?} announced by {:?}", a.content, a.party));
            }
        }

        match rec.role {
            None => {
                if !rec.announcements.is_empty() {
                    complain(rec.index, "unused pulse carries announcements".into());
                }
            }
            Some(SignalRole::CharliePnsSample) => {
                if rec.position_of(is_initial_state).is_none() {
                    complain(rec.index, "splitter-check sample missing Bob's state".into());
                }
                if rec.announcements.len() != 1 {
                    complain(rec.index, "splitter-check sample has extra announcements".into());
                }
            }
            Some(SignalRole::AliceSample) => {
                let bob = rec.position_of(is_initial_state);
                let charlie = rec.position_of(|a| {
                    matches!(a.content, AnnouncementContent::EncryptOp(_))
                });
                match (bob, charlie) {
                    (Some(b), Some(c)) if b < c => {}
                    _ => complain(
                        rec.index,
                        "check sample must announce Bob's state before Charlie's operation".into(),
                    ),
                }
                if rec.final_bit.is_none() {
                    complain(rec.index, "check sample was never measured".into());
                }
            }
            Some(SignalRole::CharlieCheckSample) => {
                let charlie = rec.position_of(|a| {
                    matches!(a.content, AnnouncementContent::PauliOp(_))
                });
                let bob = rec.position_of(is_initial_state);
                match (charlie, bob) {
                    (Some(c), Some(b)) if c < b => {}
                    _ => complain(
                        rec.index,
                        "Pauli sample must announce Charlie's operation before Bob's state".into(),
                    ),
                }
            }
            Some(SignalRole::MessageCarrier) => {
                if rec
                    .announcements
                    .iter()
                    .any(|a| matches!(a.content, AnnouncementContent::EncodedOp(_)))
                {
                    complain(rec.index, "message carrier operation was announced".into());
                }
                let has_state = rec.position_of(is_initial_state).is_some();
                if decoded && !has_state {
                    complain(rec.index, "decoded carrier missing Bob's state".into());
                }
                if !decoded && has_state {
                    complain(rec.index, "aborted run announced a carrier state".into());
                }
            }
            Some(SignalRole::AliceEncodedSample) => {
                let bob = rec.position_of(is_initial_state);
                let alice = rec.position_of(|a| {
                    matches!(a.content, AnnouncementContent::EncodedOp(_))
                });
                if final_check_ran {
                    match (bob, alice) {
                        (Some(b), Some(a)) if b < a => {}
                        _ => complain(
                            rec.index,
                            "post-encoding sample must announce Bob's state before Alice's operation"
                                .into(),
                        ),
                    }
                } else if bob.is_some() || alice.is_some() {
                    complain(
                        rec.index,
                        "post-encoding sample announced before the final check ran".into(),
                    );
                }
            }
            Some(SignalRole::Decoy) => {
                if !alice_phase_ran && !rec.announcements.is_empty() {
                    complain(rec.index, "decoy disclosed before Alice's check phase".into());
                }
                let pos = rec.position_of(|a| a.content == AnnouncementContent::DecoyPosition);
                let reveal = rec.position_of(|a| {
                    matches!(a.content, AnnouncementContent::DecoyReveal(_))
                });
                if alice_phase_ran && pos.is_none() {
                    complain(rec.index, "decoy position never disclosed".into());
                }
                match (pos, reveal) {
                    (Some(p), Some(r)) if p < r => {}
                    (_, None) if !decoy_check_ran => {}
                    (Some(_), None) if !decoy_check_ran => {}
                    (None, None) => {}
                    _ => complain(rec.index, "decoy reveal out of order".into()),
                }
                if rec.alice_op.is_some() {
                    complain(rec.index, "decoy carries an encoding operation".into());
                }
            }
        }

        // Nobody but Alice encodes, and she only on carriers and her samples.
        if rec.alice_op.is_some()
            && !matches!(
                rec.role,
                Some(SignalRole::MessageCarrier) | Some(SignalRole::AliceEncodedSample)
            )
        {
            complain(rec.index, "encoding on a non-encoded role".into());
        }
        if !encoding_ran && rec.alice_op.is_some() {
            complain(rec.index, "encoding happened after a failed check".into());
        }
    }

    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
