//! Physical-layer model: multi-photon pulses, 50/50 photon-number splitters
//! and splitter trees, and the transmission channel.
//!
//! A splitter routes each photon of a pulse independently to one of its two
//! output arms with probability 1/2; there is no bosonic interference and no
//! photon loss. That matches the probability arithmetic the rest of the
//! simulation is built on: an n-photon pulse leaves both arms of one splitter
//! occupied with probability 1 − 2^(1−n).

use serde::{Deserialize, Serialize};

use crate::qubit::{apply, GateOp, PureState};
use crate::rng::RandomStream;
use crate::{Result, SimError};

/// One logical pulse: an ordered collection of photon polarization states.
///
/// Honest protocol pulses hold exactly one photon; a Trojan pulse holds
/// N ≥ 2 photons prepared in the identical state. `origin_index` is the
/// pulse's position in the sequence it was prepared for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonSignal {
    pub photons: Vec<PureState>,
    pub origin_index: usize,
}

impl PhotonSignal {
    pub fn len(&self) -> usize {
        self.photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.photons.is_empty()
    }
}

/// The two output arms of one photon-number splitter.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub arm_a: PhotonSignal,
    pub arm_b: PhotonSignal,
}

/// Per-photon transmission model. `flip_probability` is the chance of a σx
/// error in transit; the baseline channel is lossless and noiseless (p = 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub flip_probability: f64,
}

impl ChannelModel {
    pub fn noiseless() -> Self {
        Self { flip_probability: 0.0 }
    }

    pub fn new(flip_probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip_probability) {
            return Err(SimError::InvalidArgument(format!(
                "flip_probability must be in [0, 1], got {flip_probability}"
            )));
        }
        Ok(Self { flip_probability })
    }
}

/// A pulse of `n` independent photons, each prepared in `state`.
pub fn make_signal(state: PureState, n: usize, origin_index: usize) -> Result<PhotonSignal> {
    if n == 0 {
        return Err(SimError::InvalidArgument(
            "a signal needs at least one photon".into(),
        ));
    }
    Ok(PhotonSignal {
        photons: vec![state; n],
        origin_index,
    })
}

/// One 50/50 splitter: every photon routed independently, states unchanged.
pub fn split(signal: PhotonSignal, rng: &mut RandomStream) -> SplitResult {
    let origin = signal.origin_index;
    let mut arm_a = Vec::new();
    let mut arm_b = Vec::new();
    for photon in signal.photons {
        if rng.next_bit() == 0 {
            arm_a.push(photon);
        } else {
            arm_b.push(photon);
        }
    }
    SplitResult {
        arm_a: PhotonSignal { photons: arm_a, origin_index: origin },
        arm_b: PhotonSignal { photons: arm_b, origin_index: origin },
    }
}

/// A balanced splitter tree of the given depth: 2^depth output leaves.
/// Depth 0 returns the pulse unsplit.
pub fn split_tree(signal: PhotonSignal, depth: u32, rng: &mut RandomStream) -> Vec<PhotonSignal> {
    let mut layer = vec![signal];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(layer.len() * 2);
        for pulse in layer {
            let halves = split(pulse, rng);
            next.push(halves.arm_a);
            next.push(halves.arm_b);
        }
        layer = next;
    }
    layer
}

/// Sends a pulse through the channel: each photon independently suffers a σx
/// flip with the channel's probability. A zero-noise channel is the identity
/// and draws nothing from the stream.
pub fn transmit(signal: PhotonSignal, channel: &ChannelModel, rng: &mut RandomStream) -> PhotonSignal {
    if channel.flip_probability <= 0.0 {
        return signal;
    }
    let origin = signal.origin_index;
    let photons = signal
        .photons
        .into_iter()
        .map(|p| {
            if rng.next_bool(channel.flip_probability) {
                apply(GateOp::PauliX, &p)
            } else {
                p
            }
        })
        .collect();
    PhotonSignal { photons, origin_index: origin }
}

/// Probability that a pulse of `n` identical photons lights up at least two
/// leaves of a depth-`depth` splitter tree.
///
/// With L = 2^depth leaves, all n photons bunch into a single leaf with
/// probability L·(1/L)^n, so the flag probability is 1 − L^(1−n).
pub fn bunching_flag_probability(n: usize, depth: u32) -> f64 {
    if n == 0 || depth == 0 {
        return 0.0;
    }
    let leaves = f64::from(1u32 << depth.min(30));
    1.0 - leaves.powi(1 - n as i32)
}
