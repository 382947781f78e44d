//! Exact single-qubit polarization algebra.
//!
//! A photon's polarization is a normalized two-component complex vector over
//! the computational basis |0⟩ (horizontal) and |1⟩ (vertical). The protocol
//! uses two measuring bases — rectilinear Z with eigenstates {|0⟩, |1⟩} and
//! diagonal X with eigenstates |u⟩ = (|0⟩+|1⟩)/√2, |d⟩ = (|0⟩−|1⟩)/√2 — and
//! six unitaries {I, U, H, H̄, σx, σz}. All matrix entries are 0, ±1 or
//! ±1/√2, so algebraic identities are asserted at 1e-12.
//!
//! States are compared by fidelity |⟨φ|ψ⟩|², never componentwise: U and H̄
//! introduce global signs that carry no measurable information.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;

/// Complex coefficient of a basis component.
pub type Amplitude = Complex64;

/// Tolerance for algebraic identities (normalization, unitarity, fidelity).
pub const ALGEBRA_TOL: f64 = 1e-12;

/// Measurement outcomes with probability at least `1 - CERTAINTY_TOL` are
/// treated as certain and decided without consuming randomness, so decode
/// paths of eigenstates are exact.
pub const CERTAINTY_TOL: f64 = 1e-9;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// A normalized pure polarization state a0|0⟩ + a1|1⟩.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    a0: Amplitude,
    a1: Amplitude,
}

impl PureState {
    /// Builds a state from amplitudes, rejecting non-finite coefficients and
    /// vectors that are not normalized within 1e-6 (then rescaling exactly).
    pub fn new(a0: Amplitude, a1: Amplitude) -> crate::Result<Self> {
        for c in [a0, a1] {
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(crate::SimError::InvalidArgument(
                    "amplitude must be finite".into(),
                ));
            }
        }
        let norm_sq = a0.norm_sqr() + a1.norm_sqr();
        if (norm_sq - 1.0).abs() > 1e-6 {
            return Err(crate::SimError::InvalidArgument(format!(
                "state not normalized: |a0|^2 + |a1|^2 = {norm_sq}"
            )));
        }
        let scale = norm_sq.sqrt().recip();
        Ok(Self {
            a0: a0 * scale,
            a1: a1 * scale,
        })
    }

    pub(crate) const fn raw(a0: Amplitude, a1: Amplitude) -> Self {
        Self { a0, a1 }
    }

    pub fn a0(&self) -> Amplitude {
        self.a0
    }

    pub fn a1(&self) -> Amplitude {
        self.a1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }
}

/// ⟨a|b⟩.
pub fn inner(a: &PureState, b: &PureState) -> Complex64 {
    a.a0.conj() * b.a0 + a.a1.conj() * b.a1
}

/// |⟨a|b⟩|²; 1 means equal up to global phase.
pub fn fidelity(a: &PureState, b: &PureState) -> f64 {
    inner(a, b).norm_sqr()
}

/// The two measuring bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Rectilinear (σz): eigenstates |0⟩, |1⟩.
    Z,
    /// Diagonal (σx): eigenstates |u⟩, |d⟩.
    X,
}

impl Basis {
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }

    /// Eigenstate of this basis carrying the given bit.
    pub fn eigenstate(self, bit: u8) -> PureState {
        match (self, bit) {
            (Basis::Z, 0) => PureState::raw(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)),
            (Basis::Z, _) => PureState::raw(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)),
            (Basis::X, 0) => PureState::raw(
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
            ),
            (Basis::X, _) => PureState::raw(
                Complex64::new(FRAC_1_SQRT_2, 0.0),
                Complex64::new(-FRAC_1_SQRT_2, 0.0),
            ),
        }
    }
}

/// The four preparation states: |0⟩, |1⟩ in Z and |u⟩, |d⟩ in X.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    Zero,
    One,
    U,
    D,
}

impl StateLabel {
    pub const ALL: [StateLabel; 4] = [StateLabel::Zero, StateLabel::One, StateLabel::U, StateLabel::D];

    pub fn basis_of(self) -> Basis {
        match self {
            StateLabel::Zero | StateLabel::One => Basis::Z,
            StateLabel::U | StateLabel::D => Basis::X,
        }
    }

    pub fn bit_of(self) -> u8 {
        match self {
            StateLabel::Zero | StateLabel::U => 0,
            StateLabel::One | StateLabel::D => 1,
        }
    }

    /// Label of the eigenstate of `basis` with the given bit.
    pub fn from_basis_bit(basis: Basis, bit: u8) -> StateLabel {
        match (basis, bit) {
            (Basis::Z, 0) => StateLabel::Zero,
            (Basis::Z, _) => StateLabel::One,
            (Basis::X, 0) => StateLabel::U,
            (Basis::X, _) => StateLabel::D,
        }
    }

    /// Uniformly random label.
    pub fn random(rng: &mut RandomStream) -> StateLabel {
        Self::ALL[rng.next_index(4)]
    }
}

/// The six unitaries used across the two protocol variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateOp {
    /// Identity.
    I,
    /// iσy = |0⟩⟨1| − |1⟩⟨0|: flips the state in both measuring bases.
    U,
    /// Hadamard: exchanges the two measuring bases.
    H,
    /// The second basis-exchanging unitary, (1/√2)(|0⟩⟨0| − |1⟩⟨0| − |0⟩⟨1| − |1⟩⟨1|).
    Hbar,
    /// σx.
    PauliX,
    /// σz.
    PauliZ,
}

impl GateOp {
    pub const ALL: [GateOp; 6] = [
        GateOp::I,
        GateOp::U,
        GateOp::H,
        GateOp::Hbar,
        GateOp::PauliX,
        GateOp::PauliZ,
    ];
}

/// The fixed 2×2 matrix of a gate, row-major.
pub fn gate_matrix(gate: GateOp) -> [[Amplitude; 2]; 2] {
    let c = |x: f64| Complex64::new(x, 0.0);
    let h = FRAC_1_SQRT_2;
    match gate {
        GateOp::I => [[c(1.0), c(0.0)], [c(0.0), c(1.0)]],
        GateOp::U => [[c(0.0), c(1.0)], [c(-1.0), c(0.0)]],
        GateOp::H => [[c(h), c(h)], [c(h), c(-h)]],
        GateOp::Hbar => [[c(h), c(-h)], [c(-h), c(-h)]],
        GateOp::PauliX => [[c(0.0), c(1.0)], [c(1.0), c(0.0)]],
        GateOp::PauliZ => [[c(1.0), c(0.0)], [c(0.0), c(-1.0)]],
    }
}

/// Exact state vector for a preparation label.
pub fn state_of(label: StateLabel) -> PureState {
    label.basis_of().eigenstate(label.bit_of())
}

/// Matrix-vector product; unitarity keeps the result normalized.
pub fn apply(gate: GateOp, state: &PureState) -> PureState {
    let m = gate_matrix(gate);
    PureState::raw(
        m[0][0] * state.a0 + m[0][1] * state.a1,
        m[1][0] * state.a0 + m[1][1] * state.a1,
    )
}

/// Born-rule probability of reading `bit` when measuring `state` in `basis`.
pub fn prob_of(state: &PureState, basis: Basis, bit: u8) -> f64 {
    let p = inner(&basis.eigenstate(bit), state).norm_sqr();
    p.clamp(0.0, 1.0)
}

/// Collapsing measurement.
///
/// Returns the sampled bit and the post-measurement eigenstate. Outcomes with
/// probability ≥ 1 − 1e-9 are decided deterministically without drawing from
/// the stream.
pub fn measure(state: &PureState, basis: Basis, rng: &mut RandomStream) -> (u8, PureState) {
    let p0 = prob_of(state, basis, 0);
    let bit = if p0 >= 1.0 - CERTAINTY_TOL {
        0
    } else if p0 <= CERTAINTY_TOL {
        1
    } else {
        u8::from(rng.next_f64() >= p0)
    };
    (bit, basis.eigenstate(bit))
}
