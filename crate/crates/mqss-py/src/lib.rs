//! Python bindings: the qubit algebra, the attack probability oracles, and a
//! one-call protocol run, all seeded and deterministic.

use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mqss_core::attack::{self, AttackStrategy, EveSegment};
use mqss_core::photonics::ChannelModel;
use mqss_core::protocol::{
    self, basis_after, expected_bit, CheckReport, OpSet, ProtocolConfig, SecretMessage,
};
use mqss_core::qubit::{self, Basis, GateOp, StateLabel};
use mqss_core::SimError;

fn to_py_err(err: SimError) -> PyErr {
    match err {
        SimError::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_label(name: &str) -> PyResult<StateLabel> {
    match name.to_ascii_lowercase().as_str() {
        "zero" | "0" | "h" => Ok(StateLabel::Zero),
        "one" | "1" | "v" => Ok(StateLabel::One),
        "u" | "+" => Ok(StateLabel::U),
        "d" | "-" => Ok(StateLabel::D),
        _ => Err(PyValueError::new_err(format!(
            "unknown state label `{name}` (expected zero|one|u|d)"
        ))),
    }
}

fn parse_gate(name: &str) -> PyResult<GateOp> {
    match name.to_ascii_lowercase().as_str() {
        "i" => Ok(GateOp::I),
        "u" => Ok(GateOp::U),
        "h" => Ok(GateOp::H),
        "hbar" | "h_bar" | "hb" => Ok(GateOp::Hbar),
        "x" | "sigma_x" => Ok(GateOp::PauliX),
        "z" | "sigma_z" => Ok(GateOp::PauliZ),
        _ => Err(PyValueError::new_err(format!(
            "unknown gate `{name}` (expected i|u|h|hbar|x|z)"
        ))),
    }
}

fn parse_basis(name: &str) -> PyResult<Basis> {
    match name.to_ascii_lowercase().as_str() {
        "z" => Ok(Basis::Z),
        "x" => Ok(Basis::X),
        _ => Err(PyValueError::new_err(format!(
            "unknown basis `{name}` (expected z|x)"
        ))),
    }
}

fn parse_op_set(name: &str) -> PyResult<OpSet> {
    match name.to_ascii_lowercase().as_str() {
        "three" | "3" => Ok(OpSet::ThreeOp),
        "four" | "4" => Ok(OpSet::FourOp),
        _ => Err(PyValueError::new_err(format!(
            "unknown operation set `{name}` (expected three|four)"
        ))),
    }
}

fn basis_name(basis: Basis) -> &'static str {
    match basis {
        Basis::Z => "z",
        Basis::X => "x",
    }
}

/// Seeded random stream with deterministic child derivation.
#[pyclass(name = "RandomStream", skip_from_py_object)]
#[derive(Clone)]
struct PyRandomStream {
    inner: mqss_core::RandomStream,
}

#[pymethods]
impl PyRandomStream {
    #[new]
    fn new(seed: u64) -> Self {
        Self {
            inner: mqss_core::RandomStream::new(seed),
        }
    }

    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    /// Independent child stream for (seed, index).
    fn child(&self, index: u64) -> Self {
        Self {
            inner: self.inner.child(index),
        }
    }

    /// Uniform draw from [0, 1).
    fn next_float(&mut self) -> f64 {
        self.inner.next_f64()
    }

    fn next_bit(&mut self) -> u8 {
        self.inner.next_bit()
    }

    fn __repr__(&self) -> String {
        format!("RandomStream(seed={})", self.inner.seed())
    }
}

/// A normalized single-photon polarization state.
#[pyclass(name = "PureState", skip_from_py_object)]
#[derive(Clone)]
struct PyPureState {
    inner: qubit::PureState,
}

#[pymethods]
impl PyPureState {
    #[new]
    fn new(a0: Complex64, a1: Complex64) -> PyResult<Self> {
        Ok(Self {
            inner: qubit::PureState::new(a0, a1).map_err(to_py_err)?,
        })
    }

    /// One of the four preparation states: zero, one, u, d.
    #[staticmethod]
    fn of_label(label: &str) -> PyResult<Self> {
        Ok(Self {
            inner: qubit::state_of(parse_label(label)?),
        })
    }

    fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.inner.a0(), self.inner.a1())
    }

    /// Born-rule probability of reading `bit` in `basis` ("z" or "x").
    fn prob_of(&self, basis: &str, bit: u8) -> PyResult<f64> {
        Ok(qubit::prob_of(&self.inner, parse_basis(basis)?, bit))
    }

    /// Applies one of the six unitaries: i, u, h, hbar, x, z.
    fn apply(&self, gate: &str) -> PyResult<Self> {
        Ok(Self {
            inner: qubit::apply(parse_gate(gate)?, &self.inner),
        })
    }

    /// Collapsing measurement; returns (bit, post-measurement state).
    fn measure(&self, basis: &str, rng: &mut PyRandomStream) -> PyResult<(u8, Self)> {
        let (bit, collapsed) = qubit::measure(&self.inner, parse_basis(basis)?, &mut rng.inner);
        Ok((bit, Self { inner: collapsed }))
    }

    /// |⟨self|other⟩|².
    fn fidelity(&self, other: &Self) -> f64 {
        qubit::fidelity(&self.inner, &other.inner)
    }

    fn __repr__(&self) -> String {
        let (a0, a1) = self.amplitudes();
        format!("PureState(a0={a0}, a1={a1})")
    }
}

/// The fixed 2x2 matrix of a gate, row-major.
#[pyfunction]
fn gate_matrix(gate: &str) -> PyResult<Vec<Vec<Complex64>>> {
    let m = qubit::gate_matrix(parse_gate(gate)?);
    Ok(vec![vec![m[0][0], m[0][1]], vec![m[1][0], m[1][1]]])
}

/// The basis in which `gate · |label⟩` is an eigenstate ("z" or "x").
#[pyfunction(name = "basis_after")]
fn basis_after_py(label: &str, gate: &str) -> PyResult<&'static str> {
    Ok(basis_name(basis_after(parse_label(label)?, parse_gate(gate)?)))
}

/// The certain outcome of the correlated measurement after Charlie's gate
/// and Alice's encoding operation (i or u).
#[pyfunction(name = "expected_bit")]
fn expected_bit_py(label: &str, charlie_gate: &str, alice_gate: &str) -> PyResult<u8> {
    Ok(expected_bit(
        parse_label(label)?,
        parse_gate(charlie_gate)?,
        parse_gate(alice_gate)?,
    ))
}

/// The printed closed form (1/3)(1/2)^n for the attacker's failure rate.
#[pyfunction(name = "pe_paper")]
fn pe_paper_py(n: u32) -> f64 {
    attack::pe_paper(n)
}

/// Exact misclassification probability by exhaustive enumeration.
#[pyfunction(name = "pe_exact")]
fn pe_exact_py(n: usize, op_set: &str, measured_photons: usize) -> PyResult<f64> {
    attack::pe_exact(n, parse_op_set(op_set)?, measured_photons).map_err(to_py_err)
}

/// Probability that an n-photon pulse lights at least two leaves of a
/// depth-d splitter tree.
#[pyfunction]
fn bunching_flag_probability(n: usize, depth: u32) -> f64 {
    mqss_core::photonics::bunching_flag_probability(n, depth)
}

/// Photon-count sweep rows as dictionaries.
#[pyfunction]
#[pyo3(signature = (photon_counts, trials=100_000, seed=42))]
fn sweep(
    py: Python<'_>,
    photon_counts: Vec<usize>,
    trials: u64,
    seed: u64,
) -> PyResult<Vec<Py<PyDict>>> {
    let rows = mqss_core::harness::sweep_photon_count(&photon_counts, trials, seed)
        .map_err(to_py_err)?;
    rows.into_iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("photons", row.photons)?;
            d.set_item("pe_paper", row.pe_paper)?;
            d.set_item("pe_exact", row.pe_exact)?;
            d.set_item("monte_carlo", row.monte_carlo)?;
            d.set_item("wilson_low", row.wilson_low)?;
            d.set_item("wilson_high", row.wilson_high)?;
            d.set_item("trials", row.trials)?;
            Ok(d.unbind())
        })
        .collect()
}

fn check_dict<'py>(py: Python<'py>, check: &CheckReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("error_rate", check.error_rate)?;
    d.set_item("multiphoton_rate", check.multiphoton_rate)?;
    d.set_item("samples_used", check.samples_used)?;
    d.set_item(
        "verdict",
        match check.verdict {
            protocol::Verdict::Pass => "pass",
            protocol::Verdict::AbortErrorRate => "abort_error_rate",
            protocol::Verdict::AbortMultiphoton => "abort_multiphoton",
        },
    )?;
    Ok(d)
}

/// One seeded protocol run; returns the decoded message, every check report,
/// and the attacker's take.
#[pyfunction]
#[pyo3(signature = (
    protocol="original",
    attack="none",
    photons=4,
    signals=256,
    msg_len=64,
    seed=42,
    sample_fraction=0.25,
    pns_depth=1,
    decoys=false,
    decoy_fraction=0.2,
    eve_segment="charlie-alice",
    forward_one=true,
))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    protocol: &str,
    attack: &str,
    photons: usize,
    signals: usize,
    msg_len: usize,
    seed: u64,
    sample_fraction: f64,
    pns_depth: u32,
    decoys: bool,
    decoy_fraction: f64,
    eve_segment: &str,
    forward_one: bool,
) -> PyResult<Py<PyDict>> {
    let improved = match protocol.to_ascii_lowercase().as_str() {
        "original" => false,
        "improved" => true,
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown protocol `{protocol}` (expected original|improved)"
            )))
        }
    };
    let strategy = match attack.to_ascii_lowercase().as_str() {
        "none" => AttackStrategy::None,
        "trojan" => AttackStrategy::TrojanBob {
            n_photons: photons,
            forward_one,
            tree_depth: attack::default_tree_depth(photons),
        },
        "eve" => AttackStrategy::InterceptResendEve {
            segment: match eve_segment {
                "bob-charlie" => EveSegment::BobToCharlie,
                "charlie-alice" => EveSegment::CharlieToAlice,
                "alice-charlie" => EveSegment::AliceToCharlie,
                _ => {
                    return Err(PyValueError::new_err(format!(
                        "unknown segment `{eve_segment}`"
                    )))
                }
            },
        },
        _ => {
            return Err(PyValueError::new_err(format!(
                "unknown attack `{attack}` (expected none|trojan|eve)"
            )))
        }
    };

    let mut rng = mqss_core::RandomStream::new(seed);
    let message = SecretMessage::random(msg_len, &mut rng);
    let cfg = ProtocolConfig {
        num_signals: signals,
        charlie_sample_fraction: sample_fraction,
        alice_sample_fraction: sample_fraction,
        op_set: if improved { OpSet::FourOp } else { OpSet::ThreeOp },
        pns_check_depth: pns_depth,
        decoys_enabled: improved && decoys,
        decoy_fraction: if improved && decoys { decoy_fraction } else { 0.0 },
        sc_fraction: if improved { 0.1 } else { 0.0 },
        channel: ChannelModel::noiseless(),
        message: message.clone(),
        ..ProtocolConfig::original(SecretMessage::from_bits(Vec::new()).unwrap())
    };
    let result = if improved {
        protocol::run_improved(&cfg, strategy, &mut rng)
    } else {
        protocol::run_original(&cfg, strategy, &mut rng)
    }
    .map_err(to_py_err)?;

    let out = PyDict::new(py);
    out.set_item("protocol", protocol)?;
    out.set_item("attack", attack)?;
    out.set_item("seed", seed)?;
    out.set_item("message", message.bits().to_vec())?;
    out.set_item(
        "decoded",
        result.decoded.as_ref().map(|m| m.bits().to_vec()),
    )?;
    out.set_item("aborted", result.aborted())?;
    out.set_item(
        "verdict",
        match result.verdict() {
            protocol::Verdict::Pass => "pass",
            protocol::Verdict::AbortErrorRate => "abort_error_rate",
            protocol::Verdict::AbortMultiphoton => "abort_multiphoton",
        },
    )?;
    for (key, check) in [
        ("charlie_check", &result.charlie_check),
        ("alice_check", &result.alice_check),
        ("decoy_check", &result.decoy_check),
        ("final_check", &result.final_check),
    ] {
        match check {
            Some(c) => out.set_item(key, check_dict(py, c)?)?,
            None => out.set_item(key, py.None())?,
        }
    }
    match &result.attacker_view {
        Some(view) => {
            let d = PyDict::new(py);
            d.set_item("recovery_rate", view.recovery_rate)?;
            d.set_item("recovered_bits", view.recovered_bits.clone())?;
            d.set_item(
                "ambiguous_count",
                view.inferences.iter().filter(|i| i.ambiguous).count(),
            )?;
            d.set_item("inference_count", view.inferences.len())?;
            d.set_item("detected", view.detected)?;
            out.set_item("attacker", d)?;
        }
        None => out.set_item("attacker", py.None())?,
    }
    out.set_item("pulses", result.transcript.len())?;
    Ok(out.unbind())
}

#[pymodule]
fn mqss_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRandomStream>()?;
    m.add_class::<PyPureState>()?;
    m.add_function(wrap_pyfunction!(gate_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(basis_after_py, m)?)?;
    m.add_function(wrap_pyfunction!(expected_bit_py, m)?)?;
    m.add_function(wrap_pyfunction!(pe_paper_py, m)?)?;
    m.add_function(wrap_pyfunction!(pe_exact_py, m)?)?;
    m.add_function(wrap_pyfunction!(bunching_flag_probability, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
