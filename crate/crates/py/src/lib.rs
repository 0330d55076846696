//! Python module `aqs`: qubit primitives, scenario runs, the two attacks and
//! dispute resolution from `aqs-core`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use aqs_core::adversary::{self, Assertion, DisputeClaim, DisputeVerdict};
use aqs_core::cli::{self, ScenarioConfig};
use aqs_core::hardened::CountermeasureSet;
use aqs_core::harness::{transcript_read, Lab, ParticipantId, Scheme, SessionId};
use aqs_core::qcore::{self, BellPair, PadKey};

create_exception!(aqs, AqsError, PyException);

fn err(e: aqs_core::Error) -> PyErr {
    AqsError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (value.to_string(),))
}

#[pyclass(name = "Qubit", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQubit(qcore::Qubit);

#[pymethods]
impl PyQubit {
    /// Normalizes `(amp0, amp1)`.
    #[new]
    fn new(amp0: Complex64, amp1: Complex64) -> PyResult<Self> {
        qcore::Qubit::new(amp0, amp1).map(PyQubit).map_err(err)
    }

    #[staticmethod]
    fn random(seed: u64) -> Self {
        PyQubit(qcore::Qubit::random(&mut ChaCha8Rng::seed_from_u64(seed)))
    }

    #[getter]
    fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.0.amp0(), self.0.amp1())
    }

    fn fidelity(&self, other: &PyQubit) -> f64 {
        self.0.fidelity(&other.0)
    }

    fn __repr__(&self) -> String {
        format!("Qubit({}, {})", self.0.amp0(), self.0.amp1())
    }
}

#[pyclass(name = "QubitString", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyQubitString(qcore::QubitString);

#[pymethods]
impl PyQubitString {
    #[new]
    fn new(qubits: Vec<PyRef<'_, PyQubit>>) -> PyResult<Self> {
        qcore::QubitString::new(qubits.iter().map(|q| q.0).collect())
            .map(PyQubitString)
            .map_err(err)
    }

    #[staticmethod]
    fn random(len: usize, seed: u64) -> PyResult<Self> {
        qcore::QubitString::random(len, &mut ChaCha8Rng::seed_from_u64(seed))
            .map(PyQubitString)
            .map_err(err)
    }

    fn qubits(&self) -> Vec<PyQubit> {
        self.0.iter().map(|&q| PyQubit(q)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("QubitString(len={})", self.0.len())
    }
}

fn pad(key: &str) -> PyResult<PadKey> {
    PadKey::parse(key).map_err(err)
}

/// Applies the pad given as a bit string such as `"0110"`.
#[pyfunction]
fn qotp_encrypt(key: &str, s: &PyQubitString) -> PyResult<PyQubitString> {
    qcore::qotp_encrypt(&pad(key)?, &s.0).map(PyQubitString).map_err(err)
}

#[pyfunction]
fn qotp_decrypt(key: &str, s: &PyQubitString) -> PyResult<PyQubitString> {
    qcore::qotp_decrypt(&pad(key)?, &s.0).map(PyQubitString).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a, b, tol = qcore::DEFAULT_TOLERANCE))]
fn state_equal(a: &PyQubitString, b: &PyQubitString, tol: f64) -> PyResult<bool> {
    qcore::state_equal(&a.0, &b.0, tol).map_err(err)
}

/// Teleports `q` through a fresh Bell pair. Returns the outcome name and the
/// corrected qubit.
#[pyfunction]
fn teleport(q: &PyQubit, seed: u64) -> PyResult<(String, PyQubit)> {
    let pair = BellPair::fresh(ParticipantId::Alice, ParticipantId::Bob);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (outcome, remote) = qcore::compose_and_bell_measure(&q.0, &pair, &mut rng).map_err(err)?;
    Ok((format!("{outcome:?}"), PyQubit(qcore::teleport_correct(outcome, remote))))
}

/// Runs a scenario, writes `out` and `out.summary.json`, and returns the
/// summary as a dict.
#[pyfunction]
#[pyo3(signature = (scheme, out, n_qubits = 4, seed = 0, attack = "none", harden = "none", trials = 1, expect = None))]
#[allow(clippy::too_many_arguments)]
fn run_scenario<'py>(
    py: Python<'py>,
    scheme: &str,
    out: PathBuf,
    n_qubits: usize,
    seed: u64,
    attack: &str,
    harden: &str,
    trials: usize,
    expect: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ScenarioConfig {
        scheme: scheme.parse().map_err(err)?,
        n_qubits,
        seed,
        attack: attack.parse().map_err(err)?,
        countermeasures: CountermeasureSet::parse_list(harden).map_err(err)?,
        trials,
        output_path: out,
        expect: expect.map(str::parse).transpose().map_err(err)?,
    };
    cfg.validate().map_err(err)?;
    let summary = py.detach(|| cli::run_scenario(&cfg)).map_err(err)?;
    json_to_py(py, &serde_json::to_value(&summary).expect("plain data"))
}

fn report_dict<'py>(py: Python<'py>, report: &adversary::AttackReport) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(report).expect("plain data"))
}

/// Receiver swap on the entangled scheme with random `n`-qubit messages.
#[pyfunction]
#[pyo3(signature = (n_qubits, seed, harden = "none"))]
fn swap_attack<'py>(py: Python<'py>, n_qubits: usize, seed: u64, harden: &str) -> PyResult<Bound<'py, PyAny>> {
    let cm = CountermeasureSet::parse_list(harden).map_err(err)?;
    let mut lab = Lab::new(Scheme::Entangled, seed, cm);
    let p_b = qcore::QubitString::random(n_qubits, &mut lab.rng).map_err(err)?;
    let p_c = qcore::QubitString::random(n_qubits, &mut lab.rng).map_err(err)?;
    let (report, _) = adversary::swap_attack_entangled(&mut lab, &p_b, &p_c).map_err(err)?;
    report_dict(py, &report)
}

/// Signature transfer on the plain scheme with a random `n`-qubit message.
#[pyfunction]
#[pyo3(signature = (n_qubits, seed, harden = "none"))]
fn transfer_attack<'py>(py: Python<'py>, n_qubits: usize, seed: u64, harden: &str) -> PyResult<Bound<'py, PyAny>> {
    let cm = CountermeasureSet::parse_list(harden).map_err(err)?;
    let mut lab = Lab::new(Scheme::Plain, seed, cm);
    let message = qcore::QubitString::random(n_qubits, &mut lab.rng).map_err(err)?;
    let (report, _) = adversary::transfer_attack_plain(&mut lab, &message).map_err(err)?;
    report_dict(py, &report)
}

/// Settles a claim from a transcript file. `assertion` is one of
/// `receiver_lied`, `signer_sent_incorrect`, `eve_disturbed`.
#[pyfunction]
fn resolve_dispute(transcript: PathBuf, claimant: &str, session: u64, assertion: &str) -> PyResult<String> {
    let t = transcript_read(&transcript).map_err(err)?;
    let assertion = match assertion {
        "receiver_lied" => Assertion::ReceiverLied,
        "signer_sent_incorrect" => Assertion::SignerSentIncorrect,
        "eve_disturbed" => Assertion::EveDisturbed,
        other => return Err(AqsError::new_err(format!("unknown assertion {other:?}"))),
    };
    let claim = DisputeClaim {
        claimant: claimant.parse().map_err(err)?,
        session: SessionId(session),
        assertion,
    };
    let verdict = adversary::resolve_dispute(&t, &claim).map_err(err)?;
    Ok(match verdict {
        DisputeVerdict::ResolvedForSigner => "resolved_for_signer",
        DisputeVerdict::ResolvedForReceiver => "resolved_for_receiver",
        DisputeVerdict::Unresolvable => "unresolvable",
    }
    .to_string())
}

#[pymodule]
fn aqs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("AqsError", m.py().get_type::<AqsError>())?;
    m.add_class::<PyQubit>()?;
    m.add_class::<PyQubitString>()?;
    m.add_function(wrap_pyfunction!(qotp_encrypt, m)?)?;
    m.add_function(wrap_pyfunction!(qotp_decrypt, m)?)?;
    m.add_function(wrap_pyfunction!(state_equal, m)?)?;
    m.add_function(wrap_pyfunction!(teleport, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(swap_attack, m)?)?;
    m.add_function(wrap_pyfunction!(transfer_attack, m)?)?;
    m.add_function(wrap_pyfunction!(resolve_dispute, m)?)?;
    Ok(())
}
