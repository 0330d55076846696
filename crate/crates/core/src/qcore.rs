//! Few-qubit state-vector mathematics.
//!
//! Everything the protocols need lives here: single qubits and qubit strings,
//! the four Pauli operations of the one-time pad, Bell pairs, the three-qubit
//! composition followed by a Bell measurement, and the teleportation
//! correction. States are pure; global phase is quotiented out in every
//! comparison.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ParticipantId;

/// Tolerance used by every protocol-level state comparison.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

const NORM_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A normalized single-qubit pure state `amp0|0> + amp1|1>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Qubit {
    amp0: Complex64,
    amp1: Complex64,
}

impl Qubit {
    pub const ZERO: Qubit = Qubit { amp0: ONE, amp1: ZERO };
    pub const ONE: Qubit = Qubit { amp0: ZERO, amp1: ONE };

    /// Builds a qubit proportional to `(amp0, amp1)`, rescaled to unit norm.
    pub fn new(amp0: Complex64, amp1: Complex64) -> Result<Self> {
        let norm = (amp0.norm_sqr() + amp1.norm_sqr()).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState(format!(
                "cannot normalize amplitudes ({amp0}, {amp1})"
            )));
        }
        Ok(Qubit {
            amp0: amp0 / norm,
            amp1: amp1 / norm,
        })
    }

    /// Computational basis state for a classical bit.
    pub fn basis(bit: bool) -> Self {
        if bit {
            Qubit::ONE
        } else {
            Qubit::ZERO
        }
    }

    /// Uniformly distributed point on the Bloch sphere.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let cos_theta: f64 = 1.0 - 2.0 * rng.random::<f64>();
        let phi: f64 = std::f64::consts::TAU * rng.random::<f64>();
        let half = cos_theta.clamp(-1.0, 1.0).acos() / 2.0;
        Qubit {
            amp0: Complex64::new(half.cos(), 0.0),
            amp1: Complex64::from_polar(half.sin(), phi),
        }
    }

    pub fn amp0(&self) -> Complex64 {
        self.amp0
    }

    pub fn amp1(&self) -> Complex64 {
        self.amp1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    /// Inner product `<self|other>`.
    pub fn overlap(&self, other: &Qubit) -> Complex64 {
        self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn fidelity(&self, other: &Qubit) -> f64 {
        self.overlap(other).norm_sqr()
    }

    /// Multiplies both amplitudes by `e^{i theta}`.
    pub fn with_phase(self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Qubit {
            amp0: self.amp0 * phase,
            amp1: self.amp1 * phase,
        }
    }

    pub fn apply(self, op: Pauli) -> Self {
        pauli_apply(op, self)
    }

    /// Returns the classical bit if the qubit is (up to phase) a
    /// computational basis state, `None` otherwise.
    pub fn basis_value(&self) -> Option<bool> {
        if self.amp1.norm_sqr() < NORM_TOLERANCE {
            Some(false)
        } else if self.amp0.norm_sqr() < NORM_TOLERANCE {
            Some(true)
        } else {
            None
        }
    }
}

/// Normalizes an arbitrary non-zero amplitude pair into a [`Qubit`].
pub fn qubit_normalize(amp0: Complex64, amp1: Complex64) -> Result<Qubit> {
    Qubit::new(amp0, amp1)
}

/// Single-qubit operations used by the one-time pad. `XZ` means Z first,
/// then X.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Z,
    XZ,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Z, Pauli::XZ];

    /// Fixed key mapping: 00 -> I, 01 -> X, 10 -> Z, 11 -> XZ.
    pub fn from_bits(first: bool, second: bool) -> Self {
        match (first, second) {
            (false, false) => Pauli::I,
            (false, true) => Pauli::X,
            (true, false) => Pauli::Z,
            (true, true) => Pauli::XZ,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (false, true),
            Pauli::Z => (true, false),
            Pauli::XZ => (true, true),
        }
    }
}

pub fn pauli_apply(op: Pauli, q: Qubit) -> Qubit {
    let Qubit { amp0: a, amp1: b } = q;
    match op {
        Pauli::I => q,
        Pauli::X => Qubit { amp0: b, amp1: a },
        Pauli::Z => Qubit { amp0: a, amp1: -b },
        Pauli::XZ => Qubit { amp0: -b, amp1: a },
    }
}

/// Applies the inverse of `op`. Only `XZ` differs from its own inverse
/// (`(XZ)^-1 = ZX`).
pub fn pauli_apply_inverse(op: Pauli, q: Qubit) -> Qubit {
    let Qubit { amp0: a, amp1: b } = q;
    match op {
        Pauli::XZ => Qubit { amp0: b, amp1: -a },
        other => pauli_apply(other, q),
    }
}

/// Classical pad key, read two bits per qubit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PadKey {
    bits: Vec<bool>,
}

impl PadKey {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() || !bits.len().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "pad key needs a positive even number of bits, got {}",
                bits.len()
            )));
        }
        Ok(PadKey { bits })
    }

    pub fn zeros(qubits: usize) -> Self {
        PadKey {
            bits: vec![false; 2 * qubits],
        }
    }

    pub fn random<R: Rng + ?Sized>(qubits: usize, rng: &mut R) -> Self {
        PadKey {
            bits: (0..2 * qubits).map(|_| rng.random::<bool>()).collect(),
        }
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(text: &str) -> Result<Self> {
        let bits = text
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Config(format!("invalid key character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        PadKey::new(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit_len(&self) -> usize {
        self.bits.len()
    }

    pub fn qubit_count(&self) -> usize {
        self.bits.len() / 2
    }

    pub fn pauli(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.bits[2 * qubit], self.bits[2 * qubit + 1])
    }

    /// Sub-key covering `count` qubits starting at qubit `start`.
    pub fn segment(&self, start: usize, count: usize) -> Result<PadKey> {
        let end = 2 * (start + count);
        if count == 0 || end > self.bits.len() {
            return Err(Error::KeyLength {
                expected: end,
                actual: self.bits.len(),
            });
        }
        Ok(PadKey {
            bits: self.bits[2 * start..end].to_vec(),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.bits.iter().all(|b| !b)
    }
}

impl fmt::Display for PadKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Ordered, non-empty list of independent qubits (a product state).
#[derive(Clone, Debug, PartialEq)]
pub struct QubitString {
    qubits: Vec<Qubit>,
}

impl QubitString {
    pub fn new(qubits: Vec<Qubit>) -> Result<Self> {
        if qubits.is_empty() {
            return Err(Error::InvalidState("qubit string must not be empty".into()));
        }
        if let Some(bad) = qubits
            .iter()
            .find(|q| (q.norm_sqr() - 1.0).abs() > NORM_TOLERANCE)
        {
            return Err(Error::InvalidState(format!(
                "unnormalized qubit {bad:?} in string"
            )));
        }
        Ok(QubitString { qubits })
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Result<Self> {
        QubitString::new((0..len).map(|_| Qubit::random(rng)).collect())
    }

    /// Computational basis string for a sequence of bits.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        QubitString::new(bits.iter().map(|&b| Qubit::basis(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Qubit> {
        self.qubits.iter()
    }

    /// Concatenation `self || other`.
    pub fn concat(&self, other: &QubitString) -> QubitString {
        let mut qubits = self.qubits.clone();
        qubits.extend_from_slice(&other.qubits);
        QubitString { qubits }
    }

    /// Splits into consecutive parts of the given lengths, which must sum to
    /// the string length.
    pub fn split(&self, lengths: &[usize]) -> Result<Vec<QubitString>> {
        let total: usize = lengths.iter().sum();
        if total != self.len() {
            return Err(Error::Length {
                left: self.len(),
                right: total,
            });
        }
        let mut offset = 0;
        lengths
            .iter()
            .map(|&n| {
                let part = QubitString::new(self.qubits[offset..offset + n].to_vec());
                offset += n;
                part
            })
            .collect()
    }

    pub fn map_qubit(&self, index: usize, f: impl FnOnce(Qubit) -> Qubit) -> QubitString {
        let mut qubits = self.qubits.clone();
        qubits[index] = f(qubits[index]);
        QubitString { qubits }
    }
}

impl From<Qubit> for QubitString {
    fn from(q: Qubit) -> Self {
        QubitString { qubits: vec![q] }
    }
}

fn check_key(key: &PadKey, s: &QubitString) -> Result<()> {
    if key.bit_len() != 2 * s.len() {
        return Err(Error::KeyLength {
            expected: 2 * s.len(),
            actual: key.bit_len(),
        });
    }
    Ok(())
}

/// Quantum one-time pad: qubit `i` gets the Pauli selected by key bits
/// `(2i, 2i+1)`.
pub fn qotp_encrypt(key: &PadKey, s: &QubitString) -> Result<QubitString> {
    check_key(key, s)?;
    Ok(QubitString {
        qubits: s
            .iter()
            .enumerate()
            .map(|(i, &q)| pauli_apply(key.pauli(i), q))
            .collect(),
    })
}

pub fn qotp_decrypt(key: &PadKey, s: &QubitString) -> Result<QubitString> {
    check_key(key, s)?;
    Ok(QubitString {
        qubits: s
            .iter()
            .enumerate()
            .map(|(i, &q)| pauli_apply_inverse(key.pauli(i), q))
            .collect(),
    })
}

/// True iff every qubit pair has fidelity at least `1 - tol`.
pub fn state_equal(a: &QubitString, b: &QubitString, tol: f64) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::Length {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b.iter()).all(|(x, y)| x.fidelity(y) >= 1.0 - tol))
}

/// The four Bell states, as measurement outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// Amplitudes over `|00>, |01>, |10>, |11>`.
    pub fn state(self) -> [Complex64; 4] {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PhiPlus => [h, ZERO, ZERO, h],
            BellOutcome::PhiMinus => [h, ZERO, ZERO, -h],
            BellOutcome::PsiPlus => [ZERO, h, h, ZERO],
            BellOutcome::PsiMinus => [ZERO, h, -h, ZERO],
        }
    }

    /// Pauli that takes the original qubit to the collapsed remote half.
    pub fn byproduct(self) -> Pauli {
        match self {
            BellOutcome::PhiPlus => Pauli::I,
            BellOutcome::PhiMinus => Pauli::Z,
            BellOutcome::PsiPlus => Pauli::X,
            BellOutcome::PsiMinus => Pauli::XZ,
        }
    }
}

/// Two-qubit state shared between two holders.
#[derive(Clone, Debug, PartialEq)]
pub struct BellPair {
    joint: [Complex64; 4],
    pub holder_first: ParticipantId,
    pub holder_second: ParticipantId,
}

impl BellPair {
    /// `(|00> + |11>)/sqrt(2)`.
    pub fn fresh(holder_first: ParticipantId, holder_second: ParticipantId) -> Self {
        BellPair {
            joint: BellOutcome::PhiPlus.state(),
            holder_first,
            holder_second,
        }
    }

    pub fn from_joint(
        joint: [Complex64; 4],
        holder_first: ParticipantId,
        holder_second: ParticipantId,
    ) -> Result<Self> {
        let pair = BellPair {
            joint,
            holder_first,
            holder_second,
        };
        pair.check_norm()?;
        Ok(pair)
    }

    pub fn joint(&self) -> &[Complex64; 4] {
        &self.joint
    }

    fn check_norm(&self) -> Result<()> {
        let norm: f64 = self.joint.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidState(format!(
                "Bell pair has squared norm {norm}"
            )));
        }
        Ok(())
    }
}

/// Unnormalized remote-half state for each Bell outcome after composing `p`
/// with `pair` (message qubit, first half, second half ordering).
fn bell_branches(p: &Qubit, pair: &BellPair) -> [(BellOutcome, [Complex64; 2]); 4] {
    let message = [p.amp0, p.amp1];
    BellOutcome::ALL.map(|outcome| {
        let bell = outcome.state();
        let mut remote = [ZERO; 2];
        for (b, slot) in remote.iter_mut().enumerate() {
            for m in 0..2 {
                for a in 0..2 {
                    *slot += bell[2 * m + a].conj() * message[m] * pair.joint[2 * a + b];
                }
            }
        }
        (outcome, remote)
    })
}

/// Composes the message qubit with the pair, Bell-measures the message qubit
/// together with the first half, and returns the outcome and the collapsed
/// second half.
pub fn compose_and_bell_measure<R: Rng + ?Sized>(
    p: &Qubit,
    pair: &BellPair,
    rng: &mut R,
) -> Result<(BellOutcome, Qubit)> {
    pair.check_norm()?;
    let branches = bell_branches(p, pair);
    let draw: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut chosen = None;
    for (outcome, remote) in &branches {
        let weight = remote[0].norm_sqr() + remote[1].norm_sqr();
        if weight <= 0.0 {
            continue;
        }
        chosen = Some((*outcome, *remote));
        cumulative += weight;
        if draw < cumulative {
            break;
        }
    }
    // Falls through to the last non-empty branch when rounding leaves
    // `cumulative` a hair below 1.
    let (outcome, remote) =
        chosen.ok_or_else(|| Error::InvalidState("all Bell branches vanish".into()))?;
    Ok((outcome, Qubit::new(remote[0], remote[1])?))
}

/// Undoes the outcome-dependent Pauli on the remote half.
pub fn teleport_correct(outcome: BellOutcome, q: Qubit) -> Qubit {
    pauli_apply_inverse(outcome.byproduct(), q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_qubit(q: Qubit, amp0: Complex64, amp1: Complex64) {
        assert!((q.amp0 - amp0).norm() < 1e-12, "{q:?}");
        assert!((q.amp1 - amp1).norm() < 1e-12, "{q:?}");
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(qubit_normalize(c(1.0, 0.0), ZERO).unwrap(), Qubit::ZERO);
        let h = qubit_normalize(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert_qubit(h, c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        let q = qubit_normalize(c(3.0, 0.0), c(0.0, 4.0)).unwrap();
        assert_qubit(q, c(0.6, 0.0), c(0.0, 0.8));
    }

    #[test]
    fn normalize_rejects_zero_vector() {
        assert!(matches!(
            qubit_normalize(ZERO, ZERO),
            Err(Error::InvalidState(_))
        ));
        assert!(qubit_normalize(c(f64::NAN, 0.0), ZERO).is_err());
    }

    #[test]
    fn pauli_examples() {
        assert_eq!(pauli_apply(Pauli::X, Qubit::ZERO), Qubit::ONE);
        let q = Qubit::new(c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert_qubit(pauli_apply(Pauli::Z, q), q.amp0, -q.amp1);
        assert_qubit(pauli_apply(Pauli::XZ, q), -q.amp1, q.amp0);
    }

    #[test]
    fn pad_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = QubitString::random(5, &mut rng).unwrap();
        assert_eq!(qotp_encrypt(&PadKey::zeros(5), &s).unwrap(), s);

        let one = QubitString::from(Qubit::ZERO);
        let k01 = PadKey::parse("01").unwrap();
        assert_eq!(qotp_encrypt(&k01, &one).unwrap().qubits()[0], Qubit::ONE);
        assert_eq!(
            qotp_decrypt(&k01, &QubitString::from(Qubit::ONE)).unwrap().qubits()[0],
            Qubit::ZERO
        );

        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let swapped = QubitString::from(Qubit::new(-b, a).unwrap());
        let k11 = PadKey::parse("11").unwrap();
        assert_qubit(qotp_decrypt(&k11, &swapped).unwrap().qubits()[0], a, b);
    }

    #[test]
    fn pad_key_length_is_checked() {
        let s = QubitString::from(Qubit::ZERO);
        let key = PadKey::zeros(2);
        assert!(matches!(
            qotp_encrypt(&key, &s),
            Err(Error::KeyLength {
                expected: 2,
                actual: 4
            })
        ));
        assert!(qotp_decrypt(&key, &s).is_err());
        assert!(PadKey::parse("011").is_err());
        assert!(PadKey::parse("").is_err());
    }

    #[test]
    fn pad_key_segments() {
        let key = PadKey::parse("000110").unwrap();
        assert_eq!(key.segment(1, 2).unwrap().to_string(), "0110");
        assert_eq!(key.pauli(1), Pauli::X);
        assert_eq!(key.pauli(2), Pauli::Z);
        assert!(key.segment(2, 2).is_err());
    }

    #[test]
    fn state_equal_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = QubitString::random(4, &mut rng).unwrap();
        assert!(state_equal(&s, &s, DEFAULT_TOLERANCE).unwrap());
        let phased = QubitString::new(s.iter().map(|q| q.with_phase(1.234)).collect()).unwrap();
        assert!(state_equal(&s, &phased, DEFAULT_TOLERANCE).unwrap());
        let zero = QubitString::from(Qubit::ZERO);
        let one = QubitString::from(Qubit::ONE);
        assert!(!state_equal(&zero, &one, DEFAULT_TOLERANCE).unwrap());
        assert!(matches!(
            state_equal(&s, &zero, DEFAULT_TOLERANCE),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn split_and_concat() {
        let s = QubitString::from_bits(&[true, false, true]).unwrap();
        let parts = s.split(&[1, 2]).unwrap();
        assert_eq!(parts[0].concat(&parts[1]), s);
        assert!(s.split(&[1, 1]).is_err());
        assert!(s.split(&[3, 0]).is_err());
    }

    #[test]
    fn basis_measurement_is_deterministic() {
        assert_eq!(Qubit::ZERO.basis_value(), Some(false));
        assert_eq!(Qubit::ONE.with_phase(0.3).basis_value(), Some(true));
        let plus = Qubit::new(ONE, ONE).unwrap();
        assert_eq!(plus.basis_value(), None);
    }

    #[test]
    fn bell_measure_examples() {
        let pair = BellPair::fresh(ParticipantId::Alice, ParticipantId::Bob);
        // p = |0>: only Phi branches survive, and PhiPlus leaves |0>.
        let branches = bell_branches(&Qubit::ZERO, &pair);
        let (_, phi_plus) = branches[0];
        assert!((phi_plus[0] - c(0.5, 0.0)).norm() < 1e-12);
        assert!(phi_plus[1].norm() < 1e-12);

        let h = Qubit::new(ONE, ONE).unwrap();
        let (_, psi_minus) = bell_branches(&h, &pair)[3];
        let remote = Qubit::new(psi_minus[0], psi_minus[1]).unwrap();
        assert_qubit(remote, c(-FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
    }

    #[test]
    fn bell_measure_rejects_unnormalized_pair() {
        let mut pair = BellPair::fresh(ParticipantId::Alice, ParticipantId::Bob);
        pair.joint[0] = c(2.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(matches!(
            compose_and_bell_measure(&Qubit::ZERO, &pair, &mut rng),
            Err(Error::InvalidState(_))
        ));
        assert!(BellPair::from_joint([ONE; 4], ParticipantId::Alice, ParticipantId::Bob).is_err());
    }

    #[test]
    fn teleport_examples() {
        let (a, b) = (c(0.6, 0.0), c(0.0, 0.8));
        let q = Qubit::new(a, b).unwrap();
        assert_eq!(teleport_correct(BellOutcome::PhiPlus, q), q);
        let remote = Qubit::new(a, -b).unwrap();
        assert_qubit(teleport_correct(BellOutcome::PhiMinus, remote), a, b);
    }
}
