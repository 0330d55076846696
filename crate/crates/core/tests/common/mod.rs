//! Matrix-level reference implementations used to cross-check the library.
//! Nothing here calls into the code under test except to read amplitudes.

#![allow(dead_code)]

use num_complex::Complex64 as C;

use aqs_core::qcore::{PadKey, Qubit, QubitString};

pub type Mat2 = [[C; 2]; 2];

const O: C = C::new(0.0, 0.0);
const L: C = C::new(1.0, 0.0);

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[O; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

/// Pauli matrix for a key-bit pair: 00 I, 01 X, 10 Z, 11 the product X*Z.
pub fn pauli_matrix(first: bool, second: bool) -> Mat2 {
    let x = [[O, L], [L, O]];
    let z = [[L, O], [O, -L]];
    let i = [[L, O], [O, L]];
    match (first, second) {
        (false, false) => i,
        (false, true) => x,
        (true, false) => z,
        (true, true) => matmul(&x, &z),
    }
}

pub fn adjoint(m: &Mat2) -> Mat2 {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

pub fn apply(m: &Mat2, v: [C; 2]) -> [C; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn amps(q: &Qubit) -> [C; 2] {
    [q.amp0(), q.amp1()]
}

pub fn kron(a: &[C], b: &[C]) -> Vec<C> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

pub fn fidelity(a: [C; 2], b: [C; 2]) -> f64 {
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    (a[0].conj() * b[0] + a[1].conj() * b[1]).norm_sqr() / (na * nb)
}

/// Largest amplitude error after removing the global phase.
pub fn phase_aligned_distance(a: [C; 2], b: [C; 2]) -> f64 {
    let inner = a[0].conj() * b[0] + a[1].conj() * b[1];
    let phase = if inner.norm() > 0.0 { inner / inner.norm() } else { L };
    ((a[0] * phase - b[0]).norm()).max((a[1] * phase - b[1]).norm())
}

/// Applies the pad qubit by qubit through explicit matrices.
pub fn pad_oracle(key: &PadKey, s: &QubitString) -> Vec<[C; 2]> {
    let bits = key.bits();
    s.iter()
        .enumerate()
        .map(|(i, q)| apply(&pauli_matrix(bits[2 * i], bits[2 * i + 1]), amps(q)))
        .collect()
}

pub fn strings_match(a: &QubitString, b: &QubitString, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| 1.0 - fidelity(amps(x), amps(y)) <= tol)
}

/// The four Bell vectors over |00>,|01>,|10>,|11>, in the order
/// Phi+, Phi-, Psi+, Psi-.
pub fn bell_vectors() -> [[C; 4]; 4] {
    let h = C::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    [[h, O, O, h], [h, O, O, -h], [O, h, h, O], [O, h, -h, O]]
}

/// Builds the 8-amplitude state |p> (x) |pair> (qubit order: message,
/// first half, second half), projects qubits 0 and 1 on each Bell vector,
/// and returns the unnormalized third-qubit state per outcome.
pub fn bell_projection(p: [C; 2], pair: &[C; 4]) -> [[C; 2]; 4] {
    let full = kron(&p, pair);
    bell_vectors().map(|bell| {
        let mut out = [O; 2];
        for (idx, amp) in full.iter().enumerate() {
            let first_two = idx >> 1;
            let last = idx & 1;
            out[last] += bell[first_two].conj() * amp;
        }
        out
    })
}

/// Average of |psi_k><psi_k| over the states given.
pub fn average_density(states: &[[C; 2]]) -> Mat2 {
    let mut rho = [[O; 2]; 2];
    for s in states {
        for i in 0..2 {
            for j in 0..2 {
                rho[i][j] += s[i] * s[j].conj();
            }
        }
    }
    let w = C::new(1.0 / states.len() as f64, 0.0);
    rho.map(|row| row.map(|x| x * w))
}

pub fn max_deviation_from_half_identity(rho: &Mat2) -> f64 {
    let half = C::new(0.5, 0.0);
    [
        (rho[0][0] - half).norm(),
        rho[0][1].norm(),
        rho[1][0].norm(),
        (rho[1][1] - half).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

/// Every key of `qubits` qubits, in counting order.
pub fn all_keys(qubits: usize) -> Vec<PadKey> {
    let bits = 2 * qubits;
    (0u32..1 << bits)
        .map(|m| PadKey::new((0..bits).map(|b| m >> b & 1 == 1).collect()).unwrap())
        .collect()
}
