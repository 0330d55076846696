//! Arbitrated signature without entangled states.
//!
//! Alice pads the message with `r`, derives `|R_AB> = M_{K_AB}(|P'>)`, signs
//! `|P'>` with `K_A`, and sends all three encrypted under `K_AB`. The
//! arbitrator checks `|S_A>` against `|P'>` and posts `V_T`; the receiver
//! checks `M^{-1}(|R_AB>)` against `|P'>` and posts `V_B`; Alice then opens
//! `r` on the board.
//!
//! `K_AB` is laid out as `N` qubits of key for `M` followed by the key for
//! the bundle encryption, so the two uses never share pad bits.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hardened::{
    check_receiver_binding, enforce_preregistration, signed_payload, Access, BindingCheck,
};
use crate::harness::{
    digest_bits, digest_qubits, digest_text, Board, Channel, EventKind, EventSpec, Lab,
    ParticipantId, SessionId, Topic, ViewRecord,
};
use crate::qcore::{qotp_decrypt, qotp_encrypt, state_equal, PadKey, QubitString, DEFAULT_TOLERANCE};
use crate::verdict::{BobVerdict, FinalSignature, Rejection, VerifyOutcome};

use ParticipantId::{Alice, Arbitrator};

/// Decrypted signature contents `(|P'>, |R_AB>, |S_A>)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainSignature {
    pub session: SessionId,
    pub p_prime: QubitString,
    pub r_ab: QubitString,
    pub s_a: QubitString,
    pub r_final: Option<PadKey>,
}

/// `E_{K_AB}(|P'>, |R_AB>, |S_A>)` in transit.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainBundle {
    pub session: SessionId,
    pub sealed: QubitString,
    pub message_len: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlainSigningOutput {
    pub bundle: PlainBundle,
    pub r: PadKey,
    pub contents: PlainSignature,
}

/// Qubits of `K_AB` needed for an `n`-qubit message with `id_qubits` of
/// receiver identity.
pub fn shared_key_qubits(n: usize, id_qubits: usize) -> usize {
    n + bundle_len(n, id_qubits)
}

fn bundle_len(n: usize, id_qubits: usize) -> usize {
    3 * n + id_qubits
}

fn split_shared_key(k_ab: &PadKey, n: usize) -> Result<(PadKey, PadKey)> {
    let total = k_ab.qubit_count();
    if total <= 3 * n {
        return Err(Error::KeyLength {
            expected: 2 * shared_key_qubits(n, 0),
            actual: k_ab.bit_len(),
        });
    }
    Ok((k_ab.segment(0, n)?, k_ab.segment(n, total - n)?))
}

/// `M_{K_AB}`: a one-time pad under the leading segment of `K_AB`.
pub fn m_apply(k_ab: &PadKey, p_prime: &QubitString) -> Result<QubitString> {
    let (m_key, _) = split_shared_key(k_ab, p_prime.len())?;
    qotp_encrypt(&m_key, p_prime)
}

pub fn m_invert(k_ab: &PadKey, r_ab: &QubitString) -> Result<QubitString> {
    let (m_key, _) = split_shared_key(k_ab, r_ab.len())?;
    qotp_decrypt(&m_key, r_ab)
}

/// Steps S1-S3 with a fresh pad.
pub fn sign_plain<R: Rng + ?Sized>(
    message: &QubitString,
    k_a: &PadKey,
    k_ab: &PadKey,
    session: SessionId,
    rng: &mut R,
) -> Result<PlainSigningOutput> {
    let r = PadKey::random(message.len(), rng);
    sign_plain_with_pad(message, k_a, k_ab, session, r, None)
}

pub fn sign_plain_with_pad(
    message: &QubitString,
    k_a: &PadKey,
    k_ab: &PadKey,
    session: SessionId,
    r: PadKey,
    bind_to: Option<ParticipantId>,
) -> Result<PlainSigningOutput> {
    let n = message.len();
    let id_qubits = if bind_to.is_some() { crate::hardened::ID_QUBITS } else { 0 };
    if k_ab.qubit_count() != shared_key_qubits(n, id_qubits) {
        return Err(Error::KeyLength {
            expected: 2 * shared_key_qubits(n, id_qubits),
            actual: k_ab.bit_len(),
        });
    }
    let p_prime = qotp_encrypt(&r, message)?;
    let r_ab = m_apply(k_ab, &p_prime)?;
    let s_a = qotp_encrypt(k_a, &signed_payload(&p_prime, bind_to)?)?;
    let (_, bundle_key) = split_shared_key(k_ab, n)?;
    let sealed = qotp_encrypt(&bundle_key, &p_prime.concat(&r_ab).concat(&s_a))?;
    Ok(PlainSigningOutput {
        bundle: PlainBundle {
            session,
            sealed,
            message_len: n,
        },
        r,
        contents: PlainSignature {
            session,
            p_prime,
            r_ab,
            s_a,
            r_final: None,
        },
    })
}

/// Step V1, first half: the receiver strips `K_AB`.
pub fn open_bundle(bundle: &PlainBundle, k_ab: &PadKey) -> Result<PlainSignature> {
    let n = bundle.message_len;
    if bundle.sealed.len() < 3 * n {
        return Err(Error::Protocol(format!(
            "bundle of {} qubits is too short for a {n}-qubit message",
            bundle.sealed.len()
        )));
    }
    let (_, bundle_key) = split_shared_key(k_ab, n)?;
    let opened = qotp_decrypt(&bundle_key, &bundle.sealed)?;
    let id_qubits = bundle.sealed.len() - 3 * n;
    let mut parts = opened.split(&[n, n, n + id_qubits])?.into_iter();
    Ok(PlainSignature {
        session: bundle.session,
        p_prime: parts.next().unwrap(),
        r_ab: parts.next().unwrap(),
        s_a: parts.next().unwrap(),
        r_final: None,
    })
}

fn open_request(y: &QubitString, key: &PadKey, id_qubits: usize) -> Result<(QubitString, QubitString)> {
    if y.len() != key.qubit_count() || y.len() < id_qubits + 2 || !(y.len() - id_qubits).is_multiple_of(2) {
        return Err(Error::Protocol(format!(
            "request of {} qubits does not fit a {}-qubit key",
            y.len(),
            key.qubit_count()
        )));
    }
    let n = (y.len() - id_qubits) / 2;
    let mut parts = qotp_decrypt(key, y)?.split(&[n, n + id_qubits])?.into_iter();
    Ok((parts.next().unwrap(), parts.next().unwrap()))
}

/// What the arbitrator concludes from one request.
#[derive(Clone, Debug, PartialEq)]
pub struct PlainArbitration {
    pub v_t: bool,
    /// `Y` re-encrypted for the requester, only when `V_T = 1`.
    pub reply: Option<QubitString>,
    pub binding: Option<BindingCheck>,
    pub p_prime: QubitString,
    pub s_a: QubitString,
}

/// Steps V2-V3: decrypt with the requester's key, recover `|P_T'>` from
/// `|S_A>` and compare with `|P'>`. With `bound_to` set the signature must
/// carry that identity.
pub fn arbitrate_plain(
    y: &QubitString,
    k_a: &PadKey,
    requester_key: &PadKey,
    bound_to: Option<ParticipantId>,
) -> Result<PlainArbitration> {
    let id_qubits = if bound_to.is_some() { crate::hardened::ID_QUBITS } else { 0 };
    let (p_prime, s_a) = open_request(y, requester_key, id_qubits)?;
    if k_a.qubit_count() != s_a.len() {
        return Err(Error::Protocol(format!(
            "signer key covers {} qubits, signature has {}",
            k_a.qubit_count(),
            s_a.len()
        )));
    }
    let (v_t, binding) = match bound_to {
        Some(requester) => {
            let check = check_receiver_binding(&s_a, &p_prime, k_a, requester)?;
            (check.pass(), Some(check))
        }
        None => {
            let p_t = qotp_decrypt(k_a, &s_a)?;
            (state_equal(&p_t, &p_prime, DEFAULT_TOLERANCE)?, None)
        }
    };
    let reply = if v_t {
        Some(qotp_encrypt(requester_key, &p_prime.concat(&s_a))?)
    } else {
        None
    };
    Ok(PlainArbitration {
        v_t,
        reply,
        binding,
        p_prime,
        s_a,
    })
}

/// Receiver's step V4 outcome.
#[derive(Clone, Debug, PartialEq)]
pub enum ReceiverCheck {
    /// `V_T = 0` was on the board.
    ArbitratorRejected,
    Compared {
        v_b: bool,
        p_prime: QubitString,
        s_a: QubitString,
    },
}

/// Step V4: reads `V_T`, opens the arbitrator's reply and compares the
/// receiver's own copy of `|P'>` with it.
pub fn receiver_check_plain(
    v_t: Option<bool>,
    reply: Option<&QubitString>,
    key: &PadKey,
    own_copy: &QubitString,
    id_qubits: usize,
) -> Result<ReceiverCheck> {
    match v_t {
        None => Err(Error::ProtocolStall("no V_T on the board".into())),
        Some(false) => Ok(ReceiverCheck::ArbitratorRejected),
        Some(true) => {
            let reply =
                reply.ok_or_else(|| Error::ProtocolStall("arbitrator sent no reply".into()))?;
            let (p_prime, s_a) = open_request(reply, key, id_qubits)?;
            let v_b = state_equal(own_copy, &p_prime, DEFAULT_TOLERANCE)?;
            Ok(ReceiverCheck::Compared { v_b, p_prime, s_a })
        }
    }
}

/// Step V6: reads `r` and recovers the message.
pub fn receiver_finish_plain(
    session: SessionId,
    p_prime: &QubitString,
    s_a: QubitString,
    board: &Board,
) -> Result<BobVerdict> {
    let opened = board.latest(session, Topic::PadReveal).ok_or_else(|| {
        Error::ProtocolStall(format!("no pad announced for session {session}"))
    })?;
    let r = PadKey::new(opened.value.clone())?;
    Ok(BobVerdict::Accepted {
        message: qotp_decrypt(&r, p_prime)?,
        signature: FinalSignature { s_a, r },
    })
}

/// Bob's side of steps V1 and V4-V6 against a board that already carries
/// `V_T`, and `r` if the run got that far. `reply` is what the arbitrator
/// returned.
pub fn verify_bob_plain(
    bundle: &PlainBundle,
    k_ab: &PadKey,
    k_b: &PadKey,
    reply: Option<&QubitString>,
    board: &Board,
) -> Result<BobVerdict> {
    let sig = open_bundle(bundle, k_ab)?;
    let own_copy = m_invert(k_ab, &sig.r_ab)?;
    let id_qubits = sig.s_a.len() - sig.p_prime.len();
    let v_t = board.read_flag(bundle.session, Topic::ArbitratorVerdict);
    match receiver_check_plain(v_t, reply, k_b, &own_copy, id_qubits)? {
        ReceiverCheck::ArbitratorRejected => Ok(BobVerdict::Rejected(Rejection::Arbitrator)),
        ReceiverCheck::Compared { v_b: false, .. } => Ok(BobVerdict::Rejected(Rejection::Receiver)),
        ReceiverCheck::Compared { p_prime, s_a, .. } => {
            receiver_finish_plain(bundle.session, &p_prime, s_a, board)
        }
    }
}

/// Lab-bound driver for the scheme without entanglement.
pub struct PlainProtocol;

impl PlainProtocol {
    /// Step I1: `K_A`, one arbitrator key per receiver, and `K_AB` between
    /// Alice and `intended`.
    pub fn share_keys(
        lab: &mut Lab,
        session: SessionId,
        n: usize,
        intended: ParticipantId,
        other_receivers: &[ParticipantId],
    ) -> Result<()> {
        let id = lab.countermeasures.id_qubits();
        let mut links = vec![
            (Alice, Arbitrator, n + id),
            (intended, Arbitrator, 2 * n + id),
        ];
        links.extend(other_receivers.iter().map(|&r| (r, Arbitrator, 2 * n + id)));
        links.push((Alice, intended, shared_key_qubits(n, id)));
        lab.share_keys(session, &links)
    }

    /// Receiver registration, when enabled.
    pub fn initialize(lab: &mut Lab, session: SessionId, receiver: ParticipantId) -> Result<()> {
        if lab.countermeasures.preregister_receiver {
            lab.registry.register_receiver(Alice, receiver, session)?;
            lab.transcript.record(
                EventSpec::new(
                    Alice,
                    EventKind::Register,
                    "I0",
                    session,
                    digest_text(&format!("{session}:{receiver}")),
                )
                .subject(receiver),
            );
        }
        Ok(())
    }

    /// Steps S1-S3.
    pub fn sign(
        lab: &mut Lab,
        session: SessionId,
        receiver: ParticipantId,
        message: &QubitString,
    ) -> Result<PlainBundle> {
        let k_a = lab.keys.key(Alice, Arbitrator)?.clone();
        let k_ab = lab.keys.key(Alice, receiver)?.clone();
        let r = PadKey::random(message.len(), &mut lab.rng);
        let bind_to = lab.countermeasures.bind_receiver_id.then_some(receiver);
        let out = sign_plain_with_pad(message, &k_a, &k_ab, session, r, bind_to)?;
        let c = &out.contents;
        let t = &mut lab.transcript;
        t.record(EventSpec::new(
            Alice,
            EventKind::Encrypt,
            "S1",
            session,
            digest_text(&format!("{}|{}", digest_qubits(&c.p_prime), digest_qubits(&c.r_ab))),
        ));
        t.record(EventSpec::new(Alice, EventKind::Encrypt, "S2", session, digest_qubits(&c.s_a)));
        Channel::authenticated(Alice, receiver)?.send(t, "S3", session, digest_qubits(&out.bundle.sealed));
        lab.signer_pads.insert(session, out.r);
        Ok(out.bundle)
    }

    /// Bob's step V1 decryption, plus his second copy of `|P'>` taken from
    /// `|R_AB>`.
    pub fn open(lab: &Lab, holder: ParticipantId, bundle: &PlainBundle) -> Result<(PlainSignature, QubitString)> {
        let k_ab = lab.keys.key(Alice, holder)?;
        let sig = open_bundle(bundle, k_ab)?;
        let copy = m_invert(k_ab, &sig.r_ab)?;
        Ok((sig, copy))
    }

    /// Steps V1-V6 with `verifier` presenting `|P'>`, `|S_A>` and its own
    /// copy of `|P'>`.
    pub fn verify(
        lab: &mut Lab,
        verifier: ParticipantId,
        session: SessionId,
        p_prime: &QubitString,
        s_a: &QubitString,
        own_copy: &QubitString,
    ) -> Result<VerifyOutcome> {
        let id_qubits = lab.countermeasures.id_qubits();
        let key = lab.keys.key(verifier, Arbitrator)?.clone();
        let k_a = lab.keys.key(Alice, Arbitrator)?.clone();

        // V1
        let y = qotp_encrypt(&key, &p_prime.concat(s_a))?;
        Channel::authenticated(verifier, Arbitrator)?.send(&mut lab.transcript, "V1", session, digest_qubits(&y));

        // V2
        let access = enforce_preregistration(&lab.registry, &lab.countermeasures, session, verifier)
            .or_else(|e| match e {
                Error::DeniedUnregistered(_) => Ok(Access::Deny),
                other => Err(other),
            })?;
        if lab.countermeasures.preregister_receiver {
            lab.transcript.record(
                EventSpec::new(Arbitrator, EventKind::RegistryCheck, "V2", session, digest_text(&format!("{access:?}")))
                    .subject(verifier)
                    .pass(access == Access::Allow),
            );
        }
        lab.transcript.record(EventSpec::new(Arbitrator, EventKind::Decrypt, "V2", session, digest_qubits(&y)));

        // V3
        let bound_to = lab.countermeasures.bind_receiver_id.then_some(verifier);
        let arbitration = arbitrate_plain(&y, &k_a, &key, bound_to)?;
        if let Some(check) = &arbitration.binding {
            if access == Access::Allow {
                lab.transcript.record(
                    EventSpec::new(
                        Arbitrator,
                        EventKind::IdentityCheck,
                        "V3",
                        session,
                        digest_text(&format!("{:?}", check.embedded)),
                    )
                    .subject(verifier)
                    .pass(check.pass()),
                );
            }
        }
        let v_t = arbitration.v_t && access == Access::Allow;
        lab.arbiter_view.push(ViewRecord {
            requester: verifier,
            key_digest: digest_bits(key.bits()),
            p_prime_digest: digest_qubits(&arbitration.p_prime),
            s_a_digest: digest_qubits(&arbitration.s_a),
            verdict: v_t,
        });
        lab.transcript.set_verdict(format!("{session}.arbitrator_v_t"), v_t);
        lab.announce("V3", session, Topic::ArbitratorVerdict, vec![v_t], Arbitrator);
        let reply = if v_t { arbitration.reply } else { None };
        if let Some(reply) = &reply {
            Channel::authenticated(Arbitrator, verifier)?.send(&mut lab.transcript, "V3", session, digest_qubits(reply));
        }

        let outcome = |verdict| VerifyOutcome {
            verifier,
            session,
            verdict,
            arbitrator_flagged: !v_t,
            denied: access == Access::Deny,
        };

        // V4
        let read_v_t = lab.board.read_flag(session, Topic::ArbitratorVerdict);
        let check = receiver_check_plain(read_v_t, reply.as_ref(), &key, own_copy, id_qubits)?;
        let (p_prime, s_a) = match check {
            ReceiverCheck::ArbitratorRejected => {
                lab.transcript.record(
                    EventSpec::new(verifier, EventKind::FlagCheck, "V4", session, digest_bits(&[false])).pass(false),
                );
                lab.transcript.set_verdict(format!("{session}.{verifier}.accept"), false);
                return Ok(outcome(BobVerdict::Rejected(Rejection::Arbitrator)));
            }
            ReceiverCheck::Compared { v_b, p_prime, s_a } => {
                lab.announce("V4", session, Topic::ReceiverVerdict, vec![v_b], verifier);
                if !v_b {
                    // V5: Alice and the arbitrator abort.
                    lab.transcript.set_verdict(format!("{session}.{verifier}.accept"), false);
                    return Ok(outcome(BobVerdict::Rejected(Rejection::Receiver)));
                }
                (p_prime, s_a)
            }
        };

        // V5: Alice opens r once V_B = 1 is on the board.
        if lab.board.read_flag(session, Topic::ReceiverVerdict) == Some(true) {
            let r = lab
                .signer_pads
                .get(&session)
                .cloned()
                .ok_or_else(|| Error::ProtocolStall(format!("Alice holds no pad for {session}")))?;
            lab.announce("V5", session, Topic::PadReveal, r.bits().to_vec(), Alice);
        }

        // V6
        let verdict = receiver_finish_plain(session, &p_prime, s_a, &lab.board)?;
        if let BobVerdict::Accepted { message, .. } = &verdict {
            lab.transcript.record(EventSpec::new(verifier, EventKind::Recover, "V6", session, digest_qubits(message)));
        }
        lab.transcript.set_verdict(format!("{session}.{verifier}.accept"), true);
        Ok(outcome(verdict))
    }

    /// One complete honest session.
    pub fn run_honest(
        lab: &mut Lab,
        receiver: ParticipantId,
        message: &QubitString,
    ) -> Result<VerifyOutcome> {
        let n = message.len();
        let session = lab.open_session();
        Self::share_keys(lab, session, n, receiver, &[])?;
        Self::initialize(lab, session, receiver)?;
        let bundle = Self::sign(lab, session, receiver, message)?;
        let (sig, copy) = Self::open(lab, receiver, &bundle)?;
        Self::verify(lab, receiver, session, &sig.p_prime, &sig.s_a, &copy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardened::CountermeasureSet;
    use crate::harness::Scheme;
    use crate::qcore::Pauli;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use ParticipantId::Bob;

    struct Fixture {
        message: QubitString,
        k_a: PadKey,
        k_ab: PadKey,
        k_b: PadKey,
    }

    fn fixture(n: usize, seed: u64) -> (Fixture, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = Fixture {
            message: QubitString::random(n, &mut rng).unwrap(),
            k_a: PadKey::random(n, &mut rng),
            k_ab: PadKey::random(shared_key_qubits(n, 0), &mut rng),
            k_b: PadKey::random(2 * n, &mut rng),
        };
        (f, rng)
    }

    #[test]
    fn zero_pads_expose_structure() {
        let n = 3;
        let (f, _) = fixture(n, 1);
        let out = sign_plain_with_pad(
            &f.message,
            &f.k_a,
            &PadKey::zeros(shared_key_qubits(n, 0)),
            SessionId(1),
            PadKey::zeros(n),
            None,
        )
        .unwrap();
        assert_eq!(out.contents.p_prime, f.message);
        assert_eq!(out.contents.r_ab, out.contents.p_prime);
    }

    #[test]
    fn bundle_opens_into_three_strings() {
        let n = 4;
        let (f, mut rng) = fixture(n, 2);
        let out = sign_plain(&f.message, &f.k_a, &f.k_ab, SessionId(1), &mut rng).unwrap();
        let opened = open_bundle(&out.bundle, &f.k_ab).unwrap();
        assert_eq!(opened.p_prime.len(), n);
        assert_eq!(opened.r_ab.len(), n);
        assert_eq!(opened.s_a.len(), n);
        assert_eq!(opened, out.contents);
        let copy = m_invert(&f.k_ab, &opened.r_ab).unwrap();
        assert!(state_equal(&copy, &opened.p_prime, DEFAULT_TOLERANCE).unwrap());
    }

    #[test]
    fn sign_checks_key_lengths() {
        let (f, mut rng) = fixture(2, 3);
        let short = PadKey::random(3, &mut rng);
        assert!(matches!(
            sign_plain(&f.message, &f.k_a, &short, SessionId(1), &mut rng),
            Err(Error::KeyLength { .. })
        ));
        let bad_ka = PadKey::random(5, &mut rng);
        assert!(sign_plain(&f.message, &bad_ka, &f.k_ab, SessionId(1), &mut rng).is_err());
    }

    #[test]
    fn arbitration_accepts_honest_and_charlie_alike() {
        let n = 4;
        let (f, mut rng) = fixture(n, 4);
        let out = sign_plain(&f.message, &f.k_a, &f.k_ab, SessionId(1), &mut rng).unwrap();
        let c = &out.contents;
        let y = qotp_encrypt(&f.k_b, &c.p_prime.concat(&c.s_a)).unwrap();
        let bob = arbitrate_plain(&y, &f.k_a, &f.k_b, None).unwrap();
        assert!(bob.v_t);
        assert!(bob.reply.is_some());

        let k_c = PadKey::random(2 * n, &mut rng);
        let y_c = qotp_encrypt(&k_c, &c.p_prime.concat(&c.s_a)).unwrap();
        let charlie = arbitrate_plain(&y_c, &f.k_a, &k_c, None).unwrap();
        assert_eq!(charlie.v_t, bob.v_t);
        assert_eq!(charlie.p_prime, bob.p_prime);
    }

    #[test]
    fn arbitration_rejects_malformed_requests() {
        let (f, mut rng) = fixture(2, 5);
        let y = QubitString::random(3, &mut rng).unwrap();
        assert!(matches!(
            arbitrate_plain(&y, &f.k_a, &f.k_b, None),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn receiver_paths() {
        let n = 3;
        let (f, mut rng) = fixture(n, 6);
        let out = sign_plain(&f.message, &f.k_a, &f.k_ab, SessionId(1), &mut rng).unwrap();
        let c = &out.contents;
        let y = qotp_encrypt(&f.k_b, &c.p_prime.concat(&c.s_a)).unwrap();
        let arb = arbitrate_plain(&y, &f.k_a, &f.k_b, None).unwrap();

        let mut board = Board::new(false);
        // No V_T yet.
        assert!(matches!(
            verify_bob_plain(&out.bundle, &f.k_ab, &f.k_b, arb.reply.as_ref(), &board),
            Err(Error::ProtocolStall(_))
        ));
        board.announce(SessionId(1), Topic::ArbitratorVerdict, vec![true], Arbitrator);
        // V_T but no r yet.
        assert!(matches!(
            verify_bob_plain(&out.bundle, &f.k_ab, &f.k_b, arb.reply.as_ref(), &board),
            Err(Error::ProtocolStall(_))
        ));
        board.announce(SessionId(1), Topic::PadReveal, out.r.bits().to_vec(), Alice);
        let verdict = verify_bob_plain(&out.bundle, &f.k_ab, &f.k_b, arb.reply.as_ref(), &board).unwrap();
        match verdict {
            BobVerdict::Accepted { message, signature } => {
                assert!(state_equal(&message, &f.message, DEFAULT_TOLERANCE).unwrap());
                let opened = qotp_decrypt(&f.k_a, &signature.s_a).unwrap();
                let expected = qotp_encrypt(&signature.r, &f.message).unwrap();
                assert!(state_equal(&opened, &expected, DEFAULT_TOLERANCE).unwrap());
            }
            other => panic!("{other:?}"),
        }

        let mut rejected = Board::new(false);
        rejected.announce(SessionId(1), Topic::ArbitratorVerdict, vec![false], Arbitrator);
        assert_eq!(
            verify_bob_plain(&out.bundle, &f.k_ab, &f.k_b, None, &rejected).unwrap(),
            BobVerdict::Rejected(Rejection::Arbitrator)
        );
    }

    #[test]
    fn tampered_r_ab_aborts() {
        let mut lab = Lab::new(Scheme::Plain, 9, CountermeasureSet::BASELINE);
        let n = 3;
        let message = QubitString::from_bits(&[true, true, false]).unwrap();
        let session = lab.open_session();
        PlainProtocol::share_keys(&mut lab, session, n, Bob, &[]).unwrap();
        let bundle = PlainProtocol::sign(&mut lab, session, Bob, &message).unwrap();
        let (sig, _) = PlainProtocol::open(&lab, Bob, &bundle).unwrap();
        let k_ab = lab.keys.key(Alice, Bob).unwrap().clone();
        let bad_r_ab = sig.r_ab.map_qubit(1, |q| q.apply(Pauli::X));
        let copy = m_invert(&k_ab, &bad_r_ab).unwrap();
        let outcome = PlainProtocol::verify(&mut lab, Bob, session, &sig.p_prime, &sig.s_a, &copy).unwrap();
        assert_eq!(outcome.verdict, BobVerdict::Rejected(Rejection::Receiver));
        assert_eq!(lab.board.read_flag(session, Topic::ReceiverVerdict), Some(false));
        assert!(lab.board.latest(session, Topic::PadReveal).is_none());
    }

    #[test]
    fn honest_run_board_order() {
        let mut lab = Lab::new(Scheme::Plain, 10, CountermeasureSet::BASELINE);
        let message = QubitString::random(2, &mut lab.rng).unwrap();
        let outcome = PlainProtocol::run_honest(&mut lab, Bob, &message).unwrap();
        assert!(outcome.accepted());
        let topics: Vec<Topic> = lab.board.entries().iter().map(|a| a.topic).collect();
        assert_eq!(
            topics,
            vec![Topic::ArbitratorVerdict, Topic::ReceiverVerdict, Topic::PadReveal]
        );
        assert_eq!(lab.transcript.events().len(), 11);
    }
}
