//! Arbitrated signature with entangled states.
//!
//! Alice pads the message with a secret `r`, signs the padded string with
//! `K_A`, and teleports it to the receiver over pre-shared Bell pairs. The
//! receiver has the arbitrator check `S_A` under `K_A`, checks the
//! teleported copy against `|P'>`, and once Alice opens `r` on the board
//! recovers the message.
//!
//! The pure step functions (`sign_entangled`, `arbitrate_entangled`,
//! `verify_bob_entangled`) carry no logging; [`EntangledProtocol`] drives
//! them against a [`Lab`] and records every step in its transcript.

use rand::Rng;

use crate::error::{Error, Result};
use crate::hardened::{check_receiver_binding, enforce_preregistration, signed_payload, Access};
use crate::harness::{
    digest_bits, digest_qubits, digest_text, distribute_bell_pairs, Board, Channel, EventKind,
    EventSpec, Lab, ParticipantId, SessionId, Topic, ViewRecord,
};
use crate::qcore::{
    compose_and_bell_measure, qotp_decrypt, qotp_encrypt, state_equal, teleport_correct,
    BellOutcome, BellPair, PadKey, Qubit, QubitString, DEFAULT_TOLERANCE,
};

pub use crate::verdict::{BobVerdict, FinalSignature, Rejection, VerifyOutcome};

use ParticipantId::{Alice, Arbitrator};

/// The transmitted signature `(|P'>, |S_A>, M_A)`, plus `r` once it has
/// been opened.
#[derive(Clone, Debug, PartialEq)]
pub struct EntangledSignature {
    pub session: SessionId,
    pub p_prime: QubitString,
    pub s_a: QubitString,
    pub m_a: Vec<BellOutcome>,
    pub r_final: Option<PadKey>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerificationParam(pub bool);

impl VerificationParam {
    pub fn bit(self) -> u8 {
        self.0 as u8
    }
}

/// The classical slot of the arbitrator's reply. The pad itself is never
/// sent here; it is opened on the board later.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArbiterFlag {
    Proceed,
    Reject,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArbiterReply {
    /// `E_K(|P'>, |S_A>)` under the requester's key.
    pub sealed: QubitString,
    pub flag: ArbiterFlag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SigningOutput {
    pub signature: EntangledSignature,
    /// Alice's secret pad.
    pub r: PadKey,
    /// Second halves of the pairs after Alice's measurements, with whoever
    /// holds them.
    pub remote_halves: Vec<(ParticipantId, Qubit)>,
}

/// Steps S1-S5 with a fresh random pad.
pub fn sign_entangled<R: Rng + ?Sized>(
    message: &QubitString,
    k_a: &PadKey,
    pairs: &[BellPair],
    session: SessionId,
    rng: &mut R,
) -> Result<SigningOutput> {
    let r = PadKey::random(message.len(), rng);
    sign_entangled_with_pad(message, k_a, pairs, session, r, None, rng)
}

/// Steps S1-S5 with a caller-chosen pad. With `bind_to` set, the receiver's
/// identity register is appended to `|P'>` before `K_A` is applied.
pub fn sign_entangled_with_pad<R: Rng + ?Sized>(
    message: &QubitString,
    k_a: &PadKey,
    pairs: &[BellPair],
    session: SessionId,
    r: PadKey,
    bind_to: Option<ParticipantId>,
    rng: &mut R,
) -> Result<SigningOutput> {
    let n = message.len();
    if pairs.len() != n {
        return Err(Error::Length {
            left: n,
            right: pairs.len(),
        });
    }
    let p_prime = qotp_encrypt(&r, message)?;
    let s_a = qotp_encrypt(k_a, &signed_payload(&p_prime, bind_to)?)?;
    let mut m_a = Vec::with_capacity(n);
    let mut remote_halves = Vec::with_capacity(n);
    for (q, pair) in p_prime.iter().zip(pairs) {
        let (outcome, remote) = compose_and_bell_measure(q, pair, rng)?;
        m_a.push(outcome);
        remote_halves.push((pair.holder_second, remote));
    }
    Ok(SigningOutput {
        signature: EntangledSignature {
            session,
            p_prime,
            s_a,
            m_a,
            r_final: None,
        },
        r,
        remote_halves,
    })
}

/// Y = E_K(|P'>, |S_A>) as sent to the arbitrator.
pub fn seal_request(key: &PadKey, p_prime: &QubitString, s_a: &QubitString) -> Result<QubitString> {
    qotp_encrypt(key, &p_prime.concat(s_a))
}

fn open_request(
    y: &QubitString,
    key: &PadKey,
    id_qubits: usize,
) -> Result<(QubitString, QubitString)> {
    if y.len() != key.qubit_count() || y.len() < id_qubits + 2 || !(y.len() - id_qubits).is_multiple_of(2) {
        return Err(Error::Protocol(format!(
            "request of {} qubits does not fit a {}-qubit key",
            y.len(),
            key.qubit_count()
        )));
    }
    let n = (y.len() - id_qubits) / 2;
    let parts = qotp_decrypt(key, y)?.split(&[n, n + id_qubits])?;
    let mut parts = parts.into_iter();
    Ok((parts.next().unwrap(), parts.next().unwrap()))
}

/// Steps V2-V3 for an unbound signature: `V = 1` iff `E_{K_A}(|P'>)`
/// equals `|S_A>`.
pub fn arbitrate_entangled(
    y_b: &QubitString,
    k_a: &PadKey,
    k_b: &PadKey,
) -> Result<(VerificationParam, ArbiterReply)> {
    let (p_prime, s_a) = open_request(y_b, k_b, 0)?;
    let s_t = qotp_encrypt(k_a, &p_prime).map_err(|_| {
        Error::Protocol(format!(
            "signer key covers {} qubits, message has {}",
            k_a.qubit_count(),
            p_prime.len()
        ))
    })?;
    let v = VerificationParam(state_equal(&s_t, &s_a, DEFAULT_TOLERANCE)?);
    Ok((v, reply(k_b, &p_prime, &s_a, v)?))
}

fn reply(
    key: &PadKey,
    p_prime: &QubitString,
    s_a: &QubitString,
    v: VerificationParam,
) -> Result<ArbiterReply> {
    Ok(ArbiterReply {
        sealed: seal_request(key, p_prime, s_a)?,
        flag: if v.0 {
            ArbiterFlag::Proceed
        } else {
            ArbiterFlag::Reject
        },
    })
}

/// Steps V4-V5: the flag check and the teleportation comparison. On
/// success returns `(|P'>, |S_A>)` as returned by the arbitrator.
pub fn bob_precheck_entangled(
    sig: &EntangledSignature,
    reply: &ArbiterReply,
    key: &PadKey,
    remote_halves: &[Qubit],
    id_qubits: usize,
) -> Result<std::result::Result<(QubitString, QubitString), Rejection>> {
    if reply.flag == ArbiterFlag::Reject {
        return Ok(Err(Rejection::Arbitrator));
    }
    let (p_prime, s_a) = open_request(&reply.sealed, key, id_qubits)?;
    if remote_halves.len() != sig.m_a.len() || sig.m_a.len() != p_prime.len() {
        return Err(Error::Protocol(format!(
            "{} halves and {} outcomes for a {}-qubit message",
            remote_halves.len(),
            sig.m_a.len(),
            p_prime.len()
        )));
    }
    let p_b = QubitString::new(
        sig.m_a
            .iter()
            .zip(remote_halves)
            .map(|(&m, &q)| teleport_correct(m, q))
            .collect(),
    )?;
    if !state_equal(&p_b, &p_prime, DEFAULT_TOLERANCE)? {
        return Ok(Err(Rejection::Teleport));
    }
    Ok(Ok((p_prime, s_a)))
}

/// Step V7: reads `r` from the board and strips it from `|P'>`.
pub fn bob_finish_entangled(
    session: SessionId,
    p_prime: &QubitString,
    s_a: QubitString,
    board: &Board,
) -> Result<BobVerdict> {
    let opened = board.latest(session, Topic::PadReveal).ok_or_else(|| {
        Error::ProtocolStall(format!("no pad announced for session {session}"))
    })?;
    let r = PadKey::new(opened.value.clone())?;
    let message = qotp_decrypt(&r, p_prime)?;
    Ok(BobVerdict::Accepted {
        message,
        signature: FinalSignature { s_a, r },
    })
}

/// Steps V4-V7 from the receiver's side, given the arbitrator's reply and a
/// board on which Alice has already opened `r`.
pub fn verify_bob_entangled(
    sig: &EntangledSignature,
    reply: &ArbiterReply,
    k_b: &PadKey,
    remote_halves: &[Qubit],
    board: &Board,
) -> Result<BobVerdict> {
    match bob_precheck_entangled(sig, reply, k_b, remote_halves, 0)? {
        Err(rejection) => Ok(BobVerdict::Rejected(rejection)),
        Ok((p_prime, s_a)) => bob_finish_entangled(sig.session, &p_prime, s_a, board),
    }
}

/// Per-session state Alice produces while signing.
#[derive(Clone, Debug)]
pub struct SignedSession {
    pub receiver: ParticipantId,
    pub signature: EntangledSignature,
    pub remote_halves: Vec<(ParticipantId, Qubit)>,
}

impl SignedSession {
    /// Halves of this session held by `holder`, in pair order.
    pub fn halves_held_by(&self, holder: ParticipantId) -> Vec<Qubit> {
        self.remote_halves
            .iter()
            .filter(|(h, _)| *h == holder)
            .map(|&(_, q)| q)
            .collect()
    }
}

/// Lab-bound driver for the entangled scheme.
pub struct EntangledProtocol;

impl EntangledProtocol {
    pub fn signer_key_qubits(lab: &Lab, n: usize) -> usize {
        n + lab.countermeasures.id_qubits()
    }

    pub fn receiver_key_qubits(lab: &Lab, n: usize) -> usize {
        2 * n + lab.countermeasures.id_qubits()
    }

    /// Step I1: `K_A` for Alice and one arbitrator key per receiver.
    pub fn share_keys(
        lab: &mut Lab,
        session: SessionId,
        n: usize,
        receivers: &[ParticipantId],
    ) -> Result<()> {
        let mut links = vec![(Alice, Arbitrator, Self::signer_key_qubits(lab, n))];
        links.extend(
            receivers
                .iter()
                .map(|&r| (r, Arbitrator, Self::receiver_key_qubits(lab, n))),
        );
        lab.share_keys(session, &links)
    }

    /// Receiver registration (when enabled) and step I2.
    pub fn initialize(
        lab: &mut Lab,
        session: SessionId,
        receiver: ParticipantId,
        n: usize,
    ) -> Result<Vec<BellPair>> {
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
        distribute_bell_pairs(&mut lab.transcript, session, n, receiver)
    }

    /// Steps S1-S5. Alice keeps `r` in the lab's signer pads.
    pub fn sign(
        lab: &mut Lab,
        session: SessionId,
        receiver: ParticipantId,
        message: &QubitString,
        pairs: &[BellPair],
    ) -> Result<SignedSession> {
        let k_a = lab.keys.key(Alice, Arbitrator)?.clone();
        let r = PadKey::random(message.len(), &mut lab.rng);
        let bind_to = lab.countermeasures.bind_receiver_id.then_some(receiver);
        let out = sign_entangled_with_pad(message, &k_a, pairs, session, r, bind_to, &mut lab.rng)?;
        let sig = &out.signature;
        let t = &mut lab.transcript;
        t.record(EventSpec::new(Alice, EventKind::Encrypt, "S1", session, digest_qubits(&sig.p_prime)));
        t.record(EventSpec::new(Alice, EventKind::Encrypt, "S2", session, digest_qubits(&sig.s_a)));
        t.record(EventSpec::new(Alice, EventKind::Compose, "S3", session, digest_qubits(&sig.p_prime)));
        for m in &sig.m_a {
            t.record(EventSpec::new(
                Alice,
                EventKind::BellMeasure,
                "S4",
                session,
                digest_text(&format!("{m:?}")),
            ));
        }
        Channel::authenticated(Alice, receiver)?.send(t, "S5", session, signature_digest(sig));
        lab.signer_pads.insert(session, out.r);
        Ok(SignedSession {
            receiver,
            signature: out.signature,
            remote_halves: out.remote_halves,
        })
    }

    /// Steps V1-V7 with `verifier` presenting `sig` and the halves it holds.
    pub fn verify(
        lab: &mut Lab,
        verifier: ParticipantId,
        sig: &EntangledSignature,
        halves: &[Qubit],
    ) -> Result<VerifyOutcome> {
        let session = sig.session;
        let id_qubits = lab.countermeasures.id_qubits();
        let key = lab.keys.key(verifier, Arbitrator)?.clone();
        let k_a = lab.keys.key(Alice, Arbitrator)?.clone();

        // V1
        let y = seal_request(&key, &sig.p_prime, &sig.s_a)?;
        Channel::authenticated(verifier, Arbitrator)?.send(
            &mut lab.transcript,
            "V1",
            session,
            digest_qubits(&y),
        );

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
        let (p_prime, s_a) = open_request(&y, &key, id_qubits)?;
        let v = if access == Access::Deny {
            VerificationParam(false)
        } else if lab.countermeasures.bind_receiver_id {
            let check = check_receiver_binding(&s_a, &p_prime, &k_a, verifier)?;
            lab.transcript.record(
                EventSpec::new(
                    Arbitrator,
                    EventKind::IdentityCheck,
                    "V2",
                    session,
                    digest_text(&format!("{:?}", check.embedded)),
                )
                .subject(verifier)
                .pass(check.pass()),
            );
            VerificationParam(check.pass())
        } else {
            let s_t = qotp_encrypt(&k_a, &p_prime)?;
            VerificationParam(state_equal(&s_t, &s_a, DEFAULT_TOLERANCE)?)
        };
        lab.transcript.record(
            EventSpec::new(Arbitrator, EventKind::Compare, "V2", session, digest_qubits(&s_a)).pass(v.0),
        );
        lab.transcript.set_verdict(format!("{session}.arbitrator_v"), v.0);
        lab.arbiter_view.push(ViewRecord {
            requester: verifier,
            key_digest: digest_bits(key.bits()),
            p_prime_digest: digest_qubits(&p_prime),
            s_a_digest: digest_qubits(&s_a),
            verdict: v.0,
        });

        // V3
        let reply = reply(&key, &p_prime, &s_a, v)?;
        Channel::authenticated(Arbitrator, verifier)?.send(
            &mut lab.transcript,
            "V3",
            session,
            digest_qubits(&reply.sealed),
        );

        let flagged = !v.0;
        let outcome = |verdict| VerifyOutcome {
            verifier,
            session,
            verdict,
            arbitrator_flagged: flagged,
            denied: access == Access::Deny,
        };

        // V4-V5
        let checked = bob_precheck_entangled(sig, &reply, &key, halves, id_qubits)?;
        lab.transcript.record(
            EventSpec::new(verifier, EventKind::FlagCheck, "V4", session, digest_text(&format!("{:?}", reply.flag)))
                .pass(reply.flag == ArbiterFlag::Proceed),
        );
        let (p_prime, s_a) = match checked {
            Err(rejection) => {
                if rejection == Rejection::Teleport {
                    lab.transcript.record(
                        EventSpec::new(verifier, EventKind::Compare, "V5", session, digest_qubits(&sig.p_prime))
                            .pass(false),
                    );
                }
                lab.transcript.set_verdict(format!("{session}.{verifier}.accept"), false);
                return Ok(outcome(BobVerdict::Rejected(rejection)));
            }
            Ok(parts) => parts,
        };
        lab.announce("V5", session, Topic::RevealRequest, vec![true], verifier);

        // V6: Alice answers the request for her session.
        let r = lab
            .signer_pads
            .get(&session)
            .cloned()
            .ok_or_else(|| Error::ProtocolStall(format!("Alice holds no pad for {session}")))?;
        lab.announce("V6", session, Topic::PadReveal, r.bits().to_vec(), Alice);

        // V7
        let verdict = bob_finish_entangled(session, &p_prime, s_a, &lab.board)?;
        if let BobVerdict::Accepted { message, .. } = &verdict {
            lab.transcript.record(EventSpec::new(
                verifier,
                EventKind::Recover,
                "V7",
                session,
                digest_qubits(message),
            ));
        }
        lab.transcript.set_verdict(format!("{session}.{verifier}.accept"), true);
        Ok(outcome(verdict))
    }

    /// One complete honest session: Alice signs `message` for `receiver`
    /// and the receiver verifies.
    pub fn run_honest(
        lab: &mut Lab,
        receiver: ParticipantId,
        message: &QubitString,
    ) -> Result<(SignedSession, VerifyOutcome)> {
        let n = message.len();
        let session = lab.open_session();
        Self::share_keys(lab, session, n, &[receiver])?;
        let pairs = Self::initialize(lab, session, receiver, n)?;
        let signed = Self::sign(lab, session, receiver, message, &pairs)?;
        let halves = signed.halves_held_by(receiver);
        let outcome = Self::verify(lab, receiver, &signed.signature, &halves)?;
        Ok((signed, outcome))
    }

    /// Honest session in which the signature is disturbed in transit: one
    /// qubit of `|S_A>` gets an X on the way to the receiver.
    pub fn run_disturbed(
        lab: &mut Lab,
        receiver: ParticipantId,
        message: &QubitString,
        qubit: usize,
    ) -> Result<VerifyOutcome> {
        let n = message.len();
        let session = lab.open_session();
        Self::share_keys(lab, session, n, &[receiver])?;
        let pairs = Self::initialize(lab, session, receiver, n)?;
        let signed = Self::sign(lab, session, receiver, message, &pairs)?;
        let mut sig = signed.signature.clone();
        if qubit >= sig.s_a.len() {
            return Err(Error::Config(format!("no qubit {qubit} to disturb")));
        }
        sig.s_a = sig.s_a.map_qubit(qubit, |q| q.apply(crate::qcore::Pauli::X));
        lab.transcript.record(EventSpec {
            actor: None,
            kind: EventKind::Tamper,
            step: "S5",
            digest: digest_qubits(&sig.s_a),
            session,
            subject: Some(receiver),
            pass: None,
        });
        let halves = signed.halves_held_by(receiver);
        Self::verify(lab, receiver, &sig, &halves)
    }
}

pub(crate) fn signature_digest(sig: &EntangledSignature) -> String {
    digest_text(&format!(
        "{}|{}|{:?}",
        digest_qubits(&sig.p_prime),
        digest_qubits(&sig.s_a),
        sig.m_a
    ))
}
