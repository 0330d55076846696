//! The receiver attacks and dispute resolution.
//!
//! * Swap (entangled scheme): Bob and Charlie exchange their Bell halves
//!   right after distribution and their signature bundles right after
//!   signing, then each verifies the other's message.
//! * Transfer (plain scheme): Bob opens his bundle, recovers a second copy
//!   of `|P'>` from `|R_AB>`, and hands everything to Charlie, who verifies
//!   under his own arbitrator key.
//!
//! In both cases the arbitrator sees nothing that ties a message to a
//! receiver, so a later dispute cannot be settled. [`resolve_dispute`]
//! decides purely from the transcript, using only evidence the arbitrator
//! could actually present.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{
    digest_qubits, EventKind, EventSpec, Lab, ParticipantId, Scheme, SessionId, Transcript,
};
use crate::qcore::{BellPair, QubitString};
use crate::scheme_entangled::{signature_digest, EntangledProtocol, SignedSession};
use crate::scheme_plain::PlainProtocol;
use crate::verdict::VerifyOutcome;

use ParticipantId::{Alice, Bob, Charlie};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Swap,
    Transfer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assertion {
    /// The signer says the receiver is lying about not accepting.
    ReceiverLied,
    /// The receiver says what the signer sent did not verify, i.e. denies
    /// having accepted it.
    SignerSentIncorrect,
    /// Someone blames a channel eavesdropper.
    EveDisturbed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DisputeClaim {
    pub claimant: ParticipantId,
    /// The signing session the dispute is about.
    pub session: SessionId,
    pub assertion: Assertion,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisputeVerdict {
    ResolvedForSigner,
    ResolvedForReceiver,
    Unresolvable,
}

impl DisputeVerdict {
    pub fn is_resolved(self) -> bool {
        self != DisputeVerdict::Unresolvable
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub scheme: Scheme,
    pub attack: AttackKind,
    pub verifications_passed: BTreeMap<ParticipantId, bool>,
    pub arbitrator_detected: bool,
    pub deniability_established: bool,
    /// Outcome of the receiver later denying the session Alice signed for
    /// him.
    pub dispute: DisputeVerdict,
    /// Verification requests the arbitrator refused outright.
    pub denied_requests: usize,
}

impl AttackReport {
    fn new(
        scheme: Scheme,
        attack: AttackKind,
        outcomes: &[VerifyOutcome],
        dispute: DisputeVerdict,
    ) -> Self {
        let verifications_passed: BTreeMap<_, _> =
            outcomes.iter().map(|o| (o.verifier, o.accepted())).collect();
        let arbitrator_detected = outcomes.iter().any(|o| o.arbitrator_flagged);
        let all_passed = verifications_passed.values().all(|&ok| ok);
        AttackReport {
            scheme,
            attack,
            arbitrator_detected,
            deniability_established: all_passed && !arbitrator_detected,
            verifications_passed,
            dispute,
            denied_requests: outcomes.iter().filter(|o| o.denied).count(),
        }
    }

    /// Stores the report as transcript verdict records under `prefix`.
    pub fn write_verdicts(&self, transcript: &mut Transcript, prefix: &str) {
        for (who, ok) in &self.verifications_passed {
            transcript.set_verdict(format!("{prefix}verifications_passed.{who}"), *ok);
        }
        transcript.set_verdict(format!("{prefix}arbitrator_detected"), self.arbitrator_detected);
        transcript.set_verdict(
            format!("{prefix}deniability_established"),
            self.deniability_established,
        );
        transcript.set_verdict(format!("{prefix}dispute_resolved"), self.dispute.is_resolved());
    }
}

/// Exchanges the second halves of two sessions' Bell pairs between their
/// holders.
pub fn swap_halves(
    transcript: &mut Transcript,
    first: (SessionId, &mut [BellPair]),
    second: (SessionId, &mut [BellPair]),
) -> Result<()> {
    let (s1, p1) = first;
    let (s2, p2) = second;
    if p1.len() != p2.len() {
        return Err(Error::Config(format!(
            "cannot swap {} halves for {}",
            p1.len(),
            p2.len()
        )));
    }
    let (Some(h1), Some(h2)) = (p1.first().map(|p| p.holder_second), p2.first().map(|p| p.holder_second))
    else {
        return Err(Error::Config("nothing to swap".into()));
    };
    for pair in p1.iter_mut() {
        pair.holder_second = h2;
    }
    for pair in p2.iter_mut() {
        pair.holder_second = h1;
    }
    transcript.record(
        EventSpec::new(h1, EventKind::SwapHalves, "I2", s1, format!("{s1}<->{s2}")).subject(h2),
    );
    Ok(())
}

/// Everything produced by a two-receiver entangled run.
#[derive(Clone, Debug)]
pub struct TwoSessionRun {
    pub sessions: [SessionId; 2],
    pub signed: [SignedSession; 2],
    /// Bob's outcome first, then Charlie's.
    pub outcomes: Vec<VerifyOutcome>,
}

/// Alice signs `plan[0]` and `plan[1]` for their named receivers (Bob and
/// Charlie, in either order). With `exchange`, the receivers swap halves
/// after distribution and bundles after signing. Bob verifies first.
pub fn run_two_sessions_entangled(
    lab: &mut Lab,
    plan: [(ParticipantId, &QubitString); 2],
    exchange: bool,
) -> Result<TwoSessionRun> {
    let [(r1, m1), (r2, m2)] = plan;
    if m1.len() != m2.len() {
        return Err(Error::Config(format!(
            "sessions disagree on message length: {} vs {}",
            m1.len(),
            m2.len()
        )));
    }
    let receivers: BTreeSet<_> = [r1, r2].into();
    if receivers != BTreeSet::from([Bob, Charlie]) {
        return Err(Error::Config("the two sessions need receivers Bob and Charlie".into()));
    }
    let n = m1.len();
    let s1 = lab.open_session();
    let s2 = lab.open_session();
    EntangledProtocol::share_keys(lab, s1, n, &[Bob, Charlie])?;
    let mut pairs1 = EntangledProtocol::initialize(lab, s1, r1, n)?;
    let mut pairs2 = EntangledProtocol::initialize(lab, s2, r2, n)?;
    if exchange {
        swap_halves(&mut lab.transcript, (s1, &mut pairs1), (s2, &mut pairs2))?;
    }
    let signed1 = EntangledProtocol::sign(lab, s1, r1, m1, &pairs1)?;
    let signed2 = EntangledProtocol::sign(lab, s2, r2, m2, &pairs2)?;

    let holder_of = |signed: &SignedSession| -> ParticipantId {
        if exchange {
            if signed.receiver == Bob {
                Charlie
            } else {
                Bob
            }
        } else {
            signed.receiver
        }
    };
    if exchange {
        for signed in [&signed1, &signed2] {
            lab.transcript.record(
                EventSpec::new(
                    signed.receiver,
                    EventKind::Forward,
                    "S5",
                    signed.signature.session,
                    signature_digest(&signed.signature),
                )
                .subject(holder_of(signed)),
            );
        }
    }

    let mut outcomes = Vec::with_capacity(2);
    for verifier in [Bob, Charlie] {
        let signed = [&signed1, &signed2]
            .into_iter()
            .find(|s| holder_of(s) == verifier)
            .expect("each receiver holds exactly one bundle");
        let halves = signed.halves_held_by(verifier);
        outcomes.push(EntangledProtocol::verify(lab, verifier, &signed.signature, &halves)?);
    }
    Ok(TwoSessionRun {
        sessions: [s1, s2],
        signed: [signed1, signed2],
        outcomes,
    })
}

/// Receiver swap against the entangled scheme. Alice signs `p_b` for Bob
/// and `p_c` for Charlie; afterwards Bob denies the session signed for him.
pub fn swap_attack_entangled(
    lab: &mut Lab,
    p_b: &QubitString,
    p_c: &QubitString,
) -> Result<(AttackReport, TwoSessionRun)> {
    swap_scenario(lab, p_b, p_c, true)
}

/// The same two sessions with or without the exchange.
pub fn swap_scenario(
    lab: &mut Lab,
    p_b: &QubitString,
    p_c: &QubitString,
    exchange: bool,
) -> Result<(AttackReport, TwoSessionRun)> {
    if lab.scheme() != Scheme::Entangled {
        return Err(Error::Config("swap attack needs the entangled scheme".into()));
    }
    let run = run_two_sessions_entangled(lab, [(Bob, p_b), (Charlie, p_c)], exchange)?;
    let claim = DisputeClaim {
        claimant: Bob,
        session: run.sessions[0],
        assertion: Assertion::SignerSentIncorrect,
    };
    let dispute = resolve_dispute(&lab.transcript, &claim)?;
    let report = AttackReport::new(Scheme::Entangled, AttackKind::Swap, &run.outcomes, dispute);
    report.write_verdicts(&mut lab.transcript, "report.");
    Ok((report, run))
}

/// Signature transfer against the plain scheme: Alice signs `message` for
/// Bob, Bob passes both copies of `|P'>` and `|S_A>` to Charlie, Charlie
/// verifies with his own key.
pub fn transfer_attack_plain(
    lab: &mut Lab,
    message: &QubitString,
) -> Result<(AttackReport, VerifyOutcome)> {
    if lab.scheme() != Scheme::Plain {
        return Err(Error::Config("transfer attack needs the plain scheme".into()));
    }
    let n = message.len();
    let session = lab.open_session();
    PlainProtocol::share_keys(lab, session, n, Bob, &[Charlie])?;
    PlainProtocol::initialize(lab, session, Bob)?;
    let bundle = PlainProtocol::sign(lab, session, Bob, message)?;
    let (sig, second_copy) = PlainProtocol::open(lab, Bob, &bundle)?;
    lab.transcript.record(
        EventSpec::new(
            Bob,
            EventKind::Forward,
            "V1",
            session,
            format!(
                "{}|{}|{}",
                digest_qubits(&sig.p_prime),
                digest_qubits(&second_copy),
                digest_qubits(&sig.s_a)
            ),
        )
        .subject(Charlie),
    );
    let outcome = PlainProtocol::verify(lab, Charlie, session, &sig.p_prime, &sig.s_a, &second_copy)?;
    let claim = DisputeClaim {
        claimant: Bob,
        session,
        assertion: Assertion::SignerSentIncorrect,
    };
    let dispute = resolve_dispute(&lab.transcript, &claim)?;
    let report = AttackReport::new(
        Scheme::Plain,
        AttackKind::Transfer,
        std::slice::from_ref(&outcome),
        dispute,
    );
    report.write_verdicts(&mut lab.transcript, "report.");
    Ok((report, outcome))
}

/// Board steps on which the verifying receiver and the signer's pad opening
/// appear, per scheme.
fn announcement_steps(scheme: Scheme) -> (&'static str, &'static str) {
    match scheme {
        Scheme::Entangled => ("V5", "V6"),
        Scheme::Plain => ("V4", "V5"),
    }
}

/// Parties the arbitrator can show verified `session`. Only announcements
/// with an announcer and passed identity or registry checks count. Channel
/// events prove nothing because the quantum request names no session.
fn attributed_verifiers(transcript: &Transcript, scheme: Scheme, session: SessionId) -> BTreeSet<ParticipantId> {
    let (verifier_step, _) = announcement_steps(scheme);
    transcript
        .events_in(session)
        .filter_map(|e| match e.kind {
            EventKind::Announce if e.step == verifier_step => e.actor,
            EventKind::IdentityCheck | EventKind::RegistryCheck if e.pass == Some(true) => e.subject,
            _ => None,
        })
        .collect()
}

fn completed(transcript: &Transcript, scheme: Scheme, session: SessionId) -> bool {
    let (_, reveal_step) = announcement_steps(scheme);
    transcript
        .events_in(session)
        .any(|e| e.kind == EventKind::Announce && e.step == reveal_step)
}

/// The receiver Alice says she signed for, from her own send record.
fn intended_receiver(transcript: &Transcript, session: SessionId) -> Option<ParticipantId> {
    transcript
        .events_in(session)
        .find(|e| e.kind == EventKind::Send && e.actor == Some(Alice))
        .and_then(|e| e.subject)
}

/// Settles a dispute from the transcript alone.
///
/// An aborted session is always unresolvable: any of the asserted causes
/// fits a failed check equally well, and nothing in the record tells them
/// apart. A completed session is resolved only if
/// hardened evidence names exactly one verifier; the receiver in question
/// loses if that verifier is himself.
pub fn resolve_dispute(transcript: &Transcript, claim: &DisputeClaim) -> Result<DisputeVerdict> {
    let scheme = transcript
        .scheme
        .ok_or_else(|| Error::Config("transcript does not name its scheme".into()))?;
    if !completed(transcript, scheme, claim.session) {
        return Ok(DisputeVerdict::Unresolvable);
    }
    let verifiers = attributed_verifiers(transcript, scheme, claim.session);
    let verifier = match verifiers.len() {
        1 => *verifiers.iter().next().unwrap(),
        _ => return Ok(DisputeVerdict::Unresolvable),
    };
    let receiver = match claim.claimant {
        Bob | Charlie => claim.claimant,
        _ => match intended_receiver(transcript, claim.session) {
            Some(r) => r,
            None => return Ok(DisputeVerdict::Unresolvable),
        },
    };
    Ok(if receiver == verifier {
        DisputeVerdict::ResolvedForSigner
    } else {
        DisputeVerdict::ResolvedForReceiver
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardened::CountermeasureSet;

    #[test]
    fn swap_halves_exchanges_holders() {
        let mut t = Transcript::new(Scheme::Entangled);
        let mut a = vec![BellPair::fresh(Alice, Bob); 2];
        let mut b = vec![BellPair::fresh(Alice, Charlie); 2];
        swap_halves(&mut t, (SessionId(1), &mut a), (SessionId(2), &mut b)).unwrap();
        assert!(a.iter().all(|p| p.holder_second == Charlie));
        assert!(b.iter().all(|p| p.holder_second == Bob));
        let mut c = vec![BellPair::fresh(Alice, Bob); 3];
        assert!(swap_halves(&mut t, (SessionId(1), &mut a), (SessionId(3), &mut c)).is_err());
    }

    #[test]
    fn mismatched_sessions_are_config_errors() {
        let mut lab = Lab::new(Scheme::Entangled, 1, CountermeasureSet::BASELINE);
        let p2 = QubitString::random(2, &mut lab.rng).unwrap();
        let p3 = QubitString::random(3, &mut lab.rng).unwrap();
        assert!(matches!(
            swap_attack_entangled(&mut lab, &p2, &p3),
            Err(Error::Config(_))
        ));
        let mut plain = Lab::new(Scheme::Plain, 1, CountermeasureSet::BASELINE);
        assert!(swap_attack_entangled(&mut plain, &p2, &p2).is_err());
        assert!(transfer_attack_plain(&mut lab, &p2).is_err());
    }

    #[test]
    fn unknown_scheme_is_config_error() {
        let claim = DisputeClaim {
            claimant: Bob,
            session: SessionId(1),
            assertion: Assertion::SignerSentIncorrect,
        };
        assert!(matches!(
            resolve_dispute(&Transcript::default(), &claim),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn report_invariant_holds() {
        let mut lab = Lab::new(Scheme::Entangled, 2, CountermeasureSet::parse_list("1").unwrap());
        let p = QubitString::random(2, &mut lab.rng).unwrap();
        let (report, _) = swap_attack_entangled(&mut lab, &p, &p).unwrap();
        let all = report.verifications_passed.values().all(|&v| v);
        assert_eq!(
            report.deniability_established,
            all && !report.arbitrator_detected
        );
        assert!(lab.transcript.verdicts().contains_key("report.arbitrator_detected"));
    }
}
