mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aqs_core::adversary::*;
use aqs_core::hardened::CountermeasureSet;
use aqs_core::harness::{transcript_read, transcript_write, Lab, ParticipantId, Scheme, SessionId};
use aqs_core::qcore::{qotp_encrypt, QubitString};
use aqs_core::scheme_entangled::EntangledProtocol;
use aqs_core::scheme_plain::{arbitrate_plain, sign_plain, open_bundle, PlainProtocol};
use common::strings_match;

use ParticipantId::{Alice, Arbitrator, Bob, Charlie};

fn messages(seed: u64, n: usize) -> (QubitString, QubitString) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    (
        QubitString::random(n, &mut rng).unwrap(),
        QubitString::random(n, &mut rng).unwrap(),
    )
}

fn cm(list: &str) -> CountermeasureSet {
    CountermeasureSet::parse_list(list).unwrap()
}

#[test]
fn swap_hands_each_receiver_the_other_message() {
    for seed in 0..20 {
        let (p_b, p_c) = messages(seed, 3);
        let mut lab = Lab::new(Scheme::Entangled, seed, CountermeasureSet::BASELINE);
        let (report, run) = swap_attack_entangled(&mut lab, &p_b, &p_c).unwrap();
        assert!(report.deniability_established);
        assert_eq!(report.dispute, DisputeVerdict::Unresolvable);
        let bob = &run.outcomes[0];
        let charlie = &run.outcomes[1];
        assert_eq!((bob.verifier, charlie.verifier), (Bob, Charlie));
        assert!(strings_match(bob.recovered().unwrap(), &p_c, 1e-9));
        assert!(strings_match(charlie.recovered().unwrap(), &p_b, 1e-9));
    }
}

#[test]
fn arbitrator_view_matches_relabelled_honest_run() {
    for seed in 0..20 {
        let (p_b, p_c) = messages(seed, 4);
        let mut attacked = Lab::new(Scheme::Entangled, seed, CountermeasureSet::BASELINE);
        swap_attack_entangled(&mut attacked, &p_b, &p_c).unwrap();

        // Alice really signed P_B for Charlie and P_C for Bob.
        let mut honest = Lab::new(Scheme::Entangled, seed, CountermeasureSet::BASELINE);
        let run = run_two_sessions_entangled(&mut honest, [(Charlie, &p_b), (Bob, &p_c)], false).unwrap();
        assert!(run.outcomes.iter().all(|o| o.accepted()));

        assert_eq!(attacked.arbiter_view, honest.arbiter_view);
        assert_eq!(attacked.board.entries(), honest.board.entries());
    }
}

#[test]
fn unswapped_sessions_both_accept() {
    let (p_b, p_c) = messages(5, 4);
    let mut lab = Lab::new(Scheme::Entangled, 5, CountermeasureSet::BASELINE);
    let (report, run) = swap_scenario(&mut lab, &p_b, &p_c, false).unwrap();
    assert!(report.verifications_passed.values().all(|&ok| ok));
    assert!(strings_match(run.outcomes[0].recovered().unwrap(), &p_b, 1e-9));
    assert!(strings_match(run.outcomes[1].recovered().unwrap(), &p_c, 1e-9));
}

#[test]
fn countermeasures_against_swap() {
    for seed in 0..10 {
        let (p_b, p_c) = messages(seed, 4);
        for (list, prevented, resolved) in [("1", true, false), ("3", true, false), ("2", false, true)] {
            let mut lab = Lab::new(Scheme::Entangled, seed, cm(list));
            let (report, _) = swap_attack_entangled(&mut lab, &p_b, &p_c).unwrap();
            assert_eq!(!report.deniability_established, prevented, "cm {list}");
            assert_eq!(report.dispute.is_resolved(), resolved, "cm {list}");
        }
        let mut lab = Lab::new(Scheme::Entangled, seed, cm("3"));
        let (report, _) = swap_attack_entangled(&mut lab, &p_b, &p_c).unwrap();
        assert_eq!(report.denied_requests, 2);
    }
}

#[test]
fn transfer_succeeds_at_baseline() {
    for seed in 0..20 {
        let (p, _) = messages(seed, 4);
        let mut lab = Lab::new(Scheme::Plain, seed, CountermeasureSet::BASELINE);
        let (report, outcome) = transfer_attack_plain(&mut lab, &p).unwrap();
        assert_eq!(outcome.verifier, Charlie);
        assert!(outcome.accepted());
        assert!(!report.arbitrator_detected);
        assert!(report.deniability_established);
        assert!(strings_match(outcome.recovered().unwrap(), &p, 1e-9));
    }
}

#[test]
fn countermeasures_against_transfer() {
    for seed in 0..10 {
        let (p, _) = messages(seed, 4);
        for (list, prevented, resolved) in [("1", true, false), ("3", true, false), ("2", false, true)] {
            let mut lab = Lab::new(Scheme::Plain, seed, cm(list));
            let (report, _) = transfer_attack_plain(&mut lab, &p).unwrap();
            assert_eq!(!report.deniability_established, prevented, "cm {list}");
            assert_eq!(report.dispute.is_resolved(), resolved, "cm {list}");
        }
    }
}

#[test]
fn substituted_message_fails_arbitration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut lab = Lab::new(Scheme::Plain, 11, CountermeasureSet::BASELINE);
    let session = lab.open_session();
    PlainProtocol::share_keys(&mut lab, session, 3, Bob, &[Charlie]).unwrap();
    let k_a = lab.keys.key(Alice, Arbitrator).unwrap().clone();
    let k_ab = lab.keys.key(Alice, Bob).unwrap().clone();
    let k_c = lab.keys.key(Charlie, Arbitrator).unwrap().clone();
    let message = QubitString::random(3, &mut rng).unwrap();
    let out = sign_plain(&message, &k_a, &k_ab, session, &mut rng).unwrap();
    let sig = open_bundle(&out.bundle, &k_ab).unwrap();

    let honest = qotp_encrypt(&k_c, &sig.p_prime.concat(&sig.s_a)).unwrap();
    assert!(arbitrate_plain(&honest, &k_a, &k_c, None).unwrap().v_t);

    let other = QubitString::random(3, &mut rng).unwrap();
    let forged = qotp_encrypt(&k_c, &other.concat(&sig.s_a)).unwrap();
    assert!(!arbitrate_plain(&forged, &k_a, &k_c, None).unwrap().v_t);
}

#[test]
fn aborted_sessions_are_unresolvable() {
    let (p, _) = messages(3, 3);
    for list in ["none", "all"] {
        let mut lab = Lab::new(Scheme::Entangled, 3, cm(list));
        let outcome = EntangledProtocol::run_disturbed(&mut lab, Bob, &p, 1).unwrap();
        assert!(!outcome.accepted());
        for (claimant, assertion) in [
            (Bob, Assertion::EveDisturbed),
            (Bob, Assertion::SignerSentIncorrect),
            (Alice, Assertion::ReceiverLied),
        ] {
            let claim = DisputeClaim { claimant, session: outcome.session, assertion };
            assert_eq!(resolve_dispute(&lab.transcript, &claim).unwrap(), DisputeVerdict::Unresolvable);
        }
    }
}

#[test]
fn attributed_honest_sessions_resolve_for_signer() {
    for scheme in [Scheme::Entangled, Scheme::Plain] {
        for list in ["1", "2", "3"] {
            let (p, _) = messages(4, 2);
            let mut lab = Lab::new(scheme, 4, cm(list));
            let session = match scheme {
                Scheme::Entangled => EntangledProtocol::run_honest(&mut lab, Bob, &p).unwrap().1.session,
                Scheme::Plain => PlainProtocol::run_honest(&mut lab, Bob, &p).unwrap().session,
            };
            for (claimant, assertion) in [(Bob, Assertion::SignerSentIncorrect), (Alice, Assertion::ReceiverLied)] {
                let claim = DisputeClaim { claimant, session, assertion };
                assert_eq!(
                    resolve_dispute(&lab.transcript, &claim).unwrap(),
                    DisputeVerdict::ResolvedForSigner,
                    "{scheme} cm {list}"
                );
            }
        }
    }
}

#[test]
fn baseline_honest_sessions_are_unresolvable() {
    let (p, _) = messages(6, 2);
    let mut lab = Lab::new(Scheme::Plain, 6, CountermeasureSet::BASELINE);
    let outcome = PlainProtocol::run_honest(&mut lab, Bob, &p).unwrap();
    let claim = DisputeClaim {
        claimant: Bob,
        session: outcome.session,
        assertion: Assertion::SignerSentIncorrect,
    };
    assert_eq!(resolve_dispute(&lab.transcript, &claim).unwrap(), DisputeVerdict::Unresolvable);
}

#[test]
fn metadata_names_the_actual_verifier() {
    let (p_b, p_c) = messages(8, 3);
    let mut lab = Lab::new(Scheme::Entangled, 8, cm("2"));
    let (report, run) = swap_attack_entangled(&mut lab, &p_b, &p_c).unwrap();
    assert_eq!(report.dispute, DisputeVerdict::ResolvedForReceiver);
    let claim = DisputeClaim {
        claimant: Charlie,
        session: run.sessions[0],
        assertion: Assertion::SignerSentIncorrect,
    };
    assert_eq!(resolve_dispute(&lab.transcript, &claim).unwrap(), DisputeVerdict::ResolvedForSigner);
}

#[test]
fn disputes_survive_a_transcript_file_roundtrip() {
    let (p, _) = messages(9, 3);
    let mut lab = Lab::new(Scheme::Plain, 9, cm("2"));
    let (report, outcome) = transfer_attack_plain(&mut lab, &p).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    transcript_write(&lab.transcript, &path).unwrap();
    let back = transcript_read(&path).unwrap();
    assert_eq!(back, lab.transcript);
    let claim = DisputeClaim {
        claimant: Bob,
        session: outcome.session,
        assertion: Assertion::SignerSentIncorrect,
    };
    assert_eq!(resolve_dispute(&back, &claim).unwrap(), report.dispute);
    let unknown = DisputeClaim { session: SessionId(99), ..claim };
    assert_eq!(resolve_dispute(&back, &unknown).unwrap(), DisputeVerdict::Unresolvable);
}
