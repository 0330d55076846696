"""Smoke test for the `aqs` extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`,
then run `python python/smoke_test.py`.
"""

import json
import os
import tempfile

import aqs


def check_qubits():
    q = aqs.Qubit(3, 4j)
    a0, a1 = q.amplitudes
    assert abs(a0 - 0.6) < 1e-12 and abs(a1 - 0.8j) < 1e-12

    s = aqs.QubitString.random(4, seed=1)
    key = "01101100"
    back = aqs.qotp_decrypt(key, aqs.qotp_encrypt(key, s))
    assert aqs.state_equal(back, s)
    assert not aqs.state_equal(aqs.qotp_encrypt("11" * 4, s), s)

    try:
        aqs.qotp_encrypt("01", s)
    except aqs.AqsError:
        pass
    else:
        raise AssertionError("short key accepted")

    for seed in range(20):
        p = aqs.Qubit.random(seed)
        outcome, fixed = aqs.teleport(p, seed)
        assert outcome in {"PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus"}
        assert fixed.fidelity(p) > 1 - 1e-10


def check_attacks():
    swap = aqs.swap_attack(4, seed=3)
    assert swap["deniability_established"] and swap["dispute"] == "unresolvable"
    assert not aqs.swap_attack(4, seed=3, harden="bind_receiver_id")["deniability_established"]

    transfer = aqs.transfer_attack(4, seed=3)
    assert transfer["verifications_passed"] == {"Charlie": True}
    assert not transfer["arbitrator_detected"]


def check_scenario():
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "transfer.jsonl")
        summary = aqs.run_scenario(
            "plain", out, n_qubits=3, seed=5, attack="transfer", harden="announce_metadata", trials=5
        )
        assert summary["status"] == "ok" and summary["resolved_rate"] == 1.0
        with open(out + ".summary.json") as f:
            assert json.load(f) == summary

        # Trial 0 uses sessions 1.. and the transfer runs in session 1.
        verdict = aqs.resolve_dispute(out, "bob", 1, "signer_sent_incorrect")
        assert verdict == "resolved_for_receiver", verdict


if __name__ == "__main__":
    check_qubits()
    check_attacks()
    check_scenario()
    print("python smoke test: ok")
