import dataclasses
import random

import pytest

from chainanchor import epid
from chainanchor.errors import CredentialError, ProtocolError, RevokedKeyError
from chainanchor.groupmath import (
    fiat_shamir_challenge,
    hash_to_subgroup,
    is_probable_prime,
    rand_bits,
    random_subgroup_element,
)
from conftest import make_member

EMPTY = epid.RevocationList()
MSG = b"challenge message m"
NONCE = b"nonce-pv"


def sign(sk, gpk, rng, msg=MSG, nonce=NONCE, sig_rl=EMPTY, issuer_rl=EMPTY,
         basename=None):
    return epid.sign_membership(sk, gpk, msg, nonce, sig_rl, issuer_rl, rng,
                                basename=basename)


def verify(gpk, sig, msg=MSG, nonce=NONCE, sig_rl=EMPTY, issuer_rl=EMPTY):
    return epid.verify_membership(gpk, msg, nonce, sig, sig_rl, issuer_rl)


# ---------------------------------------------------------------------------
# setup + validation

def test_setup_produces_valid_gpk(desk_group):
    gpk, gipk = desk_group
    assert epid.validate_gpk(gpk)
    assert gipk.p_N * gipk.q_N == gpk.N


def test_generators_are_quadratic_residues(desk_group):
    # Legendre symbols via the known factorization: every derived element
    # must be a square modulo both prime factors.
    gpk, gipk = desk_group
    for x in (gpk.g_prime, gpk.g, gpk.h, gpk.R, gpk.S, gpk.Z):
        assert pow(x, (gipk.p_N - 1) // 2, gipk.p_N) == 1
        assert pow(x, (gipk.q_N - 1) // 2, gipk.q_N) == 1


def test_validate_rejects_low_order_u(desk_gpk):
    # p-1 has order 2 mod p, like 22 mod 23
    bad = dataclasses.replace(desk_gpk, u=desk_gpk.p - 1)
    res = epid.validate_gpk(bad)
    assert not res and res.reason == "u order"


def test_validate_rejects_composite_q(desk_gpk):
    bad = dataclasses.replace(desk_gpk, q=desk_gpk.q - 1)
    res = epid.validate_gpk(bad)
    assert not res and res.reason == "q not prime"


def test_validate_rejects_tampered_proof(desk_gpk):
    proofs = list(desk_gpk.correctness_proofs)
    proofs[0] = dataclasses.replace(proofs[0], c=proofs[0].c + 1)
    bad = dataclasses.replace(desk_gpk, correctness_proofs=tuple(proofs))
    res = epid.validate_gpk(bad)
    assert not res and res.reason.startswith("proof")


def test_validate_rejects_wrong_lengths(desk_gpk):
    bad = dataclasses.replace(desk_gpk, N=desk_gpk.N >> 1)
    assert not epid.validate_gpk(bad)


def test_gpk_doc_round_trip(desk_gpk):
    again = epid.GroupPublicKey.from_doc(desk_gpk.to_doc())
    assert again == desk_gpk
    assert again.transcript_bytes() == desk_gpk.transcript_bytes()


# ---------------------------------------------------------------------------
# join

def test_join_round_trip(desk_group):
    gpk, _ = desk_group
    rng = random.Random(10)
    state, req = epid.join_request(gpk, gpk.issuer_basename, b"n-1", rng)
    assert epid.verify_join_request(gpk, req, b"n-1")
    # blinded commitment recomputes from the retained secrets
    assert req.U == pow(gpk.R, state.f, gpk.N) * pow(gpk.S, state.v_prime, gpk.N) % gpk.N
    assert req.K_I == pow(state.B_I.value, state.f, gpk.p)


def test_join_deterministic_under_seed(desk_gpk):
    a = epid.join_request(desk_gpk, desk_gpk.issuer_basename, b"n", random.Random(77))
    b = epid.join_request(desk_gpk, desk_gpk.issuer_basename, b"n", random.Random(77))
    assert (a[1].U, a[1].K_I) == (b[1].U, b[1].K_I)


def test_join_rejects_invalid_gpk(desk_gpk):
    bad = dataclasses.replace(desk_gpk, u=desk_gpk.p - 1)
    with pytest.raises(ProtocolError):
        epid.join_request(bad, bad.issuer_basename, b"n", random.Random(1))


def test_join_request_tamper_detected(desk_gpk):
    rng = random.Random(11)
    _, req = epid.join_request(desk_gpk, desk_gpk.issuer_basename, b"n", rng)
    bad = dataclasses.replace(req, U=req.U * desk_gpk.R % desk_gpk.N)
    assert not epid.verify_join_request(desk_gpk, bad, b"n")


def test_join_request_nonce_binding(desk_gpk):
    rng = random.Random(12)
    _, req = epid.join_request(desk_gpk, desk_gpk.issuer_basename, b"n-a", rng)
    assert not epid.verify_join_request(desk_gpk, req, b"n-b")
    replay = dataclasses.replace(req, nonce_echo=b"n-b")
    assert not epid.verify_join_request(desk_gpk, replay, b"n-b")


def test_issue_credential_equation(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(13)
    _, req = epid.join_request(gpk, gpk.issuer_basename, b"n", rng)
    resp = epid.issue_credential(gpk, gipk, req, b"n", rng)
    lhs = pow(resp.A, resp.e, gpk.N) * req.U % gpk.N
    lhs = lhs * pow(gpk.S, resp.v_double_prime, gpk.N) % gpk.N
    assert lhs == gpk.Z
    lo = 1 << (gpk.profile.l_e - 1)
    assert lo <= resp.e <= lo + (1 << (gpk.profile.l_e_prime - 1))
    assert is_probable_prime(resp.e)


def test_issue_credential_randomized(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(14)
    _, req = epid.join_request(gpk, gpk.issuer_basename, b"n", rng)
    r1 = epid.issue_credential(gpk, gipk, req, b"n", rng)
    r2 = epid.issue_credential(gpk, gipk, req, b"n", rng)
    assert (r1.A, r1.e) != (r2.A, r2.e)


def test_issue_credential_rejects_bad_request(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(15)
    _, req = epid.join_request(gpk, gpk.issuer_basename, b"n", rng)
    bad = dataclasses.replace(req, U=req.U * gpk.R % gpk.N)
    with pytest.raises(ProtocolError):
        epid.issue_credential(gpk, gipk, bad, b"n", rng)


def test_complete_join_checks_credential(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(16)
    state, req = epid.join_request(gpk, gpk.issuer_basename, b"n", rng)
    resp = epid.issue_credential(gpk, gipk, req, b"n", rng)
    key = epid.complete_join(state, resp, gpk)
    assert epid.key_relation_holds(gpk, key)
    assert key.v == state.v_prime + resp.v_double_prime

    tampered = dataclasses.replace(resp, A=resp.A + 1)
    with pytest.raises(CredentialError, match="credential invalid"):
        epid.complete_join(state, tampered, gpk)


# ---------------------------------------------------------------------------
# sign / verify

def test_sign_verify_round_trip(desk_gpk, member_key):
    rng = random.Random(17)
    sig = sign(member_key, desk_gpk, rng)
    assert verify(desk_gpk, sig)


def test_completeness_randomized(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(18)
    for trial in range(5):
        sk = make_member(gpk, gipk, rng, nonce=f"n{trial}".encode())
        msg = rand_bits(rng, 128).to_bytes(16, "big")
        nonce = rand_bits(rng, 128).to_bytes(16, "big")
        sig = epid.sign_membership(sk, gpk, msg, nonce, EMPTY, EMPTY, rng)
        assert epid.verify_membership(gpk, msg, nonce, sig, EMPTY, EMPTY)


def test_signature_doc_round_trip(desk_gpk, member_key):
    rng = random.Random(19)
    sig = sign(member_key, desk_gpk, rng)
    again = epid.MembershipSignature.from_doc(sig.to_doc())
    assert again == sig
    assert verify(desk_gpk, again)


def test_random_base_signatures_unlinkable(desk_gpk, member_key):
    rng = random.Random(20)
    sigs = [sign(member_key, desk_gpk, rng) for _ in range(3)]
    for field in ("B", "K", "T", "c"):
        values = {getattr(s, field) for s in sigs}
        assert len(values) == len(sigs)


def test_named_base_pseudonym_stable(desk_group, member_key):
    gpk, gipk = desk_group
    rng = random.Random(21)
    a = sign(member_key, gpk, rng, basename=b"verifier-basename")
    b = sign(member_key, gpk, rng, nonce=b"other", basename=b"verifier-basename")
    assert a.K == b.K and a.B == b.B
    assert a.T != b.T and a.c != b.c
    other = make_member(gpk, gipk, random.Random(22))
    c = sign(other, gpk, rng, basename=b"verifier-basename")
    assert c.K != a.K


def test_verify_rejects_wrong_message_or_nonce(desk_gpk, member_key):
    rng = random.Random(23)
    sig = sign(member_key, desk_gpk, rng)
    assert not verify(desk_gpk, sig, msg=b"other message")
    assert not verify(desk_gpk, sig, nonce=b"other nonce")


def test_verify_tamper_smoke(desk_gpk, member_key):
    rng = random.Random(24)
    sig = sign(member_key, desk_gpk, rng)
    for field in ("T", "c", "s_e", "s_f", "s_v"):
        bad = dataclasses.replace(sig, **{field: getattr(sig, field) + 1})
        assert not verify(desk_gpk, bad), field


def test_verify_rejects_oversized_response(desk_gpk, member_key):
    # Same algebra as the signer but with r_f far outside its interval:
    # the challenge recomputation still matches, the interval check must
    # reject anyway.
    gpk, sk = desk_gpk, member_key
    prof = gpk.profile
    rng = random.Random(25)
    p, q, N = gpk.p, gpk.q, gpk.N
    B = random_subgroup_element(p, q, rng).value
    K = pow(B, sk.f, p)
    w = rand_bits(rng, prof.l_v + prof.l_phi - prof.l_e)
    T = sk.A * pow(gpk.S, w, N) % N
    v_hat = sk.v - sk.e * w
    r_e = rand_bits(rng, prof.l_e_prime + prof.l_phi + prof.l_H)
    r_f = rand_bits(rng, prof.l_f + prof.l_phi + prof.l_H + 8)  # oversized
    r_f |= 1 << (prof.l_f + prof.l_phi + prof.l_H + 7)
    r_v = rand_bits(rng, prof.l_v + prof.l_phi + prof.l_H)
    t1 = pow(T, r_e, N) * pow(gpk.R, r_f, N) * pow(gpk.S, r_v, N) % N
    t2 = pow(B, r_f, p)
    c = epid._sigma1_challenge(gpk, B, K, T, t1, t2, 0, 0, NONCE, MSG)
    sig = epid.MembershipSignature(
        B=B, K=K, T=T, c=c,
        s_e=r_e + c * (sk.e - (1 << (prof.l_e - 1))),
        s_f=r_f + c * sk.f, s_v=r_v + c * v_hat,
        sig_rl_epoch=0, issuer_rl_epoch=0,
        nonrevocation_sig=(), nonrevocation_iss=())
    res = verify(desk_gpk, sig)
    assert not res and res.reason == "s_f interval"


def test_sign_rejects_mismatched_key(desk_gpk, member_key):
    wrong = dataclasses.replace(member_key, f=member_key.f + 1)
    with pytest.raises(ProtocolError):
        sign(wrong, desk_gpk, random.Random(26))


def test_blinding_hides_secret_distribution(desk_gpk):
    # U = R^f S^v' over fresh v' should look the same for two different f:
    # compare mean bit frequency of the commitment bytes.
    gpk = desk_gpk
    rng = random.Random(27)

    def mean_bit(f):
        total = 0.0
        for _ in range(100):
            v_prime = rand_bits(rng, gpk.profile.l_v)
            U = pow(gpk.R, f, gpk.N) * pow(gpk.S, v_prime, gpk.N) % gpk.N
            bits = bin(U)[2:].zfill(gpk.profile.l_N)
            total += bits.count("1") / len(bits)
        return total / 100

    f1 = rand_bits(rng, gpk.profile.l_f)
    f2 = rand_bits(rng, gpk.profile.l_f)
    assert abs(mean_bit(f1) - mean_bit(f2)) < 0.02


# ---------------------------------------------------------------------------
# revocation

def test_revocation_lists_append_and_idempotence():
    rl = epid.revoke_signature(EMPTY, 5, 7)
    assert rl.entries == ((5, 7),) and rl.epoch == 1
    again = epid.revoke_signature(rl, 5, 7)
    assert again is rl and again.epoch == 1
    more = epid.revoke_signature(rl, 6, 8)
    assert more.epoch == 2 and len(more.entries) == 2


def test_rl_doc_round_trip():
    rl = epid.revoke_signature(epid.revoke_signature(EMPTY, 3, 9), 4, 16)
    assert epid.RevocationList.from_doc(rl.to_doc()) == rl


def test_signature_revocation_end_to_end(desk_group):
    gpk, gipk = desk_group
    rng = random.Random(28)
    victim = make_member(gpk, gipk, rng)
    other = make_member(gpk, gipk, rng)

    sig = epid.sign_membership(victim, gpk, MSG, NONCE, EMPTY, EMPTY, rng)
    assert epid.verify_membership(gpk, MSG, NONCE, sig, EMPTY, EMPTY)
    sig_rl = epid.revoke_signature(EMPTY, sig.B, sig.K)

    with pytest.raises(RevokedKeyError, match="revoked"):
        epid.sign_membership(victim, gpk, MSG, NONCE, sig_rl, EMPTY, rng)

    ok = epid.sign_membership(other, gpk, MSG, NONCE, sig_rl, EMPTY, rng)
    assert epid.verify_membership(gpk, MSG, NONCE, ok, sig_rl, EMPTY)


def test_issuer_revocation_by_join_pseudonym(desk_group):
    # The issuer can revoke using the (B_I, K_I) pair from the join.
    gpk, gipk = desk_group
    rng = random.Random(29)
    state, req = epid.join_request(gpk, gpk.issuer_basename, b"n", rng)
    sk = epid.complete_join(
        state, epid.issue_credential(gpk, gipk, req, b"n", rng), gpk)
    B_I = hash_to_subgroup(gpk.issuer_basename, gpk.p, gpk.q).value
    issuer_rl = epid.revoke_by_issuer(EMPTY, B_I, req.K_I)
    with pytest.raises(RevokedKeyError):
        epid.sign_membership(sk, gpk, MSG, NONCE, EMPTY, issuer_rl, rng)
    other = make_member(gpk, gipk, rng, nonce=b"n2")
    sig = epid.sign_membership(other, gpk, MSG, NONCE, EMPTY, issuer_rl, rng)
    assert epid.verify_membership(gpk, MSG, NONCE, sig, EMPTY, issuer_rl)


def test_stale_epoch_rejected(desk_group, member_key):
    gpk, _ = desk_group
    rng = random.Random(30)
    sig = sign(member_key, gpk, rng)
    moved = epid.revoke_signature(EMPTY, 12345, 6789)  # unrelated entry
    res = epid.verify_membership(gpk, MSG, NONCE, sig, moved, EMPTY)
    assert not res and res.reason == "epoch"


def test_forged_nonrevocation_entry_fails(desk_group):
    # A revoked signer cannot fabricate sigma2: any W it can prove for its
    # own entry is the identity, and a random W breaks the proof.
    gpk, gipk = desk_group
    rng = random.Random(31)
    victim = make_member(gpk, gipk, rng)
    sig = epid.sign_membership(victim, gpk, MSG, NONCE, EMPTY, EMPTY, rng)
    sig_rl = epid.revoke_signature(EMPTY, sig.B, sig.K)

    honest = epid.sign_membership(victim, gpk, MSG, NONCE, EMPTY, EMPTY, rng)
    fake_entry = epid.NonRevocationProof(
        W=random_subgroup_element(gpk.p, gpk.q, rng).value,
        c=fiat_shamir_challenge([b"fake"], gpk.profile.l_H),
        s_alpha=rand_bits(rng, gpk.profile.l_q - 1),
        s_beta=rand_bits(rng, gpk.profile.l_q - 1))
    forged = dataclasses.replace(honest, sig_rl_epoch=sig_rl.epoch,
                                 nonrevocation_sig=(fake_entry,))
    assert not epid.verify_membership(gpk, MSG, NONCE, forged, sig_rl, EMPTY)
