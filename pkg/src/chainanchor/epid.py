"""RSA-group anonymous membership scheme.

One group public key verifies signatures from many independently issued
member keys.  A member key is a Camenisch-Lysyanskaya credential (A, e, f, v)
with A^e * R^f * S^v = Z (mod N); membership signatures are Fiat-Shamir
signatures of knowledge over that relation plus a pseudonym K = B^f in a
prime-order subgroup, and carry non-revocation proofs against two
revocation lists.

Every verifier-facing check returns a :class:`Check` whose ``reason`` names
the first failed clause; prover-side failures raise exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import CredentialError, ProtocolError, RevokedKeyError
from .groupmath import (
    ParameterProfile,
    SubgroupElement,
    canonical_encode,
    fiat_shamir_challenge,
    gen_prime_in_range,
    gen_rsa_group,
    gen_schnorr_group,
    hash_to_subgroup,
    int_to_bytes,
    is_probable_prime,
    rand_below,
    rand_bits,
    rand_range,
    random_subgroup_element,
)


@dataclass(frozen=True)
class Check:
    """Boolean verdict plus the first failing clause, for diagnostics."""

    ok: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


OK = Check(True)


def _fail(reason: str) -> Check:
    return Check(False, reason)


def _enc(*values) -> list:
    out = []
    for v in values:
        out.append(v if isinstance(v, bytes) else int_to_bytes(v))
    return out


def _signed_hex(n: int) -> str:
    return ("-" if n < 0 else "") + hex(abs(n))


def _signed_int(s: str) -> int:
    return int(s, 16)


# ---------------------------------------------------------------------------
# group keys

@dataclass(frozen=True)
class DlogProof:
    """Knowledge of x with value = base^x (mod N), order of the group hidden."""

    label: str
    c: int
    s: int

    def to_doc(self):
        return {"label": self.label, "c": hex(self.c), "s": hex(self.s)}

    @classmethod
    def from_doc(cls, doc):
        return cls(doc["label"], int(doc["c"], 16), int(doc["s"], 16))


def _dlog_challenge(label: str, N: int, base: int, value: int, t: int, l_H: int) -> int:
    return fiat_shamir_challenge(
        _enc(b"generator-proof", label.encode(), N, base, value, t), l_H)


def _prove_dlog(label, N, base, value, exponent, profile, rng) -> DlogProof:
    r = rand_bits(rng, profile.l_N + profile.l_phi + profile.l_H)
    t = pow(base, r, N)
    c = _dlog_challenge(label, N, base, value, t, profile.l_H)
    return DlogProof(label, c, r + c * exponent)


def _verify_dlog(proof: DlogProof, N, base, value, profile) -> bool:
    bound = 1 << (profile.l_N + profile.l_phi + profile.l_H + 1)
    if not (0 <= proof.c < (1 << profile.l_H) and 0 <= proof.s < bound):
        return False
    try:
        t = pow(base, proof.s, N) * pow(value, -proof.c, N) % N
    except ValueError:
        return False
    return _dlog_challenge(proof.label, N, base, value, t, profile.l_H) == proof.c


@dataclass(frozen=True)
class GroupPublicKey:
    """Membership verification public key (N, g', g, h, R, S, Z, p, q, u)."""

    N: int
    g_prime: int
    g: int
    h: int
    R: int
    S: int
    Z: int
    p: int
    q: int
    u: int
    profile: ParameterProfile
    issuer_basename: bytes
    correctness_proofs: tuple

    def transcript_bytes(self) -> bytes:
        return canonical_encode(_enc(
            b"group-public-key", self.N, self.g_prime, self.g, self.h,
            self.R, self.S, self.Z, self.p, self.q, self.u,
            self.issuer_basename, self.profile.transcript_bytes()))

    def to_doc(self) -> dict:
        return {
            "N": hex(self.N), "g_prime": hex(self.g_prime), "g": hex(self.g),
            "h": hex(self.h), "R": hex(self.R), "S": hex(self.S),
            "Z": hex(self.Z), "p": hex(self.p), "q": hex(self.q),
            "u": hex(self.u), "profile": self.profile.to_doc(),
            "issuer_basename": self.issuer_basename.hex(),
            "correctness_proofs": [pr.to_doc() for pr in self.correctness_proofs],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "GroupPublicKey":
        return cls(
            N=int(doc["N"], 16), g_prime=int(doc["g_prime"], 16),
            g=int(doc["g"], 16), h=int(doc["h"], 16), R=int(doc["R"], 16),
            S=int(doc["S"], 16), Z=int(doc["Z"], 16), p=int(doc["p"], 16),
            q=int(doc["q"], 16), u=int(doc["u"], 16),
            profile=ParameterProfile.from_doc(doc["profile"]),
            issuer_basename=bytes.fromhex(doc["issuer_basename"]),
            correctness_proofs=tuple(
                DlogProof.from_doc(d) for d in doc["correctness_proofs"]),
        )


@dataclass(frozen=True)
class GroupIssuingPrivateKey:
    """Factorization of N; never serialized next to the public key."""

    p_N: int
    q_N: int
    p_N_prime: int
    q_N_prime: int

    @property
    def qr_order(self) -> int:
        return self.p_N_prime * self.q_N_prime

    def to_doc(self) -> dict:
        return {"p_N": hex(self.p_N), "q_N": hex(self.q_N),
                "p_N_prime": hex(self.p_N_prime), "q_N_prime": hex(self.q_N_prime)}

    @classmethod
    def from_doc(cls, doc: dict) -> "GroupIssuingPrivateKey":
        return cls(int(doc["p_N"], 16), int(doc["q_N"], 16),
                   int(doc["p_N_prime"], 16), int(doc["q_N_prime"], 16))


def setup_group(profile: ParameterProfile, issuer_basename: bytes, rng):
    """Create a fresh group: returns (GroupPublicKey, GroupIssuingPrivateKey).

    g' generates the quadratic residues mod N; g, h are random powers of g'
    (h a generator of that subgroup) and R, S, Z random powers of h, each
    accompanied by a discrete-log knowledge proof.
    """
    rsa = gen_rsa_group(profile, rng)
    N = rsa.N
    order = (rsa.p_N - 1) // 2 * ((rsa.q_N - 1) // 2)

    while True:
        x = rand_range(rng, 2, N)
        if math.gcd(x, N) != 1:
            continue
        g_prime = x * x % N
        # gcd(g'-1, N) == 1 rules out elements that collapse mod a factor.
        if g_prime != 1 and math.gcd(g_prime - 1, N) == 1:
            break

    def random_power(base, generator_needed=False):
        while True:
            a = rand_range(rng, 1, order)
            if generator_needed and math.gcd(a, order) != 1:
                continue
            return pow(base, a, N), a

    g, exp_g = random_power(g_prime)
    h, exp_h = random_power(g_prime, generator_needed=True)
    R, exp_R = random_power(h)
    S, exp_S = random_power(h)
    Z, exp_Z = random_power(h)

    proofs = (
        _prove_dlog("g", N, g_prime, g, exp_g, profile, rng),
        _prove_dlog("h", N, g_prime, h, exp_h, profile, rng),
        _prove_dlog("R", N, h, R, exp_R, profile, rng),
        _prove_dlog("S", N, h, S, exp_S, profile, rng),
        _prove_dlog("Z", N, h, Z, exp_Z, profile, rng),
    )

    p, q, u = gen_schnorr_group(profile, rng)
    gpk = GroupPublicKey(N=N, g_prime=g_prime, g=g, h=h, R=R, S=S, Z=Z,
                         p=p, q=q, u=u.value, profile=profile,
                         issuer_basename=issuer_basename,
                         correctness_proofs=proofs)
    gipk = GroupIssuingPrivateKey(rsa.p_N, rsa.q_N, rsa.p_N_prime, rsa.q_N_prime)
    check = validate_gpk(gpk)
    assert check, f"setup produced an invalid group key: {check.reason}"
    return gpk, gipk


def validate_gpk(gpk: GroupPublicKey) -> Check:
    """Check proofs, subgroup structure and parameter lengths of a group key."""
    prof = gpk.profile
    bases = {"g": (gpk.g_prime, gpk.g), "h": (gpk.g_prime, gpk.h),
             "R": (gpk.h, gpk.R), "S": (gpk.h, gpk.S), "Z": (gpk.h, gpk.Z)}
    seen = set()
    for proof in gpk.correctness_proofs:
        if proof.label not in bases:
            return _fail(f"proof {proof.label} unknown")
        base, value = bases[proof.label]
        if not _verify_dlog(proof, gpk.N, base, value, prof):
            return _fail(f"proof {proof.label}")
        seen.add(proof.label)
    if seen != set(bases):
        return _fail("proof missing")

    if not is_probable_prime(gpk.p):
        return _fail("p not prime")
    if not is_probable_prime(gpk.q):
        return _fail("q not prime")
    if (gpk.p - 1) % gpk.q != 0:
        return _fail("q divides p-1")
    if ((gpk.p - 1) // gpk.q) % gpk.q == 0:
        return _fail("q square")
    if not 1 < gpk.u < gpk.p:
        return _fail("u range")
    if gpk.u == 1 or pow(gpk.u, gpk.q, gpk.p) != 1:
        return _fail("u order")

    if gpk.N.bit_length() != prof.l_N:
        return _fail("N length")
    if gpk.p.bit_length() != prof.l_p:
        return _fail("p length")
    if gpk.q.bit_length() != prof.l_q:
        return _fail("q length")
    for name, value in (("g_prime", gpk.g_prime), ("g", gpk.g), ("h", gpk.h),
                        ("R", gpk.R), ("S", gpk.S), ("Z", gpk.Z)):
        if not 2 <= value < gpk.N or math.gcd(value, gpk.N) != 1:
            return _fail(f"{name} range")
    return OK


# ---------------------------------------------------------------------------
# join protocol

@dataclass(frozen=True)
class JoinProof:
    c: int
    s_f: int
    s_v: int

    def to_doc(self):
        return {"c": hex(self.c), "s_f": hex(self.s_f), "s_v": hex(self.s_v)}

    @classmethod
    def from_doc(cls, doc):
        return cls(int(doc["c"], 16), int(doc["s_f"], 16), int(doc["s_v"], 16))


@dataclass(frozen=True)
class JoinState:
    """User-side transient join secrets (f and its blinding v')."""

    f: int
    v_prime: int
    basename_I: bytes
    B_I: SubgroupElement
    U: int
    K_I: int


@dataclass(frozen=True)
class JoinRequest:
    U: int
    K_I: int
    proof: JoinProof
    nonce_echo: bytes

    def to_doc(self) -> dict:
        return {"U": hex(self.U), "K_I": hex(self.K_I),
                "proof": self.proof.to_doc(), "nonce_echo": self.nonce_echo.hex()}

    @classmethod
    def from_doc(cls, doc) -> "JoinRequest":
        return cls(int(doc["U"], 16), int(doc["K_I"], 16),
                   JoinProof.from_doc(doc["proof"]),
                   bytes.fromhex(doc["nonce_echo"]))


def _join_challenge(gpk, B_I, U, K_I, t1, t2, nonce, l_H) -> int:
    return fiat_shamir_challenge(
        _enc(b"join-request", gpk.transcript_bytes(), B_I, U, K_I, t1, t2, nonce),
        l_H)


def join_request(gpk: GroupPublicKey, issuer_basename: bytes,
                 issuer_nonce: bytes, rng):
    """Blind a fresh secret f into U = R^f S^v' and the issuer pseudonym
    K_I = B_I^f, with a signature of knowledge tying the two together.

    Returns (JoinState, JoinRequest).  The group key is validated first;
    an invalid key is rejected before any secret is derived from it.
    """
    check = validate_gpk(gpk)
    if not check:
        raise ProtocolError(f"group public key rejected: {check.reason}")
    prof = gpk.profile

    B_I = hash_to_subgroup(issuer_basename, gpk.p, gpk.q)
    f = rand_bits(rng, prof.l_f)
    v_prime = rand_bits(rng, prof.l_v)
    U = pow(gpk.R, f, gpk.N) * pow(gpk.S, v_prime, gpk.N) % gpk.N
    K_I = pow(B_I.value, f, gpk.p)

    r_f = rand_bits(rng, prof.l_f + prof.l_phi + prof.l_H)
    r_v = rand_bits(rng, prof.l_v + prof.l_phi + prof.l_H)
    t1 = pow(gpk.R, r_f, gpk.N) * pow(gpk.S, r_v, gpk.N) % gpk.N
    t2 = pow(B_I.value, r_f, gpk.p)
    c = _join_challenge(gpk, B_I.value, U, K_I, t1, t2, issuer_nonce, prof.l_H)
    proof = JoinProof(c=c, s_f=r_f + c * f, s_v=r_v + c * v_prime)

    state = JoinState(f=f, v_prime=v_prime, basename_I=issuer_basename,
                      B_I=B_I, U=U, K_I=K_I)
    return state, JoinRequest(U=U, K_I=K_I, proof=proof, nonce_echo=issuer_nonce)


def verify_join_request(gpk: GroupPublicKey, req: JoinRequest,
                        issuer_nonce: bytes) -> Check:
    prof = gpk.profile
    if req.nonce_echo != issuer_nonce:
        return _fail("nonce")
    if not 1 <= req.U < gpk.N or math.gcd(req.U, gpk.N) != 1:
        return _fail("U range")
    if not 1 < req.K_I < gpk.p or pow(req.K_I, gpk.q, gpk.p) != 1:
        return _fail("K_I range")
    pr = req.proof
    if not 0 <= pr.c < (1 << prof.l_H):
        return _fail("challenge range")
    if not 0 <= pr.s_f < (1 << (prof.l_f + prof.l_phi + prof.l_H + 1)):
        return _fail("s_f interval")
    if not 0 <= pr.s_v < (1 << (prof.l_v + prof.l_phi + prof.l_H + 1)):
        return _fail("s_v interval")
    B_I = hash_to_subgroup(gpk.issuer_basename, gpk.p, gpk.q)
    t1 = (pow(gpk.R, pr.s_f, gpk.N) * pow(gpk.S, pr.s_v, gpk.N)
          * pow(req.U, -pr.c, gpk.N)) % gpk.N
    t2 = pow(B_I.value, pr.s_f, gpk.p) * pow(req.K_I, -pr.c, gpk.p) % gpk.p
    if _join_challenge(gpk, B_I.value, req.U, req.K_I, t1, t2,
                       issuer_nonce, prof.l_H) != pr.c:
        return _fail("proof")
    return OK


@dataclass(frozen=True)
class CredentialResponse:
    A: int
    e: int
    v_double_prime: int

    def to_doc(self) -> dict:
        return {"A": hex(self.A), "e": hex(self.e),
                "v_double_prime": hex(self.v_double_prime)}

    @classmethod
    def from_doc(cls, doc) -> "CredentialResponse":
        return cls(int(doc["A"], 16), int(doc["e"], 16),
                   int(doc["v_double_prime"], 16))


def _e_interval(profile: ParameterProfile):
    lo = 1 << (profile.l_e - 1)
    return lo, lo + (1 << (profile.l_e_prime - 1))


def issue_credential(gpk: GroupPublicKey, gipk: GroupIssuingPrivateKey,
                     req: JoinRequest, issuer_nonce: bytes, rng) -> CredentialResponse:
    """Issue (A, e, v'') with A^e * U * S^v'' = Z (mod N) for a verified request."""
    check = verify_join_request(gpk, req, issuer_nonce)
    if not check:
        raise ProtocolError(f"join request rejected: {check.reason}")
    order = gipk.qr_order
    lo, hi = _e_interval(gpk.profile)
    while True:
        e = gen_prime_in_range(lo, hi, rng)
        if math.gcd(e, order) == 1:
            break
    v_double_prime = rand_bits(rng, gpk.profile.l_v)
    blinded = req.U * pow(gpk.S, v_double_prime, gpk.N) % gpk.N
    A = pow(gpk.Z * pow(blinded, -1, gpk.N) % gpk.N,
            pow(e, -1, order), gpk.N)
    assert pow(A, e, gpk.N) * blinded % gpk.N == gpk.Z
    return CredentialResponse(A=A, e=e, v_double_prime=v_double_prime)


@dataclass(frozen=True)
class UserMemberPrivateKey:
    """Member credential (A, e, f, v): A^e * R^f * S^v = Z (mod N)."""

    A: int
    e: int
    f: int
    v: int

    def to_doc(self) -> dict:
        return {"A": hex(self.A), "e": hex(self.e), "f": hex(self.f),
                "v": hex(self.v)}

    @classmethod
    def from_doc(cls, doc) -> "UserMemberPrivateKey":
        return cls(int(doc["A"], 16), int(doc["e"], 16), int(doc["f"], 16),
                   int(doc["v"], 16))


def key_relation_holds(gpk: GroupPublicKey, key: UserMemberPrivateKey) -> bool:
    lhs = (pow(key.A, key.e, gpk.N) * pow(gpk.R, key.f, gpk.N)
           * pow(gpk.S, key.v, gpk.N)) % gpk.N
    return lhs == gpk.Z


def complete_join(state: JoinState, resp: CredentialResponse,
                  gpk: GroupPublicKey) -> UserMemberPrivateKey:
    """Assemble (A, e, f, v = v' + v'') after checking the credential."""
    lo, hi = _e_interval(gpk.profile)
    v = state.v_prime + resp.v_double_prime
    key = UserMemberPrivateKey(A=resp.A, e=resp.e, f=state.f, v=v)
    if not (lo <= resp.e <= hi and is_probable_prime(resp.e)):
        raise CredentialError()
    if not 1 <= resp.A < gpk.N or not key_relation_holds(gpk, key):
        raise CredentialError()
    return key


# ---------------------------------------------------------------------------
# revocation lists

@dataclass(frozen=True)
class RevocationList:
    """Ordered (B, K) pseudonym pairs with a monotone epoch counter."""

    entries: tuple = ()
    epoch: int = 0

    def to_doc(self) -> dict:
        return {"epoch": self.epoch,
                "entries": [[hex(b), hex(k)] for b, k in self.entries]}

    @classmethod
    def from_doc(cls, doc) -> "RevocationList":
        return cls(entries=tuple((int(b, 16), int(k, 16))
                                 for b, k in doc["entries"]),
                   epoch=int(doc["epoch"]))


# sig-RL (verifier-driven) and Issuer-RL share the pair format.
SigRL = RevocationList
IssuerRL = RevocationList


def revoke_signature(rl: RevocationList, B: int, K: int) -> RevocationList:
    """Append a pseudonym pair taken from a verified signature.

    Duplicate pairs are a silent no-op and leave the epoch untouched.
    """
    if (B, K) in rl.entries:
        return rl
    return RevocationList(entries=rl.entries + ((B, K),), epoch=rl.epoch + 1)


def revoke_by_issuer(rl: RevocationList, B: int, K: int) -> RevocationList:
    """Issuer-side revocation; same append/no-op semantics as sig-RL."""
    return revoke_signature(rl, B, K)


# ---------------------------------------------------------------------------
# membership signatures

@dataclass(frozen=True)
class NonRevocationProof:
    """Proof that the signer's f satisfies B_i^f != K_i for one RL entry."""

    W: int
    c: int
    s_alpha: int
    s_beta: int

    def to_doc(self):
        return {"W": hex(self.W), "c": hex(self.c),
                "s_alpha": hex(self.s_alpha), "s_beta": hex(self.s_beta)}

    @classmethod
    def from_doc(cls, doc):
        return cls(int(doc["W"], 16), int(doc["c"], 16),
                   int(doc["s_alpha"], 16), int(doc["s_beta"], 16))


@dataclass(frozen=True)
class MembershipSignature:
    """sigma = (sigma1, sigma2, sigma3) over a pseudonym (B, K) and blinded
    credential T."""

    B: int
    K: int
    T: int
    c: int
    s_e: int
    s_f: int
    s_v: int                       # may be negative
    sig_rl_epoch: int
    issuer_rl_epoch: int
    nonrevocation_sig: tuple
    nonrevocation_iss: tuple

    def transcript_bytes(self) -> bytes:
        parts = _enc(b"membership-signature", self.B, self.K, self.T, self.c,
                     self.s_e, self.s_f)
        parts.append(_signed_hex(self.s_v).encode())
        parts += _enc(self.sig_rl_epoch, self.issuer_rl_epoch)
        for pr in self.nonrevocation_sig + self.nonrevocation_iss:
            parts += _enc(pr.W, pr.c, pr.s_alpha, pr.s_beta)
        return canonical_encode(parts)

    def to_doc(self) -> dict:
        return {
            "B": hex(self.B), "K": hex(self.K), "T": hex(self.T),
            "c": hex(self.c), "s_e": hex(self.s_e), "s_f": hex(self.s_f),
            "s_v": _signed_hex(self.s_v),
            "sig_rl_epoch": self.sig_rl_epoch,
            "issuer_rl_epoch": self.issuer_rl_epoch,
            "nonrevocation_sig": [p.to_doc() for p in self.nonrevocation_sig],
            "nonrevocation_iss": [p.to_doc() for p in self.nonrevocation_iss],
        }

    @classmethod
    def from_doc(cls, doc) -> "MembershipSignature":
        return cls(
            B=int(doc["B"], 16), K=int(doc["K"], 16), T=int(doc["T"], 16),
            c=int(doc["c"], 16), s_e=int(doc["s_e"], 16),
            s_f=int(doc["s_f"], 16), s_v=_signed_int(doc["s_v"]),
            sig_rl_epoch=int(doc["sig_rl_epoch"]),
            issuer_rl_epoch=int(doc["issuer_rl_epoch"]),
            nonrevocation_sig=tuple(NonRevocationProof.from_doc(d)
                                    for d in doc["nonrevocation_sig"]),
            nonrevocation_iss=tuple(NonRevocationProof.from_doc(d)
                                    for d in doc["nonrevocation_iss"]),
        )


def _sigma1_challenge(gpk, B, K, T, t1, t2, sig_epoch, iss_epoch,
                      nonce_pv, message) -> int:
    return fiat_shamir_challenge(
        _enc(gpk.transcript_bytes(), B, K, T, t1, t2, sig_epoch, iss_epoch,
             nonce_pv, message),
        gpk.profile.l_H)


def _nonrevocation_challenge(tag, main_c, index, B_i, K_i, B, K, W,
                             t_a, t_b, l_H) -> int:
    return fiat_shamir_challenge(
        _enc(tag, main_c, index, B_i, K_i, B, K, W, t_a, t_b), l_H)


def _prove_not_revoked(tag, index, B_i, K_i, B, K, f, main_c, gpk, rng):
    p, q = gpk.p, gpk.q
    mu = rand_range(rng, 1, q)
    base = pow(B_i, f, p) * pow(K_i, -1, p) % p
    if base == 1:
        raise RevokedKeyError()
    W = pow(base, mu, p)
    alpha = f * mu % q
    beta = mu
    r_a = rand_below(rng, q)
    r_b = rand_below(rng, q)
    t_a = pow(B_i, r_a, p) * pow(K_i, -r_b, p) % p
    t_b = pow(B, r_a, p) * pow(K, -r_b, p) % p
    c = _nonrevocation_challenge(tag, main_c, index, B_i, K_i, B, K, W,
                                 t_a, t_b, gpk.profile.l_H)
    return NonRevocationProof(W=W, c=c, s_alpha=(r_a + c * alpha) % q,
                              s_beta=(r_b + c * beta) % q)


def _verify_not_revoked(tag, index, B_i, K_i, B, K, proof, main_c, gpk) -> Check:
    p, q = gpk.p, gpk.q
    label = f"{tag.decode()} entry {index}"
    if not 1 <= proof.W < p or pow(proof.W, q, p) != 1:
        return _fail(f"{label} W subgroup")
    if proof.W == 1:
        return _fail(f"{label} W identity")
    if not (0 <= proof.s_alpha < q and 0 <= proof.s_beta < q):
        return _fail(f"{label} response range")
    if not 0 <= proof.c < (1 << gpk.profile.l_H):
        return _fail(f"{label} challenge range")
    t_a = (pow(B_i, proof.s_alpha, p) * pow(K_i, -proof.s_beta, p)
           * pow(proof.W, -proof.c, p)) % p
    t_b = pow(B, proof.s_alpha, p) * pow(K, -proof.s_beta, p) % p
    expect = _nonrevocation_challenge(tag, main_c, index, B_i, K_i, B, K,
                                      proof.W, t_a, t_b, gpk.profile.l_H)
    if expect != proof.c:
        return _fail(f"{label} proof")
    return OK


def _blinding_width(profile: ParameterProfile) -> int:
    # Largest w with e*w still inside the declared s_v response interval.
    return profile.l_v + profile.l_phi - profile.l_e


def sign_membership(sk: UserMemberPrivateKey, gpk: GroupPublicKey,
                    message: bytes, nonce_pv: bytes,
                    sig_rl: RevocationList, issuer_rl: RevocationList, rng,
                    basename: Optional[bytes] = None) -> MembershipSignature:
    """Produce sigma = (sigma1, sigma2, sigma3) over ``message`` and ``nonce_pv``.

    ``basename=None`` selects a random base B (unlinkable signatures); a named
    base derives B from the verifier's basename, making K a stable pseudonym.
    Raises RevokedKeyError if the signer's pseudonym appears on either list.
    """
    if not key_relation_holds(gpk, sk):
        raise ProtocolError("member key does not match group public key")
    prof = gpk.profile
    p, q, N = gpk.p, gpk.q, gpk.N

    for B_i, K_i in sig_rl.entries + issuer_rl.entries:
        if pow(B_i, sk.f, p) == K_i:
            raise RevokedKeyError()

    if basename is None:
        B = random_subgroup_element(p, q, rng).value
    else:
        B = hash_to_subgroup(basename, p, q).value
    K = pow(B, sk.f, p)

    w = rand_bits(rng, _blinding_width(prof))
    T = sk.A * pow(gpk.S, w, N) % N
    v_hat = sk.v - sk.e * w

    r_e = rand_bits(rng, prof.l_e_prime + prof.l_phi + prof.l_H)
    r_f = rand_bits(rng, prof.l_f + prof.l_phi + prof.l_H)
    r_v = rand_bits(rng, prof.l_v + prof.l_phi + prof.l_H)
    t1 = (pow(T, r_e, N) * pow(gpk.R, r_f, N) * pow(gpk.S, r_v, N)) % N
    t2 = pow(B, r_f, p)
    c = _sigma1_challenge(gpk, B, K, T, t1, t2, sig_rl.epoch, issuer_rl.epoch,
                          nonce_pv, message)

    s_e = r_e + c * (sk.e - (1 << (prof.l_e - 1)))
    s_f = r_f + c * sk.f
    s_v = r_v + c * v_hat

    sigma2 = tuple(
        _prove_not_revoked(b"sig-rl", i, B_i, K_i, B, K, sk.f, c, gpk, rng)
        for i, (B_i, K_i) in enumerate(sig_rl.entries))
    sigma3 = tuple(
        _prove_not_revoked(b"issuer-rl", i, B_i, K_i, B, K, sk.f, c, gpk, rng)
        for i, (B_i, K_i) in enumerate(issuer_rl.entries))

    return MembershipSignature(B=B, K=K, T=T, c=c, s_e=s_e, s_f=s_f, s_v=s_v,
                               sig_rl_epoch=sig_rl.epoch,
                               issuer_rl_epoch=issuer_rl.epoch,
                               nonrevocation_sig=sigma2,
                               nonrevocation_iss=sigma3)


def verify_membership(gpk: GroupPublicKey, message: bytes, nonce_pv: bytes,
                      sig: MembershipSignature, sig_rl: RevocationList,
                      issuer_rl: RevocationList) -> Check:
    """Verify sigma1 algebra, response intervals, both non-revocation vectors
    and that the signature was bound to the current revocation epochs."""
    prof = gpk.profile
    p, q, N = gpk.p, gpk.q, gpk.N

    if sig.sig_rl_epoch != sig_rl.epoch or sig.issuer_rl_epoch != issuer_rl.epoch:
        return _fail("epoch")
    if len(sig.nonrevocation_sig) != len(sig_rl.entries):
        return _fail("sig-rl length")
    if len(sig.nonrevocation_iss) != len(issuer_rl.entries):
        return _fail("issuer-rl length")

    for name, value in (("B", sig.B), ("K", sig.K)):
        if not 1 < value < p or pow(value, q, p) != 1:
            return _fail(f"{name} subgroup")
    if not 1 <= sig.T < N:
        return _fail("T range")
    if not 0 <= sig.c < (1 << prof.l_H):
        return _fail("challenge range")
    if not 0 <= sig.s_e < (1 << (prof.l_e_prime + prof.l_phi + prof.l_H + 1)):
        return _fail("s_e interval")
    if not 0 <= sig.s_f < (1 << (prof.l_f + prof.l_phi + prof.l_H + 1)):
        return _fail("s_f interval")
    if not abs(sig.s_v) < (1 << (prof.l_v + prof.l_phi + prof.l_H + 1)):
        return _fail("s_v interval")

    try:
        t1 = (pow(gpk.Z, -sig.c, N)
              * pow(sig.T, sig.s_e + sig.c * (1 << (prof.l_e - 1)), N)
              * pow(gpk.R, sig.s_f, N) * pow(gpk.S, sig.s_v, N)) % N
        t2 = pow(sig.B, sig.s_f, p) * pow(sig.K, -sig.c, p) % p
    except ValueError:
        return _fail("sigma1")
    expect = _sigma1_challenge(gpk, sig.B, sig.K, sig.T, t1, t2,
                               sig.sig_rl_epoch, sig.issuer_rl_epoch,
                               nonce_pv, message)
    if expect != sig.c:
        return _fail("sigma1")

    for tag, rl, proofs in ((b"sig-rl", sig_rl, sig.nonrevocation_sig),
                            (b"issuer-rl", issuer_rl, sig.nonrevocation_iss)):
        for i, ((B_i, K_i), proof) in enumerate(zip(rl.entries, proofs)):
            check = _verify_not_revoked(tag, i, B_i, K_i, sig.B, sig.K,
                                        proof, sig.c, gpk)
            if not check:
                return check
    return OK
