"""Schnorr signatures over the order-q subgroup shared with the membership
scheme.

Used for everything that is *not* a membership proof: actor identity keys,
self-generated transaction keys, and disclosure statements.  Nonces are
derived from the secret key and message, so signing is deterministic and the
simulation stays replayable without consuming the world randomness stream.
"""

from __future__ import annotations

from dataclasses import dataclass

from .groupmath import (
    canonical_encode,
    fiat_shamir_challenge,
    hash_expand,
    int_to_bytes,
    bytes_to_int,
    rand_range,
)


@dataclass(frozen=True)
class SigningGroup:
    """Public (p, q, u) parameters every plain signature lives in."""

    p: int
    q: int
    u: int

    def transcript_bytes(self) -> bytes:
        return canonical_encode(
            [int_to_bytes(self.p), int_to_bytes(self.q), int_to_bytes(self.u)])

    def to_doc(self) -> dict:
        return {"p": hex(self.p), "q": hex(self.q), "u": hex(self.u)}

    @classmethod
    def from_doc(cls, doc: dict) -> "SigningGroup":
        return cls(int(doc["p"], 16), int(doc["q"], 16), int(doc["u"], 16))


@dataclass(frozen=True)
class SchnorrKeypair:
    group: SigningGroup
    public: int       # u^secret mod p
    secret: int

    def public_bytes(self) -> bytes:
        return int_to_bytes(self.public)

    def to_doc(self) -> dict:
        return {"group": self.group.to_doc(), "public": hex(self.public),
                "secret": hex(self.secret)}

    @classmethod
    def from_doc(cls, doc: dict) -> "SchnorrKeypair":
        return cls(SigningGroup.from_doc(doc["group"]),
                   int(doc["public"], 16), int(doc["secret"], 16))


def generate_keypair(group: SigningGroup, rng) -> SchnorrKeypair:
    secret = rand_range(rng, 1, group.q)
    return SchnorrKeypair(group, pow(group.u, secret, group.p), secret)


def sign(keypair: SchnorrKeypair, message: bytes):
    """Sign ``message``; returns the (challenge, response) pair."""
    g = keypair.group
    nonce_seed = canonical_encode(
        [b"schnorr-nonce", int_to_bytes(keypair.secret), message])
    r = 1 + bytes_to_int(hash_expand(nonce_seed, (g.q.bit_length() + 128) // 8)) % (g.q - 1)
    t = pow(g.u, r, g.p)
    c = _challenge(g, keypair.public, t, message)
    s = (r + c * keypair.secret) % g.q
    return (c, s)


def verify(group: SigningGroup, public: int, message: bytes, signature) -> bool:
    c, s = signature
    if not (1 <= public < group.p and 0 <= s < group.q):
        return False
    if pow(public, group.q, group.p) != 1:
        return False
    try:
        t = pow(group.u, s, group.p) * pow(public, -c, group.p) % group.p
    except ValueError:
        return False
    return _challenge(group, public, t, message) == c


def _challenge(group: SigningGroup, public: int, t: int, message: bytes) -> int:
    return fiat_shamir_challenge(
        [b"schnorr-signature", group.transcript_bytes(), int_to_bytes(public),
         int_to_bytes(t), message],
        group.q.bit_length() - 1 if group.q.bit_length() <= 256 else 256,
    )
