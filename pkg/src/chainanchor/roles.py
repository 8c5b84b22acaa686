"""The four system entities and the enrollment/proving/registration protocol.

The Permissions Issuer knows real identities and issues member credentials;
the Permissions Verifier checks anonymous membership proofs and maintains the
permissions database that consensus nodes read.  Users hold member keys and
self-generated transaction keys.  All cross-actor traffic goes through a
:class:`~chainanchor.channels.Transcript` as byte payloads, so anonymity
claims can be audited at the byte level and tests can tamper in transit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

from . import epid, schnorr
from .channels import (
    Envelope,
    LogicalClock,
    Transcript,
    derive_key,
    mac_tag,
    macs_equal,
    open_sealed,
    seal,
)
from .errors import ProtocolError
from .groupmath import (
    ParameterProfile,
    hash_to_subgroup,
    int_to_bytes,
    rand_bytes,
    rand_range,
)
from .serial import doc_bytes, doc_from_bytes

ISSUER_ID = "idp-pi"
VERIFIER_ID = "idp-pv"
ANON_ID = "anonymous-member"
VERIFIER_DOMAIN = "idp-verifier.com"

CHALLENGE_TTL = 300          # seconds of simulated time
NONCE_LEN = 16               # 128 bits, above every profile's l_phi


def signing_group_of(gpk: epid.GroupPublicKey) -> schnorr.SigningGroup:
    return schnorr.SigningGroup(gpk.p, gpk.q, gpk.u)


# ---------------------------------------------------------------------------
# state records

@dataclass
class PermissionsDatabase:
    """Registered transaction public keys and timestamps; nothing else."""

    group_id: str
    entries: list = field(default_factory=list)   # [(public key, timestamp)]

    def contains(self, public_key: int) -> bool:
        return any(pk == public_key for pk, _ in self.entries)

    def add(self, public_key: int, timestamp: int):
        if self.contains(public_key):
            raise ProtocolError("duplicate transaction key")
        self.entries.append((public_key, timestamp))

    def to_doc(self) -> dict:
        return {"group_id": self.group_id,
                "entries": [[hex(pk), ts] for pk, ts in self.entries]}

    @classmethod
    def from_doc(cls, doc) -> "PermissionsDatabase":
        return cls(doc["group_id"],
                   [(int(pk, 16), ts) for pk, ts in doc["entries"]])


@dataclass
class PskSession:
    session_id: str
    psk: bytes
    transcript_hash: bytes
    registered_keys: list = field(default_factory=list)

    def to_doc(self) -> dict:
        return {"session_id": self.session_id, "psk": self.psk.hex(),
                "transcript_hash": self.transcript_hash.hex(),
                "registered_keys": [hex(k) for k in self.registered_keys]}

    @classmethod
    def from_doc(cls, doc) -> "PskSession":
        return cls(doc["session_id"], bytes.fromhex(doc["psk"]),
                   bytes.fromhex(doc["transcript_hash"]),
                   [int(k, 16) for k in doc["registered_keys"]])


@dataclass
class Challenge:
    m: bytes
    n_pv: bytes
    expires_at: int
    used: bool = False

    def to_doc(self) -> dict:
        return {"m": self.m.hex(), "n_pv": self.n_pv.hex(),
                "expires_at": self.expires_at, "used": self.used}

    @classmethod
    def from_doc(cls, doc) -> "Challenge":
        return cls(bytes.fromhex(doc["m"]), bytes.fromhex(doc["n_pv"]),
                   doc["expires_at"], doc["used"])


@dataclass
class AnonymousIdentityCertificate:
    """Binding of a fresh anonymous identity to one transaction key."""

    anon_id: str
    bound_key: int
    issued_at: int
    signature: tuple

    def body_bytes(self) -> bytes:
        return doc_bytes({"anon_id": self.anon_id,
                          "bound_key": hex(self.bound_key),
                          "issued_at": self.issued_at})

    def to_doc(self) -> dict:
        return {"anon_id": self.anon_id, "bound_key": hex(self.bound_key),
                "issued_at": self.issued_at,
                "signature": [hex(self.signature[0]), hex(self.signature[1])]}

    @classmethod
    def from_doc(cls, doc) -> "AnonymousIdentityCertificate":
        return cls(doc["anon_id"], int(doc["bound_key"], 16), doc["issued_at"],
                   (int(doc["signature"][0], 16), int(doc["signature"][1], 16)))


@dataclass
class DisclosureRecord:
    disclosed_key: int
    statement: bytes
    signature: tuple
    identity: Optional[str] = None

    def to_doc(self) -> dict:
        return {"disclosed_key": hex(self.disclosed_key),
                "statement": self.statement.hex(),
                "signature": [hex(self.signature[0]), hex(self.signature[1])],
                "identity": self.identity}

    @classmethod
    def from_doc(cls, doc) -> "DisclosureRecord":
        return cls(int(doc["disclosed_key"], 16),
                   bytes.fromhex(doc["statement"]),
                   (int(doc["signature"][0], 16), int(doc["signature"][1], 16)),
                   doc["identity"])


# ---------------------------------------------------------------------------
# actors

@dataclass
class IssuerGroup:
    gpk: epid.GroupPublicKey
    gipk: epid.GroupIssuingPrivateKey
    member_roster: set = field(default_factory=set)
    pending_join_nonces: dict = field(default_factory=dict)   # identity -> nonce
    join_pseudonyms: dict = field(default_factory=dict)       # identity -> (B, K)


@dataclass
class IssuerActor:
    """Identity provider acting as Permissions Issuer; one per group."""

    identity_keypair: Optional[schnorr.SchnorrKeypair] = None
    accounts: dict = field(default_factory=dict)   # identity -> identity public key
    groups: dict = field(default_factory=dict)     # group_id -> IssuerGroup
    actor_id: str = ISSUER_ID


@dataclass
class VerifierActor:
    """Identity provider acting as Permissions Verifier."""

    identity_keypair: Optional[schnorr.SchnorrKeypair] = None
    pinned_issuer_key: Optional[int] = None
    signing_group: Optional[schnorr.SigningGroup] = None
    gpk: Optional[epid.GroupPublicKey] = None
    permissions_db: Optional[PermissionsDatabase] = None
    sig_rl: epid.RevocationList = field(default_factory=epid.RevocationList)
    issuer_rl: epid.RevocationList = field(default_factory=epid.RevocationList)
    pending_challenges: dict = field(default_factory=dict)    # session_id -> Challenge
    sessions: dict = field(default_factory=dict)              # session_id -> PskSession
    issued_identities: dict = field(default_factory=dict)     # anon_id -> certificate
    disclosures: list = field(default_factory=list)
    verified_pseudonyms: list = field(default_factory=list)   # (B, K, session_id)
    domain: str = VERIFIER_DOMAIN
    actor_id: str = VERIFIER_ID


@dataclass
class Enrollment:
    group_id: str
    gpk: epid.GroupPublicKey
    join_nonce: bytes


@dataclass
class UserActor:
    internet_identity: str
    identity_keypair: schnorr.SchnorrKeypair
    member_keys: list = field(default_factory=list)
    transaction_keys: list = field(default_factory=list)
    psk_sessions: dict = field(default_factory=dict)
    enrollments: dict = field(default_factory=dict)           # group_id -> Enrollment
    certificates: list = field(default_factory=list)


def make_user(identity: str, group: schnorr.SigningGroup, rng) -> UserActor:
    return UserActor(internet_identity=identity,
                     identity_keypair=schnorr.generate_keypair(group, rng))


def wire_identity_keys(issuer: IssuerActor, verifier: VerifierActor,
                       group: schnorr.SigningGroup, rng):
    """Out-of-band provisioning of the long-term actor keys: the issuer and
    verifier keypairs, plus the issuer key pinned at the verifier."""
    issuer.identity_keypair = schnorr.generate_keypair(group, rng)
    verifier.identity_keypair = schnorr.generate_keypair(group, rng)
    verifier.pinned_issuer_key = issuer.identity_keypair.public
    verifier.signing_group = group


# ---------------------------------------------------------------------------
# Step 0/1: group establishment and key delivery

def pi_establish_group(issuer: IssuerActor, group_id: str,
                       profile: ParameterProfile, rng) -> epid.GroupPublicKey:
    if group_id in issuer.groups:
        raise ProtocolError(f"group {group_id!r} already exists")
    gpk, gipk = epid.setup_group(profile, f"{ISSUER_ID}:{group_id}".encode(), rng)
    issuer.groups[group_id] = IssuerGroup(gpk=gpk, gipk=gipk)
    return gpk


def pi_share_gpk(issuer: IssuerActor, verifier: VerifierActor, group_id: str,
                 transcript: Transcript) -> dict:
    """Signed delivery of the group public key to the verifier (Step 1)."""
    group = issuer.groups.get(group_id)
    if group is None:
        raise ProtocolError(f"unknown group {group_id!r}")
    payload = doc_bytes({"group_id": group_id, "gpk": group.gpk.to_doc()})
    signature = schnorr.sign(issuer.identity_keypair, payload)
    env = transcript.send(Envelope(ISSUER_ID, VERIFIER_ID, "step-1",
                                   payload, signature))

    if verifier.pinned_issuer_key is None or verifier.signing_group is None:
        raise ProtocolError("verifier has no pinned issuer key")
    if env.signature is None or not schnorr.verify(
            verifier.signing_group, verifier.pinned_issuer_key,
            env.payload, env.signature):
        raise ProtocolError("issuer signature on group key delivery invalid")
    doc = doc_from_bytes(env.payload)
    gpk = epid.GroupPublicKey.from_doc(doc["gpk"])
    check = epid.validate_gpk(gpk)
    if not check:
        raise ProtocolError(f"delivered group key invalid: {check.reason}")
    verifier.gpk = gpk
    verifier.permissions_db = PermissionsDatabase(group_id=doc["group_id"])
    return {"group_id": doc["group_id"], "accepted": True}


# ---------------------------------------------------------------------------
# Step 2: authenticated membership request

def user_request_membership(user: UserActor, issuer: IssuerActor,
                            group_id: str, transcript: Transcript,
                            rng) -> Enrollment:
    """Non-anonymous enrollment: challenge-signature authentication against
    the issuer's provisioned accounts, then gpk + join nonce delivery."""
    group = issuer.groups.get(group_id)
    if group is None:
        raise ProtocolError(f"unknown group {group_id!r}")
    identity = user.internet_identity
    transcript.send(Envelope(identity, ISSUER_ID, "step-2",
                             doc_bytes({"identity": identity,
                                        "group_id": group_id})))
    if identity not in issuer.accounts:
        raise ProtocolError(f"unknown identity {identity!r}")

    auth_nonce = rand_bytes(rng, NONCE_LEN)
    transcript.send(Envelope(ISSUER_ID, identity, "step-2",
                             doc_bytes({"auth_nonce": auth_nonce.hex()})))
    statement = doc_bytes({"identity": identity, "group_id": group_id,
                           "auth_nonce": auth_nonce.hex()})
    auth_sig = schnorr.sign(user.identity_keypair, statement)
    env = transcript.send(Envelope(identity, ISSUER_ID, "step-2",
                                   statement, auth_sig))
    group_params = signing_group_of(group.gpk)
    if env.signature is None or not schnorr.verify(
            group_params, issuer.accounts[identity], env.payload, env.signature):
        raise ProtocolError("authentication failed")

    group.member_roster.add(identity)
    join_nonce = rand_bytes(rng, NONCE_LEN)
    group.pending_join_nonces[identity] = join_nonce
    transcript.send(Envelope(ISSUER_ID, identity, "step-2",
                             doc_bytes({"gpk": group.gpk.to_doc(),
                                        "join_nonce": join_nonce.hex()})))
    enrollment = Enrollment(group_id=group_id, gpk=group.gpk,
                            join_nonce=join_nonce)
    user.enrollments[group_id] = enrollment
    return enrollment


# ---------------------------------------------------------------------------
# Steps 3-5: blinded join

def user_join_group(user: UserActor, issuer: IssuerActor, group_id: str,
                    transcript: Transcript, rng) -> int:
    """Run the blinded join; on success stores the member key and a fresh
    transaction keypair, returning the member key index."""
    enrollment = user.enrollments.get(group_id)
    if enrollment is None:
        raise ProtocolError("membership request (step 2) not completed")
    group = issuer.groups.get(group_id)
    if group is None:
        raise ProtocolError(f"unknown group {group_id!r}")
    identity = user.internet_identity

    state, request = epid.join_request(enrollment.gpk,
                                       enrollment.gpk.issuer_basename,
                                       enrollment.join_nonce, rng)
    env = transcript.send(Envelope(identity, ISSUER_ID, "step-3",
                                   doc_bytes({"identity": identity,
                                              "join": request.to_doc()})))

    doc = doc_from_bytes(env.payload)
    nonce = group.pending_join_nonces.get(doc["identity"])
    if nonce is None:
        raise ProtocolError("no pending join for this identity")
    received = epid.JoinRequest.from_doc(doc["join"])
    response = epid.issue_credential(group.gpk, group.gipk, received,
                                     nonce, rng)
    del group.pending_join_nonces[doc["identity"]]
    base = hash_to_subgroup(group.gpk.issuer_basename, group.gpk.p, group.gpk.q)
    group.join_pseudonyms[doc["identity"]] = (base.value, received.K_I)

    env = transcript.send(Envelope(ISSUER_ID, identity, "step-4",
                                   doc_bytes({"credential": response.to_doc()})))
    delivered = epid.CredentialResponse.from_doc(
        doc_from_bytes(env.payload)["credential"])
    member_key = epid.complete_join(state, delivered, enrollment.gpk)
    user.member_keys.append(member_key)
    # Step 5 also has the user mint a transaction keypair for later use.
    user.transaction_keys.append(
        schnorr.generate_keypair(signing_group_of(enrollment.gpk), rng))
    return len(user.member_keys) - 1


# ---------------------------------------------------------------------------
# Step 6: anonymous membership proof and PSK agreement

def pv_challenge(verifier: VerifierActor, rng, clock: LogicalClock):
    """Mint a fresh (m, n_pv) challenge; returns (session_id, m, n_pv)."""
    session_id = "s" + rand_bytes(rng, 8).hex()
    challenge = Challenge(m=rand_bytes(rng, 32),
                          n_pv=rand_bytes(rng, NONCE_LEN),
                          expires_at=clock.now() + CHALLENGE_TTL)
    verifier.pending_challenges[session_id] = challenge
    return session_id, challenge.m, challenge.n_pv


def _psk(dh_secret: int, sigma_hash: bytes, m: bytes, n_pv: bytes) -> bytes:
    return derive_key(b"psk", [int_to_bytes(dh_secret), sigma_hash, m, n_pv])


def user_prove_membership(user: UserActor, verifier: VerifierActor,
                          session_id: str, key_index: int,
                          transcript: Transcript, rng,
                          clock: LogicalClock) -> PskSession:
    """Steps 6.1-6.6: anonymous proof of membership followed by an ephemeral
    key agreement bound to the accepted signature.

    Both sides derive PSK = KDF(u^xy || H(sigma) || m || n_pv) and exchange
    key-confirmation tags, so a tampered share is rejected by whichever side
    sees the mismatch first.
    """
    if verifier.gpk is None or verifier.permissions_db is None:
        raise ProtocolError("verifier has no group key")
    gpk = verifier.gpk
    params = signing_group_of(gpk)

    transcript.send(Envelope(ANON_ID, VERIFIER_ID, "step-6.1",
                             doc_bytes({"request": "membership-verification",
                                        "session_id": session_id})))
    challenge = verifier.pending_challenges.get(session_id)
    if challenge is None:
        raise ProtocolError("unknown challenge session")
    if challenge.used:
        raise ProtocolError("challenge already used")
    if clock.now() > challenge.expires_at:
        raise ProtocolError("challenge expired")
    env = transcript.send(Envelope(
        VERIFIER_ID, ANON_ID, "step-6.2",
        doc_bytes({"session_id": session_id, "m": challenge.m.hex(),
                   "n_pv": challenge.n_pv.hex(),
                   "sig_rl": verifier.sig_rl.to_doc(),
                   "issuer_rl": verifier.issuer_rl.to_doc()})))

    doc = doc_from_bytes(env.payload)
    m = bytes.fromhex(doc["m"])
    n_pv = bytes.fromhex(doc["n_pv"])
    sig_rl = epid.RevocationList.from_doc(doc["sig_rl"])
    issuer_rl = epid.RevocationList.from_doc(doc["issuer_rl"])

    enrollment = user.enrollments.get(verifier.permissions_db.group_id)
    if enrollment is None:
        raise ProtocolError("user is not enrolled in the verifier's group")
    if not 0 <= key_index < len(user.member_keys):
        raise ProtocolError("no such member key")
    sigma = epid.sign_membership(user.member_keys[key_index], enrollment.gpk,
                                 m, n_pv, sig_rl, issuer_rl, rng)
    sigma_hash = hashlib.sha256(sigma.transcript_bytes()).digest()
    x = rand_range(rng, 1, params.q)
    share_user = pow(params.u, x, params.p)
    env = transcript.send(Envelope(
        ANON_ID, VERIFIER_ID, "step-6.4",
        doc_bytes({"session_id": session_id, "sigma": sigma.to_doc(),
                   "share": hex(share_user)})))

    doc = doc_from_bytes(env.payload)
    delivered_sigma = epid.MembershipSignature.from_doc(doc["sigma"])
    delivered_share = int(doc["share"], 16)
    challenge.used = True
    result = epid.verify_membership(gpk, challenge.m, challenge.n_pv,
                                    delivered_sigma, verifier.sig_rl,
                                    verifier.issuer_rl)
    if not result:
        raise ProtocolError(f"membership proof rejected: {result.reason}")
    if not 1 < delivered_share < gpk.p or pow(delivered_share, gpk.q, gpk.p) != 1:
        raise ProtocolError("key agreement share invalid")
    delivered_hash = hashlib.sha256(delivered_sigma.transcript_bytes()).digest()
    y = rand_range(rng, 1, params.q)
    share_pv = pow(params.u, y, gpk.p)
    psk_pv = _psk(pow(delivered_share, y, gpk.p), delivered_hash,
                  challenge.m, challenge.n_pv)
    confirm_pv = mac_tag(psk_pv, b"confirm-pv", [session_id.encode()])
    env = transcript.send(Envelope(
        VERIFIER_ID, ANON_ID, "step-6.5",
        doc_bytes({"session_id": session_id, "share": hex(share_pv),
                   "confirm": confirm_pv.hex()})))

    doc = doc_from_bytes(env.payload)
    psk_user = _psk(pow(int(doc["share"], 16), x, gpk.p), sigma_hash, m, n_pv)
    if not macs_equal(bytes.fromhex(doc["confirm"]),
                      mac_tag(psk_user, b"confirm-pv", [session_id.encode()])):
        raise ProtocolError("key confirmation failed (user side)")
    env = transcript.send(Envelope(
        ANON_ID, VERIFIER_ID, "step-6.6",
        doc_bytes({"session_id": session_id,
                   "confirm": mac_tag(psk_user, b"confirm-user",
                                      [session_id.encode()]).hex()})))
    if not macs_equal(bytes.fromhex(doc_from_bytes(env.payload)["confirm"]),
                      mac_tag(psk_pv, b"confirm-user", [session_id.encode()])):
        raise ProtocolError("key confirmation failed (verifier side)")

    verifier.sessions[session_id] = PskSession(session_id, psk_pv, delivered_hash)
    verifier.verified_pseudonyms.append(
        (delivered_sigma.B, delivered_sigma.K, session_id))
    session = PskSession(session_id, psk_user, sigma_hash)
    user.psk_sessions[session_id] = session
    return session


# ---------------------------------------------------------------------------
# Step 6.7: transaction key registration

def _channel_key(session: PskSession, purpose: bytes) -> bytes:
    return derive_key(purpose, [session.psk, session.session_id.encode()])


def register_transaction_key(user: UserActor, verifier: VerifierActor,
                             session_id: str, key_index: int,
                             transcript: Transcript, rng,
                             clock: LogicalClock):
    """Deliver a transaction public key under the PSK channel; the verifier
    appends (key, timestamp) to the permissions database."""
    session = user.psk_sessions.get(session_id)
    if session is None:
        raise ProtocolError("no established session")
    if not 0 <= key_index < len(user.transaction_keys):
        raise ProtocolError("no such transaction key")
    public_key = user.transaction_keys[key_index].public
    blob = seal(_channel_key(session, b"register"),
                doc_bytes({"transaction_public_key": hex(public_key)}),
                rng, aad=session_id.encode())
    env = transcript.send(Envelope(ANON_ID, VERIFIER_ID, "step-6.7",
                                   doc_bytes({"session_id": session_id,
                                              "sealed": blob.hex()})))

    vsession = verifier.sessions.get(session_id)
    if vsession is None:
        raise ProtocolError("no established session")
    doc = doc_from_bytes(env.payload)
    plain = open_sealed(_channel_key(vsession, b"register"),
                        bytes.fromhex(doc["sealed"]), aad=session_id.encode())
    submitted = int(doc_from_bytes(plain)["transaction_public_key"], 16)
    verifier.permissions_db.add(submitted, clock.now())
    vsession.registered_keys.append(submitted)

    ack = seal(_channel_key(vsession, b"register-ack"),
               doc_bytes({"registered": hex(submitted),
                          "timestamp": clock.now()}), rng,
               aad=session_id.encode())
    env = transcript.send(Envelope(VERIFIER_ID, ANON_ID, "step-6.7",
                                   doc_bytes({"session_id": session_id,
                                              "sealed": ack.hex()})))
    confirmed = doc_from_bytes(open_sealed(
        _channel_key(session, b"register-ack"),
        bytes.fromhex(doc_from_bytes(env.payload)["sealed"]),
        aad=session_id.encode()))
    session.registered_keys.append(int(confirmed["registered"], 16))
    return (submitted, confirmed["timestamp"])


# ---------------------------------------------------------------------------
# Step 7: anonymous internet identity

def pv_issue_anonymous_identity(verifier: VerifierActor, session_id: str,
                                transaction_key: int, rng,
                                clock: LogicalClock) -> AnonymousIdentityCertificate:
    """Mint a fresh anonymous identity bound to a key registered in this
    session, signed with the verifier's identity key."""
    session = verifier.sessions.get(session_id)
    if session is None:
        raise ProtocolError("no established session")
    if transaction_key not in session.registered_keys:
        raise ProtocolError("key not registered in this session")
    while True:
        anon_id = f"anon{rand_bytes(rng, 8).hex()}@{verifier.domain}"
        if anon_id not in verifier.issued_identities:
            break
    cert = AnonymousIdentityCertificate(anon_id=anon_id,
                                        bound_key=transaction_key,
                                        issued_at=clock.now(),
                                        signature=(0, 0))
    signature = schnorr.sign(verifier.identity_keypair, cert.body_bytes())
    cert = AnonymousIdentityCertificate(anon_id=anon_id,
                                        bound_key=transaction_key,
                                        issued_at=cert.issued_at,
                                        signature=signature)
    verifier.issued_identities[anon_id] = cert
    return cert


def user_request_anonymous_identity(user: UserActor, verifier: VerifierActor,
                                    session_id: str, transaction_key: int,
                                    transcript: Transcript, rng,
                                    clock: LogicalClock) -> AnonymousIdentityCertificate:
    """PSK-sealed request/response wrapper around identity issuance."""
    session = user.psk_sessions.get(session_id)
    if session is None:
        raise ProtocolError("no established session")
    blob = seal(_channel_key(session, b"identity-request"),
                doc_bytes({"bound_key": hex(transaction_key)}), rng,
                aad=session_id.encode())
    env = transcript.send(Envelope(ANON_ID, VERIFIER_ID, "step-7",
                                   doc_bytes({"session_id": session_id,
                                              "sealed": blob.hex()})))

    vsession = verifier.sessions.get(session_id)
    if vsession is None:
        raise ProtocolError("no established session")
    request = doc_from_bytes(open_sealed(
        _channel_key(vsession, b"identity-request"),
        bytes.fromhex(doc_from_bytes(env.payload)["sealed"]),
        aad=session_id.encode()))
    cert = pv_issue_anonymous_identity(verifier, session_id,
                                       int(request["bound_key"], 16),
                                       rng, clock)
    reply = seal(_channel_key(vsession, b"identity-reply"),
                 doc_bytes(cert.to_doc()), rng, aad=session_id.encode())
    env = transcript.send(Envelope(VERIFIER_ID, ANON_ID, "step-7",
                                   doc_bytes({"session_id": session_id,
                                              "sealed": reply.hex()})))
    delivered = AnonymousIdentityCertificate.from_doc(doc_from_bytes(
        open_sealed(_channel_key(session, b"identity-reply"),
                    bytes.fromhex(doc_from_bytes(env.payload)["sealed"]),
                    aad=session_id.encode())))
    user.certificates.append(delivered)
    return delivered


# ---------------------------------------------------------------------------
# lookups, revocation, disclosure

def pv_lookup(verifier: VerifierActor, transaction_key: int) -> bool:
    """Read-only membership check against the permissions database."""
    if verifier.permissions_db is None:
        return False
    return verifier.permissions_db.contains(transaction_key)


def pv_revoke(verifier: VerifierActor, B: int, K: int, which: str):
    """Append a pseudonym pair to the chosen revocation list.

    Pairs must come from verified signatures (or join records); a value
    outside the subgroup would poison every member's self-check, so it is
    rejected here.
    """
    gpk = verifier.gpk
    if gpk is None:
        raise ProtocolError("verifier has no group key")
    for value in (B, K):
        if not 1 < value < gpk.p or pow(value, gpk.q, gpk.p) != 1:
            raise ProtocolError("pseudonym pair is not in the group")
    if which == "sig":
        verifier.sig_rl = epid.revoke_signature(verifier.sig_rl, B, K)
    elif which == "issuer":
        verifier.issuer_rl = epid.revoke_by_issuer(verifier.issuer_rl, B, K)
    else:
        raise ProtocolError(f"unknown revocation list {which!r}")


def user_disclose_key(user: UserActor, verifier: VerifierActor,
                      key_index: int, transcript: Transcript,
                      reveal_identity: bool = False) -> DisclosureRecord:
    """Voluntarily prove control of one registered transaction key.

    The signed statement names only that key; the verifier learns nothing
    about the user's other keys.
    """
    if not 0 <= key_index < len(user.transaction_keys):
        raise ProtocolError("no such transaction key")
    keypair = user.transaction_keys[key_index]
    if not pv_lookup(verifier, keypair.public):
        raise ProtocolError("key not registered")
    identity = user.internet_identity if reveal_identity else None
    statement = doc_bytes({"disclosed_key": hex(keypair.public),
                           "identity": identity})
    signature = schnorr.sign(keypair, statement)
    sender = identity if reveal_identity else ANON_ID
    env = transcript.send(Envelope(sender, VERIFIER_ID, "disclosure",
                                   statement, signature))

    doc = doc_from_bytes(env.payload)
    disclosed = int(doc["disclosed_key"], 16)
    group = signing_group_of(verifier.gpk)
    if env.signature is None or not schnorr.verify(group, disclosed,
                                                   env.payload, env.signature):
        raise ProtocolError("disclosure signature invalid")
    record = DisclosureRecord(disclosed_key=disclosed, statement=env.payload,
                              signature=env.signature,
                              identity=doc["identity"])
    verifier.disclosures.append(record)
    return record


# ---------------------------------------------------------------------------
# actor state import/export

def _keypair_doc(keypair):
    return None if keypair is None else keypair.to_doc()


def _keypair_from(doc):
    return None if doc is None else schnorr.SchnorrKeypair.from_doc(doc)


def issuer_to_doc(issuer: IssuerActor, include_secrets: bool = False) -> dict:
    """Issuer state document.  The default (public) export never contains the
    group issuing private key or the issuer's signing secret."""
    groups = {}
    for gid, group in sorted(issuer.groups.items()):
        gdoc = {
            "gpk": group.gpk.to_doc(),
            "member_roster": sorted(group.member_roster),
            "join_pseudonyms": {ident: [hex(b), hex(k)]
                                for ident, (b, k)
                                in sorted(group.join_pseudonyms.items())},
        }
        if include_secrets:
            gdoc["gipk"] = group.gipk.to_doc()
            gdoc["pending_join_nonces"] = {
                ident: nonce.hex()
                for ident, nonce in sorted(group.pending_join_nonces.items())}
        groups[gid] = gdoc
    doc = {
        "actor_id": issuer.actor_id,
        "accounts": {ident: hex(pk)
                     for ident, pk in sorted(issuer.accounts.items())},
        "groups": groups,
    }
    if include_secrets:
        doc["identity_keypair"] = _keypair_doc(issuer.identity_keypair)
    elif issuer.identity_keypair is not None:
        doc["identity_public_key"] = hex(issuer.identity_keypair.public)
    return doc


def issuer_from_doc(doc: dict) -> IssuerActor:
    issuer = IssuerActor(
        identity_keypair=_keypair_from(doc.get("identity_keypair")),
        accounts={ident: int(pk, 16)
                  for ident, pk in doc["accounts"].items()})
    for gid, gdoc in doc["groups"].items():
        issuer.groups[gid] = IssuerGroup(
            gpk=epid.GroupPublicKey.from_doc(gdoc["gpk"]),
            gipk=epid.GroupIssuingPrivateKey.from_doc(gdoc["gipk"]),
            member_roster=set(gdoc["member_roster"]),
            pending_join_nonces={ident: bytes.fromhex(n) for ident, n
                                 in gdoc["pending_join_nonces"].items()},
            join_pseudonyms={ident: (int(b, 16), int(k, 16)) for ident, (b, k)
                             in gdoc["join_pseudonyms"].items()})
    return issuer


def verifier_to_doc(verifier: VerifierActor, include_secrets: bool = False) -> dict:
    doc = {
        "actor_id": verifier.actor_id,
        "domain": verifier.domain,
        "pinned_issuer_key": (None if verifier.pinned_issuer_key is None
                              else hex(verifier.pinned_issuer_key)),
        "signing_group": (None if verifier.signing_group is None
                          else verifier.signing_group.to_doc()),
        "gpk": None if verifier.gpk is None else verifier.gpk.to_doc(),
        "permissions_db": (None if verifier.permissions_db is None
                           else verifier.permissions_db.to_doc()),
        "sig_rl": verifier.sig_rl.to_doc(),
        "issuer_rl": verifier.issuer_rl.to_doc(),
        "issued_identities": {anon: cert.to_doc() for anon, cert
                              in sorted(verifier.issued_identities.items())},
        "disclosures": [d.to_doc() for d in verifier.disclosures],
        "verified_pseudonyms": [[hex(b), hex(k), sid]
                                for b, k, sid in verifier.verified_pseudonyms],
    }
    if include_secrets:
        doc["identity_keypair"] = _keypair_doc(verifier.identity_keypair)
        doc["pending_challenges"] = {
            sid: ch.to_doc()
            for sid, ch in sorted(verifier.pending_challenges.items())}
        doc["sessions"] = {sid: s.to_doc()
                           for sid, s in sorted(verifier.sessions.items())}
    elif verifier.identity_keypair is not None:
        doc["identity_public_key"] = hex(verifier.identity_keypair.public)
    return doc


def verifier_from_doc(doc: dict) -> VerifierActor:
    return VerifierActor(
        identity_keypair=_keypair_from(doc.get("identity_keypair")),
        pinned_issuer_key=(None if doc["pinned_issuer_key"] is None
                           else int(doc["pinned_issuer_key"], 16)),
        signing_group=(None if doc["signing_group"] is None
                       else schnorr.SigningGroup.from_doc(doc["signing_group"])),
        gpk=(None if doc["gpk"] is None
             else epid.GroupPublicKey.from_doc(doc["gpk"])),
        permissions_db=(None if doc["permissions_db"] is None
                        else PermissionsDatabase.from_doc(doc["permissions_db"])),
        sig_rl=epid.RevocationList.from_doc(doc["sig_rl"]),
        issuer_rl=epid.RevocationList.from_doc(doc["issuer_rl"]),
        pending_challenges={sid: Challenge.from_doc(d) for sid, d
                            in doc.get("pending_challenges", {}).items()},
        sessions={sid: PskSession.from_doc(d) for sid, d
                  in doc.get("sessions", {}).items()},
        issued_identities={anon: AnonymousIdentityCertificate.from_doc(d)
                           for anon, d in doc["issued_identities"].items()},
        disclosures=[DisclosureRecord.from_doc(d) for d in doc["disclosures"]],
        verified_pseudonyms=[(int(b, 16), int(k, 16), sid)
                             for b, k, sid in doc["verified_pseudonyms"]],
        domain=doc["domain"])


def user_to_doc(user: UserActor) -> dict:
    return {
        "internet_identity": user.internet_identity,
        "identity_keypair": user.identity_keypair.to_doc(),
        "member_keys": [k.to_doc() for k in user.member_keys],
        "transaction_keys": [k.to_doc() for k in user.transaction_keys],
        "psk_sessions": {sid: s.to_doc()
                         for sid, s in sorted(user.psk_sessions.items())},
        "enrollments": {gid: {"gpk": e.gpk.to_doc(),
                              "join_nonce": e.join_nonce.hex()}
                        for gid, e in sorted(user.enrollments.items())},
        "certificates": [c.to_doc() for c in user.certificates],
    }


def user_from_doc(doc: dict) -> UserActor:
    return UserActor(
        internet_identity=doc["internet_identity"],
        identity_keypair=schnorr.SchnorrKeypair.from_doc(doc["identity_keypair"]),
        member_keys=[epid.UserMemberPrivateKey.from_doc(d)
                     for d in doc["member_keys"]],
        transaction_keys=[schnorr.SchnorrKeypair.from_doc(d)
                          for d in doc["transaction_keys"]],
        psk_sessions={sid: PskSession.from_doc(d)
                      for sid, d in doc["psk_sessions"].items()},
        enrollments={gid: Enrollment(group_id=gid,
                                     gpk=epid.GroupPublicKey.from_doc(d["gpk"]),
                                     join_nonce=bytes.fromhex(d["join_nonce"]))
                     for gid, d in doc["enrollments"].items()},
        certificates=[AnonymousIdentityCertificate.from_doc(d)
                      for d in doc["certificates"]])
