"""Whole-simulation state: actors, ledger, clock, randomness, transcripts.

A world is created once (group establishment + key delivery), then driven by
commands that mirror the protocol steps.  Every piece of state, including
the randomness stream position, serializes to one canonical JSON document,
so a run can be split across processes: save after each command, reload,
and the replay produces identical state hashes.
"""

from __future__ import annotations

import hashlib
import os

from . import epid, ledger, roles, schnorr
from .channels import LogicalClock, Transcript
from .errors import InvariantViolation, ProtocolError
from .groupmath import ParameterProfile
from .rng import DeterministicRng
from .serial import doc_bytes, doc_from_bytes

ISSUER_DOMAIN = "idp-issuer.com"
OUTSIDER_DOMAIN = "external.example"

FORMAT_VERSION = 1


def _identity(name: str) -> str:
    return f"{name}@{ISSUER_DOMAIN}"


class World:
    def __init__(self, group_id: str, profile: ParameterProfile, seed: int):
        self.group_id = group_id
        self.profile = profile
        self.seed = seed
        self.rng = DeterministicRng(seed)
        self.clock = LogicalClock()
        self.transcript = Transcript()
        self.lines: list[str] = []
        self.issuer = roles.IssuerActor()
        self.verifier = roles.VerifierActor()
        self.users: dict[str, roles.UserActor] = {}
        self.nodes: list[ledger.ConsensusNode] = []
        self.pool = None
        self.progress: dict[str, dict] = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def create(cls, group_id: str, profile: ParameterProfile, seed: int) -> "World":
        """Steps 0-1: establish the group, wire actor keys, deliver the gpk,
        and stand up the default consensus nodes."""
        world = cls(group_id, profile, seed)
        gpk = roles.pi_establish_group(world.issuer, group_id, profile, world.rng)
        world.log("step 0", f"group {group_id} established "
                            f"(profile {profile.name}, N {profile.l_N} bits)")
        group = roles.signing_group_of(gpk)
        roles.wire_identity_keys(world.issuer, world.verifier, group, world.rng)
        roles.pi_share_gpk(world.issuer, world.verifier, group_id,
                           world.transcript)
        world.log("step 1", "membership verification public key delivered to "
                            "verifier and validated")
        world.pool = ledger.TransactionPool(group)
        world.add_node("node0")
        world.add_node("node1")
        return world

    # -- bookkeeping --------------------------------------------------------

    def log(self, step: str, text: str):
        self.lines.append(f"[{step}] {text}")

    def transcript_text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def _user(self, name: str) -> roles.UserActor:
        user = self.users.get(name)
        if user is None:
            raise ProtocolError(f"unknown user {name!r}")
        return user

    def _progress(self, name: str) -> dict:
        return self.progress.setdefault(
            name, {"enrolled": False, "joined": False,
                   "pending_sessions": [], "sessions": [],
                   "registered_key_indexes": []})

    def _require(self, name: str, stage: str):
        state = self._progress(name)
        if stage in ("joined", "enrolled") and not state["enrolled"]:
            raise ProtocolError(
                f"step 2 (enroll) not completed for {name!r}")
        if stage == "joined" and not state["joined"]:
            raise ProtocolError(
                f"steps 3-5 (join) not completed for {name!r}")

    def db_view(self):
        return lambda pk: roles.pv_lookup(self.verifier, pk)

    # -- protocol commands --------------------------------------------------

    def enroll(self, name: str):
        """Step 2: provision the account and run the authenticated
        membership request."""
        if name in self.users:
            raise ProtocolError(f"user {name!r} already exists")
        self.clock.tick()
        group = roles.signing_group_of(self.verifier.gpk)
        user = roles.make_user(_identity(name), group, self.rng)
        self.issuer.accounts[user.internet_identity] = user.identity_keypair.public
        self.users[name] = user
        roles.user_request_membership(user, self.issuer, self.group_id,
                                      self.transcript, self.rng)
        self._progress(name)["enrolled"] = True
        self.log("step 2", f"{name} authenticated to issuer and was approved; "
                           f"group key and join nonce delivered")

    def join(self, name: str):
        """Steps 3-5: blinded join; mints the member key and first
        transaction keypair."""
        self._require(name, "enrolled")
        user = self._user(name)
        self.clock.tick()
        index = roles.user_join_group(user, self.issuer, self.group_id,
                                      self.transcript, self.rng)
        self._progress(name)["joined"] = True
        self.log("step 3", f"{name} sent blinded commitment parameters")
        self.log("step 4", f"issuer returned member keying parameters")
        self.log("step 5", f"{name} holds member key #{index} and a fresh "
                           f"transaction keypair")

    def prove(self, name: str, member_index: int = 0) -> str:
        """Step 6: anonymous membership proof plus PSK agreement.  Returns
        the session id and queues it for a later registration."""
        self._require(name, "joined")
        user = self._user(name)
        self.clock.tick()
        session_id, _, _ = roles.pv_challenge(self.verifier, self.rng, self.clock)
        self.log("step 6.2", f"verifier issued challenge session {session_id}")
        try:
            session = roles.user_prove_membership(
                user, self.verifier, session_id, member_index,
                self.transcript, self.rng, self.clock)
        except epid.RevokedKeyError:
            self.log("step 6.3", f"{name}: revoked")
            raise
        psk_match = (session.psk ==
                     self.verifier.sessions[session_id].psk)
        if not psk_match:
            raise InvariantViolation("PSK mismatch between user and verifier")
        state = self._progress(name)
        state["pending_sessions"].append(session_id)
        state["sessions"].append(session_id)
        self.log("step 6.6", f"anonymous membership proof accepted for "
                             f"session {session_id}; pairwise key "
                             f"established")
        return session_id

    def register(self, name: str, key_index=None, with_identity: bool = False):
        """Step 6.7 (+ optional step 7): register a transaction key under the
        PSK channel from the oldest unconsumed proof session."""
        self._require(name, "joined")
        user = self._user(name)
        state = self._progress(name)
        if not state["pending_sessions"]:
            raise ProtocolError(
                f"step 6 (prove) not completed for {name!r}: no open session")
        self.clock.tick()
        if key_index is None:
            registered = set(state["registered_key_indexes"])
            key_index = next((i for i in range(len(user.transaction_keys))
                              if i not in registered), None)
            if key_index is None:
                user.transaction_keys.append(schnorr.generate_keypair(
                    roles.signing_group_of(self.verifier.gpk), self.rng))
                key_index = len(user.transaction_keys) - 1
        session_id = state["pending_sessions"].pop(0)
        public_key, timestamp = roles.register_transaction_key(
            user, self.verifier, session_id, key_index,
            self.transcript, self.rng, self.clock)
        state["registered_key_indexes"].append(key_index)
        self.log("step 6.7", f"transaction key #{key_index} registered in "
                             f"permissions database at t={timestamp} "
                             f"(session {session_id})")
        if with_identity:
            cert = roles.user_request_anonymous_identity(
                user, self.verifier, session_id, public_key,
                self.transcript, self.rng, self.clock)
            self.log("step 7", f"anonymous identity {cert.anon_id} issued and "
                               f"bound to the registered key")
        return key_index

    def add_outsider(self, name: str):
        """A keypair-holder who never joined; used to exercise access control."""
        if name in self.users:
            raise ProtocolError(f"user {name!r} already exists")
        self.clock.tick()
        group = roles.signing_group_of(self.verifier.gpk)
        user = roles.UserActor(
            internet_identity=f"{name}@{OUTSIDER_DOMAIN}",
            identity_keypair=schnorr.generate_keypair(group, self.rng))
        user.transaction_keys.append(schnorr.generate_keypair(group, self.rng))
        self.users[name] = user
        self.log("outsider", f"{name} self-generated a transaction keypair "
                             f"without joining the group")

    def tx(self, name: str, key_index: int, payload: bytes) -> str:
        """Steps 8-9: sign a transaction and submit it to the pool."""
        user = self._user(name)
        if not 0 <= key_index < len(user.transaction_keys):
            raise ProtocolError(f"user {name!r} has no transaction key "
                                f"#{key_index}")
        self.clock.tick()
        tx = ledger.create_transaction(user.transaction_keys[key_index],
                                       payload, self.clock)
        ledger.submit(self.pool, tx)
        self.log("step 8", f"transaction {tx.txid[:12]} signed with key "
                           f"#{key_index} and submitted to the pool")
        return tx.txid

    def _node(self, node_id: str) -> ledger.ConsensusNode:
        for node in self.nodes:
            if node.node_id == node_id:
                return node
        raise ProtocolError(f"unknown node {node_id!r}")

    def add_node(self, node_id: str, dishonest: bool = False):
        if any(n.node_id == node_id for n in self.nodes):
            raise ProtocolError(f"node {node_id!r} already exists")
        self.nodes.append(ledger.ConsensusNode(node_id=node_id,
                                               dishonest=dishonest))

    def mine(self, node_id: str):
        """Steps 9-12: the node drains the pool, filters by membership
        lookup, and appends a block to its chain."""
        node = self._node(node_id)
        drops_before = len(node.drop_log)
        block = ledger.node_process(node, self.pool, self.db_view(), self.clock)
        for txid, reason in node.drop_log[drops_before:]:
            self.log("step 10", f"{node_id} dropped {txid[:12]}: {reason}")
        if block is None:
            self.log("step 11", f"{node_id} found no member transactions; "
                                f"no block produced")
        else:
            mode = "dishonest" if node.dishonest else "honest"
            self.log("step 11", f"{mode} {node_id} proposed block "
                                f"{block.height} ({len(block.transactions)} "
                                f"txs, hash {block.block_hash[:12]})")
        return block

    def audit(self, block_hash: str) -> ledger.ValidatorReport:
        """Validator-side re-check of one block against the database."""
        for node in self.nodes:
            for block in node.chain:
                if block.block_hash.startswith(block_hash):
                    report = ledger.validator_audit(self.db_view(), block)
                    ids = ",".join(txid[:12] for txid, _ in report.violations)
                    self.log("audit", f"block {block.block_hash[:12]} on "
                                      f"{node.node_id}: "
                                      f"{len(report.violations)} violations"
                                      + (f" ({ids})" if ids else ""))
                    return report
        raise ProtocolError(f"unknown block {block_hash!r}")

    def revoke(self, B: int, K: int, which: str = "sig"):
        before = (self.verifier.sig_rl.epoch, self.verifier.issuer_rl.epoch)
        roles.pv_revoke(self.verifier, B, K, which)
        after = (self.verifier.sig_rl.epoch, self.verifier.issuer_rl.epoch)
        changed = "updated" if before != after else "no-op (duplicate)"
        self.log("revoke", f"{which}-RL {changed}; epochs sig={after[0]} "
                           f"issuer={after[1]}")

    def disclose(self, name: str, key_index: int, reveal_identity: bool = True):
        user = self._user(name)
        record = roles.user_disclose_key(user, self.verifier, key_index,
                                         self.transcript, reveal_identity)
        self.log("disclosure", f"ownership of key {record.disclosed_key:#x} "
                               f"disclosed"
                               + (f" by {record.identity}"
                                  if record.identity else " anonymously"))
        return record

    # -- serialization ------------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "format": FORMAT_VERSION,
            "group_id": self.group_id,
            "profile": self.profile.to_doc(),
            "seed": self.seed,
            "rng": self.rng.to_doc(),
            "clock": self.clock.time,
            "issuer": roles.issuer_to_doc(self.issuer, include_secrets=True),
            "verifier": roles.verifier_to_doc(self.verifier,
                                              include_secrets=True),
            "users": {name: roles.user_to_doc(u)
                      for name, u in sorted(self.users.items())},
            "nodes": [n.to_doc() for n in self.nodes],
            "pool": None if self.pool is None else self.pool.to_doc(),
            "transcript": self.transcript.to_doc(),
            "lines": self.lines,
            "progress": {name: self.progress[name]
                         for name in sorted(self.progress)},
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "World":
        if doc.get("format") != FORMAT_VERSION:
            raise ProtocolError("unsupported world file format")
        world = cls(doc["group_id"],
                    ParameterProfile.from_doc(doc["profile"]), doc["seed"])
        world.rng = DeterministicRng.from_doc(doc["rng"])
        world.clock = LogicalClock(doc["clock"])
        world.issuer = roles.issuer_from_doc(doc["issuer"])
        world.verifier = roles.verifier_from_doc(doc["verifier"])
        world.users = {name: roles.user_from_doc(d)
                       for name, d in doc["users"].items()}
        world.nodes = [ledger.ConsensusNode.from_doc(d) for d in doc["nodes"]]
        world.pool = (None if doc["pool"] is None
                      else ledger.TransactionPool.from_doc(doc["pool"]))
        world.transcript = Transcript.from_doc(doc["transcript"])
        world.lines = list(doc["lines"])
        world.progress = {name: dict(d) for name, d in doc["progress"].items()}
        return world

    def state_hash(self) -> str:
        return hashlib.sha256(doc_bytes(self.to_doc())).hexdigest()

    def save(self, path: str):
        data = doc_bytes(self.to_doc())
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(data)
            fh.write(b"\n")
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "World":
        with open(path, "rb") as fh:
            return cls.from_doc(doc_from_bytes(fh.read()))
