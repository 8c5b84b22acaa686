"""Deterministic in-process permissioned ledger.

Consensus nodes pull from a shared transaction pool and enforce access
control by checking each sender key against the permissions database
(a read handle onto the verifier's ``pv_lookup``).  There is no proof of
work and no networking: nodes propose in whatever order the simulation
invokes them, and every decision is a pure function of the pool snapshot
and database handle so runs are byte-for-byte reproducible.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from . import schnorr
from .errors import ProtocolError
from .groupmath import canonical_encode, int_to_bytes

GENESIS_HASH = "0" * 64

NOT_A_MEMBER = "not-a-member"


@dataclass(frozen=True)
class Transaction:
    sender_key: int
    payload: bytes
    timestamp: int
    signature: tuple
    txid: str

    def body_bytes(self) -> bytes:
        return canonical_encode([int_to_bytes(self.sender_key), self.payload,
                                 int_to_bytes(self.timestamp)])

    def to_doc(self) -> dict:
        return {"sender_key": hex(self.sender_key), "payload": self.payload.hex(),
                "timestamp": self.timestamp,
                "signature": [hex(self.signature[0]), hex(self.signature[1])],
                "txid": self.txid}

    @classmethod
    def from_doc(cls, doc) -> "Transaction":
        return cls(int(doc["sender_key"], 16), bytes.fromhex(doc["payload"]),
                   doc["timestamp"],
                   (int(doc["signature"][0], 16), int(doc["signature"][1], 16)),
                   doc["txid"])


def _txid(body: bytes, signature) -> str:
    signed = canonical_encode([b"transaction", body,
                               int_to_bytes(signature[0]),
                               int_to_bytes(signature[1])])
    return hashlib.sha256(signed).hexdigest()


def create_transaction(keypair: schnorr.SchnorrKeypair, payload: bytes,
                       clock) -> Transaction:
    """Build a self-verifying transaction signed with the transaction key."""
    timestamp = clock.now()
    body = canonical_encode([int_to_bytes(keypair.public), payload,
                             int_to_bytes(timestamp)])
    signature = schnorr.sign(keypair, body)
    return Transaction(sender_key=keypair.public, payload=payload,
                       timestamp=timestamp, signature=signature,
                       txid=_txid(body, signature))


def verify_transaction(group: schnorr.SigningGroup, tx: Transaction) -> bool:
    if tx.txid != _txid(tx.body_bytes(), tx.signature):
        return False
    return schnorr.verify(group, tx.sender_key, tx.body_bytes(), tx.signature)


class TransactionPool:
    """Pending transactions keyed by txid, insertion-ordered."""

    def __init__(self, group: schnorr.SigningGroup):
        self.group = group
        self.pending: dict[str, Transaction] = {}

    def to_doc(self) -> dict:
        return {"group": self.group.to_doc(),
                "pending": [tx.to_doc() for tx in self.pending.values()]}

    @classmethod
    def from_doc(cls, doc) -> "TransactionPool":
        pool = cls(schnorr.SigningGroup.from_doc(doc["group"]))
        for tx_doc in doc["pending"]:
            tx = Transaction.from_doc(tx_doc)
            pool.pending[tx.txid] = tx
        return pool


def submit(pool: TransactionPool, tx: Transaction) -> bool:
    """Admit a self-verifying transaction; duplicates are a no-op.

    Only the signature is checked here; membership is the consensus
    nodes' job.
    """
    if not verify_transaction(pool.group, tx):
        raise ProtocolError("transaction signature invalid")
    if tx.txid in pool.pending:
        return False
    pool.pending[tx.txid] = tx
    return True


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: str
    transactions: tuple
    proposer_id: str
    block_hash: str

    def to_doc(self) -> dict:
        return {"height": self.height, "prev_hash": self.prev_hash,
                "transactions": [tx.to_doc() for tx in self.transactions],
                "proposer_id": self.proposer_id, "block_hash": self.block_hash}

    @classmethod
    def from_doc(cls, doc) -> "Block":
        return cls(doc["height"], doc["prev_hash"],
                   tuple(Transaction.from_doc(d) for d in doc["transactions"]),
                   doc["proposer_id"], doc["block_hash"])


def block_hash(height: int, prev_hash: str, transactions, proposer_id: str) -> str:
    parts = [b"block", int_to_bytes(height), prev_hash.encode(),
             proposer_id.encode()]
    for tx in transactions:
        parts.append(canonical_encode([tx.body_bytes(),
                                       int_to_bytes(tx.signature[0]),
                                       int_to_bytes(tx.signature[1])]))
    return hashlib.sha256(canonical_encode(parts)).hexdigest()


def make_block(height, prev_hash, transactions, proposer_id) -> Block:
    return Block(height=height, prev_hash=prev_hash,
                 transactions=tuple(transactions), proposer_id=proposer_id,
                 block_hash=block_hash(height, prev_hash, transactions,
                                       proposer_id))


@dataclass
class ConsensusNode:
    """One miner; ``dishonest`` (test fixture flag) skips the membership
    filter to exercise validator auditing."""

    node_id: str
    chain: list = field(default_factory=list)
    dishonest: bool = False
    drop_log: list = field(default_factory=list)   # (txid, reason)

    def tip_hash(self) -> str:
        return self.chain[-1].block_hash if self.chain else GENESIS_HASH

    def to_doc(self) -> dict:
        return {"node_id": self.node_id, "dishonest": self.dishonest,
                "chain": [b.to_doc() for b in self.chain],
                "drop_log": [[txid, reason] for txid, reason in self.drop_log]}

    @classmethod
    def from_doc(cls, doc) -> "ConsensusNode":
        return cls(node_id=doc["node_id"], dishonest=doc["dishonest"],
                   chain=[Block.from_doc(d) for d in doc["chain"]],
                   drop_log=[tuple(row) for row in doc["drop_log"]])


def node_check_membership(db_view, tx: Transaction) -> bool:
    """Membership test for one transaction: a database lookup on the sender
    key, nothing else."""
    return bool(db_view(tx.sender_key))


def node_process(node: ConsensusNode, pool: TransactionPool, db_view, clock):
    """Drain the pool into a new block on the node's chain.

    An honest node includes member transactions and drop-logs the rest with
    a reason; a dishonest node includes everything.  Returns the new block,
    or None when nothing was includable.
    """
    fetched = list(pool.pending.values())
    if not fetched:
        raise ProtocolError("transaction pool is empty")
    pool.pending.clear()
    included = []
    for tx in fetched:
        if node.dishonest or node_check_membership(db_view, tx):
            included.append(tx)
        else:
            node.drop_log.append((tx.txid, NOT_A_MEMBER))
    clock.tick()
    if not included:
        return None
    block = make_block(len(node.chain), node.tip_hash(), included, node.node_id)
    node.chain.append(block)
    return block


@dataclass(frozen=True)
class ValidatorReport:
    """Audit result for one block; empty violations means fully compliant."""

    block_hash: str
    violations: tuple   # (txid, sender_key)

    def to_doc(self) -> dict:
        return {"block_hash": self.block_hash,
                "violations": [[txid, hex(pk)] for txid, pk in self.violations]}


def validator_audit(db_view, block: Block) -> ValidatorReport:
    """Re-check every transaction of a block against the permissions
    database; used by the identity providers acting as validator nodes."""
    violations = tuple((tx.txid, tx.sender_key) for tx in block.transactions
                       if not node_check_membership(db_view, tx))
    return ValidatorReport(block_hash=block.block_hash, violations=violations)


def chain_scan_membership(chain, db_view) -> bool:
    """True iff every transaction in every block has a registered sender."""
    return all(node_check_membership(db_view, tx)
               for block in chain for tx in block.transactions)


def chain_export_text(chain) -> str:
    lines = []
    for block in chain:
        lines.append(f"block {block.height} hash={block.block_hash} "
                     f"prev={block.prev_hash} proposer={block.proposer_id}")
        for tx in block.transactions:
            lines.append(f"  tx {tx.txid} sender={tx.sender_key:#x} "
                         f"time={tx.timestamp}")
    return "\n".join(lines)


def drop_log_export_text(node: ConsensusNode) -> str:
    return "\n".join(f"{txid} {reason}" for txid, reason in node.drop_log)
