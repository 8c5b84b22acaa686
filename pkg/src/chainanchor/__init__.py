"""Anonymous-but-verifiable membership and access control for a simulated
permissioned ledger."""

from . import channels, epid, groupmath, ledger, roles, schnorr
from .errors import (
    ChainAnchorError,
    CredentialError,
    InvariantViolation,
    ProtocolError,
    RevokedKeyError,
)
from .groupmath import DESK, FULL, PROFILES, ParameterProfile
from .rng import DeterministicRng
from .world import World

__version__ = "0.1.0"
