"""m-of-n multisig policy: settlement digests, shares, bundle verification.

Signatures are Ed25519 (32-byte keys, 64-byte signatures, deterministic),
applied directly to 32-byte digests. A bundle is accepted when at least m
distinct agent indexes contribute a share that verifies against that
index's registered key; garbage shares are reported but never veto an
honest quorum.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .auction import SettlementTx, encode_settlement

SIG_SCHEME = "ed25519"
KEY_LEN = 32
SIG_LEN = 64
DIGEST_LEN = 32

REJECT_EMPTY = "empty"
REJECT_UNKNOWN_INDEX_ONLY = "unknown_index_only"
REJECT_BELOW_THRESHOLD = "below_threshold"


@dataclass(frozen=True)
class SignatureShare:
    agent_index: int
    sig: bytes

    def __post_init__(self) -> None:
        if self.agent_index < 0:
            raise ValueError("agent_index must be non-negative")
        if len(self.sig) != SIG_LEN:
            raise ValueError(f"signature must be {SIG_LEN} bytes")


@dataclass(frozen=True)
class MultisigPolicy:
    agent_keys: tuple[bytes, ...]  # verifying keys, one per agent index
    m: int

    def __post_init__(self) -> None:
        n = len(self.agent_keys)
        if not 1 <= self.m <= n:
            raise ValueError(f"threshold m={self.m} outside 1..{n}")
        if len(set(self.agent_keys)) != n:
            raise ValueError("agent keys must be pairwise distinct")
        for key in self.agent_keys:
            if len(key) != KEY_LEN:
                raise ValueError(f"verifying key must be {KEY_LEN} bytes")

    @property
    def n(self) -> int:
        return len(self.agent_keys)


@dataclass(frozen=True)
class BundleVerdict:
    accepted: bool
    reason: str | None
    valid_indices: tuple[int, ...]
    ignored: tuple[tuple[int, str], ...]  # (agent_index, problem)


def verifying_key_for(signing_key: bytes) -> bytes:
    return (
        Ed25519PrivateKey.from_private_bytes(signing_key)
        .public_key()
        .public_bytes_raw()
    )


def settlement_digest(tx: SettlementTx) -> bytes:
    """SHA-256 of the canonical settlement encoding."""
    return hashlib.sha256(encode_settlement(tx)).digest()


def sign(signing_key: bytes, digest: bytes) -> bytes:
    """Deterministic 64-byte signature over a 32-byte digest."""
    if len(digest) != DIGEST_LEN:
        raise ValueError(f"digest must be {DIGEST_LEN} bytes")
    return Ed25519PrivateKey.from_private_bytes(signing_key).sign(digest)


def verify_signature(verifying_key: bytes, digest: bytes, sig: bytes) -> bool:
    if len(digest) != DIGEST_LEN or len(sig) != SIG_LEN:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(verifying_key).verify(sig, digest)
        return True
    except InvalidSignature:
        return False


def verify_bundle(
    policy: MultisigPolicy, digest: bytes, sigs: list[SignatureShare]
) -> BundleVerdict:
    """Accept iff >= m distinct indexes carry a share valid under their key.

    Duplicate indexes count once; invalid or unknown-index shares are
    ignored and listed in the verdict so callers can log them.
    """
    valid: set[int] = set()
    ignored: list[tuple[int, str]] = []
    known_index_seen = False
    for share in sigs:
        if share.agent_index >= policy.n:
            ignored.append((share.agent_index, "unknown_index"))
            continue
        known_index_seen = True
        if share.agent_index in valid:
            ignored.append((share.agent_index, "duplicate"))
            continue
        if verify_signature(policy.agent_keys[share.agent_index], digest, share.sig):
            valid.add(share.agent_index)
        else:
            ignored.append((share.agent_index, "bad_signature"))
    if len(valid) >= policy.m:
        return BundleVerdict(True, None, tuple(sorted(valid)), tuple(ignored))
    if not sigs:
        reason = REJECT_EMPTY
    elif not known_index_seen:
        reason = REJECT_UNKNOWN_INDEX_ONLY
    else:
        reason = REJECT_BELOW_THRESHOLD
    return BundleVerdict(False, reason, tuple(sorted(valid)), tuple(ignored))
