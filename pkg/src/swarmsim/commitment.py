"""Merkle commitment over the canonical sorted bid list.

Leaves are fixed 76-byte bid encodings, hashed with a 0x00 domain prefix;
internal nodes pair up with a 0x01 prefix and an odd trailing node is
promoted unchanged to the next level (never duplicated, so distinct lists
cannot share a root through padding). The empty list commits to a 0x02
sentinel. Proofs carry (sibling, side) steps for spot-auditing one bid
against an exchanged root.
"""

from __future__ import annotations

import hashlib
import struct

from .auction import AggregatedBid

LEAF_LEN = 76
LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"
EMPTY_PREFIX = b"\x02"

SIDE_LEFT = "left"
SIDE_RIGHT = "right"


class BadLeafLength(Exception):
    pass


class IndexOutOfRange(Exception):
    pass


def encode_bid_leaf(bid: AggregatedBid) -> bytes:
    """Address (20) || total as 16-byte BE || first_height as u64 BE || first_tx (32)."""
    if len(bid.bidder) != 20 or len(bid.first_tx) != 32:
        raise ValueError("malformed bid fields")
    return (
        bid.bidder
        + bid.total.to_bytes(16, "big")
        + struct.pack(">Q", bid.first_height)
        + bid.first_tx
    )


def leaf_hash(leaf: bytes) -> bytes:
    if len(leaf) != LEAF_LEN:
        raise BadLeafLength(f"leaf must be {LEAF_LEN} bytes, got {len(leaf)}")
    return hashlib.sha256(LEAF_PREFIX + leaf).digest()


def _node_hash(left: bytes, right: bytes) -> bytes:
    return hashlib.sha256(NODE_PREFIX + left + right).digest()


def _levels(leaves: list[bytes]) -> list[list[bytes]]:
    """All tree levels bottom-up, starting from the leaf hashes."""
    level = [leaf_hash(l) for l in leaves]
    levels = [level]
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(_node_hash(level[i], level[i + 1]))
        if len(level) % 2 == 1:
            nxt.append(level[-1])  # odd tail promoted unchanged
        level = nxt
        levels.append(level)
    return levels


def merkle_root(leaves: list[bytes]) -> bytes:
    if not leaves:
        return hashlib.sha256(EMPTY_PREFIX).digest()
    return _levels(leaves)[-1][0]


def bid_list_root(sorted_bids: list[AggregatedBid]) -> bytes:
    """Root over canonically sorted bids; the object agents exchange."""
    return merkle_root([encode_bid_leaf(b) for b in sorted_bids])


def prove(leaves: list[bytes], index: int) -> list[tuple[bytes, str]]:
    """Sibling path for `leaves[index]`; promoted levels add no step."""
    if index < 0 or index >= len(leaves):
        raise IndexOutOfRange(f"index {index} outside 0..{len(leaves) - 1}")
    path: list[tuple[bytes, str]] = []
    idx = index
    for level in _levels(leaves)[:-1]:
        if idx % 2 == 0:
            if idx + 1 < len(level):
                path.append((level[idx + 1], SIDE_RIGHT))
            # else: promoted, nothing to add
        else:
            path.append((level[idx - 1], SIDE_LEFT))
        idx //= 2
    return path


def verify_inclusion(root: bytes, leaf: bytes, proof: list[tuple[bytes, str]]) -> bool:
    try:
        acc = leaf_hash(leaf)
    except BadLeafLength:
        return False
    for sibling, side in proof:
        if side == SIDE_LEFT:
            acc = _node_hash(sibling, acc)
        elif side == SIDE_RIGHT:
            acc = _node_hash(acc, sibling)
        else:
            return False
    return acc == root
