"""Uniform clearing-price computation and canonical settlement construction.

Every contribution inside the funding window counts toward its sender's
single aggregated bid. Bids are ranked by a strict total order
(total desc, first funding height asc, first tx id asc, address asc) so
two parties looking at the same chain always produce the same winner set,
the same clearing price (the lowest winning total), and byte-identical
settlement transactions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .ledger import (
    AMOUNT_LIMIT,
    ArithmeticOverflow,
    Contribution,
    FundingWindow,
    check_amount,
    encode_amount,
)


class DuplicateBidder(Exception):
    pass


@dataclass(frozen=True)
class AuctionConfig:
    n_items: int
    window: FundingWindow
    auction_id: bytes

    def __post_init__(self) -> None:
        if self.n_items < 1:
            raise ValueError("n_items must be >= 1")
        if len(self.auction_id) != 32:
            raise ValueError("auction_id must be 32 bytes")


@dataclass(frozen=True)
class AggregatedBid:
    bidder: bytes
    total: int
    first_height: int
    first_tx: bytes

    def sort_key(self) -> tuple:
        # Strict total order; bidder uniqueness makes ties impossible.
        return (-self.total, self.first_height, self.first_tx, self.bidder)


@dataclass(frozen=True)
class ClearingResult:
    clearing_price: int
    winners: tuple[AggregatedBid, ...]
    losers: tuple[AggregatedBid, ...]
    late_contributions: tuple[Contribution, ...]


@dataclass(frozen=True)
class SettlementTx:
    auction_id: bytes
    mints: tuple[tuple[bytes, int], ...]  # (address, item_count), count always 1
    partial_refunds: tuple[tuple[bytes, int], ...]
    full_refunds: tuple[tuple[bytes, int], ...]
    nonce: int = 0


def aggregate(
    contribs: list[Contribution], window: FundingWindow
) -> tuple[list[AggregatedBid], list[Contribution]]:
    """Group in-window contributions per sender; everything else is late.

    The returned bids keep the earliest in-window contribution's (height,
    tx id) for tie-breaking; `contribs` must already be in ledger order,
    which resolves ties within a block by intra-block position.
    """
    totals: dict[bytes, int] = {}
    first: dict[bytes, Contribution] = {}
    late: list[Contribution] = []
    for tx in contribs:
        if not window.contains(tx.block_height):
            late.append(tx)
            continue
        new_total = totals.get(tx.sender, 0) + tx.amount
        if new_total >= AMOUNT_LIMIT:
            raise ArithmeticOverflow(
                f"aggregate for {tx.sender.hex()} overflows 16 bytes"
            )
        totals[tx.sender] = new_total
        if tx.sender not in first:
            first[tx.sender] = tx
    bids = [
        AggregatedBid(
            bidder=sender,
            total=total,
            first_height=first[sender].block_height,
            first_tx=first[sender].tx_id,
        )
        for sender, total in totals.items()
    ]
    return bids, late


def canonical_sort(bids: list[AggregatedBid]) -> list[AggregatedBid]:
    seen = set()
    for b in bids:
        if b.bidder in seen:
            raise DuplicateBidder(f"bidder {b.bidder.hex()} appears twice")
        seen.add(b.bidder)
    return sorted(bids, key=AggregatedBid.sort_key)


def compute_clearing(
    cfg: AuctionConfig,
    bids: list[AggregatedBid],
    late: list[Contribution],
) -> ClearingResult:
    """Rank bids and cut at n_items; the last winner's total is the price.

    Undersubscribed sales clear at the lowest winning total; an empty sale
    clears at 0.
    """
    ordered = canonical_sort(bids)
    winners = tuple(ordered[: cfg.n_items])
    losers = tuple(ordered[cfg.n_items :])
    price = winners[-1].total if winners else 0
    return ClearingResult(
        clearing_price=price,
        winners=winners,
        losers=losers,
        late_contributions=tuple(late),
    )


def build_settlement(cfg: AuctionConfig, result: ClearingResult) -> SettlementTx:
    """Assemble the single on-chain batch: mints, overpayment refunds, full refunds.

    Zero-amount partial refunds are omitted. Full refunds list each loser's
    total (canonical order) followed by one entry per out-of-window
    contribution in ledger order, so the whole funding inflow is accounted
    for: inflow = price * |winners| + all refunds.
    """
    mints = tuple((w.bidder, 1) for w in result.winners)
    partial = tuple(
        (w.bidder, w.total - result.clearing_price)
        for w in result.winners
        if w.total - result.clearing_price > 0
    )
    full = tuple((l.bidder, l.total) for l in result.losers) + tuple(
        (c.sender, c.amount) for c in result.late_contributions
    )
    return SettlementTx(
        auction_id=cfg.auction_id,
        mints=mints,
        partial_refunds=partial,
        full_refunds=full,
        nonce=0,
    )


def encode_settlement(tx: SettlementTx) -> bytes:
    """Canonical byte encoding, the sole input to the settlement digest.

    Layout: auction_id (32) || for each section in (mints=0x01,
    partial=0x02, full=0x03): tag (1) || entry count as u32 BE || entries
    of address (20) || amount as 16-byte BE; then nonce as u64 BE.
    Any field change anywhere changes the bytes.
    """
    out = bytearray()
    if len(tx.auction_id) != 32:
        raise ValueError("auction_id must be 32 bytes")
    out += tx.auction_id
    for tag, entries in (
        (0x01, tx.mints),
        (0x02, tx.partial_refunds),
        (0x03, tx.full_refunds),
    ):
        out.append(tag)
        out += struct.pack(">I", len(entries))
        for addr, amount in entries:
            if len(addr) != 20:
                raise ValueError("entry address must be 20 bytes")
            out += addr
            out += encode_amount(amount)
    out += struct.pack(">Q", tx.nonce)
    return bytes(out)


def settlement_totals(tx: SettlementTx) -> tuple[int, int]:
    """(partial refund total, full refund total), with checked amounts."""
    partial = sum(check_amount(a) for _, a in tx.partial_refunds)
    full = sum(check_amount(a) for _, a in tx.full_refunds)
    return partial, full
