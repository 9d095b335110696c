"""Ledger mechanics: funding, sealing, window queries, settlement execution."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmsim import auction, wallet
from swarmsim.harness import agent_signing_key
from swarmsim.ledger import (
    AMOUNT_LIMIT,
    BLOCK_SEALED,
    FUNDING_RECEIVED,
    SETTLEMENT_EXECUTED,
    AlreadySettled,
    ArithmeticOverflow,
    BadSignatureBundle,
    Contribution,
    FundingWindow,
    HeightInPast,
    InsufficientBalance,
    Ledger,
    WindowNotClosed,
    ZeroAmount,
    encode_amount,
)
from swarmsim.wallet import MultisigPolicy, SignatureShare

A = b"\xaa" * 20
B = b"\xbb" * 20
C = b"\xcc" * 20


def make_policy(n=3, m=2, seed=1):
    keys = [agent_signing_key(seed, i) for i in range(n)]
    policy = MultisigPolicy(
        agent_keys=tuple(wallet.verifying_key_for(k) for k in keys), m=m
    )
    return keys, policy


def sign_tx(tx, keys, indices):
    digest = wallet.settlement_digest(tx)
    return [SignatureShare(agent_index=i, sig=wallet.sign(keys[i], digest)) for i in indices]


def test_submit_returns_tx_id_and_balance_grows_after_seal():
    led = Ledger()
    led.seal_block()  # height 0
    tx_id = led.submit_funding(A, 5, 1)
    assert isinstance(tx_id, bytes) and len(tx_id) == 32
    assert led.balance == 0  # pending until sealed
    led.seal_block()
    assert led.balance == 5


def test_identical_submissions_get_distinct_tx_ids():
    led = Ledger()
    led.seal_block()
    t1 = led.submit_funding(A, 5, 1)
    t2 = led.submit_funding(A, 5, 1)
    assert t1 != t2


def test_zero_amount_rejected():
    led = Ledger()
    with pytest.raises(ZeroAmount):
        led.submit_funding(A, 0, 0)


def test_amount_must_fit_sixteen_bytes():
    led = Ledger()
    with pytest.raises(ArithmeticOverflow):
        led.submit_funding(A, AMOUNT_LIMIT, 0)
    led.submit_funding(A, AMOUNT_LIMIT - 1, 0)


def test_height_in_past_rejected():
    led = Ledger()
    led.seal_block()
    led.seal_block()
    with pytest.raises(HeightInPast):
        led.submit_funding(A, 5, 1)


def test_bad_address_rejected():
    led = Ledger()
    with pytest.raises(ValueError):
        led.submit_funding(b"\xaa" * 19, 5, 0)


def test_seal_empty_block():
    led = Ledger()
    blk = led.seal_block()
    assert blk.height == 0 and blk.txs == ()


def test_seal_preserves_submission_order():
    led = Ledger()
    for who, amt in ((A, 1), (B, 2), (C, 3)):
        led.submit_funding(who, amt, 0)
    blk = led.seal_block()
    assert [(t.sender, t.amount) for t in blk.txs] == [(A, 1), (B, 2), (C, 3)]


def test_heights_are_consecutive():
    led = Ledger()
    for expected in range(6):
        assert led.seal_block().height == expected
    assert led.next_height == 6


def test_window_query_boundary_inclusive():
    led = Ledger()
    for h in range(4):
        led.submit_funding(A, h + 1, h)
        led.seal_block()
    got = led.contributions_in_window(FundingWindow(1, 2))
    assert [(c.amount, c.block_height) for c in got] == [(2, 1), (3, 2)]


def test_window_query_empty():
    led = Ledger()
    for _ in range(3):
        led.seal_block()
    assert led.contributions_in_window(FundingWindow(1, 2)) == []


def test_window_query_before_end_sealed():
    led = Ledger()
    led.seal_block()
    with pytest.raises(WindowNotClosed):
        led.contributions_in_window(FundingWindow(0, 3))


def test_event_stream_is_totally_ordered():
    led = Ledger()
    led.submit_funding(A, 1, 0)
    led.submit_funding(B, 2, 0)
    led.seal_block()
    led.seal_block()
    keys = [ev.order_key() for ev in led.events]
    assert keys == sorted(keys)
    assert [ev.kind for ev in led.events] == [
        FUNDING_RECEIVED,
        FUNDING_RECEIVED,
        BLOCK_SEALED,
        BLOCK_SEALED,
    ]


def settle_simple(m_sign=2):
    """Fund A with 7 and B with 3, clear 1 item, settle with m_sign shares."""
    keys, policy = make_policy()
    led = Ledger()
    led.register_wallet(policy)
    led.submit_funding(A, 7, 0)
    led.submit_funding(B, 3, 0)
    led.seal_block()
    window = FundingWindow(0, 0)
    cfg = auction.AuctionConfig(n_items=1, window=window, auction_id=b"\x01" * 32)
    bids, late = auction.aggregate(led.contributions_in_window(window), window)
    result = auction.compute_clearing(cfg, auction.canonical_sort(bids), late)
    tx = auction.build_settlement(cfg, result)
    sigs = sign_tx(tx, keys, range(m_sign))
    return led, tx, sigs


def test_execute_settlement_happy_path():
    led, tx, sigs = settle_simple()
    receipt = led.execute_settlement(tx, sigs)
    assert receipt.mint_count == 1
    assert receipt.full_refund_total == 3
    assert receipt.retained_balance == 7
    assert led.settlement_count() == 1
    assert sum(1 for ev in led.events if ev.kind == SETTLEMENT_EXECUTED) == 1


def test_settlement_replay_rejected():
    led, tx, sigs = settle_simple()
    led.execute_settlement(tx, sigs)
    with pytest.raises(AlreadySettled):
        led.execute_settlement(tx, sigs)
    assert led.settlement_count() == 1


def test_below_threshold_bundle_rejected():
    led, tx, sigs = settle_simple(m_sign=1)
    with pytest.raises(BadSignatureBundle):
        led.execute_settlement(tx, sigs)
    assert led.settlement_count() == 0


def test_overspending_settlement_rejected():
    keys, policy = make_policy()
    led = Ledger()
    led.register_wallet(policy)
    led.submit_funding(A, 5, 0)
    led.seal_block()
    tx = auction.SettlementTx(
        auction_id=b"\x01" * 32,
        mints=((A, 1),),
        partial_refunds=(),
        full_refunds=((B, 6),),
    )
    with pytest.raises(InsufficientBalance):
        led.execute_settlement(tx, sign_tx(tx, keys, range(2)))


def test_encode_amount_is_sixteen_byte_big_endian():
    assert encode_amount(1) == b"\x00" * 15 + b"\x01"
    assert encode_amount(AMOUNT_LIMIT - 1) == b"\xff" * 16


def test_contribution_key_orders_by_chain_position():
    c1 = Contribution(sender=A, amount=1, block_height=1, tx_id=b"\x00" * 32)
    c2 = Contribution(sender=A, amount=1, block_height=1, tx_id=b"\x01" * 32)
    c3 = Contribution(sender=A, amount=1, block_height=2, tx_id=b"\x00" * 32)
    assert c1.key() < c2.key() < c3.key()


@settings(max_examples=50, deadline=None)
@given(
    amounts=st.lists(st.integers(min_value=1, max_value=10**9), min_size=1, max_size=8)
)
def test_conservation_exact_after_settlement(amounts):
    keys, policy = make_policy()
    led = Ledger()
    led.register_wallet(policy)
    senders = [bytes([i + 1]) * 20 for i in range(len(amounts))]
    for who, amt in zip(senders, amounts):
        led.submit_funding(who, amt, 0)
    led.seal_block()
    window = FundingWindow(0, 0)
    cfg = auction.AuctionConfig(n_items=2, window=window, auction_id=b"\x02" * 32)
    bids, late = auction.aggregate(led.contributions_in_window(window), window)
    tx = auction.build_settlement(
        cfg, auction.compute_clearing(cfg, auction.canonical_sort(bids), late)
    )
    receipt = led.execute_settlement(tx, sign_tx(tx, keys, range(2)))
    refunds = receipt.partial_refund_total + receipt.full_refund_total
    assert sum(amounts) == receipt.retained_balance + refunds
