"""Deterministic discrete-event network and fault injection.

A single heap of (time, seq) events drives everything: ledger ticks (one
block height per tick, pre-scheduled so they sort ahead of same-time
deliveries), peer message deliveries, and timer fires. Ledger events are
pushed to every agent synchronously and in total order, so two honest
agents always hold identical views.

Faults are wrappers around the unmodified honest state machine: they crash
it, mute it, feed it a perturbed ledger view, or tamper with its outgoing
proposals and published attestation. Honest agents' code is never touched,
which keeps the safety claims about the honest machine auditable.
"""

from __future__ import annotations

import dataclasses
import hashlib
import heapq
import itertools
import random
import struct
from dataclasses import dataclass

from . import consensus, wallet
from .agent import (
    Agent,
    AgentAction,
    AttestationTriple,
    Log,
    SendPeer,
    SetTimer,
    SubmitSettlement,
)
from .consensus import Envelope, Propose
from .ledger import (
    BLOCK_SEALED,
    FUNDING_RECEIVED,
    SETTLEMENT_EXECUTED,
    AlreadySettled,
    BadSignatureBundle,
    Ledger,
    LedgerEvent,
)
from .transcript import Transcript

FAULT_CRASH = "crash"
FAULT_SILENT = "silent"
FAULT_WRONG_ROOT = "wrong_root"
FAULT_EQUIVOCATE = "equivocate"
FAULT_BAD_ATTESTATION = "bad_attestation"

FAULT_KINDS = (
    FAULT_CRASH,
    FAULT_SILENT,
    FAULT_WRONG_ROOT,
    FAULT_EQUIVOCATE,
    FAULT_BAD_ATTESTATION,
)


@dataclass(frozen=True)
class Partition:
    from_time: int
    to_time: int
    side_a: frozenset[int]
    side_b: frozenset[int]

    def separates(self, a: int, b: int, now: int) -> bool:
        if not (self.from_time <= now < self.to_time):
            return False
        return (a in self.side_a and b in self.side_b) or (
            a in self.side_b and b in self.side_a
        )


@dataclass(frozen=True)
class NetConfig:
    delay_min: int = 1
    delay_max: int = 2
    drop_rate: float = 0.0
    partitions: tuple[Partition, ...] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        if self.delay_min < 0 or self.delay_max < self.delay_min:
            raise ValueError("need 0 <= delay_min <= delay_max")
        if not (0.0 <= self.drop_rate <= 1.0):
            raise ValueError("drop_rate must be in [0, 1]")


@dataclass(frozen=True)
class FaultSpec:
    agent_index: int
    kind: str
    at_time: int | None = None
    perturb_seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in FAULT_KINDS:
            raise ValueError(f"unknown fault kind {self.kind!r}")
        if self.kind == FAULT_CRASH and self.at_time is None:
            raise ValueError("crash fault needs at_time")


# -- byzantine wrappers --------------------------------------------------------


class _Wrapper:
    """Delegates everything not explicitly overridden to the wrapped agent."""

    def __init__(self, inner: Agent):
        self.inner = inner

    def __getattr__(self, name):
        return getattr(self.inner, name)


class CrashFault(_Wrapper):
    """Stops processing entirely at `at_time`; no recovery."""

    def __init__(self, inner: Agent, at_time: int):
        super().__init__(inner)
        self.at_time = at_time

    def _up(self, now: int) -> bool:
        return now < self.at_time

    def observe_attestations(self, triples):
        return self.inner.observe_attestations(triples) if self._up(0) else []

    def on_ledger_event(self, ev, now):
        return self.inner.on_ledger_event(ev, now) if self._up(now) else []

    def on_peer_message(self, env, now):
        return self.inner.on_peer_message(env, now) if self._up(now) else []

    def on_timer(self, now):
        return self.inner.on_timer(now) if self._up(now) else []


class SilentFault(_Wrapper):
    """Processes normally but all outgoing peer messages vanish."""

    @staticmethod
    def _mute(actions):
        return [a for a in actions if not isinstance(a, SendPeer)]

    def observe_attestations(self, triples):
        return self._mute(self.inner.observe_attestations(triples))

    def on_ledger_event(self, ev, now):
        return self._mute(self.inner.on_ledger_event(ev, now))

    def on_peer_message(self, env, now):
        return self._mute(self.inner.on_peer_message(env, now))

    def on_timer(self, now):
        return self._mute(self.inner.on_timer(now))


class WrongRootFault(_Wrapper):
    """Feeds the honest machine a ledger view with one in-window amount +1.

    Events are buffered until the funding window seals, the victim
    contribution (perturb_seed mod count) is bumped, and the whole stream
    is replayed into the unmodified agent. Two agents sharing a
    perturb_seed derive identical wrong roots and will validate each other.
    """

    def __init__(self, inner: Agent, perturb_seed: int):
        super().__init__(inner)
        self.perturb_seed = perturb_seed
        self._buffer: list[LedgerEvent] = []
        self._released = False

    def on_ledger_event(self, ev, now):
        if self._released:
            return self.inner.on_ledger_event(ev, now)
        window = self.inner.auction_cfg.window
        if ev.kind == BLOCK_SEALED and ev.height == window.end_height:
            events = self._buffer + [ev]
            in_window = [
                i
                for i, e in enumerate(events)
                if e.kind == FUNDING_RECEIVED and window.contains(e.height)
            ]
            if in_window:
                victim = in_window[self.perturb_seed % len(in_window)]
                tx = events[victim].payload
                events[victim] = dataclasses.replace(
                    events[victim],
                    payload=dataclasses.replace(tx, amount=tx.amount + 1),
                )
            self._released = True
            self._buffer = []
            actions = []
            for e in events:
                actions.extend(self.inner.on_ledger_event(e, now))
            return actions
        self._buffer.append(ev)
        return []


class EquivocateFault(_Wrapper):
    """Sends a different root to every peer in the same proposal round."""

    def _twist(self, actions):
        out = []
        for act in actions:
            if isinstance(act, SendPeer) and isinstance(act.envelope.msg, Propose):
                p = act.envelope.msg
                root = hashlib.sha256(
                    b"swarmsim/equivocate/v1" + p.root + struct.pack(">I", act.to)
                ).digest()
                msg = dataclasses.replace(p, root=root)
                # A subverted agent can feed anything to its own key, so the
                # transport signature stays valid; it still cannot forge peers'.
                sig = self.inner.enclave.sign(consensus.transport_digest(msg))
                env = Envelope(
                    sender=act.envelope.sender, msg=msg, transport_sig=sig
                )
                out.append(SendPeer(to=act.to, envelope=env))
            else:
                out.append(act)
        return out

    def observe_attestations(self, triples):
        return self._twist(self.inner.observe_attestations(triples))

    def on_ledger_event(self, ev, now):
        return self._twist(self.inner.on_ledger_event(ev, now))

    def on_peer_message(self, env, now):
        return self._twist(self.inner.on_peer_message(env, now))

    def on_timer(self, now):
        return self._twist(self.inner.on_timer(now))


class BadAttestationFault(_Wrapper):
    """Publishes a tampered measurement with a self-consistent quote."""

    def attest(self) -> AttestationTriple:
        honest = self.inner.attest()
        measurement = hashlib.sha256(
            b"swarmsim/tampered/v1" + honest.measurement
        ).digest()
        return AttestationTriple(
            measurement=measurement,
            verifying_key=honest.verifying_key,
            attestation=hashlib.sha256(
                measurement + honest.verifying_key
            ).digest(),
        )


def apply_fault(agent: Agent, fault: FaultSpec):
    if fault.kind == FAULT_CRASH:
        return CrashFault(agent, fault.at_time)
    if fault.kind == FAULT_SILENT:
        return SilentFault(agent)
    if fault.kind == FAULT_WRONG_ROOT:
        return WrongRootFault(agent, fault.perturb_seed)
    if fault.kind == FAULT_EQUIVOCATE:
        return EquivocateFault(agent)
    if fault.kind == FAULT_BAD_ATTESTATION:
        return BadAttestationFault(agent)
    raise ValueError(f"unknown fault kind {fault.kind!r}")


# -- transcript line shapes -----------------------------------------------------


def _ledger_line(ev: LedgerEvent) -> dict:
    base = {"h": ev.height, "i": ev.index}
    if ev.kind == FUNDING_RECEIVED:
        tx = ev.payload
        return {
            **base,
            "kind": "funding_received",
            "sender": tx.sender.hex(),
            "amount": str(tx.amount),
            "tx_id": tx.tx_id.hex(),
        }
    if ev.kind == BLOCK_SEALED:
        return {**base, "kind": "block_sealed", "tx_count": len(ev.payload.txs)}
    if ev.kind == SETTLEMENT_EXECUTED:
        r = ev.payload
        return {
            **base,
            "kind": "settlement_executed",
            "auction_id": r.auction_id.hex(),
            "digest": r.digest.hex(),
            "mints": [[addr.hex(), count] for addr, count in r.tx.mints],
            "partial_refunds": [
                [addr.hex(), str(amt)] for addr, amt in r.tx.partial_refunds
            ],
            "full_refunds": [
                [addr.hex(), str(amt)] for addr, amt in r.tx.full_refunds
            ],
            "mint_count": r.mint_count,
            "partial_refund_total": str(r.partial_refund_total),
            "full_refund_total": str(r.full_refund_total),
            "retained": str(r.retained_balance),
        }
    raise ValueError(f"unknown ledger event kind {ev.kind!r}")


# -- the driver -------------------------------------------------------------------


class Simulation:
    """Owns the ledger, the agents, the clock, and the transcript."""

    def __init__(
        self,
        *,
        ledger: Ledger,
        agents: list,
        submissions: dict[int, list[tuple[bytes, int]]],
        last_height: int,
        net: NetConfig,
        max_time: int,
        transcript: Transcript,
    ):
        self.ledger = ledger
        self.agents = agents
        self.submissions = submissions
        self.net = net
        self.max_time = max_time
        self.transcript = transcript
        self.max_time_exceeded = False

        self._rng = random.Random(
            int.from_bytes(
                hashlib.sha256(
                    b"swarmsim/net/v1" + struct.pack(">Q", net.seed)
                ).digest(),
                "big",
            )
        )
        self._heap: list = []
        self._count = itertools.count()
        self._ev_cursor = 0
        # Ticks pre-scheduled at init take the lowest sequence numbers, so a
        # block at height t always seals before same-time message deliveries.
        for t in range(last_height + 1):
            self._push(t, ("tick", t))

    def _push(self, at: int, item) -> None:
        heapq.heappush(self._heap, (at, next(self._count), item))

    def run(self) -> None:
        triples = [a.attest() for a in self.agents]
        for i, a in enumerate(self.agents):
            self._exec(i, a.observe_attestations(triples), 0)
        self._pump_ledger(0)
        while self._heap:
            t, _, item = heapq.heappop(self._heap)
            if t > self.max_time:
                self.max_time_exceeded = True
                self.transcript.add({"t": t, "event": "max_time_exceeded"})
                break
            kind = item[0]
            if kind == "tick":
                self._tick(item[1])
            elif kind == "deliver":
                _, frm, to, env = item
                self.transcript.add(
                    {
                        "t": t,
                        "event": "peer_deliver",
                        "from": frm,
                        "to": to,
                        "type": consensus.body_dict(env.msg)["type"],
                    }
                )
                self._exec(to, self.agents[to].on_peer_message(env, t), t)
            elif kind == "timer":
                i = item[1]
                self.transcript.add({"t": t, "event": "timer_fire", "agent": i})
                self._exec(i, self.agents[i].on_timer(t), t)
            self._pump_ledger(t)

    # -- dispatch helpers ----------------------------------------------------

    def _tick(self, height: int) -> None:
        for sender, amount in self.submissions.get(height, ()):
            self.ledger.submit_funding(sender, amount, height)
        self.ledger.seal_block()

    def _pump_ledger(self, now: int) -> None:
        """Deliver undelivered ledger events to every agent, in total order.

        Cursor-based so a settlement executed mid-pump is picked up by the
        same loop after the current event finishes its full fan-out.
        """
        while self._ev_cursor < len(self.ledger.events):
            ev = self.ledger.events[self._ev_cursor]
            self._ev_cursor += 1
            self.transcript.add(_ledger_line(ev))
            for i in range(len(self.agents)):
                self._exec(i, self.agents[i].on_ledger_event(ev, now), now)

    def _exec(self, agent_index: int, actions: list[AgentAction], now: int) -> None:
        for act in actions:
            if isinstance(act, Log):
                self.transcript.add(
                    {
                        "agent": agent_index,
                        "phase": act.phase,
                        "event": act.event,
                        "detail": act.detail,
                    }
                )
            elif isinstance(act, SetTimer):
                at = now + act.duration
                self.transcript.add(
                    {"t": now, "event": "timer_set", "agent": agent_index, "at": at}
                )
                self._push(at, ("timer", agent_index))
            elif isinstance(act, SendPeer):
                self._send(agent_index, act.to, act.envelope, now)
            elif isinstance(act, SubmitSettlement):
                self._submit(agent_index, act, now)
            else:
                raise TypeError(f"unknown action {type(act).__name__}")

    def _send(self, frm: int, to: int, env: Envelope, now: int) -> None:
        body = consensus.body_dict(env.msg)
        self.transcript.add(
            {
                "t": now,
                "event": "peer_send",
                "from": frm,
                "to": to,
                "msg": body,
                "sig": env.transport_sig.hex(),
            }
        )
        if any(p.separates(frm, to, now) for p in self.net.partitions):
            self.transcript.add(
                {
                    "t": now,
                    "event": "peer_drop",
                    "from": frm,
                    "to": to,
                    "type": body["type"],
                    "cause": "partition",
                }
            )
            return
        if self._rng.random() < self.net.drop_rate:
            self.transcript.add(
                {
                    "t": now,
                    "event": "peer_drop",
                    "from": frm,
                    "to": to,
                    "type": body["type"],
                    "cause": "random",
                }
            )
            return
        delay = self._rng.randint(self.net.delay_min, self.net.delay_max)
        self._push(now + delay, ("deliver", frm, to, env))

    def _submit(self, agent_index: int, act: SubmitSettlement, now: int) -> None:
        self.transcript.add(
            {
                "t": now,
                "event": "submit",
                "agent": agent_index,
                "digest": wallet.settlement_digest(act.tx).hex(),
                "shares": [s.agent_index for s in act.shares],
            }
        )
        try:
            self.ledger.execute_settlement(act.tx, list(act.shares))
        except (AlreadySettled, BadSignatureBundle) as exc:
            self.transcript.add(
                {
                    "t": now,
                    "event": "submit_rejected",
                    "agent": agent_index,
                    "error": type(exc).__name__,
                }
            )
