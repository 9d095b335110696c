"""Sovereign agent: watches the ledger, clears the auction, votes on settlement.

The agent is a pure state machine. Handlers take one input (a ledger event,
a peer envelope, or a timer) and return a list of actions; the simulation
driver owns all I/O, so replaying the same inputs reproduces the same
actions byte for byte. The signing key lives inside an enclave mock and
never appears in any action or log.

Phases walk Monitoring -> Computing -> CrossValidating -> Signing -> Done,
with CrossValidating -> Computing allowed for a conflict re-check and any
phase -> Aborted. Signature shares are produced lazily: a validator signs
when it acks, a proposer signs its own share only once a quorum of acks is
in hand, and no agent ever signs two different settlement digests in one
run.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from . import auction, commitment, consensus, wallet
from .auction import AuctionConfig, ClearingResult, SettlementTx
from .consensus import (
    Ack,
    AbortMsg,
    Envelope,
    Nack,
    Propose,
    RoundConfig,
    NACK_DIGEST_MISMATCH,
    NACK_NOT_READY,
    NACK_ROOT_MISMATCH,
    proposer_for,
)
from .ledger import (
    BLOCK_SEALED,
    FUNDING_RECEIVED,
    SETTLEMENT_EXECUTED,
    Contribution,
    LedgerEvent,
)
from .wallet import MultisigPolicy, SignatureShare

AGENT_CODE_VERSION = "swarmsim-agent/1.0.0"

PHASE_MONITORING = "monitoring"
PHASE_COMPUTING = "computing"
PHASE_CROSS_VALIDATING = "cross_validating"
PHASE_SIGNING = "signing"
PHASE_DONE = "done"
PHASE_ABORTED = "aborted"

# Forward order along the happy path; Aborted is reachable from anywhere.
PHASE_ORDER = (
    PHASE_MONITORING,
    PHASE_COMPUTING,
    PHASE_CROSS_VALIDATING,
    PHASE_SIGNING,
    PHASE_DONE,
)


class OutOfOrderEvent(Exception):
    pass


class SigningGuardViolation(Exception):
    """The agent was asked to sign a second, different settlement digest."""


# -- enclave mock ------------------------------------------------------------


@dataclass(frozen=True)
class AttestationTriple:
    measurement: bytes
    verifying_key: bytes
    attestation: bytes


def expected_measurement_for(code_version: str = AGENT_CODE_VERSION) -> bytes:
    return hashlib.sha256(code_version.encode("utf-8")).digest()


def verify_attestation(triple: AttestationTriple, expected_measurement: bytes) -> bool:
    """Accept iff the quote binds (measurement, key) and the code is the expected one."""
    recomputed = hashlib.sha256(triple.measurement + triple.verifying_key).digest()
    return recomputed == triple.attestation and triple.measurement == expected_measurement


class EnclaveMock:
    """Key confinement plus a code measurement.

    The signing key is reachable only through sign(); it is excluded from
    repr so it cannot leak into logs or transcripts by accident.
    """

    __slots__ = ("_signing_key", "code_version")

    def __init__(self, signing_key: bytes, code_version: str = AGENT_CODE_VERSION):
        if len(signing_key) != wallet.KEY_LEN:
            raise ValueError(f"signing key must be {wallet.KEY_LEN} bytes")
        self._signing_key = signing_key
        self.code_version = code_version

    @property
    def measurement(self) -> bytes:
        return expected_measurement_for(self.code_version)

    @property
    def verifying_key(self) -> bytes:
        return wallet.verifying_key_for(self._signing_key)

    def attest(self) -> AttestationTriple:
        m = self.measurement
        vk = self.verifying_key
        return AttestationTriple(
            measurement=m,
            verifying_key=vk,
            attestation=hashlib.sha256(m + vk).digest(),
        )

    def sign(self, digest: bytes) -> bytes:
        return wallet.sign(self._signing_key, digest)

    def __repr__(self) -> str:
        return f"EnclaveMock(code_version={self.code_version!r})"


# -- actions ------------------------------------------------------------------


@dataclass(frozen=True)
class SendPeer:
    to: int
    envelope: Envelope


@dataclass(frozen=True)
class SubmitSettlement:
    tx: SettlementTx
    shares: tuple[SignatureShare, ...]


@dataclass(frozen=True)
class SetTimer:
    duration: int


@dataclass(frozen=True)
class Log:
    phase: str
    event: str
    detail: dict


AgentAction = SendPeer | SubmitSettlement | SetTimer | Log


# -- the state machine ---------------------------------------------------------


class Agent:
    def __init__(
        self,
        index: int,
        enclave: EnclaveMock,
        policy: MultisigPolicy,
        auction_cfg: AuctionConfig,
        rounds: RoundConfig,
        expected_measurement: bytes,
    ):
        self.index = index
        self.enclave = enclave
        self.policy = policy
        self.auction_cfg = auction_cfg
        self.rounds = rounds
        self.expected_measurement = expected_measurement

        self.phase = PHASE_MONITORING
        self.view: list[Contribution] = []
        self.result: ClearingResult | None = None
        self.root: bytes | None = None
        self.tx: SettlementTx | None = None
        self.digest: bytes | None = None
        self.round = 0
        self.roster: tuple[int, ...] = ()
        self.signed_digest: bytes | None = None
        self.submitted = False

        self._deadlines_seen = 0
        self._signed_share: SignatureShare | None = None
        self._acks: dict[int, SignatureShare] = {}
        self._proposed_rounds: set[int] = set()
        self._last_key: tuple[int, int] | None = None

    # -- setup ------------------------------------------------------------

    def attest(self) -> AttestationTriple:
        return self.enclave.attest()

    def observe_attestations(self, triples: list[AttestationTriple]) -> list[AgentAction]:
        """Derive the quorum roster from the published attestation triples."""
        included = [
            i
            for i, t in enumerate(triples)
            if verify_attestation(t, self.expected_measurement)
        ]
        excluded = [i for i in range(len(triples)) if i not in included]
        self.roster = tuple(included)
        actions: list[AgentAction] = [
            self._log("roster", included=included, excluded=excluded)
        ]
        if self.index not in self.roster:
            # Excluded agents stay quiet; settlement can proceed without them.
            actions += self._abort("attestation_rejected")
        return actions

    # -- handlers ----------------------------------------------------------

    def on_ledger_event(self, ev: LedgerEvent, now: int) -> list[AgentAction]:
        key = ev.order_key()
        if self._last_key is not None and key <= self._last_key:
            raise OutOfOrderEvent(f"event at {key} after {self._last_key}")
        self._last_key = key

        if self.phase == PHASE_ABORTED or self.phase == PHASE_DONE:
            if ev.kind == SETTLEMENT_EXECUTED and self.phase == PHASE_ABORTED:
                return [self._log("settled_after_abort", digest=ev.payload.digest.hex())]
            return []

        if ev.kind == FUNDING_RECEIVED:
            return self._on_funding(ev.payload)
        if ev.kind == BLOCK_SEALED:
            return self._on_seal(ev.height)
        if ev.kind == SETTLEMENT_EXECUTED:
            return self._on_settlement(ev.payload)
        return []

    def on_peer_message(self, env: Envelope, now: int) -> list[AgentAction]:
        if self.phase in (PHASE_DONE, PHASE_ABORTED):
            return []
        sender = env.sender
        if sender == self.index:
            return []
        if sender not in self.roster or sender >= self.policy.n:
            return [self._log("unknown_sender", sender=sender)]
        if not consensus.open_envelope(env, self.policy.agent_keys[sender]):
            return [self._log("bad_transport_sig", sender=sender)]

        msg = env.msg
        if isinstance(msg, Propose):
            return self._handle_propose(sender, msg)
        if isinstance(msg, Ack):
            return self._handle_ack(sender, msg)
        if isinstance(msg, Nack):
            return self._handle_nack(sender, msg)
        if isinstance(msg, AbortMsg):
            # Advisory only: a lone faulty Abort must not veto settlement.
            return [self._log("peer_abort", sender=sender, round=msg.round_index)]
        return []

    def on_timer(self, now: int) -> list[AgentAction]:
        if self.phase in (PHASE_DONE, PHASE_ABORTED, PHASE_MONITORING):
            return []
        self._deadlines_seen += 1
        if self._deadlines_seen >= self.rounds.r_max:
            actions = self._abort("rounds_exhausted")
            msg = AbortMsg(round_index=self.round)
            actions += self._broadcast(msg)
            return actions
        self.round = self._deadlines_seen
        actions: list[AgentAction] = [
            self._log("round", round=self.round),
            SetTimer(self.rounds.round_timeout),
        ]
        if (
            proposer_for(self.round, self.policy.n) == self.index
            and self.index in self.roster
            and not self.submitted
        ):
            actions += self._propose(self.round)
        return actions

    # -- ledger event details ------------------------------------------------

    def _on_funding(self, tx: Contribution) -> list[AgentAction]:
        self.view.append(tx)
        if self.phase in (PHASE_CROSS_VALIDATING, PHASE_SIGNING) and not (
            self.auction_cfg.window.contains(tx.block_height)
        ):
            # Out-of-window funds change the refund set (never the root):
            # refresh the settlement so later proposals and acks cover them.
            old = self.digest
            self._recompute()
            return [
                self._log(
                    "refresh",
                    height=tx.block_height,
                    old_digest=old.hex(),
                    digest=self.digest.hex(),
                )
            ]
        return []

    def _on_seal(self, height: int) -> list[AgentAction]:
        if self.phase != PHASE_MONITORING or height != self.auction_cfg.window.end_height:
            return []
        actions = [self._goto(PHASE_COMPUTING)]
        self._recompute()
        actions.append(
            self._goto(
                PHASE_CROSS_VALIDATING,
                root=self.root.hex(),
                clearing_price=str(self.result.clearing_price),
                settlement_digest=self.digest.hex(),
            )
        )
        actions.append(SetTimer(self.rounds.round_timeout))
        if proposer_for(0, self.policy.n) == self.index and self.index in self.roster:
            actions += self._propose(0)
        return actions

    def _on_settlement(self, receipt) -> list[AgentAction]:
        foreign = self.digest is None or receipt.digest != self.digest
        actions = [self._log("settled", digest=receipt.digest.hex(), foreign=foreign)]
        if foreign:
            own = self.digest.hex() if self.digest else None
            actions.append(
                self._log("foreign_settlement", executed=receipt.digest.hex(), own=own)
            )
        actions.append(self._goto(PHASE_DONE))
        return actions

    # -- consensus handling ----------------------------------------------------

    def _handle_propose(self, sender: int, p: Propose) -> list[AgentAction]:
        if proposer_for(p.round_index, self.policy.n) != sender:
            return [self._log("wrong_proposer", sender=sender, round=p.round_index)]
        if self.phase == PHASE_MONITORING or self.digest is None:
            return self._nack(sender, p.round_index, NACK_NOT_READY)
        if p.root != self.root:
            actions = self._nack(
                sender,
                p.round_index,
                NACK_ROOT_MISMATCH,
                proposed_root=p.root.hex(),
                own_root=self.root.hex(),
            )
            actions += self._recheck()
            return actions
        if p.settlement_digest != self.digest:
            # Matching roots with diverging digests cannot happen between
            # honest agents that share a complete view; shout about it.
            actions = [
                self._log(
                    "digest_mismatch",
                    proposed=p.settlement_digest.hex(),
                    own=self.digest.hex(),
                    sender=sender,
                )
            ]
            actions += self._nack(sender, p.round_index, NACK_DIGEST_MISMATCH)
            return actions

        share = self._sign_current()
        actions = []
        if self.phase == PHASE_CROSS_VALIDATING:
            actions.append(self._goto(PHASE_SIGNING))
        ack = Ack(
            round_index=p.round_index,
            settlement_digest=self.digest,
            share=share,
        )
        actions.append(
            self._log("ack", to=sender, round=p.round_index, digest=self.digest.hex())
        )
        actions.append(SendPeer(to=sender, envelope=self._seal(ack)))
        return actions

    def _handle_ack(self, sender: int, a: Ack) -> list[AgentAction]:
        if not self._proposed_rounds or self.submitted:
            return [self._log("ack_ignored", sender=sender, round=a.round_index)]
        if a.settlement_digest != self.digest:
            return [
                self._log(
                    "stale_ack_ignored",
                    sender=sender,
                    digest=a.settlement_digest.hex(),
                )
            ]
        share = a.share
        if share.agent_index >= self.policy.n or not wallet.verify_signature(
            self.policy.agent_keys[share.agent_index], self.digest, share.sig
        ):
            return [
                self._log("invalid_share_ignored", sender=sender, agent=share.agent_index)
            ]
        self._acks[share.agent_index] = share
        return self._maybe_submit()

    def _handle_nack(self, sender: int, nk: Nack) -> list[AgentAction]:
        # Debugging fallback for conflicts: log our own full-list summary so
        # the mismatch can be audited offline against the peer's.
        detail = {
            "sender": sender,
            "round": nk.round_index,
            "reason": nk.reason,
            "own_root": self.root.hex() if self.root else None,
            "own_bid_count": len(self.sorted_bids()) if self.result else 0,
        }
        return [self._log("nack_received", **detail)]

    # -- internals ---------------------------------------------------------------

    def _recompute(self) -> None:
        bids, outside = auction.aggregate(self.view, self.auction_cfg.window)
        self.result = auction.compute_clearing(self.auction_cfg, bids, outside)
        ordered = list(self.result.winners) + list(self.result.losers)
        self.root = commitment.bid_list_root(ordered)
        self.tx = auction.build_settlement(self.auction_cfg, self.result)
        self.digest = wallet.settlement_digest(self.tx)

    def _recheck(self) -> list[AgentAction]:
        """Conflict path: re-derive everything from the accumulated ledger view."""
        if self.phase != PHASE_CROSS_VALIDATING:
            return []
        actions = [self._goto(PHASE_COMPUTING)]
        before = self.root
        self._recompute()
        actions.append(self._goto(PHASE_CROSS_VALIDATING))
        actions.append(self._log("recheck", changed=self.root != before))
        return actions

    def _sign_current(self) -> SignatureShare:
        if self.signed_digest is not None:
            if self.signed_digest != self.digest:
                raise SigningGuardViolation(
                    f"already signed {self.signed_digest.hex()}, "
                    f"refusing {self.digest.hex()}"
                )
            return self._signed_share
        sig = self.enclave.sign(self.digest)
        self.signed_digest = self.digest
        self._signed_share = SignatureShare(agent_index=self.index, sig=sig)
        return self._signed_share

    def _propose(self, round_index: int) -> list[AgentAction]:
        self._proposed_rounds.add(round_index)
        msg = Propose(
            round_index=round_index,
            root=self.root,
            clearing_price=self.result.clearing_price,
            settlement_digest=self.digest,
        )
        actions: list[AgentAction] = [
            self._log(
                "propose",
                round=round_index,
                root=self.root.hex(),
                settlement_digest=self.digest.hex(),
            )
        ]
        actions += self._broadcast(msg)
        # m=1 needs no acks at all; the proposer's own share is the quorum.
        actions += self._maybe_submit()
        return actions

    def _maybe_submit(self) -> list[AgentAction]:
        if self.submitted or self.digest is None or not self._proposed_rounds:
            return []
        indices = set(self._acks) | {self.index}
        if len(indices) < self.policy.m:
            return []
        own = self._sign_current()
        actions = []
        if self.phase == PHASE_CROSS_VALIDATING:
            actions.append(self._goto(PHASE_SIGNING))
        bundle = dict(self._acks)
        bundle[self.index] = own
        shares = tuple(bundle[i] for i in sorted(bundle))
        self.submitted = True
        actions.append(
            self._log(
                "quorum",
                indices=sorted(bundle),
                digest=self.digest.hex(),
            )
        )
        actions.append(SubmitSettlement(tx=self.tx, shares=shares))
        return actions

    def _nack(self, to: int, round_index: int, reason: str, **detail) -> list[AgentAction]:
        msg = Nack(round_index=round_index, reason=reason)
        log = self._log("nack", to=to, round=round_index, reason=reason, **detail)
        return [log, SendPeer(to=to, envelope=self._seal(msg))]

    def _broadcast(self, msg) -> list[AgentAction]:
        env = self._seal(msg)
        return [SendPeer(to=i, envelope=env) for i in self.roster if i != self.index]

    def _seal(self, msg) -> Envelope:
        sig = self.enclave.sign(consensus.transport_digest(msg))
        return Envelope(sender=self.index, msg=msg, transport_sig=sig)

    def _abort(self, reason: str) -> list[AgentAction]:
        self.phase = PHASE_ABORTED
        return [self._log("abort", reason=reason)]

    def _goto(self, phase: str, **detail) -> Log:
        prev = self.phase
        self.phase = phase
        return Log(phase=phase, event="phase", detail={"from": prev, **detail})

    def _log(self, event: str, **detail) -> Log:
        return Log(phase=self.phase, event=event, detail=detail)

    def sorted_bids(self) -> list:
        """Canonical bid list behind the current root (debugging fallback)."""
        if self.result is None:
            return []
        return list(self.result.winners) + list(self.result.losers)
