"""Two-party rotation chains.

A chain applies ``R_j(theta)`` to a system that the initiator holds with a
Pauli distortion only the other party knows. The parties alternate
teleportations; whoever receives undoes its own known distortion and stops
if that distortion commutes with ``j`` (the rotation landed with the right
sign). Otherwise it applies the doubled correction ``R_j(2**m theta)`` and
sends the system back.

Each party's decisions read nothing but its own state and the shared
program, so both parties keep going after the real exit; the one that has
not exited yet simply works on junk until its own exit point. Those
redundant steps are what the consumption accounting charges for.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import (PauliString, commutes, equal_up_to_phase, is_clifford_angle, multiply,
                    random_pauli)
from .statevector import StateVector, apply_pauli, apply_rotation
from .teleportation import ChannelRegistry, ProtocolViolation, receive, teleport

DEFAULT_CAP = 64


def other(party: str) -> str:
    return "B" if party == "A" else "A"


class Transcript:
    """Append-only local classical record of one party."""

    def __init__(self, party: str):
        self.party = party
        self._records: list[dict] = []

    def append(self, **rec) -> dict:
        rec = {"party": self.party, **rec}
        self._records.append(rec)
        return rec

    @property
    def records(self) -> tuple:
        return tuple(self._records)

    def __iter__(self):
        return iter(self._records)

    def __len__(self):
        return len(self._records)

    def at(self, node: str) -> list[dict]:
        return [r for r in self._records if r.get("node") == node]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self._records)


@dataclass(frozen=True)
class ChainProgram:
    """Pre-agreed rotation ``R_axis(theta)``; ``depth`` set means binary mode."""

    axis: PauliString
    theta: float
    depth: int | None = None
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.axis.is_identity():
            raise ValueError("chain axis must be a non-identity Pauli string")
        object.__setattr__(self, "axis", self.axis.unsigned())
        if self.depth is not None:
            if self.depth < 1:
                raise ValueError("binary depth must be >= 1")
            k = self.theta * 2**self.depth / np.pi
            if abs(k - round(k)) > 1e-9 or round(k) % 2 == 0:
                raise ValueError("binary mode needs theta an odd multiple of pi/2**D")
        if self.cap < 1:
            raise ValueError("safety cap must be >= 1")

    @property
    def mode(self) -> str:
        return "continuous" if self.depth is None else "binary"

    @property
    def width(self) -> int:
        return self.axis.n

    def correction(self, m: int) -> float:
        """Angle applied by the receiver of channel ``m`` when it continues."""
        return 2.0**m * self.theta

    @property
    def max_channels(self) -> int:
        return self.depth - 1 if self.depth is not None else self.cap

    def is_stabilizer(self) -> bool:
        return self.depth == 1 or is_clifford_angle(self.theta)

    def sender(self, m: int, initiator: str = "A") -> str:
        return initiator if m % 2 else other(initiator)


def binary_chain_bound(depth: int) -> int:
    """Most channels a binary chain of the given depth can use."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return depth - 1


@dataclass
class PartyState:
    """What one party knows inside one chain.

    ``known`` is the distortion this party itself induced most recently (its
    last teleport outcome, or for the receiver its incoming distortion).
    """

    name: str
    role: str
    known: PauliString | None = None
    opportunities: int = 0
    exit: int | None = None
    last_channel: int = 0
    terminated: bool = False
    exhausted: bool = False
    record: list = field(default_factory=list)

    def __post_init__(self):
        if self.role not in ("initiator", "receiver"):
            raise ValueError("role must be initiator or receiver")


def decide(party: PartyState, program: ChainProgram, m: int) -> str:
    """Pure transition: 'terminate', 'continue' or 'exhausted' on receiving ``m``."""
    if program.depth is not None and m >= program.depth - 1:
        return "terminate"
    if commutes(party.known, program.axis):
        return "terminate"
    if m + 1 > program.max_channels:
        return "exhausted"
    return "continue"


def _send(party, state, program, qubits, m, reg, rng, mode, node, initiator, transcript):
    ch = reg.get(f"{node}#{m}", program.width, program.sender(m, initiator))
    if state is None:
        # nothing real travels: the outcome of teleporting junk is uniform
        if "send" in ch.used:
            raise ProtocolViolation(f"channel {ch.id} already consumed")
        reg.use(ch, "send")
        outcome = random_pauli(program.width, rng)
    else:
        rec, state = teleport(state, qubits, ch, reg, rng, party.name, mode, m)
        outcome = rec.outcome
    party.known = outcome
    party.last_channel = m
    if program.depth is not None and m == program.max_channels:
        # last channel of a binary chain: the sender has no exit point left
        party.terminated = True
    entry = {"node": node, "step": m, "channel_id": ch.id, "outcome": outcome.label(),
             "action": "send"}
    party.record.append(entry)
    if transcript is not None:
        transcript.append(**entry)
    return state


def initiator_open(party: PartyState, state, program: ChainProgram, qubits, reg: ChannelRegistry,
                   rng, mode: str = "exact", node: str = "c", transcript=None):
    """Apply ``R_j(theta)`` and teleport on channel 1. ``state=None`` means junk."""
    if party.role != "initiator" or party.last_channel:
        raise ProtocolViolation("only a fresh initiator opens a chain")
    if state is not None:
        state = apply_rotation(state, program.axis, program.theta, qubits)
    return _send(party, state, program, qubits, 1, reg, rng, mode, node, party.name, transcript)


def party_step(party: PartyState, state, program: ChainProgram, qubits, m: int,
               reg: ChannelRegistry, rng, mode: str = "exact", node: str = "c",
               initiator: str = "A", transcript=None):
    """Receive channel ``m`` and act. Returns ``(action, state)``.

    On 'continue' the correction is applied and channel ``m+1`` is sent.
    """
    if party.terminated:
        raise ProtocolViolation(f"party {party.name} acted after terminating")
    ch = reg.get(f"{node}#{m}", program.width, program.sender(m, initiator))
    receive(reg, ch, party.name)
    if state is not None:
        state = apply_pauli(state, party.known.unsigned(), qubits)
    action = decide(party, program, m)
    party.opportunities += 1
    party.last_channel = m
    fixed = False
    if action == "terminate":
        party.terminated = True
        party.exit = party.opportunities
        if not commutes(party.known, program.axis):
            # binary bound reached: the remaining correction is a stabilizer
            fixed = True
            if state is not None:
                state = apply_rotation(state, program.axis, program.correction(m), qubits)
    elif action == "exhausted":
        party.terminated = True
        party.exhausted = True
    entry = {"node": node, "step": m, "channel_id": ch.id, "outcome": None, "action": action}
    if fixed:
        entry["clifford_fix"] = True
    party.record.append(entry)
    if transcript is not None:
        transcript.append(**entry)
    if action != "continue":
        return action, state
    if state is not None:
        state = apply_rotation(state, program.axis, program.correction(m), qubits)
    state = _send(party, state, program, qubits, m + 1, reg, rng, mode, node, initiator,
                  transcript)
    return action, state


@dataclass
class ChainResult:
    q: int
    p: int
    channels: int
    holder: str | None
    exit_channel: int | None
    exhausted: bool = False
    frame: PauliString | None = None

    @property
    def ebits(self) -> int:
        return self.channels * (self.frame.n if self.frame is not None else 1)


def drive_chain(program: ChainProgram, reg: ChannelRegistry, rng, state=None, qubits=None,
                initiator: PartyState | None = None, receiver: PartyState | None = None,
                mode: str = "exact", node: str = "c", transcripts=None, opened=False):
    """Run both parties of one chain to completion.

    ``state`` is the real register (or ``None`` when the whole chain is
    junk). Returns ``(holder, exit_channel, state, parties)`` where
    ``holder`` is the party that really ends up with the system.
    """
    init = initiator or PartyState("A", "initiator")
    recv = receiver or PartyState(other(init.name), "receiver", known=PauliString.identity(program.width))
    ts = transcripts or {}
    if not opened:
        state = initiator_open(init, state, program, qubits, reg, rng, mode, node, ts.get(init.name))
    real = state is not None
    holder = exit_channel = None
    exhausted = False
    m = 1
    while not (init.terminated and recv.terminated):
        r = recv if m % 2 else init
        if not r.terminated:
            action, out = party_step(r, state if real else None, program, qubits, m, reg, rng,
                                     mode, node, init.name, ts.get(r.name))
            if real:
                if action == "terminate":
                    holder, exit_channel, state, real = r.name, m, out, False
                elif action == "continue":
                    state = out
                else:
                    exhausted, real = True, False
        m += 1
        if m > program.max_channels + 1:
            break
    return holder, exit_channel, state, (init, recv), exhausted


def chain_frame(program: ChainProgram, transcripts: dict, node: str = "c",
                initiator: str = "A") -> tuple[str | None, int | None, PauliString | None]:
    """Recover (holder, exit channel, distortion) from both parties' records."""
    recs = [r for t in transcripts.values() for r in t.at(node)]
    stops = sorted((r["step"], r["action"] != "terminate", r) for r in recs
                   if r["action"] in ("terminate", "exhausted"))
    if not stops or stops[0][1]:
        return None, None, None
    m, _, rec = stops[0]
    # the earliest stop is the real exit; every channel before it was sent
    sends = {r["step"]: r for r in recs if r["action"] == "send"}
    if any(k not in sends for k in range(1, m + 1)):
        raise ProtocolViolation(f"transcripts of node {node} are inconsistent")
    s = PauliString.parse(sends[m]["outcome"])
    if rec.get("clifford_fix") and not commutes(s, program.axis):
        s = multiply(s, program.axis)
    return rec["party"], m, s


def run_chain(state: StateVector, program: ChainProgram, rng: np.random.Generator, qubits=None,
              incoming: PauliString | None = None, mode: str = "exact"):
    """Run one chain from an initiator holding ``state`` with an unknown distortion.

    ``incoming`` is the distortion the receiver knows (a uniform draw by
    default, applied to ``state`` here). Returns ``(ChainResult, transcripts,
    final_state)``.
    """
    qubits = tuple(state.labels[: program.width] if qubits is None else qubits)
    if incoming is None:
        incoming = random_pauli(program.width, rng)
    state = apply_pauli(state, incoming, qubits)
    reg = ChannelRegistry()
    ts = {"A": Transcript("A"), "B": Transcript("B")}
    if program.is_stabilizer():
        from .pauli import propagate_through_rotation
        state = apply_rotation(state, program.axis, program.theta, qubits)
        frame = propagate_through_rotation(incoming, program.axis, program.theta)
        ts["A"].append(node="c", step=0, channel_id=None, outcome=None, action="local")
        return ChainResult(0, 0, 0, "A", 0, frame=frame), ts, state
    init = PartyState("A", "initiator")
    recv = PartyState("B", "receiver", known=incoming)
    holder, m, state, (a, b), exhausted = drive_chain(program, reg, rng, state, qubits, init, recv,
                                                      mode, "c", ts)
    _, _, frame = chain_frame(program, ts)
    res = ChainResult(a.exit or 0, b.exit or 0, len(reg.consumed()), holder, m, exhausted, frame)
    return res, ts, state


def reconcile_chain_state(state: StateVector, result: ChainResult, qubits) -> StateVector:
    """Undo the transcript-reconstructed distortion on the holder's qubits."""
    return apply_pauli(state, result.frame.unsigned(), qubits)


__all__ = ["ChainProgram", "PartyState", "ChainResult", "Transcript", "binary_chain_bound",
           "decide", "initiator_open", "party_step", "drive_chain", "run_chain", "chain_frame",
           "reconcile_chain_state", "other", "equal_up_to_phase"]
