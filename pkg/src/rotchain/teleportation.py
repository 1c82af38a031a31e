"""Pre-shared entanglement channels and the teleport primitive.

A channel is a block of ``width`` Bell pairs usable for one teleportation in
a fixed direction. The registry hands out channels lazily and keeps the ebit
ledger: a channel counts as consumed the first time either of its two halves
is used, which is how the redundant (one-sided) parts of a protocol still
burn entanglement.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import count

import numpy as np

from .pauli import PauliString
from .statevector import StateVector, apply_pauli, bell_measure, tensor, BELL_STATES


class ProtocolViolation(RuntimeError):
    """A party broke the pre-agreed channel plan."""


@dataclass
class EntanglementChannel:
    id: str
    width: int
    sender: str
    status: str = "fresh"
    used: set = field(default_factory=set)

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("channel width must be >= 1")

    @property
    def receiver(self) -> str:
        return "B" if self.sender == "A" else "A"


@dataclass
class TeleportRecord:
    channel_id: str
    outcome: PauliString
    sender: str
    step: int = 0

    def __post_init__(self):
        if self.outcome is None:
            raise ValueError("teleport record needs an outcome")

    def to_dict(self):
        return {"channel_id": self.channel_id, "outcome": self.outcome.label(),
                "sender": self.sender, "step": self.step}


class ChannelRegistry:
    """Channel book-keeping for one protocol run."""

    def __init__(self):
        self.channels: dict[str, EntanglementChannel] = {}
        self.ebits = 0
        self._ids = count()

    def allocate(self, width: int, n: int, sender: str, prefix: str = "ch") -> list[str]:
        if n < 0:
            raise ValueError("channel count must be >= 0")
        if sender not in ("A", "B"):
            raise ValueError("sender must be 'A' or 'B'")
        ids = []
        for _ in range(n):
            cid = f"{prefix}{next(self._ids)}"
            self.channels[cid] = EntanglementChannel(cid, width, sender)
            ids.append(cid)
        return ids

    def get(self, cid: str, width: int, sender: str) -> EntanglementChannel:
        """Look up a named channel, creating it on first touch."""
        ch = self.channels.get(cid)
        if ch is None:
            ch = self.channels[cid] = EntanglementChannel(cid, width, sender)
        elif ch.width != width or ch.sender != sender:
            raise ProtocolViolation(f"channel {cid} plan mismatch")
        return ch

    def use(self, ch: EntanglementChannel, side: str):
        """Mark one half of ``ch`` as used (``side`` is 'send' or 'recv')."""
        if side in ch.used:
            raise ProtocolViolation(f"channel {ch.id} {side} half reused")
        ch.used.add(side)
        if ch.status == "fresh":
            ch.status = "consumed"
            self.ebits += ch.width

    def consumed(self) -> list[EntanglementChannel]:
        return [c for c in self.channels.values() if c.status == "consumed"]


def allocate(reg: ChannelRegistry, width: int, n: int, direction: str) -> list[str]:
    """Register ``n`` fresh channels; ``direction`` is ``"A->B"`` or ``"B->A"``."""
    return reg.allocate(width, n, direction.split("->")[0].strip())


def consumed_ebits(reg: ChannelRegistry) -> int:
    return reg.ebits


def receive(reg: ChannelRegistry, ch: EntanglementChannel, party: str):
    """The receiver picks up its half of ``ch`` (junk if nothing was sent)."""
    if party != ch.receiver:
        raise ProtocolViolation(f"{party} cannot receive on channel {ch.id}")
    reg.use(ch, "recv")


def _bell_pair(a, b) -> StateVector:
    return StateVector(BELL_STATES[0], (a, b), check=False)


def teleport(state: StateVector, qubits, ch: EntanglementChannel, reg: ChannelRegistry,
             rng: np.random.Generator, sender: str | None = None, mode: str = "exact",
             step: int = 0):
    """Teleport ``qubits`` through ``ch``.

    ``mode="exact"`` materializes the Bell pairs, Bell-measures each
    (system, sender-half) pair and relabels the receiver halves with the
    system labels, so the register keeps its names. ``mode="sampled"``
    draws the outcome uniformly and applies the Pauli directly; it is the
    shortcut the exact path is checked against.
    Returns ``(TeleportRecord, state)``; the receiver holds ``sigma_a|psi>``.
    """
    qubits = tuple(qubits)
    sender = ch.sender if sender is None else sender
    if sender != ch.sender:
        raise ProtocolViolation(f"{sender} cannot send on channel {ch.id}")
    if "send" in ch.used:
        raise ProtocolViolation(f"channel {ch.id} already consumed")
    if len(qubits) != ch.width:
        raise ValueError("qubit count does not match channel width")
    codes = []
    if mode == "exact":
        for k, q in enumerate(qubits):
            e1, e2 = ("e1", ch.id, k), ("e2", ch.id, k)
            state = tensor(state, _bell_pair(e1, e2))
            label, state = bell_measure(state, (q, e1), rng)
            codes.append(label)
            state = _relabel(state, e2, q)
    elif mode == "sampled":
        codes = [int(c) for c in rng.integers(0, 4, size=len(qubits))]
        state = apply_pauli(state, PauliString.from_axes(codes), qubits)
    else:
        raise ValueError(f"unknown teleport mode {mode!r}")
    reg.use(ch, "send")
    return TeleportRecord(ch.id, PauliString.from_axes(codes), sender, step), state


def _relabel(state: StateVector, old, new) -> StateVector:
    labels = tuple(new if lab == old else lab for lab in state.labels)
    return StateVector(state.amps, labels, check=False)
