"""Two-party execution of rotation programs and transcript reconciliation.

The real system follows one path through the concatenation tree. Every
other branch is walked by a single party acting on junk: its teleport
outcomes are uniform, and its decisions use only its own records. That
redundant work is what turns one chain's 5 channels into the much larger
concatenated averages, so it is simulated rather than estimated.

Node keys are shared by both parties without communication. A chain at
item ``i`` under position ``P`` is node ``P/i``. The exit point at channel
``m`` of that node is position ``P/i:m``. Lanes append ``|k``. Branch
continuations append ``?1`` (taken) or ``?0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import (ChainProgram, PartyState, Transcript, decide, initiator_open, other,
                    party_step, DEFAULT_CAP)
from .pauli import (PauliString, commutes, equal_up_to_phase, multiply, propagate_through_rotation,
                    propagate_through_stabilizer, random_pauli)
from .program import (Branch, Clifford, EarlyCheck, LocalUnitary, Localize, MeasureZ, Parallel,
                      Rotation, RotationProgram)
from .statevector import StateVector, apply_pauli, apply_rotation, apply_unitary, measure_z
from .teleportation import ChannelRegistry, ProtocolViolation, receive, teleport


class InconsistentTranscripts(RuntimeError):
    """The two records cannot come from one honest run."""


def restrict(p: PauliString, qubits) -> PauliString:
    """Lane-local copy of ``p``: position ``i`` is system qubit ``qubits[i]``."""
    axes = p.axes
    return PauliString.from_axes([axes[q] for q in qubits])


def lift(p: PauliString, qubits, n: int) -> PauliString:
    axes = [0] * n
    for i, code in enumerate(p.axes):
        axes[qubits[i]] = code
    return PauliString.from_axes(axes)


def drop(p: PauliString, qubits) -> PauliString:
    mask = sum(1 << q for q in qubits)
    return PauliString(p.n, p.x & ~mask, p.z & ~mask, 0)


def item_qubits(items) -> set:
    qs: set = set()
    for it in items:
        if isinstance(it, Rotation):
            qs |= {q for q in range(it.axis.n) if (it.axis.support >> q) & 1}
        elif isinstance(it, Clifford):
            qs |= set(it.gate.qubits)
        elif isinstance(it, MeasureZ):
            qs |= set(it.qubits)
        elif isinstance(it, Branch):
            qs |= {it.control} | item_qubits(it.body)
        elif isinstance(it, Parallel):
            for lane in it.lanes:
                qs |= item_qubits(lane)
    return qs


def chain_program(rot: Rotation, lane, cap: int = DEFAULT_CAP) -> ChainProgram:
    support = {q for q in range(rot.axis.n) if (rot.axis.support >> q) & 1}
    if not support <= set(lane):
        raise ValueError("rotation acts outside the qubits travelling together")
    return ChainProgram(restrict(rot.axis, lane), rot.theta, rot.depth, cap)


@dataclass
class Execution:
    """Outcome of one program run: transcripts, ledger and final real state."""

    program: RotationProgram
    transcripts: dict
    registry: ChannelRegistry
    state: StateVector | None
    exhausted: bool = False
    node_width: dict = field(default_factory=dict)

    @property
    def ebits(self) -> int:
        return self.registry.ebits


class _Runner:
    def __init__(self, program: RotationProgram, rng, mode: str, track: bool, cap: int):
        self.p = program
        self.n = program.n
        self.rng = rng
        self.mode = mode
        self.track = track
        self.cap = cap
        self.reg = ChannelRegistry()
        self.ts = {"A": Transcript("A"), "B": Transcript("B")}
        self.state = None
        self.exhausted = False
        self.node_width: dict = {}

    # -- entry -----------------------------------------------------------
    def run(self, state: StateVector, incoming: PauliString | None):
        p = self.p
        self.state = state
        active = list(range(self.n))
        abstain = set()
        items = p.items
        k = 0
        while k < len(items) and isinstance(items[k], (LocalUnitary, EarlyCheck)):
            it = items[k]
            if isinstance(it, LocalUnitary):
                self.state = apply_unitary(self.state, it.matrix, it.qubits)
            elif isinstance(it, EarlyCheck):
                bits = []
                for q in it.qubits:
                    b, self.state = measure_z(self.state, q, self.rng, remove=True)
                    bits.append(b)
                    active.remove(q)
                self.ts[it.party].append(node="pre", step=0, channel_id=None, outcome=bits,
                                         action="early", qubits=list(it.qubits))
                if any(bits):
                    abstain.add(it.party)
            k += 1
        known = PauliString.identity(self.n)
        if k < len(items) and isinstance(items[k], Localize):
            loc = items[k]
            k += 1
            width = len(loc.qubits)
            ch = self.reg.get("loc#0", width, "B")
            if "B" not in abstain:
                if "A" in abstain:
                    self.reg.use(ch, "send")
                    b0 = random_pauli(width, self.rng)
                else:
                    rec, self.state = teleport(self.state, loc.qubits, ch, self.reg, self.rng, "B",
                                               self.mode)
                    b0 = rec.outcome
                self.ts["B"].append(node="loc", step=0, channel_id=ch.id, outcome=b0.label(),
                                    action="send", qubits=list(loc.qubits))
                known = lift(b0, loc.qubits, self.n)
            if "A" not in abstain:
                receive(self.reg, ch, "A")
                self.ts["A"].append(node="loc", step=0, channel_id=ch.id, outcome=None,
                                    action="receive")
        elif incoming is not None:
            self.state = apply_pauli(self.state, incoming)
            known = incoming.unsigned()
            self.ts["B"].append(node="loc", step=0, channel_id=None, outcome=known.label(),
                                action="send", qubits=list(range(self.n)))
        rest = items[k:]
        lane = tuple(active)
        if abstain:
            # someone already knows the answer; the other works on junk alone
            self.state = None
            if self.track:
                if "A" not in abstain:
                    self._shadow("A", rest, 0, "holder", None, lane, "r", {})
                if "B" not in abstain:
                    self._shadow("B", rest, 0, "remote", known, lane, "r", {})
        else:
            self._real(rest, 0, "A", known, lane, "r", {})
        return Execution(p, self.ts, self.reg, self.state, self.exhausted, self.node_width)

    # -- the real path ---------------------------------------------------
    def _real(self, items, i, holder, known, lane, pos, bits):
        remote = other(holder)
        while i < len(items):
            it = items[i]
            if isinstance(it, Clifford):
                if not set(it.gate.qubits) <= set(lane):
                    raise ValueError("stabilizer gate spans qubits that are not together")
                self.state = apply_unitary(self.state, it.gate.local_matrix(), it.gate.qubits,
                                           check=False)
                known = propagate_through_stabilizer(it.gate, known)
            elif isinstance(it, Rotation) and it.is_local():
                if abs(it.theta) > 1e-15:
                    if any((it.axis.support >> q) & 1 for q in range(self.n) if q not in lane):
                        raise ValueError("rotation acts on qubits already measured or split off")
                    self.state = apply_rotation(self.state, restrict(it.axis, lane), it.theta,
                                                lane)
                    known = propagate_through_rotation(known, it.axis.unsigned(), it.theta)
            elif isinstance(it, Rotation):
                self._real_chain(items, i, it, holder, known, lane, pos, bits)
                return
            elif isinstance(it, MeasureZ):
                out = []
                for q in it.qubits:
                    b, self.state = measure_z(self.state, q, self.rng,
                                              remove=self.state.width > 1)
                    out.append(b)
                    bits[q] = b
                self.ts[holder].append(node=f"{pos}/{i}", step=0, channel_id=None, outcome=out,
                                       action="measure", qubits=list(it.qubits))
                known = drop(known, it.qubits)
                lane = tuple(q for q in lane if q not in it.qubits)
            elif isinstance(it, Branch):
                rest = items[i + 1:]
                taken = bits.get(it.control) == it.value
                body = tuple(it.body) + tuple(rest)
                if taken:
                    if self.track:
                        self._shadow(remote, rest, 0, "remote", known, lane, pos + "?0", {})
                    items, i, pos = body, 0, pos + "?1"
                else:
                    if self.track:
                        self._shadow(remote, body, 0, "remote", known, lane, pos + "?1", {})
                    items, i, pos = rest, 0, pos + "?0"
                continue
            elif isinstance(it, Parallel):
                for k, lane_items in enumerate(it.lanes):
                    lq = tuple(q for q in lane if q in item_qubits(lane_items))
                    self._real(lane_items, 0, holder, known, lq, f"{pos}|{k}", bits)
                return
            else:
                raise TypeError(f"unexpected item {it!r} after localization")
            i += 1

    def _real_chain(self, items, i, rot, holder, known, lane, pos, bits):
        key = f"{pos}/{i}"
        prog = chain_program(rot, lane, self.cap)
        self.node_width[key] = len(lane)
        init = PartyState(holder, "initiator")
        recv = PartyState(other(holder), "receiver", known=restrict(known, lane))
        self.state = initiator_open(init, self.state, prog, lane, self.reg, self.rng, self.mode,
                                    key, self.ts[holder])
        sent = {1: init.known}
        real = True
        nxt = None
        m = 1
        while m <= prog.max_channels and (m in sent or not (init.terminated
                                                            and recv.terminated)):
            r, s = (recv, init) if m % 2 else (init, recv)
            r_exit = False
            if not r.terminated:
                action, out = party_step(r, self.state if real else None, prog, lane, m, self.reg,
                                         self.rng, self.mode, key, holder, self.ts[r.name])
                if real and action != "exhausted":
                    self.state = out
                if action == "continue":
                    sent[m + 1] = r.known
                elif action == "terminate":
                    r_exit = True
                elif real:
                    self.exhausted = True
                    real = False
            child = f"{key}:{m}"
            is_real_exit = r_exit and real
            if is_real_exit:
                nxt = (r.name, lift(sent[m], lane, self.n), child)
                real = False
            else:
                if r_exit and self.track:
                    self._shadow(r.name, items, i + 1, "holder", None, lane, child, dict(bits))
                if m in sent and self.track:
                    self._shadow(s.name, items, i + 1, "remote", lift(sent[m], lane, self.n),
                                 lane, child, {})
            m += 1
        if nxt is not None:
            self._real(items, i + 1, nxt[0], nxt[1], lane, nxt[2], bits)
        else:
            self.state = None

    # -- redundant work --------------------------------------------------
    def _shadow(self, party, items, i, role, known, lane, pos, bits):
        while i < len(items):
            it = items[i]
            if isinstance(it, Clifford):
                if role == "remote":
                    known = propagate_through_stabilizer(it.gate, known)
            elif isinstance(it, Rotation) and it.is_local():
                if role == "remote" and abs(it.theta) > 1e-15:
                    known = propagate_through_rotation(known, it.axis.unsigned(), it.theta)
            elif isinstance(it, Rotation):
                self._shadow_chain(party, items, i, it, role, known, lane, pos, bits)
                return
            elif isinstance(it, MeasureZ):
                if role == "holder":
                    out = [int(b) for b in self.rng.integers(0, 2, size=len(it.qubits))]
                    bits.update(zip(it.qubits, out))
                    self.ts[party].append(node=f"{pos}/{i}", step=0, channel_id=None,
                                          outcome=out, action="measure", qubits=list(it.qubits))
                else:
                    known = drop(known, it.qubits)
                lane = tuple(q for q in lane if q not in it.qubits)
            elif isinstance(it, Branch):
                rest = tuple(items[i + 1:])
                body = tuple(it.body) + rest
                if role == "holder":
                    if bits.get(it.control) == it.value:
                        items, i, pos = body, 0, pos + "?1"
                    else:
                        items, i, pos = rest, 0, pos + "?0"
                else:
                    self._shadow(party, body, 0, role, known, lane, pos + "?1", {})
                    items, i, pos = rest, 0, pos + "?0"
                continue
            elif isinstance(it, Parallel):
                for k, lane_items in enumerate(it.lanes):
                    lq = tuple(q for q in lane if q in item_qubits(lane_items))
                    self._shadow(party, lane_items, 0, role, known, lq, f"{pos}|{k}", dict(bits))
                return
            i += 1

    def _shadow_chain(self, party, items, i, rot, role, known, lane, pos, bits):
        key = f"{pos}/{i}"
        prog = chain_program(rot, lane, self.cap)
        self.node_width[key] = len(lane)
        if role == "holder":
            ps = PartyState(party, "initiator")
            initiator_open(ps, None, prog, lane, self.reg, self.rng, self.mode, key, self.ts[party])
            self._shadow(party, items, i + 1, "remote", lift(ps.known, lane, self.n), lane,
                         f"{key}:1", {})
            m, initiator = 2, party
        else:
            ps = PartyState(party, "receiver", known=restrict(known, lane))
            m, initiator = 1, other(party)
        while not ps.terminated and m <= prog.max_channels:
            action, _ = party_step(ps, None, prog, lane, m, self.reg, self.rng, self.mode, key,
                                   initiator, self.ts[party])
            if action == "terminate":
                self._shadow(party, items, i + 1, "holder", None, lane, f"{key}:{m}", dict(bits))
                return
            if action == "exhausted":
                return
            self._shadow(party, items, i + 1, "remote", lift(ps.known, lane, self.n), lane,
                         f"{key}:{m + 1}", {})
            m += 2


def execute(program: RotationProgram, state: StateVector, rng: np.random.Generator,
            mode: str = "exact", track_redundant: bool = True, cap: int = DEFAULT_CAP,
            incoming: PauliString | None = None) -> Execution:
    """Run ``program`` on ``state`` with both parties acting independently.

    ``mode`` selects exact Bell-pair teleportation or the sampled-Pauli
    shortcut. With ``track_redundant=False`` only the real path is walked:
    outcomes are identical in distribution but the ledger undercounts.
    """
    if state.width != program.n:
        raise ValueError("input width does not match the program")
    return _Runner(program, rng, mode, track_redundant, cap).run(state, incoming)


# -- reconciliation ------------------------------------------------------

def _records(ts: dict, node: str) -> list[dict]:
    return [r for t in ts.values() for r in t.at(node)]


def _replay_chain(prog: ChainProgram, recs, frame: PauliString, known: PauliString,
                  initiator: str):
    """Follow one chain's real path.

    ``frame`` is the true lane distortion and ``known`` what the remote party
    believes it to be. Returns ``(holder, exit channel, true frame, outcome of
    the last real send)``.
    """
    sends = {}
    stops = {}
    for r in recs:
        if r["action"] == "send":
            sends.setdefault(r["step"], r)
        elif r["action"] in ("terminate", "continue", "exhausted"):
            stops.setdefault((r["step"], r["party"]), r)
    j = prog.axis
    acc = prog.theta if commutes(frame, j) else -prog.theta
    cur = frame
    last = {other(initiator): known}
    m = 1
    while True:
        sender = initiator if m % 2 else other(initiator)
        receiver = other(sender)
        srec = sends.get(m)
        if srec is None or srec["party"] != sender:
            raise InconsistentTranscripts(f"missing send on channel {m} of a real chain")
        o = PauliString.parse(srec["outcome"])
        k_recv = last[receiver]
        cur = multiply(k_recv.unsigned(), multiply(o, cur))
        last[sender] = o
        rrec = stops.get((m, receiver))
        if rrec is None:
            raise InconsistentTranscripts(f"missing receipt on channel {m} of a real chain")
        expected = decide(PartyState(receiver, "receiver", known=k_recv), prog, m)
        if rrec["action"] != expected:
            raise InconsistentTranscripts(f"channel {m}: recorded {rrec['action']}, "
                                          f"replay says {expected}")
        if expected == "exhausted":
            return None, m, None, o
        if expected == "continue" or not commutes(k_recv, j):
            acc += prog.correction(m) if commutes(cur, j) else -prog.correction(m)
        if expected == "terminate":
            k = (acc - prog.theta) / np.pi
            if abs(k - round(k)) > 1e-6:
                raise InconsistentTranscripts("accumulated angle does not match the program")
            if round(k) % 2:
                cur = multiply(cur, j)
            return receiver, m, cur.unsigned(), o
        m += 1


def reconcile_bits(tA: Transcript, tB: Transcript, program: RotationProgram) -> dict | None:
    """Replay both records through a Pauli frame; true measured bits or ``None``.

    ``None`` means some party stopped early with a certain 'no'.
    """
    ts = {"A": tA, "B": tB}
    n = program.n
    for t in ts.values():
        for r in t.at("pre"):
            if any(r["outcome"]):
                return None
    frame = PauliString.identity(n)
    loc = [r for r in tB.at("loc") if r["action"] == "send"]
    if loc:
        frame = lift(PauliString.parse(loc[0]["outcome"]), loc[0]["qubits"], n)
    items = [it for it in program.items if not isinstance(it, (LocalUnitary, EarlyCheck, Localize))]
    early = {q for it in program.items if isinstance(it, EarlyCheck) for q in it.qubits}
    lane = tuple(q for q in range(n) if q not in early)
    bits: dict = {}
    _walk(ts, program, tuple(items), "r", "A", frame, frame, lane, bits)
    return bits


def reconcile_frame(tA: Transcript, tB: Transcript, program: RotationProgram):
    """Final holder and Pauli distortion of a program without measurements."""
    ts = {"A": tA, "B": tB}
    frame = PauliString.identity(program.n)
    loc = [r for r in tB.at("loc") if r["action"] == "send"]
    if loc:
        frame = lift(PauliString.parse(loc[0]["outcome"]), loc[0]["qubits"], program.n)
    items = tuple(it for it in program.items if not isinstance(it, Localize))
    return _walk(ts, program, items, "r", "A", frame, frame, tuple(range(program.n)), {})


def _walk(ts, program, items, pos, holder, frame, known, lane, bits):
    """``frame`` is the true distortion, ``known`` the remote party's belief."""
    n = program.n
    i = 0
    while i < len(items):
        it = items[i]
        if isinstance(it, Clifford):
            frame = propagate_through_stabilizer(it.gate, frame)
            known = propagate_through_stabilizer(it.gate, known)
        elif isinstance(it, Rotation) and it.is_local():
            if abs(it.theta) > 1e-15:
                frame = propagate_through_rotation(frame, it.axis.unsigned(), it.theta)
                known = propagate_through_rotation(known, it.axis.unsigned(), it.theta)
        elif isinstance(it, Rotation):
            key = f"{pos}/{i}"
            prog = chain_program(it, lane)
            who, m, cur, o = _replay_chain(prog, _records(ts, key), restrict(frame, lane),
                                           restrict(known, lane), holder)
            if who is None:
                raise InconsistentTranscripts("real path ran into the safety cap")
            frame = multiply(drop(frame, lane), lift(cur, lane, n)).unsigned()
            known = lift(o, lane, n)
            holder, pos = who, f"{key}:{m}"
        elif isinstance(it, MeasureZ):
            recs = [r for r in ts[holder].at(f"{pos}/{i}") if r["action"] == "measure"]
            if len(recs) != 1:
                raise InconsistentTranscripts(f"holder {holder} has no measurement at {pos}/{i}")
            for q, raw in zip(it.qubits, recs[0]["outcome"]):
                bits[q] = raw ^ ((frame.x >> q) & 1)
            frame = drop(frame, it.qubits)
            known = drop(known, it.qubits)
            lane = tuple(q for q in lane if q not in it.qubits)
        elif isinstance(it, Branch):
            rest = tuple(items[i + 1:])
            if bits.get(it.control) == it.value:
                items, pos = tuple(it.body) + rest, pos + "?1"
            else:
                items, pos = rest, pos + "?0"
            i = 0
            continue
        elif isinstance(it, Parallel):
            for k, lane_items in enumerate(it.lanes):
                lq = tuple(q for q in lane if q in item_qubits(lane_items))
                _walk(ts, program, tuple(lane_items), f"{pos}|{k}", holder, frame, known, lq,
                      bits)
            return None
        i += 1
    return holder, frame


def reconcile(tA: Transcript, tB: Transcript, program: RotationProgram):
    """Outcome label at the meeting point, from the two transcripts alone."""
    bits = reconcile_bits(tA, tB, program)
    if bits is None:
        return program.meta.get("early_label", 1)
    return program.label_of_bits(bits)
