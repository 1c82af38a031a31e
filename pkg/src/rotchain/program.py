"""Rotation programs: the plan both parties agree on before the measurement.

A program is a flat list of items over ``n`` system qubits. Alice owns
``alice`` and Bob owns ``bob``. Items before :class:`Localize` are purely
local. ``Localize`` teleports Bob's qubits to Alice. Everything after it
acts on the localized system, with non-stabilizer rotations carried out by
rotation chains.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import AXIS_CHARS, PauliString, StabilizerGate, is_clifford_angle, rotation_matrix


@dataclass(frozen=True)
class LocalUnitary:
    party: str
    qubits: tuple
    matrix: np.ndarray = field(compare=False)


@dataclass(frozen=True)
class EarlyCheck:
    """Local z-measurement before localization; any 1 means a certain 'no'."""

    party: str
    qubits: tuple


@dataclass(frozen=True)
class Localize:
    qubits: tuple


@dataclass(frozen=True)
class Clifford:
    gate: StabilizerGate


@dataclass(frozen=True)
class Rotation:
    axis: PauliString
    theta: float
    depth: int | None = None

    def is_local(self) -> bool:
        return abs(self.theta) < 1e-15 or self.depth == 1 or is_clifford_angle(self.theta)


@dataclass(frozen=True)
class MeasureZ:
    qubits: tuple


@dataclass(frozen=True)
class Branch:
    """Run ``body`` only if the holder's home qubit ``control`` read ``value``."""

    control: int
    value: int
    body: tuple


@dataclass(frozen=True)
class Parallel:
    """Independent lanes on disjoint qubit sets; nothing follows them."""

    lanes: tuple


def _embed(u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Dense ``2**n`` matrix of ``u`` acting on ``qubits`` (qubits[0] least significant)."""
    k = len(qubits)
    t = np.eye(1 << n, dtype=complex).reshape([2] * n + [1 << n])
    axes = [n - 1 - q for q in reversed(qubits)]
    out = np.tensordot(np.asarray(u, dtype=complex).reshape([2] * (2 * k)), t,
                       axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return out.reshape(1 << n, 1 << n)


def _items_unitary(items, n: int) -> np.ndarray:
    u = np.eye(1 << n, dtype=complex)
    for it in items:
        if isinstance(it, LocalUnitary):
            u = _embed(it.matrix, it.qubits, n) @ u
        elif isinstance(it, Clifford):
            u = _embed(it.gate.local_matrix(), it.gate.qubits, n) @ u
        elif isinstance(it, Rotation):
            u = rotation_matrix(it.axis.unsigned().matrix(), it.theta) @ u
        elif isinstance(it, Branch):
            body = _items_unitary(it.body, n)
            proj = np.diag([1.0 if ((i >> it.control) & 1) == it.value else 0.0
                            for i in range(1 << n)])
            u = (body @ proj + (np.eye(1 << n) - proj)) @ u
        elif isinstance(it, Parallel):
            for lane in it.lanes:
                u = _items_unitary(lane, n) @ u
    return u


@dataclass
class RotationProgram:
    """A measurement program plus the map from measured bits to labels."""

    n: int
    alice: tuple
    bob: tuple
    items: tuple
    label_qubits: tuple
    labels: dict | None = None
    name: str = "program"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.items = tuple(self.items)
        if sorted(self.alice + self.bob) != list(range(self.n)):
            raise ValueError("alice and bob qubits must partition the register")
        seen_loc = False
        for it in self.items:
            if isinstance(it, Localize):
                seen_loc = True
            elif isinstance(it, (LocalUnitary, EarlyCheck)) and seen_loc:
                raise ValueError("local pre-processing must precede localization")
            elif isinstance(it, Branch):
                if it.control not in self.alice:
                    raise ValueError("branch control must be one of Alice's own qubits")
        if self.chains_before_branch():
            raise ValueError("a branch must come before every rotation chain")

    def chains_before_branch(self) -> bool:
        chain_seen = False
        for it in self.items:
            if isinstance(it, Rotation) and not it.is_local():
                chain_seen = True
            if isinstance(it, Branch) and chain_seen:
                return True
        return False

    # structure ----------------------------------------------------------
    def rotations(self, items=None) -> list[Rotation]:
        out = []
        for it in self.items if items is None else items:
            if isinstance(it, Rotation):
                out.append(it)
            elif isinstance(it, Branch):
                out += self.rotations(it.body)
            elif isinstance(it, Parallel):
                for lane in it.lanes:
                    out += self.rotations(lane)
        return out

    def chain_rotations(self) -> list[Rotation]:
        return [r for r in self.rotations() if not r.is_local()]

    @property
    def localization_width(self) -> int:
        return sum(len(it.qubits) for it in self.items if isinstance(it, Localize))

    def unitary(self) -> np.ndarray:
        """Ideal program unitary with measurements deferred and branches controlled."""
        return _items_unitary(self.items, self.n)

    def early_qubits(self) -> tuple:
        return tuple(q for it in self.items if isinstance(it, EarlyCheck) for q in it.qubits)

    def label_of_index(self, index: int):
        if any((index >> q) & 1 for q in self.early_qubits()):
            return self.meta.get("early_label", 1)
        bits = [(index >> q) & 1 for q in self.label_qubits]
        key = sum(b << i for i, b in enumerate(bits))
        return self.labels.get(key, key) if self.labels is not None else key

    def label_of_bits(self, bits: dict):
        key = sum(bits[q] << i for i, q in enumerate(self.label_qubits))
        return self.labels.get(key, key) if self.labels is not None else key

    def outcome_labels(self) -> list:
        keys = range(1 << len(self.label_qubits))
        out = []
        for k in keys:
            lab = self.labels.get(k, k) if self.labels is not None else k
            if lab not in out:
                out.append(lab)
        return out

    def born_probabilities(self, amps: np.ndarray) -> dict:
        """Exact label distribution for input amplitudes ``amps`` (oracle)."""
        out = self.unitary() @ np.asarray(amps, dtype=complex)
        probs: dict = {}
        for i, a in enumerate(out):
            lab = self.label_of_index(i)
            probs[lab] = probs.get(lab, 0.0) + abs(a) ** 2
        return probs

    def eigenstates(self) -> dict:
        """Label -> list of orthonormal input states mapped to it with certainty."""
        u = self.unitary()
        out: dict = {}
        for i in range(1 << self.n):
            out.setdefault(self.label_of_index(i), []).append(u.conj().T[:, i])
        return out

    # serialization ------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"n": self.n, "alice": list(self.alice), "bob": list(self.bob),
                           "label_qubits": list(self.label_qubits), "name": self.name,
                           "labels": None if self.labels is None else
                           {str(k): v for k, v in self.labels.items()},
                           "items": [_item_to_json(it, self.n) for it in self.items]})

    @classmethod
    def from_json(cls, text: str | dict) -> "RotationProgram":
        d = json.loads(text) if isinstance(text, str) else text
        n = int(d["n"])
        alice = tuple(d.get("alice", range(n)))
        bob = tuple(d.get("bob", ()))
        items = [_item_from_json(x, n) for x in d["items"]]
        if not any(isinstance(it, Localize) for it in items) and bob:
            items.insert(0, Localize(bob))
        labels = d.get("labels")
        if labels is not None:
            labels = {int(k): v for k, v in labels.items()}
        label_qubits = tuple(d.get("label_qubits", range(n)))
        return cls(n, alice, bob, tuple(items), label_qubits, labels, d.get("name", "program"))


def _axis_text(p: PauliString) -> str:
    return "".join(AXIS_CHARS[c] for c in p.axes)


def _item_to_json(it, n):
    if isinstance(it, Rotation):
        d = {"rot": {"axes": _axis_text(it.axis), "theta": it.theta,
                     "width": it.axis.weight}}
        if it.depth is not None:
            d["rot"]["depth"] = it.depth
        return d
    if isinstance(it, Clifford):
        g = it.gate
        if g.kind == "cnot":
            return {"cnot": list(g.qubits)}
        if g.kind == "ry_half":
            return {"ry_half": [g.qubits[0], g.sign]}
        return {g.kind: [g.qubits[0]]}
    if isinstance(it, MeasureZ):
        return {"measure_z": list(it.qubits)}
    if isinstance(it, Localize):
        return {"localize": list(it.qubits)}
    if isinstance(it, EarlyCheck):
        return {"early_check": {"party": it.party, "qubits": list(it.qubits)}}
    if isinstance(it, LocalUnitary):
        m = np.asarray(it.matrix)
        return {"local": {"party": it.party, "qubits": list(it.qubits),
                          "re": m.real.tolist(), "im": m.imag.tolist()}}
    if isinstance(it, Branch):
        return {"branch": {"control": it.control, "value": it.value,
                           "body": [_item_to_json(x, n) for x in it.body]}}
    if isinstance(it, Parallel):
        return {"parallel": [[_item_to_json(x, n) for x in lane] for lane in it.lanes]}
    raise TypeError(f"cannot serialize {it!r}")


def _item_from_json(d: dict, n: int):
    if len(d) != 1:
        raise ValueError(f"program item must have exactly one key: {d}")
    (key, val), = d.items()
    if key == "rot":
        axes = val["axes"]
        if len(axes) != n:
            raise ValueError(f"rotation axes {axes!r} do not span {n} qubits")
        return Rotation(PauliString.parse(axes), float(val["theta"]), val.get("depth"))
    if key == "cnot":
        return Clifford(StabilizerGate("cnot", tuple(val)))
    if key in ("h", "s"):
        return Clifford(StabilizerGate(key, tuple(val)))
    if key == "ry_half":
        return Clifford(StabilizerGate("ry_half", (val[0],), int(val[1])))
    if key == "measure_z":
        return MeasureZ(tuple(val))
    if key == "localize":
        return Localize(tuple(val))
    if key == "early_check":
        return EarlyCheck(val["party"], tuple(val["qubits"]))
    if key == "local":
        m = np.asarray(val["re"]) + 1j * np.asarray(val["im"])
        return LocalUnitary(val["party"], tuple(val["qubits"]), m)
    if key == "branch":
        return Branch(int(val["control"]), int(val["value"]),
                      tuple(_item_from_json(x, n) for x in val["body"]))
    if key == "parallel":
        return Parallel(tuple(tuple(_item_from_json(x, n) for x in lane) for lane in val))
    raise ValueError(f"unknown program item {key!r}")
