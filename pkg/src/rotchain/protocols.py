"""Measurement schemes end to end: observables, runs, and the Vaidman baseline.

A :class:`MeasurementScheme` pairs a :class:`RotationProgram` with the
observable it measures. :func:`run_scheme` executes both parties, then the
outcome label is recovered from the two transcripts alone by replaying them
through a Pauli frame (:func:`reconcile`).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .chain import DEFAULT_CAP, Transcript
from .engine import InconsistentTranscripts, execute
from .engine import reconcile as _reconcile_program
from .pauli import PauliString, StabilizerGate, random_pauli
from .program import Clifford, LocalUnitary, Localize, MeasureZ, RotationProgram
from .statevector import BELL_STATES, StateVector
from .teleportation import ChannelRegistry
from .synthesis import (CartanParams, cartan_program, entangled_pair_basis_program,
                        entangled_pair_basis_states, multi_qubit_verification_program,
                        program_concat_spec, su2d_program, twisted_basis_program,
                        twisted_basis_states)
from .tree import ConcatSpec

ORTHO_TOL = 1e-10
KINDS = ("state_verify", "twisted", "entangled_pair", "cartan", "stabilizer", "bell",
         "ucr_skeleton")


def _complex(data, ndim: int) -> np.ndarray:
    """Array of rank ``ndim`` given directly or as nested ``[re, im]`` pairs."""
    arr = np.asarray(data)
    if np.iscomplexobj(arr):
        return arr.astype(complex)
    arr = arr.astype(float)
    if arr.ndim == ndim + 1 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim != ndim:
        raise ValueError(f"expected a rank-{ndim} array, got shape {arr.shape}")
    return arr.astype(complex)


def _cvec(data) -> np.ndarray:
    return _complex(data, 1)


def _cmat(data) -> np.ndarray:
    return _complex(data, 2)


def _pairs(m) -> list:
    m = np.asarray(m, dtype=complex)
    return np.stack([m.real, m.imag], axis=-1).tolist()


def _gate_from_json(g) -> StabilizerGate:
    if isinstance(g, StabilizerGate):
        return g
    if not isinstance(g, dict) or "kind" not in g:
        raise ValueError(f"not a stabilizer gate: {g!r}")
    return StabilizerGate(g["kind"], tuple(g["qubits"]), int(g.get("sign", 1)))


# -- observables -------------------------------------------------------------------

@dataclass(frozen=True)
class ObservableSpec:
    """An observable named by kind and parameters.

    ``params`` per kind:

    ``state_verify``  ``target`` amplitudes, ``bipartition`` (v, w)
    ``twisted``       ``theta``, ``phi``
    ``entangled_pair`` ``theta1``, ``phi1``, ``theta2``, ``phi2``
    ``cartan``        ``xi1``..``xi3``, Euler triples ``va vb wa wb``, ``split``
    ``stabilizer``    ``v_a``, ``v_b`` local unitaries, ``circuit`` gate list,
                      ``alice`` qubits
    ``bell``          nothing
    ``ucr_skeleton``  ``d`` and ``layers``, a list of UCR angle lists
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown observable kind {self.kind!r}")

    # construction
    def build(self) -> "MeasurementScheme":
        p = self.params
        k = self.kind
        if k == "bell":
            return bell_scheme()
        if k == "stabilizer":
            gates = [_gate_from_json(g) for g in p["circuit"]]
            return stabilizer_scheme(_cmat(p["v_a"]), _cmat(p["v_b"]), gates,
                                     alice=p.get("alice"), observable=self)
        if k == "state_verify":
            target = _cvec(p["target"])
            n = int(round(math.log2(len(target))))
            v, w = p.get("bipartition", (n // 2, n - n // 2))
            prog = multi_qubit_verification_program(StateVector(target), (int(v), int(w)))
        elif k == "twisted":
            prog = twisted_basis_program(float(p["theta"]), float(p["phi"]))
        elif k == "entangled_pair":
            prog = entangled_pair_basis_program(*(float(p[x]) for x in
                                                  ("theta1", "phi1", "theta2", "phi2")))
        elif k == "cartan":
            prog = cartan_program(self.cartan_params(), split=bool(p.get("split", True)))
        else:
            layers = [tuple(float(a) for a in layer) for layer in p["layers"]]
            prog = su2d_program(layers, int(p["d"]), p.get("alice"))
        return MeasurementScheme(prog, self)

    def cartan_params(self) -> CartanParams:
        p = self.params
        trip = lambda key: tuple(float(a) for a in p.get(key, (0.0, 0.0, 0.0)))
        return CartanParams(float(p["xi1"]), float(p["xi2"]), float(p["xi3"]),
                            trip("va"), trip("vb"), trip("wa"), trip("wb"))

    def declared_states(self) -> np.ndarray:
        """Rows form the eigenbasis of the observable, defined independently of any program."""
        p = self.params
        k = self.kind
        if k == "bell":
            return BELL_STATES.astype(complex)
        if k == "twisted":
            return twisted_basis_states(float(p["theta"]), float(p["phi"]))
        if k == "entangled_pair":
            return entangled_pair_basis_states(*(float(p[x]) for x in
                                                 ("theta1", "phi1", "theta2", "phi2")))
        if k == "cartan":
            return self.cartan_params().unitary().conj()
        if k == "state_verify":
            target = _cvec(p["target"])
            target = target / np.linalg.norm(target)
            # target first, then an orthonormal completion
            q, _ = np.linalg.qr(np.column_stack([target, np.eye(len(target))]))
            rows = q.T.copy()
            rows[0] = target
            return rows
        return self.build().program.unitary().conj()

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, **_jsonable(self.params)})

    @classmethod
    def from_json(cls, text: str | dict) -> "ObservableSpec":
        d = dict(json.loads(text) if isinstance(text, str) else text)
        kind = d.pop("kind", None)
        if kind is None:
            raise ValueError("observable needs a 'kind'")
        return cls(kind, d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, StabilizerGate):
        return {"kind": obj.kind, "qubits": list(obj.qubits), "sign": obj.sign}
    if isinstance(obj, np.ndarray):
        return _pairs(obj) if np.iscomplexobj(obj) else obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


# -- schemes -----------------------------------------------------------------------

@dataclass
class MeasurementScheme:
    program: RotationProgram
    observable: ObservableSpec | None = None

    @property
    def n(self) -> int:
        return self.program.n

    @property
    def plan(self) -> ConcatSpec:
        """Channel plan: the concatenation of chains the program will open."""
        return program_concat_spec(self.program)

    def reconcile(self, tA: Transcript, tB: Transcript):
        return reconcile(tA, tB, self)

    def eigenstates(self) -> dict:
        """Label -> declared eigenstates, each checked to give that label with certainty."""
        rows = (self.observable.declared_states() if self.observable is not None
                else self.program.unitary().conj())
        gram = rows.conj() @ rows.T
        if not np.allclose(gram, np.eye(len(rows)), atol=ORTHO_TOL):
            raise ValueError("declared eigenstates are not orthonormal")
        out: dict = {}
        for row in rows:
            probs = self.program.born_probabilities(row)
            label, top = max(probs.items(), key=lambda kv: kv[1])
            if abs(top - 1) > 1e-9:
                raise ValueError("program does not measure the declared eigenbasis")
            out.setdefault(label, []).append(row)
        return out


class SchemeRun(NamedTuple):
    transcripts: tuple
    label: object
    ebits: int
    exhausted: bool
    registry: ChannelRegistry


def run_scheme(scheme: MeasurementScheme, state: StateVector, rng: np.random.Generator,
               mode: str = "exact", track_redundant: bool = True, cap: int = DEFAULT_CAP,
               incoming: PauliString | None = None) -> SchemeRun:
    """One trial. A run that hits the safety cap has ``label=None`` and ``exhausted=True``."""
    if state.width != scheme.n:
        raise ValueError(f"input has {state.width} qubits, scheme needs {scheme.n}")
    ex = execute(scheme.program, state, rng, mode=mode, track_redundant=track_redundant,
                 cap=cap, incoming=incoming)
    tA, tB = ex.transcripts["A"], ex.transcripts["B"]
    label = None
    if not ex.exhausted:
        label = scheme.reconcile(tA, tB)
    return SchemeRun((tA, tB), label, ex.ebits, ex.exhausted, ex.registry)


def reconcile(tA: Transcript, tB: Transcript, scheme):
    """Outcome label from the two transcripts; raises on inconsistent records."""
    program = scheme.program if isinstance(scheme, MeasurementScheme) else scheme
    return _reconcile_program(tA, tB, program)


def stabilizer_scheme(v_a, v_b, circuit, alice=None, label_qubits=None,
                      observable: ObservableSpec | None = None) -> MeasurementScheme:
    """Measure in the basis ``(V_A x V_B) C^dagger |k>`` for a stabilizer circuit ``C``.

    Each party undoes its local unitary, Bob teleports his qubits over, and
    Alice runs ``C`` and reads everything in z. Pauli distortions pass
    through ``C`` as Paulis, so only the localization ebits are spent.
    """
    v_a = np.asarray(v_a, dtype=complex)
    v_b = np.asarray(v_b, dtype=complex)
    na = int(round(math.log2(v_a.shape[0])))
    nb = int(round(math.log2(v_b.shape[0])))
    n = na + nb
    alice = tuple(range(na)) if alice is None else tuple(alice)
    if len(alice) != na:
        raise ValueError("V_A size does not match Alice's qubits")
    bob = tuple(q for q in range(n) if q not in alice)
    items: list = [LocalUnitary("A", alice, v_a.conj().T), LocalUnitary("B", bob, v_b.conj().T),
                   Localize(bob)]
    for g in circuit:
        if not isinstance(g, StabilizerGate):
            raise TypeError(f"stabilizer circuits take StabilizerGate only, got {g!r}")
        if any(q >= n for q in g.qubits):
            raise ValueError(f"gate {g} acts outside the {n}-qubit register")
        items.append(Clifford(g))
    items.append(MeasureZ(tuple(range(n))))
    lq = tuple(range(n)) if label_qubits is None else tuple(label_qubits)
    prog = RotationProgram(n, alice, bob, tuple(items), lq, name="stabilizer")
    if observable is None:
        observable = ObservableSpec("stabilizer", {"v_a": v_a, "v_b": v_b,
                                                   "circuit": list(circuit), "alice": alice})
    return MeasurementScheme(prog, observable)


def bell_scheme() -> MeasurementScheme:
    """Bell measurement with one ebit: label ``k`` for ``Phi_k`` (X=1, Z=2, Y=3)."""
    gates = [StabilizerGate("cnot", (0, 1)), StabilizerGate("h", (0,))]
    eye = np.eye(2, dtype=complex)
    sch = stabilizer_scheme(eye, eye, gates, label_qubits=(1, 0),
                            observable=ObservableSpec("bell"))
    sch.program.name = "bell"
    return sch


def ghz_scheme() -> MeasurementScheme:
    """GHZ-basis measurement of three qubits, Alice holding two of them."""
    gates = [StabilizerGate("cnot", (0, 1)), StabilizerGate("cnot", (0, 2)),
             StabilizerGate("h", (0,))]
    return stabilizer_scheme(np.eye(4), np.eye(2), gates)


def ghz_states() -> np.ndarray:
    """The eight states ``(|0 x> +- |1 ~x>)/sqrt 2``; row ``k`` has sign bit ``k & 1``."""
    rows = np.zeros((8, 8), dtype=complex)
    for k in range(8):
        sign = -1 if k & 1 else 1
        x = k & 6                       # bits of qubits 1 and 2
        rows[k, x] = 1 / math.sqrt(2)
        rows[k, x ^ 7] = sign / math.sqrt(2)
    return rows


def local_bell_outcomes(tA: Transcript, tB: Transcript) -> tuple[int, int]:
    """Each party's own Bell-measurement label in the Bell scheme."""
    raw = [r for r in tA if r["action"] == "measure"][0]["outcome"]
    a = raw[1] | (raw[0] << 1)
    b_text = [r for r in tB if r["action"] == "send"][0]["outcome"]
    b = PauliString.parse(b_text)
    return a, (b.x & 1) | ((b.z & 1) << 1)


# -- truncated Vaidman baseline ----------------------------------------------------

def _pauli_matrix(p: PauliString) -> np.ndarray:
    return p.unsigned().matrix()


@dataclass
class VaidmanTree:
    """Corrections Alice applies on a truncated Vaidman tree, built lazily.

    Keys are distortion histories: the tuple of Bob's failed outcomes that
    leads to a cluster. ``history_unitary[key]`` is everything applied to the
    system before Alice's correction in that cluster, assuming Bob's latest
    teleportation was clean, and ``corrections[key] @ history_unitary[key] == U``.
    """

    target: np.ndarray
    d: int
    depth: int
    alice_width: int
    corrections: dict = field(default_factory=dict)
    history_unitary: dict = field(default_factory=dict)

    def clusters(self, level: int) -> int:
        return (4 ** self.d - 1) ** (level - 1)

    @property
    def ebits(self) -> int:
        """Alice acts on every cluster up to the truncation depth, using both its channels."""
        return self.alice_width + 2 * self.d * sum(self.clusters(l)
                                                   for l in range(1, self.depth + 1))

    def correct(self, key: tuple, history: np.ndarray) -> np.ndarray:
        u = self.target @ history.conj().T
        self.history_unitary[key] = history
        self.corrections[key] = u
        return u

    def max_correction_error(self) -> float:
        return max((float(np.abs(self.corrections[k] @ self.history_unitary[k]
                                  - self.target).max()) for k in self.corrections), default=0.0)


@dataclass
class VaidmanResult:
    success: bool
    label: int | None
    rounds: int
    ebits: int
    tree: VaidmanTree


def vaidman_success_probability(d: int, depth: int) -> float:
    return 1 - (1 - 4.0 ** -d) ** depth


def truncated_vaidman(U, d: int, depth: int, rng: np.random.Generator,
                      state: StateVector | None = None) -> VaidmanResult:
    """Vaidman's recursive scheme cut off after ``depth`` rounds.

    Alice first teleports her ``d // 2`` qubits to Bob, a distortion she
    knows. Each round Bob sends the whole ``d``-qubit system to Alice, who
    applies the correction for the history of that branch and sends it
    back. The round succeeds when Bob's send was undistorted, probability
    ``4^-d``; then Bob reads the system in z. Alice's own outcomes are
    random per cluster, so only corrections on Bob's path are built here;
    the ledger still counts every cluster Alice must act on.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape != (1 << d, 1 << d):
        raise ValueError("U must be a 2^d x 2^d matrix")
    if not (1 <= d <= 2 and 1 <= depth <= 4):
        raise ValueError("desk scale only: d <= 2 and depth <= 4")
    psi = (StateVector.zero(d) if state is None else state).amps.copy()
    tree = VaidmanTree(U, d, depth, d // 2)
    alice = tuple(range(d // 2))
    a0 = random_pauli(d, rng)
    a0 = PauliString.from_axes([a0.axes[q] if q in alice else 0 for q in range(d)])
    psi = _pauli_matrix(a0) @ psi
    history = _pauli_matrix(a0)
    key: tuple = ()
    for rnd in range(1, depth + 1):
        b = random_pauli(d, rng)
        psi = _pauli_matrix(b) @ psi
        corr = tree.correct(key, history)
        psi = corr @ psi
        a = random_pauli(d, rng)
        psi = _pauli_matrix(a) @ psi
        if b.is_identity():
            probs = np.abs(psi) ** 2
            raw = int(rng.choice(len(psi), p=probs / probs.sum()))
            return VaidmanResult(True, raw ^ a.x, rnd, tree.ebits, tree)
        history = _pauli_matrix(a) @ corr @ _pauli_matrix(b) @ history
        key = key + (b.label(),)
    return VaidmanResult(False, None, depth, tree.ebits, tree)
