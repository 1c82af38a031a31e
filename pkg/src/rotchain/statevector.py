"""Dense state-vector simulation with labelled qubits.

Qubits carry hashable labels so that protocols can add ancillas, measure
and remove qubits, and relabel teleported qubits without tracking index
shifts. ``labels[k]`` is the qubit stored at bit ``k`` of the amplitude index
(little-endian: ``labels[0]`` is least significant).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .pauli import PauliString

NORM_TOL = 1e-10
UNITARY_TOL = 1e-10
EXACT_TOL = 1e-12

_SQ2 = 1 / np.sqrt(2)
# Bell states on (first, second) with first least significant: |Phi_k> = (I x sigma_k)|Phi_0>
BELL_STATES = np.array(
    [
        [_SQ2, 0, 0, _SQ2],
        [0, _SQ2, _SQ2, 0],
        [_SQ2, 0, 0, -_SQ2],
        [0, -1j * _SQ2, 1j * _SQ2, 0],
    ],
    dtype=complex,
)


class StateVector:
    """Normalized ``2**width`` amplitude vector over labelled qubits."""

    __slots__ = ("amps", "labels")

    def __init__(self, amps, labels=None, check: bool = True):
        amps = np.asarray(amps, dtype=complex).ravel()
        n = int(round(np.log2(amps.size))) if amps.size else 0
        if amps.size != 1 << n or n < 1:
            raise ValueError("amplitude count must be a power of two >= 2")
        labels = tuple(range(n)) if labels is None else tuple(labels)
        if len(labels) != n or len(set(labels)) != n:
            raise ValueError("labels must be distinct, one per qubit")
        if check and abs(np.vdot(amps, amps).real - 1) > NORM_TOL:
            raise ValueError("state is not normalized")
        self.amps = amps
        self.labels = labels

    @classmethod
    def zero(cls, n: int, labels=None) -> "StateVector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[0] = 1
        return cls(amps, labels)

    @classmethod
    def basis(cls, n: int, index: int, labels=None) -> "StateVector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[index] = 1
        return cls(amps, labels)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator, labels=None) -> "StateVector":
        v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
        return cls(v / np.linalg.norm(v), labels)

    @property
    def width(self) -> int:
        return len(self.labels)

    def pos(self, label) -> int:
        return self.labels.index(label)

    def copy(self) -> "StateVector":
        return StateVector(self.amps.copy(), self.labels, check=False)

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amps, self.amps).real))

    def reorder(self, labels) -> "StateVector":
        """Same state with qubits stored in the given label order."""
        labels = tuple(labels)
        if sorted(map(repr, labels)) != sorted(map(repr, self.labels)):
            raise ValueError("reorder needs a permutation of the labels")
        n = self.width
        t = self.amps.reshape([2] * n)
        # tensor axis a holds qubit at bit n-1-a
        src_axes = [n - 1 - self.pos(lab) for lab in reversed(labels)]
        return StateVector(np.transpose(t, src_axes).ravel(), labels, check=False)

    def to_json(self):
        return [[float(a.real), float(a.imag)] for a in self.amps]


def _complex_vector(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 2:
        return arr[:, 0] + 1j * arr[:, 1]
    if arr.ndim == 1:
        return arr.astype(complex)
    raise ValueError("amplitudes must be a list of reals or of [re, im] pairs")


def state_from_json(data) -> "StateVector":
    """Build a state from JSON text or already-parsed data.

    Accepts a list of amplitudes (reals or ``[re, im]`` pairs), ``{"amps": ...}``,
    or ``{"schmidt": {"coeffs": [...], "a": [...], "b": [...], "v": k}}`` with
    the local bases given row by row.
    """
    if isinstance(data, str):
        data = json.loads(data)
    if isinstance(data, dict) and "schmidt" in data:
        sd = data["schmidt"]
        a = [_complex_vector(r) for r in sd["a"]]
        b = [_complex_vector(r) for r in sd["b"]]
        coeffs = np.asarray(sd["coeffs"], dtype=float)
        form = SchmidtForm(coeffs, np.array(a), np.array(b),
                           (int(sd.get("v", int(np.log2(len(a[0]))))), int(np.log2(len(b[0])))))
        return StateVector(form.state())
    if isinstance(data, dict):
        data = data["amps"]
    return StateVector(_complex_vector(data))


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2`` after aligning qubit labels."""
    if a.labels != b.labels:
        b = b.reorder(a.labels)
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """``a (x) b`` with ``a``'s qubits kept least significant."""
    if set(a.labels) & set(b.labels):
        raise ValueError("tensor product needs disjoint labels")
    return StateVector(np.kron(b.amps, a.amps), a.labels + b.labels, check=False)


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol)


def apply_unitary(s: StateVector, u: np.ndarray, targets, check: bool = True) -> StateVector:
    """Apply ``u`` to ``targets`` (labels); ``targets[0]`` is u's least significant qubit."""
    targets = tuple(targets)
    k = len(targets)
    u = np.asarray(u, dtype=complex)
    if u.shape != (1 << k, 1 << k):
        raise ValueError("unitary size does not match target count")
    if len(set(targets)) != k:
        raise ValueError("targets must be distinct")
    if check and not is_unitary(u):
        raise ValueError("matrix is not unitary")
    n = s.width
    t = s.amps.reshape([2] * n)
    axes = [n - 1 - s.pos(q) for q in reversed(targets)]
    ut = u.reshape([2] * (2 * k))
    out = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return StateVector(out.ravel(), s.labels, check=False)


def _masks(s: StateVector, p: PauliString, qubits) -> tuple[int, int]:
    x = z = 0
    for i, q in enumerate(qubits):
        bit = 1 << s.pos(q)
        if (p.x >> i) & 1:
            x |= bit
        if (p.z >> i) & 1:
            z |= bit
    return x, z


def _parity(idx: np.ndarray, mask: int) -> np.ndarray:
    v = idx & mask
    par = np.zeros_like(v)
    while mask:
        par ^= v & 1
        v = v >> 1
        mask >>= 1
    return par


def apply_pauli(s: StateVector, p: PauliString, qubits=None) -> StateVector:
    """Apply the Pauli string ``p`` whose position ``i`` acts on ``qubits[i]``."""
    qubits = s.labels[: p.n] if qubits is None else tuple(qubits)
    if len(qubits) != p.n:
        raise ValueError("Pauli width does not match qubit list")
    x, z = _masks(s, p, qubits)
    idx = np.arange(s.amps.size)
    ph = 1j ** ((p.phase + bin(x & z).count("1")) % 4)
    signs = 1 - 2 * _parity(idx, z)
    out = np.empty_like(s.amps)
    out[idx ^ x] = ph * signs * s.amps
    return StateVector(out, s.labels, check=False)


def apply_rotation(s: StateVector, j: PauliString, theta: float, qubits=None) -> StateVector:
    """``R_j(theta) = exp(-i theta sigma_j / 2) = cos(theta/2) - i sin(theta/2) sigma_j``."""
    pj = apply_pauli(s, j.unsigned(), qubits)
    amps = np.cos(theta / 2) * s.amps - 1j * np.sin(theta / 2) * pj.amps
    return StateVector(amps, s.labels, check=False)


def _project_out(s: StateVector, qubits, vec: np.ndarray) -> np.ndarray:
    """Contract ``<vec|`` on ``qubits`` (qubits[0] least significant); remaining amps."""
    n = s.width
    k = len(qubits)
    t = s.amps.reshape([2] * n)
    axes = [n - 1 - s.pos(q) for q in reversed(qubits)]
    bra = np.asarray(vec).conj().reshape([2] * k)
    return np.tensordot(bra, t, axes=(list(range(k)), axes)).ravel()


def _remaining(s: StateVector, qubits) -> tuple:
    gone = set(qubits)
    return tuple(q for q in s.labels if q not in gone)


def probabilities_z(s: StateVector, qubit) -> np.ndarray:
    b = 1 << s.pos(qubit)
    idx = np.arange(s.amps.size)
    p1 = float(np.sum(np.abs(s.amps[(idx & b) != 0]) ** 2))
    return np.array([1 - p1, p1])


@dataclass
class MeasurementRecord:
    qubits: tuple
    basis: str
    outcome: int
    step: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        top = 4 if self.basis == "bell" else 2
        if not 0 <= self.outcome < top:
            raise ValueError("outcome outside basis range")


def measure_z(s: StateVector, qubit, rng: np.random.Generator, remove: bool = False):
    """Computational-basis measurement; returns ``(bit, post_state)``.

    With ``remove=True`` the measured qubit is dropped from the register.
    """
    p = probabilities_z(s, qubit)
    bit = int(rng.random() < p[1]) if 0 < p[1] < 1 else int(p[1] >= 0.5)
    vec = np.array([1.0, 0.0]) if bit == 0 else np.array([0.0, 1.0])
    if remove:
        if s.width == 1:
            raise ValueError("cannot remove the last qubit")
        rest = _project_out(s, (qubit,), vec)
        return bit, StateVector(rest / np.linalg.norm(rest), _remaining(s, (qubit,)), check=False)
    b = 1 << s.pos(qubit)
    idx = np.arange(s.amps.size)
    amps = np.where(((idx & b) != 0) == bool(bit), s.amps, 0)
    return bit, StateVector(amps / np.linalg.norm(amps), s.labels, check=False)


def bell_probabilities(s: StateVector, pair) -> np.ndarray:
    probs = np.array([np.linalg.norm(_project_out(s, pair, BELL_STATES[k])) ** 2 for k in range(4)])
    return probs


def bell_measure(s: StateVector, pair, rng: np.random.Generator):
    """Demolition Bell measurement of ``pair`` against ``|Phi_0..3>``.

    Returns ``(label, post_state)`` with the measured pair removed from the
    register. ``pair[0]`` plays the first tensor factor of ``|Phi_k>``.
    """
    pair = tuple(pair)
    if len(pair) != 2 or pair[0] == pair[1]:
        raise ValueError("Bell measurement needs two distinct qubits")
    rests = [_project_out(s, pair, BELL_STATES[k]) for k in range(4)]
    probs = np.array([np.vdot(r, r).real for r in rests])
    probs = probs / probs.sum()
    label = int(rng.choice(4, p=probs))
    rest = rests[label]
    labels = _remaining(s, pair)
    if not labels:
        return label, None
    return label, StateVector(rest / np.linalg.norm(rest), labels, check=False)


@dataclass
class SchmidtForm:
    """``sum_a coeffs[a] |basis_a[a]> (x) |basis_b[a]>`` over a (v, w) split."""

    coeffs: np.ndarray
    basis_a: np.ndarray  # shape (rank, 2**v)
    basis_b: np.ndarray  # shape (rank, 2**w)
    bipartition: tuple

    @property
    def rank(self) -> int:
        return len(self.coeffs)

    @property
    def qubits_needed(self) -> int:
        """``ceil(log2(rank))``."""
        return int(np.ceil(np.log2(self.rank))) if self.rank > 1 else 0

    def state(self) -> np.ndarray:
        v = self.bipartition[0]
        amps = sum(c * np.kron(b, a) for c, a, b in zip(self.coeffs, self.basis_a, self.basis_b))
        return np.asarray(amps).reshape(-1)


def schmidt(s: StateVector, v: int, tol: float = 1e-12) -> SchmidtForm:
    """Schmidt decomposition across the first ``v`` stored qubits vs the rest."""
    n = s.width
    w = n - v
    if not 1 <= v < n:
        raise ValueError("bipartition must leave qubits on both sides")
    # amplitude index = a + 2**v * b
    m = s.amps.reshape(1 << w, 1 << v).T
    u, sv, vh = np.linalg.svd(m, full_matrices=False)
    keep = sv > tol
    return SchmidtForm(sv[keep], u[:, keep].T, vh[keep], (v, w))
