"""Pauli strings, Bell labels and stabilizer-gate propagation.

A Pauli string on ``n`` qubits is stored as two bitmasks plus a power of ``i``::

    P = i**phase * sigma(x_0, z_0) (x) ... (x) sigma(x_{n-1}, z_{n-1})

with ``sigma(0,0)=I, sigma(1,0)=X, sigma(0,1)=Z, sigma(1,1)=Y``. Bit ``q`` of
each mask refers to qubit ``q``; qubit 0 is the least significant bit of a
state-vector index.

Single-qubit axes use the integer code 0 -> I, 1 -> X, 2 -> Z, 3 -> Y, which
is also the 2-bit encoding ``x + 2*z``. Bell labels use the same code:
``|Phi_k> = (I (x) sigma_k)|Phi_0>``, so combining labels is bitwise XOR.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

AXIS_CHARS = "IXZY"
_PHASE_PREFIX = {"+": 0, "+i": 1, "-": 2, "-i": 3, "": 0, "i": 1}
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}

I2 = np.eye(2, dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
AXIS_MATRICES = (I2, X2, Z2, Y2)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliString:
    """Immutable Pauli string ``i**phase * sigma_x-mask,z-mask``."""

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Pauli string needs at least one qubit")
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise ValueError("bitmask exceeds register width")
        object.__setattr__(self, "phase", self.phase % 4)

    # construction -------------------------------------------------------
    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def from_axes(cls, axes, phase: int = 0) -> "PauliString":
        """Build from a sequence of axis codes (0..3), qubit 0 first."""
        x = z = 0
        for q, code in enumerate(axes):
            code = int(code)
            if code not in (0, 1, 2, 3):
                raise ValueError(f"axis code {code} not in 0..3")
            x |= (code & 1) << q
            z |= ((code >> 1) & 1) << q
        return cls(len(axes), x, z, phase)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """Parse e.g. ``"XZIY"``, ``"-iZZ"``; character ``q`` is qubit ``q``."""
        text = text.strip()
        body = text.lstrip("+-i")
        prefix = text[: len(text) - len(body)]
        if prefix not in _PHASE_PREFIX or not body:
            raise ValueError(f"bad Pauli string {text!r}")
        try:
            codes = [AXIS_CHARS.index(c) for c in body.upper()]
        except ValueError:
            raise ValueError(f"bad Pauli string {text!r}") from None
        return cls.from_axes(codes, _PHASE_PREFIX[prefix])

    @classmethod
    def single(cls, n: int, qubit: int, code: int) -> "PauliString":
        axes = [0] * n
        axes[qubit] = code
        return cls.from_axes(axes)

    # views ----------------------------------------------------------------
    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(((self.x >> q) & 1) | (((self.z >> q) & 1) << 1) for q in range(self.n))

    @property
    def support(self) -> int:
        return self.x | self.z

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    def is_identity(self) -> bool:
        return self.x == 0 and self.z == 0

    def unsigned(self) -> "PauliString":
        return PauliString(self.n, self.x, self.z, 0)

    def __str__(self) -> str:
        return _PHASE_TEXT[self.phase] + "".join(AXIS_CHARS[c] for c in self.axes)

    def label(self) -> str:
        """Axis text without phase."""
        return "".join(AXIS_CHARS[c] for c in self.axes)

    def matrix(self) -> np.ndarray:
        """Dense 2^n x 2^n matrix (qubit 0 least significant)."""
        m = np.array([[1j**self.phase]], dtype=complex)
        for code in self.axes:
            m = np.kron(AXIS_MATRICES[code], m)
        return m

    def restrict(self, mask: int) -> "PauliString":
        """Zero every position outside ``mask``; phase is dropped."""
        return PauliString(self.n, self.x & mask, self.z & mask, 0)

    def __mul__(self, other: "PauliString") -> "PauliString":
        return multiply(self, other)


def _check_width(p: PauliString, q: PauliString):
    if p.n != q.n:
        raise ValueError(f"Pauli width mismatch: {p.n} vs {q.n}")


def commutes(p: PauliString, q: PauliString) -> bool:
    """True iff the two strings commute (phases are irrelevant)."""
    _check_width(p, q)
    return (_popcount(p.x & q.z) + _popcount(p.z & q.x)) % 2 == 0


def commutes_masks(px: int, pz: int, qx: int, qz: int) -> bool:
    """Bitmask form of :func:`commutes` for hot loops."""
    return (_popcount(px & qz) + _popcount(pz & qx)) % 2 == 0


def multiply(p: PauliString, q: PauliString) -> PauliString:
    """Exact operator product ``p @ q`` including the power of ``i``."""
    _check_width(p, q)
    x3, z3 = p.x ^ q.x, p.z ^ q.z
    k = (
        p.phase
        + q.phase
        + _popcount(p.x & p.z)
        + _popcount(q.x & q.z)
        + 2 * _popcount(p.z & q.x)
        - _popcount(x3 & z3)
    )
    return PauliString(p.n, x3, z3, k)


def equal_up_to_phase(p: PauliString, q: PauliString) -> bool:
    return p.n == q.n and p.x == q.x and p.z == q.z


def random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    """Uniform phase-free Pauli string."""
    bits = int(rng.integers(0, 1 << (2 * n)))
    return PauliString(n, bits & ((1 << n) - 1), bits >> n)


def all_paulis(n: int):
    for bits in range(1 << (2 * n)):
        yield PauliString(n, bits & ((1 << n) - 1), bits >> n)


# --------------------------------------------------------------------------
# Bell labels

def compose_bell_labels(a: int, b: int) -> int:
    """Global Bell outcome from the two local Bell-measurement labels.

    With ``Phi_1 ~ X, Phi_2 ~ Z, Phi_3 ~ Y`` the label is the 2-bit code of a
    Pauli, and combining two distortions multiplies the Paulis, i.e. XOR::

        a\\b | 0 1 2 3
        ----+--------
         0  | 0 1 2 3
         1  | 1 0 3 2
         2  | 2 3 0 1
         3  | 3 2 1 0
    """
    for v in (a, b):
        if v not in (0, 1, 2, 3):
            raise ValueError(f"Bell label {v} not in 0..3")
    return a ^ b


def bell_label_of(p: PauliString, qubit: int = 0) -> int:
    return ((p.x >> qubit) & 1) | (((p.z >> qubit) & 1) << 1)


# --------------------------------------------------------------------------
# Stabilizer gates

@dataclass(frozen=True)
class StabilizerGate:
    """One of CNOT(control, target), H, S or R_y(sign*pi/2) on given qubits."""

    kind: str
    qubits: tuple[int, ...]
    sign: int = 1

    def __post_init__(self):
        arity = {"cnot": 2, "h": 1, "s": 1, "ry_half": 1}
        if self.kind not in arity:
            raise ValueError(f"unknown stabilizer gate {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != arity[self.kind]:
            raise ValueError(f"{self.kind} takes {arity[self.kind]} qubit(s)")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("gate qubits must be distinct")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def local_matrix(self) -> np.ndarray:
        """Matrix on ``self.qubits`` with ``qubits[0]`` least significant."""
        if self.kind == "cnot":
            m = np.eye(4, dtype=complex)
            m[[1, 3]] = m[[3, 1]]
            return m
        if self.kind == "h":
            return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
        if self.kind == "s":
            return np.diag([1, 1j]).astype(complex)
        return rotation_matrix(Y2, self.sign * np.pi / 2)


def rotation_matrix(pauli_matrix: np.ndarray, theta: float) -> np.ndarray:
    """``exp(-i theta P / 2)`` for an involutory ``P``."""
    dim = pauli_matrix.shape[0]
    return np.cos(theta / 2) * np.eye(dim) - 1j * np.sin(theta / 2) * pauli_matrix


def _decompose_local(m: np.ndarray, k: int) -> tuple[PauliString, int]:
    """Identify a k-qubit matrix known to be ``i**e * Pauli``."""
    dim = 1 << k
    for p in all_paulis(k):
        c = np.trace(p.matrix().conj().T @ m) / dim
        if abs(abs(c) - 1) < 1e-9:
            e = int(round(np.angle(c) / (np.pi / 2))) % 4
            if abs(c - 1j**e) > 1e-9:
                break
            return p, e
    raise ValueError("matrix is not a scaled Pauli string")


@lru_cache(maxsize=None)
def _local_image(kind: str, sign: int, backward: bool, axes: tuple) -> tuple[int, int, int]:
    """(x, z, phase) of the gate-conjugated local Pauli; a few dozen entries in all."""
    u = StabilizerGate(kind, tuple(range(len(axes))), sign).local_matrix()
    if backward:
        u = u.conj().T
    new, e = _decompose_local(u @ PauliString.from_axes(axes).matrix() @ u.conj().T, len(axes))
    return new.x, new.z, e


def _conjugate_local(p: PauliString, g: StabilizerGate, backward: bool = False) -> PauliString:
    axes = p.axes
    nx, nz, e = _local_image(g.kind, g.sign, backward, tuple(axes[q] for q in g.qubits))
    x, z = p.x, p.z
    for i, q in enumerate(g.qubits):
        bit = 1 << q
        x = (x & ~bit) | (((nx >> i) & 1) << q)
        z = (z & ~bit) | (((nz >> i) & 1) << q)
    # phase of the untouched part is unchanged; Y-content on touched qubits is
    # already folded into the sigma convention of both locals
    return PauliString(p.n, x, z, p.phase + e)


def propagate_through_stabilizer(g: StabilizerGate, p: PauliString) -> PauliString:
    """Return ``p'`` with ``g p = p' g`` exactly, i.e. ``p' = g p g^dagger``."""
    if max(g.qubits) >= p.n:
        raise IndexError("gate qubit outside Pauli register")
    if not p.support & sum(1 << q for q in g.qubits):
        return p
    return _conjugate_local(p, g)


def propagate_backward(g: StabilizerGate, p: PauliString) -> PauliString:
    """Inverse of :func:`propagate_through_stabilizer`: ``g^dagger p g``."""
    if max(g.qubits) >= p.n:
        raise IndexError("gate qubit outside Pauli register")
    return _conjugate_local(p, g, backward=True)


def propagate_through_rotation(p: PauliString, axis: PauliString, theta: float) -> PauliString:
    """``R p R^dagger`` for ``R = R_axis(theta)`` with theta a multiple of pi/2."""
    _check_width(p, axis)
    k = theta / (np.pi / 2)
    kr = int(round(k))
    if abs(k - kr) > 1e-9:
        raise ValueError("rotation is not a stabilizer (angle not a multiple of pi/2)")
    if commutes(p, axis):
        return p
    # anticommuting: R p R^dag = p R_axis(-2 theta) = p (cos(theta) + i sin(theta) axis)
    kr %= 4
    if kr == 0:
        return p
    if kr == 2:
        return PauliString(p.n, p.x, p.z, p.phase + 2)
    unit = axis.unsigned()
    # cos(theta) = 0, sin(theta) = +-1
    s = 1 if kr == 1 else 3
    return multiply(p, PauliString(unit.n, unit.x, unit.z, unit.phase + s))


def is_clifford_angle(theta: float, tol: float = 1e-12) -> bool:
    k = theta / (np.pi / 2)
    return abs(k - round(k)) < tol
