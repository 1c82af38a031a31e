"""Turning target states and observables into rotation programs.

Conventions: qubit ``k`` is bit ``k`` of an amplitude index, rotations are
``R_P(t) = exp(-i t P / 2)``, and the Pauli text ``"YZ"`` means ``Y`` on
qubit 0 and ``Z`` on qubit 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import ChainProgram
from .pauli import PauliString, StabilizerGate, rotation_matrix, Y2, Z2
from .program import (Branch, Clifford, EarlyCheck, LocalUnitary, Localize, MeasureZ, Parallel,
                      Rotation, RotationProgram)
from .statevector import StateVector, schmidt
from .tree import ConcatSpec

MAX_UCR_CONTROLS = 6
_AXIS_CODE = {"y": 3, "z": 2}


def ry(t: float) -> np.ndarray:
    return rotation_matrix(Y2, t)


def rz(t: float) -> np.ndarray:
    return rotation_matrix(Z2, t)


def euler_matrix(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """``R_z(alpha) R_y(beta) R_z(gamma)``."""
    return rz(alpha) @ ry(beta) @ rz(gamma)


# -- uniformly controlled rotations ------------------------------------------

@dataclass(frozen=True)
class UCRGate:
    """Rotate ``target`` about ``axis`` by ``angles[c]``, ``c`` the control pattern.

    ``c = sum(bit(controls[i]) << i)``: the first control is least significant.
    """

    controls: tuple
    target: int
    axis: str
    angles: tuple

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if self.axis not in _AXIS_CODE:
            raise ValueError("axis must be 'y' or 'z'")
        if len(set(self.controls)) != len(self.controls) or self.target in self.controls:
            raise ValueError("controls must be distinct and exclude the target")
        if len(self.angles) != 1 << len(self.controls):
            raise ValueError("need one angle per control pattern")

    @property
    def k(self) -> int:
        return len(self.controls)

    def matrix(self, n: int) -> np.ndarray:
        """Dense ``2**n`` matrix (oracle)."""
        base = Y2 if self.axis == "y" else Z2
        dim = 1 << n
        u = np.zeros((dim, dim), dtype=complex)
        tbit = 1 << self.target
        for idx in range(dim):
            if idx & tbit:
                continue
            c = sum(((idx >> q) & 1) << i for i, q in enumerate(self.controls))
            r = rotation_matrix(base, self.angles[c])
            for a in range(2):
                for b in range(2):
                    u[idx | (a * tbit), idx | (b * tbit)] = r[a, b]
        return u


def ucr_to_rotations(gate: UCRGate, n: int) -> list[tuple[PauliString, float]]:
    """Commuting Pauli rotations whose product is ``gate`` exactly.

    The rotation for control subset ``S`` carries ``Z`` on ``S`` and the gate
    axis on the target; its angle is the signed Walsh average
    ``2**-k * sum_c (-1)**popcount(c & S) * angles[c]``.
    """
    k = gate.k
    if k > MAX_UCR_CONTROLS:
        raise ValueError(f"at most {MAX_UCR_CONTROLS} controls supported")
    theta = np.asarray(gate.angles)
    c = np.arange(1 << k)
    out = []
    for s in range(1 << k):
        signs = 1 - 2 * (np.array([bin(v & s).count("1") for v in c]) & 1)
        xi = float(signs @ theta) / (1 << k)
        axes = [0] * n
        axes[gate.target] = _AXIS_CODE[gate.axis]
        for i, q in enumerate(gate.controls):
            if (s >> i) & 1:
                axes[q] = 2
        out.append((PauliString.from_axes(axes), xi))
    return out


def exponent_angles(rotations) -> list[float]:
    """Angles in the ``exp(+i xi P)`` convention used for printed circuit tables."""
    return [-theta / 2 for _, theta in rotations]


def rotations_unitary(rotations, n: int) -> np.ndarray:
    u = np.eye(1 << n, dtype=complex)
    for p, t in rotations:
        u = rotation_matrix(p.matrix(), t) @ u
    return u


# -- Schmidt superposition states ---------------------------------------------

def coefficients_to_angles(lam) -> np.ndarray:
    """Angles ``theta_0 .. theta_{2^d-2}`` generating amplitudes ``lam``.

    ``lam`` is indexed by ``x_1 x_2 ... x_d`` read as a binary number with
    ``x_1`` most significant. Each angle splits the weight of a subtree;
    subtrees of zero weight get angle 0.
    """
    lam = np.asarray(lam, dtype=float)
    d = int(round(math.log2(lam.size)))
    if lam.size != 1 << d or d < 1:
        raise ValueError("need 2**d coefficients with d >= 1")
    if np.any(lam < 0):
        raise ValueError("coefficients must be nonnegative")
    if abs(float(lam @ lam) - 1) > 1e-10:
        raise ValueError("coefficients must be normalized")
    angles = np.zeros((1 << d) - 1)
    for level in range(1, d + 1):
        width = 1 << (d - level + 1)  # leaves under one node at this level
        for prefix in range(1 << (level - 1)):
            block = lam[prefix * width:(prefix + 1) * width]
            left = np.linalg.norm(block[: width // 2])
            right = np.linalg.norm(block[width // 2:])
            if left + right > 0:
                angles[(1 << (level - 1)) - 1 + prefix] = 2 * math.atan2(right, left)
    return angles


def angles_to_coefficients(angles) -> np.ndarray:
    """The product-of-cosines formula mapping angles back to amplitudes."""
    angles = np.asarray(angles, dtype=float)
    d = int(round(math.log2(angles.size + 1)))
    if angles.size != (1 << d) - 1:
        raise ValueError("need 2**d - 1 angles")
    lam = np.ones(1 << d)
    for x in range(1 << d):
        for level in range(1, d + 1):
            prefix = x >> (d - level + 1)
            bit = (x >> (d - level)) & 1
            big = angles[(1 << (level - 1)) - 1 + prefix] - math.pi * bit
            lam[x] *= math.cos(big / 2)
    return lam


def _msb_first_index(x: int, d: int) -> int:
    """``x_1`` (most significant) lives on qubit 0."""
    return sum(((x >> (d - 1 - k)) & 1) << k for k in range(d))


def coefficient_tree_circuit(angles, d: int, qubits=None) -> list[UCRGate]:
    """Cascade of y-axis UCRs preparing the coefficient state from ``|0...0>``.

    Level ``k`` targets ``qubits[k-1]`` controlled by the earlier qubits.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.size != (1 << d) - 1:
        raise ValueError("need 2**d - 1 angles")
    qubits = tuple(range(d)) if qubits is None else tuple(qubits)
    gates = []
    for level in range(1, d + 1):
        controls = qubits[: level - 1]
        table = []
        for c in range(1 << (level - 1)):
            # control pattern c has qubits[0] least significant; prefix has x_1 first
            prefix = sum(((c >> i) & 1) << (level - 2 - i) for i in range(level - 1))
            table.append(angles[(1 << (level - 1)) - 1 + prefix])
        gates.append(UCRGate(controls, qubits[level - 1], "y", tuple(table)))
    return gates


# aliases
lambda_to_angles = coefficients_to_angles
build_lambda_circuit = coefficient_tree_circuit


def coefficient_state(lam, d: int) -> np.ndarray:
    """Amplitude vector with coefficient ``x`` on the qubits spelling ``x``, first bit on qubit 0."""
    out = np.zeros(1 << d)
    for x, v in enumerate(np.asarray(lam, dtype=float)):
        out[_msb_first_index(x, d)] = v
    return out


def _complete_unitary(rows: np.ndarray) -> np.ndarray:
    """Unitary whose first ``len(rows)`` columns are ``rows`` (orthonormal)."""
    k, dim = rows.shape
    m = np.concatenate([rows.T, np.eye(dim, dtype=complex)], axis=1)
    q, _ = np.linalg.qr(m)
    # qr may flip phases of the leading columns; restore them exactly
    q[:, :k] = rows.T
    rest = q[:, k:dim]
    rest = rest - rows.T @ (rows.conj() @ rest)
    q2, _ = np.linalg.qr(rest)
    return np.concatenate([rows.T, q2], axis=1)


@dataclass
class SchmidtPrep:
    """Local circuit preparing a bipartite state: cascade, staircase, locals."""

    v: int
    w: int
    d: int
    cascade: list
    staircase: list
    local_a: np.ndarray
    local_b: np.ndarray

    def matrix(self) -> np.ndarray:
        from .program import _embed

        n = self.v + self.w
        u = np.eye(1 << n, dtype=complex)
        for g in self.cascade:
            u = g.matrix(n) @ u
        for g in self.staircase:
            u = _embed(g.local_matrix(), g.qubits, n) @ u
        u = _embed(self.local_a, tuple(range(self.v)), n) @ u
        u = _embed(self.local_b, tuple(range(self.v, n)), n) @ u
        return u

    def state(self) -> np.ndarray:
        return self.matrix()[:, 0]


def build_schmidt_prep(form) -> SchmidtPrep:
    """Circuit taking ``|0...0>`` to the state described by a :class:`SchmidtForm`."""
    v, w = form.bipartition
    chi = form.rank
    d = form.qubits_needed
    if d > 4:
        raise ValueError("Schmidt rank too large for desk-scale synthesis")
    ua = _complete_unitary(np.asarray(form.basis_a)[:chi])
    ub = _complete_unitary(np.asarray(form.basis_b)[:chi])
    if d == 0:
        return SchmidtPrep(v, w, 0, [], [], ua, ub)
    lam = np.zeros(1 << d)
    coeffs = np.asarray(form.coeffs, dtype=float)
    # Schmidt index alpha sits on qubits 0..d-1 little-endian; lambda is x_1-major
    for alpha, c in enumerate(coeffs):
        x = sum(((alpha >> k) & 1) << (d - 1 - k) for k in range(d))
        lam[x] = c
    lam /= np.linalg.norm(lam)
    cascade = coefficient_tree_circuit(coefficients_to_angles(lam), d)
    stairs = [StabilizerGate("cnot", (k, v + k)) for k in range(d)]
    return SchmidtPrep(v, w, d, cascade, stairs, ua, ub)


# -- verification programs ------------------------------------------------------

def multi_qubit_verification_program(target, bipartition) -> RotationProgram:
    """Verify ``target`` on ``v + w`` qubits; label 0 means 'yes', 1 'no'."""
    v, w = bipartition
    if not (1 <= v <= 4 and 1 <= w <= 4):
        raise ValueError("each side must hold 1..4 qubits")
    state = target if isinstance(target, StateVector) else StateVector(target)
    if state.width != v + w:
        raise ValueError("target width does not match the bipartition")
    prep = build_schmidt_prep(schmidt(state, v))
    n, d = v + w, prep.d
    alice = tuple(range(v))
    bob = tuple(range(v, n))
    items = [LocalUnitary("A", alice, prep.local_a.conj().T),
             LocalUnitary("B", bob, prep.local_b.conj().T)]
    if d < v:
        items.append(EarlyCheck("A", tuple(range(d, v))))
    if d < w:
        items.append(EarlyCheck("B", tuple(range(v + d, n))))
    label_qubits: tuple = ()
    if d:
        items.append(Localize(tuple(range(v, v + d))))
        items += [Clifford(g) for g in prep.staircase]
        items.append(MeasureZ(tuple(range(v, v + d))))
        for gate in reversed(prep.cascade):
            inverse = UCRGate(gate.controls, gate.target, "y", tuple(-a for a in gate.angles))
            items += [Rotation(p, t) for p, t in ucr_to_rotations(inverse, n)
                      if abs(t) > 1e-15]
        items.append(MeasureZ(tuple(range(d))))
        label_qubits = tuple(range(d)) + tuple(range(v, v + d))
    labels = {k: (0 if k == 0 else 1) for k in range(1 << len(label_qubits))}
    return RotationProgram(n, alice, bob, tuple(items), label_qubits, labels,
                           name=f"verify-{v}+{w}", meta={"early_label": 1, "schmidt_qubits": d})


def two_qubit_verification_program(target) -> RotationProgram:
    """Verification of a two-qubit state; outcome 0 is the target itself.

    The other three labels identify the remaining members of the eigenbasis
    (qubit A's bit plus twice the received qubit's bit).
    """
    prog = multi_qubit_verification_program(target, (1, 1))
    prog.labels = None
    prog.name = "verify-2"
    return prog


def schmidt_angle(target) -> float:
    """``theta`` in ``cos(theta/2)|00> + sin(theta/2)|11>`` after local rotations."""
    state = target if isinstance(target, StateVector) else StateVector(target)
    c = schmidt(state, 1).coeffs
    return 2 * math.atan2(c[1] if c.size > 1 else 0.0, c[0])


# -- two-qubit observables ------------------------------------------------------

def twisted_basis_states(theta: float, phi: float) -> np.ndarray:
    """Rows are the four basis states (qubit A = 0, qubit B = 1)."""
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    e = np.exp(1j * phi)
    st = np.zeros((4, 4), dtype=complex)
    st[0, 0] = 1              # |0>_A|0>_B
    st[1, 2] = 1              # |0>_A|1>_B
    st[2, 1], st[2, 3] = s, e * c
    st[3, 1], st[3, 3] = c, -e * s
    return st


def twisted_basis_program(theta: float, phi: float) -> RotationProgram:
    """Alice reads A; only if it is 1 does she run a single-qubit chain on B."""
    items = (LocalUnitary("B", (1,), rz(-phi)),
             Localize((1,)),
             MeasureZ((0,)),
             Branch(0, 1, (Rotation(PauliString.parse("IY"), -(math.pi - theta)),)),
             MeasureZ((1,)))
    return RotationProgram(2, (0,), (1,), items, (1, 0), name="twisted",
                           meta={"theta": theta, "phi": phi})


def entangled_pair_basis_states(theta1, phi1, theta2, phi2) -> np.ndarray:
    """Rows are the four partially entangled basis states (A = qubit 0)."""
    st = np.zeros((4, 4), dtype=complex)
    for row, (t, f, lo, hi) in enumerate([(theta1, phi1, 0, 3), (theta1, phi1, 0, 3),
                                          (theta2, phi2, 2, 1), (theta2, phi2, 2, 1)]):
        s, c = math.sin(t / 2), math.cos(t / 2)
        e = np.exp(1j * f)
        if row % 2 == 0:
            st[row, lo], st[row, hi] = s, c * e
        else:
            st[row, lo], st[row, hi] = c, -s * e
    return st


def entangled_pair_prep(theta1, phi1, theta2, phi2) -> list:
    """Local preparation: two UCRs on A controlled by B, then CNOT A -> B."""
    fy = UCRGate((1,), 0, "y", (math.pi - theta1, math.pi - theta2))
    fz = UCRGate((1,), 0, "z", (phi1, phi2))
    return [fy, fz, StabilizerGate("cnot", (0, 1))]


def entangled_pair_basis_program(theta1, phi1, theta2, phi2) -> RotationProgram:
    """Inverse of :func:`entangled_pair_prep`, measuring B once it is free."""
    fy, fz, cnot = entangled_pair_prep(theta1, phi1, theta2, phi2)
    inv = []
    for g in (fz, fy):
        neg = UCRGate(g.controls, g.target, g.axis, tuple(-a for a in g.angles))
        # rotations touching B first, so B can be measured as early as possible
        rots = sorted(ucr_to_rotations(neg, 2), key=lambda r: -(r[0].support >> 1 & 1))
        inv += [Rotation(p, t) for p, t in rots]
    inv = [r for r in inv if abs(r.theta) > 1e-15]
    # hoist the single-qubit rotations past B's last use when they commute with it
    on_b = [r for r in inv if (r.axis.support >> 1) & 1]
    if on_b:
        last = max(i for i, r in enumerate(inv) if (r.axis.support >> 1) & 1)
    else:
        last = -1
    head, tail = inv[: last + 1], inv[last + 1:]
    items = [Localize((1,)), Clifford(cnot)] + head + [MeasureZ((1,))] + tail + [MeasureZ((0,))]
    return RotationProgram(2, (0,), (1,), tuple(items), (0, 1), name="entangled-pair",
                           meta={"angles": (theta1, phi1, theta2, phi2)})


@dataclass(frozen=True)
class CartanParams:
    """``U = (V_A x V_B) e^{i xi1 XX/2} e^{i xi2 YY/2} e^{i xi3 ZZ/2} (W_A x W_B)``.

    Local factors are Euler triples ``(alpha, beta, gamma)`` for
    ``R_z(alpha) R_y(beta) R_z(gamma)``.
    """

    xi1: float
    xi2: float
    xi3: float
    va: tuple = (0.0, 0.0, 0.0)
    vb: tuple = (0.0, 0.0, 0.0)
    wa: tuple = (0.0, 0.0, 0.0)
    wb: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        tol = 1e-12
        if not (math.pi / 2 + tol >= self.xi1 >= self.xi2 - tol
                and self.xi2 + tol >= abs(self.xi3)):
            raise ValueError("need pi/2 >= xi1 >= xi2 >= |xi3| >= 0")

    def unitary(self) -> np.ndarray:
        xx = PauliString.parse("XX").matrix()
        yy = PauliString.parse("YY").matrix()
        zz = PauliString.parse("ZZ").matrix()
        core = (rotation_matrix(xx, -self.xi1) @ rotation_matrix(yy, -self.xi2)
                @ rotation_matrix(zz, -self.xi3))
        v = np.kron(euler_matrix(*self.vb), euler_matrix(*self.va))
        w = np.kron(euler_matrix(*self.wb), euler_matrix(*self.wa))
        return v @ core @ w

    @classmethod
    def random(cls, rng: np.random.Generator) -> "CartanParams":
        a, b, c = sorted(rng.uniform(0, math.pi / 2, 3), reverse=True)
        xi3 = c * rng.choice([-1, 1])
        trip = lambda: tuple(rng.uniform(-math.pi, math.pi, 3))
        return cls(a, b, xi3, trip(), trip(), trip(), trip())


def cartan_program(p: CartanParams, split: bool = True) -> RotationProgram:
    """Measure in the eigenbasis ``U^dagger |k>``.

    With ``split`` the qubits part ways after the three two-qubit rotations
    and each runs its own single-qubit chains. The leading ``R_z(alpha)``
    of each ``V`` is dropped since z-measurement ignores it.
    """
    items = [LocalUnitary("A", (0,), euler_matrix(*p.wa)),
             LocalUnitary("B", (1,), euler_matrix(*p.wb)),
             Localize((1,)),
             Rotation(PauliString.parse("ZZ"), -p.xi3),
             Rotation(PauliString.parse("YY"), -p.xi2),
             Rotation(PauliString.parse("XX"), -p.xi1)]
    lane_a = [Rotation(PauliString.parse("ZI"), p.va[2]), Rotation(PauliString.parse("YI"), p.va[1])]
    lane_b = [Rotation(PauliString.parse("IZ"), p.vb[2]), Rotation(PauliString.parse("IY"), p.vb[1])]
    if split:
        items.append(Parallel((tuple(lane_a) + (MeasureZ((0,)),),
                               tuple(lane_b) + (MeasureZ((1,)),))))
    else:
        items += lane_a + lane_b + [MeasureZ((0, 1))]
    return RotationProgram(2, (0,), (1,), tuple(items), (0, 1),
                           name="cartan" if split else "cartan-unsplit")


# -- d-qubit observables --------------------------------------------------------

def su2d_skeleton_size(d: int) -> int:
    return (1 << (d + 1)) - 2


def su2d_program(layers, d: int, alice=None) -> RotationProgram:
    """Program applying a chain of ``d-1``-control UCRs, then z-measuring.

    ``layers`` must hold ``2^{d+1}-2`` gates alternating between the z and y
    axes; the trailing z-cascade of the full decomposition is not needed
    before a z-measurement and is not part of the input.
    """
    layers = list(layers)
    if len(layers) != su2d_skeleton_size(d):
        raise ValueError(f"expected {su2d_skeleton_size(d)} uniformly controlled rotations")
    for i, g in enumerate(layers):
        if g.k != d - 1:
            raise ValueError("every layer needs d-1 controls")
        if i and g.axis == layers[i - 1].axis:
            raise ValueError("layers must alternate between the y and z axes")
    alice = tuple(range((d + 1) // 2)) if alice is None else tuple(alice)
    bob = tuple(q for q in range(d) if q not in alice)
    items = [Localize(bob)] if bob else []
    for g in layers:
        items += [Rotation(p, t) for p, t in ucr_to_rotations(g, d)]
    items.append(MeasureZ(tuple(range(d))))
    return RotationProgram(d, alice, bob, tuple(items), tuple(range(d)), name=f"su2^{d}")


def su2d_rotation_count(d: int) -> int:
    """Rotations produced by the UCR skeleton: ``(2^{d+1}-2) 2^{d-1} = 4^d - 2^d``."""
    return su2d_skeleton_size(d) * (1 << (d - 1))


# -- binary approximation --------------------------------------------------------

def binary_round(theta: float, depth: int) -> float:
    """Nearest multiple of ``pi / 2**depth``; exact halves go to the even multiple."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    return float(np.round(theta * 2**depth / math.pi)) * math.pi / 2**depth


def binary_depth(theta: float, depth: int) -> int | None:
    """Smallest depth at which a rounded angle is an odd multiple; ``None`` for 0."""
    k = int(round(theta * 2**depth / math.pi))
    if k == 0:
        return None
    while k % 2 == 0:
        k //= 2
        depth -= 1
    return depth


def rotation_error_bound(theta: float, theta_tilde: float) -> tuple[float, float]:
    """``(E, 2E)`` with ``E = ||R(theta) - R(theta_tilde)||`` in operator norm."""
    e = 2 * abs(math.sin((theta - theta_tilde) / 4))
    return e, 2 * e


def binary_error_bound(depth: int) -> float:
    """Worst-case ``E`` after rounding to depth ``depth``."""
    return math.sqrt(2) * math.sqrt(1 - math.cos(math.pi / 2 ** (depth + 2)))


def binarize(program: RotationProgram, depth: int) -> RotationProgram:
    """Round every chain angle to the nearest binary angle at ``depth``."""

    def conv(items):
        out = []
        for it in items:
            if isinstance(it, Rotation) and not it.is_local():
                t = binary_round(it.theta, depth)
                dd = binary_depth(it.theta, depth)
                if dd is None:
                    continue
                out.append(Rotation(it.axis, t, dd))
            elif isinstance(it, Branch):
                out.append(Branch(it.control, it.value, tuple(conv(it.body))))
            elif isinstance(it, Parallel):
                out.append(Parallel(tuple(tuple(conv(l)) for l in it.lanes)))
            else:
                out.append(it)
        return out

    return RotationProgram(program.n, program.alice, program.bob, tuple(conv(program.items)),
                           program.label_qubits, program.labels, program.name + f"-D{depth}",
                           dict(program.meta))


# -- consumption specs ------------------------------------------------------------

def program_concat_spec(program: RotationProgram, branch_taken: bool = True) -> ConcatSpec:
    """Concatenation structure of ``program``'s chains, widths set by travelling qubits.

    A branch whose body holds chains is treated as the root of the tree:
    taken, both parties act; not taken, only the remote side does.
    """
    early = set(program.early_qubits())
    active = [q for q in range(program.n) if q not in early]
    chains: list = []
    lanes: list = []
    root = "c"
    fixed = program.localization_width

    def walk(items, active, out):
        nonlocal root
        for it in items:
            if isinstance(it, MeasureZ):
                active = [q for q in active if q not in it.qubits]
            elif isinstance(it, Rotation) and not it.is_local():
                axes = [it.axis.axes[q] for q in active]
                out.append(ChainProgram(PauliString.from_axes(axes), it.theta, it.depth))
            elif isinstance(it, Branch):
                if any(isinstance(x, Rotation) and not x.is_local() for x in it.body):
                    if out:
                        raise ValueError("branch after a chain is not supported")
                    if not branch_taken:
                        root = "b"
                walk(it.body, active, out)
            elif isinstance(it, Parallel):
                for lane in it.lanes:
                    from .engine import item_qubits
                    lq = [q for q in active if q in item_qubits(lane)]
                    sub: list = []
                    walk(lane, lq, sub)
                    lanes.append(tuple(sub))
        return active

    walk([it for it in program.items if not isinstance(it, (LocalUnitary, EarlyCheck, Localize))],
         active, chains)
    return ConcatSpec(tuple(chains), tuple(lanes), root, fixed)
