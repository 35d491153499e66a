"""Exact statevector simulation for small variational circuits.

Conventions
-----------
* Qubit 0 is the most significant bit of the amplitude index, so for
  ``n = 2`` the basis order is ``|00>, |01>, |10>, |11>`` with the left digit
  belonging to qubit 0.
* Rotations use the half-angle form ``R_P(theta) = exp(-i theta P / 2)``.
* Global phase is never tracked; every observable used downstream is
  phase invariant.

States are plain ``complex128`` numpy vectors of length ``2**n``. The
single-state functions (:func:`apply_1q_gate`, :func:`apply_cnot`,
:func:`apply_ansatz`) return new arrays and never modify their input.
Training uses :func:`batch_states`, which evaluates many parameter settings
and many inputs at once on arrays shaped ``(settings, samples, 2**n)``.
"""

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import combinations
import warnings

import numpy as np

from .errors import InvalidGateError, ShapeError

MAX_QUBITS = 8


class Topology(str, Enum):
    DEEP = "deep"
    FULL = "full"
    LINEAR = "linear"
    RING = "ring"
    PAIRWISE = "pairwise"


_AXES = {
    Topology.DEEP: ("x", "y"),
    Topology.PAIRWISE: ("x", "y"),
    Topology.LINEAR: ("x", "y", "z"),
    Topology.RING: ("x", "y", "z"),
    Topology.FULL: ("x", "y", "z"),
}


def _brick(n, start):
    return [(i, (i + 1) % n) for i in range(start, n, 2) if (i + 1) % n != i]


@dataclass(frozen=True)
class CircuitSpec:
    """One architecture arm: topology, width and depth.

    The parameter tensor has shape ``(n_layers, n_qubits, k)`` where ``k`` is
    2 (RX, RY) for deep/pairwise and 3 (RX, RY, RZ) for linear/ring/full.
    """

    topology: Topology
    n_qubits: int
    n_layers: int

    def __post_init__(self):
        try:
            object.__setattr__(self, "topology", Topology(self.topology))
        except ValueError:
            names = ", ".join(t.value for t in Topology)
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {names}") from None
        if not 1 <= int(self.n_qubits) <= MAX_QUBITS:
            raise ShapeError(f"n_qubits must be in 1..{MAX_QUBITS}, got {self.n_qubits}")
        if int(self.n_layers) < 1:
            raise ShapeError(f"n_layers must be >= 1, got {self.n_layers}")
        object.__setattr__(self, "n_qubits", int(self.n_qubits))
        object.__setattr__(self, "n_layers", int(self.n_layers))

    @property
    def axes(self):
        return _AXES[self.topology]

    @property
    def rotations_per_qubit(self) -> int:
        return len(self.axes)

    @property
    def shape(self):
        return (self.n_layers, self.n_qubits, self.rotations_per_qubit)

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * self.rotations_per_qubit

    def entangler(self, layer: int):
        """CNOT (control, target) pairs applied after the rotations of ``layer`` (0-indexed)."""
        n = self.n_qubits
        if n < 2:
            return []
        topo = self.topology
        if topo is Topology.PAIRWISE:
            return [(i, i + 1) for i in range(0, n - 1, 2)]
        if topo is Topology.LINEAR:
            return [(i, i + 1) for i in range(n - 1)]
        if topo is Topology.RING:
            return [(i, i + 1) for i in range(n - 1)] + [(n - 1, 0)]
        if topo is Topology.FULL:
            return list(combinations(range(n), 2))
        # deep: both brick sublayers every layer, order alternating with depth
        even, odd = _brick(n, 0), _brick(n, 1)
        return even + odd if layer % 2 == 0 else odd + even

    def program(self):
        """Flat op list: ``("rot", axis, qubit, param_index)`` and ``("cnot", control, target)``."""
        return _program(self)


@lru_cache(maxsize=None)
def _program(spec):
    ops = []
    k = spec.rotations_per_qubit
    for layer in range(spec.n_layers):
        for q in range(spec.n_qubits):
            for r, axis in enumerate(spec.axes):
                ops.append(("rot", axis, q, (layer * spec.n_qubits + q) * k + r))
        for c, t in spec.entangler(layer):
            ops.append(("cnot", c, t))
    return tuple(ops)


def rotation(axis: str, angle):
    """Rotation matrices for an array of angles; returns shape ``angle.shape + (2, 2)``."""
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle / 2)
    s = np.sin(angle / 2)
    out = np.zeros(angle.shape + (2, 2), dtype=complex)
    if axis == "x":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
    elif axis == "y":
        out[..., 0, 0] = c
        out[..., 1, 1] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
    elif axis == "z":
        out[..., 0, 0] = np.exp(-0.5j * angle)
        out[..., 1, 1] = np.exp(0.5j * angle)
    else:
        raise InvalidGateError(f"unknown rotation axis {axis!r}")
    return out


def _n_qubits(state) -> int:
    size = state.shape[-1]
    n = size.bit_length() - 1
    if size < 2 or 1 << n != size:
        raise ShapeError(f"state length {size} is not a power of two >= 2")
    return n


def zero_state(n_qubits: int) -> np.ndarray:
    state = np.zeros(2**n_qubits, dtype=complex)
    state[0] = 1.0
    return state


# batched kernels on (settings, samples, 2**n) arrays --------------------------------


def _rot_batch(psi, n, qubit, gates):
    s, b, _ = psi.shape
    view = psi.reshape(s, b, 2**qubit, 2, 2 ** (n - qubit - 1))
    g = gates.reshape(gates.shape[0], 1, 1, 2, 2)
    return (g @ view).reshape(s, b, -1)


@lru_cache(maxsize=None)
def _cnot_perm(n, control, target):
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    return np.where(idx & cbit, idx ^ tbit, idx)


def _cnot_batch(psi, n, control, target):
    return psi[..., _cnot_perm(n, control, target)]


def _check_qubit(n, qubit):
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit state")


def apply_1q_gate(state, qubit: int, gate) -> np.ndarray:
    """Apply a 2x2 unitary to ``qubit``."""
    state = np.asarray(state, dtype=complex)
    n = _n_qubits(state)
    _check_qubit(n, qubit)
    gate = np.asarray(gate, dtype=complex)
    if gate.shape != (2, 2):
        raise InvalidGateError(f"single-qubit gate must be 2x2, got {gate.shape}")
    if not np.allclose(gate.conj().T @ gate, np.eye(2), atol=1e-12, rtol=0):
        raise InvalidGateError("gate is not unitary within 1e-12")
    return _rot_batch(state.reshape(1, 1, -1), n, qubit, gate[None]).reshape(-1)


def apply_cnot(state, control: int, target: int) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    n = _n_qubits(state)
    _check_qubit(n, control)
    _check_qubit(n, target)
    if control == target:
        raise InvalidGateError(f"CNOT control and target are both qubit {control}")
    return state[_cnot_perm(n, control, target)].copy()


def encode_batch(X) -> np.ndarray:
    """Product states ``(x) RY(x_i)|0>`` for each row of ``X``; shape ``(samples, 2**n)``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeError("features must be finite")
    out = np.ones((X.shape[0], 1), dtype=complex)
    for q in range(X.shape[1]):
        amp = np.stack([np.cos(X[:, q] / 2), np.sin(X[:, q] / 2)], axis=1)
        out = (out[:, :, None] * amp[:, None, :]).reshape(X.shape[0], -1)
    return out


def encode_features(x, n_qubits: int | None = None) -> np.ndarray:
    """Angle-encode ``x`` (one RY rotation per qubit) onto ``|0...0>``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or (n_qubits is not None and x.shape[0] != n_qubits):
        raise ShapeError(f"expected {n_qubits} features, got shape {x.shape}")
    return encode_batch(x[None, :])[0]


def _thetas(spec, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape == spec.shape or theta.shape == (spec.n_params,):
        return theta.reshape(1, -1)
    if theta.ndim >= 2 and theta.shape[1:] in (spec.shape, (spec.n_params,)):
        return theta.reshape(theta.shape[0], -1)
    raise ShapeError(f"theta shape {theta.shape} does not match circuit shape {spec.shape}")


@lru_cache(maxsize=None)
def _fused(spec):
    # consecutive rotations on one qubit collapse into a single 2x2 gate
    out = []
    for op in spec.program():
        if op[0] == "rot" and out and out[-1][0] == "rots" and out[-1][1] == op[2]:
            out[-1][2].append((op[1], op[3]))
        elif op[0] == "rot":
            out.append(("rots", op[2], [(op[1], op[3])]))
        else:
            out.append(op)
    return tuple(out)


def _run(spec, thetas, psi):
    n = spec.n_qubits
    for op in _fused(spec):
        if op[0] == "rots":
            gate = None
            for axis, j in op[2]:
                g = rotation(axis, thetas[:, j])
                gate = g if gate is None else g @ gate
            psi = _rot_batch(psi, n, op[1], gate)
        else:
            psi = _cnot_batch(psi, n, op[1], op[2])
    return psi


def apply_ansatz(state, spec: CircuitSpec, theta) -> np.ndarray:
    """Run every layer of ``spec`` with parameters ``theta`` on ``state``."""
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**spec.n_qubits,):
        raise ShapeError(f"state shape {state.shape} does not match {spec.n_qubits} qubits")
    thetas = _thetas(spec, theta)
    if thetas.shape[0] != 1:
        raise ShapeError("apply_ansatz takes a single parameter tensor")
    return _run(spec, thetas, state.reshape(1, 1, -1)).reshape(-1)


def batch_states(spec: CircuitSpec, thetas, X) -> np.ndarray:
    """Final states for every (parameter setting, input) pair.

    ``thetas`` is ``(settings, n_params)`` (or one tensor), ``X`` is
    ``(samples, n_qubits)``; the result is ``(settings, samples, 2**n)``.
    """
    thetas = _thetas(spec, thetas)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.n_qubits:
        raise ShapeError(f"inputs must have shape (samples, {spec.n_qubits}), got {X.shape}")
    psi0 = encode_batch(X)
    psi = np.broadcast_to(psi0, (thetas.shape[0],) + psi0.shape)
    return _run(spec, thetas, np.ascontiguousarray(psi))


def z0_values(states) -> np.ndarray:
    """<Z_0> along the last axis of an array of states."""
    probs = np.abs(states) ** 2
    half = states.shape[-1] // 2
    return probs[..., :half].sum(axis=-1) - probs[..., half:].sum(axis=-1)


def expectation_z0(state) -> float:
    """Pauli-Z expectation on qubit 0."""
    state = np.asarray(state, dtype=complex)
    _n_qubits(state)
    norm = float(np.vdot(state, state).real)
    if abs(norm - 1.0) > 1e-8:
        warnings.warn(f"expectation_z0 on unnormalized state (norm^2 = {norm:.3g})", RuntimeWarning, stacklevel=2)
    return float(z0_values(state))
