"""Quantum-information observables of pure register states.

All entropies are in bits. Eigenvalues of the (at most 16x16) density
matrices come from a cyclic complex Jacobi sweep in
:func:`hermitian_eigenvalues`, which lets the pure-state diagnostic
``S_AB`` be computed rather than assumed.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np

from .errors import ConvergenceError, InputError, PartitionError, ShapeError

EIGEN_FLOOR = 1e-16  # eigenvalues below this are dropped from entropy sums
NEG_CLIP = 1e-10
HERMITIAN_TOL = 1e-10
PURE_STATE_TOL = 1e-10


@dataclass(frozen=True)
class Bipartition:
    """Split of an ``n_qubits`` register into subsystems A and B."""

    n_qubits: int
    subsystem_a: tuple

    def __post_init__(self):
        a = tuple(sorted(int(q) for q in self.subsystem_a))
        if len(set(a)) != len(a):
            raise PartitionError(f"subsystem A has repeated qubits: {self.subsystem_a}")
        if not a:
            raise PartitionError("subsystem A is empty")
        if any(q < 0 or q >= self.n_qubits for q in a):
            raise PartitionError(f"subsystem A {self.subsystem_a} out of range for {self.n_qubits} qubits")
        object.__setattr__(self, "subsystem_a", a)

    @classmethod
    def default(cls, n_qubits: int) -> "Bipartition":
        """A = the first ceil(n/2) qubits."""
        return cls(n_qubits, tuple(range(math.ceil(n_qubits / 2))))

    @property
    def subsystem_b(self):
        return tuple(q for q in range(self.n_qubits) if q not in self.subsystem_a)


@dataclass(frozen=True)
class MediatorVector:
    S_A: float
    gamma_A: float
    L_A: float
    I_AB: float
    # diagnostic only; not one of the four mediators
    S_AB: float = 0.0

    FIELDS = ("S_A", "gamma_A", "L_A", "I_AB")

    def as_array(self) -> np.ndarray:
        return np.array([self.S_A, self.gamma_A, self.L_A, self.I_AB])


def _check_state(state, part):
    state = np.asarray(state, dtype=complex)
    if state.shape != (2**part.n_qubits,):
        raise ShapeError(f"state shape {state.shape} does not match {part.n_qubits} qubits")
    return state


def _reduced(state, n, keep):
    traced = [q for q in range(n) if q not in keep]
    psi = state.reshape((2,) * n).transpose(list(keep) + traced)
    m = psi.reshape(2 ** len(keep), 2 ** len(traced))
    return m @ m.conj().T


def reduced_density_matrix(state, part: Bipartition) -> np.ndarray:
    """rho_A = Tr_B |psi><psi|."""
    state = _check_state(state, part)
    return _reduced(state, part.n_qubits, part.subsystem_a)


def hermitian_eigenvalues(rho, tol: float = 1e-14, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations, descending.

    Each off-diagonal pivot ``a_pq`` is first made real by a phase on index
    ``q`` and then annihilated with a real Givens rotation. Sweeps stop once
    the off-diagonal Frobenius norm drops below ``tol``.

    Negative eigenvalues in ``[-1e-10, 0)`` are clipped to zero; anything more
    negative raises :class:`InputError`, since no density matrix produces it.
    """
    a = np.array(rho, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError(f"expected a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise InputError("matrix is not Hermitian within 1e-10")
    a = (a + a.conj().T) / 2
    n = a.shape[0]
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(a[offdiag]) ** 2))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag < 1e-300:
                    continue
                phase = apq / mag
                a[:, q] *= phase.conjugate()
                a[q, :] *= phase
                theta = 0.5 * math.atan2(2 * mag, a[q, q].real - a[p, p].real)
                c, s = math.cos(theta), math.sin(theta)
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    lam = np.sort(np.diag(a).real)[::-1]
    if lam[-1] < -NEG_CLIP:
        raise InputError(f"eigenvalue {lam[-1]:.3g} is below -1e-10; not a density matrix")
    return np.where(lam < 0, 0.0, lam)


def entropy_from_eigenvalues(lam) -> float:
    lam = np.asarray(lam, dtype=float)
    lam = lam[lam >= EIGEN_FLOOR]
    return float(max(-np.sum(lam * np.log2(lam)), 0.0))


def von_neumann_entropy(rho) -> float:
    """S = -sum lambda log2 lambda over eigenvalues >= 1e-16."""
    return entropy_from_eigenvalues(hermitian_eigenvalues(rho))


def purity(rho) -> float:
    """Tr[rho^2]."""
    rho = np.asarray(rho, dtype=complex)
    return float(np.sum(np.abs(rho) ** 2))


def linear_entropy(rho) -> float:
    return 1.0 - purity(rho)


def subsystem_entropies(state, part: Bipartition):
    """(S_A, S_B, S_AB) in bits; S_AB is evaluated on the full pure state."""
    state = _check_state(state, part)
    n = part.n_qubits
    s_a = von_neumann_entropy(_reduced(state, n, part.subsystem_a))
    s_b = von_neumann_entropy(_reduced(state, n, part.subsystem_b)) if part.subsystem_b else 0.0
    s_ab = von_neumann_entropy(np.outer(state, state.conj()))
    if s_ab >= PURE_STATE_TOL:
        warnings.warn(f"global state is not pure: S_AB = {s_ab:.3g}", RuntimeWarning, stacklevel=2)
    return s_a, s_b, s_ab


def mutual_information(state, part: Bipartition) -> float:
    """I(A:B) = S_A + S_B - S_AB."""
    s_a, s_b, s_ab = subsystem_entropies(state, part)
    return max(s_a + s_b - s_ab, 0.0)


def compute_mediators(state, part: Bipartition) -> MediatorVector:
    """Entanglement entropy, purity, linear entropy and mutual information of A|B."""
    state = _check_state(state, part)
    s_a, s_b, s_ab = subsystem_entropies(state, part)
    gamma = purity(_reduced(state, part.n_qubits, part.subsystem_a))
    return MediatorVector(
        S_A=s_a,
        gamma_A=gamma,
        L_A=1.0 - gamma,
        I_AB=max(s_a + s_b - s_ab, 0.0),
        S_AB=s_ab,
    )
