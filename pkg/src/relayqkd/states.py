"""Resource states, canonical families, seeded random states and purification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensorspace import (
    DimensionError,
    NumericError,
    RegisterLayout,
    check_dim,
    clip_spectrum,
    hermitian_eigensystem,
    numerics,
    partial_trace,
    permute_registers,
    reduce_vector,
    tensor_product,
    validate_density,
)

# Global register convention: Alice, Bob, relay output, purification ancillas.
ALICE, ALICE_TX = "A", "A'"
BOB, BOB_TX = "B", "B'"
EVE = "E"
EVE_PURIFIER = "E~"
ENVIRONMENT = "e"

_BELL_AMPLITUDES = np.array(
    [
        [1, 0, 0, 1],   # Phi+
        [1, 0, 0, -1],  # Phi-
        [0, 1, 1, 0],   # Psi+
        [0, 1, -1, 0],  # Psi-
    ],
    dtype=complex,
) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    layout: RegisterLayout
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (self.layout.total_dim, self.layout.total_dim):
            raise DimensionError(
                f"matrix shape {m.shape} does not match layout dimension {self.layout.total_dim}"
            )
        if not validate_density(m):
            raise NumericError("matrix is not a valid density matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.layout.total_dim

    def reduce(self, keep: Iterable[str]) -> DensityMatrix:
        keep = list(keep)
        return DensityMatrix(self.layout.subset(keep), partial_trace(self.matrix, self.layout, keep))

    def trace_out(self, names: Iterable[str]) -> DensityMatrix:
        return self.reduce(self.layout.without(names).names)

    def tensor(self, other: DensityMatrix) -> DensityMatrix:
        return DensityMatrix(self.layout + other.layout, tensor_product(self.matrix, other.matrix))

    def permuted(self, new_order: Sequence[str]) -> DensityMatrix:
        return DensityMatrix(
            self.layout.reordered(new_order), permute_registers(self.matrix, self.layout, new_order)
        )

    def relabeled(self, names: Sequence[str]) -> DensityMatrix:
        """Same matrix with register names replaced positionally."""
        if len(names) != len(self.layout):
            raise DimensionError("relabeling must name every register")
        return DensityMatrix(RegisterLayout(tuple(zip(names, self.layout.dims))), self.matrix)

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True, eq=False)
class PureState:
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size != self.layout.total_dim:
            raise DimensionError(f"{v.size} amplitudes for layout of dimension {self.layout.total_dim}")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > numerics().trace:
            raise NumericError(f"state vector norm {norm:.12f} is not 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(self.layout, np.outer(v, v.conj()))

    def reduce(self, keep: Iterable[str]) -> DensityMatrix:
        keep = list(keep)
        return DensityMatrix(self.layout.subset(keep), reduce_vector(self.amplitudes, self.layout, keep))


def bell_state(kind: int, names: tuple[str, str] = (ALICE, BOB)) -> PureState:
    """Bell state ``kind`` in the order Phi+, Phi-, Psi+, Psi-."""
    if kind not in (0, 1, 2, 3):
        raise ValueError(f"Bell state kind must be 0..3, got {kind}")
    return PureState(RegisterLayout.of((names[0], 2), (names[1], 2)), _BELL_AMPLITUDES[kind])


def bell_basis() -> np.ndarray:
    """Rows are the four Bell vectors (Phi+, Phi-, Psi+, Psi-)."""
    return _BELL_AMPLITUDES.copy()


def werner_state(p: float, names: tuple[str, str] = (ALICE, BOB)) -> DensityMatrix:
    """``p |Phi+><Phi+| + (1 - p) I/4`` on two qubits."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {p}")
    phi = bell_state(0, names).density()
    return DensityMatrix(phi.layout, p * phi.matrix + (1 - p) * np.eye(4) / 4)


def werner_spectrum(p: float) -> np.ndarray:
    return np.array([(1 + 3 * p) / 4] + [(1 - p) / 4] * 3)


def maximally_mixed(layout: RegisterLayout) -> DensityMatrix:
    d = layout.total_dim
    return DensityMatrix(layout, np.eye(d, dtype=complex) / d)


def basis_state(layout: RegisterLayout, index: int = 0) -> PureState:
    v = np.zeros(layout.total_dim, dtype=complex)
    v[index] = 1.0
    return PureState(layout, v)


def _ginibre(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_pure(layout: RegisterLayout, seed) -> PureState:
    rng = np.random.default_rng(seed)
    v = _ginibre(rng, layout.total_dim, 1)[:, 0]
    return PureState(layout, v / np.linalg.norm(v))


def random_density(layout: RegisterLayout, rank: int, seed) -> DensityMatrix:
    """Induced-measure random state: trace out a ``rank``-dimensional ancilla of a random pure state."""
    d = layout.total_dim
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    check_dim(d)
    rng = np.random.default_rng(seed)
    g = _ginibre(rng, d, rank)
    rho = g @ g.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(layout, rho / np.trace(rho).real)


def mix_with_noise(rho: DensityMatrix, t: float) -> DensityMatrix:
    """``(1 - t) rho + t I/d``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"noise weight must lie in [0, 1], got {t}")
    d = rho.dim
    return DensityMatrix(rho.layout, (1 - t) * rho.matrix + t * np.eye(d) / d)


def purify(rho: DensityMatrix, ancilla_name: str = ENVIRONMENT) -> PureState:
    """Purification ``sum_i sqrt(l_i) |v_i>|i>`` on ``rho.layout + ancilla``.

    The ancilla dimension is the support size of ``rho``, or the full
    dimension when an eigenvalue lies within a factor of 10 of the
    ``tau_psd`` support threshold (ambiguous rank).
    """
    if ancilla_name in rho.layout:
        raise ValueError(f"ancilla name {ancilla_name!r} already used in the layout")
    tau = numerics().psd
    spec = hermitian_eigensystem(rho.matrix)
    lam, _ = clip_spectrum(spec.eigenvalues)
    support = int(np.count_nonzero(lam > tau))
    if np.any((lam > tau / 10) & (lam < 10 * tau)):
        support = rho.dim
    support = max(support, 1)
    v = spec.eigenvectors[:, :support]
    amps = v * np.sqrt(lam[:support])
    norm = np.linalg.norm(amps)
    layout = rho.layout + RegisterLayout.of((ancilla_name, support))
    return PureState(layout, (amps / norm).reshape(-1))
