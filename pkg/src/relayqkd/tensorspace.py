"""Register-aware dense matrix algebra.

Every multipartite operator in the package is a dense complex ``numpy``
array addressed through a :class:`RegisterLayout`: an ordered list of named
tensor factors.  Index ``(i_1, ..., i_n)`` of the factors maps to the flat
row-major index, so register ``k`` is axis ``k`` of ``m.reshape(dims + dims)``.
"""
from __future__ import annotations

import contextlib
import contextvars
import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np


class LayoutError(ValueError):
    """Unknown, duplicated or mismatched register names."""


class DimensionError(ValueError):
    """Operator dimension exceeds the configured maximum or is inconsistent."""


class NumericError(ValueError):
    """A numerical precondition (hermiticity, normalization, ...) failed."""


@dataclass(frozen=True)
class NumericConfig:
    """Tolerances and size limits shared by all modules.

    ``identity`` and ``theorem`` are the slacks used when asserting the
    rate identities and the key-rate inequality; ``p_floor`` is the branch
    probability below which labels are pruned.
    """

    herm: float = 1e-9
    trace: float = 1e-9
    psd: float = 1e-9
    eig: float = 1e-8
    cp: float = 1e-9
    p_floor: float = 1e-12
    identity: float = 1e-7
    theorem: float = 1e-8
    dmax: int = 256

    def scaled(self, factor: float) -> NumericConfig:
        if factor <= 0:
            raise ValueError(f"tolerance scale must be positive, got {factor}")
        fields = {
            f.name: getattr(self, f.name) * factor
            for f in dataclasses.fields(self)
            if f.name not in ("dmax", "p_floor")
        }
        return dataclasses.replace(self, **fields)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_NUMERICS = NumericConfig()
_current = contextvars.ContextVar("relayqkd_numerics", default=DEFAULT_NUMERICS)


def numerics() -> NumericConfig:
    """Return the numeric configuration active in the current context."""
    return _current.get()


@contextlib.contextmanager
def use_numerics(config: NumericConfig) -> Iterator[NumericConfig]:
    token = _current.set(config)
    try:
        yield config
    finally:
        _current.reset(token)


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers with their dimensions."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        for name, dim in regs:
            if dim < 1:
                raise LayoutError(f"register {name!r} has dimension {dim} < 1")

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> RegisterLayout:
        return cls(tuple(pairs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.registers)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self) -> int:
        return len(self.registers)

    def __contains__(self, name: str) -> bool:
        return name in self.names

    def dim(self, name: str) -> int:
        return self.dims[self.index(name)]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}; layout has {list(self.names)}") from None

    def subset(self, names: Iterable[str]) -> RegisterLayout:
        """Sub-layout with ``names`` kept in their original relative order."""
        wanted = set(names)
        for n in wanted:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] in wanted))

    def without(self, names: Iterable[str]) -> RegisterLayout:
        drop = set(names)
        for n in drop:
            self.index(n)
        return RegisterLayout(tuple(r for r in self.registers if r[0] not in drop))

    def reordered(self, names: Sequence[str]) -> RegisterLayout:
        return RegisterLayout(tuple((n, self.dim(n)) for n in names))

    def __add__(self, other: RegisterLayout) -> RegisterLayout:
        return RegisterLayout(self.registers + other.registers)

    def to_list(self) -> list[list]:
        return [[n, d] for n, d in self.registers]

    @classmethod
    def from_list(cls, items: Iterable[Sequence]) -> RegisterLayout:
        return cls(tuple((n, d) for n, d in items))


@dataclass(frozen=True)
class HermitianSpectrum:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns match eigenvalues

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def check_dim(d: int, what: str = "operator") -> None:
    dmax = numerics().dmax
    if d > dmax:
        raise DimensionError(f"{what} dimension {d} exceeds the maximum D_max={dmax}")


def _square(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def _check_layout(m: np.ndarray, layout: RegisterLayout) -> np.ndarray:
    m = _square(m)
    if m.shape[0] != layout.total_dim:
        raise DimensionError(
            f"matrix of size {m.shape[0]} does not match layout total dimension {layout.total_dim}"
        )
    return m


def tensor_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with ``a``'s factors first."""
    a, b = _square(a), _square(b)
    check_dim(a.shape[0] * b.shape[0], "tensor product")
    return np.kron(a, b)


def partial_trace(m: np.ndarray, layout: RegisterLayout, keep: Iterable[str]) -> np.ndarray:
    """Trace out every register of ``layout`` not named in ``keep``.

    The result acts on ``layout.subset(keep)``; kept registers stay in their
    original relative order.
    """
    m = _check_layout(m, layout)
    keep = set(keep)
    if not keep:
        raise LayoutError("partial_trace needs at least one register to keep")
    kept = [i for i, n in enumerate(layout.names) if n in keep]
    for n in keep:
        layout.index(n)
    if len(kept) == len(layout):
        return m
    traced = [i for i in range(len(layout)) if i not in kept]
    dims = layout.dims
    n = len(dims)
    dk = math.prod(dims[i] for i in kept)
    dt = math.prod(dims[i] for i in traced)
    t = m.reshape(dims + dims)
    t = t.transpose(kept + traced + [n + i for i in kept] + [n + i for i in traced])
    t = t.reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def reduce_vector(psi: np.ndarray, layout: RegisterLayout, keep: Iterable[str]) -> np.ndarray:
    """Reduced density matrix of the (possibly unnormalized) vector ``psi``.

    Avoids forming the full outer product, which matters for purifications.
    """
    psi = np.asarray(psi).reshape(-1)
    if psi.size != layout.total_dim:
        raise DimensionError(f"vector of size {psi.size} does not match layout {layout.total_dim}")
    keep = set(keep)
    for n in keep:
        layout.index(n)
    kept = [i for i, n in enumerate(layout.names) if n in keep]
    traced = [i for i in range(len(layout)) if i not in kept]
    dims = layout.dims
    dk = math.prod(dims[i] for i in kept)
    t = psi.reshape(dims).transpose(kept + traced).reshape(dk, -1)
    return t @ t.conj().T


def apply_local(op: np.ndarray, psi: np.ndarray, layout: RegisterLayout, register: str) -> np.ndarray:
    """Apply ``op`` (out_dim x in_dim) to one register of a state vector.

    Returns the new vector; the register keeps its position and takes the
    operator's output dimension.
    """
    k = layout.index(register)
    dims = list(layout.dims)
    op = np.asarray(op)
    if op.shape[1] != dims[k]:
        raise DimensionError(f"operator input {op.shape[1]} does not match register {register!r} ({dims[k]})")
    t = np.tensordot(op, np.asarray(psi).reshape(dims), axes=([1], [k]))
    return np.moveaxis(t, 0, k).reshape(-1)


def permute_registers(m: np.ndarray, layout: RegisterLayout, new_order: Sequence[str]) -> np.ndarray:
    """Reorder the tensor factors of an operator on ``layout``."""
    m = _check_layout(m, layout)
    new_order = list(new_order)
    if sorted(new_order) != sorted(layout.names) or len(new_order) != len(layout):
        raise LayoutError(f"{new_order} is not a permutation of {list(layout.names)}")
    perm = [layout.index(n) for n in new_order]
    if perm == list(range(len(layout))):
        return m
    n = len(layout)
    d = layout.total_dim
    t = m.reshape(layout.dims + layout.dims).transpose(perm + [n + p for p in perm])
    return t.reshape(d, d)


def hermiticity_defect(m: np.ndarray) -> float:
    m = _square(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def hermitian_eigensystem(m: np.ndarray) -> HermitianSpectrum:
    m = _square(m)
    defect = hermiticity_defect(m)
    if defect > numerics().herm:
        raise NumericError(f"matrix is not Hermitian: max |m - m^H| = {defect:.3e}")
    h = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(h)
    return HermitianSpectrum(w[::-1].copy(), v[:, ::-1].copy())


def validate_density(m: np.ndarray) -> bool:
    """True iff ``m`` is Hermitian, unit-trace and positive semidefinite within tolerance."""
    cfg = numerics()
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        return False
    if hermiticity_defect(m) > cfg.herm:
        return False
    if abs(np.trace(m) - 1.0) > cfg.trace:
        return False
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return bool(w[0] >= -cfg.psd)


def clip_spectrum(eigenvalues: np.ndarray) -> tuple[np.ndarray, float]:
    """Zero out negative dust, clip to [0, 1] and renormalize.

    Returns the cleaned spectrum and the absolute mass that was removed.
    """
    w = np.asarray(eigenvalues, dtype=float)
    cfg = numerics()
    if w.size and w.min() < -cfg.psd:
        raise NumericError(f"eigenvalue {w.min():.3e} is below -tau_psd")
    clipped = np.clip(w, 0.0, 1.0)
    removed = float(np.abs(w - clipped).sum())
    total = clipped.sum()
    if total <= 0:
        raise NumericError("spectrum has no positive mass")
    return clipped / total, removed
