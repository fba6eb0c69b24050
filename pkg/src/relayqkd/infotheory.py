"""Entropic functionals in bits and a randomized inequality checker."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .channels import EnsembleEntry, LabeledEnsemble
from .states import DensityMatrix, random_density
from .tensorspace import (
    LayoutError,
    NumericError,
    RegisterLayout,
    clip_spectrum,
    partial_trace,
    validate_density,
)


@dataclass(frozen=True)
class EntropyReport:
    value: float
    spectrum: np.ndarray
    clipped_mass: float

    def __float__(self) -> float:
        return self.value


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)


def von_neumann_entropy(rho) -> EntropyReport:
    """``-sum l log2 l`` over the clipped spectrum of ``rho``."""
    m = _matrix(rho)
    if not validate_density(m):
        raise NumericError("von Neumann entropy requires a valid density matrix")
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    lam, removed = clip_spectrum(w)
    return EntropyReport(shannon_entropy(lam), lam[::-1], removed)


def entropy(rho) -> float:
    """Plain-float von Neumann entropy (bits)."""
    return von_neumann_entropy(rho).value


def _names(regs) -> list[str]:
    return [regs] if isinstance(regs, str) else list(regs)


def _entropy_of(rho: DensityMatrix, regs: Iterable[str]) -> float:
    regs = _names(regs)
    if not regs:
        return 0.0
    return entropy(partial_trace(rho.matrix, rho.layout, regs))


def _check_disjoint(rho: DensityMatrix, *parts: Sequence[str]) -> None:
    seen: set[str] = set()
    for part in parts:
        if not part:
            raise LayoutError("every part of a partition must be non-empty")
        for n in part:
            rho.layout.index(n)
            if n in seen:
                raise LayoutError(f"register {n!r} appears in more than one part")
            seen.add(n)


def conditional_entropy(rho: DensityMatrix, target, given) -> float:
    """``H(target | given) = H(target given) - H(given)``; may be negative."""
    t, g = _names(target), _names(given)
    _check_disjoint(rho, t, g)
    return _entropy_of(rho, t + g) - _entropy_of(rho, g)


def mutual_information(rho: DensityMatrix, part_a, part_b) -> float:
    a, b = _names(part_a), _names(part_b)
    _check_disjoint(rho, a, b)
    return _entropy_of(rho, a) + _entropy_of(rho, b) - _entropy_of(rho, a + b)


def coherent_information(rho: DensityMatrix, source=("A",), target=("B",)) -> float:
    """``I(source > target) = S(target) - S(source target)``."""
    s, t = _names(source), _names(target)
    _check_disjoint(rho, s, t)
    return _entropy_of(rho, t) - _entropy_of(rho, s + t)


def conditional_mutual_information(rho: DensityMatrix, part_a, part_b, given) -> float:
    a, b, c = _names(part_a), _names(part_b), _names(given)
    _check_disjoint(rho, a, b, c)
    return (
        _entropy_of(rho, a + c)
        + _entropy_of(rho, b + c)
        - _entropy_of(rho, a + b + c)
        - _entropy_of(rho, c)
    )


def cq_embed(
    ensemble: LabeledEnsemble,
    names: Sequence[str] = ("X",),
    positions: Sequence[int] | None = None,
) -> DensityMatrix:
    """Block-diagonal classical-quantum state ``sum p |x><x| (x) rho(x)``.

    Label component ``positions[k]`` is embedded in a register named
    ``names[k]`` whose basis is the sorted set of values it takes.  Entries
    sharing the selected components are merged (probability-weighted).
    """
    if len(ensemble) == 0:
        raise ValueError("cannot embed an empty ensemble")
    positions = list(range(len(names))) if positions is None else list(positions)
    if len(positions) != len(names):
        raise ValueError("need one register name per embedded label position")
    alphabets = [sorted({e.label[p] for e in ensemble}) for p in positions]
    dims = [len(a) for a in alphabets]
    cl_layout = RegisterLayout(tuple(zip(names, dims)))
    layout = cl_layout + ensemble.layout
    dq = ensemble.layout.total_dim
    dc = cl_layout.total_dim
    blocks = np.zeros((dc, dq, dq), dtype=complex)
    for e in ensemble:
        idx = 0
        for p, alpha in zip(positions, alphabets):
            idx = idx * len(alpha) + alpha.index(e.label[p])
        blocks[idx] += e.probability * e.state.matrix
    full = np.zeros((dc * dq, dc * dq), dtype=complex)
    for i in range(dc):
        full[i * dq:(i + 1) * dq, i * dq:(i + 1) * dq] = blocks[i]
    return DensityMatrix(layout, full)


def holevo_information(ensemble: LabeledEnsemble, registers: Sequence[str] | None = None) -> float:
    """``S(sum p rho) - sum p S(rho)``, optionally on a subset of registers."""
    ens = ensemble if registers is None else ensemble.reduce(registers)
    avg = entropy(ens.average())
    return avg - sum(e.probability * entropy(e.state) for e in ens)


def group_by(ensemble: LabeledEnsemble, given: int) -> dict:
    """Split ``ensemble`` on label component ``given``.

    Returns ``{value: (weight, conditional ensemble)}`` where the conditional
    ensemble's labels drop that component.
    """
    groups: dict = defaultdict(list)
    for e in ensemble:
        groups[e.label[given]].append(e)
    out = {}
    for value in sorted(groups):
        members = groups[value]
        weight = sum(e.probability for e in members)
        if weight <= 0:
            continue
        entries = tuple(
            EnsembleEntry(e.label[:given] + e.label[given + 1:], e.probability / weight, e.state)
            for e in members
        )
        out[value] = (weight, LabeledEnsemble(entries))
    return out


def conditional_holevo(
    ensemble: LabeledEnsemble, given: int = 1, registers: Sequence[str] | None = None
) -> float:
    """``I(X:B|C) = sum_c p(c) I(X:B|C=c)`` with ``C`` the label component ``given``."""
    return sum(w * holevo_information(sub, registers) for w, sub in group_by(ensemble, given).values())


def _check_distribution(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
        raise ValueError("joint distribution must be nonnegative and sum to 1")
    return p


def classical_mutual_information(pxy) -> float:
    pxy = _check_distribution(pxy)
    return shannon_entropy(pxy.sum(1)) + shannon_entropy(pxy.sum(0)) - shannon_entropy(pxy)


def classical_conditional_mutual_information(pxyz) -> float:
    """``I(X:Y|Z)`` for a joint array indexed ``[x, y, z]``."""
    p = _check_distribution(pxyz)
    return (
        shannon_entropy(p.sum(1))
        + shannon_entropy(p.sum(0))
        - shannon_entropy(p)
        - shannon_entropy(p.sum((0, 1)))
    )


def interaction_information(pxyz) -> float:
    """``I(X:Y|Z) - I(X:Y)``; any sign."""
    p = _check_distribution(pxyz)
    return classical_conditional_mutual_information(p) - classical_mutual_information(p.sum(2))


# -- randomized inequality suite ---------------------------------------------------------


@dataclass
class InequalityResult:
    name: str
    samples: int
    max_violation: float
    tolerance: float = 1e-8

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


@dataclass
class InequalityReport:
    results: list[InequalityResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name: str) -> InequalityResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def lines(self) -> list[str]:
        return [
            f"{'PASS' if r.passed else 'FAIL'}  {r.name:<30} n={r.samples:<4d} max_violation={r.max_violation:.3e}"
            for r in self.results
        ]


@dataclass(frozen=True)
class SuiteCounts:
    ssa: int = 200
    chain_rule: int = 100
    holevo_invariance: int = 50
    dpi: int = 100
    dual_holevo: int = 100
    purification: int = 100


_TRIPARTITE_DIMS = [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 2, 3), (3, 2, 4), (2, 3, 4), (4, 3, 2), (2, 4, 3)]


def _random_distribution(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n))


def _random_stochastic(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_out), size=n_in)


def random_ensemble(rng: np.random.Generator, n: int, layout: RegisterLayout) -> LabeledEnsemble:
    p = _random_distribution(rng, n)
    entries = []
    for x in range(n):
        rank = int(rng.integers(1, layout.total_dim + 1))
        state = random_density(layout, rank, rng.integers(2**63))
        entries.append(EnsembleEntry((x,), float(p[x]), state))
    return LabeledEnsemble(tuple(entries))


def check_inequalities(
    seed: int = 0,
    counts: SuiteCounts = SuiteCounts(),
    entropy_fn: Callable[[np.ndarray], float] = entropy,
) -> InequalityReport:
    """Sample random states and distributions and record the worst violations.

    ``entropy_fn`` supplies the quantum entropy used by the SSA, chain-rule,
    dual-path Holevo and purification checks, so a faulty implementation can
    be injected.
    """
    rng = np.random.default_rng(seed)
    report = InequalityReport()

    def H(rho: DensityMatrix, regs: Sequence[str]) -> float:
        return entropy_fn(partial_trace(rho.matrix, rho.layout, regs))

    # strong subadditivity I(A:B|C) >= 0
    worst = 0.0
    for i in range(counts.ssa):
        da, db, dc = _TRIPARTITE_DIMS[i % len(_TRIPARTITE_DIMS)]
        lay = RegisterLayout.of(("A", da), ("B", db), ("C", dc))
        rho = random_density(lay, int(rng.integers(1, lay.total_dim + 1)), rng.integers(2**63))
        cmi = H(rho, ["A", "C"]) + H(rho, ["B", "C"]) - H(rho, ["A", "B", "C"]) - H(rho, ["C"])
        worst = max(worst, -cmi)
    report.results.append(InequalityResult("strong_subadditivity", counts.ssa, worst))

    # chain rule I(A:BC) = I(A:B) + I(A:C|B)
    worst = 0.0
    for i in range(counts.chain_rule):
        da, db, dc = _TRIPARTITE_DIMS[i % len(_TRIPARTITE_DIMS)]
        lay = RegisterLayout.of(("A", da), ("B", db), ("C", dc))
        rho = random_density(lay, int(rng.integers(1, lay.total_dim + 1)), rng.integers(2**63))
        lhs = H(rho, ["A"]) + H(rho, ["B", "C"]) - H(rho, ["A", "B", "C"])
        i_ab = H(rho, ["A"]) + H(rho, ["B"]) - H(rho, ["A", "B"])
        i_ac_b = H(rho, ["A", "B"]) + H(rho, ["C", "B"]) - H(rho, ["A", "B", "C"]) - H(rho, ["B"])
        worst = max(worst, abs(lhs - (i_ab + i_ac_b)))
    report.results.append(InequalityResult("chain_rule", counts.chain_rule, worst))

    # I(A:X) = I(A:XY) for Y produced from X by a classical channel
    worst = 0.0
    for _ in range(counts.holevo_invariance):
        nx, ny = int(rng.integers(2, 5)), int(rng.integers(2, 4))
        lay = RegisterLayout.of(("A", int(rng.integers(2, 4))),)
        ens = random_ensemble(rng, nx, lay)
        chan = _random_stochastic(rng, nx, ny)
        rho_xa = cq_embed(ens, ("X",))
        joint = LabeledEnsemble(tuple(
            EnsembleEntry((e.label[0], y), e.probability * chan[e.label[0], y], e.state)
            for e in ens for y in range(ny) if chan[e.label[0], y] > 0
        ))
        rho_xya = cq_embed(joint, ("X", "Y"))
        i_ax = H(rho_xa, ["A"]) + H(rho_xa, ["X"]) - H(rho_xa, ["X", "A"])
        i_axy = H(rho_xya, ["A"]) + H(rho_xya, ["X", "Y"]) - H(rho_xya, ["X", "Y", "A"])
        worst = max(worst, abs(i_ax - i_axy))
    report.results.append(InequalityResult("holevo_invariance", counts.holevo_invariance, worst))

    # data processing H(X) >= I(X:Y) >= I(X:Z) and I(X:Y|Z) <= I(X:Y) along X -> Y -> Z
    worst = 0.0
    for _ in range(counts.dpi):
        nx, ny, nz = (int(v) for v in rng.integers(2, 5, size=3))
        px = _random_distribution(rng, nx)
        pyx = _random_stochastic(rng, nx, ny)
        pzy = _random_stochastic(rng, ny, nz)
        pxyz = px[:, None, None] * pyx[:, :, None] * pzy[None, :, :]
        pxyz /= pxyz.sum()
        hx = shannon_entropy(pxyz.sum((1, 2)))
        ixy = classical_mutual_information(pxyz.sum(2))
        ixz = classical_mutual_information(pxyz.sum(1))
        ixy_z = classical_conditional_mutual_information(pxyz)
        worst = max(worst, ixy - hx, ixz - ixy, ixy_z - ixy)
    report.results.append(InequalityResult("data_processing", counts.dpi, worst))

    # ensemble Holevo formula vs. mutual information of the CQ embedding
    worst = 0.0
    for _ in range(counts.dual_holevo):
        nx = int(rng.integers(2, 5))
        lay = RegisterLayout.of(("B", int(rng.integers(2, 5))),)
        ens = random_ensemble(rng, nx, lay)
        avg = entropy_fn(ens.average())
        chi = avg - sum(e.probability * entropy_fn(e.state.matrix) for e in ens)
        cq = cq_embed(ens, ("X",))
        mi = H(cq, ["X"]) + H(cq, ["B"]) - H(cq, ["X", "B"])
        worst = max(worst, abs(chi - mi))
    report.results.append(InequalityResult("dual_path_holevo", counts.dual_holevo, worst))

    # pure bipartite states have equal marginal entropies
    worst = 0.0
    for _ in range(counts.purification):
        da, db = (int(v) for v in rng.integers(2, 5, size=2))
        lay = RegisterLayout.of(("A", da), ("B", db))
        rho = random_density(lay, 1, rng.integers(2**63))
        worst = max(worst, abs(H(rho, ["A"]) - H(rho, ["B"])))
    report.results.append(InequalityResult("purification_symmetry", counts.purification, worst))

    return report
