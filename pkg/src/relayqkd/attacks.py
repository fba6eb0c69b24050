"""Relay strategies, cheating channels and Alice measurement presets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channels import ClassicalChannel, KrausMap, MeasurementSet, QuantumInstrument
from .states import ALICE_TX, BOB_TX, EVE, bell_basis
from .tensorspace import DimensionError, RegisterLayout, check_dim

RELAY_INPUT = RegisterLayout.of((ALICE_TX, 2), (BOB_TX, 2))


def _trivial_output(e_dim: int = 1) -> RegisterLayout:
    return RegisterLayout.of((EVE, e_dim))


def bell_instrument() -> QuantumInstrument:
    """Ideal Bell-state measurement on ``A'B'``; four labels, no quantum output."""
    out = _trivial_output()
    branches = [KrausMap(RELAY_INPUT, out, (bell.conj()[None, :],)) for bell in bell_basis()]
    return QuantumInstrument(tuple(branches))


def depolarized_instrument(q: float) -> QuantumInstrument:
    """Bell measurement that, with probability ``q``, fully depolarizes ``A'B'`` first.

    After full depolarization every Bell projection fires with probability
    1/4 independently of the input, so the branch ``l`` gains the Kraus
    operators ``sqrt(q)/2 <j|`` for the computational basis ``j``.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"depolarizing probability must lie in [0, 1], got {q}")
    out = _trivial_output()
    noise = [np.sqrt(q) / 2 * np.eye(4)[j][None, :] for j in range(4)]
    branches = []
    for bell in bell_basis():
        ops = [np.sqrt(1 - q) * bell.conj()[None, :]] + noise
        branches.append(KrausMap(RELAY_INPUT, out, tuple(ops)))
    return QuantumInstrument(tuple(branches))


def random_isometry(rows: int, cols: int, seed) -> np.ndarray:
    """Haar-like ``rows x cols`` isometry (``V^H V = I``) from the QR of a Ginibre matrix."""
    if rows < cols:
        raise DimensionError(f"an isometry needs rows >= cols, got {rows} x {cols}")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_instrument(
    input_layout: RegisterLayout = RELAY_INPUT,
    branches: int = 4,
    kraus_per_branch: int = 1,
    e_dim: int = 1,
    seed=0,
) -> QuantumInstrument:
    """Split the Kraus operators of a random isometry among ``branches`` outcomes."""
    d_in = input_layout.total_dim
    rows = branches * kraus_per_branch * e_dim
    check_dim(max(rows, d_in * e_dim))
    if rows < d_in:
        raise DimensionError(
            f"{branches} branches x {kraus_per_branch} Kraus x E dim {e_dim} cannot form an isometry on dimension {d_in}"
        )
    v = random_isometry(rows, d_in, seed)
    out = _trivial_output(e_dim)
    ops = [v[k * e_dim:(k + 1) * e_dim] for k in range(branches * kraus_per_branch)]
    maps = [
        KrausMap(input_layout, out, tuple(ops[b * kraus_per_branch:(b + 1) * kraus_per_branch]))
        for b in range(branches)
    ]
    return QuantumInstrument(tuple(maps))


def leaky_bell_instrument(theta: float, e_dim: int = 2, kraus_per_branch: int = 1, seed=0) -> QuantumInstrument:
    """Bell measurement perturbed toward a random instrument with quantum output ``E``.

    The stacked Kraus isometry is ``polar(V_bell + theta * G)`` where
    ``V_bell`` places ``<Bell_l|`` in the ``(l, k=0, e=0)`` row and ``G`` is a
    random isometry of the same shape.  ``theta = 0`` is the ideal relay.
    """
    if theta < 0:
        raise ValueError(f"theta must be nonnegative, got {theta}")
    rows = 4 * kraus_per_branch * e_dim
    check_dim(rows)
    v = np.zeros((rows, 4), dtype=complex)
    for l, bell in enumerate(bell_basis()):
        v[l * kraus_per_branch * e_dim] = bell.conj()
    v = v + theta * random_isometry(rows, 4, seed)
    u, _, vh = np.linalg.svd(v, full_matrices=False)
    v = u @ vh
    out = _trivial_output(e_dim)
    ops = [v[k * e_dim:(k + 1) * e_dim] for k in range(4 * kraus_per_branch)]
    maps = [
        KrausMap(RELAY_INPUT, out, tuple(ops[b * kraus_per_branch:(b + 1) * kraus_per_branch]))
        for b in range(4)
    ]
    return QuantumInstrument(tuple(maps))


def identity_channel(l_max: int) -> ClassicalChannel:
    return ClassicalChannel(np.eye(l_max))


def dos_channel(l_max: int, target: Sequence[float] | None = None) -> ClassicalChannel:
    """Denial of service: the announced label ignores the true one."""
    target = np.full(l_max, 1.0 / l_max) if target is None else np.asarray(target, dtype=float)
    if np.any(target < 0) or abs(target.sum() - 1) > 1e-12:
        raise ValueError("target distribution must be nonnegative and sum to 1")
    return ClassicalChannel(np.tile(target, (l_max, 1)))


def partial_leak_channel(eps: float, l_max: int) -> ClassicalChannel:
    """``(1 - eps) * identity + eps * uniform``."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    return ClassicalChannel((1 - eps) * np.eye(l_max) + eps * np.full((l_max, l_max), 1.0 / l_max))


def random_channel(n_in: int, n_out: int, seed) -> ClassicalChannel:
    rng = np.random.default_rng(seed)
    return ClassicalChannel(rng.dirichlet(np.ones(n_out), size=n_in))


def computational_measurement(d: int = 2) -> MeasurementSet:
    eye = np.eye(d)
    return MeasurementSet(tuple(np.outer(eye[x], eye[x]) for x in range(d)))


def basis_measurement(unitary) -> MeasurementSet:
    """Projective measurement onto the columns of ``unitary``."""
    u = np.asarray(unitary, dtype=complex)
    return MeasurementSet(tuple(np.outer(u[:, x], u[:, x].conj()) for x in range(u.shape[1])))


def hadamard_measurement() -> MeasurementSet:
    return basis_measurement(np.array([[1, 1], [1, -1]]) / np.sqrt(2))


def sic_measurement() -> MeasurementSet:
    """Tetrahedral qubit POVM; each effect is half a pure-state projector."""
    vecs = [np.array([1, 0], dtype=complex)]
    for k in range(3):
        phase = np.exp(2j * np.pi * k / 3)
        vecs.append(np.array([1 / np.sqrt(3), np.sqrt(2 / 3) * phase]))
    return MeasurementSet(tuple(np.outer(v, v.conj()) / np.sqrt(2) for v in vecs))


def random_rank_one_measurement(d: int, outcomes: int, seed) -> MeasurementSet:
    """``A(x) = |0><v_x|`` with the ``v_x`` rows of a random ``outcomes x d`` isometry."""
    v = random_isometry(outcomes, d, seed)
    e0 = np.zeros(d)
    e0[0] = 1.0
    return MeasurementSet(tuple(np.outer(e0, v[x]) for x in range(outcomes)))


@dataclass(frozen=True)
class AttackPreset:
    name: str
    instrument: Callable[..., QuantumInstrument]
    cheating: Callable[..., ClassicalChannel]


PRESETS = {
    "ideal": AttackPreset("ideal", bell_instrument, lambda: identity_channel(4)),
    "denial_of_service": AttackPreset("denial_of_service", bell_instrument, lambda: dos_channel(4)),
    "partial_leak": AttackPreset("partial_leak", bell_instrument, lambda eps: partial_leak_channel(eps, 4)),
    "noisy_relay": AttackPreset("noisy_relay", depolarized_instrument, lambda: identity_channel(4)),
}
