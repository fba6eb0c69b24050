"""Kraus maps, quantum instruments, measurements and classical cheating channels."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .states import DensityMatrix
from .tensorspace import (
    DimensionError,
    LayoutError,
    RegisterLayout,
    hermitian_eigensystem,
    numerics,
    permute_registers,
)


class InstrumentError(ValueError):
    """Instrument, measurement or channel fails its validity conditions."""


def _as_ops(ops: Iterable) -> tuple[np.ndarray, ...]:
    out = []
    for k in ops:
        k = np.array(k, dtype=complex)
        if k.ndim != 2:
            raise DimensionError(f"Kraus operator must be a matrix, got shape {k.shape}")
        k.setflags(write=False)
        out.append(k)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class KrausMap:
    input_layout: RegisterLayout
    output_layout: RegisterLayout
    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = _as_ops(self.kraus_ops)
        shape = (self.output_layout.total_dim, self.input_layout.total_dim)
        for k in ops:
            if k.shape != shape:
                raise DimensionError(f"Kraus operator shape {k.shape}, expected {shape}")
        object.__setattr__(self, "kraus_ops", ops)

    def kraus_sum(self) -> np.ndarray:
        d = self.input_layout.total_dim
        total = np.zeros((d, d), dtype=complex)
        for k in self.kraus_ops:
            total += k.conj().T @ k
        return total


@dataclass(frozen=True)
class KrausCheck:
    trace_preserving: bool
    trace_nonincreasing: bool
    deviation: float  # max |sum K^H K - I|
    kraus_sum: np.ndarray


def validate_kraus_map(kmap: KrausMap) -> KrausCheck:
    tau = numerics().cp
    s = kmap.kraus_sum()
    eye = np.eye(s.shape[0])
    deviation = float(np.max(np.abs(s - eye))) if s.size else 0.0
    # I - S must be PSD for a trace-non-increasing map
    headroom = np.linalg.eigvalsh(0.5 * ((eye - s) + (eye - s).conj().T))
    return KrausCheck(
        trace_preserving=deviation <= tau,
        trace_nonincreasing=bool(headroom.min() >= -tau) if headroom.size else True,
        deviation=deviation,
        kraus_sum=s,
    )


@dataclass(frozen=True, eq=False)
class QuantumInstrument:
    """Branch ``l`` of ``branches`` is the CP map for classical outcome ``l``."""

    branches: tuple[KrausMap, ...]

    def __post_init__(self):
        branches = tuple(self.branches)
        if not branches:
            raise InstrumentError("an instrument needs at least one branch")
        first = branches[0]
        for b in branches[1:]:
            if b.input_layout != first.input_layout or b.output_layout != first.output_layout:
                raise InstrumentError("all instrument branches must share input and output layouts")
        object.__setattr__(self, "branches", branches)

    @property
    def input_layout(self) -> RegisterLayout:
        return self.branches[0].input_layout

    @property
    def output_layout(self) -> RegisterLayout:
        return self.branches[0].output_layout

    @property
    def n_labels(self) -> int:
        return len(self.branches)

    def total_map(self) -> KrausMap:
        ops = [k for b in self.branches for k in b.kraus_ops]
        return KrausMap(self.input_layout, self.output_layout, tuple(ops))


def validate_instrument(instr: QuantumInstrument) -> KrausCheck:
    """Check that the branch maps sum to a trace-preserving map."""
    return validate_kraus_map(instr.total_map())


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """POVM given by measurement operators; outcome ``x`` is the list index."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = _as_ops(self.operators)
        if not ops:
            raise InstrumentError("a measurement needs at least one outcome")
        d = ops[0].shape[1]
        for a in ops:
            if a.shape[1] != d:
                raise DimensionError("measurement operators must share the input dimension")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators[0].shape[1]

    @property
    def n_outcomes(self) -> int:
        return len(self.operators)

    def effects(self) -> list[np.ndarray]:
        return [a.conj().T @ a for a in self.operators]


def validate_measurement(meas: MeasurementSet) -> float:
    """Return the max deviation of the effect sum from identity; raise if beyond tau_cp."""
    s = sum(meas.effects())
    deviation = float(np.max(np.abs(s - np.eye(meas.dim))))
    if deviation > numerics().cp:
        raise InstrumentError(f"measurement effects do not sum to identity (max deviation {deviation:.3e})")
    return deviation


def is_rank_one(meas: MeasurementSet) -> bool:
    tau = numerics().psd
    for e in meas.effects():
        w = hermitian_eigensystem(e).eigenvalues
        if int(np.count_nonzero(w > tau)) != 1:
            return False
    return True


@dataclass(frozen=True, eq=False)
class ClassicalChannel:
    """Stochastic matrix ``p(l'|l)``: rows indexed by ``l``, columns by ``l'``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise InstrumentError(f"channel must be a non-empty matrix, got shape {m.shape}")
        if np.any(m < 0):
            raise InstrumentError("channel has negative entries")
        rows = m.sum(axis=1)
        if np.max(np.abs(rows - 1)) > 1e-12:
            raise InstrumentError(f"channel rows must sum to 1 (worst row sum {rows[np.argmax(np.abs(rows - 1))]!r})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_inputs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.matrix.shape[1]

    def then(self, other: ClassicalChannel) -> ClassicalChannel:
        """Channel composition: apply ``self`` first, then ``other``."""
        if self.n_outputs != other.n_inputs:
            raise DimensionError("channel alphabets do not compose")
        return ClassicalChannel(self.matrix @ other.matrix)


@dataclass(frozen=True, eq=False)
class EnsembleEntry:
    label: tuple
    probability: float
    state: DensityMatrix


@dataclass(frozen=True, eq=False)
class LabeledEnsemble:
    entries: tuple[EnsembleEntry, ...]

    def __post_init__(self):
        entries = tuple(self.entries)
        if not entries:
            raise ValueError("empty ensemble")
        layout = entries[0].state.layout
        for e in entries:
            if e.state.layout != layout:
                raise LayoutError("ensemble members must share one layout")
            if e.probability < 0:
                raise ValueError(f"negative probability for label {e.label}")
        labels = [e.label for e in entries]
        if len(set(labels)) != len(labels):
            raise ValueError("ensemble labels must be unique")
        total = sum(e.probability for e in entries)
        if abs(total - 1) > 1e-10:
            raise ValueError(f"ensemble probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "entries", entries)

    def __iter__(self) -> Iterator[EnsembleEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def layout(self) -> RegisterLayout:
        return self.entries[0].state.layout

    @property
    def labels(self) -> list[tuple]:
        return [e.label for e in self.entries]

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    def get(self, label: tuple) -> EnsembleEntry:
        for e in self.entries:
            if e.label == label:
                return e
        raise KeyError(label)

    def average(self) -> np.ndarray:
        return sum(e.probability * e.state.matrix for e in self.entries)

    def reduce(self, keep: Sequence[str]) -> LabeledEnsemble:
        return LabeledEnsemble(
            tuple(EnsembleEntry(e.label, e.probability, e.state.reduce(keep)) for e in self.entries)
        )


def build_ensemble(
    labels: Sequence[tuple], weights: Sequence[float], matrices: Sequence[np.ndarray], layout: RegisterLayout
) -> LabeledEnsemble:
    """Normalize unnormalized branches, drop those below ``p_floor`` and renormalize."""
    floor = numerics().p_floor
    kept = [(lab, w, m) for lab, w, m in zip(labels, weights, matrices) if w >= floor]
    if not kept:
        raise InstrumentError("every branch has probability below p_floor")
    total = sum(w for _, w, _ in kept)
    entries = []
    for lab, w, m in kept:
        entries.append(EnsembleEntry(tuple(lab), w / total, DensityMatrix(layout, m / w)))
    return LabeledEnsemble(tuple(entries))


def apply_kraus_map(kmap: KrausMap, rho: DensityMatrix) -> tuple[np.ndarray, float]:
    """Return ``sum_k K rho K^H`` (unnormalized) and its trace."""
    if rho.layout.dims != kmap.input_layout.dims:
        raise LayoutError(f"state layout {rho.layout.to_list()} does not match map input {kmap.input_layout.to_list()}")
    out = sum(k @ rho.matrix @ k.conj().T for k in kmap.kraus_ops)
    return out, float(np.real(np.trace(out)))


def _apply_on_tail(ops: Sequence[np.ndarray], m: np.ndarray, d_rest: int, d_in: int) -> np.ndarray:
    """``sum_k (I_rest (x) K) m (I_rest (x) K)^H`` for ``m`` on rest (x) input."""
    t = m.reshape(d_rest, d_in, d_rest, d_in)
    out = None
    for k in ops:
        term = np.einsum("oi,aibj,pj->aobp", k, t, k.conj(), optimize=True)
        out = term if out is None else out + term
    d_out = ops[0].shape[0]
    return out.reshape(d_rest * d_out, d_rest * d_out)


def apply_instrument(
    instr: QuantumInstrument, rho: DensityMatrix, acted_registers: Sequence[str] | None = None
) -> LabeledEnsemble:
    """Run the instrument on ``acted_registers`` (identity elsewhere).

    The output layout is the untouched registers in their original order
    followed by the instrument's output registers.  Labels are ``(l,)``.
    """
    acted = list(acted_registers) if acted_registers is not None else list(instr.input_layout.names)
    for n in acted:
        rho.layout.index(n)
    acted_dims = tuple(rho.layout.dim(n) for n in acted)
    if acted_dims != instr.input_layout.dims:
        raise LayoutError(f"acted registers {acted} have dims {acted_dims}, instrument expects {instr.input_layout.dims}")
    rest = rho.layout.without(acted)
    out_layout = rest + instr.output_layout
    if len(set(out_layout.names)) != len(out_layout):
        raise LayoutError("instrument output register names collide with untouched registers")
    m = permute_registers(rho.matrix, rho.layout, list(rest.names) + acted)
    d_rest, d_in = rest.total_dim, instr.input_layout.total_dim

    weights, outs = [], []
    for branch in instr.branches:
        out = _apply_on_tail(branch.kraus_ops, m, d_rest, d_in)
        outs.append(out)
        weights.append(float(np.real(np.trace(out))))
    total = sum(weights)
    if abs(total - 1) > 1e-8:
        raise InstrumentError(f"instrument branch probabilities sum to {total!r}")
    return build_ensemble([(l,) for l in range(len(outs))], weights, outs, out_layout)


def apply_measurement(meas: MeasurementSet, rho: DensityMatrix, measured_register: str) -> LabeledEnsemble:
    """Measure one register and return the post-measurement states of the others.

    Labels are ``(x,)``; ``p(x) = Tr[A(x) rho A(x)^H]``.
    """
    validate_measurement(meas)
    if rho.layout.dim(measured_register) != meas.dim:
        raise LayoutError(f"measurement of dimension {meas.dim} on register {measured_register!r}")
    rest = rho.layout.without([measured_register])
    if len(rest) == 0:
        raise LayoutError("measured register is the only register; nothing remains")
    m = permute_registers(rho.matrix, rho.layout, [measured_register] + list(rest.names))
    d = meas.dim
    t = m.reshape(d, rest.total_dim, d, rest.total_dim)
    weights, outs = [], []
    for eff in meas.effects():
        # Tr_A[(E (x) I) rho]
        out = np.einsum("xy,ybxc->bc", eff, t)
        outs.append(out)
        weights.append(float(np.real(np.trace(out))))
    return build_ensemble([(x,) for x in range(len(outs))], weights, outs, rest)


def joint_label_distribution(channel: ClassicalChannel, ensemble: LabeledEnsemble) -> np.ndarray:
    """``p(l', l) = p(l'|l) p(l)`` indexed ``[l', l]``, ``l`` over the channel's input alphabet."""
    p_l = np.zeros(channel.n_inputs)
    for e in ensemble:
        (l,) = e.label
        if not 0 <= l < channel.n_inputs:
            raise DimensionError(f"label {l} outside channel input alphabet of size {channel.n_inputs}")
        p_l[l] = e.probability
    return channel.matrix.T * p_l[None, :]


def cheat_labels(channel: ClassicalChannel, ensemble: LabeledEnsemble) -> LabeledEnsemble:
    """Relabel through ``p(l'|l)``: states become Bayes mixtures ``sum_l p(l|l') rho(l)``."""
    joint = joint_label_distribution(channel, ensemble)
    by_label = {e.label[0]: e.state.matrix for e in ensemble}
    weights, outs = [], []
    for lp in range(channel.n_outputs):
        acc = None
        for l, m in by_label.items():
            w = joint[lp, l]
            if w == 0.0:
                continue
            acc = w * m if acc is None else acc + w * m
        outs.append(acc if acc is not None else np.zeros_like(next(iter(by_label.values()))))
        weights.append(float(joint[lp].sum()))
    return build_ensemble([(lp,) for lp in range(len(outs))], weights, outs, ensemble.layout)
