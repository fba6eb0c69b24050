"""One relay scenario end to end: conditional states, key rates and the rate certificate.

Register names follow the package convention: ``A``/``A'`` for Alice's kept
and transmitted systems, ``B``/``B'`` for Bob's, ``E`` for the relay's
quantum output, ``E~`` for the purifying ancilla of ``ABE`` and ``e`` for
the purifying ancilla of ``AB``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .channels import (
    ClassicalChannel,
    EnsembleEntry,
    InstrumentError,
    LabeledEnsemble,
    MeasurementSet,
    QuantumInstrument,
    apply_instrument,
    apply_measurement,
    build_ensemble,
    cheat_labels,
    is_rank_one,
    joint_label_distribution,
    validate_instrument,
    validate_measurement,
)
from .infotheory import (
    coherent_information,
    conditional_holevo,
    conditional_mutual_information,
    cq_embed,
    entropy,
    group_by,
    holevo_information,
)
from .states import (
    ALICE,
    ALICE_TX,
    BOB,
    BOB_TX,
    ENVIRONMENT,
    EVE,
    EVE_PURIFIER,
    DensityMatrix,
    purify,
)
from .tensorspace import (
    DimensionError,
    LayoutError,
    NumericError,
    apply_local,
    check_dim,
    numerics,
    reduce_vector,
)


class RankError(ValueError):
    """Alice's measurement is not rank one where the derivation requires it."""


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    alice_state: DensityMatrix
    bob_state: DensityMatrix
    instrument: QuantumInstrument
    cheating: ClassicalChannel
    measurement: MeasurementSet
    name: str = "scenario"
    seed: int = 0
    rounds: dict = field(default_factory=dict)
    spec: Optional[dict] = None  # normalized scenario spec, when built from one

    def __post_init__(self):
        if self.alice_state.layout.names != (ALICE, ALICE_TX):
            raise LayoutError(f"Alice's state must live on ({ALICE}, {ALICE_TX})")
        if self.bob_state.layout.names != (BOB, BOB_TX):
            raise LayoutError(f"Bob's state must live on ({BOB}, {BOB_TX})")
        instr_in = self.instrument.input_layout
        expected = (self.alice_state.layout.dim(ALICE_TX), self.bob_state.layout.dim(BOB_TX))
        if instr_in.dims != expected:
            raise DimensionError(f"instrument consumes dims {instr_in.dims}, resources send {expected}")
        if self.instrument.output_layout.names != (EVE,):
            raise LayoutError(f"instrument must output exactly the register {EVE!r}")
        if self.cheating.n_inputs != self.instrument.n_labels:
            raise DimensionError(
                f"cheating channel has {self.cheating.n_inputs} rows but the instrument has "
                f"{self.instrument.n_labels} labels"
            )
        if self.measurement.dim != self.alice_state.layout.dim(ALICE):
            raise DimensionError("Alice's measurement dimension does not match register A")
        check = validate_instrument(self.instrument)
        if not check.trace_preserving:
            raise InstrumentError(f"instrument is not trace preserving (deviation {check.deviation:.3e})")
        validate_measurement(self.measurement)


@dataclass(frozen=True, eq=False)
class ConditionedStateSet:
    by_label: LabeledEnsemble        # rho_ABE(l)
    by_fake_label: LabeledEnsemble   # rho_ABE(l')
    ab_states: LabeledEnsemble       # rho_AB(l')
    joint: np.ndarray                # p(l', l), indexed [l', l]

    def consistency_residual(self) -> float:
        """Max deviation of ``sum_l p(l|l') rho_ABE(l)`` from ``rho_ABE(l')`` and of the label marginal."""
        by_l = {e.label[0]: e.state.matrix for e in self.by_label}
        worst = 0.0
        for e in self.by_fake_label:
            lp = e.label[0]
            row = self.joint[lp]
            mix = sum(row[l] * m for l, m in by_l.items()) / row.sum()
            worst = max(worst, float(np.max(np.abs(mix - e.state.matrix))))
        p_l = np.zeros(self.joint.shape[1])
        for e in self.by_label:
            p_l[e.label[0]] = e.probability
        return max(worst, float(np.max(np.abs(self.joint.sum(0) - p_l))))


def build_conditional_states(cfg: ScenarioConfig) -> ConditionedStateSet:
    check_dim(cfg.alice_state.dim * cfg.bob_state.dim, "resource state")
    rho = cfg.alice_state.tensor(cfg.bob_state)
    by_label = apply_instrument(cfg.instrument, rho, [ALICE_TX, BOB_TX])
    by_fake = cheat_labels(cfg.cheating, by_label)
    joint = joint_label_distribution(cfg.cheating, by_label)
    return ConditionedStateSet(by_label, by_fake, by_fake.reduce([ALICE, BOB]), joint)


def measure_conditioned(
    meas: MeasurementSet, ensemble: LabeledEnsemble, keep: list[str]
) -> LabeledEnsemble:
    """Measure ``A`` on every member of an ``(l,)``-labeled ensemble.

    Returns the ensemble ``{p(x, l), rho_rest(x, l)}`` labeled ``(x, l)``
    where ``rest`` is ``keep`` without ``A``.
    """
    entries = []
    for e in ensemble:
        sub = apply_measurement(meas, e.state.reduce([ALICE] + keep), ALICE)
        for s in sub:
            entries.append(EnsembleEntry((s.label[0],) + e.label, e.probability * s.probability, s.state))
    return LabeledEnsemble(tuple(entries))


def conditional_coherent_information(css: ConditionedStateSet) -> tuple[float, dict]:
    per = {e.label[0]: coherent_information(e.state, ALICE, BOB) for e in css.ab_states}
    total = sum(e.probability * per[e.label[0]] for e in css.ab_states)
    return total, per


def _purified_measurement(
    meas: MeasurementSet, rho: DensityMatrix, ancilla: str, outputs: list[list[str]]
) -> tuple[LabeledEnsemble, ...]:
    """Purify ``rho`` with ``ancilla``, measure ``A`` and return one ensemble per output register group."""
    psi = purify(rho, ancilla)
    layout = psi.layout
    weights: list[float] = []
    mats: list[list[np.ndarray]] = [[] for _ in outputs]
    for op in meas.operators:
        v = apply_local(op, psi.amplitudes, layout, ALICE)
        w = float(np.vdot(v, v).real)
        weights.append(w)
        for k, keep in enumerate(outputs):
            mats[k].append(reduce_vector(v, layout, keep))
    labels = [(x,) for x in range(meas.n_outcomes)]
    return tuple(build_ensemble(labels, weights, m, layout.subset(keep)) for m, keep in zip(mats, outputs))


def general_rate_by_label(css: ConditionedStateSet, meas: MeasurementSet) -> dict:
    """``I(X:B) - I(X:e)`` per fake label, computed through the purification of ``rho_AB(l')``."""
    if not is_rank_one(meas):
        raise RankError("the Holevo-difference rate equals the coherent information only for rank-one POVMs")
    tol = numerics().identity
    out = {}
    for e in css.ab_states:
        bob, env = _purified_measurement(meas, e.state, ENVIRONMENT, [[BOB], [ENVIRONMENT]])
        chi_b = entropy(bob.average()) - sum(s.probability * entropy(s.state) for s in bob)
        chi_e = entropy(env.average()) - sum(s.probability * entropy(s.state) for s in env)
        rate = chi_b - chi_e
        coh = coherent_information(e.state, ALICE, BOB)
        if abs(rate - coh) > tol:
            raise NumericError(
                f"label {e.label[0]}: Holevo difference {rate!r} disagrees with coherent information {coh!r}"
            )
        out[e.label[0]] = rate
    return out


def rate_general(css: ConditionedStateSet, meas: MeasurementSet) -> float:
    per = general_rate_by_label(css, meas)
    return sum(e.probability * per[e.label[0]] for e in css.ab_states)


@dataclass(frozen=True)
class DetailedRates:
    R_star: float
    R_prime: float
    Delta: float
    bob_holevo: float       # I(X:B|L')
    eve_holevo_true: float  # I(X:E|L)
    eve_holevo_fake: float  # I(X:E|L')
    bob_ensemble: LabeledEnsemble
    eve_ensemble_true: LabeledEnsemble
    eve_ensemble_fake: LabeledEnsemble


def rate_detailed(css: ConditionedStateSet, meas: MeasurementSet) -> DetailedRates:
    validate_measurement(meas)
    bob = measure_conditioned(meas, css.by_fake_label, [BOB])
    eve_true = measure_conditioned(meas, css.by_label, [EVE])
    eve_fake = measure_conditioned(meas, css.by_fake_label, [EVE])
    i_xb = conditional_holevo(bob, given=1)
    i_xe_l = conditional_holevo(eve_true, given=1)
    i_xe_lp = conditional_holevo(eve_fake, given=1)
    r_star = i_xb - i_xe_l
    r_prime = i_xb - i_xe_lp
    delta = i_xe_lp - i_xe_l
    if abs(r_star - r_prime - delta) > 1e-10:
        raise NumericError("R* = R' + Delta failed beyond floating-point rounding")
    return DetailedRates(r_star, r_prime, delta, i_xb, i_xe_l, i_xe_lp, bob, eve_true, eve_fake)


def gamma_by_label(css: ConditionedStateSet, meas: MeasurementSet) -> dict:
    """``I(X:E~|E)`` on the measured purification of each ``rho_ABE(l')``."""
    dmax = numerics().dmax
    out = {}
    for e in css.by_fake_label:
        psi_dim = purify(e.state, EVE_PURIFIER).layout.dim(EVE_PURIFIER)
        cq_dim = meas.n_outcomes * e.state.layout.dim(EVE) * psi_dim
        if cq_dim > dmax:
            raise DimensionError(
                f"classical-quantum state X E E~ would need dimension {cq_dim} > D_max={dmax}; "
                "reduce the rank of the resource states or the relay output"
            )
        (eve,) = _purified_measurement(meas, e.state, EVE_PURIFIER, [[EVE, EVE_PURIFIER]])
        psi = cq_embed(eve, ("X",))
        out[e.label[0]] = conditional_mutual_information(psi, ["X"], [EVE_PURIFIER], [EVE])
    return out


def compute_gamma(css: ConditionedStateSet, meas: MeasurementSet) -> float:
    if not is_rank_one(meas):
        raise RankError("gamma is defined here for rank-one POVMs only")
    per = gamma_by_label(css, meas)
    return sum(e.probability * per[e.label[0]] for e in css.by_fake_label)


@dataclass
class RateReport:
    R: Optional[float]
    R_prime: float
    R_star: float
    Delta: float
    gamma: Optional[float]
    coherent_conditional: float
    per_label: list
    theorem_ok: Optional[bool]
    identity_residual: Optional[float]
    rank_one: bool = True
    delta_at_zero_coherence: bool = False
    bob_holevo: float = 0.0
    eve_holevo_true: float = 0.0
    eve_holevo_fake: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _per_label(css, detailed, coh, gamma, general) -> list:
    rows = []
    bob = _split(detailed.bob_ensemble)
    eve = _split(detailed.eve_ensemble_fake)
    for e in css.ab_states:
        lp = e.label[0]
        rows.append({
            "label": lp,
            "probability": e.probability,
            "coherent_information": coh[lp],
            "bob_holevo": bob.get(lp, 0.0),
            "eve_holevo": eve.get(lp, 0.0),
            "gamma": None if gamma is None else gamma[lp],
            "general_rate": None if general is None else general[lp],
        })
    return rows


def _split(ensemble: LabeledEnsemble) -> dict:
    return {c: holevo_information(sub) for c, (_, sub) in group_by(ensemble, 1).items()}


def theorem_certificate(cfg: ScenarioConfig) -> RateReport:
    """Evaluate every rate for ``cfg`` and check ``R* >= I(A>B|L') + Delta``.

    For measurements that are not rank one the inequality is not asserted:
    ``theorem_ok``, ``R``, ``gamma`` and ``identity_residual`` are ``None``.
    ``delta_at_zero_coherence`` marks ``Delta > 1e-6`` with ``|I(A>B|L')| <= 1e-6``.
    """
    cfg_num = numerics()
    css = build_conditional_states(cfg)
    meas = cfg.measurement
    detailed = rate_detailed(css, meas)
    coh, coh_per = conditional_coherent_information(css)
    rank_one = is_rank_one(meas)
    if rank_one:
        general = general_rate_by_label(css, meas)
        r_general = sum(e.probability * general[e.label[0]] for e in css.ab_states)
        gammas = gamma_by_label(css, meas)
        gamma = sum(e.probability * gammas[e.label[0]] for e in css.by_fake_label)
        residual = abs(detailed.R_star - (coh + gamma + detailed.Delta))
        theorem_ok = bool(detailed.R_star >= coh + detailed.Delta - cfg_num.theorem)
    else:
        general = gammas = None
        r_general = gamma = residual = theorem_ok = None
    flag = bool(detailed.Delta > 1e-6 and abs(coh) <= 1e-6)
    return RateReport(
        R=r_general,
        R_prime=detailed.R_prime,
        R_star=detailed.R_star,
        Delta=detailed.Delta,
        gamma=gamma,
        coherent_conditional=coh,
        per_label=_per_label(css, detailed, coh_per, gammas, general),
        theorem_ok=theorem_ok,
        identity_residual=residual,
        rank_one=rank_one,
        delta_at_zero_coherence=flag,
        bob_holevo=detailed.bob_holevo,
        eve_holevo_true=detailed.eve_holevo_true,
        eve_holevo_fake=detailed.eve_holevo_fake,
    )
