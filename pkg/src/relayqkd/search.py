"""Randomized search for scenarios with classical cheating but no conditional coherent information.

Each candidate is a random scenario spec (random resources, random
instrument with a quantum output, random cheating channel, random rank-one
POVM).  White noise ``t`` is mixed into both resources and tuned by root
finding so that ``I(A>B|L')`` crosses zero; the candidate is then scored by
``min(Delta, coherence_tol - |I(A>B|L')|)``.  Candidate 0 is always the
ideal entanglement-swapping scenario.
"""
from __future__ import annotations

import concurrent.futures
import copy
from dataclasses import asdict, dataclass, field
import numpy as np
from scipy.optimize import brentq

from .protocol import build_conditional_states, conditional_coherent_information, theorem_certificate
from .scenario import ideal_spec, normalize, resolve
from .tensorspace import NumericConfig, numerics, use_numerics


@dataclass(frozen=True)
class SearchDims:
    a: int = 2
    a_tx: int = 2
    b: int = 2
    b_tx: int = 2
    e_max: int = 2
    max_labels: int = 4
    max_outcomes: int = 4


@dataclass
class CandidateResult:
    index: int
    spec: dict
    noise: float
    Delta: float
    coherent_conditional: float
    R_star: float
    score: float
    evaluations: int
    witness: bool = False
    verified: bool = False


@dataclass
class SearchResult:
    seed: int
    budget: int
    dims: dict
    coherence_tol: float
    delta_threshold: float
    evaluations: int
    best: dict  # candidate index, noise, scenario spec
    Delta: float
    coherent_conditional: float
    R_star: float
    score: float
    witness: bool
    verified: bool
    witnesses: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def candidate_spec(index: int, seed: int, dims: SearchDims) -> dict:
    """Deterministic random scenario for candidate ``index`` (0 is the ideal swap)."""
    if index == 0:
        return normalize(ideal_spec("search_candidate_0"))
    rng = np.random.default_rng([seed, index])

    def draw() -> int:
        return int(rng.integers(1, 2**31 - 1))

    # low-rank resources keep I(A>B|L') positive before noise is added
    def low_rank(d: int) -> int:
        return int(rng.integers(1, min(d, 2) + 1))

    qubit_relay = dims.a_tx == 2 and dims.b_tx == 2
    d_in = dims.a_tx * dims.b_tx
    e_dim = int(rng.integers(1, dims.e_max + 1))

    def resource(side: str, d0: int, d1: int) -> dict:
        if qubit_relay and d0 == 2 and rng.random() < 0.5:
            return {"family": "bell", "kind": int(rng.integers(4))}
        return {"family": "random", "dims": [d0, d1], "rank": low_rank(d0 * d1), "seed": draw()}

    if qubit_relay and dims.e_max >= 2 and rng.random() < 0.5:
        instrument = {"preset": "leaky_bell", "theta": float(rng.uniform(0.0, 1.5)),
                      "e_dim": max(e_dim, 2), "kraus_per_branch": 1, "seed": draw()}
        branches = 4
    else:
        branches = int(rng.integers(2, dims.max_labels + 1))
        kraus = max(1, -(-d_in // (branches * e_dim)))
        instrument = {"preset": "random", "branches": branches, "kraus_per_branch": kraus,
                      "e_dim": e_dim, "seed": draw()}
    if rng.random() < 0.5:
        cheating = {"preset": "partial_leak", "eps": float(rng.uniform(0.0, 0.6))}
    else:
        cheating = {"preset": "random", "outputs": int(rng.integers(1, dims.max_labels + 1)), "seed": draw()}
    spec = {
        "metadata": {"name": f"search_candidate_{index}", "seed": int(seed)},
        "states": {"alice": resource("alice", dims.a, dims.a_tx), "bob": resource("bob", dims.b, dims.b_tx)},
        "instrument": instrument,
        "cheating": cheating,
        "measurement": {"preset": "random_rank_one",
                        "outcomes": int(rng.integers(dims.a, dims.max_outcomes + 1)), "seed": draw()},
    }
    return normalize(spec)


def with_noise(spec: dict, t: float) -> dict:
    out = copy.deepcopy(spec)
    for side in ("alice", "bob"):
        out["states"][side]["noise"] = float(t)
    return out


def _coherent(spec: dict) -> float:
    return conditional_coherent_information(build_conditional_states(resolve(spec)))[0]


def _tune_noise(spec: dict, xtol: float) -> tuple[float, int]:
    """Smallest-noise zero of ``I(A>B|L')`` along the white-noise path, or 0 if already non-positive."""
    f0 = _coherent(with_noise(spec, 0.0))
    if f0 <= 0:
        return 0.0, 1
    calls = [1]

    def f(t):
        calls[0] += 1
        return _coherent(with_noise(spec, t))

    t = brentq(f, 0.0, 1.0, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return float(t), calls[0]


def evaluate_candidate(
    index: int, seed: int, dims: SearchDims, coherence_tol: float, delta_threshold: float,
    numeric: NumericConfig | None = None,
) -> CandidateResult:
    with use_numerics(numeric or numerics()):
        spec = candidate_spec(index, seed, dims)
        t, calls = _tune_noise(spec, xtol=1e-12) if index else (0.0, 0)
        tuned = with_noise(spec, t)
        report = theorem_certificate(resolve(tuned))
        coh, delta = report.coherent_conditional, report.Delta
        score = min(delta, coherence_tol - abs(coh))
        result = CandidateResult(index, tuned, t, delta, coh, report.R_star, score, calls + 1)
        if abs(coh) <= coherence_tol and delta > delta_threshold:
            result.witness = True
            result.verified = _verify(spec)
        return result


def _verify(spec: dict) -> bool:
    """Re-tune with a tighter root tolerance and check both conditions at 1e-6."""
    t, _ = _tune_noise(spec, xtol=1e-15)
    report = theorem_certificate(resolve(with_noise(spec, t)))
    return abs(report.coherent_conditional) <= 1e-6 and report.Delta > 1e-6 and bool(report.theorem_ok)


def search_positive_delta(
    budget: int,
    dims: SearchDims | None = None,
    seed: int = 0,
    coherence_tol: float = 1e-4,
    delta_threshold: float = 1e-4,
    jobs: int = 1,
) -> SearchResult:
    """Evaluate ``budget`` candidates and return the best score found.

    A result with ``witness=False`` is a normal outcome; the search makes no
    existence claim either way.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    dims = dims or SearchDims()
    args = [(i, seed, dims, coherence_tol, delta_threshold, numerics()) for i in range(budget)]
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(evaluate_candidate, *zip(*args)))
    else:
        results = [evaluate_candidate(*a) for a in args]
    best = max(results, key=lambda r: (r.score, r.Delta, -r.index))
    return SearchResult(
        seed=seed,
        budget=budget,
        dims=asdict(dims),
        coherence_tol=coherence_tol,
        delta_threshold=delta_threshold,
        evaluations=sum(r.evaluations for r in results),
        best={"candidate": best.index, "noise": best.noise, "scenario": best.spec},
        Delta=best.Delta,
        coherent_conditional=best.coherent_conditional,
        R_star=best.R_star,
        score=best.score,
        witness=best.witness,
        verified=best.verified,
        witnesses=[r.index for r in results if r.witness],
    )


def reevaluate(result: SearchResult):
    """Re-run the certificate on the stored best scenario."""
    return theorem_certificate(resolve(result.best["scenario"]))
