"""Protocol-level identities on random scenarios, combined with the entropic inequality suite."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .infotheory import InequalityReport, InequalityResult, SuiteCounts, check_inequalities, entropy
from .protocol import build_conditional_states, theorem_certificate
from .scenario import random_spec, resolve
from .tensorspace import numerics


@dataclass(frozen=True)
class CheckCounts(SuiteCounts):
    scenarios: int = 50


def protocol_suite(seed: int = 0, count: int = 50) -> InequalityReport:
    """Worst residuals of the rate identities over ``count`` random scenarios."""
    tol = numerics()
    theorem = identity = decomposition = gamma = mean = consistency = 0.0
    for i in range(count):
        cfg = resolve(random_spec(seed, i))
        rep = theorem_certificate(cfg)
        theorem = max(theorem, rep.coherent_conditional + rep.Delta - rep.R_star)
        identity = max(identity, rep.identity_residual)
        decomposition = max(decomposition, abs(rep.R_star - rep.R_prime - rep.Delta))
        gamma = max(gamma, -rep.gamma)
        css = build_conditional_states(cfg)
        ab_true = css.by_label.reduce(["A", "B"]).average()
        mean = max(mean, float(np.max(np.abs(css.ab_states.average() - ab_true))))
        consistency = max(consistency, css.consistency_residual())
    return InequalityReport([
        InequalityResult("theorem_inequality", count, theorem, tol.theorem),
        InequalityResult("rate_identity", count, identity, tol.identity),
        InequalityResult("exact_decomposition", count, decomposition, 1e-10),
        InequalityResult("gamma_nonnegative", count, gamma, 1e-8),
        InequalityResult("cheating_mean_preserved", count, mean, 1e-10),
        InequalityResult("conditional_state_consistency", count, consistency, 1e-10),
    ])


def self_check(seed: int = 0, counts: CheckCounts = CheckCounts(), entropy_fn=entropy) -> InequalityReport:
    report = check_inequalities(seed, counts, entropy_fn)
    report.results.extend(protocol_suite(seed, counts.scenarios).results)
    return report
