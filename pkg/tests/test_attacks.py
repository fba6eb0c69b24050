import numpy as np
import pytest

from relayqkd.attacks import (
    PRESETS, RELAY_INPUT, bell_instrument, computational_measurement, depolarized_instrument, dos_channel,
    hadamard_measurement, identity_channel, leaky_bell_instrument, partial_leak_channel, random_channel,
    random_instrument, random_isometry, random_rank_one_measurement, sic_measurement,
)
from relayqkd.channels import apply_instrument, is_rank_one, validate_instrument, validate_measurement
from relayqkd.protocol import build_conditional_states, rate_detailed
from relayqkd.scenario import ideal_spec, resolve, set_path
from relayqkd.states import PureState, random_density
from relayqkd.tensorspace import DimensionError, RegisterLayout

from oracles import BELL, PHI_PLUS, proj, trace_first, trace_second

SWAP = RegisterLayout.of(("A", 2), ("A'", 2), ("B", 2), ("B'", 2))


def swap_input():
    return PureState(SWAP, np.kron(PHI_PLUS, PHI_PLUS)).density()


def test_bell_instrument_weights_and_states():
    instr = bell_instrument()
    assert validate_instrument(instr).trace_preserving
    ens = apply_instrument(instr, swap_input(), ["A'", "B'"])
    assert np.allclose(ens.probabilities, 0.25, atol=1e-12)
    for l, e in enumerate(ens.reduce(["A", "B"])):
        assert np.allclose(e.state.matrix, proj(BELL[l]), atol=1e-12)


def test_depolarized_q0_is_bell():
    rho = random_density(SWAP, 3, seed=0)
    a = apply_instrument(depolarized_instrument(0.0), rho, ["A'", "B'"])
    b = apply_instrument(bell_instrument(), rho, ["A'", "B'"])
    assert np.allclose(a.probabilities, b.probabilities)
    for x, y in zip(a, b):
        assert np.allclose(x.state.matrix, y.state.matrix)


def test_depolarized_q1_is_label_independent():
    pair = RegisterLayout.of(("A", 2), ("A'", 2))
    rho = random_density(pair, 3, seed=1).tensor(random_density(RegisterLayout.of(("B", 2), ("B'", 2)), 2, seed=2))
    ens = apply_instrument(depolarized_instrument(1.0), rho, ["A'", "B'"]).reduce(["A", "B"])
    assert np.allclose(ens.probabilities, 0.25)
    for e in ens:
        m = e.state.matrix
        assert np.max(np.abs(m - np.kron(trace_second(m, 2, 2), trace_first(m, 2, 2)))) < 1e-10


def test_depolarized_tp():
    assert validate_instrument(depolarized_instrument(0.3)).trace_preserving


def test_depolarized_lipschitz():
    rho = random_density(SWAP, 4, seed=2)
    for q in np.linspace(0, 0.99, 12):
        a = apply_instrument(depolarized_instrument(q), rho, ["A'", "B'"])
        b = apply_instrument(depolarized_instrument(q + 0.01), rho, ["A'", "B'"])
        for x, y in zip(a, b):
            assert np.max(np.abs(x.state.matrix - y.state.matrix)) <= 0.1


@pytest.mark.parametrize("q", [-0.1, 1.1])
def test_depolarized_range(q):
    with pytest.raises(ValueError):
        depolarized_instrument(q)


def test_dos_uniform_rows():
    assert np.allclose(dos_channel(4).matrix, 0.25)


def test_dos_target_checked():
    with pytest.raises(ValueError):
        dos_channel(4, [0.5, 0.5, 0.5, -0.5])


def test_dos_scenario_rates_and_factorization():
    cfg = resolve(set_path(ideal_spec(), "cheating", {"preset": "dos"}))
    css = build_conditional_states(cfg)
    assert abs(rate_detailed(css, cfg.measurement).Delta) < 1e-12
    for e in css.ab_states:
        m = e.state.matrix
        assert np.max(np.abs(m - np.kron(trace_second(m, 2, 2), trace_first(m, 2, 2)))) < 1e-10


def test_partial_leak_endpoints():
    assert np.array_equal(partial_leak_channel(0.0, 4).matrix, np.eye(4))
    assert np.allclose(partial_leak_channel(1.0, 4).matrix, dos_channel(4).matrix)
    assert np.allclose(partial_leak_channel(0.37, 4).matrix.sum(1), 1, atol=1e-15)


@pytest.mark.parametrize("seed", range(20))
def test_random_instrument_valid(seed):
    branches, e_dim = 1 + seed % 4, 1 + seed % 2
    kraus = -(-4 // (branches * e_dim))
    instr = random_instrument(branches=branches, kraus_per_branch=kraus, e_dim=e_dim, seed=seed)
    assert validate_instrument(instr).trace_preserving
    ens = apply_instrument(instr, random_density(SWAP, 2, seed=seed), ["A'", "B'"])
    assert abs(ens.probabilities.sum() - 1) < 1e-10


def test_random_instrument_deterministic():
    a = random_instrument(branches=3, kraus_per_branch=2, e_dim=2, seed=8)
    b = random_instrument(branches=3, kraus_per_branch=2, e_dim=2, seed=8)
    for x, y in zip(a.branches, b.branches):
        for k1, k2 in zip(x.kraus_ops, y.kraus_ops):
            assert np.array_equal(k1, k2)


def test_random_instrument_too_small():
    with pytest.raises(DimensionError):
        random_instrument(branches=1, kraus_per_branch=1, e_dim=2, seed=0)


def test_random_isometry():
    v = random_isometry(6, 3, 1)
    assert np.allclose(v.conj().T @ v, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("theta", [0.0, 0.1, 1.0])
def test_leaky_bell_valid(theta):
    instr = leaky_bell_instrument(theta, e_dim=2, seed=3)
    assert validate_instrument(instr).trace_preserving
    assert instr.input_layout == RELAY_INPUT


def test_leaky_bell_zero_is_ideal():
    rho = random_density(SWAP, 2, seed=4)
    a = apply_instrument(leaky_bell_instrument(0.0, e_dim=2), rho, ["A'", "B'"]).reduce(["A", "B"])
    b = apply_instrument(bell_instrument(), rho, ["A'", "B'"]).reduce(["A", "B"])
    for x, y in zip(a, b):
        assert x.probability == pytest.approx(y.probability)
        assert np.allclose(x.state.matrix, y.state.matrix, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_random_channel_rows(seed):
    ch = random_channel(4, 3, seed)
    assert ch.matrix.shape == (4, 3)
    assert np.allclose(ch.matrix.sum(1), 1)


def test_measurements():
    for meas in (computational_measurement(2), computational_measurement(3), hadamard_measurement(),
                 sic_measurement(), random_rank_one_measurement(2, 3, 5)):
        assert validate_measurement(meas) < 1e-12
        assert is_rank_one(meas)


def test_presets_construct_valid_objects():
    for preset in PRESETS.values():
        instr = preset.instrument(0.2) if preset.name == "noisy_relay" else preset.instrument()
        assert validate_instrument(instr).trace_preserving
        chan = preset.cheating(0.3) if preset.name == "partial_leak" else preset.cheating()
        assert np.allclose(chan.matrix.sum(1), 1)
    assert np.array_equal(identity_channel(3).matrix, np.eye(3))
