import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relayqkd.tensorspace import (
    DimensionError, LayoutError, NumericConfig, NumericError, RegisterLayout, clip_spectrum,
    hermitian_eigensystem, numerics, partial_trace, permute_registers, tensor_product,
    use_numerics, validate_density,
)

from oracles import PHI_PLUS, kron_by_index, proj, random_density, random_hermitian, trace_second, werner


AB = RegisterLayout.of(("A", 2), ("B", 2))


def test_tensor_identities():
    assert np.allclose(tensor_product(np.eye(2), np.eye(2)), np.eye(4))


def test_tensor_basis_product():
    out = tensor_product(proj([1, 0]), proj([0, 1]))
    expected = np.zeros((4, 4))
    expected[1, 1] = 1
    assert np.allclose(out, expected)


@pytest.mark.parametrize("seed", range(5))
def test_tensor_matches_index_formula(seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert np.allclose(tensor_product(a, b), kron_by_index(a, b), atol=1e-14)


def test_tensor_respects_dmax():
    with use_numerics(NumericConfig(dmax=8)):
        with pytest.raises(DimensionError):
            tensor_product(np.eye(4), np.eye(4))


def test_partial_trace_bell_is_maximally_mixed():
    assert np.allclose(partial_trace(proj(PHI_PLUS), AB, ["A"]), np.eye(2) / 2, atol=1e-15)


@pytest.mark.parametrize("seed", range(3))
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    ra, rb = random_density(rng, 2), random_density(rng, 3)
    layout = RegisterLayout.of(("A", 2), ("B", 3))
    assert np.allclose(partial_trace(np.kron(ra, rb), layout, ["A"]), ra, atol=1e-14)
    assert np.allclose(partial_trace(np.kron(ra, rb), layout, ["B"]), rb, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_partial_trace_matches_index_sum(seed):
    rng = np.random.default_rng(seed)
    m = random_density(rng, 6)
    layout = RegisterLayout.of(("A", 2), ("B", 3))
    assert np.allclose(partial_trace(m, layout, ["A"]), trace_second(m, 2, 3), atol=1e-14)


def test_partial_trace_keeps_original_order():
    rng = np.random.default_rng(1)
    ra, rb, rc = (random_density(rng, d) for d in (2, 3, 2))
    layout = RegisterLayout.of(("A", 2), ("B", 3), ("C", 2))
    m = np.kron(np.kron(ra, rb), rc)
    assert np.allclose(partial_trace(m, layout, ["C", "A"]), np.kron(ra, rc), atol=1e-14)


def test_partial_trace_full_keep_is_identity():
    m = random_density(np.random.default_rng(0), 4)
    assert np.array_equal(partial_trace(m, AB, ["A", "B"]), m)


def test_partial_trace_rejects_unknown_register():
    with pytest.raises(LayoutError):
        partial_trace(np.eye(4) / 4, AB, ["Z"])


layouts = st.lists(st.integers(1, 3), min_size=1, max_size=3).map(
    lambda ds: RegisterLayout(tuple((f"R{i}", d) for i, d in enumerate(ds)))
)


@settings(max_examples=40, deadline=None)
@given(layout=layouts, seed=st.integers(0, 2**31), data=st.data())
def test_partial_trace_preserves_trace(layout, seed, data):
    rng = np.random.default_rng(seed)
    d = layout.total_dim
    m = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    keep = data.draw(st.lists(st.sampled_from(layout.names), min_size=1, unique=True))
    assert abs(np.trace(partial_trace(m, layout, keep)) - np.trace(m)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), da=st.integers(1, 4), db=st.integers(1, 4))
def test_tensor_trace_multiplicative(seed, da, db):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((da, da)) + 1j * rng.standard_normal((da, da))
    b = rng.standard_normal((db, db)) + 1j * rng.standard_normal((db, db))
    assert abs(np.trace(tensor_product(a, b)) - np.trace(a) * np.trace(b)) < 1e-10


def test_permute_identity_order():
    m = random_density(np.random.default_rng(2), 4)
    assert np.allclose(permute_registers(m, AB, ["A", "B"]), m)


def test_permute_swaps_basis_state():
    ket01 = proj([0, 1, 0, 0])
    assert np.allclose(permute_registers(ket01, AB, ["B", "A"]), proj([0, 0, 1, 0]))


TRIPARTITE = RegisterLayout.of(("A", 2), ("B", 3), ("C", 2))


@pytest.mark.parametrize("order", list(itertools.permutations("ABC")))
def test_permute_preserves_spectrum_and_inverts(order):
    m = random_density(np.random.default_rng(3), 12)
    out = permute_registers(m, TRIPARTITE, list(order))
    assert np.allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(m), atol=1e-12)
    back = permute_registers(out, TRIPARTITE.reordered(order), list("ABC"))
    assert np.max(np.abs(back - m)) < 1e-12


def test_permute_rejects_non_permutation():
    with pytest.raises(LayoutError):
        permute_registers(np.eye(4), AB, ["A", "A"])


def test_eigensystem_diagonal():
    spec = hermitian_eigensystem(np.diag([0.3, 0.7]))
    assert np.allclose(spec.eigenvalues, [0.7, 0.3])


@pytest.mark.parametrize("d", [1, 2, 5])
def test_eigensystem_maximally_mixed(d):
    assert np.allclose(hermitian_eigensystem(np.eye(d) / d).eigenvalues, 1 / d)


@pytest.mark.parametrize("seed", range(100))
def test_eigensystem_reconstruction(seed):
    rng = np.random.default_rng(seed)
    m = random_hermitian(rng, 1 + seed % 16)
    residual = np.max(np.abs(hermitian_eigensystem(m).reconstruct() - m))
    assert residual <= numerics().eig


def test_eigensystem_names_asymmetry():
    m = np.array([[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(NumericError, match="5.000e-01|0.5"):
        hermitian_eigensystem(m)


def test_validate_density_cases():
    assert validate_density(proj(PHI_PLUS))
    assert not validate_density(np.diag([1.2, -0.2]))
    assert not validate_density(np.diag([0.5, 0.4]))
    assert not validate_density(np.array([[0.5, 0.1], [0.0, 0.5]]))


@pytest.mark.parametrize("p", np.linspace(0, 1, 11))
def test_validate_density_werner(p):
    assert validate_density(werner(p))


def test_clip_spectrum_removes_dust():
    clipped, removed = clip_spectrum(np.array([0.6, 0.4 + 1e-12, -1e-12]))
    assert np.all(clipped >= 0)
    assert abs(clipped.sum() - 1) < 1e-15
    assert removed == pytest.approx(1e-12)


def test_clip_spectrum_rejects_real_negativity():
    with pytest.raises(NumericError):
        clip_spectrum(np.array([1.1, -0.1]))


def test_layout_validation():
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", 2), ("A", 2))
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", 0))
    assert RegisterLayout.from_list(AB.to_list()) == AB


def test_scaled_tolerances_keep_dmax():
    cfg = NumericConfig().scaled(10)
    assert cfg.herm == pytest.approx(1e-8)
    assert cfg.dmax == 256
