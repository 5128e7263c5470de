import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import framelab as fl
from framelab.errors import ConfigurationError, ContractViolation, EmptyDomainError


def test_interval_nodes():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.25)
    assert dom.n_nodes == 3
    np.testing.assert_allclose(dom.coords[:, 0], [0.25, 0.5, 0.75])


def test_unit_square_nodes():
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.25)
    assert dom.n_nodes == 9
    assert dom.dim == 2
    xs = sorted(set(dom.coords[:, 0]))
    assert xs == [0.25, 0.5, 0.75]


def test_disk_nodes_against_enumeration():
    h = 0.5
    dom = fl.build_domain("disk", {"radius": 1.0}, h)
    # oracle: walk the lattice by hand and apply the strict predicate
    expected = set()
    for i in range(9):
        for j in range(9):
            x, y = -1.0 + i * h, -1.0 + j * h
            if x * x + y * y < 1.0:
                expected.add((round(x, 10), round(y, 10)))
    got = {(round(x, 10), round(y, 10)) for x, y in dom.coords}
    assert got == expected
    assert dom.n_nodes == 9  # boundary points (+-1, 0), (0, +-1) excluded


def test_empty_domain():
    with pytest.raises(EmptyDomainError):
        fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 2.0)


def test_unknown_kind():
    with pytest.raises(ConfigurationError):
        fl.build_domain("triangle", {}, 0.1)


def test_degenerate_shape():
    with pytest.raises(ConfigurationError):
        fl.build_domain("disk", {"radius": -1.0}, 0.1)
    with pytest.raises(ConfigurationError):
        fl.build_domain("annulus", {"r_inner": 1.0, "r_outer": 0.5}, 0.1)


def test_deterministic_enumeration():
    a = fl.build_domain("ellipse", {"rx": 1.0, "ry": 0.6}, 0.07)
    b = fl.build_domain("ellipse", {"rx": 1.0, "ry": 0.6}, 0.07)
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_array_equal(a.coords, b.coords)


def test_indices_unique():
    dom = fl.build_domain("annulus", {"r_inner": 0.3, "r_outer": 1.0}, 0.09)
    assert len({tuple(k) for k in dom.indices}) == dom.n_nodes
    # every node satisfies the strict predicate
    rho2 = (dom.coords ** 2).sum(axis=1)
    assert np.all((rho2 > 0.09) & (rho2 < 1.0))


def test_disk_measure_refinement(baselines):
    errors = {}
    for r in baselines["disk_measure_halving_resolutions"]:
        dom = fl.build_domain("disk", {"radius": 1.0}, 1.0 / r)
        errors[r] = abs(dom.measure - np.pi)
    assert errors[32] <= 0.5 * errors[16]
    assert errors[64] <= 0.5 * errors[32]


def test_inner_product_constant():
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.25)
    ones = np.ones(dom.n_nodes)
    assert dom.inner(ones, ones) == pytest.approx(9 / 16)
    assert dom.inner(np.zeros(dom.n_nodes), ones) == 0.0


def test_inner_product_mismatch():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.25)
    with pytest.raises(ContractViolation):
        dom.inner(np.ones(4), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.lists(st.floats(-10, 10), min_size=3, max_size=3),
       st.floats(-3, 3))
def test_inner_product_bilinear_symmetric(fvals, gvals, c):
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.25)
    f, g = np.array(fvals), np.array(gvals)
    assert dom.inner(f, g) == pytest.approx(dom.inner(g, f), abs=1e-12)
    assert dom.inner(c * f, g) == pytest.approx(c * dom.inner(f, g), rel=1e-12, abs=1e-12)
    assert dom.inner(f, f) >= 0.0


def test_norm_zero_iff_zero():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.125)
    assert dom.norm(np.zeros(dom.n_nodes)) == 0.0
    f = np.zeros(dom.n_nodes)
    f[3] = 1e-8
    assert dom.norm(f) > 0.0
