import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import framelab as fl
from framelab.covers import build_cover, functional_matrix, make_functionals, part_pairings, spacing_for_level
from framelab.errors import ConfigurationError, ContractViolation


def test_spacing_examples():
    # delta -> 1 limits and the mixed-parameter arithmetic case
    assert spacing_for_level(0, 1 - 1e-12, 1.0, 1) == pytest.approx(2**-0.5, rel=1e-9)
    assert spacing_for_level(2, 1 - 1e-12, 1.0, 1) == pytest.approx(2**-1.5, rel=1e-9)
    assert spacing_for_level(3, 0.5, 0.4, 2) == pytest.approx(0.4 * 0.5**0.5 * 0.25)


def test_spacing_validation():
    with pytest.raises(ConfigurationError):
        spacing_for_level(0, 1.5, 1.0, 1)
    with pytest.raises(ConfigurationError):
        spacing_for_level(0, 0.5, -1.0, 1)
    with pytest.raises(ContractViolation):
        spacing_for_level(-1, 0.5, 1.0, 1)


def test_cover_1d_counts():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.125)
    cover = build_cover(dom, 0.3)
    assert cover.n_parts == 3
    np.testing.assert_array_equal(cover.counts, [2, 2, 3])


def test_cover_single_part():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.125)
    cover = build_cover(dom, 5.0)
    assert cover.n_parts == 1
    assert cover.counts[0] == dom.n_nodes


def test_cover_square_counts():
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.25)
    cover = build_cover(dom, 0.5)
    assert cover.n_parts == 4
    np.testing.assert_array_equal(cover.counts, [1, 2, 2, 4])
    # part ordering is lexicographic in the cube index
    assert [tuple(c) for c in cover.cube_indices] == [(0, 0), (0, 1), (1, 0), (1, 1)]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0))
def test_cover_partitions_nodes(rho):
    dom = fl.build_domain("disk", {"radius": 1.0}, 1.0 / 10)
    cover = build_cover(dom, rho)
    seen = np.concatenate([cover.part_nodes(i) for i in range(cover.n_parts)])
    assert sorted(seen) == list(range(dom.n_nodes))
    assert cover.counts.min() >= 1
    # every node sits in its cube and parts have bounded spread
    for i in range(cover.n_parts):
        pts = dom.coords[cover.part_nodes(i)]
        lo = cover.cube_indices[i] * rho
        assert np.all(pts >= lo - 1e-12) and np.all(pts < lo + rho + 1e-12)
        spread = pts.max(axis=0) - pts.min(axis=0)
        assert np.linalg.norm(spread) <= np.sqrt(dom.dim) * rho + 1e-12


def test_functionals_normalized():
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.25)
    cover = build_cover(dom, 0.5)
    phis = make_functionals(cover, dom)
    for phi in phis:
        g = phi.to_grid(dom)
        assert dom.norm(g) == pytest.approx(1.0, abs=1e-13)
        assert dom.inner(np.ones(dom.n_nodes), g) == pytest.approx(np.sqrt(phi.measure), rel=1e-12)


def test_functional_value_example():
    # part with 4 nodes and weight 1/16 has measure 1/4 and height 2
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.25)
    cover = build_cover(dom, 0.5)
    phis = make_functionals(cover, dom)
    four = [p for p in phis if p.nodes.size == 4]
    assert four and four[0].measure == pytest.approx(0.25)
    g = four[0].to_grid(dom)
    assert g[four[0].nodes[0]] == pytest.approx(2.0)


def test_constant_function_saturates_upper_bound():
    dom = fl.build_domain("disk", {"radius": 1.0}, 1.0 / 12)
    cover = build_cover(dom, 0.37)
    phis = make_functionals(cover, dom)
    c = 1.7
    f = np.full(dom.n_nodes, c)
    total = sum(phi.pair(f) ** 2 for phi in phis)
    assert total == pytest.approx(c * c * dom.measure, rel=1e-12)
    assert total <= dom.inner(f, f) * (1 + 1e-12)


def test_projection_upper_bound_random():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 64)
    cover = build_cover(dom, 0.11)
    mat = functional_matrix(cover, dom)
    rng = np.random.default_rng(0)
    for _ in range(50):
        f = rng.standard_normal(dom.n_nodes)
        coeffs = dom.weight * (mat.T @ f)
        assert (coeffs @ coeffs) <= dom.inner(f, f) * (1 + 1e-12)


def test_part_pairings_matches_functionals():
    dom = fl.build_domain("rectangle", {"x0": 0, "x1": 1, "y0": 0, "y1": 1}, 0.125)
    cover = build_cover(dom, 0.3)
    phis = make_functionals(cover, dom)
    rng = np.random.default_rng(1)
    f = rng.standard_normal(dom.n_nodes)
    bulk = part_pairings(cover, dom, f)[:, 0]
    loop = np.array([phi.pair(f) for phi in phis])
    np.testing.assert_allclose(bulk, loop, rtol=1e-12, atol=1e-14)


def test_refinement_monotonicity():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 128)
    rng = np.random.default_rng(2)
    rho = 0.23
    coarse = functional_matrix(build_cover(dom, rho), dom)
    fine = functional_matrix(build_cover(dom, rho / 2), dom)
    for _ in range(25):
        f = rng.standard_normal(dom.n_nodes)
        e_coarse = dom.weight**2 * float(((coarse.T @ f) ** 2).sum())
        e_fine = dom.weight**2 * float(((fine.T @ f) ** 2).sum())
        assert e_fine >= e_coarse - 1e-12 * dom.inner(f, f)


def test_functional_integral_and_cube_volume():
    dom = fl.build_domain("disk", {"radius": 1.0}, 1.0 / 16)
    rho = 0.29
    cover = build_cover(dom, rho)
    for phi in make_functionals(cover, dom):
        assert fl.functional_integral(phi) == pytest.approx(np.sqrt(phi.measure))
        # quadrature cells sticking out of the cube inflate the sub-cube
        # volume bound by at most one cell per axis
        assert phi.measure <= (rho + dom.h) ** dom.dim + 1e-12
        assert phi.measure > 0


def test_center_point_functionals():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 32)
    cover = build_cover(dom, 0.26)
    phis = make_functionals(cover, dom, kind="center")
    rng = np.random.default_rng(3)
    f = rng.standard_normal(dom.n_nodes)
    for phi in phis:
        assert phi.center_node in phi.nodes
        expected = np.sqrt(phi.measure) * f[phi.center_node]
        assert phi.pair(f) == pytest.approx(expected, rel=1e-12)
        assert dom.inner(f, phi.to_grid(dom)) == pytest.approx(expected, rel=1e-12)


def test_unknown_functional_kind():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.25)
    with pytest.raises(ConfigurationError):
        make_functionals(build_cover(dom, 0.5), dom, kind="median")
