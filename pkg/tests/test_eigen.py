import math

import numpy as np
import pytest

import framelab as fl
from framelab.eigen import dim_resolved_span, load_eigenbasis, save_eigenbasis
from framelab.errors import CacheMismatchError, ContractViolation, UnresolvedBandError


@pytest.fixture(scope="module")
def interval_512():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 512)
    op = fl.assemble(dom, fl.identity_coefficient())
    return dom, op, fl.solve_lowest(op, dom, m=10)


def test_interval_eigenvalues_vs_sine_modes(interval_512):
    _, _, basis = interval_512
    k = np.arange(1, 11)
    continuum = (k * np.pi) ** 2
    rel = np.abs(basis.eigenvalues - continuum) / continuum
    assert rel[0] < 1e-3
    assert rel[9] < 1e-3


def test_orthonormality_and_residual(interval_512):
    dom, op, basis = interval_512
    gram = dom.weight * basis.vectors.T @ basis.vectors
    np.testing.assert_allclose(gram, np.eye(basis.m), atol=1e-10)
    assert basis.max_residual <= basis.residual_tol
    assert np.all(np.diff(basis.eigenvalues) >= 0)
    assert basis.eigenvalues[0] > 0


def test_m_out_of_range(interval_512):
    dom, op, _ = interval_512
    with pytest.raises(ContractViolation):
        fl.solve_lowest(op, dom, m=dom.n_nodes + 1)


def test_reliability_clipping_warns():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 0.125)
    op = fl.assemble(dom, fl.identity_coefficient())
    with pytest.warns(UserWarning):
        basis = fl.solve_lowest(op, dom, m=dom.n_nodes)
    assert basis.m < dom.n_nodes
    assert basis.lambda_max <= basis.lambda_reliable


def test_dense_vs_iterative_agreement():
    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 1024)
    op = fl.assemble(dom, fl.identity_coefficient())
    dense = fl.solve_lowest(op, dom, m=10, dense_threshold=4096)
    iterative = fl.solve_lowest(op, dom, m=10, dense_threshold=0)
    np.testing.assert_allclose(dense.eigenvalues, iterative.eigenvalues, rtol=1e-8)
    # both paths meet the orthonormality contract
    gram = dom.weight * iterative.vectors.T @ iterative.vectors
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-10)


def test_iterative_deterministic():
    dom = fl.build_domain("disk", {"radius": 1.0}, 1.0 / 24)
    op = fl.assemble(dom, fl.identity_coefficient())
    a = fl.solve_lowest(op, dom, m=6, dense_threshold=0, seed=7)
    b = fl.solve_lowest(op, dom, m=6, dense_threshold=0, seed=7)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.vectors, b.vectors)


def test_dim_resolved_span_square(square_battery):
    basis = square_battery.basis
    # oracle: continuum sine-mode lattice count
    def lattice_count(omega):
        count = 0
        top = int(math.isqrt(int(omega / np.pi**2)) + 2)
        for m in range(1, top + 1):
            for n in range(1, top + 1):
                if np.pi**2 * (m * m + n * n) <= omega:
                    count += 1
        return count

    assert dim_resolved_span(basis, 100.0) == lattice_count(100.0) == 6
    assert dim_resolved_span(basis, basis.eigenvalues[0] * 0.5) == 0
    for omega in (100.0, 200.0, 400.0):
        ratio = dim_resolved_span(basis, omega) / omega / (1.0 / (4.0 * np.pi))
        assert 0.5 < ratio < 2.0


def test_dim_resolved_span_errors(interval_512):
    _, _, basis = interval_512
    with pytest.raises(UnresolvedBandError):
        dim_resolved_span(basis, basis.lambda_reliable * 2)
    with pytest.raises(UnresolvedBandError):
        dim_resolved_span(basis, basis.lambda_max * 1.5)  # reliable but not computed


def test_spectral_apply_identity_and_scaling(interval_512):
    dom, _, basis = interval_512
    f = basis.vectors @ np.linspace(1, 2, basis.m)
    out = fl.spectral_apply(basis, lambda lam: np.ones_like(lam), f)
    np.testing.assert_allclose(out, f, atol=1e-10 * dom.norm(f))
    u1 = basis.vectors[:, 0]
    out = fl.spectral_apply(basis, lambda lam: lam, u1)
    np.testing.assert_allclose(out, basis.eigenvalues[0] * u1, rtol=1e-10)


def test_spectral_apply_sqrt_composition(interval_512):
    dom, _, basis = interval_512
    f = basis.vectors @ np.ones(basis.m)
    once = fl.spectral_apply(basis, lambda lam: lam, f)
    twice = fl.spectral_apply(
        basis, lambda lam: np.sqrt(lam), fl.spectral_apply(basis, lambda lam: np.sqrt(lam), f)
    )
    np.testing.assert_allclose(twice, once, rtol=1e-10)


def test_spectral_apply_rejects_nonfinite(interval_512):
    dom, _, basis = interval_512
    f = basis.vectors[:, 0]
    with np.errstate(divide="ignore"):
        with pytest.raises(ContractViolation):
            fl.spectral_apply(basis, lambda lam: 1.0 / (lam - basis.eigenvalues[0]), f)


def test_bernstein_on_bandlimited_span(interval_512):
    dom, _, basis = interval_512
    rng = np.random.default_rng(5)
    omega = basis.eigenvalues[6]
    sel = basis.eigenvalues <= omega
    for r in (0.5, 1.0, 2.0):
        for _ in range(20):
            c = np.zeros(basis.m)
            c[sel] = rng.standard_normal(int(sel.sum()))
            f = basis.expand(c)
            lrf = fl.spectral_apply(basis, lambda lam: lam**r, f)
            assert dom.norm(lrf) <= omega**r * dom.norm(f) * (1 + 1e-12)
        # equality exactly when all mass sits on the top eigenvalue of the span
        top = basis.vectors[:, 6]
        ltop = fl.spectral_apply(basis, lambda lam: lam**r, top)
        assert dom.norm(ltop) == pytest.approx(omega**r * dom.norm(top), rel=1e-12)


def test_unresolved_component_reported(interval_512):
    dom, _, basis = interval_512
    rng = np.random.default_rng(9)
    f = rng.standard_normal(dom.n_nodes)  # rough noise is far from resolved
    assert basis.unresolved_norm(f) > 0
    inside = basis.expand(basis.coefficients(f))
    assert basis.unresolved_norm(inside) <= 1e-10 * dom.norm(inside)


def test_unreachable_tolerance_reports_residual():
    from framelab.errors import SolverError

    dom = fl.build_domain("interval", {"a": 0.0, "b": 1.0}, 1.0 / 64)
    op = fl.assemble(dom, fl.identity_coefficient())
    with pytest.raises(SolverError) as err:
        fl.solve_lowest(op, dom, m=5, tol=1e-18)
    assert err.value.best_residual is not None
    assert err.value.best_residual > 1e-18


def test_eigb_cache_roundtrip(tmp_path, interval_512):
    dom, op, basis = interval_512
    path = tmp_path / "basis.eigb"
    save_eigenbasis(path, basis)
    loaded = load_eigenbasis(path, dom, op.fingerprint)
    np.testing.assert_array_equal(loaded.eigenvalues, basis.eigenvalues)
    np.testing.assert_array_equal(loaded.vectors, basis.vectors)
    assert loaded.lambda_reliable == basis.lambda_reliable


def test_eigb_cache_layout(tmp_path, interval_512):
    import json as _json
    import struct

    _, op, basis = interval_512
    path = tmp_path / "basis.eigb"
    save_eigenbasis(path, basis)
    raw = path.read_bytes()
    assert raw[:4] == b"EIGB"
    version, hlen = struct.unpack("<II", raw[4:12])
    assert version == 1
    header = _json.loads(raw[12 : 12 + hlen])
    assert set(header) == {"dimension", "h", "node_count", "m", "tol", "fingerprint"}
    m, n = header["m"], header["node_count"]
    assert len(raw) == 12 + hlen + 8 * m + 8 * m * n
    vals = np.frombuffer(raw, dtype="<f8", count=m, offset=12 + hlen)
    np.testing.assert_array_equal(vals, basis.eigenvalues)


def test_eigb_cache_fingerprint_mismatch(tmp_path, interval_512):
    dom, op, basis = interval_512
    path = tmp_path / "basis.eigb"
    save_eigenbasis(path, basis)
    with pytest.raises(CacheMismatchError):
        load_eigenbasis(path, dom, "someone-else")
