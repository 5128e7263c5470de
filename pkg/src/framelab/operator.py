"""Flux-form finite-difference assembly of -div(a grad) with Dirichlet walls.

The stencil is the conservative second-order one: per axis, a backward
difference of coefficient-weighted forward differences, with the coefficient
sampled at edge midpoints.  Lattice neighbours outside the interior node set
contribute zero, which encodes the boundary condition.  Assembly adds the two
triangle entries of every edge from the same evaluated float, so the matrix
is exactly symmetric entry by entry.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ConfigurationError, ContractViolation
from .grid import GridDomain

STENCIL_VERSION = 1


@dataclass(frozen=True)
class CoefficientField:
    """Coefficient of the divergence-form operator.

    kinds: "identity" (a = I), "scalar" (a(x)*I for a smooth positive scalar),
    "matrix" (a constant symmetric positive definite d x d matrix).
    The descriptor is a stable string used in operator fingerprints.
    """

    kind: str
    descriptor: str
    scalar_fn: Callable[[np.ndarray], np.ndarray] | None = None
    matrix: np.ndarray | None = None

    def scalar_at(self, points: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.ones(points.shape[0])
        if self.kind != "scalar":
            raise ContractViolation("scalar_at is only defined for scalar coefficients")
        return np.asarray(self.scalar_fn(points), dtype=float)


def identity_coefficient() -> CoefficientField:
    return CoefficientField(kind="identity", descriptor="identity")


def scalar_coefficient(fn, descriptor: str) -> CoefficientField:
    """Wrap a positive scalar function a(x); fn maps (n, d) points to (n,)."""
    return CoefficientField(kind="scalar", descriptor=f"scalar:{descriptor}", scalar_fn=fn)


def wave_coefficient(amplitude: float = 0.5) -> CoefficientField:
    """Bundled smooth example a(x) = 1 + amplitude*sin(pi*x_1)."""
    if not -1.0 < amplitude < 1.0:
        raise ConfigurationError(f"wave amplitude must be in (-1, 1), got {amplitude}")

    def fn(points):
        return 1.0 + amplitude * np.sin(np.pi * points[:, 0])

    return CoefficientField(kind="scalar", descriptor=f"wave:{amplitude}", scalar_fn=fn)


def matrix_coefficient(mat) -> CoefficientField:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigurationError(f"coefficient matrix must be square, got shape {mat.shape}")
    if not np.array_equal(mat, mat.T):
        raise ConfigurationError("coefficient matrix must be symmetric")
    if np.linalg.eigvalsh(mat)[0] <= 0:
        raise ConfigurationError("coefficient matrix must be positive definite")
    return CoefficientField(
        kind="matrix", descriptor=f"matrix:{mat.tolist()}", matrix=mat
    )


def coefficient_from_config(spec: dict) -> CoefficientField:
    kind = spec.get("kind", "identity")
    if kind == "identity":
        return identity_coefficient()
    if kind == "wave":
        return wave_coefficient(float(spec.get("amplitude", 0.5)))
    if kind == "matrix":
        if "entries" not in spec:
            raise ConfigurationError("operator.entries is required for kind 'matrix'")
        return matrix_coefficient(spec["entries"])
    raise ConfigurationError(f"unknown coefficient kind {kind!r}")


def operator_fingerprint(dom: GridDomain, coeff: CoefficientField) -> str:
    """Stable hash of (domain, coefficient, stencil version) for cache keys."""
    payload = {
        "kind": dom.kind,
        "params": {k: dom.params[k] for k in sorted(dom.params)},
        "h": dom.h,
        "dim": dom.dim,
        "coefficient": coeff.descriptor,
        "stencil": STENCIL_VERSION,
    }
    blob = json.dumps(payload, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Sparse symmetric positive definite discretization of the operator."""

    matrix: sp.csr_matrix
    dom: GridDomain
    coeff: CoefficientField
    fingerprint: str

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = self.dom.check(f)
        return self.matrix @ f


def _node_lookup(dom: GridDomain) -> np.ndarray:
    """Dense lattice -> node-id table (-1 outside the interior set)."""
    spans = dom.indices.max(axis=0) + 2
    table = -np.ones(tuple(spans), dtype=np.int64)
    table[tuple(dom.indices.T)] = np.arange(dom.n_nodes)
    return table


def _neighbor_ids(dom: GridDomain, table: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Node id of each node's lattice neighbour at `step`, or -1."""
    shifted = dom.indices + step
    valid = np.all((shifted >= 0) & (shifted < np.asarray(table.shape)), axis=1)
    out = -np.ones(dom.n_nodes, dtype=np.int64)
    out[valid] = table[tuple(shifted[valid].T)]
    return out


def assemble(dom: GridDomain, coeff: CoefficientField) -> OperatorMatrix:
    """Assemble the stencil matrix over the interior nodes of `dom`."""
    if coeff.kind == "matrix" and coeff.matrix.shape[0] != dom.dim:
        raise ConfigurationError(
            f"coefficient matrix is {coeff.matrix.shape[0]}x{coeff.matrix.shape[0]}, "
            f"domain dimension is {dom.dim}"
        )
    n = dom.n_nodes
    h = dom.h
    inv_h2 = 1.0 / (h * h)
    table = _node_lookup(dom)
    diag = np.zeros(n)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    node_ids = np.arange(n)

    for axis in range(dom.dim):
        step = np.zeros(dom.dim, dtype=np.int64)
        step[axis] = 1
        if coeff.kind == "matrix":
            a_axis = float(coeff.matrix[axis, axis])
            a_up = np.full(n, a_axis)
            a_dn = np.full(n, a_axis)
        else:
            mid_up = dom.coords.copy()
            mid_up[:, axis] += 0.5 * h
            mid_dn = dom.coords.copy()
            mid_dn[:, axis] -= 0.5 * h
            a_up = coeff.scalar_at(mid_up)
            a_dn = coeff.scalar_at(mid_dn)
            bad = min(a_up.min(), a_dn.min())
            if bad <= 0:
                raise AssemblyError(
                    f"coefficient sampled non-positive ({bad}) at an edge midpoint"
                )
        up = _neighbor_ids(dom, table, step)
        dn = _neighbor_ids(dom, table, -step)
        # every node owns its up edge, so each interior edge is walked once and
        # feeds both triangle entries and both diagonals from one float
        has_up = up >= 0
        diag += a_up * inv_h2
        np.add.at(diag, up[has_up], a_up[has_up] * inv_h2)
        wall_dn = dn < 0
        diag[wall_dn] += a_dn[wall_dn] * inv_h2
        w = -a_up[has_up] * inv_h2
        rows.extend((node_ids[has_up], up[has_up]))
        cols.extend((up[has_up], node_ids[has_up]))
        vals.extend((w, w))

    if coeff.kind == "matrix" and dom.dim == 2 and coeff.matrix[0, 1] != 0.0:
        a12 = float(coeff.matrix[0, 1])
        # cross term -2*a12*d1d2 via the centered four-corner stencil; the two
        # directions (+,+) and (+,-) walk every diagonal edge exactly once
        for step, sign in ((np.array([1, 1]), -1.0), (np.array([1, -1]), 1.0)):
            nb = _neighbor_ids(dom, table, step)
            has = nb >= 0
            w = np.full(int(has.sum()), sign * a12 / (2.0 * h * h))
            rows.extend((node_ids[has], nb[has]))
            cols.extend((nb[has], node_ids[has]))
            vals.extend((w, w))

    rows.append(node_ids)
    cols.append(node_ids)
    vals.append(diag)
    mat = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    mat.sum_duplicates()
    return OperatorMatrix(
        matrix=mat,
        dom=dom,
        coeff=coeff,
        fingerprint=operator_fingerprint(dom, coeff),
    )


def apply_operator(op: OperatorMatrix, f: np.ndarray) -> np.ndarray:
    """Matrix-vector product; free-function form of OperatorMatrix.apply."""
    return op.apply(f)
