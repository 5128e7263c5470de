"""Uniform-grid discretizations of bounded domains with a discrete L2 pairing.

A domain is the set of uniform-lattice nodes strictly inside a shape in
dimension 1 or 2.  Everything outside the node set is implicitly zero, which
is how the Dirichlet boundary condition enters the stencils downstream.
Grid functions are plain float arrays ordered like the node list; integrals
are the rectangle rule with weight h^d per node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractViolation, EmptyDomainError

SHAPE_KINDS = ("interval", "rectangle", "disk", "annulus", "ellipse")


def _require_positive(params: dict, keys: tuple[str, ...], kind: str) -> None:
    for k in keys:
        if params[k] <= 0:
            raise ConfigurationError(f"{kind}: parameter {k!r} must be > 0, got {params[k]}")


def _shape_predicate(kind: str, params: dict):
    """Return (lo, hi, predicate) for a shape; predicate is strict interior."""
    if kind == "interval":
        a, b = params.get("a", 0.0), params.get("b", 1.0)
        if not b > a:
            raise ConfigurationError(f"interval: need b > a, got a={a}, b={b}")
        return (a,), (b,), lambda p: (p[:, 0] > a) & (p[:, 0] < b)
    if kind == "rectangle":
        x0, x1 = params.get("x0", 0.0), params.get("x1", 1.0)
        y0, y1 = params.get("y0", 0.0), params.get("y1", 1.0)
        if not (x1 > x0 and y1 > y0):
            raise ConfigurationError("rectangle: need x1 > x0 and y1 > y0")
        return (x0, y0), (x1, y1), lambda p: (
            (p[:, 0] > x0) & (p[:, 0] < x1) & (p[:, 1] > y0) & (p[:, 1] < y1)
        )
    if kind == "disk":
        r = params.get("radius", 1.0)
        cx, cy = params.get("cx", 0.0), params.get("cy", 0.0)
        _require_positive({"radius": r}, ("radius",), kind)
        return (cx - r, cy - r), (cx + r, cy + r), lambda p: (
            (p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2 < r * r
        )
    if kind == "annulus":
        r0, r1 = params.get("r_inner", 0.5), params.get("r_outer", 1.0)
        cx, cy = params.get("cx", 0.0), params.get("cy", 0.0)
        _require_positive({"r_inner": r0, "r_outer": r1}, ("r_inner", "r_outer"), kind)
        if not r1 > r0:
            raise ConfigurationError(f"annulus: need r_outer > r_inner, got {r0}, {r1}")

        def inside(p):
            rho2 = (p[:, 0] - cx) ** 2 + (p[:, 1] - cy) ** 2
            return (rho2 > r0 * r0) & (rho2 < r1 * r1)

        return (cx - r1, cy - r1), (cx + r1, cy + r1), inside
    if kind == "ellipse":
        rx, ry = params.get("rx", 1.0), params.get("ry", 0.5)
        cx, cy = params.get("cx", 0.0), params.get("cy", 0.0)
        _require_positive({"rx": rx, "ry": ry}, ("rx", "ry"), kind)
        return (cx - rx, cy - ry), (cx + rx, cy + ry), lambda p: (
            ((p[:, 0] - cx) / rx) ** 2 + ((p[:, 1] - cy) / ry) ** 2 < 1.0
        )
    raise ConfigurationError(f"unknown domain kind {kind!r}; expected one of {SHAPE_KINDS}")


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Interior nodes of a uniform grid over a bounded shape.

    Nodes sit at lo + k*h per axis for integer multi-indices k, kept only when
    strictly inside the shape, in lexicographic multi-index order.  The
    quadrature weight is h^dim per node.
    """

    kind: str
    params: dict
    dim: int
    h: float
    lo: tuple[float, ...]
    indices: np.ndarray  # (n, dim) integer lattice multi-indices
    coords: np.ndarray   # (n, dim) node coordinates

    @property
    def n_nodes(self) -> int:
        return self.coords.shape[0]

    @property
    def weight(self) -> float:
        """Quadrature weight per node, h^dim."""
        return self.h ** self.dim

    @property
    def measure(self) -> float:
        """Discrete measure of the domain, weight times node count."""
        return self.weight * self.n_nodes

    def check(self, f: np.ndarray) -> np.ndarray:
        """Validate that f conforms to this domain and return it as float64."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_nodes,):
            raise ContractViolation(
                f"grid function has shape {f.shape}, expected ({self.n_nodes},)"
            )
        if not np.all(np.isfinite(f)):
            raise ContractViolation("grid function has non-finite values")
        return f

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Discrete L2 pairing h^d * sum(f*g)."""
        f = self.check(f)
        g = self.check(g)
        return self.weight * float(f @ g)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.n_nodes)


def build_domain(kind: str, params: dict | None = None, h: float = 0.1) -> GridDomain:
    """Enumerate the interior lattice nodes of a shape.

    Raises EmptyDomainError when h is too coarse to place any node strictly
    inside, and ConfigurationError for unknown kinds or degenerate parameters.
    """
    if h <= 0:
        raise ConfigurationError(f"grid spacing h must be > 0, got {h}")
    params = dict(params or {})
    lo, hi, inside = _shape_predicate(kind, params)
    dim = len(lo)

    axes = []
    for a, b in zip(lo, hi):
        n_steps = int(np.floor((b - a) / h + 1e-12)) + 1
        axes.append(np.arange(n_steps + 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    indices = np.column_stack([m.ravel() for m in mesh]).astype(np.int64)
    coords = np.asarray(lo) + indices * h
    mask = inside(coords)
    if not mask.any():
        raise EmptyDomainError(
            f"{kind} with h={h}: no grid node falls strictly inside the shape"
        )
    # C-order ravel of the ij meshgrid already walks multi-indices lexicographically
    return GridDomain(
        kind=kind,
        params=params,
        dim=dim,
        h=float(h),
        lo=tuple(float(a) for a in lo),
        indices=indices[mask],
        coords=coords[mask],
    )


def inner_product(f: np.ndarray, g: np.ndarray, dom: GridDomain) -> float:
    """Discrete L2(Omega) pairing; free-function form of GridDomain.inner."""
    return dom.inner(f, g)
