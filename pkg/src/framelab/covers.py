"""Dyadic cube covers of the node set and the averaging functionals on them.

A cover assigns every interior node to the half-open lattice cube
[rho*k, rho*(k+1)) containing it, so parts are exactly disjoint and exhaust
the node set.  The averaging functional of a part is the normalized indicator
|U|^(-1/2) * chi_U, a discretely unit vector; pairing a function against it
reads off sqrt(|U|) times the part mean.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolation
from .grid import GridDomain


def spacing_for_level(j: int, delta: float, a0: float, dim: int) -> float:
    """Cover spacing at dyadic level j: a0 * delta^(1/d) * 2^(-(j+1)/2)."""
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must be in (0, 1), got {delta}")
    if a0 <= 0:
        raise ConfigurationError(f"a0 must be > 0, got {a0}")
    if j < 0:
        raise ContractViolation(f"level must be >= 0, got {j}")
    return a0 * delta ** (1.0 / dim) * 2.0 ** (-(j + 1) / 2.0)


@dataclass(frozen=True, eq=False)
class CubeCover:
    """One level's disjoint partition of the nodes by half-open cubes."""

    rho: float
    cube_indices: np.ndarray   # (I, d) lattice index of each part's cube
    starts: np.ndarray         # (I+1,) offsets into `order`
    order: np.ndarray          # node ids grouped by part
    weight: float              # node quadrature weight of the owning domain

    @property
    def n_parts(self) -> int:
        return self.cube_indices.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.starts)

    @property
    def measures(self) -> np.ndarray:
        return self.counts * self.weight

    def part_nodes(self, i: int) -> np.ndarray:
        return self.order[self.starts[i] : self.starts[i + 1]]

    def centers(self) -> np.ndarray:
        """Geometric centers of the parts' cubes."""
        return (self.cube_indices + 0.5) * self.rho

    def membership(self, n_nodes: int) -> np.ndarray:
        """Part index of every node."""
        out = np.empty(n_nodes, dtype=np.int64)
        for i in range(self.n_parts):
            out[self.part_nodes(i)] = i
        return out


def build_cover(dom: GridDomain, rho: float) -> CubeCover:
    """Group nodes by the origin-anchored half-open cube lattice of side rho."""
    if rho <= 0:
        raise ContractViolation(f"rho must be > 0, got {rho}")
    keys = np.floor(dom.coords / rho).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    sorted_keys = keys[order]
    if dom.n_nodes == 1:
        breaks = np.array([], dtype=np.int64)
    else:
        breaks = np.nonzero(np.any(np.diff(sorted_keys, axis=0) != 0, axis=1))[0] + 1
    starts = np.concatenate([[0], breaks, [dom.n_nodes]])
    return CubeCover(
        rho=float(rho),
        cube_indices=sorted_keys[starts[:-1]],
        starts=starts,
        order=order,
        weight=dom.weight,
    )


@dataclass(frozen=True, eq=False)
class Functional:
    """Averaging (or center-point) functional of one cover part.

    Average kind: the grid function |U|^(-1/2) on the part's nodes; pairing
    against f gives sqrt(|U|) times the mean of f over the part.  Center kind:
    a weighted point evaluation sqrt(|U|) * f(x*) at the node nearest the
    cube center (offered as a variant, outside the frame-bound guarantees).
    """

    kind: str
    cube: tuple[int, ...]
    nodes: np.ndarray
    measure: float
    weight: float
    center_node: int = -1

    def to_grid(self, dom: GridDomain) -> np.ndarray:
        g = dom.zeros()
        if self.kind == "average":
            g[self.nodes] = 1.0 / np.sqrt(self.measure)
        else:
            g[self.center_node] = np.sqrt(self.measure) / self.weight
        return g

    def pair(self, f: np.ndarray) -> float:
        """<f, functional>_h without materializing the grid form."""
        if self.kind == "average":
            return self.weight * float(f[self.nodes].sum()) / np.sqrt(self.measure)
        return np.sqrt(self.measure) * float(f[self.center_node])

    def integral(self) -> float:
        """Pairing against the constant 1, sqrt(|U|) for both kinds."""
        return float(np.sqrt(self.measure))


def make_functionals(cover: CubeCover, dom: GridDomain, kind: str = "average") -> list[Functional]:
    if kind not in ("average", "center"):
        raise ConfigurationError(f"unknown functional kind {kind!r}")
    out = []
    centers = cover.centers()
    for i in range(cover.n_parts):
        nodes = cover.part_nodes(i)
        center_node = -1
        if kind == "center":
            d = np.abs(dom.coords[nodes] - centers[i]).max(axis=1)
            center_node = int(nodes[int(np.argmin(d))])
        out.append(
            Functional(
                kind=kind,
                cube=tuple(int(v) for v in cover.cube_indices[i]),
                nodes=nodes,
                measure=float(cover.measures[i]),
                weight=dom.weight,
                center_node=center_node,
            )
        )
    return out


def functional_integral(phi: Functional) -> float:
    """sqrt(|U|).

    Every part lives inside one cube of side rho, so its discrete measure is
    at most (rho + h)^d (quadrature cells of nodes near a cube face stick out
    by up to one cell per axis; the continuum bound rho^d is recovered as the
    grid refines).
    """
    return phi.integral()


def functional_matrix(cover: CubeCover, dom: GridDomain) -> sp.csr_matrix:
    """Sparse n x I matrix whose column i is the averaging functional's grid form."""
    counts = cover.counts
    data = np.repeat(1.0 / np.sqrt(cover.measures), counts)
    indptr = cover.starts
    mat = sp.csc_matrix((data, cover.order, indptr), shape=(dom.n_nodes, cover.n_parts))
    return mat.tocsr()


def part_pairings(cover: CubeCover, dom: GridDomain, vectors: np.ndarray) -> np.ndarray:
    """<v, Phi_i>_h for every column v of `vectors`, as an (I, ncol) array."""
    vecs = vectors if vectors.ndim == 2 else vectors[:, None]
    sums = np.add.reduceat(vecs[cover.order], cover.starts[:-1], axis=0)
    return sums * (dom.weight / np.sqrt(cover.measures))[:, None]
