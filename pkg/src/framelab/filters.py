"""Dyadic band filters and the filtered spectral operators.

The ladder is built from one smooth cutoff: 1 on [0, 1], 0 from 2 on, with an
exp(-1/t) bridge between.  Band j keeps sqrt-eigenvalue content in
[2^(j-1), 2^(j+1)] and the squared filters telescope to exactly 1 on [0, 2^J],
which is what makes every later energy identity exact at the discrete level.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, UnresolvedBandError
from .eigen import EigenBasis


def cutoff(s) -> np.ndarray | float:
    """Smooth monotone cutoff: 1 on [0,1], 0 on [2,inf), C-infinity bridge."""
    arr = np.asarray(s, dtype=float)
    if np.any(arr < 0):
        raise ContractViolation("cutoff is defined on s >= 0")
    out = np.ones_like(arr)
    out[arr >= 2.0] = 0.0
    mid = (arr > 1.0) & (arr < 2.0)
    if mid.any():
        t_hi = 2.0 - arr[mid]
        t_lo = arr[mid] - 1.0
        g_hi = np.exp(-1.0 / t_hi)
        g_lo = np.exp(-1.0 / t_lo)
        out[mid] = g_hi / (g_hi + g_lo)
    return out if isinstance(s, np.ndarray) else float(out)


def band_filter(j: int, s) -> np.ndarray | float:
    """Filter for band j: sqrt(cutoff) at j=0, telescoped difference after.

    Supported on [0, 2] for j=0 and on [2^(j-1), 2^(j+1)] for j >= 1; tiny
    negative telescoping noise (>= -1e-15) is clamped before the square root.
    """
    if j < 0:
        raise ContractViolation(f"band index must be >= 0, got {j}")
    arr = np.asarray(s, dtype=float)
    if j == 0:
        q = cutoff(arr)
    else:
        scale = 2.0 ** (-j)
        q = np.asarray(cutoff(scale * arr)) - np.asarray(cutoff(2.0 * scale * arr))
        if np.any(q < -1e-15):
            raise ContractViolation("band filter difference fell below -1e-15")
        q = np.clip(q, 0.0, None)
    root = np.sqrt(q)
    return root if isinstance(s, np.ndarray) else float(root)


def band_interval(j: int) -> tuple[float, float]:
    """Support of band j on the sqrt-eigenvalue axis."""
    if j == 0:
        return 0.0, 2.0
    return 2.0 ** (j - 1), 2.0 ** (j + 1)


def max_resolved_level(basis: EigenBasis) -> int:
    """Largest j whose full band is inside the computed, reliable spectrum."""
    top = min(basis.lambda_max, basis.lambda_reliable)
    if top < 4.0:
        raise UnresolvedBandError(
            f"spectrum resolved only to lambda={top:.6g}; no complete band"
        )
    return int(np.floor(np.log2(top) / 2.0 - 1.0))


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Band filters bound to an eigenbasis, truncated at the resolved ladder."""

    basis: EigenBasis
    max_level: int

    @property
    def levels(self) -> range:
        return range(self.max_level + 1)

    @property
    def certified_lambda(self) -> float:
        """Top eigenvalue of the span on which the telescoped sum is exactly 1."""
        return 4.0 ** self.max_level

    def _check_level(self, j: int) -> None:
        if not 0 <= j <= self.max_level:
            raise UnresolvedBandError(
                f"band {j} not resolved (available levels 0..{self.max_level})"
            )

    def band_weights(self, j: int) -> np.ndarray:
        """Filter values at the sqrt of every computed eigenvalue."""
        self._check_level(j)
        return np.asarray(band_filter(j, np.sqrt(self.basis.eigenvalues)))

    def band_mode_indices(self, j: int) -> np.ndarray:
        """Indices of the computed modes inside band j's support."""
        self._check_level(j)
        lo, hi = band_interval(j)
        s = np.sqrt(self.basis.eigenvalues)
        return np.nonzero((s >= lo) & (s <= hi))[0]

    def apply_band(self, j: int, f: np.ndarray) -> np.ndarray:
        """Band-filtered function; lands in the band's bandlimited span."""
        self._check_level(j)
        c = self.basis.coefficients(f)
        return self.basis.expand(self.band_weights(j) * c)

    def band_energies(self, f: np.ndarray) -> np.ndarray:
        """Squared norms of every band component in one pass."""
        c = self.basis.coefficients(f)
        s = np.sqrt(self.basis.eigenvalues)
        return np.array(
            [float(np.sum((np.asarray(band_filter(j, s)) * c) ** 2)) for j in self.levels]
        )

    def band_kernel(self, j: int, x_nodes, y_nodes) -> np.ndarray | float:
        """Kernel of the filtered operator at node pairs (truncated mode sum)."""
        self._check_level(j)
        w = self.band_weights(j)
        ux = self.basis.vectors[np.asarray(x_nodes)]
        uy = self.basis.vectors[np.asarray(y_nodes)]
        out = (ux * w) @ uy.T if ux.ndim == 2 else float(np.sum(w * ux * uy))
        return out

    def partition_sum(self, s) -> np.ndarray:
        """Sum of squared filters over the resolved ladder (1 on [0, 2^J])."""
        arr = np.asarray(s, dtype=float)
        total = np.zeros_like(arr)
        for j in self.levels:
            total += np.asarray(band_filter(j, arr)) ** 2
        return total


def make_filter_bank(basis: EigenBasis, max_level: int | None = None) -> FilterBank:
    """Build the filter ladder for a basis; an explicit level is clipped."""
    auto = max_resolved_level(basis)
    if max_level is None:
        level = auto
    elif max_level > auto:
        warnings.warn(
            f"requested level {max_level} exceeds the resolved ladder; clipping to {auto}",
            stacklevel=2,
        )
        level = auto
    else:
        if max_level < 0:
            raise ContractViolation(f"max_level must be >= 0, got {max_level}")
        level = max_level
    return FilterBank(basis=basis, max_level=level)
