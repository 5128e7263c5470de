"""Lowest eigenpairs of the assembled operator and the spectral calculus.

Eigenvectors are orthonormal in the discrete inner product (weight h^d), so
every later spectral operation is a small dense linear-algebra step on the
coefficient vector.  Only eigenvalues below the reliability cutoff
eta / h^2 are emitted; the discrete spectrum is not trusted beyond it.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .errors import CacheMismatchError, ContractViolation, SolverError, UnresolvedBandError
from .grid import GridDomain
from .operator import OperatorMatrix

DENSE_THRESHOLD = 4096
DEFAULT_ETA = 0.5
DEFAULT_TOL = 1e-8

_WEYL_BALL_VOLUME = {1: 2.0, 2: math.pi}


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Ascending reliable eigenpairs, discretely orthonormal.

    vectors has one column per mode; <u_i, u_j>_h = delta_ij.
    """

    eigenvalues: np.ndarray   # (m,)
    vectors: np.ndarray       # (n, m)
    dom: GridDomain
    lambda_reliable: float
    residual_tol: float
    max_residual: float
    fingerprint: str

    @property
    def m(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    def coefficients(self, f: np.ndarray) -> np.ndarray:
        """Mode coefficients <f, u_k>_h."""
        f = self.dom.check(f)
        return self.dom.weight * (self.vectors.T @ f)

    def expand(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.m,):
            raise ContractViolation(f"expected {self.m} coefficients, got {coeffs.shape}")
        return self.vectors @ coeffs

    def unresolved_norm(self, f: np.ndarray) -> float:
        """Norm of the component of f outside the resolved span."""
        r = self.dom.check(f) - self.expand(self.coefficients(f))
        return self.dom.norm(r)


def _weyl_estimate(dom: GridDomain, lam_cap: float) -> int:
    vol = _WEYL_BALL_VOLUME[dom.dim]
    return int(vol * dom.measure * lam_cap ** (dom.dim / 2) / (2 * math.pi) ** dom.dim)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Deterministic column signs: largest-magnitude entry made positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _solve_k(op: OperatorMatrix, k: int, dense_threshold: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """k lowest eigenpairs, ell2-orthonormal vectors."""
    n = op.n
    if n <= dense_threshold or k > n - 2:
        vals, vecs = sla.eigh(op.matrix.toarray(), subset_by_index=[0, k - 1], driver="evr")
        return vals, vecs
    # Lanczos in shift-invert mode with a seeded start vector, then a
    # Rayleigh-Ritz pass to restore machine-level orthonormality
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        vals, vecs = spla.eigsh(op.matrix.tocsc(), k=k, sigma=0.0, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:  # pragma: no cover - depends on ARPACK state
        raise SolverError(f"iterative eigensolver did not converge: {exc}") from exc
    q, _ = np.linalg.qr(vecs)
    t = q.T @ (op.matrix @ q)
    t = 0.5 * (t + t.T)
    ritz_vals, ritz_vecs = np.linalg.eigh(t)
    return ritz_vals, q @ ritz_vecs


def solve_lowest(
    op: OperatorMatrix,
    dom: GridDomain,
    m: int | str = "auto",
    tol: float = DEFAULT_TOL,
    dense_threshold: int = DENSE_THRESHOLD,
    eta: float = DEFAULT_ETA,
    seed: int = 0,
    lambda_cap: float | None = None,
) -> EigenBasis:
    """Compute the m lowest eigenpairs, clipped to the reliability cutoff.

    m="auto" solves enough modes to cover lambda_cap (default: the cutoff),
    growing the request until the top computed eigenvalue passes the cap.
    """
    if tol <= 0:
        raise ContractViolation(f"tol must be > 0, got {tol}")
    n = op.n
    lam_reliable = eta / (dom.h * dom.h)
    if m == "auto":
        cap = min(lambda_cap, lam_reliable) if lambda_cap is not None else lam_reliable
        k = min(n, max(_weyl_estimate(dom, cap) * 3 // 2 + 10, 8))
        for _ in range(6):
            vals, vecs = _solve_k(op, k, dense_threshold, seed)
            if vals[-1] >= cap or k == n:
                break
            k = min(n, int(k * 1.6) + 8)
        else:
            raise SolverError(
                f"auto mode count did not reach lambda={cap} after retries",
                best_residual=None,
            )
    else:
        if not 1 <= m <= n:
            raise ContractViolation(f"m must be in [1, {n}], got {m}")
        vals, vecs = _solve_k(op, int(m), dense_threshold, seed)

    order = np.argsort(vals)
    vals = vals[order]
    vecs = vecs[:, order]
    if vals[0] <= 0:
        raise SolverError(f"assembled operator is not positive definite: lambda_1={vals[0]}")

    keep = vals <= lam_reliable
    if not keep.all():
        if m != "auto":
            # auto mode intentionally solves past the cutoff and trims silently
            warnings.warn(
                f"clipping {int((~keep).sum())} eigenpairs beyond the reliability cutoff "
                f"{lam_reliable:.6g}",
                stacklevel=2,
            )
        vals = vals[keep]
        vecs = vecs[:, keep]
    if vals.size == 0:
        raise SolverError("no eigenvalue below the reliability cutoff")

    # residuals are measured on the stored array (scaled, sign-fixed,
    # C-contiguous) so a cache reload reproduces the same figure bit for bit
    u = np.ascontiguousarray(_fix_signs(vecs) / math.sqrt(dom.weight))
    vals = np.ascontiguousarray(vals)
    residuals = np.linalg.norm(op.matrix @ u - u * vals, axis=0) / (
        vals * np.linalg.norm(u, axis=0)
    )
    worst = float(residuals.max())
    if worst > tol:
        raise SolverError(
            f"eigenpair residual {worst:.3e} exceeds tol {tol:.3e}", best_residual=worst
        )

    return EigenBasis(
        eigenvalues=vals,
        vectors=u,
        dom=dom,
        lambda_reliable=lam_reliable,
        residual_tol=tol,
        max_residual=worst,
        fingerprint=op.fingerprint,
    )


def dim_resolved_span(basis: EigenBasis, omega: float) -> int:
    """Number of eigenvalues <= omega (the dimension of the bandlimited span)."""
    if omega > basis.lambda_reliable:
        raise UnresolvedBandError(
            f"omega={omega} beyond the reliability cutoff {basis.lambda_reliable:.6g}"
        )
    if omega > basis.lambda_max:
        raise UnresolvedBandError(
            f"omega={omega} beyond the top computed eigenvalue {basis.lambda_max:.6g}; "
            "solve more modes"
        )
    return int(np.count_nonzero(basis.eigenvalues <= omega))


def spectral_apply(basis: EigenBasis, phi, f: np.ndarray) -> np.ndarray:
    """Apply phi(L) through the eigenexpansion, dropping unresolved content.

    The dropped component's norm is available via basis.unresolved_norm(f).
    """
    c = basis.coefficients(f)
    weights = np.asarray(phi(basis.eigenvalues), dtype=float)
    if weights.shape != basis.eigenvalues.shape or not np.all(np.isfinite(weights)):
        raise ContractViolation("phi must map the eigenvalues to finite values")
    return basis.expand(weights * c)


# --- eigenbasis cache file ("EIGB") -------------------------------------
#
# layout: magic "EIGB" | u32 version | u32 header length | UTF-8 JSON header
# {dimension, h, node_count, m, tol, fingerprint} | float64-LE eigenvalues[m]
# | float64-LE eigenvectors[m x n] row-major (one eigenvector per row).

_MAGIC = b"EIGB"
_VERSION = 1


def save_eigenbasis(path, basis: EigenBasis) -> None:
    header = {
        "dimension": basis.dom.dim,
        "h": basis.dom.h,
        "node_count": basis.dom.n_nodes,
        "m": basis.m,
        "tol": basis.residual_tol,
        "fingerprint": basis.fingerprint,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(basis.eigenvalues.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(basis.vectors.T).astype("<f8").tobytes())


def load_eigenbasis(
    path,
    dom: GridDomain,
    fingerprint: str,
    eta: float = DEFAULT_ETA,
    op: OperatorMatrix | None = None,
) -> EigenBasis:
    """Load a cached eigenbasis, verifying the operator fingerprint first.

    When the operator is supplied the residuals are recomputed, so the loaded
    basis carries the same achieved-residual figure as a fresh solve.
    """
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise CacheMismatchError(f"{path}: not an eigenbasis cache file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise CacheMismatchError(f"{path}: unsupported cache version {version}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        if header["fingerprint"] != fingerprint:
            raise CacheMismatchError(f"{path}: fingerprint does not match the operator")
        if header["node_count"] != dom.n_nodes or header["dimension"] != dom.dim:
            raise CacheMismatchError(f"{path}: cached grid does not match the domain")
        m = int(header["m"])
        n = dom.n_nodes
        vals = np.frombuffer(fh.read(8 * m), dtype="<f8").copy()
        vecs = np.frombuffer(fh.read(8 * m * n), dtype="<f8").reshape(m, n).T.copy()
    tol = float(header["tol"])
    worst = tol
    if op is not None:
        residuals = np.linalg.norm(op.matrix @ vecs - vecs * vals, axis=0) / (
            vals * np.linalg.norm(vecs, axis=0)
        )
        worst = float(residuals.max())
        if worst > tol:
            raise CacheMismatchError(
                f"{path}: cached eigenpairs no longer meet tol {tol:.3e} "
                f"(residual {worst:.3e})"
            )
    return EigenBasis(
        eigenvalues=vals,
        vectors=np.ascontiguousarray(vecs),
        dom=dom,
        lambda_reliable=eta / (dom.h * dom.h),
        residual_tol=tol,
        max_residual=worst,
        fingerprint=fingerprint,
    )
