"""Frame atoms from band-filtered averaging functionals, and everything that
certifies them: frame bounds, spacing calibration, iterative reconstruction,
localization profiles.

An atom is the band-filtered image of one averaging functional.  Because the
filter kills all spectral content outside its band, atoms are exactly
bandlimited, and all frame algebra reduces to small dense operations on the
per-level coefficient matrices (band modes x parts).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .covers import CubeCover, Functional, build_cover, make_functionals, part_pairings, spacing_for_level
from .eigen import EigenBasis
from .errors import CalibrationError, ConfigurationError, ContractViolation, SolverError, UnresolvedBandError
from .filters import FilterBank, band_interval
from .grid import GridDomain


@dataclass(frozen=True, eq=False)
class FrameLevel:
    """All atoms of one dyadic level, stored as coefficient/grid matrices."""

    level: int
    rho: float
    cover: CubeCover
    functionals: list[Functional]
    mode_indices: np.ndarray   # global indices of the band's modes
    atom_coeffs: np.ndarray    # (band modes, parts) spectral coefficients
    atom_grids: np.ndarray     # (nodes, parts) grid forms
    centers: np.ndarray        # (parts, d) cube centers

    @property
    def n_atoms(self) -> int:
        return self.atom_coeffs.shape[1]


@dataclass(frozen=True, eq=False)
class FrameAtom:
    """One atom in both representations, with its provenance."""

    level: int
    index: int
    cube: tuple[int, ...]
    center: np.ndarray
    rho: float
    band: tuple[float, float]
    mode_indices: np.ndarray
    coeffs: np.ndarray
    grid: np.ndarray


@dataclass(frozen=True, eq=False)
class FrameCoefficients:
    """Per-level frame coefficients of one analyzed function."""

    per_level: list[np.ndarray]
    source_norm: float

    def total_energy(self) -> float:
        return float(sum(float(c @ c) for c in self.per_level))

    def level_energy(self, j: int) -> float:
        c = self.per_level[j]
        return float(c @ c)


@dataclass(frozen=True, eq=False)
class FrameSystem:
    """The full multilevel frame over a domain, basis and filter ladder."""

    dom: GridDomain
    basis: EigenBasis
    bank: FilterBank
    delta: float
    a0: float
    levels: list[FrameLevel]

    @property
    def max_level(self) -> int:
        return len(self.levels) - 1

    @property
    def atom_count(self) -> int:
        return sum(lv.n_atoms for lv in self.levels)

    @property
    def certified_lambda(self) -> float:
        """Eigenvalue cutoff of the span on which the bounds are certified."""
        return self.bank.certified_lambda

    def certified_mode_indices(self) -> np.ndarray:
        return np.nonzero(self.basis.eigenvalues <= self.certified_lambda)[0]

    def atom(self, j: int, i: int) -> FrameAtom:
        lv = self.levels[j]
        if not 0 <= i < lv.n_atoms:
            raise ContractViolation(f"level {j} has {lv.n_atoms} atoms, asked for {i}")
        return FrameAtom(
            level=j,
            index=i,
            cube=lv.functionals[i].cube,
            center=lv.centers[i],
            rho=lv.rho,
            band=band_interval(j),
            mode_indices=lv.mode_indices,
            coeffs=lv.atom_coeffs[:, i].copy(),
            grid=lv.atom_grids[:, i].copy(),
        )


def build_frame(
    basis: EigenBasis,
    bank: FilterBank,
    dom: GridDomain,
    delta: float,
    a0: float,
) -> FrameSystem:
    """Build covers, functionals and atoms for every resolved level."""
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must be in (0, 1), got {delta}")
    if a0 <= 0:
        raise ConfigurationError(f"a0 must be > 0, got {a0}")
    if bank.basis is not basis:
        raise ContractViolation("filter bank was built over a different eigenbasis")
    levels = []
    for j in bank.levels:
        rho = spacing_for_level(j, delta, a0, dom.dim)
        cover = build_cover(dom, rho)
        functionals = make_functionals(cover, dom, kind="average")
        modes = bank.band_mode_indices(j)
        pair = part_pairings(cover, dom, basis.vectors[:, modes])  # (parts, band modes)
        weights = bank.band_weights(j)[modes]
        coeffs = weights[:, None] * pair.T
        grids = basis.vectors[:, modes] @ coeffs
        levels.append(
            FrameLevel(
                level=j,
                rho=rho,
                cover=cover,
                functionals=functionals,
                mode_indices=modes,
                atom_coeffs=coeffs,
                atom_grids=grids,
                centers=cover.centers(),
            )
        )
    return FrameSystem(dom=dom, basis=basis, bank=bank, delta=delta, a0=a0, levels=levels)


def analyze(fs: FrameSystem, f: np.ndarray) -> FrameCoefficients:
    """Frame coefficients <f, atom>_h per level."""
    c = fs.basis.coefficients(f)
    per_level = [lv.atom_coeffs.T @ c[lv.mode_indices] for lv in fs.levels]
    return FrameCoefficients(per_level=per_level, source_norm=fs.dom.norm(f))


def analyze_via_bands(fs: FrameSystem, f: np.ndarray) -> FrameCoefficients:
    """Same coefficients computed as <band-filtered f, functional>_h.

    Independent route through the self-adjointness of the filtered operator;
    kept as a cross-check of `analyze`.
    """
    per_level = []
    for lv in fs.levels:
        g = fs.bank.apply_band(lv.level, f)
        per_level.append(part_pairings(lv.cover, fs.dom, g)[:, 0])
    return FrameCoefficients(per_level=per_level, source_norm=fs.dom.norm(f))


def synthesize(fs: FrameSystem, coeffs: FrameCoefficients) -> np.ndarray:
    """Weighted atom sum, the adjoint of analyze."""
    if len(coeffs.per_level) != len(fs.levels):
        raise ContractViolation(
            f"coefficients carry {len(coeffs.per_level)} levels, frame has {len(fs.levels)}"
        )
    out = fs.dom.zeros()
    spectral = np.zeros(fs.basis.m)
    for lv, c in zip(fs.levels, coeffs.per_level):
        if c.shape != (lv.n_atoms,):
            raise ContractViolation(
                f"level {lv.level}: expected {lv.n_atoms} coefficients, got {c.shape}"
            )
        spectral[lv.mode_indices] += lv.atom_coeffs @ c
    out = fs.basis.expand(spectral)
    return out


def frame_operator_matrix(fs: FrameSystem, mode_indices: np.ndarray) -> np.ndarray:
    """Matrix of the frame operator compressed to a set of eigenmodes."""
    mode_indices = np.asarray(mode_indices, dtype=np.int64)
    if mode_indices.size == 0:
        raise ContractViolation("frame operator restriction to an empty subspace")
    pos = -np.ones(fs.basis.m, dtype=np.int64)
    pos[mode_indices] = np.arange(mode_indices.size)
    s = np.zeros((mode_indices.size, mode_indices.size))
    for lv in fs.levels:
        local = pos[lv.mode_indices]
        keep = local >= 0
        if not keep.any():
            continue
        c = lv.atom_coeffs[keep]
        s[np.ix_(local[keep], local[keep])] += c @ c.T
    return s


def frame_bounds(fs: FrameSystem, restriction="span") -> tuple[float, float]:
    """Extreme eigenvalues of the frame operator on the chosen subspace.

    restriction="span" uses the whole certified span; an integer restricts to
    the modes of that band.
    """
    if restriction == "span":
        modes = fs.certified_mode_indices()
    else:
        j = int(restriction)
        if not 0 <= j <= fs.max_level:
            raise UnresolvedBandError(f"band {j} outside resolved levels 0..{fs.max_level}")
        modes = fs.bank.band_mode_indices(j)
    if modes.size == 0:
        raise ContractViolation("requested subspace has dimension 0")
    ev = sla.eigvalsh(frame_operator_matrix(fs, modes))
    return float(ev[0]), float(ev[-1])


# --- spacing-constant calibration ----------------------------------------


@dataclass(frozen=True)
class LevelCalibration:
    """Outcome of the single-level bisection for the spacing constant."""

    level: int
    band_top_lambda: float
    subspace_dim: int
    a_max: float | None      # largest spacing constant meeting the bound; None if vacuous
    criterion_at_a_max: float | None


def projection_floor(dom: GridDomain, basis: EigenBasis, mode_sel: np.ndarray, rho: float) -> float:
    """Smallest eigenvalue of the cover projection compressed to a mode span.

    This is the exact lower constant of the single-scale sampling inequality
    for the given cover spacing.
    """
    cover = build_cover(dom, rho)
    pair = part_pairings(cover, dom, basis.vectors[:, mode_sel])
    gram = pair.T @ pair
    return float(sla.eigvalsh(gram)[0])


def calibrate_levels(
    dom: GridDomain,
    basis: EigenBasis,
    delta: float,
    levels,
    trials: int = 200,
    seed: int = 0,
    bisection_steps: int = 30,
) -> list[LevelCalibration]:
    """Per-level bisection for the largest spacing constant with floor >= 1-delta.

    The floor is monotone under cover refinement, so halving the constant from
    a failing start finds a passing bracket; a Rayleigh sample cross-checks the
    dense eigenvalue at the accepted constant.
    """
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must be in (0, 1), got {delta}")
    rng = np.random.default_rng(seed)
    extent = float(np.max(dom.coords.max(axis=0) - dom.coords.min(axis=0)) + dom.h)
    results = []
    for j in levels:
        top = 4.0 ** (j + 1)
        if top > basis.lambda_max:
            raise UnresolvedBandError(
                f"level {j} needs eigenvalues to {top:.6g}; computed up to {basis.lambda_max:.6g}"
            )
        sel = np.nonzero(basis.eigenvalues <= top)[0]
        if sel.size == 0:
            results.append(
                LevelCalibration(
                    level=j, band_top_lambda=top, subspace_dim=0, a_max=None, criterion_at_a_max=None
                )
            )
            continue
        target = 1.0 - delta

        def floor_at(a: float) -> float:
            return projection_floor(dom, basis, sel, spacing_for_level(j, delta, a, dom.dim))

        a_hi = extent / (delta ** (1.0 / dom.dim) * 2.0 ** (-(j + 1) / 2.0))
        if floor_at(a_hi) >= target:
            a_lo = a_hi
        else:
            a_lo = a_hi
            for _ in range(60):
                a_lo *= 0.5
                if floor_at(a_lo) >= target:
                    break
            else:
                raise CalibrationError(
                    f"level {j}: floor {floor_at(a_lo):.4f} < {target} even at spacing "
                    f"constant {a_lo:.3e} (subspace dim {sel.size}, {dom.n_nodes} nodes)"
                )
            for _ in range(bisection_steps):
                mid = 0.5 * (a_lo + a_hi)
                if floor_at(mid) >= target:
                    a_lo = mid
                else:
                    a_hi = mid
        accepted = floor_at(a_lo)
        # sampled Rayleigh quotients can only sit above the exact floor
        gram_rho = spacing_for_level(j, delta, a_lo, dom.dim)
        cover = build_cover(dom, gram_rho)
        pair = part_pairings(cover, dom, basis.vectors[:, sel])
        gram = pair.T @ pair
        x = rng.standard_normal((sel.size, trials))
        x /= np.linalg.norm(x, axis=0)
        quotients = np.einsum("it,it->t", x, gram @ x)
        if quotients.min() < accepted - 1e-10:
            raise CalibrationError(
                f"level {j}: sampled Rayleigh quotient {quotients.min():.6f} fell below "
                f"the dense floor {accepted:.6f}"
            )
        results.append(
            LevelCalibration(
                level=j,
                band_top_lambda=top,
                subspace_dim=int(sel.size),
                a_max=float(a_lo),
                criterion_at_a_max=accepted,
            )
        )
    return results


def calibrate_a0(
    dom: GridDomain,
    basis: EigenBasis,
    delta: float,
    levels,
    trials: int = 200,
    seed: int = 0,
) -> float:
    """Certified spacing constant: 0.9 times the tightest per-level constant."""
    results = calibrate_levels(dom, basis, delta, levels, trials=trials, seed=seed)
    usable = [r.a_max for r in results if r.a_max is not None]
    if not usable:
        raise CalibrationError("every tested level had an empty band subspace")
    return 0.9 * min(usable)


# --- reconstruction and localization --------------------------------------


def certified_projection(fs: FrameSystem, f: np.ndarray) -> np.ndarray:
    """Projection onto the certified span (modes up to the ladder's cutoff)."""
    c = fs.basis.coefficients(f)
    keep = fs.basis.eigenvalues <= fs.certified_lambda
    return fs.basis.expand(c * keep)


def reconstruct(
    fs: FrameSystem,
    coeffs: FrameCoefficients,
    n_iters: int,
    frame_lower: float,
    frame_upper: float,
    reference: np.ndarray | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Frame-algorithm iteration from analyzed coefficients.

    The iteration runs against the frame operator compressed to the certified
    span (top-level atoms carry spectral content beyond it, which the bounds
    do not govern), so each update is projected back onto the span.

    Returns the iterate after n_iters steps and the error history
    ||reference - f_k||_h for k = 0..n_iters (history of iterate norms when no
    reference is given).  Raises SolverError when the error ratio exceeds 1
    for three consecutive steps above the floating-point floor, which signals
    that the supplied bounds do not hold on the function's span.
    """
    if frame_lower <= 0 or frame_upper < frame_lower:
        raise ContractViolation(
            f"need 0 < A <= B, got A={frame_lower}, B={frame_upper}"
        )
    step = 2.0 / (frame_lower + frame_upper)
    target = certified_projection(fs, synthesize(fs, coeffs))
    f_k = fs.dom.zeros()

    def error(g: np.ndarray) -> float:
        return fs.dom.norm(reference - g) if reference is not None else fs.dom.norm(g)

    history = [error(f_k)]
    floor = 1e-14 * (fs.dom.norm(reference) if reference is not None else 1.0)
    bad_streak = 0
    for _ in range(n_iters):
        applied = certified_projection(fs, synthesize(fs, analyze(fs, f_k)))
        f_k = f_k + step * (target - applied)
        history.append(error(f_k))
        if reference is not None and history[-2] > floor:
            bad_streak = bad_streak + 1 if history[-1] > history[-2] else 0
            if bad_streak >= 3:
                raise SolverError(
                    "frame algorithm diverged for 3 consecutive steps; "
                    f"supplied bounds A={frame_lower}, B={frame_upper} look wrong"
                )
    return f_k, history


def localization_profile(fs: FrameSystem, j: int, i: int, radii) -> list[tuple[float, float]]:
    """Exterior energy fraction beyond each sup-norm radius from the atom's cube center."""
    atom = fs.atom(j, i)
    total = fs.dom.inner(atom.grid, atom.grid)
    if total <= 0:
        raise ContractViolation(f"atom ({j}, {i}) has no spectral content in its band")
    dist = np.abs(fs.dom.coords - atom.center).max(axis=1)
    out = []
    for r in radii:
        outside = dist > r
        frac = fs.dom.weight * float((atom.grid[outside] ** 2).sum()) / total
        out.append((float(r), frac))
    return out


def energy_radius(fs: FrameSystem, j: int, i: int, energy: float = 0.99) -> float:
    """Smallest sup-norm radius holding the given energy fraction of an atom."""
    if not 0.0 < energy <= 1.0:
        raise ContractViolation(f"energy fraction must be in (0, 1], got {energy}")
    atom = fs.atom(j, i)
    total = fs.dom.inner(atom.grid, atom.grid)
    if total <= 0:
        raise ContractViolation(f"atom ({j}, {i}) has no spectral content in its band")
    dist = np.abs(fs.dom.coords - atom.center).max(axis=1)
    order = np.argsort(dist, kind="stable")
    cumulative = np.cumsum(atom.grid[order] ** 2) * fs.dom.weight
    k = int(np.searchsorted(cumulative, energy * total))
    return float(dist[order][min(k, dist.size - 1)])


def interior_atom_index(fs: FrameSystem, j: int) -> int:
    """Atom of a level whose cube center sits nearest the domain centroid."""
    lv = fs.levels[j]
    centroid = fs.dom.coords.mean(axis=0)
    return int(np.argmin(np.abs(lv.centers - centroid).max(axis=1)))
