"""Information-criterion model-order selection and off-grid refinement.

A candidate support is rescored by refitting every subset (the empty
model included) and penalizing the log residual power:

    score(S) = 2 ln(rss_S / m) + (5 |S| + 1) ln(m) / m

with m observations and rss the squared misfit of the subset refit.  The
winning subset is then optionally refined off the grid by a bounded
quasi-Newton search over per-scatterer amplitude and elevation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .nls import ReflectivityEstimate, fix_global_phase, subset_solve

__all__ = [
    "BicScore",
    "RefinedScatterer",
    "RefinedScatterers",
    "OffgridProblem",
    "bic_score",
    "select_order",
    "linear_subset_fit",
    "bic_score_linear",
    "select_order_linear",
    "refine_offgrid",
]

MAX_CANDIDATE = 16


@dataclass(frozen=True)
class BicScore:
    order: int
    support: tuple[int, ...]
    rss: float
    score: float


@dataclass(frozen=True)
class RefinedScatterer:
    gamma_re: float
    gamma_im: float
    s: float

    @property
    def gamma(self) -> complex:
        return complex(self.gamma_re, self.gamma_im)

    @property
    def amplitude(self) -> float:
        return abs(self.gamma)


@dataclass(frozen=True)
class RefinedScatterers:
    scatterers: tuple[RefinedScatterer, ...]
    residual: float
    converged: bool = True

    @property
    def order(self) -> int:
        return len(self.scatterers)

    @property
    def positions(self) -> np.ndarray:
        return np.array([sc.s for sc in self.scatterers])

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([sc.gamma for sc in self.scatterers])


def _score(rss: float, order: int, m: int, floor: float = 0.0) -> float:
    # exact fits leave solver dust in the rss; flooring it at a relative
    # machine scale makes them tie, so the order penalty decides
    rss = max(float(rss), float(floor), np.finfo(float).tiny)
    return 2.0 * math.log(rss / m) + (5.0 * order + 1.0) * math.log(m) / m


RSS_REL_FLOOR = 1e-12


def bic_score(pair, g: np.ndarray, support, solver: str = "trustregion") -> BicScore:
    """Score one support by bilinear subset refit; () scores the empty model."""
    g = np.asarray(g, dtype=complex)
    m = g.size
    supp = tuple(int(i) for i in support)
    if len(set(supp)) != len(supp):
        raise ValueError("support indices must be distinct")
    floor = RSS_REL_FLOOR * float(np.vdot(g, g).real)
    if supp == ():
        rss = float(np.vdot(g, g).real)
    else:
        _, rss, _ = subset_solve(pair, g, supp, solver=solver)
    return BicScore(order=len(supp), support=supp, rss=rss, score=_score(rss, len(supp), m, floor))


def select_order(
    pair,
    g: np.ndarray,
    candidate: ReflectivityEstimate,
    solver: str = "trustregion",
    max_order: int | None = None,
) -> tuple[ReflectivityEstimate, BicScore]:
    """Refit every subset of the candidate support and keep the best score.

    The empty model competes too, so pure-noise looks can come back with
    order zero.  Ties go to the lower order, then the lexicographically
    smaller support.  ``max_order`` caps the enumerated subset size.
    """
    g = np.asarray(g, dtype=complex)
    m = g.size
    cand = tuple(sorted(int(i) for i in candidate.support))
    if len(cand) > MAX_CANDIDATE:
        raise ValueError(f"candidate support of {len(cand)} is too large to enumerate")
    kmax = len(cand) if max_order is None else min(len(cand), max(0, int(max_order)))
    g2 = float(np.vdot(g, g).real)
    best_key = None
    best: tuple[BicScore, np.ndarray, tuple[int, ...]] | None = None
    subsets = itertools.chain(
        [()],
        *(itertools.combinations(cand, k) for k in range(1, kmax + 1)),
    )
    for supp in subsets:
        if supp == ():
            rss, coeffs = g2, np.zeros(0, dtype=complex)
        else:
            coeffs, rss, _ = subset_solve(pair, g, supp, solver=solver)
        sc = BicScore(
            order=len(supp), support=supp, rss=rss,
            score=_score(rss, len(supp), m, RSS_REL_FLOOR * g2),
        )
        key = (sc.score, sc.order, supp)
        if best_key is None or key < best_key:
            best_key, best = key, (sc, coeffs, supp)
    sc, coeffs, supp = best
    est = ReflectivityEstimate(
        support=supp,
        coefficients=fix_global_phase(coeffs),
        positions=pair.grid.positions[list(supp)] if supp else np.zeros(0),
        residual=sc.rss,
    )
    return est, sc


def linear_subset_fit(A: np.ndarray, g: np.ndarray, support) -> tuple[np.ndarray, float]:
    """Least-squares refit of a linear model on the support columns."""
    supp = list(support)
    sub = A[:, supp]
    coeffs, *_ = np.linalg.lstsq(sub, g, rcond=None)
    rss = float(np.linalg.norm(sub @ coeffs - g) ** 2)
    return coeffs, rss


def bic_score_linear(A: np.ndarray, g: np.ndarray, support) -> BicScore:
    """Same information score with rss from a linear subset refit."""
    g = np.asarray(g, dtype=complex)
    m = g.size
    supp = tuple(int(i) for i in support)
    floor = RSS_REL_FLOOR * float(np.vdot(g, g).real)
    if supp == ():
        rss = float(np.vdot(g, g).real)
    else:
        _, rss = linear_subset_fit(A, g, supp)
    return BicScore(order=len(supp), support=supp, rss=rss, score=_score(rss, len(supp), m, floor))


def select_order_linear(
    A: np.ndarray,
    g: np.ndarray,
    candidate_support,
    grid_positions: np.ndarray,
    max_order: int | None = None,
) -> tuple[ReflectivityEstimate, BicScore]:
    """Subset selection for the linear single-master model."""
    g = np.asarray(g, dtype=complex)
    m = g.size
    cand = tuple(sorted(int(i) for i in candidate_support))
    if len(cand) > MAX_CANDIDATE:
        raise ValueError(f"candidate support of {len(cand)} is too large to enumerate")
    kmax = len(cand) if max_order is None else min(len(cand), max(0, int(max_order)))
    g2 = float(np.vdot(g, g).real)
    best_key, best = None, None
    subsets = itertools.chain(
        [()],
        *(itertools.combinations(cand, k) for k in range(1, kmax + 1)),
    )
    for supp in subsets:
        if supp == ():
            rss, coeffs = g2, np.zeros(0, dtype=complex)
        else:
            coeffs, rss = linear_subset_fit(A, g, supp)
        sc = BicScore(
            order=len(supp), support=supp, rss=rss,
            score=_score(rss, len(supp), m, RSS_REL_FLOOR * g2),
        )
        key = (sc.score, sc.order, supp)
        if best_key is None or key < best_key:
            best_key, best = key, (sc, coeffs, supp)
    sc, coeffs, supp = best
    est = ReflectivityEstimate(
        support=supp,
        coefficients=fix_global_phase(coeffs),
        positions=np.asarray(grid_positions, dtype=float)[list(supp)] if supp else np.zeros(0),
        residual=sc.rss,
    )
    return est, sc


@dataclass(frozen=True)
class OffgridProblem:
    """Continuous-elevation misfit, bilinear or linear flavor.

    ``k_a`` holds per-observation slave wavenumbers (bilinear) or
    wavenumber differences (linear); ``k_b`` the master wavenumbers
    (bilinear only).  ``bounds`` is the admissible elevation interval,
    the grid extent widened by one spacing on each side.
    """

    kind: str
    k_a: np.ndarray
    k_b: np.ndarray | None
    g: np.ndarray
    bounds: tuple[float, float]

    @classmethod
    def bilinear(cls, graph, geom, grid, g) -> "OffgridProblem":
        k = geom.wavenumbers
        lo, hi = grid.extent
        d = grid.spacing
        return cls(
            kind="bilinear",
            k_a=k[graph.slave_idx],
            k_b=k[graph.master_idx],
            g=np.asarray(g, dtype=complex),
            bounds=(lo - d, hi + d),
        )

    @classmethod
    def linear(cls, graph, geom, grid, g) -> "OffgridProblem":
        k = geom.wavenumbers
        lo, hi = grid.extent
        d = grid.spacing
        return cls(
            kind="linear",
            k_a=k[graph.slave_idx] - k[graph.master_idx],
            k_b=None,
            g=np.asarray(g, dtype=complex),
            bounds=(lo - d, hi + d),
        )

    def misfit(self, gamma: np.ndarray, s: np.ndarray) -> float:
        """Squared residual of the continuous model at (gamma, s)."""
        if self.kind == "bilinear":
            u = np.exp(-1j * np.outer(self.k_a, s)) @ gamma
            v = np.exp(-1j * np.outer(self.k_b, s)) @ gamma
            model = u * np.conj(v)
        else:
            model = np.exp(-1j * np.outer(self.k_a, s)) @ gamma
        return float(np.linalg.norm(model - self.g) ** 2)


def _fd_grad(fun, v: np.ndarray, rel_step: float = 1e-7) -> np.ndarray:
    out = np.zeros_like(v)
    for i in range(v.size):
        h = rel_step * max(1.0, abs(v[i]))
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        out[i] = (fun(vp) - fun(vm)) / (2.0 * h)
    return out


def refine_offgrid(
    problem: OffgridProblem,
    selected: ReflectivityEstimate,
    tol: float = 1e-8,
    max_iter: int = 500,
) -> RefinedScatterers:
    """Polish the selected scatterers off the grid.

    Bounded quasi-Newton over stacked (Re gamma, Im gamma, s) with
    central-difference gradients; elevations stay inside the widened grid
    extent.  If the search fails to improve the misfit the grid solution
    is returned unchanged.  The result is re-gauged (first scatterer
    phase zero) and sorted by elevation.
    """
    k = selected.order
    if k < 1:
        raise ValueError("nothing to refine: selected order is zero")
    gam0 = np.asarray(selected.coefficients, dtype=complex)
    s0 = np.asarray(selected.positions, dtype=float)
    v0 = np.concatenate([gam0.real, gam0.imag, s0])

    def fun(v):
        return problem.misfit(v[:k] + 1j * v[k : 2 * k], v[2 * k :])

    f0 = fun(v0)
    lo, hi = problem.bounds
    bounds = [(None, None)] * (2 * k) + [(lo, hi)] * k
    res = minimize(
        fun,
        v0,
        jac=lambda v: _fd_grad(fun, v),
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": max_iter, "ftol": 1e-16, "gtol": tol},
    )
    ok = bool(np.isfinite(res.fun)) and res.fun <= f0
    v = res.x if ok else v0
    fv = float(res.fun) if ok else f0

    gamma = v[:k] + 1j * v[k : 2 * k]
    s = v[2 * k :]
    srt = np.argsort(s)
    gamma = fix_global_phase(gamma[srt])
    s = s[srt]
    scatterers = tuple(
        RefinedScatterer(float(c.real), float(c.imag), float(si)) for c, si in zip(gamma, s)
    )
    return RefinedScatterers(scatterers=scatterers, residual=fv, converged=ok)
