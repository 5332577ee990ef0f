"""Nonconvex least squares for the bilinear interferogram model.

Everything here works on the abstract problem

    minimize  f(x) = 1/2 || (A x) * conj(B x) - b ||^2,   x in C^n

of which the tomographic subset problems (A = R[:, idx], B = S[:, idx],
b = g) are instances.  The real-differentiable view stacks real and
imaginary parts into a 2n real vector; gradients and Hessians below are
exact in that view, no numerical differentiation involved.

Notation used throughout the implementation:

    p  = A x,  q  = B x,  res = p * conj(q) - b.

The complex gradient representative is

    d = A^H (res * q) + B^H (conj(res) * p)

and f is stationary at x exactly when d = 0.  The Hessian splits into
three n x n complex blocks

    C = A^H D(|q|^2) A + B^H D(|p|^2) B          (Hermitian)
    D = A^H D(p q) conj(B) + B^H D(p q) conj(A)  (complex symmetric)
    E = A^H D(res) B + B^H D(conj(res)) A        (Hermitian)

assembled as  [[Re(C+D+E), -Im(C-D+E)], [Im(C+D+E), Re(C-D+E)]].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NlsProblem",
    "CriticalityReport",
    "SolverReport",
    "ReflectivityEstimate",
    "nls_objective",
    "nls_gradient",
    "nls_hessian",
    "criticality_condition",
    "closed_form_1d",
    "solve_nls_admm",
    "solve_nls_trustregion",
    "subset_problem",
    "subset_solve",
    "sparse_recovery_enumerate",
    "fix_global_phase",
    "phase_align",
]

MAX_ENUMERATION = 10**6


@dataclass(frozen=True)
class NlsProblem:
    """Data (A, B, b) of one bilinear least-squares instance."""

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=complex)
        B = np.asarray(self.B, dtype=complex)
        b = np.asarray(self.b, dtype=complex)
        if A.ndim != 2 or A.shape != B.shape:
            raise ValueError("A and B must be 2-d with equal shapes")
        if b.shape != (A.shape[0],):
            raise ValueError("b length must match the row count of A")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)

    @property
    def n_obs(self) -> int:
        return self.A.shape[0]

    @property
    def n_var(self) -> int:
        return self.A.shape[1]


@dataclass(frozen=True)
class CriticalityReport:
    """Sign analysis of M = A^H D(b) B + B^H D(conj b) A at the origin.

    The origin is a strict local minimum iff M is negative definite and a
    strict local maximum iff positive definite; an indefinite or
    semidefinite M leaves the origin a saddle or degenerate point.  For
    scalar problems the single entry is 2*Re((a*conj(b_col))^H b), carried
    separately as ``scalar_1d``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    scalar_1d: float | None = None


@dataclass
class SolverReport:
    """Per-run diagnostics shared by the iterative solvers.

    termination is one of converged | max_iter | stagnated | diverged;
    ``note`` carries free-form flags (e.g. an all-zero iterate).
    """

    iterations: int = 0
    termination: str = "max_iter"
    objective_history: list = field(default_factory=list)
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    note: str = ""

    @property
    def converged(self) -> bool:
        return self.termination == "converged"

    @property
    def final_objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else math.nan


@dataclass(frozen=True)
class ReflectivityEstimate:
    """Sparse reflectivity estimate on (or off) the elevation grid."""

    support: tuple[int, ...]
    coefficients: np.ndarray
    positions: np.ndarray
    residual: float
    phase_fixed: bool = True

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        s = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if len(self.support) != c.size or c.size != s.size:
            raise ValueError("support, coefficients and positions must align")
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "positions", s)

    @property
    def order(self) -> int:
        return len(self.support)


def _parts(p: NlsProblem, x: np.ndarray):
    x = np.asarray(x, dtype=complex)
    ax = p.A @ x
    bx = p.B @ x
    res = ax * np.conj(bx) - p.b
    return ax, bx, res


def nls_objective(p: NlsProblem, x: np.ndarray) -> float:
    """0.5 * || (A x) conj(B x) - b ||^2."""
    _, _, res = _parts(p, x)
    return 0.5 * float(np.vdot(res, res).real)


def nls_gradient(p: NlsProblem, x: np.ndarray) -> np.ndarray:
    """Complex representative d of the real gradient (Re d, Im d)."""
    ax, bx, res = _parts(p, x)
    return p.A.conj().T @ (res * bx) + p.B.conj().T @ (np.conj(res) * ax)


def nls_hessian(p: NlsProblem, x: np.ndarray) -> np.ndarray:
    """Exact symmetric Hessian of f in the stacked real view (2n x 2n)."""
    ax, bx, res = _parts(p, x)
    Ah, Bh = p.A.conj().T, p.B.conj().T
    C = Ah @ (np.abs(bx)[:, None] ** 2 * p.A) + Bh @ (np.abs(ax)[:, None] ** 2 * p.B)
    w = (ax * bx)[:, None]
    D = Ah @ (w * np.conj(p.B)) + Bh @ (w * np.conj(p.A))
    E = Ah @ (res[:, None] * p.B) + Bh @ (np.conj(res)[:, None] * p.A)
    cpe = C + D + E
    cme = C - D + E
    top = np.hstack([cpe.real, -cme.imag])
    bot = np.hstack([cpe.imag, cme.real])
    return np.vstack([top, bot])


def criticality_condition(p: NlsProblem, tol: float = 1e-12) -> CriticalityReport:
    """Classify the origin through the sign of the coupling matrix M."""
    M = p.A.conj().T @ (p.b[:, None] * p.B) + p.B.conj().T @ (np.conj(p.b)[:, None] * p.A)
    ev = np.linalg.eigvalsh(M)
    scale = max(1.0, float(np.abs(ev).max()) if ev.size else 1.0)
    lo, hi = ev[0], ev[-1]
    if lo > tol * scale:
        cls = "positive_definite"
    elif hi < -tol * scale:
        cls = "negative_definite"
    elif lo < -tol * scale and hi > tol * scale:
        cls = "indefinite"
    else:
        cls = "semidefinite"
    scalar = float(M[0, 0].real) / 2.0 if p.n_var == 1 else None
    return CriticalityReport(matrix=M, eigenvalues=ev, classification=cls, scalar_1d=scalar)


def closed_form_1d(a: np.ndarray, b_col: np.ndarray, g: np.ndarray) -> float:
    """Optimal modulus for a one-column problem, zero when infeasible.

    With q = a * conj(b_col), the scalar objective
    0.5*|| |x|^2 q - g ||^2 is minimized over the modulus at
    sqrt(Re(q^H g)) / ||q|| whenever Re(q^H g) > 0 and at 0 otherwise;
    the phase of x is free.
    """
    q = np.asarray(a, dtype=complex) * np.conj(np.asarray(b_col, dtype=complex))
    nq2 = float(np.vdot(q, q).real)
    if nq2 <= 0.0:
        raise ValueError("steering column pair is identically zero")
    c = float(np.vdot(q, np.asarray(g, dtype=complex)).real)
    if c <= 0.0:
        return 0.0
    return math.sqrt(c / nq2)


def _ridge_solve(M: np.ndarray, rho: float, rhs: np.ndarray) -> np.ndarray:
    """(M^H M + rho I)^{-1} rhs for tall-or-square small M via Cholesky."""
    n = M.shape[1]
    G = M.conj().T @ M + rho * np.eye(n)
    try:
        L = np.linalg.cholesky(G)
        y = np.linalg.solve(L, rhs)
        return np.linalg.solve(L.conj().T, y)
    except np.linalg.LinAlgError:
        return np.linalg.solve(G, rhs)


def solve_nls_admm(
    p: NlsProblem,
    z0: np.ndarray,
    rho: float = 1.0,
    tol: float = 1e-8,
    atol: float = 1e-10,
    max_iter: int = 50_000,
) -> tuple[np.ndarray, SolverReport]:
    """Splitting solver: x carries the A factor, z the B factor, x = z.

    Each sweep solves the two regularized linear problems obtained by
    freezing the opposite factor, then takes a dual ascent step:

        At = D(conj(B z)) A;  x <- (At^H At + rho I)^-1 (At^H b + rho z - y)
        Bt = D(conj(A x)) B;  z <- (Bt^H Bt + rho I)^-1 (Bt^H conj(b) + rho x + y)
        y <- y + rho (x - z)

    Stops when both residuals ||x - z|| and rho ||z - z_prev|| fall below
    max(atol, tol * (1 + ||z||)).  Note z0 = 0 is a fixed point of the
    sweep (the first x-update returns 0 when B z0 = 0), so callers must
    warm-start from a nonzero point to reach a nonzero solution.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    z = np.asarray(z0, dtype=complex).copy()
    x = z.copy()
    y = np.zeros_like(z)
    rep = SolverReport()
    rep.objective_history.append(nls_objective(p, z))
    for it in range(1, max_iter + 1):
        z_prev = z.copy()
        At = np.conj(p.B @ z)[:, None] * p.A
        x = _ridge_solve(At, rho, At.conj().T @ p.b + rho * z - y)
        Bt = np.conj(p.A @ x)[:, None] * p.B
        z = _ridge_solve(Bt, rho, Bt.conj().T @ np.conj(p.b) + rho * x + y)
        y = y + rho * (x - z)
        r = float(np.linalg.norm(x - z))
        s = float(rho * np.linalg.norm(z - z_prev))
        rep.primal_residuals.append(r)
        rep.dual_residuals.append(s)
        rep.objective_history.append(nls_objective(p, z))
        rep.iterations = it
        thr = max(atol, tol * (1.0 + float(np.linalg.norm(z))))
        if r <= thr and s <= thr:
            rep.termination = "converged"
            break
    return z, rep


def _tr_step(H: np.ndarray, grad: np.ndarray, radius: float,
             tol: float = 1e-10, max_inner: int = 50) -> np.ndarray:
    """Minimize g.p + 0.5 p.H.p over ||p|| <= radius.

    Solved through the eigendecomposition of H (problems here are tiny):
    an interior Newton step when H is positive definite and the step fits,
    otherwise a safeguarded Newton iteration on the boundary multiplier of
    the secular equation ||p(lam)|| = radius, with the degenerate (hard)
    case patched by a minimal-eigenvector contribution.
    """
    evals, Q = np.linalg.eigh(H)
    gh = Q.T @ grad
    lam_min = float(evals[0])

    if lam_min > 0.0:
        ph = -gh / evals
        if np.linalg.norm(ph) <= radius:
            return Q @ ph

    lam_lo = max(0.0, -lam_min)
    # hard case: gradient orthogonal to the minimal eigenspace and the
    # limiting step still interior
    eig_scale = max(1.0, float(np.abs(evals).max()))
    min_space = evals - lam_min <= 1e-12 * eig_scale
    if np.all(np.abs(gh[min_space]) <= 1e-14 * max(1.0, float(np.linalg.norm(gh)))):
        ph = np.zeros_like(gh)
        free = ~min_space
        if np.any(free):
            ph[free] = -gh[free] / (evals[free] + lam_lo)
        pn = float(np.linalg.norm(ph))
        if pn <= radius:
            tau = math.sqrt(max(radius * radius - pn * pn, 0.0))
            ph[int(np.argmax(min_space))] += tau
            return Q @ ph

    # boundary root: ||p(lam)|| decreases from +inf to 0 on (lam_lo, inf);
    # at hi = lam_lo + ||gh||/radius the norm is already <= radius
    lo = lam_lo
    hi = lam_lo + float(np.linalg.norm(gh)) / radius
    lam = lam_lo + max(1e-3 * (hi - lam_lo), 1e-16)
    ph = -gh / (evals + lam)
    for _ in range(max_inner):
        denom = evals + lam
        if np.any(denom <= 0.0):
            lam = 0.5 * (lo + hi)
            continue
        ph = -gh / denom
        pn = float(np.linalg.norm(ph))
        if abs(pn - radius) <= tol:
            break
        if pn > radius:
            lo = lam
        else:
            hi = lam
        # Newton step on 1/radius - 1/||p(lam)||, bisection fallback
        dsum = float(np.sum(gh**2 / denom**3))
        if pn > 0.0 and dsum > 0.0:
            lam_new = lam + (pn - radius) * pn * pn / (radius * dsum)
        else:
            lam_new = 0.5 * (lo + hi)
        lam = lam_new if lo < lam_new < hi else 0.5 * (lo + hi)
    return Q @ ph


def solve_nls_trustregion(
    p: NlsProblem,
    x0: np.ndarray,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, SolverReport]:
    """Trust-region Newton on the stacked real view with exact derivatives.

    Radius management: start 1.0, cap 1e3, shrink by 0.25 when the actual
    over predicted decrease falls under 0.25, double when it exceeds 0.75
    on a boundary step.  Terminates when ||grad|| <= tol * (1 + ||b||).
    """
    n = p.n_var
    x = np.asarray(x0, dtype=complex).copy()
    v = np.concatenate([x.real, x.imag])
    radius, radius_max = 1.0, 1e3
    gtol = tol * (1.0 + float(np.linalg.norm(p.b)))
    rep = SolverReport()

    def unpack(vv: np.ndarray) -> np.ndarray:
        return vv[:n] + 1j * vv[n:]

    fval = nls_objective(p, x)
    rep.objective_history.append(fval)
    for it in range(1, max_iter + 1):
        d = nls_gradient(p, unpack(v))
        grad = np.concatenate([d.real, d.imag])
        if np.linalg.norm(grad) <= gtol:
            rep.termination = "converged"
            break
        H = nls_hessian(p, unpack(v))
        step = _tr_step(H, grad, radius)
        pred = -(grad @ step + 0.5 * step @ H @ step)
        f_new = nls_objective(p, unpack(v + step))
        actual = fval - f_new
        ratio = actual / pred if pred > 0 else -1.0
        rep.iterations = it
        if ratio < 0.25:
            radius *= 0.25
        elif ratio > 0.75 and np.linalg.norm(step) >= 0.999 * radius:
            radius = min(2.0 * radius, radius_max)
        if actual > 0:
            v = v + step
            fval = f_new
            rep.objective_history.append(fval)
        if radius < 1e-14 * (1.0 + float(np.linalg.norm(v))):
            rep.termination = "stagnated"
            break
    else:
        rep.termination = "max_iter"
    return unpack(v), rep


def fix_global_phase(x: np.ndarray, tol: float = 0.0) -> np.ndarray:
    """Rotate so the first coefficient above tol is real nonnegative."""
    x = np.asarray(x, dtype=complex)
    idx = np.flatnonzero(np.abs(x) > tol)
    if idx.size == 0:
        return x.copy()
    return x * np.exp(-1j * np.angle(x[idx[0]]))


def phase_align(x: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Rotate x by the global phase minimizing ||x e^{j phi} - ref||."""
    c = np.vdot(ref, x)
    if c == 0:
        return np.asarray(x, dtype=complex).copy()
    return x * np.exp(-1j * np.angle(c))


def subset_problem(pair, g: np.ndarray, support) -> NlsProblem:
    """Bilinear subproblem restricted to the given grid columns."""
    idx = np.asarray(tuple(support), dtype=int)
    return NlsProblem(A=pair.R[:, idx], B=pair.S[:, idx], b=np.asarray(g, dtype=complex))


def _warm_start(p: NlsProblem) -> np.ndarray:
    """Columnwise closed-form amplitudes; uniform energy when all zero."""
    x0 = np.array(
        [closed_form_1d(p.A[:, j], p.B[:, j], p.b) for j in range(p.n_var)],
        dtype=complex,
    )
    if not np.any(x0):
        amp = math.sqrt(float(np.mean(np.abs(p.b)))) if p.b.size else 1.0
        x0 = np.full(p.n_var, max(amp, 1e-3), dtype=complex)
    return x0


def subset_solve(
    pair, g: np.ndarray, support, solver: str = "trustregion"
) -> tuple[np.ndarray, float, SolverReport]:
    """Solve one support's subproblem, phase-gauged, plus squared misfit.

    Scalar supports use the closed-form estimator directly (it is exact);
    larger supports run the requested iterative solver from a columnwise
    closed-form warm start.
    """
    sp = subset_problem(pair, g, support)
    if sp.n_var == 1:
        amp = closed_form_1d(sp.A[:, 0], sp.B[:, 0], sp.b)
        x = np.array([amp], dtype=complex)
        rep = SolverReport(iterations=0, termination="converged")
        rep.objective_history.append(nls_objective(sp, x))
    else:
        x0 = _warm_start(sp)
        if solver == "admm":
            x, rep = solve_nls_admm(sp, x0)
        elif solver == "trustregion":
            x, rep = solve_nls_trustregion(sp, x0)
        else:
            raise ValueError(f"unknown solver {solver!r}")
        x = fix_global_phase(x)
    rss = 2.0 * nls_objective(sp, x)
    return x, rss, rep


def sparse_recovery_enumerate(
    pair,
    g: np.ndarray,
    max_order: int,
    solver: str = "trustregion",
) -> tuple[ReflectivityEstimate, SolverReport]:
    """Exhaustive best-subset recovery up to ``max_order`` scatterers.

    Every support of size 1..max_order is solved and the support with the
    smallest squared misfit wins; ties within 1e-12 go to the
    lexicographically smallest support.  Refuses to enumerate more than
    1e6 subsets.
    """
    L = pair.n_grid
    g = np.asarray(g, dtype=complex)
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    total = sum(math.comb(L, k) for k in range(1, min(max_order, L) + 1))
    if total > MAX_ENUMERATION:
        raise ValueError(f"enumeration of {total} subsets exceeds the {MAX_ENUMERATION} cap")

    best = None  # (rss, support, coeffs)
    # scalar supports in one vectorized closed-form sweep
    Q = pair.R * np.conj(pair.S)
    c = (Q.conj() * g[:, None]).sum(axis=0).real
    nq2 = (np.abs(Q) ** 2).sum(axis=0)
    amps2 = np.where(c > 0, c / nq2, 0.0)
    g2 = float(np.vdot(g, g).real)
    rss1 = np.maximum(g2 - np.where(c > 0, c * c / nq2, 0.0), 0.0)
    for l in range(L):
        cand = (float(rss1[l]), (l,), np.array([math.sqrt(amps2[l])], dtype=complex))
        if best is None or cand[0] < best[0] - 1e-12:
            best = cand
    best_rep = SolverReport(iterations=0, termination="converged")
    for k in range(2, min(max_order, L) + 1):
        for supp in itertools.combinations(range(L), k):
            x, rss, rep = subset_solve(pair, g, supp, solver=solver)
            if rss < best[0] - 1e-12 or (abs(rss - best[0]) <= 1e-12 and supp < best[1]):
                best = (rss, supp, x)
                best_rep = rep
    rss, supp, x = best
    if not best_rep.objective_history:
        best_rep.objective_history.append(0.5 * rss)
    est = ReflectivityEstimate(
        support=tuple(int(i) for i in supp),
        coefficients=fix_global_phase(x),
        positions=pair.grid.positions[list(supp)],
        residual=float(rss),
    )
    return est, best_rep
