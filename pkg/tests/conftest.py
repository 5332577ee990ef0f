import numpy as np
import pytest

from mmtomo import nls, stack


def random_problem(rng, m, n, planted=False, noise=0.0):
    """Random dense bilinear instance, optionally with a planted solution."""
    A = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    B = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    if planted:
        x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        b = (A @ x) * np.conj(B @ x)
        if noise:
            b = b + noise * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
        return nls.NlsProblem(A=A, B=B, b=b), x
    b = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return nls.NlsProblem(A=A, B=B, b=b), None


def benchmark_look(seed, m=20, n_grid=101, extent=30.0, snr_db=2.0,
                   return_wavenumbers=False):
    """Seeded single-master look for the acceleration benchmark.

    Two off-grid scatterers at 2 dB; returns the raw steering design and
    the observation vector.  Off-grid truth keeps neighbouring columns
    jointly active, which is the regime the penalty heuristics target.
    With return_wavenumbers the wavenumber-difference vector comes back
    too, so the same instance can be written out as a stack file.
    """
    rng = np.random.default_rng(seed)
    k = np.sort(rng.uniform(-0.155, 0.155, m))
    s = np.linspace(-extent, extent, n_grid)
    A = np.exp(-1j * np.outer(k, s))
    g = np.zeros(m, dtype=complex)
    s1 = rng.uniform(-extent / 2, -2.0)
    s2 = rng.uniform(2.0, extent / 2)
    for st_, amp in zip((s1, s2), (1.0, 0.8)):
        g += amp * np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.exp(-1j * k * st_)
    sd = np.abs(g) / np.sqrt(10 ** (snr_db / 10.0))
    g = g + sd * (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)
    if return_wavenumbers:
        return A, g, k
    return A, g


def random_tomo_instance(rng, n_acq=16, n_grid=24, extent=20.0, scatterers=2,
                         separation=None, snr_db=None, spacing="random"):
    """Seeded sequential-pairs stack with on-grid scatterers.

    Returns (pair, g, gamma, support, geom, grid).
    """
    if spacing == "random":
        k = np.sort(rng.uniform(-0.31, 0.31, n_acq))
    else:
        k = np.linspace(-0.31, 0.31, n_acq)
    geom = stack.Geometry(wavenumbers=k, timestamps=11.0 * np.arange(n_acq))
    graph = stack.build_pairing_graph(n_acq, "sequential_pairs")
    grid = stack.ElevationGrid.linspace(-extent, extent, n_grid)
    pair = stack.steering_pair(graph, geom, grid)
    if separation is not None:
        rho = geom.rayleigh_resolution()
        mid = n_grid // 2
        off = max(1, int(round(separation * rho / grid.spacing / 2)))
        support = [mid - off, mid + off]
    else:
        support = sorted(rng.choice(n_grid, size=scatterers, replace=False).tolist())
    gamma = np.zeros(n_grid, dtype=complex)
    amps = rng.uniform(0.8, 2.0, size=len(support))
    phases = rng.uniform(0, 2 * np.pi, size=len(support))
    gamma[support] = amps * np.exp(1j * phases)
    g = stack.forward(pair, gamma)
    if snr_db is not None:
        sig = float(np.mean(np.abs(g) ** 2))
        sd = np.sqrt(sig / (10 ** (snr_db / 10.0)) / 2.0)
        g = g + sd * (rng.standard_normal(g.size) + 1j * rng.standard_normal(g.size))
    return pair, g, gamma, tuple(support), geom, grid


def fd_gradient(p, x, h=1e-6):
    """Central differences of the objective over the stacked real view."""
    x = np.asarray(x, dtype=complex)
    n = x.size
    v = np.concatenate([x.real, x.imag])
    out = np.zeros(2 * n)
    for i in range(2 * n):
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        fp = nls.nls_objective(p, vp[:n] + 1j * vp[n:])
        fm = nls.nls_objective(p, vm[:n] + 1j * vm[n:])
        out[i] = (fp - fm) / (2 * h)
    return out


def fd_hessian(p, x, h=1e-6):
    """Central differences of the analytic gradient, column by column."""
    x = np.asarray(x, dtype=complex)
    n = x.size
    v = np.concatenate([x.real, x.imag])
    out = np.zeros((2 * n, 2 * n))
    for i in range(2 * n):
        vp, vm = v.copy(), v.copy()
        vp[i] += h
        vm[i] -= h
        dp = nls.nls_gradient(p, vp[:n] + 1j * vp[n:])
        dm = nls.nls_gradient(p, vm[:n] + 1j * vm[n:])
        gp = np.concatenate([dp.real, dp.imag])
        gm = np.concatenate([dm.real, dm.imag])
        out[:, i] = (gp - gm) / (2 * h)
    return out


def brute_force_1d(p, r_max, n_r=400, n_phi=400):
    """Dense magnitude x phase scan of a one-variable objective.

    Returns (best value, best complex point).
    """
    radii = np.linspace(0.0, r_max, n_r)
    phis = np.linspace(0.0, 2 * np.pi, n_phi, endpoint=False)
    zs = radii[:, None] * np.exp(1j * phis)[None, :]
    q = p.A[:, 0] * np.conj(p.B[:, 0])
    # f(z) = 0.5 || |z|^2 q - b ||^2 evaluated on the whole polar grid
    t = (np.abs(zs) ** 2).ravel()
    vals = 0.5 * np.sum(
        np.abs(t[:, None] * q[None, :] - p.b[None, :]) ** 2, axis=1
    )
    i = int(np.argmin(vals))
    return float(vals[i]), zs.ravel()[i]
