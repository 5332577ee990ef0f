"""Acquisition geometry, pairing graphs and the bilinear forward model.

An interferometric stack is described by per-acquisition elevation
wavenumbers and timestamps plus a directed acyclic pairing graph whose
edges (master, slave) say which interferograms were formed.  A stack is
*single-master* when one acquisition masters every other one and no other
edges exist; anything else is *multi-master*.

For a discretized elevation axis s_1..s_L the interferogram vector obeys
the bilinear model

    g = (R @ gamma) * conj(S @ gamma)

with r[e, l] = exp(-1j * k_slave(e) * s_l) and
s[e, l] = exp(-1j * k_master(e) * s_l).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AcquisitionGraph",
    "Geometry",
    "ElevationGrid",
    "SteeringPair",
    "MultiMasterStack",
    "build_pairing_graph",
    "steering_pair",
    "forward",
    "forward_single_master",
    "single_master_matrix",
    "wavenumbers_from_baselines",
]


@dataclass(frozen=True)
class AcquisitionGraph:
    """Directed acyclic pairing graph on acquisitions 0..n_acq-1.

    Edges are (master, slave) pairs; the adjacency matrix has
    adjacency[m, n] = 1 iff interferogram slave=n, master=m was formed.
    Every acquisition must take part in at least one interferogram.
    """

    n_acq: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n_acq < 2:
            raise ValueError("need at least two acquisitions")
        if not self.edges:
            raise ValueError("pairing graph has no edges")
        seen = set()
        touched = np.zeros(self.n_acq, dtype=bool)
        for m, n in self.edges:
            if not (0 <= m < self.n_acq and 0 <= n < self.n_acq):
                raise ValueError(f"edge ({m}, {n}) out of range")
            if m == n:
                raise ValueError("self-pairing is not allowed")
            if (m, n) in seen:
                raise ValueError(f"duplicate edge ({m}, {n})")
            seen.add((m, n))
            touched[m] = touched[n] = True
        if not touched.all():
            isolated = np.flatnonzero(~touched).tolist()
            raise ValueError(f"acquisitions {isolated} appear in no edge")
        if self._has_cycle():
            raise ValueError("pairing graph must be acyclic")

    def _has_cycle(self) -> bool:
        succ: list[list[int]] = [[] for _ in range(self.n_acq)]
        for m, n in self.edges:
            succ[m].append(n)
        state = [0] * self.n_acq  # 0 unseen, 1 on stack, 2 done
        for root in range(self.n_acq):
            if state[root]:
                continue
            stack = [(root, iter(succ[root]))]
            state[root] = 1
            while stack:
                node, it = stack[-1]
                for nxt in it:
                    if state[nxt] == 1:
                        return True
                    if state[nxt] == 0:
                        state[nxt] = 1
                        stack.append((nxt, iter(succ[nxt])))
                        break
                else:
                    state[node] = 2
                    stack.pop()
        return False

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n_acq, self.n_acq), dtype=int)
        for m, n in self.edges:
            a[m, n] = 1
        return a

    @property
    def master_idx(self) -> np.ndarray:
        return np.array([m for m, _ in self.edges], dtype=int)

    @property
    def slave_idx(self) -> np.ndarray:
        return np.array([n for _, n in self.edges], dtype=int)

    def is_single_master(self) -> bool:
        """True iff one acquisition masters all others and nothing else."""
        masters = {m for m, _ in self.edges}
        if len(masters) != 1:
            return False
        (i,) = masters
        slaves = {n for _, n in self.edges}
        return slaves == set(range(self.n_acq)) - {i}

    def is_multi_master(self) -> bool:
        return not self.is_single_master()


@dataclass(frozen=True)
class Geometry:
    """Per-acquisition elevation wavenumbers (rad/m) and timestamps (days).

    Wavenumbers are taken directly; ``wavenumbers_from_baselines`` converts
    from physical perpendicular baselines when those are what you have.
    """

    wavenumbers: np.ndarray
    timestamps: np.ndarray
    wavelength: float | None = None
    reference_range: float | None = None

    def __post_init__(self):
        k = np.asarray(self.wavenumbers, dtype=float)
        t = np.asarray(self.timestamps, dtype=float)
        if k.ndim != 1 or t.shape != k.shape:
            raise ValueError("wavenumbers and timestamps must be 1-d, same length")
        if np.any(np.diff(t) < 0):
            raise ValueError("timestamps must be nondecreasing")
        object.__setattr__(self, "wavenumbers", k)
        object.__setattr__(self, "timestamps", t)

    @property
    def n_acq(self) -> int:
        return self.wavenumbers.size

    def rayleigh_resolution(self) -> float:
        """Elevation resolution 2*pi / wavenumber span."""
        span = self.wavenumbers.max() - self.wavenumbers.min()
        if span <= 0:
            raise ValueError("degenerate wavenumber span")
        return 2.0 * np.pi / span


@dataclass(frozen=True)
class ElevationGrid:
    """Uniform grid of candidate elevations (m)."""

    positions: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.positions, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("grid needs at least two positions")
        d = np.diff(s)
        if np.any(d <= 0):
            raise ValueError("grid positions must be strictly increasing")
        if not np.allclose(d, d[0], rtol=1e-12, atol=1e-12 * max(1.0, abs(d[0]))):
            raise ValueError("grid must be uniformly spaced")
        object.__setattr__(self, "positions", s)

    @classmethod
    def linspace(cls, lo: float, hi: float, n: int) -> "ElevationGrid":
        return cls(np.linspace(lo, hi, n))

    @property
    def size(self) -> int:
        return self.positions.size

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0])

    @property
    def extent(self) -> tuple[float, float]:
        return float(self.positions[0]), float(self.positions[-1])


@dataclass(frozen=True)
class SteeringPair:
    """Slave/master steering matrices R, S for one graph+grid combination.

    Rows follow the edge ordering of the graph; entries are unit modulus.
    """

    R: np.ndarray
    S: np.ndarray
    master_idx: np.ndarray
    slave_idx: np.ndarray
    grid: ElevationGrid

    def __post_init__(self):
        if self.R.shape != self.S.shape or self.R.ndim != 2:
            raise ValueError("R and S must share a 2-d shape")
        for name, m in (("R", self.R), ("S", self.S)):
            if not np.allclose(np.abs(m), 1.0, atol=1e-12):
                raise ValueError(f"{name} entries must have unit modulus")

    @property
    def n_obs(self) -> int:
        return self.R.shape[0]

    @property
    def n_grid(self) -> int:
        return self.R.shape[1]


@dataclass(frozen=True)
class MultiMasterStack:
    """One pixel's interferogram vector plus its provenance."""

    g: np.ndarray
    graph: AcquisitionGraph
    geometry: Geometry

    def __post_init__(self):
        g = np.asarray(self.g, dtype=complex)
        if g.ndim != 1 or g.size != self.graph.n_edges:
            raise ValueError("observation length must equal edge count")
        if self.geometry.n_acq != self.graph.n_acq:
            raise ValueError("geometry/graph acquisition counts differ")
        object.__setattr__(self, "g", g)


def build_pairing_graph(
    n_acq: int,
    scheme: str,
    *,
    master: int | None = None,
    edges=None,
) -> AcquisitionGraph:
    """Construct a pairing graph.

    scheme "single_master": star rooted at ``master`` (default 0).
    scheme "sequential_pairs": disjoint chronological pairs (0,1), (2,3), ...
    requires even n_acq.
    scheme "explicit": user-supplied (master, slave) edge list.
    """
    if scheme == "single_master":
        i = 0 if master is None else int(master)
        if not 0 <= i < n_acq:
            raise ValueError("master index out of range")
        e = tuple((i, n) for n in range(n_acq) if n != i)
        return AcquisitionGraph(n_acq, e)
    if scheme == "sequential_pairs":
        if n_acq % 2:
            raise ValueError("sequential_pairs needs an even acquisition count")
        e = tuple((2 * j, 2 * j + 1) for j in range(n_acq // 2))
        return AcquisitionGraph(n_acq, e)
    if scheme == "explicit":
        if not edges:
            raise ValueError("explicit scheme needs an edge list")
        return AcquisitionGraph(n_acq, tuple((int(m), int(n)) for m, n in edges))
    raise ValueError(f"unknown pairing scheme {scheme!r}")


def steering_pair(graph: AcquisitionGraph, geom: Geometry, grid: ElevationGrid) -> SteeringPair:
    """Slave/master steering matrices on the elevation grid."""
    if geom.n_acq != graph.n_acq:
        raise ValueError("geometry/graph acquisition counts differ")
    k = geom.wavenumbers
    mi, si = graph.master_idx, graph.slave_idx
    s = grid.positions
    R = np.exp(-1j * np.outer(k[si], s))
    S = np.exp(-1j * np.outer(k[mi], s))
    return SteeringPair(R=R, S=S, master_idx=mi, slave_idx=si, grid=grid)


def forward(pair: SteeringPair, gamma: np.ndarray) -> np.ndarray:
    """Bilinear interferogram model (R gamma) * conj(S gamma)."""
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.shape != (pair.n_grid,):
        raise ValueError("reflectivity length must match the grid")
    return (pair.R @ gamma) * np.conj(pair.S @ gamma)


def single_master_matrix(
    graph: AcquisitionGraph, geom: Geometry, grid: ElevationGrid
) -> np.ndarray:
    """Linear steering matrix from per-edge wavenumber differences.

    a[e, l] = exp(-1j * (k_slave(e) - k_master(e)) * s_l).  For a genuine
    single-master star this is the classical tomographic design matrix;
    applied to a multi-master graph it is the matrix a fake-single-master
    inversion would use.
    """
    k = geom.wavenumbers
    dk = k[graph.slave_idx] - k[graph.master_idx]
    return np.exp(-1j * np.outer(dk, grid.positions))


def forward_single_master(a: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Linear interferogram model a @ gamma."""
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.shape != (a.shape[1],):
        raise ValueError("reflectivity length must match the grid")
    return a @ gamma


def wavenumbers_from_baselines(
    baselines: np.ndarray, wavelength: float, reference_range: float
) -> np.ndarray:
    """k = -4*pi*b / (wavelength * range) for perpendicular baselines b."""
    if wavelength <= 0 or reference_range <= 0:
        raise ValueError("wavelength and range must be positive")
    return -4.0 * np.pi * np.asarray(baselines, dtype=float) / (wavelength * reference_range)
