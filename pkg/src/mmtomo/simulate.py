"""Synthetic single-look stacks with controlled noise and motion.

Acquisition-level signals are synthesized per scatterer as

    slc_n = sum_l gamma_l * exp(-1j * (k_n * s_l + 4 pi v_l t_n / wavelength))

with circular complex Gaussian noise added per acquisition at a variance
giving the requested signal-to-noise power ratio.  Interferograms are
slave times conjugate master, optionally normalized by the master
amplitude (the convention both the true single-master stack and the
fake-single-master reading of a multi-master stack use).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stack import AcquisitionGraph, Geometry, MultiMasterStack

__all__ = [
    "Scatterer",
    "Scene",
    "ErrorStats",
    "gen_geometry",
    "noiseless_slcs",
    "synthesize_slcs",
    "simulate_stack",
    "error_stats",
]

DEFAULT_WAVELENGTH = 0.031


@dataclass(frozen=True)
class Scatterer:
    s: float
    gamma: complex
    v: float = 0.0


@dataclass(frozen=True)
class Scene:
    """Scatterer list plus the acquisition-level noise setting (dB);
    snr_db = inf means noiseless."""

    scatterers: tuple[Scatterer, ...]
    snr_db: float = math.inf

    def __post_init__(self):
        object.__setattr__(self, "scatterers", tuple(self.scatterers))


@dataclass(frozen=True)
class ErrorStats:
    n: int
    min: float
    max: float
    mean: float
    median: float
    sd: float
    mad: float


def gen_geometry(
    n_acq: int,
    k_max: float,
    spacing: str = "uniform",
    seed=None,
    t_spacing: float = 11.0,
) -> Geometry:
    """Wavenumbers in [-k_max, k_max], timestamps on a regular revisit.

    spacing "uniform" is a regular ramp; "random" draws sorted uniform
    wavenumbers from the given seed.
    """
    if n_acq < 2 or k_max <= 0:
        raise ValueError("need n_acq >= 2 and k_max > 0")
    if spacing == "uniform":
        k = np.linspace(-k_max, k_max, n_acq)
    elif spacing == "random":
        rng = np.random.default_rng(seed)
        k = np.sort(rng.uniform(-k_max, k_max, n_acq))
    else:
        raise ValueError(f"unknown spacing {spacing!r}")
    t = t_spacing * np.arange(n_acq, dtype=float)
    return Geometry(wavenumbers=k, timestamps=t)


def noiseless_slcs(scene: Scene, geom: Geometry, wavelength: float = DEFAULT_WAVELENGTH) -> np.ndarray:
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    k = geom.wavenumbers
    t = geom.timestamps
    out = np.zeros(geom.n_acq, dtype=complex)
    for sc in scene.scatterers:
        out += sc.gamma * np.exp(-1j * (k * sc.s + 4.0 * np.pi * sc.v * t / wavelength))
    return out


def synthesize_slcs(
    scene: Scene,
    geom: Geometry,
    wavelength: float = DEFAULT_WAVELENGTH,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Noiseless signal plus per-acquisition circular Gaussian noise.

    Each acquisition's noise variance is its own signal power divided by
    the linear SNR, so the requested power ratio holds acquisition by
    acquisition.
    """
    clean = noiseless_slcs(scene, geom, wavelength)
    if math.isinf(scene.snr_db):
        return clean
    if rng is None:
        rng = np.random.default_rng()
    snr_lin = 10.0 ** (scene.snr_db / 10.0)
    sigma = np.abs(clean) / math.sqrt(snr_lin)
    w = (rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size)) / math.sqrt(2.0)
    return clean + sigma * w


def simulate_stack(
    scene: Scene,
    graph: AcquisitionGraph,
    geom: Geometry,
    wavelength: float = DEFAULT_WAVELENGTH,
    seed=None,
    normalize_master: bool = False,
    rng: np.random.Generator | None = None,
) -> MultiMasterStack:
    """Form the interferogram vector of one pixel along the graph edges.

    normalize_master divides each interferogram by the master amplitude
    (no-op on data that is already interferometric).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    slc = synthesize_slcs(scene, geom, wavelength, rng)
    mi, si = graph.master_idx, graph.slave_idx
    g = slc[si] * np.conj(slc[mi])
    if normalize_master:
        amp = np.abs(slc[mi])
        if np.any(amp == 0.0):
            raise ValueError("master amplitude vanished; cannot normalize")
        g = g / amp
    return MultiMasterStack(g=g, graph=graph, geometry=geom)


def error_stats(estimates, truth) -> ErrorStats:
    """Elementwise estimate-minus-truth summary.

    sd is the sample standard deviation (n - 1 divisor, 0 for a single
    element); mad is the median absolute deviation about the median.
    """
    e = np.asarray(estimates, dtype=float) - np.asarray(truth, dtype=float)
    if e.ndim != 1 or e.size == 0:
        raise ValueError("need a nonempty 1-d error sample")
    med = float(np.median(e))
    sd = float(np.std(e, ddof=1)) if e.size > 1 else 0.0
    return ErrorStats(
        n=e.size,
        min=float(e.min()),
        max=float(e.max()),
        mean=float(e.mean()),
        median=med,
        sd=sd,
        mad=float(np.median(np.abs(e - med))),
    )
