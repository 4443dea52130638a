"""Sampled one-dimensional probability densities on uniform grids.

All distance, altitude and speed distributions in the model are carried as
`DiscretePdf` instances: density values sampled at uniformly spaced grid
nodes, normalized so the trapezoidal integral is 1.  Integration uses the
piecewise-linear interpolant of the cumulative trapezoid, which makes partial
integrals exactly consistent between the reference probability functions and
the map kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_DISTANCE_STEP_NM = 0.25
DEFAULT_VERTICAL_STEP_FT = 100.0
DEFAULT_SPEED_STEP_KT = 1.0

_STEP_RTOL = 1e-9


@dataclass(frozen=True)
class DiscretePdf:
    """Density samples on the uniform grid origin + i*step, i = 0..n-1."""

    origin: float
    step: float
    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if d.ndim != 1 or d.size < 2:
            raise InvalidInputError("density must be a 1D array with at least 2 samples")
        if self.step <= 0 or not math.isfinite(self.step):
            raise InvalidInputError(f"grid step must be positive, got {self.step}")
        if np.any(d < 0):
            raise InvalidInputError("density samples must be nonnegative")
        total = np.trapezoid(d, dx=self.step)
        if abs(total - 1.0) > 1e-6:
            raise InvalidInputError(f"density integrates to {total}, not 1 (normalize first)")
        object.__setattr__(self, "density", d)
        d.setflags(write=False)

    @property
    def size(self) -> int:
        return self.density.size

    @property
    def support(self) -> tuple[float, float]:
        return self.origin, self.origin + (self.density.size - 1) * self.step

    def grid(self) -> np.ndarray:
        return self.origin + self.step * np.arange(self.density.size)

    def mean(self) -> float:
        return float(np.trapezoid(self.grid() * self.density, dx=self.step))

    def cdf_values(self) -> np.ndarray:
        """Cumulative trapezoid at the grid nodes (starts at 0, ends ~1)."""
        d = self.density
        inner = np.cumsum((d[1:] + d[:-1]) * (0.5 * self.step))
        return np.concatenate(([0.0], inner))

    def cdf(self, x) -> np.ndarray:
        """CDF via linear interpolation of the node cumulative, clipped to [0, 1]."""
        cv = self.cdf_values()
        out = np.interp(np.asarray(x, dtype=float), self.grid(), cv, left=0.0, right=cv[-1])
        return np.clip(out, 0.0, 1.0)


def normalized_pdf(origin: float, step: float, raw: np.ndarray) -> DiscretePdf:
    """Build a DiscretePdf from raw nonnegative samples, rescaled to integrate to 1."""
    raw = np.asarray(raw, dtype=float)
    total = np.trapezoid(raw, dx=step)
    if total <= 0 or not math.isfinite(total):
        raise InvalidInputError("cannot normalize: nonpositive total mass")
    return DiscretePdf(origin, step, raw / total)


def pdf_from_samples(samples, bin_width: float) -> DiscretePdf:
    """Histogram density of scalar samples, padded with a zero node each side.

    Degenerate samples (zero range) collapse to a point mass at their value.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidInputError("no samples")
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        return point_mass_pdf(lo, bin_width)
    nbins = max(1, int(math.ceil((hi - lo) / bin_width)))
    counts, edges = np.histogram(x, bins=nbins, range=(lo, lo + nbins * bin_width))
    centers = 0.5 * (edges[:-1] + edges[1:])
    raw = np.concatenate(([0.0], counts.astype(float), [0.0]))
    return normalized_pdf(centers[0] - bin_width, bin_width, raw)


def point_mass_pdf(value: float, step: float) -> DiscretePdf:
    """Single-bin point mass: the sampled stand-in for a Dirac delta."""
    return DiscretePdf(value - step, step, np.array([0.0, 1.0 / step, 0.0]))


def pdf_from_function(fn, lo: float, hi: float, step: float) -> DiscretePdf:
    """Sample fn on [lo, hi] and normalize."""
    n = int(round((hi - lo) / step)) + 1
    xs = lo + step * np.arange(n)
    return normalized_pdf(lo, step, np.maximum(fn(xs), 0.0))


def exponential_pdf(mean: float, step: float = DEFAULT_DISTANCE_STEP_NM,
                    tail: float = 1e-9) -> DiscretePdf:
    """Sampled exponential density on [0, -mean*ln(tail)]."""
    if mean <= 0:
        raise InvalidInputError("exponential mean must be positive")
    hi = -mean * math.log(tail)
    return pdf_from_function(lambda x: np.exp(-x / mean) / mean, 0.0, hi, step)


def truncate_tails(pdf: DiscretePdf, eps: float = 1e-6) -> DiscretePdf:
    """Drop grid prefix/suffix carrying less than eps mass each, renormalize."""
    cv = pdf.cdf_values()
    total = cv[-1]
    lo_idx = int(np.searchsorted(cv, eps * total, side="right"))
    hi_idx = int(np.searchsorted(cv, (1.0 - eps) * total, side="left")) + 1
    lo_idx = max(0, lo_idx - 1)
    hi_idx = min(pdf.size, hi_idx + 1)
    if hi_idx - lo_idx < 2:
        return pdf
    return normalized_pdf(pdf.origin + lo_idx * pdf.step, pdf.step,
                          pdf.density[lo_idx:hi_idx].copy())


def pdf_convolve(f: DiscretePdf, g: DiscretePdf) -> DiscretePdf:
    """Linear convolution of two densities sharing one grid step."""
    if abs(f.step - g.step) > _STEP_RTOL * max(f.step, g.step):
        raise InvalidInputError(f"grid steps differ: {f.step} vs {g.step}")
    raw = np.convolve(f.density, g.density) * f.step
    return normalized_pdf(f.origin + g.origin, f.step, raw)


def pdf_integrate(f: DiscretePdf, lo: float, hi: float) -> float:
    """Integral of f over [lo, hi], clipped to [0, 1].

    Exact trapezoid at grid nodes; linear in the cumulative within a cell.
    """
    if lo > hi:
        raise InvalidInputError(f"integration bounds reversed: [{lo}, {hi}]")
    vals = f.cdf(np.array([lo, hi]))
    return float(np.clip(vals[1] - vals[0], 0.0, 1.0))


def pdf_mix(f: DiscretePdf, g: DiscretePdf, s: float) -> DiscretePdf:
    """Pointwise mixture (1-s)*f + s*g on a common grid, renormalized.

    Both inputs are resampled (linear interpolation) onto the union grid at
    the finer step before mixing.
    """
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError(f"mixture fraction {s} outside [0, 1]")
    step = min(f.step, g.step)
    lo = min(f.support[0], g.support[0])
    hi = max(f.support[1], g.support[1])
    n = int(math.ceil((hi - lo) / step)) + 1
    xs = lo + step * np.arange(n)
    fv = np.interp(xs, f.grid(), f.density, left=0.0, right=0.0)
    gv = np.interp(xs, g.grid(), g.density, left=0.0, right=0.0)
    return normalized_pdf(lo, step, (1.0 - s) * fv + s * gv)
