"""Model definition and the analytic eigensystem of the fiber matrix.

Channels are labelled ``1..N`` in every public argument and report. Arrays
are stored with channel ``j`` at position ``j - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidModelError

TWO_PI = 2.0 * np.pi
# tolerance used when deciding whether two band energies coincide
COINCIDENCE_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Periodic boundary potential together with a quasi-momentum.

    Parameters
    ----------
    potential : sequence of float
        Values ``v(1), ..., v(N)`` of the boundary potential over one period.
    theta : float
        Quasi-momentum in ``[0, 2*pi]``.
    """

    potential: tuple
    theta: float = 0.0

    def __post_init__(self):
        values = tuple(float(x) for x in np.asarray(self.potential, dtype=float).ravel())
        object.__setattr__(self, "potential", values)
        object.__setattr__(self, "theta", float(self.theta))
        if len(values) < 2:
            raise InvalidModelError(f"period must be at least 2, got {len(values)}")
        if not np.all(np.isfinite(values)):
            raise InvalidModelError("potential values must be finite")
        if all(x == 0.0 for x in values):
            raise InvalidModelError("potential must not vanish identically")
        if not (-1e-12 <= self.theta <= TWO_PI + 1e-12):
            raise InvalidModelError(f"theta={self.theta} outside [0, 2pi]")

    @property
    def period(self) -> int:
        return len(self.potential)

    @property
    def v(self) -> np.ndarray:
        return np.array(self.potential)

    def with_theta(self, theta: float) -> "ModelSpec":
        return ModelSpec(self.potential, theta)

    def scaled(self, factor: float) -> "ModelSpec":
        return ModelSpec(tuple(factor * x for x in self.potential), self.theta)


@dataclass(frozen=True, eq=False)
class PotentialFactors:
    """Factorization ``diag(v) = u @ vhalf @ vhalf`` with ``u`` a sign matrix."""

    u: np.ndarray
    vhalf: np.ndarray


@dataclass(frozen=True, eq=False)
class FiberEigensystem:
    """Eigenvalues, unit eigenvectors and projections of the fiber matrix.

    Attributes
    ----------
    theta : float
    lambdas : ndarray, shape (N,)
        ``lambdas[j-1] = 2 cos((theta + 2 pi j) / N)``.
    eigvecs : ndarray, shape (N, N)
        Column ``j-1`` is the unit eigenvector of channel ``j``.
    projections : ndarray, shape (N, N, N)
        ``projections[j-1]`` is the rank-one projection onto channel ``j``.
    """

    theta: float
    lambdas: np.ndarray
    eigvecs: np.ndarray
    projections: np.ndarray
    thresholds: np.ndarray = field(repr=False)

    @property
    def period(self) -> int:
        return len(self.lambdas)

    @property
    def bands(self) -> np.ndarray:
        """Open intervals ``(lambda_j - 2, lambda_j + 2)`` as an ``(N, 2)`` array."""
        return np.stack([self.lambdas - 2.0, self.lambdas + 2.0], axis=1)

    @property
    def spectrum(self) -> tuple:
        """Closed spectrum ``[min lambda - 2, max lambda + 2]`` of the free fiber."""
        return float(self.lambdas.min() - 2.0), float(self.lambdas.max() + 2.0)

    def open_channels(self, energy: float) -> list:
        """Channels ``j`` whose band contains ``energy`` (1-based labels)."""
        d = energy - self.lambdas
        return [j + 1 for j in np.flatnonzero(np.abs(d) < 2.0)]


def build_fiber_matrix(theta: float, period: int) -> np.ndarray:
    """Hermitian ``N x N`` fiber matrix with corner entries ``exp(-+ i theta)``.

    Examples
    --------
    >>> build_fiber_matrix(np.pi, 2)
    array([[0.+0.j, 0.+0.j],
           [0.+0.j, 0.+0.j]])
    """
    if period < 2:
        raise InvalidModelError(f"period must be at least 2, got {period}")
    a = np.zeros((period, period), dtype=complex)
    idx = np.arange(period - 1)
    a[idx, idx + 1] += 1.0
    a[idx + 1, idx] += 1.0
    a[0, period - 1] += np.exp(-1j * theta)
    a[period - 1, 0] += np.exp(1j * theta)
    # N = 2 would accumulate rounding noise of order 1e-17 in the real part
    a[np.abs(a) < 1e-15] = 0.0
    return a


@lru_cache(maxsize=256)
def fiber_eigensystem(theta: float, period: int) -> FiberEigensystem:
    """Analytic eigensystem of :func:`build_fiber_matrix`."""
    if period < 2:
        raise InvalidModelError(f"period must be at least 2, got {period}")
    j = np.arange(1, period + 1)
    phases = (theta + TWO_PI * j) / period
    lambdas = 2.0 * np.cos(phases)
    k = np.arange(1, period + 1)
    vecs = np.exp(1j * np.outer(k, phases)) / np.sqrt(period)
    projections = np.einsum("aj,bj->jab", vecs, vecs.conj())
    ends = np.concatenate([lambdas - 2.0, lambdas + 2.0])
    for arr in (lambdas, vecs, projections, ends):
        arr.setflags(write=False)
    return FiberEigensystem(float(theta), lambdas, vecs, projections, _collapse(ends))


def _collapse(values: np.ndarray, tol: float = COINCIDENCE_TOL) -> np.ndarray:
    values = np.sort(values)
    keep = [values[0]]
    for x in values[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    out = np.array(keep)
    out.setflags(write=False)
    return out


def split_potential(v) -> PotentialFactors:
    """Return ``u = sgn(diag v)`` (``+1`` where ``v >= 0``) and ``vhalf = |diag v|^(1/2)``."""
    v = np.asarray(v, dtype=float)
    if v.size < 2 or not np.any(v != 0.0):
        raise InvalidModelError("potential must have length >= 2 and not vanish identically")
    u = np.diag(np.where(v < 0.0, -1.0, 1.0))
    vhalf = np.diag(np.sqrt(np.abs(v)))
    return PotentialFactors(u, vhalf)


def beta_factor(z, channel: int, eig: FiberEigensystem):
    """``|(z - lambda_j)^2 - 4|^(1/4)`` for the 1-based ``channel``."""
    if not 1 <= channel <= eig.period:
        raise IndexError(f"channel {channel} outside 1..{eig.period}")
    return beta_values(z, eig.lambdas[channel - 1])


def beta_values(z, lam):
    """Vectorized ``|(z - lam)^2 - 4|^(1/4)``."""
    d = np.asarray(z) - lam
    return np.abs(d * d - 4.0) ** 0.25


def degenerate_pairs(eig: FiberEigensystem, tol: float = 1e-10) -> list:
    """Unordered channel pairs ``(j, k)``, ``j < k``, with coinciding eigenvalues."""
    lam = eig.lambdas
    out = []
    for a in range(len(lam)):
        for b in range(a + 1, len(lam)):
            if abs(lam[a] - lam[b]) <= tol:
                out.append((a + 1, b + 1))
    return out


def remark_degenerate_pairs(theta_label: str, period: int) -> list:
    """Coincidences predicted by the closed-form case list for ``theta`` in {0, pi, 2pi}.

    Used as an oracle for :func:`degenerate_pairs`.
    """
    n = period
    pairs = set()

    def add(a, b):
        if a != b and 1 <= a <= n and 1 <= b <= n:
            pairs.add((min(a, b), max(a, b)))

    if theta_label == "0" and n >= 3:
        for j in range(1, n):
            add(j, n - j)
    elif theta_label == "pi":
        add(n, n - 1)
        if n >= 4:
            for j in range(1, n - 1):
                add(j, n - j - 1)
    elif theta_label == "2pi" and n >= 3:
        add(n - 2, n)
        if n >= 5:
            for j in range(1, n - 2):
                add(j, n - j - 2)
    return sorted(pairs)


@dataclass(frozen=True, eq=False)
class BandStructure:
    bands: np.ndarray
    thresholds: np.ndarray
    spectrum: tuple
    degenerate_pairs: list


def band_structure(model: ModelSpec) -> BandStructure:
    """Bands, thresholds, free spectrum and coinciding channel pairs of one fiber."""
    eig = fiber_eigensystem(model.theta, model.period)
    return BandStructure(eig.bands, eig.thresholds, eig.spectrum, degenerate_pairs(eig))


@dataclass(frozen=True, eq=False)
class ModelData:
    """Everything derived from a model that the numerical routines reuse.

    ``sandwiches[j-1]`` holds ``vhalf @ P_j @ vhalf``.
    """

    model: ModelSpec
    eig: FiberEigensystem
    factors: PotentialFactors
    sandwiches: np.ndarray
    vhalf_proj: np.ndarray

    @property
    def period(self) -> int:
        return self.model.period

    @property
    def u(self) -> np.ndarray:
        return self.factors.u

    @property
    def vhalf(self) -> np.ndarray:
        return self.factors.vhalf

    @property
    def lambdas(self) -> np.ndarray:
        return self.eig.lambdas


@lru_cache(maxsize=512)
def model_data(model: ModelSpec) -> ModelData:
    eig = fiber_eigensystem(model.theta, model.period)
    factors = split_potential(model.potential)
    vh = factors.vhalf
    sandwiches = np.einsum("ab,jbc,cd->jad", vh, eig.projections, vh)
    # P_j vhalf, used for the open-channel kernel conditions
    vhalf_proj = np.einsum("jab,bc->jac", eig.projections, vh)
    for arr in (sandwiches, vhalf_proj, factors.u, factors.vhalf):
        arr.setflags(write=False)
    return ModelData(model, eig, factors, sandwiches, vhalf_proj)


def classify_channels(energy: float, eig: FiberEigensystem, tol: float = 1e-12):
    """Split channels by position of ``energy`` relative to their band.

    Returns
    -------
    dict
        Keys ``below``, ``open``, ``above``, ``left_edge``, ``right_edge`` mapping
        to 0-based index arrays. ``left_edge`` holds channels with
        ``energy == lambda_j - 2`` within ``tol``.
    """
    d = energy - eig.lambdas
    left = np.abs(d + 2.0) <= tol
    right = np.abs(d - 2.0) <= tol
    edge = left | right
    return {
        "below": np.flatnonzero((d < -2.0) & ~edge),
        "open": np.flatnonzero((np.abs(d) < 2.0) & ~edge),
        "above": np.flatnonzero((d > 2.0) & ~edge),
        "left_edge": np.flatnonzero(left),
        "right_edge": np.flatnonzero(right),
    }


def is_threshold(energy: float, eig: FiberEigensystem, tol: float = 1e-12) -> bool:
    d = energy - eig.lambdas
    return bool(np.any(np.abs(np.abs(d) - 2.0) <= tol))
