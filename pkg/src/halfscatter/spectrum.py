"""Eigenvalues of the fibered operator from the kernel criterion.

For an energy off the thresholds, ``lam`` is an eigenvalue exactly when the
real criterion matrix ``C(lam) = u + sum_below vPv/beta^2 - sum_above vPv/beta^2``
has a kernel vector that is also annihilated by ``P_j vhalf`` for every open
channel ``j``.

The search exploits monotonicity. On an interval free of thresholds each
weight ``+-beta^-2`` is increasing in ``lam``, so ``C`` (compressed to the
common kernel of the open-channel rows) is nondecreasing in the Loewner
order. Eigenvalues of the fiber are the zero crossings of its eigenvalue
branches, which are counted by inertia and refined by a bracketing solver.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ThresholdError
from .fiber import ModelSpec, classify_channels, is_threshold, model_data
from .linalg import KERNEL_RTOL, kernel_basis
from .resolvent import criterion_matrix

log = logging.getLogger(__name__)


@dataclass(eq=False)
class KernelTestResult:
    energy: float
    matrix: np.ndarray
    kernel_dim: int
    kernel_basis: np.ndarray
    open_channels: list

    @property
    def is_eigenvalue(self) -> bool:
        return self.kernel_dim > 0


@dataclass(eq=False)
class PointSpectrum:
    """Eigenvalues of one fiber with multiplicities.

    ``entries`` holds ``(energy, multiplicity, location)`` tuples sorted by
    energy, where ``location`` is ``below``, ``above`` or ``embedded``.
    """

    theta: float
    entries: list
    metadata: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([e[0] for e in self.entries])


def _open_rows(energy: float, model: ModelSpec) -> tuple:
    data = model_data(model)
    opened = classify_channels(energy, data.eig)["open"]
    # row xi_j^* vhalf spans the range of (P_j vhalf)^*
    rows = (data.eig.eigvecs[:, opened].conj().T @ data.vhalf) if len(opened) else np.zeros((0, data.period))
    return opened, rows


def eigenvalue_test(energy: float, model: ModelSpec, rtol: float = KERNEL_RTOL) -> KernelTestResult:
    """Kernel criterion at a non-threshold energy.

    Raises
    ------
    ThresholdError
        If ``energy`` is a threshold.
    """
    data = model_data(model)
    if is_threshold(energy, data.eig):
        raise ThresholdError(f"energy {energy} is a threshold")
    c = criterion_matrix(energy, model)
    opened, rows = _open_rows(energy, model)
    # a multiple eigenvalue can make c vanish entirely; u keeps the scale O(1)
    scale = max(np.linalg.norm(c, 2), np.linalg.norm(data.u, 2))
    basis = kernel_basis(np.vstack([c, rows]), rtol, scale=scale)
    return KernelTestResult(float(energy), c, basis.shape[1], basis, [int(j) + 1 for j in opened])


def _compressed(energy, model, q):
    c = criterion_matrix(energy, model)
    h = q.conj().T @ c @ q
    return np.linalg.eigvalsh(0.5 * (h + h.conj().T))


def _search_interval(model, lo, hi, pad, xtol):
    """Roots of the compressed criterion branches on ``(lo, hi)``."""
    mid = 0.5 * (lo + hi)
    _, rows = _open_rows(mid, model)
    n = model.period
    q = kernel_basis(rows, scale=1.0, rtol=1e-12) if rows.shape[0] else np.eye(n, dtype=complex)
    if q.shape[1] == 0:
        return [], 0
    a, b = lo + pad, hi - pad
    ea = _compressed(a, model, q)
    eb = _compressed(b, model, q)
    roots = []
    evaluations = 0
    for k in range(q.shape[1]):
        if ea[k] < 0.0 <= eb[k]:
            def branch(x, k=k):
                return _compressed(x, model, q)[k]

            root, info = brentq(branch, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, full_output=True)
            evaluations += info.function_calls
            roots.append(root)
    return roots, evaluations


def point_spectrum(model: ModelSpec, pad: float = 1e-9, xtol: float = 1e-13, merge_tol: float = 1e-8) -> PointSpectrum:
    """All eigenvalues of the fiber operator, with multiplicities.

    Parameters
    ----------
    model : ModelSpec
    pad : float
        Distance kept from thresholds; eigenvalues closer than this are not
        resolved.
    xtol : float
        Absolute tolerance of the root refinement.
    merge_tol : float
        Roots closer than this are reported as one eigenvalue.
    """
    data = model_data(model)
    vmax = float(np.max(np.abs(model.v)))
    thresholds = np.asarray(data.eig.thresholds)
    edges = np.concatenate([[-4.0 - vmax - 1.0], thresholds, [4.0 + vmax + 1.0]])
    lo_spec, hi_spec = data.eig.spectrum
    found = []
    brackets = []
    calls = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 2 * pad:
            continue
        roots, evaluations = _search_interval(model, lo, hi, pad, xtol)
        calls += evaluations
        brackets.append((float(lo), float(hi), len(roots)))
        found.extend(roots)
    found.sort()
    clusters = []
    for r in found:
        if clusters and r - clusters[-1][-1] <= merge_tol:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    entries = []
    for cluster in clusters:
        energy = float(np.mean(cluster))
        test = eigenvalue_test(energy, model)
        if test.kernel_dim == 0:
            log.info("crossing at %.12g fails the open-channel condition", energy)
            continue
        if energy < lo_spec:
            location = "below"
        elif energy > hi_spec:
            location = "above"
        else:
            location = "embedded"
        entries.append((energy, max(test.kernel_dim, len(cluster)), location))
    meta = {"brackets": brackets, "function_calls": calls, "pad": pad, "xtol": xtol}
    return PointSpectrum(model.theta, entries, meta)


@dataclass(eq=False)
class DispersionResult:
    rows: list
    warnings: list

    def as_table(self):
        return [("theta", "branch", "lambda", "multiplicity", "location")] + self.rows


def surface_dispersion(potential, thetas, jump_tol: float = 0.25) -> DispersionResult:
    """Point spectra over a theta grid, stitched into branches.

    Entries are matched to the branch endpoint of the previous theta by
    nearest distance. A branch is continued only when the match is unique
    and closer than ``jump_tol``; otherwise a new branch starts and a warning
    is recorded.
    """
    rows = []
    notes = []
    last = {}
    next_id = 0
    for theta in np.atleast_1d(np.asarray(thetas, dtype=float)):
        spec = point_spectrum(ModelSpec(potential, float(theta)))
        claimed = {}
        for energy, mult, loc in spec.entries:
            best, dist = None, np.inf
            for bid, (e_prev, loc_prev) in last.items():
                d = abs(energy - e_prev)
                if loc_prev == loc and d < dist:
                    best, dist = bid, d
            if best is None or dist > jump_tol or best in claimed:
                if best is not None and best in claimed:
                    notes.append(f"theta={theta:.6g}: ambiguous match near lambda={energy:.6g}")
                best = next_id
                next_id += 1
            claimed[best] = (energy, loc)
            rows.append((float(theta), best, energy, mult, loc))
        last = claimed
    for n in notes:
        warnings.warn(n)
    return DispersionResult(rows, notes)
