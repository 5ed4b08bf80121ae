"""On-shell scattering matrix and its limits at thresholds and eigenvalues.

Blocks are returned as ``N x N`` matrices supported on ``P_j C^N`` and
``P_j' C^N``. The assembled matrix uses the open-channel basis ``xi_j`` in
index order, so its entries are ``s_{jj'} = <xi_j, block_{jj'} xi_j'>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EntryPointError, SingularMatrixError, ThresholdError
from .expansions import eigenvalue_expansion, threshold_chain, threshold_expansion
from .fiber import ModelSpec, beta_values, classify_channels, is_threshold, model_data
from .linalg import restricted_inverse
from .resolvent import m_matrix


@dataclass(eq=False)
class OnShellSMatrix:
    energy: float
    open_channels: list
    blocks: dict
    assembled: np.ndarray

    def unitarity_defect(self) -> float:
        a = self.assembled
        return float(np.linalg.norm(a @ a.conj().T - np.eye(a.shape[0]), 2)) if a.size else 0.0


def _assemble(coefficients: np.ndarray, channels: list, eig) -> tuple:
    """Blocks ``s_{jj'} xi_j xi_j'^*`` from the coefficient matrix in the ``xi`` basis."""
    blocks = {}
    for a, j in enumerate(channels):
        for b, jp in enumerate(channels):
            blocks[(j + 1, jp + 1)] = coefficients[a, b] * np.outer(eig.eigvecs[:, j], eig.eigvecs[:, jp].conj())
    return blocks


def _coefficients(middle: np.ndarray, channels: list, data, factor: complex, weights: np.ndarray) -> np.ndarray:
    """``delta - factor * w_j w_j' <xi_j, vhalf middle vhalf xi_j'>`` on ``channels``."""
    xi = data.eig.eigvecs[:, channels]
    core = xi.conj().T @ data.vhalf @ middle @ data.vhalf @ xi
    w = weights[channels]
    return np.eye(len(channels)) - factor * core * np.outer(w, w)


def onshell_smatrix(energy: float, model: ModelSpec) -> OnShellSMatrix:
    """``S(lam)_{jj'} = delta - 2i beta_j^-1 P_j vhalf M(lam + i0) vhalf P_j' beta_j'^-1``.

    Raises
    ------
    EntryPointError
        At a threshold (use :func:`threshold_limit`) or an eigenvalue (use
        :func:`embedded_limit`).
    """
    data = model_data(model)
    if is_threshold(energy, data.eig):
        raise EntryPointError(f"energy {energy} is a threshold; use threshold_limit")
    try:
        m = m_matrix(float(energy), model)
    except SingularMatrixError as exc:
        raise EntryPointError(f"energy {energy} is an eigenvalue; use embedded_limit") from exc
    channels = [int(j) for j in classify_channels(energy, data.eig)["open"]]
    inv_beta = 1.0 / beta_values(energy, data.lambdas)
    coeff = _coefficients(m, channels, data, 2j, inv_beta)
    return OnShellSMatrix(float(energy), [j + 1 for j in channels], _assemble(coeff, channels, data.eig), coeff)


# ---------------------------------------------------------------------------
# thresholds


@dataclass(eq=False)
class ThresholdLimitReport:
    """Limits of the S-matrix blocks at a threshold, per side of approach.

    ``limits[side][(j, j')]`` holds the block (``N x N``) for
    ``side in {"from-left", "from-right"}``; ``classification[side][(j, j')]``
    is ``already-open``, ``opening`` or ``closing``. ``undefined_pairs`` lists
    pairs with both channels closed on both sides.
    """

    energy: float
    limits: dict
    classification: dict
    coefficients: dict
    channels: dict
    undefined_pairs: list = field(default_factory=list)

    def block(self, side: str, j: int, jp: int) -> np.ndarray:
        return self.limits[side][(j, jp)]


def _edge_formula(data, exp, chain, channels, factor):
    """Both-at-edge formula: ``delta - f P v (I0+S0)^-1 v P + f P v C' S1 (I2+S2)^-1 S1 C' v P``."""
    x0 = np.linalg.inv(exp.I0_0 + exp.S0)
    middle = x0
    if np.any(exp.S1):
        c10 = exp.Cprime[(1, 0)]
        i2 = restricted_inverse(exp.I2_0 + exp.S2, exp.S1)
        middle = x0 - c10 @ exp.S1 @ i2 @ exp.S1 @ c10
    ones = np.ones(data.period)
    return _coefficients(middle, channels, data, factor, ones)


def threshold_limit(energy: float, model: ModelSpec) -> ThresholdLimitReport:
    """Limits ``lim S(energy -+ kappa^2)`` from both sides of a threshold.

    From the right (energies above) left-edge channels are open; from the
    left right-edge channels are open. Pairs of channels that are open at
    ``energy`` itself share one limit on both sides. Pairs with exactly one
    edge channel tend to zero; pairs with both channels at the edge use the
    ``(I0(0) + S0)^-1`` formula, with factor 1 from the right and ``i`` from
    the left.

    Raises
    ------
    EntryPointError
        If ``energy`` is not a threshold.
    """
    data = model_data(model)
    groups = classify_channels(energy, data.eig)
    if not (len(groups["left_edge"]) or len(groups["right_edge"])):
        raise EntryPointError(f"energy {energy} is not a threshold")
    exp = threshold_expansion(energy, model)
    chain = threshold_chain(energy, model)
    opened = [int(j) for j in groups["open"]]
    inv_beta = np.zeros(data.period)
    if opened:
        inv_beta[opened] = 1.0 / beta_values(energy, data.lambdas[opened])
    # already-open pairs: S0 (I1(0) + S1)^-1 S0 on Ran S0
    if np.any(exp.S0):
        middle = exp.S0 @ restricted_inverse(exp.I1_0 + exp.S1, exp.S0) @ exp.S0
    else:
        middle = np.zeros_like(exp.I0_0)
    open_coeff = _coefficients(middle, opened, data, 2j, inv_beta) if opened else np.zeros((0, 0))

    limits, classes, coeffs, chans = {}, {}, {}, {}
    for side, edge_key, factor, label in (
        ("from-right", "left_edge", 1.0, "opening"),
        ("from-left", "right_edge", 1j, "closing"),
    ):
        edge = [int(j) for j in groups[edge_key]]
        channels = sorted(opened + edge)
        coeff = np.zeros((len(channels), len(channels)), dtype=complex)
        pos = {j: a for a, j in enumerate(channels)}
        for a, j in enumerate(opened):
            for b, jp in enumerate(opened):
                coeff[pos[j], pos[jp]] = open_coeff[a, b]
        if edge:
            edge_coeff = _edge_formula(data, exp, chain, edge, factor)
            for a, j in enumerate(edge):
                for b, jp in enumerate(edge):
                    coeff[pos[j], pos[jp]] = edge_coeff[a, b]
        cls = {}
        for j in channels:
            for jp in channels:
                cls[(j + 1, jp + 1)] = "already-open" if (j in opened and jp in opened) else label
        limits[side] = _assemble(coeff, channels, data.eig)
        classes[side] = cls
        coeffs[side] = coeff
        chans[side] = [j + 1 for j in channels]
    involved = set(opened) | set(groups["left_edge"]) | set(groups["right_edge"])
    undefined = [(j + 1, jp + 1) for j in range(data.period) for jp in range(data.period) if j not in involved and jp not in involved]
    return ThresholdLimitReport(float(energy), limits, classes, coeffs, chans, undefined)


# ---------------------------------------------------------------------------
# embedded eigenvalues


@dataclass(eq=False)
class EmbeddedLimit:
    energy: float
    open_channels: list
    blocks: dict
    assembled: np.ndarray


def embedded_limit(energy: float, model: ModelSpec) -> EmbeddedLimit:
    """``delta - 2i beta_j^-1 P_j vhalf (J0(0) + S)^-1 vhalf P_j' beta_j'^-1`` at an embedded eigenvalue.

    Raises
    ------
    EntryPointError
        If ``energy`` is a threshold, not an eigenvalue, or not inside a band.
    """
    data = model_data(model)
    if is_threshold(energy, data.eig):
        raise EntryPointError(f"energy {energy} is a threshold")
    exp = eigenvalue_expansion(energy, model)
    channels = [int(j) for j in classify_channels(energy, data.eig)["open"]]
    if exp.regular or not channels:
        raise EntryPointError(f"energy {energy} is not an embedded eigenvalue")
    inv_beta = 1.0 / beta_values(energy, data.lambdas)
    coeff = _coefficients(exp.J0S_inv, channels, data, 2j, inv_beta)
    return EmbeddedLimit(float(energy), [j + 1 for j in channels], _assemble(coeff, channels, data.eig), coeff)


# ---------------------------------------------------------------------------
# convergence probe


@dataclass(eq=False)
class ContinuityTable:
    energy: float
    side: str
    rows: list
    order: float | None


def _numeric_coefficients(energy: float, model: ModelSpec, channels: list) -> np.ndarray:
    s = onshell_smatrix(energy, model)
    pos = {j: a for a, j in enumerate(s.open_channels)}
    idx = [pos[j] for j in channels]
    return s.assembled[np.ix_(idx, idx)]


def continuity_probe(energy: float, model: ModelSpec, kappas, side: str = "from-left") -> ContinuityTable:
    """``max |S(energy -+ kappa^2) - limit|`` over the coefficients, per ``kappa``.

    ``side="from-left"`` probes ``energy - kappa^2`` and ``from-right`` probes
    ``energy + kappa^2``. The observed order is the least-squares slope of
    ``log error`` against ``log kappa``.
    """
    kappas = [float(k) for k in kappas]
    data = model_data(model)
    if is_threshold(energy, data.eig):
        rep = threshold_limit(energy, model)
        channels = rep.channels[side]
        limit = rep.coefficients[side]
    else:
        lim = embedded_limit(energy, model)
        channels = lim.open_channels
        limit = lim.assembled
    sign = -1.0 if side == "from-left" else 1.0
    rows = []
    for k in kappas:
        num = _numeric_coefficients(energy + sign * k * k, model, channels)
        rows.append((k, float(np.max(np.abs(num - limit))) if num.size else 0.0))
    order = None
    good = [(k, e) for k, e in rows if e > 0]
    if len(good) >= 2:
        x = np.log([k for k, _ in good])
        y = np.log([e for _, e in good])
        order = float(np.polyfit(x, y, 1)[0])
    return ContinuityTable(float(energy), side, rows, order)


def smatrix_scan(model: ModelSpec, energies, exclusion: float = 1e-6) -> list:
    """On-shell S-matrices on a grid, skipping points near thresholds and eigenvalues."""
    data = model_data(model)
    out = []
    for e in energies:
        if np.min(np.abs(np.asarray(data.eig.thresholds) - e)) < exclusion:
            continue
        try:
            out.append(onshell_smatrix(float(e), model))
        except (EntryPointError, ThresholdError):
            continue
    return out
