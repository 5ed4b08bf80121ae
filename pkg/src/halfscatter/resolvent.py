"""Closed-form sandwiched free resolvent and the matrix ``M(z)``.

The scalar building block is the momentum integral

    m(z, lam) = int_0^pi (2 cos w + lam - z)^(-1) dw / pi,

evaluated by the residue formula. With ``a_pm`` the roots of
``a^2 - (z - lam) a + 1``, the value is ``1 / (a_in - a_out)`` where ``a_in``
is the root inside the unit disc. Selecting the root by modulus makes the
result independent of the square-root branch.
"""

from __future__ import annotations

import numpy as np

from .errors import BoundaryPointError, SingularMatrixError, ThresholdError
from .fiber import ModelSpec, classify_channels, model_data

# reciprocal condition number below which M is declared singular
SINGULAR_RCOND = 1e-10


def momentum_integral(z, lam_star):
    """Residue evaluation of the momentum integral.

    Parameters
    ----------
    z : complex or array_like
        Spectral parameter. Real values are allowed outside
        ``[lam_star - 2, lam_star + 2]``.
    lam_star : float or array_like

    Returns
    -------
    complex or ndarray

    Raises
    ------
    BoundaryPointError
        If a real ``z`` lies on the band segment.

    Examples
    --------
    >>> complex(momentum_integral(3j, 0.0))  # doctest: +ELLIPSIS
    0.27735...j
    >>> float(momentum_integral(3.0, 0.0).real)  # doctest: +ELLIPSIS
    -0.4472...
    """
    z = np.asarray(z, dtype=complex)
    w = z - np.asarray(lam_star, dtype=float)
    on_band = (w.imag == 0.0) & (np.abs(w.real) <= 2.0)
    if np.any(on_band):
        raise BoundaryPointError("real spectral parameter on the band; use boundary_sandwich")
    s = np.sqrt(w * w - 4.0)
    # a_+ = (w + s)/2 lies in the disc iff |w + s| < |w - s|
    inside = np.abs(w + s) < np.abs(w - s)
    out = np.where(inside, 1.0 / s, -1.0 / s)
    return out[()] if out.ndim == 0 else out


def boundary_weights(energy: float, lambdas, tol: float = 1e-12) -> np.ndarray:
    """Limits ``m(energy + i0, lambda_j)`` for every channel.

    ``+beta^-2`` below the band, ``i beta^-2`` inside it, ``-beta^-2`` above.
    """
    d = float(energy) - np.asarray(lambdas, dtype=float)
    if np.any(np.abs(np.abs(d) - 2.0) <= tol):
        raise ThresholdError(f"energy {energy} is a threshold")
    beta2 = np.sqrt(np.abs(d * d - 4.0))
    return np.where(d < -2.0, 1.0 / beta2, np.where(d > 2.0, -1.0 / beta2, 1j / beta2)).astype(complex)


def continued_weight(energy: float, kappa: complex, lam: float):
    """Analytic continuation of ``m(energy - kappa^2, lam)`` from ``energy + i0``.

    The channel must not be at threshold at ``energy``. Returns the value and
    the quotient ``(m(energy - kappa^2) - m(energy + i0)) / kappa^2`` computed
    without cancellation, so it is usable at ``kappa = 0``.
    """
    d = float(energy) - float(lam)
    k2 = complex(kappa) ** 2
    dk = d - k2
    if abs(d) > 2.0:
        sign = 1.0 if d < -2.0 else -1.0
        w0 = d * d - 4.0
        w = dk * dk - 4.0
        rw0 = np.sqrt(w0)
        rw = np.sqrt(w)
        value = sign / rw
        quotient = sign * (2.0 * d - k2) / (rw * rw0 * (rw + rw0))
    elif abs(d) < 2.0:
        q0 = 4.0 - d * d
        q = 4.0 - dk * dk
        rq0 = np.sqrt(q0)
        rq = np.sqrt(q)
        value = 1j / rq
        quotient = -1j * (2.0 * d - k2) / (rq * rq0 * (rq + rq0))
    else:
        raise ThresholdError("channel at threshold has no regular continuation")
    return complex(value), complex(quotient)


def sandwiched_resolvent(z: complex, model: ModelSpec) -> np.ndarray:
    """``G R_0(z) G* = sum_j m(z, lambda_j) vhalf P_j vhalf`` for ``Im z != 0``."""
    z = complex(z)
    if z.imag == 0.0:
        raise BoundaryPointError("real z: use boundary_sandwich for boundary values")
    data = model_data(model)
    weights = momentum_integral(z, data.lambdas)
    return np.tensordot(weights, data.sandwiches, axes=1)


def boundary_sandwich(energy: float, model: ModelSpec) -> np.ndarray:
    """Boundary value ``G R_0(energy + i0) G*`` from the three-sum formula."""
    data = model_data(model)
    weights = boundary_weights(energy, data.lambdas)
    return np.tensordot(weights, data.sandwiches, axes=1)


def _sandwich_any(z, model: ModelSpec) -> np.ndarray:
    z = complex(z)
    if z.imag == 0.0:
        return boundary_sandwich(z.real, model)
    return sandwiched_resolvent(z, model)


def m_matrix(z, model: ModelSpec) -> np.ndarray:
    """``M(z) = (u + G R_0(z) G*)^-1``; a real ``z`` means the ``+i0`` boundary value.

    Raises
    ------
    SingularMatrixError
        If the reciprocal condition number drops below ``1e-10``. At a real
        energy this flags an eigenvalue.
    ThresholdError
        For a real ``z`` at a threshold.
    """
    data = model_data(model)
    x = data.u + _sandwich_any(z, model)
    if 1.0 / np.linalg.cond(x) < SINGULAR_RCOND:
        raise SingularMatrixError(f"u + G R0 G* singular at z={z}; eigenvalue suspected")
    return np.linalg.inv(x)


def full_sandwiched_resolvent(z, model: ModelSpec) -> np.ndarray:
    """``G R(z) G* = u - u M(z) u`` for the perturbed fiber."""
    u = model_data(model).u
    return u - u @ m_matrix(z, model) @ u


def criterion_matrix(energy: float, model: ModelSpec) -> np.ndarray:
    """Real part ``u + sum_below vPv/beta^2 - sum_above vPv/beta^2`` of ``u + G R_0 G*``."""
    data = model_data(model)
    weights = boundary_weights(energy, data.lambdas)
    weights = np.where(np.abs(energy - data.lambdas) < 2.0, 0.0, weights.real)
    return data.u + np.tensordot(weights, data.sandwiches, axes=1)


def open_channel_indices(energy: float, model: ModelSpec) -> np.ndarray:
    return classify_channels(energy, model_data(model).eig)["open"]
