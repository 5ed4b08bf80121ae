"""Resolvent expansions at thresholds and at eigenvalues.

At a base energy ``lam`` the matrix ``u + G R0(lam - kappa^2) G*`` is studied
for small ``kappa`` in the quarter disc ``Re kappa >= 0, Im kappa <= 0``, so
that ``lam - kappa^2`` stays in the closed upper half-plane. Real ``kappa``
approaches ``lam`` from below, ``kappa = -i t`` from above.

Threshold case
    Channels with ``|lam - lambda_j| = 2`` contribute ``-vPv / (kappa vartheta_j)``
    where ``vartheta_j = -sqrt(4 + kappa^2)`` at a left edge and
    ``i sqrt(4 - kappa^2)`` at a right edge. Multiplying by ``kappa`` gives
    ``I_0(kappa) = I_0(0) + kappa A_0(kappa)``, which is inverted by three
    nested applications of :func:`jn_inverse_step` with projections
    ``S_0 >= S_1 >= S_2``.

Eigenvalue case
    ``J_0(kappa) = T_0 + kappa^2 T_1(kappa)`` inverted by one step with the
    kernel projection ``S`` of ``T_0``.

Every level ``k`` is carried as the triple ``I_k(kappa)``, ``A_k(kappa) =
(I_k(kappa) - I_k(0)) / kappa`` and ``D_k(kappa) = (A_k(kappa) - A_k(0)) /
kappa``, each evaluated from exact identities that avoid cancellation, so
the expansion is usable down to ``kappa = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EntryPointError, PreconditionError, RadiusError, SingularMatrixError
from .fiber import ModelSpec, classify_channels, model_data
from .linalg import KERNEL_RTOL, kernel_basis, numerical_kernel_projection, range_basis, restricted_inverse
from .resolvent import boundary_weights, continued_weight

log = logging.getLogger(__name__)

DEFAULT_RADIUS = 1e-2
RICHARDSON_KAPPAS = (1e-3, 5e-4, 2.5e-4)


# ---------------------------------------------------------------------------
# generic inversion step


def jn_inverse_step(a0: np.ndarray, a1, s: np.ndarray, z: complex, check_radius: bool = True, tol: float = 1e-10):
    """One step of the projection-based inversion of ``A(z) = A0 + z A1(z)``.

    Parameters
    ----------
    a0 : ndarray
    a1 : callable or ndarray
        ``A1(z)``; a constant matrix is accepted.
    s : ndarray
        Orthogonal projection with ``A0 + S`` invertible and
        ``S (A0 + S)^-1 S = S``.
    z : complex
        Nonzero expansion parameter.

    Returns
    -------
    b : ndarray
        ``B(z) = (S - S (A(z) + S)^-1 S) / z``.
    inverse : ndarray or None
        ``A(z)^-1 = (A+S)^-1 + (A+S)^-1 S B(z)^-1 S (A+S)^-1 / z`` with
        ``B^-1`` taken on ``Ran S``; ``None`` when ``B(z)`` is singular there,
        which means ``A(z)`` itself is singular.

    Raises
    ------
    PreconditionError
        If ``A0 + S`` is singular, ``S (A0 + S)^-1 S != S``, or ``z`` lies
        outside the geometric-series radius.

    Examples
    --------
    >>> b, inv = jn_inverse_step(np.zeros((1, 1)), np.eye(1), np.eye(1), 0.5)
    >>> float(b[0, 0].real), float(inv[0, 0].real)
    (0.6666666666666666, 2.0)
    """
    z = complex(z)
    if z == 0:
        raise PreconditionError("z must be nonzero")
    a0 = np.asarray(a0, dtype=complex)
    s = np.asarray(s, dtype=complex)
    a1z = np.asarray(a1(z) if callable(a1) else a1, dtype=complex)
    base = a0 + s
    if np.linalg.cond(base) > 1e12:
        raise PreconditionError("A0 + S is singular")
    base_inv = np.linalg.inv(base)
    if np.linalg.norm(s @ base_inv @ s - s) > tol * max(1.0, np.linalg.norm(s)):
        raise PreconditionError("S (A0 + S)^-1 S differs from S")
    if check_radius and np.linalg.norm(a1z @ base_inv, 2) * abs(z) >= 1.0:
        raise PreconditionError("z outside the geometric-series radius")
    x = a0 + z * a1z + s
    x_inv = np.linalg.inv(x)
    b = (s - s @ x_inv @ s) / z
    q = range_basis(s)
    if q.shape[1] == 0:
        return b, x_inv
    small = q.conj().T @ b @ q
    if np.linalg.cond(small) > 1e12:
        return b, None
    b_inv = q @ np.linalg.solve(small, q.conj().T)
    return b, x_inv + (x_inv @ s @ b_inv @ s @ x_inv) / z


# ---------------------------------------------------------------------------
# analytic channel functions


def edge_vartheta(kappa: complex, side: str) -> complex:
    """``vartheta_j(kappa)``: ``-sqrt(4 + kappa^2)`` (left edge) or ``i sqrt(4 - kappa^2)`` (right)."""
    k2 = complex(kappa) ** 2
    if side == "left":
        return -np.sqrt(4.0 + k2)
    return 1j * np.sqrt(4.0 - k2)


def _edge_quotients(kappa: complex, side: str):
    """First three difference quotients of ``-1 / vartheta(kappa)`` at zero.

    Returns ``(e, e1, e2)`` with ``e = (-1/vartheta(k) + 1/vartheta(0)) / k``,
    ``e1 = e / k`` and ``e2 = (e1(k) - e1(0)) / k``, all cancellation-free.
    """
    k = complex(kappa)
    k2 = k * k
    if side == "left":
        r = np.sqrt(4.0 + k2)
        unit = -1.0
    else:
        r = np.sqrt(4.0 - k2)
        unit = 1j
    denom = 2.0 * r * (2.0 + r)
    e1 = unit / denom
    e = k * e1
    e2 = (1.0 if side == "left" else 1j) * k * (2.0 + 4.0 / (r + 2.0)) / (16.0 * denom)
    return e, e1, e2


def _check_kappa(kappa: complex, radius: float):
    k = complex(kappa)
    if abs(k) > radius * (1.0 + 1e-12):
        raise RadiusError(f"|kappa| = {abs(k):.3g} exceeds the expansion radius {radius:.3g}")
    if k.real < -1e-15 or k.imag > 1e-15:
        raise RadiusError(f"kappa = {k} outside the quarter disc Re >= 0, Im <= 0")
    return k


# ---------------------------------------------------------------------------
# level recursion


@dataclass(eq=False)
class _Level:
    """``I(k)``, ``A(k)``, ``D(k)``, ``E(k)`` of one level at one ``kappa``."""

    i: np.ndarray
    a: np.ndarray
    d: np.ndarray | None = None
    e: np.ndarray | None = None


def _next_level(cur: _Level, zero: _Level, s: np.ndarray, space: np.ndarray | None, kappa: complex) -> tuple:
    """Advance the chain by one Schur step with kernel projection ``s``.

    ``space`` is the projection onto the subspace where the current level
    lives (``None`` for the full space). Returns the next level at ``kappa``
    and the restricted inverse ``X(kappa)^-1`` of ``I(kappa) + s``.
    """
    x_inv = restricted_inverse(cur.i + s, space)
    x0_inv = restricted_inverse(zero.i + s, space)
    sas = s @ cur.a
    core = sas @ x_inv @ cur.a @ s
    nxt_i = sas @ s - kappa * core
    nxt_a = s @ cur.d @ s - core if cur.d is not None else None
    nxt_d = None
    if cur.e is not None and cur.d is not None:
        quotient = cur.d @ x_inv @ cur.a - zero.a @ x0_inv @ cur.a @ x_inv @ cur.a + zero.a @ x0_inv @ cur.d
        nxt_d = s @ cur.e @ s - s @ quotient @ s
    return _Level(nxt_i, nxt_a, nxt_d), x_inv


def _restricted_kernel(matrix: np.ndarray, space: np.ndarray, scale: float) -> np.ndarray:
    q = range_basis(space)
    if q.shape[1] == 0:
        return np.zeros_like(space)
    small = q.conj().T @ matrix @ q
    sv = np.linalg.svd(small, compute_uv=False)
    if sv[0] < 1e-12 * scale:
        ker = np.eye(q.shape[1], dtype=complex)
    else:
        ker = kernel_basis(small, KERNEL_RTOL)
    basis = q @ ker
    proj = basis @ basis.conj().T
    return 0.5 * (proj + proj.conj().T)


# ---------------------------------------------------------------------------
# threshold data


@dataclass(eq=False)
class ThresholdExpansionData:
    """Expansion data at a threshold.

    Attributes
    ----------
    energy : float
    edge_channels : list
        1-based channels with ``|energy - lambda_j| = 2``.
    left_edge, right_edge : list
        The same split by the side of the band.
    I0_0, M1_0, I1_0, I2_0, I3_0 : ndarray
        Leading coefficients of the chain; ``I3_0`` is compressed to ``S2``.
    S0, S1, S2 : ndarray
        Nested kernel projections.
    Cprime : dict
        ``(l, m) -> C'_{lm}(0)`` by Richardson extrapolation.
    Cprime_closed : dict
        The same from ``-[S_l, X_m(0)^-1 A_m(0) X_m(0)^-1]``.
    """

    model: ModelSpec
    energy: float
    edge_channels: list
    left_edge: list
    right_edge: list
    I0_0: np.ndarray
    M1_0: np.ndarray
    I1_0: np.ndarray
    I2_0: np.ndarray
    I3_0: np.ndarray
    S0: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    Cprime: dict = field(default_factory=dict)
    Cprime_closed: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def ranks(self) -> tuple:
        return tuple(int(round(np.trace(p).real)) for p in (self.S0, self.S1, self.S2))


class _ThresholdChain:
    def __init__(self, energy: float, model: ModelSpec):
        data = model_data(model)
        self.model = model
        self.energy = float(energy)
        self.data = data
        groups = classify_channels(energy, data.eig)
        self.left = list(groups["left_edge"])
        self.right = list(groups["right_edge"])
        self.edge = self.left + self.right
        if not self.edge:
            raise EntryPointError(f"energy {energy} is not a threshold")
        self.regular = [j for j in range(data.period) if j not in self.edge]
        self.sides = {j: "left" for j in self.left} | {j: "right" for j in self.right}
        self.scale = max(1.0, float(np.linalg.norm(data.sandwiches, axis=(1, 2)).max()))
        self._zero_base, _ = self._base(0.0)
        self._build_projections()

    def _base(self, kappa: complex) -> tuple:
        """Level ``(I_0, A_0, D_0, E_0)`` and ``M_1`` at ``kappa``."""
        n = self.data.period
        sand = self.data.sandwiches
        m1 = self.data.u.astype(complex)
        t1 = np.zeros((n, n), dtype=complex)
        for j in self.regular:
            value, quotient = continued_weight(self.energy, kappa, self.data.lambdas[j])
            m1 = m1 + value * sand[j]
            t1 = t1 + quotient * sand[j]
        i0 = kappa * m1
        a0 = m1.copy()
        d0 = kappa * t1
        e0 = t1.copy()
        for j in self.edge:
            theta = edge_vartheta(kappa, self.sides[j])
            e, e1, e2 = _edge_quotients(kappa, self.sides[j])
            i0 = i0 - sand[j] / theta
            a0 = a0 + e * sand[j]
            d0 = d0 + e1 * sand[j]
            e0 = e0 + e2 * sand[j]
        return _Level(i0, a0, d0, e0), m1

    def _build_projections(self):
        z = self._zero_base
        self.I0_0 = z.i
        self.M1_0 = z.a
        self.S0 = numerical_kernel_projection(self.I0_0)
        lv1, _ = _next_level(z, z, self.S0, None, 0.0)
        self.I1_0 = lv1.i
        self.S1 = _restricted_kernel(self.I1_0, self.S0, self.scale)
        lv2, _ = _next_level(lv1, lv1, self.S1, self.S0, 0.0)
        self.I2_0 = lv2.i
        self.S2 = _restricted_kernel(self.I2_0, self.S1, self.scale)
        lv3, _ = _next_level(lv2, lv2, self.S2, self.S1, 0.0)
        self.I3_0 = lv3.i
        self.flags = []
        q2 = range_basis(self.S2)
        if q2.shape[1]:
            small = q2.conj().T @ self.I3_0 @ q2
            if np.linalg.svd(small, compute_uv=False)[-1] < KERNEL_RTOL * max(1.0, np.linalg.norm(small, 2)):
                self.flags.append("I3(0) singular on Ran S2")
                log.warning("I3(0) is singular on Ran S2 at energy %.12g", self.energy)

    def chain(self, kappa: complex) -> dict:
        """Levels and restricted inverses ``X_m(kappa)^-1`` at ``kappa``."""
        z0 = self._zero_base
        b, m1 = self._base(kappa)
        l1, x0 = _next_level(b, z0, self.S0, None, kappa)
        z1, _ = _next_level(z0, z0, self.S0, None, 0.0)
        l2, x1 = _next_level(l1, z1, self.S1, self.S0, kappa)
        z2, _ = _next_level(z1, z1, self.S1, self.S0, 0.0)
        l3, x2 = _next_level(l2, z2, self.S2, self.S1, kappa)
        return {"I": [b.i, l1.i, l2.i, l3.i], "X_inv": [x0, x1, x2], "M1": m1}

    def m_value(self, kappa: complex) -> np.ndarray:
        """``M(lam - kappa^2)`` from the nested inversion formula."""
        k = complex(kappa)
        c = self.chain(k)
        x0, x1, x2 = c["X_inv"]
        i1, i2, i3 = c["I"][1:]
        s0, s1, s2 = self.S0, self.S1, self.S2
        if k == 0:
            if not np.any(s0):
                return np.zeros_like(x0)
            if not np.any(s1):
                return x0 @ s0 @ restricted_inverse(i1 + 0.0, s0) @ s0 @ x0
            raise SingularMatrixError("M(lam, 0) diverges: S1 != 0 at this threshold")
        inv2 = x2.copy()
        if np.any(s2):
            i3_inv = restricted_inverse(i3, s2)
            inv2 = x2 + (x2 @ s2 @ i3_inv @ s2 @ x2) / k
        inv1 = x1.copy()
        if np.any(s1):
            inv1 = x1 + (x1 @ s1 @ inv2 @ s1 @ x1) / k
        out = k * x0
        if np.any(s0):
            out = out + x0 @ s0 @ inv1 @ s0 @ x0
        return out

    def commutators(self, kappa: complex) -> dict:
        c = self.chain(kappa)
        projs = [self.S0, self.S1, self.S2]
        return {
            (l, m): projs[l] @ c["X_inv"][m] - c["X_inv"][m] @ projs[l]
            for l in range(3)
            for m in range(l + 1)
        }

    def cprime(self, kappas=RICHARDSON_KAPPAS) -> dict:
        h, h2, h4 = kappas
        tables = [self.commutators(k) for k in (h, h2, h4)]
        out = {}
        for key in tables[0]:
            f1, f2, f4 = (t[key] / k for t, k in zip(tables, (h, h2, h4)))
            out[key] = (8.0 * f4 - 6.0 * f2 + f1) / 3.0
        return out

    def cprime_closed(self) -> dict:
        z0 = self._zero_base
        z1, _ = _next_level(z0, z0, self.S0, None, 0.0)
        z2, _ = _next_level(z1, z1, self.S1, self.S0, 0.0)
        levels = [(z0, None, self.S0), (z1, self.S0, self.S1), (z2, self.S1, self.S2)]
        projs = [self.S0, self.S1, self.S2]
        out = {}
        for m, (lv, space, s) in enumerate(levels):
            x_inv = restricted_inverse(lv.i + s, space)
            mid = x_inv @ lv.a @ x_inv
            for l in range(m, 3):
                out[(l, m)] = -(projs[l] @ mid - mid @ projs[l])
        return out


@lru_cache(maxsize=256)
def _threshold_chain(energy: float, model: ModelSpec) -> _ThresholdChain:
    return _ThresholdChain(energy, model)


def threshold_expansion(energy: float, model: ModelSpec, with_cprime: bool = True) -> ThresholdExpansionData:
    """Nested kernel projections and leading coefficients at a threshold.

    Raises
    ------
    EntryPointError
        If ``energy`` is not a threshold within ``1e-12``.
    """
    ch = _threshold_chain(float(energy), model)
    cp = ch.cprime() if with_cprime else {}
    closed = ch.cprime_closed() if with_cprime else {}
    return ThresholdExpansionData(
        model,
        float(energy),
        sorted(j + 1 for j in ch.edge),
        [j + 1 for j in ch.left],
        [j + 1 for j in ch.right],
        ch.I0_0,
        ch.M1_0,
        ch.I1_0,
        ch.I2_0,
        ch.I3_0,
        ch.S0,
        ch.S1,
        ch.S2,
        cp,
        closed,
        list(ch.flags),
    )


# ---------------------------------------------------------------------------
# eigenvalue (non-threshold) data


@dataclass(eq=False)
class EigenvalueExpansionData:
    """``T0 = u + G R0(lam + i0) G*``, its kernel projection ``S`` and the inverse data.

    ``regular`` is ``True`` when ``S = 0``, in which case ``M(lam, 0) = T0^-1``.
    """

    model: ModelSpec
    energy: float
    T0: np.ndarray
    S: np.ndarray
    J0S_inv: np.ndarray
    J1_0: np.ndarray
    regular: bool


class _EigenChain:
    def __init__(self, energy: float, model: ModelSpec):
        data = model_data(model)
        groups = classify_channels(energy, data.eig)
        if len(groups["left_edge"]) or len(groups["right_edge"]):
            raise EntryPointError(f"energy {energy} is a threshold; use threshold_expansion")
        self.energy = float(energy)
        self.data = data
        weights = boundary_weights(energy, data.lambdas)
        self.T0 = data.u + np.tensordot(weights, data.sandwiches, axes=1)
        self.S = numerical_kernel_projection(self.T0)
        self.J0S_inv = np.linalg.inv(self.T0 + self.S)
        self.J1_0 = self.S @ self._t1(0.0) @ self.S

    def _t1(self, kappa):
        out = np.zeros_like(self.data.sandwiches[0])
        for j in range(self.data.period):
            _, q = continued_weight(self.energy, kappa, self.data.lambdas[j])
            out = out + q * self.data.sandwiches[j]
        return out

    def m_value(self, kappa: complex) -> np.ndarray:
        k = complex(kappa)
        t1 = self._t1(k)
        j0 = self.T0 + k * k * t1
        if not np.any(self.S):
            return np.linalg.inv(j0)
        if k == 0:
            raise SingularMatrixError("M(lam, 0) diverges at an eigenvalue")
        x_inv = np.linalg.inv(j0 + self.S)
        j1 = self.S @ x_inv @ t1 @ self.S
        return x_inv + (x_inv @ self.S @ restricted_inverse(j1, self.S) @ self.S @ x_inv) / (k * k)


@lru_cache(maxsize=256)
def _eigen_chain(energy: float, model: ModelSpec) -> _EigenChain:
    return _EigenChain(energy, model)


def eigenvalue_expansion(energy: float, model: ModelSpec) -> EigenvalueExpansionData:
    """Expansion data at a non-threshold energy; ``regular`` flags a non-eigenvalue."""
    ch = _eigen_chain(float(energy), model)
    return EigenvalueExpansionData(model, ch.energy, ch.T0, ch.S, ch.J0S_inv, ch.J1_0, not np.any(ch.S))


def admissible_radius(energy: float, model: ModelSpec, radius: float = DEFAULT_RADIUS) -> float:
    """Largest ``|kappa|`` for which the continuation equals the physical boundary value.

    ``energy - kappa^2`` must not reach the threshold of any channel that is
    regular at ``energy``; half the square root of that gap is used.
    """
    data = model_data(model)
    d = np.abs(np.abs(energy - data.lambdas) - 2.0)
    gaps = d[d > 1e-12]
    if gaps.size == 0:
        return radius
    return float(min(radius, 0.5 * np.sqrt(gaps.min())))


def m_extended(energy: float, kappa: complex, model: ModelSpec, radius: float = DEFAULT_RADIUS) -> np.ndarray:
    """``M(energy - kappa^2)`` continued to the closed quarter disc, ``kappa = 0`` included.

    Raises
    ------
    RadiusError
        If ``kappa`` is outside the quarter disc, or ``|kappa|`` exceeds
        ``radius`` or :func:`admissible_radius`.
    SingularMatrixError
        At ``kappa = 0`` when the limit does not exist.
    """
    k = _check_kappa(kappa, admissible_radius(energy, model, radius))
    groups = classify_channels(energy, model_data(model).eig)
    if len(groups["left_edge"]) or len(groups["right_edge"]):
        return _threshold_chain(float(energy), model).m_value(k)
    return _eigen_chain(float(energy), model).m_value(k)


def threshold_chain(energy: float, model: ModelSpec) -> _ThresholdChain:
    """Cached chain object, exposing ``chain``, ``commutators`` and ``m_value``."""
    return _threshold_chain(float(energy), model)
