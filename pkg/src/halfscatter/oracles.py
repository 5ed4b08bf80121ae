"""Brute-force oracles built from the lattice itself.

Nothing here uses the closed forms of :mod:`halfscatter.resolvent`. The fiber
operator on sites ``n = 0..L`` is assembled directly from its definition: the
Neumann-type half-line Laplacian (weight ``sqrt 2`` on the bond ``0-1``)
tensored with the identity, plus the fiber matrix on every site, plus
``diag(v)`` on site ``0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eig_banded, eigh
from scipy.special import jv

from .errors import InvalidRunError
from .fiber import ModelSpec, build_fiber_matrix, split_potential

log = logging.getLogger(__name__)

SQRT2 = np.sqrt(2.0)


@dataclass(eq=False)
class TruncatedFiber:
    """Fiber Hamiltonian on ``n = 0..L`` with a hard wall at ``n = L + 1``.

    Site ``n`` and component ``a`` (0-based) sit at flat index ``n * N + a``.
    """

    theta: float
    length: int
    model: ModelSpec
    h0: sp.csr_matrix = field(repr=False)
    h: sp.csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return self.h.shape[0]


def _hop_weights(length: int) -> np.ndarray:
    w = np.ones(length)
    w[0] = SQRT2
    return w


def truncated_fiber(model: ModelSpec, length: int) -> TruncatedFiber:
    if length < 1:
        raise ValueError("truncation length must be positive")
    n = model.period
    a = build_fiber_matrix(model.theta, n)
    sites = length + 1
    lap = sp.diags([_hop_weights(length), _hop_weights(length)], [-1, 1], shape=(sites, sites))
    h0 = sp.kron(lap, sp.identity(n)) + sp.kron(sp.identity(sites), sp.csr_matrix(a))
    pot = np.zeros(sites * n)
    pot[:n] = model.v
    h = h0 + sp.diags(pot)
    return TruncatedFiber(model.theta, length, model, h0.tocsr(), h.tocsr())


def truncated_fiber_resolvent_oracle(z: complex, length: int, model: ModelSpec, free: bool = True) -> np.ndarray:
    """``vhalf [(H_L - z)^-1]_{00} vhalf`` by backward block elimination.

    With ``free=False`` the perturbed truncated operator is used instead.

    Raises
    ------
    InvalidRunError
        If a pivot block is numerically singular, which happens for real
        ``z`` near the spectrum of the truncated operator.
    """
    z = complex(z)
    n = model.period
    a = build_fiber_matrix(model.theta, n) - z * np.eye(n)
    g = np.linalg.inv(a)
    worst = np.linalg.cond(a)
    for _ in range(length - 1):
        pivot = a - g
        worst = max(worst, np.linalg.cond(pivot))
        g = np.linalg.inv(pivot)
    pivot = a - (2.0 * g if length >= 1 else 0.0)
    if not free:
        pivot = pivot + np.diag(model.v)
    worst = max(worst, np.linalg.cond(pivot))
    if worst > 1e12:
        raise InvalidRunError(f"near-singular elimination (cond {worst:.3g}) at z={z}; increase L or move z off the axis")
    g0 = np.linalg.inv(pivot)
    vhalf = split_potential(model.potential).vhalf
    return vhalf @ g0 @ vhalf


def _trapezoid_weights(z, mu, nodes):
    omega = 2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes
    c = 2.0 * np.cos(omega)
    return np.mean(1.0 / (c[:, None] + mu[None, :] - z), axis=0)


def quadrature_sandwich_oracle(z: complex, model: ModelSpec, rtol: float = 1e-13, max_nodes: int = 2**21) -> np.ndarray:
    """``vhalf (1/pi) int_0^pi (2 cos w + A - z)^-1 dw vhalf`` by periodic trapezoid.

    The fiber matrix is diagonalized numerically and the node count doubled
    until successive results agree to ``rtol``.
    """
    z = complex(z)
    mu, vecs = eigh(build_fiber_matrix(model.theta, model.period))
    vhalf = split_potential(model.potential).vhalf
    nodes = 64
    prev = _trapezoid_weights(z, mu, nodes)
    while True:
        nodes *= 2
        cur = _trapezoid_weights(z, mu, nodes)
        if np.max(np.abs(cur - prev)) <= rtol * max(1.0, np.max(np.abs(cur))):
            break
        if nodes >= max_nodes:
            raise InvalidRunError(f"quadrature not converged with {nodes} nodes at z={z}")
        prev = cur
    return vhalf @ (vecs * cur) @ vecs.conj().T @ vhalf


def extrapolated_boundary_oracle(energy: float, model: ModelSpec, eps0: float = 1e-2, levels: int = 6) -> np.ndarray:
    """Limit ``eps -> 0+`` of the quadrature oracle at ``energy + i eps``.

    Polynomial (Neville) extrapolation through ``eps0 * 2^-k``.
    """
    eps = eps0 * 0.5 ** np.arange(levels)
    values = [quadrature_sandwich_oracle(energy + 1j * e, model) for e in eps]
    table = list(values)
    # Neville tableau evaluated at eps = 0
    for m in range(1, levels):
        for i in range(levels - m):
            table[i] = (eps[i] * table[i + 1] - eps[i + m] * table[i]) / (eps[i] - eps[i + m])
    return table[0]


def _upper_band(h: sp.csr_matrix, bandwidth: int) -> np.ndarray:
    dense_diags = np.zeros((bandwidth + 1, h.shape[0]), dtype=complex)
    for off in range(bandwidth + 1):
        d = h.diagonal(off)
        dense_diags[bandwidth - off, off:] = d
    return dense_diags


def truncated_spectrum_oracle(length: int, model: ModelSpec, margin: float = 1e-3) -> np.ndarray:
    """Eigenvalues of ``H_L`` farther than ``margin`` from the free spectrum.

    The band of the matrix in site-major order has half-width ``N``.
    """
    tf = truncated_fiber(model, length)
    band = _upper_band(tf.h, model.period)
    lam = np.array([2.0 * np.cos((model.theta + 2.0 * np.pi * j) / model.period) for j in range(1, model.period + 1)])
    lo, hi = lam.min() - 2.0, lam.max() + 2.0
    bound = 4.0 + float(np.max(np.abs(model.v))) + 1.0
    below = eig_banded(band, eigvals_only=True, select="v", select_range=(-bound, lo - margin))
    above = eig_banded(band, eigvals_only=True, select="v", select_range=(hi + margin, bound))
    return np.sort(np.concatenate([below, above]))


# ---------------------------------------------------------------------------
# Bloch-Floquet transform of finitely supported functions on Z x N


def bloch_transform(psi: dict, theta: float, period: int, omegas=None):
    """Fiber representation of a finitely supported ``psi`` on ``Z x N``.

    Parameters
    ----------
    psi : dict
        Maps ``(x, n)`` to complex values.
    theta : float
    period : int
    omegas : array_like, optional
        Sample points for the cosine transform.

    Returns
    -------
    seq : ndarray, shape (n_max + 1, N)
        ``seq[n, j-1] = sum_k exp(-i k theta) psi(k N + j, n)``.
    samples : ndarray, shape (len(omegas), N) or None
        ``seq[0] + sqrt 2 sum_{n >= 1} cos(n w) seq[n]``.
    """
    n_max = max((n for (_, n) in psi), default=0)
    seq = np.zeros((n_max + 1, period), dtype=complex)
    for (x, n), value in psi.items():
        k, j = divmod(x - 1, period)
        seq[n, j] += np.exp(-1j * k * theta) * value
    samples = None
    if omegas is not None:
        samples = cosine_transform(seq, omegas)
    return seq, samples


def cosine_transform(seq: np.ndarray, omegas) -> np.ndarray:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    n = np.arange(seq.shape[0])
    kernel = SQRT2 * np.cos(np.outer(omegas, n))
    kernel[:, 0] = 1.0
    return kernel @ seq


def apply_free_hamiltonian(psi: dict) -> dict:
    """Free Hamiltonian on ``Z x N`` applied to a finitely supported ``psi``."""
    out: dict = {}

    def add(key, value):
        out[key] = out.get(key, 0.0) + value

    for (x, n), value in psi.items():
        add((x - 1, n), value)
        add((x + 1, n), value)
        if n == 0:
            add((x, 1), SQRT2 * value)
        elif n == 1:
            add((x, 0), SQRT2 * value)
            add((x, 2), value)
        else:
            add((x, n - 1), value)
            add((x, n + 1), value)
    return out


def apply_fiber_free(seq: np.ndarray, theta: float) -> np.ndarray:
    """Free fiber operator on an ``n``-sequence (grown by one site)."""
    rows, period = seq.shape
    padded = np.zeros((rows + 1, period), dtype=complex)
    padded[:rows] = seq
    out = padded @ build_fiber_matrix(theta, period).T
    out[0] += SQRT2 * padded[1]
    out[1] += SQRT2 * padded[0]
    out[1:-1] += padded[2:]
    out[2:] += padded[1:-1]
    return out


# ---------------------------------------------------------------------------
# time-domain probe


def chebyshev_propagate(h: sp.spmatrix, vec: np.ndarray, time: float, scale: float, tol: float = 1e-12) -> np.ndarray:
    """``exp(-i h time) vec`` for Hermitian ``h`` with spectrum in ``[-scale, scale]``."""
    arg = scale * time
    terms = int(arg + 20.0 * max(arg, 1.0) ** (1.0 / 3.0) + 30)
    coeff = jv(np.arange(terms), arg)
    while terms > 1 and abs(coeff[terms - 1]) < tol * 1e-3:
        terms -= 1
    hs = h / scale
    t_prev = vec.astype(complex)
    out = coeff[0] * t_prev
    if terms == 1:
        return out
    t_cur = hs @ t_prev
    out = out + 2.0 * (-1j) * coeff[1] * t_cur
    phase = -1j
    for k in range(2, terms):
        t_next = 2.0 * (hs @ t_cur) - t_prev
        phase *= -1j
        out = out + 2.0 * phase * coeff[k] * t_next
        t_prev, t_cur = t_cur, t_next
    return out


@dataclass(eq=False)
class ProbeResult:
    energy: float
    incoming: int
    open_channels: list
    blocks: dict
    time: float
    diagnostics: dict


def _channel_amplitude(state: np.ndarray, period: int, eigvec: np.ndarray, omega: float) -> complex:
    seq = state.reshape(-1, period) @ eigvec.conj()
    f = cosine_transform(seq[:, None], [omega])[0, 0]
    return f / np.sqrt(np.pi * 2.0 * np.sin(omega))


def timedomain_smatrix_probe(
    model: ModelSpec,
    energy: float,
    length: int = 2000,
    time: float | None = None,
    incoming: int | None = None,
    width: float = 30.0,
    start: float = 300.0,
    step: float = 25.0,
) -> ProbeResult:
    """Scattering amplitudes from wave-packet propagation on the truncated fiber.

    A Gaussian packet in channel ``incoming`` centred at ``start`` moves
    toward the boundary row. After time ``time`` its spectral amplitudes at
    ``energy`` in every open channel are compared with the incoming one; the
    ratio times ``exp(i energy time)`` approximates the S-matrix column.

    Raises
    ------
    InvalidRunError
        If the energy is too close to a threshold or the outgoing packet would
        reach the truncation wall.
    """
    period = model.period
    lam = np.array([2.0 * np.cos((model.theta + 2.0 * np.pi * j) / period) for j in range(1, period + 1)])
    # independent numerical eigenvectors, phase-matched to the analytic ones
    vecs = np.exp(1j * np.outer(np.arange(1, period + 1), (model.theta + 2.0 * np.pi * np.arange(1, period + 1)) / period)) / np.sqrt(period)
    d = energy - lam
    open_ch = [int(j) for j in range(period) if abs(d[j]) < 2.0]
    if not open_ch or min(2.0 - abs(d[j]) for j in open_ch) < 0.2 or np.any(np.abs(np.abs(d) - 2.0) < 0.2):
        raise InvalidRunError(f"energy {energy} within 0.2 of a threshold or outside the bands")
    if incoming is None:
        incoming = open_ch[0] + 1
    jin = incoming - 1
    if jin not in open_ch:
        raise InvalidRunError(f"channel {incoming} is closed at energy {energy}")
    omegas = {j: float(np.arccos(d[j] / 2.0)) for j in open_ch}
    speeds = {j: 2.0 * np.sin(omegas[j]) for j in open_ch}
    if time is None:
        time = start / speeds[jin] + start / min(speeds.values())
    far = max(speeds[j] * (time - start / speeds[jin]) for j in open_ch)
    if time > 0.4 * length or far + 6.0 * width + 3.0 * np.sqrt(time) > length:
        raise InvalidRunError(f"packet would reach the wall: time={time:.1f}, front={far:.1f}, L={length}")
    n = np.arange(length + 1)
    env = np.exp(-0.5 * ((n - start) / width) ** 2) * np.exp(1j * n * omegas[jin])
    psi0 = np.kron(env, vecs[:, jin])
    tf = truncated_fiber(model, length)
    scale = 1.01 * (4.0 + float(np.max(np.abs(model.v))))
    psi = psi0.copy()
    elapsed = 0.0
    while elapsed < time - 1e-12:
        dt = min(step, time - elapsed)
        psi = chebyshev_propagate(tf.h, psi, dt, scale)
        elapsed += dt
    tail = np.linalg.norm(psi.reshape(-1, period)[-int(3 * width):])
    if tail > 1e-6:
        raise InvalidRunError(f"packet reached the truncation wall (tail norm {tail:.2e})")
    c_in = _channel_amplitude(psi0, period, vecs[:, jin], omegas[jin])
    blocks = {}
    for j in open_ch:
        c_out = _channel_amplitude(psi, period, vecs[:, j], omegas[j])
        blocks[(j + 1, incoming)] = complex(np.exp(1j * energy * time) * c_out / c_in)
    diag = {"norm_drift": float(abs(np.linalg.norm(psi) - np.linalg.norm(psi0))), "tail": float(tail), "length": length}
    return ProbeResult(float(energy), incoming, [j + 1 for j in open_ch], blocks, float(time), diag)
