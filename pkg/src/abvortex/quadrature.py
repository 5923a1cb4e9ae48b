"""Quadrature on the spectral line and Nystrom discretisation.

All chain integrals over the spectral variable ``tau`` are discretised on
one uniform grid per (energy, separation, fluxes).  The grid is a
midpoint/trapezoid rule on the whole line truncated where the Macdonald
kernels are negligible; for integrands analytic in a strip and decaying
exponentially this rule converges geometrically in the step.

Conventions
-----------
* ``weights`` are all equal to the step ``h``.
* The convolution operator is stored with the weights folded in,
  ``K[j, k] = h * K_{i(tau_k - tau_j)}(kappa rho)``; it is symmetric.
* The diagonal operators are stored as vectors.
* A contraction of two grid functions is ``h * p @ q``.
"""

import collections
import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

from .errors import (
    GridBudgetExceeded,
    IncompatibleGrid,
    InvalidParameter,
    NonConvergent,
)
from .geometry import polar
from .special import Energy, as_energy, bessel_k, bessel_k_table

DEFAULT_TOL = 1e-10
DEFAULT_CAP = 4096
TAIL_SCAN_MAX = 400.0
# fluxes this close to an integer act as the degenerate mode; the dropped
# part of the flux weight integrates to O(distance)
NEGLIGIBLE_FLUX = 1e-6
# total size of the cached n x n kernel matrices and factorisations
MATRIX_CACHE_BYTES = 3 << 29


class SizedCache:
    """Least-recently-used cache bounded by the total bytes of its values.

    The most recent entry is always kept, even when it alone exceeds the
    budget.
    """

    def __init__(self, max_bytes):
        self.max_bytes = max_bytes
        self._items = collections.OrderedDict()
        self._bytes = 0

    def get(self, key, build, nbytes):
        if key in self._items:
            self._items.move_to_end(key)
            return self._items[key][0]
        value = build()
        size = int(nbytes(value))
        self._items[key] = (value, size)
        self._bytes += size
        while self._bytes > self.max_bytes and len(self._items) > 1:
            _, (_, old) = self._items.popitem(last=False)
            self._bytes -= old
        return value

    def clear(self):
        self._items.clear()
        self._bytes = 0

    @property
    def nbytes(self):
        return self._bytes


_MATRICES = SizedCache(MATRIX_CACHE_BYTES)


def integrate_line(f, domain="real", tol=1e-12, limit=400):
    """Adaptive quadrature of a decaying complex integrand.

    Parameters
    ----------
    f : callable
        Scalar integrand of one real variable, complex valued.
    domain : {"real", "half"} or (float, float)
        Integrate over the real line, over [0, inf) or over a finite
        interval (split at 0 when it contains 0).
    tol : float
        Absolute and relative target.

    Returns
    -------
    value : complex
    err_est : float
    """
    if isinstance(domain, tuple):
        lo, hi = domain
        pieces = [(lo, 0.0), (0.0, hi)] if lo < 0.0 < hi else [(lo, hi)]
    elif domain == "real":
        pieces = [(-np.inf, 0.0), (0.0, np.inf)]
    elif domain == "half":
        pieces = [(0.0, np.inf)]
    else:
        raise InvalidParameter(f"unknown domain {domain!r}")
    total = 0j
    err = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", scipy.integrate.IntegrationWarning)
        for lo, hi in pieces:
            try:
                re, e1 = scipy.integrate.quad(lambda s: np.real(f(s)), lo, hi,
                                              epsabs=tol, epsrel=tol, limit=limit)
                im, e2 = scipy.integrate.quad(lambda s: np.imag(f(s)), lo, hi,
                                              epsabs=tol, epsrel=tol, limit=limit)
            except scipy.integrate.IntegrationWarning as exc:
                raise NonConvergent(str(exc)) from exc
            total += re + 1j * im
            err += e1 + e2
    return total, err


@dataclass(frozen=True)
class TauGrid:
    """Uniform grid on the spectral line.

    Nodes are ``tau_j = (j - (N-1)/2) h``; node ``(N-1)/2`` is exactly 0.
    The cells of width ``h`` centred on the nodes cover
    ``[-half_width, half_width]``.
    """

    energy: Energy
    rho: float
    h: float
    n: int
    tol: float
    sigmas: tuple = ()

    @property
    def half_width(self):
        return 0.5 * self.n * self.h

    @property
    def nodes(self):
        return (np.arange(self.n) - (self.n - 1) // 2) * self.h

    @property
    def weights(self):
        return np.full(self.n, self.h)

    @property
    def zero_index(self):
        return (self.n - 1) // 2

    def key(self):
        return (self.energy.z, self.rho, self.h, self.n)


def _tail_half_width(energy, rho, tol):
    """Smallest T with |K_{i tau}(kappa s)| < tol/100 for |tau| > T."""
    taus = np.arange(0.0, TAIL_SCAN_MAX, 0.25)
    args = energy.kappa * np.array([rho, 1.0, 1e-2 * min(rho, 1.0)])
    vals = np.abs(bessel_k_table(1j * taus, args)).max(axis=1)
    suffix = np.maximum.accumulate(vals[::-1])[::-1]
    ok = np.nonzero(suffix < 1e-2 * tol)[0]
    if ok.size == 0:
        raise GridBudgetExceeded("kernel tail does not decay within the scan")
    return float(taus[ok[0]])


def _negligible(sigma):
    return min(sigma, 1.0 - sigma) < NEGLIGIBLE_FLUX


def default_step(sigmas):
    """Step resolving the poles of 1/sin(pi(sigma + i tau)) at Im tau = sigma-1, sigma."""
    active = [s for s in sigmas if not _negligible(s)]
    d = min([min(s, 1.0 - s) for s in active], default=0.5)
    return 2 * np.pi / (34.0 / d + 15.0)


def build_tau_grid(z, rho, tol=DEFAULT_TOL, sigmas=(), cap=DEFAULT_CAP,
                   step=None, half_width=None):
    """Build the shared spectral grid for energy ``z`` and separation ``rho``.

    Parameters
    ----------
    z : complex or Energy
    rho : float
        Separation used for the tail scan; must be positive.
    tol : float
        Grid tolerance.  The half-width is the point beyond which the
        kernels stay below ``tol/100``.
    sigmas : tuple of float
        Fluxes whose diagonal operators will live on the grid; they set
        the step through the distance of the nearest pole.
    cap : int
        Maximum node count.
    step, half_width : float, optional
        Overrides, used for convergence studies.
    """
    energy = as_energy(z)
    if not rho > 0:
        raise InvalidParameter("separation must be positive")
    T = _tail_half_width(energy, rho, tol) if half_width is None else float(half_width)
    h = default_step(sigmas) if step is None else float(step)
    n = 2 * int(np.ceil(T / h)) + 1
    if n > cap:
        raise GridBudgetExceeded(f"grid needs {n} nodes > cap {cap}")
    return TauGrid(energy, float(rho), h, n, tol,
                   tuple(sorted(set(float(s) for s in sigmas))))


def build_tau_grid_cached(z, rho, tol=DEFAULT_TOL, sigmas=(), cap=DEFAULT_CAP):
    energy = as_energy(z)
    key = (energy.z, float(rho), float(tol),
           tuple(sorted(set(float(s) for s in sigmas))), int(cap))
    return _grid_cache(key)


@functools.lru_cache(maxsize=64)
def _grid_cache(key):
    z, rho, tol, sigmas, cap = key
    return build_tau_grid(z, rho, tol, sigmas, cap)


def flux_weight(sigma, tau, theta=0.0):
    """``sin(pi sigma) exp(theta tau) / (pi sin(pi (sigma + i tau)))``.

    Evaluated in a form that never overflows for |theta| <= pi.  Vanishes
    identically in the degenerate modes, i.e. for sigma within
    ``NEGLIGIBLE_FLUX`` of 0 or 1.
    """
    tau = np.asarray(tau, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(np.pi * sigma)
    if _negligible(sigma):
        return np.zeros(np.broadcast(tau, theta).shape, dtype=complex)
    e = np.exp(1j * np.pi * sigma)
    at = np.abs(tau)
    small = np.exp(-2 * np.pi * at)
    up = tau >= 0
    # tau >= 0: 2i e^{(theta-pi)tau} / (e^{i pi s} e^{-2 pi tau} - e^{-i pi s})
    # tau < 0: 2i e^{(theta+pi)tau} / (e^{i pi s} - e^{-i pi s} e^{-2 pi |tau|})
    den = np.where(up, e * small - np.conj(e), e - np.conj(e) * small)
    expo = np.where(up, (theta - np.pi) * at, -(theta + np.pi) * at)
    return (2j * s / np.pi) * np.exp(expo) / den


@dataclass
class DiscreteKernel:
    """Discretised convolution (``kind="K"``) or diagonal (``kind="D"``) operator."""

    kind: str
    grid: TauGrid
    params: dict
    data: np.ndarray = field(repr=False)

    @property
    def matrix(self):
        if self.kind == "D":
            return np.diag(self.data)
        return self.data


def _convolution_matrix(grid):
    return _MATRICES.get(("K", grid), lambda: _build_convolution_matrix(grid),
                         lambda m: m.nbytes)


def _build_convolution_matrix(grid):
    k = grid.energy.kappa
    col = bessel_k_table(1j * grid.h * np.arange(grid.n), [k * grid.rho])[:, 0]
    return grid.h * scipy.linalg.toeplitz(col, col)


def discretize(kind, params, grid):
    """Matrix of the convolution or diagonal operator on ``grid``.

    ``kind="K"`` takes ``params = {"z": ..., "rho": ...}`` and
    ``kind="D"`` takes ``params = {"sigma": ...}``.
    """
    if kind == "K":
        e = as_energy(params.get("z", grid.energy))
        rho = float(params.get("rho", grid.rho))
        if e.z != grid.energy.z or rho != grid.rho:
            raise IncompatibleGrid("grid built for another (z, rho)")
        return DiscreteKernel("K", grid, {"z": e.z, "rho": rho},
                              _convolution_matrix(grid))
    if kind == "D":
        sigma = float(params["sigma"])
        return DiscreteKernel("D", grid, {"sigma": sigma},
                              flux_weight(sigma, grid.nodes))
    raise InvalidParameter(f"unknown kernel kind {kind!r}")


@dataclass
class KernelVectors:
    f_vec: np.ndarray
    g_vec: np.ndarray


def k_columns(grid, r):
    """Columns ``K_{i tau_j}(kappa r_p)`` on the grid, shape (N, P).

    Only the half ``tau >= 0`` is evaluated; the order symmetry fills in
    the rest.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    j0 = grid.zero_index
    half = bessel_k_table(1j * grid.nodes[j0:], grid.energy.kappa * r)
    return np.concatenate([half[:0:-1], half], axis=0)


def f_vectors(grid, sigma, r, theta):
    """Columns ``K_{i tau}(kappa r) exp(theta tau) w_sigma(tau)`` for many points.

    Returns an (N, P) array for P points with radii ``r`` and angles
    ``theta`` about the vortex carrying flux ``sigma``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    kv = k_columns(grid, r)
    return kv * flux_weight(sigma, grid.nodes[:, None], theta[None, :])


def g_vector(grid, nu):
    """``K_{-i tau - nu}(kappa rho)`` on the grid nodes."""
    return bessel_k(grid.nodes * 1j + nu, grid.energy.kappa * grid.rho)


def kernel_vectors(u, nu, z, x, grid, cfg):
    """The vectors of a deficiency channel for a single point ``x``.

    Parameters
    ----------
    u : {"a", "b"}
    nu : float
        Order shift of the channel.
    x : PlanePoint
    grid : TauGrid
    cfg : VortexPair
    """
    e = as_energy(z)
    if e.z != grid.energy.z or cfg.rho != grid.rho:
        raise IncompatibleGrid("grid built for another (z, rho)")
    r, th = polar(x.x1, x.x2, x.side, u, cfg.rho)
    f = f_vectors(grid, cfg.flux(u), r, th)[:, 0]
    return KernelVectors(f, g_vector(grid, nu))


class ChainOperators:
    """Factorised ``I - K D_u K D_v`` on a grid.

    ``sigma_u`` is the flux of the vortex applied second (outermost) and
    ``sigma_v`` the one applied first, matching the resolvent
    ``(I - K D_u K D_v)^{-1}`` of the chain recursions.
    """

    def __init__(self, grid, sigma_u, sigma_v):
        self.grid = grid
        self.K = _convolution_matrix(grid)
        self.du = flux_weight(sigma_u, grid.nodes)
        self.dv = flux_weight(sigma_v, grid.nodes)
        A = np.eye(grid.n) - (self.K * self.du) @ (self.K * self.dv)
        self.lu = scipy.linalg.lu_factor(A, check_finite=False)

    def solve(self, rhs):
        return scipy.linalg.lu_solve(self.lu, rhs, check_finite=False)

    def step(self, v):
        """Apply ``K D_u K D_v`` once."""
        dv = self.dv if v.ndim == 1 else self.dv[:, None]
        du = self.du if v.ndim == 1 else self.du[:, None]
        return self.K @ (du * (self.K @ (dv * v)))


def chain_operators(grid, sigma_u, sigma_v):
    # the convolution matrix is shared and counted under its own key
    return _MATRICES.get(("ops", grid, sigma_u, sigma_v),
                         lambda: ChainOperators(grid, sigma_u, sigma_v),
                         lambda o: o.lu[0].nbytes)


def plane_nodes(centers, radius, n_r=96, n_theta=128, panels=8):
    """Nodes and weights for integrals over the disc ``|y| < radius``.

    The integrand is split by a partition of unity ``w_i = r_i^-4 / sum_k
    r_k^-4`` (``r_k`` the distance to centre ``k``), and each piece is
    integrated in polar coordinates about its own centre.  The radial
    variable is ``r = R u^3`` with composite Gauss-Legendre panels in ``u``,
    which removes integrable ``r^p`` singularities with ``p > -2``; the
    angle uses the trapezoid rule with half-shifted nodes.

    Returns
    -------
    y1, y2, weight : ndarray
        Flat arrays; ``sum(weight * f(y1, y2))`` approximates the integral.
    """
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    gl_x, gl_w = np.polynomial.legendre.leggauss(max(n_r // panels, 2))
    edges = np.linspace(0.0, 1.0, panels + 1)
    u = np.concatenate([0.5 * (b - a) * gl_x + 0.5 * (a + b)
                        for a, b in zip(edges[:-1], edges[1:])])
    wu = np.concatenate([0.5 * (b - a) * gl_w
                         for a, b in zip(edges[:-1], edges[1:])])
    r = radius * u ** 3
    wr = 3.0 * radius * u ** 2 * wu * r
    th = -np.pi + (np.arange(n_theta) + 0.5) * 2 * np.pi / n_theta
    wt = 2 * np.pi / n_theta
    parts = []
    for i, (c1, c2) in enumerate(centers):
        rr, tt = np.meshgrid(r, th, indexing="ij")
        y1 = (c1 + rr * np.cos(tt)).ravel()
        y2 = (c2 + rr * np.sin(tt)).ravel()
        weight = (wr[:, None] * wt * np.ones_like(tt)).ravel()
        inside = y1 ** 2 + y2 ** 2 < radius ** 2
        y1, y2, weight = y1[inside], y2[inside], weight[inside]
        d2 = np.stack([(y1 - a) ** 2 + (y2 - b) ** 2 for a, b in centers])
        inv = 1.0 / np.maximum(d2, 1e-300) ** 2
        parts.append((y1, y2, weight * inv[i] / inv.sum(axis=0)))
    return tuple(np.concatenate(c) for c in zip(*parts))


def plane_integral(f, centers, radius, n_r=96, n_theta=128, panels=8, chunk=4096):
    """Integral of ``f`` over the disc ``|y| < radius`` with point singularities.

    See :func:`plane_nodes` for the rule.

    Parameters
    ----------
    f : callable
        ``f(y1, y2) -> complex array`` evaluated on 1-D arrays.
    centers : sequence of (float, float)
        Locations of the singular points.
    radius : float
        Radius of the disc about the origin; the polar patch about each
        centre is truncated at the same radius.
    """
    y1, y2, weight = plane_nodes(centers, radius, n_r, n_theta, panels)
    total = 0j
    for s in range(0, y1.size, chunk):
        sl = slice(s, s + chunk)
        total += np.sum(weight[sl] * f(y1[sl], y2[sl]))
    return complex(total)


def bessel_product_integral(a, b, tol=1e-12):
    """``int K_{i tau}(a) K_{-i tau}(b) d tau`` over the real line.

    Equals ``pi K_0(a + b)`` for ``Re a, Re b > 0``.
    """
    def f(t):
        return bessel_k(1j * t, a) * bessel_k(-1j * t, b)

    return integrate_line(f, "real", tol)[0]


def bessel_convolution_integral(a, b, nu, tol=1e-12):
    """``int K_{i tau}(a) K_{i (nu - tau)}(b) d tau`` over the real line.

    Equals ``pi K_{i nu}(a + b)``.
    """
    def f(t):
        return bessel_k(1j * t, a) * bessel_k(1j * (nu - t), b)

    return integrate_line(f, "real", tol)[0]
