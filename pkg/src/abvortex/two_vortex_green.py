"""Green function of the two-vortex Hamiltonian.

The Green function is the free term with both winding prefactors, one
single-vortex correction per vortex, and a sum over alternating chains
``gamma = (c_n, ..., c_1)`` of length ``n >= 2``.  On the shared spectral
grid a chain is the contraction

    (-1)^n / 2pi * h f_{c_n}(x)^T K D_{c_{n-1}} K ... D_{c_2} K f~_{c_1}(x0)

where ``f_c(x)[tau] = K_{i tau}(kappa r_c) w_c(tau, theta_c)`` and ``f~``
is the same with the source angle negated.  The chains starting at ``c``
sum to a Neumann series that is resummed with one factorised solve per
(energy, configuration).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import AtVortex, CoincidentPoints, InvalidParameter
from .geometry import AT_VORTEX_EPS, VortexPair, point, polar_a, polar_b, winding_etas
from .quadrature import (
    DEFAULT_TOL,
    _convolution_matrix,
    build_tau_grid_cached,
    chain_operators,
    flux_weight,
    k_columns,
)
from .special import as_energy, bessel_k

CHUNK = 512


@dataclass(frozen=True)
class TruncationPolicy:
    """How the chain series is truncated.

    ``mode="resummed"`` solves the Neumann series exactly on the grid;
    ``"fixed"`` sums chains up to length ``n_max``; ``"adaptive"`` stops
    once the geometric tail bound with ratio ``exp(-Re kappa rho)`` is below
    ``tail_tol`` times the magnitude of the result.
    """

    mode: str = "resummed"
    n_max: int = 40
    tail_tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("resummed", "fixed", "adaptive"):
            raise InvalidParameter(f"unknown truncation mode {self.mode!r}")
        if self.n_max < 2:
            raise InvalidParameter("n_max must be >= 2")


RESUMMED = TruncationPolicy()


@dataclass(frozen=True)
class ChainSpec:
    """Alternating vortex sequence ``(c_n, ..., c_1)`` of length >= 2."""

    letters: tuple

    def __post_init__(self):
        if len(self.letters) < 2:
            raise InvalidParameter("a chain has length >= 2")
        for c in self.letters:
            if c not in ("a", "b"):
                raise InvalidParameter(f"unknown vortex {c!r}")
        for c, d in zip(self.letters, self.letters[1:]):
            if c == d:
                raise InvalidParameter("chain letters must alternate")

    @classmethod
    def starting(cls, first, n):
        """The chain of length ``n`` whose first (source-side) letter is ``first``."""
        other = "b" if first == "a" else "a"
        seq = [first if j % 2 == 0 else other for j in range(n)]
        return cls(tuple(reversed(seq)))

    @property
    def n(self):
        return len(self.letters)

    def sigmas(self, cfg):
        return tuple(cfg.flux(c) for c in self.letters)


@dataclass(frozen=True)
class GreenValue:
    value: np.ndarray
    tail_bound: float
    chains_used: int


def _other(c):
    return "b" if c == "a" else "a"


class TwoVortexKernel:
    """Per-(energy, configuration) data for evaluating the Green function.

    Holds the spectral grid and flux weights.  The convolution matrix and
    the factorised resolvents for both starting vortices are fetched on use
    from a cache bounded in bytes, so they may be rebuilt after eviction.
    Instances are read-only after construction and may be shared between
    evaluations.
    """

    def __init__(self, z, cfg, tol=DEFAULT_TOL):
        self.energy = as_energy(z)
        self.cfg = cfg
        self.grid = build_tau_grid_cached(self.energy.z, cfg.rho, tol,
                                          (cfg.alpha, cfg.beta))
        self.d = {"a": flux_weight(cfg.alpha, self.grid.nodes),
                  "b": flux_weight(cfg.beta, self.grid.nodes)}

    @property
    def K(self):
        """Convolution matrix, fetched from the size-bounded matrix cache."""
        return _convolution_matrix(self.grid)

    def ops(self, c):
        """Factorised ``I - K D_c K D_cbar`` for chains starting at ``c``."""
        return chain_operators(self.grid, self.cfg.flux(c),
                               self.cfg.flux(_other(c)))

    @property
    def ratio(self):
        """Per-step contraction bound ``exp(-Re kappa rho)``."""
        return float(np.exp(-self.energy.kappa.real * self.cfg.rho))

    def polar(self, x1, x2, side):
        ra, ta = polar_a(x1, x2, side)
        rb, tb = polar_b(x1, x2, side, self.cfg.rho)
        return ra, ta, rb, tb

    def columns(self, r):
        return k_columns(self.grid, r)

    def weighted(self, c, kcols, theta):
        return kcols * flux_weight(self.cfg.flux(c), self.grid.nodes[:, None],
                                   np.atleast_1d(theta)[None, :])


_KERNELS = {}


def two_vortex_kernel(z, cfg, tol=DEFAULT_TOL):
    """Cached :class:`TwoVortexKernel`."""
    e = as_energy(z)
    key = (e.z, cfg.alpha, cfg.beta, cfg.rho, tol)
    if key not in _KERNELS:
        if len(_KERNELS) > 16:
            _KERNELS.clear()
        _KERNELS[key] = TwoVortexKernel(e, cfg, tol)
    return _KERNELS[key]


def _as_arrays(x):
    if hasattr(x, "x1"):
        return np.array([x.x1]), np.array([x.x2]), np.array([x.side]), True
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[:1], arr[1:2], np.zeros(1, dtype=int), True
    return arr[:, 0], arr[:, 1], np.zeros(arr.shape[0], dtype=int), False


def _chain_series(kern, c, left_c, left_cbar, right, pol):
    """Chains starting at ``c``; ``right = K f~_c`` (N, P).

    ``left_c`` and ``left_cbar`` are the observation vectors for the two
    possible final letters.  Returns the summed value (without the 1/2pi
    and h factors), the last chain magnitude and the count used.
    """
    h = kern.grid.h
    d_c, d_cbar = kern.d[c], kern.d[_other(c)]
    v = right
    total = np.zeros(right.shape[1], dtype=complex)
    last = np.zeros(right.shape[1])
    n_used = 1
    scale = None
    for n in range(2, pol.n_max + 1):
        left = left_cbar if n % 2 == 0 else left_c
        term = (-1) ** n * h * np.sum(left * v, axis=0)
        total += term
        last = np.abs(term)
        n_used = n
        if pol.mode == "adaptive" and n >= 3:
            q = kern.ratio
            scale = np.abs(total) if scale is None else np.maximum(scale, np.abs(total))
            if np.all(last * q / (1 - q) <= pol.tail_tol * np.maximum(scale, 1e-300)):
                break
        d_next = d_cbar if n % 2 == 0 else d_c
        v = kern.K @ (d_next[:, None] * v)
    return total, last, n_used


def _resummed_pairs(kern, c, left_c, left_cbar, right):
    ops = kern.ops(c)
    y = ops.solve(right)
    d_cbar = kern.d[_other(c)]
    corr = kern.K @ (d_cbar[:, None] * y)
    return kern.grid.h * (np.sum(left_cbar * y, axis=0) - np.sum(left_c * corr, axis=0))


def green_two_arrays(z, cfg, x1, x2, side, y1, y2, yside, pol=RESUMMED,
                     tol=DEFAULT_TOL, report=False):
    """Vectorised two-vortex Green function over broadcast point pairs.

    ``y`` is the source point.  When all sources coincide (or all
    observation points do) the resolvent solve is done once.
    """
    kern = two_vortex_kernel(z, cfg, tol)
    x1, x2, side, y1, y2, yside = (np.ravel(a) for a in np.broadcast_arrays(
        np.asarray(x1, float), np.asarray(x2, float), np.asarray(side),
        np.asarray(y1, float), np.asarray(y2, float), np.asarray(yside)))
    ra, ta, rb, tb = kern.polar(x1, x2, side)
    r0a, t0a, r0b, t0b = kern.polar(y1, y2, yside)
    if min(ra.min(), rb.min(), r0a.min(), r0b.min()) < AT_VORTEX_EPS:
        raise AtVortex("point at a vortex")
    dist = np.hypot(x1 - y1, x2 - y2)
    if np.any(dist == 0):
        raise CoincidentPoints("x and x0 coincide")
    ka, kb = winding_etas(x1, x2, side, y1, y2, yside, cfg.rho)
    if np.any((ka != 0) & (kb != 0)):
        raise AssertionError("segment crosses both cuts")
    eta_a, eta_b = 2 * np.pi * ka, 2 * np.pi * kb
    zeta_a = np.exp(1j * cfg.alpha * eta_a)
    zeta_b = np.exp(1j * cfg.beta * eta_b)
    out = zeta_a * zeta_b * bessel_k(0.0, kern.energy.kappa * dist) / (2 * np.pi)
    h = kern.grid.h
    tau = kern.grid.nodes[:, None]
    tails = np.zeros(out.size)
    used = 0
    same_x = np.all(x1 == x1[0]) and np.all(x2 == x2[0]) and np.all(side == side[0])
    same_y = np.all(y1 == y1[0]) and np.all(y2 == y2[0]) and np.all(yside == yside[0])
    chain = pol.mode == "resummed" and (same_x or same_y) and out.size > 1
    if chain:
        out += _resummed_broadcast(kern, ra, ta, rb, tb, r0a, t0a, r0b, t0b,
                                   same_x) / (2 * np.pi)
    for s in range(0, out.size, CHUNK):
        sl = slice(s, s + CHUNK)
        kxa, kxb = kern.columns(ra[sl]), kern.columns(rb[sl])
        kya, kyb = kern.columns(r0a[sl]), kern.columns(r0b[sl])
        single = (zeta_a[sl] * np.sum(kxa * kya * flux_weight(
            cfg.alpha, tau, (ta[sl] - t0a[sl] - eta_a[sl])[None, :]), axis=0)
            + zeta_b[sl] * np.sum(kxb * kyb * flux_weight(
                cfg.beta, tau, (tb[sl] - t0b[sl] - eta_b[sl])[None, :]), axis=0))
        out[sl] -= h * single / (2 * np.pi)
        if chain:
            continue
        left = {"a": kern.weighted("a", kxa, ta[sl]),
                "b": kern.weighted("b", kxb, tb[sl])}
        right = {"a": kern.K @ kern.weighted("a", kya, -t0a[sl]),
                 "b": kern.K @ kern.weighted("b", kyb, -t0b[sl])}
        for c in ("a", "b"):
            cb = _other(c)
            if pol.mode == "resummed":
                val = _resummed_pairs(kern, c, left[c], left[cb], right[c])
            else:
                val, last, n_used = _chain_series(kern, c, left[c], left[cb],
                                                  right[c], pol)
                q = kern.ratio
                tails[sl] += last * q / (1 - q) / (2 * np.pi)
                used = max(used, n_used)
            out[sl] += val / (2 * np.pi)
    if report:
        bound = float(tails.max()) if pol.mode != "resummed" else 0.0
        return GreenValue(out, bound, used)
    return out


def _resummed_broadcast(kern, ra, ta, rb, tb, r0a, t0a, r0b, t0b, same_x):
    """Chain sum when one end of every pair is the same point."""
    h = kern.grid.h
    total = np.zeros(ra.size, dtype=complex)
    if same_x:
        # row vectors l_c = (f_cbar - D_cbar K f_c)^T (I - K D_c K D_cbar)^-1 K
        kxa, kxb = kern.columns(ra[:1]), kern.columns(rb[:1])
        fx = {"a": kern.weighted("a", kxa, ta[:1])[:, 0],
              "b": kern.weighted("b", kxb, tb[:1])[:, 0]}
        rows = {}
        for c in ("a", "b"):
            cb = _other(c)
            ops = kern.ops(c)
            lhs = fx[cb] - kern.d[cb] * (kern.K @ fx[c])
            # solve A^T u = lhs with A = I - K D_c K D_cbar
            u = _solve_transposed(ops, lhs)
            rows[c] = kern.K @ u
        for s in range(0, ra.size, CHUNK):
            sl = slice(s, s + CHUNK)
            fya = kern.weighted("a", kern.columns(r0a[sl]), -t0a[sl])
            fyb = kern.weighted("b", kern.columns(r0b[sl]), -t0b[sl])
            total[sl] = h * (rows["a"] @ fya + rows["b"] @ fyb)
        return total
    kya, kyb = kern.columns(r0a[:1]), kern.columns(r0b[:1])
    right = {"a": kern.K @ kern.weighted("a", kya, -t0a[:1])[:, 0],
             "b": kern.K @ kern.weighted("b", kyb, -t0b[:1])[:, 0]}
    y, corr = {}, {}
    for c in ("a", "b"):
        y[c] = kern.ops(c).solve(right[c])
        corr[c] = kern.K @ (kern.d[_other(c)] * y[c])
    for s in range(0, ra.size, CHUNK):
        sl = slice(s, s + CHUNK)
        fxa = kern.weighted("a", kern.columns(ra[sl]), ta[sl])
        fxb = kern.weighted("b", kern.columns(rb[sl]), tb[sl])
        total[sl] = h * (y["a"] @ fxb - corr["a"] @ fxa
                         + y["b"] @ fxa - corr["b"] @ fxb)
    return total


def _solve_transposed(ops, rhs):
    return scipy.linalg.lu_solve(ops.lu, rhs, trans=1, check_finite=False)


def green_two(z, cfg, x, x0, pol=RESUMMED, tol=DEFAULT_TOL):
    """Two-vortex Green function ``G_z(x, x0)``.

    Parameters
    ----------
    z : complex or Energy
    cfg : VortexPair
    x, x0 : PlanePoint or array_like
        Observation and source points; either may be an (P, 2) array.
    pol : TruncationPolicy
    tol : float
        Spectral-grid tolerance.

    Returns
    -------
    complex or ndarray
    """
    a1, a2, aside, sx = _as_arrays(x)
    b1, b2, bside, sy = _as_arrays(x0)
    val = green_two_arrays(z, cfg, a1, a2, aside, b1, b2, bside, pol, tol)
    return complex(val[0]) if sx and sy else val


def green_two_report(z, cfg, x, x0, pol, tol=DEFAULT_TOL):
    """Like :func:`green_two` but returns a :class:`GreenValue` with the tail bound."""
    a1, a2, aside, _ = _as_arrays(x)
    b1, b2, bside, _ = _as_arrays(x0)
    return green_two_arrays(z, cfg, a1, a2, aside, b1, b2, bside, pol, tol,
                            report=True)


def chain_term(z, cfg, spec, x, x0, tol=DEFAULT_TOL):
    """A single chain contribution of the Green function.

    Evaluated as ``n - 1`` convolution applications between the two end
    vectors; the polar data of ``x`` is taken about ``c_n`` and that of
    ``x0`` about ``c_1``.
    """
    kern = two_vortex_kernel(z, cfg, tol)
    x, x0 = point(x), point(x0)
    ra, ta, rb, tb = kern.polar(x.x1, x.x2, x.side)
    r0a, t0a, r0b, t0b = kern.polar(x0.x1, x0.x2, x0.side)
    if min(ra, rb, r0a, r0b) < AT_VORTEX_EPS:
        raise AtVortex("point at a vortex")
    first, last = spec.letters[-1], spec.letters[0]
    r0, t0 = (r0a, t0a) if first == "a" else (r0b, t0b)
    r, t = (ra, ta) if last == "a" else (rb, tb)
    v = kern.weighted(first, kern.columns(r0), -t0)[:, 0]
    for c in reversed(spec.letters[1:-1]):
        v = kern.d[c] * (kern.K @ v)
    v = kern.K @ v
    f = kern.weighted(last, kern.columns(r), t)[:, 0]
    return complex((-1) ** spec.n * kern.grid.h * np.dot(f, v) / (2 * np.pi))


def l_coefficient(nu, z, cfg, x0, pol=RESUMMED, tol=DEFAULT_TOL):
    """Coefficient function of the near-``a`` expansion of the Green function.

    ``L_nu(x0) = K_nu(kappa r0a) exp(-i nu theta0a) + h (f~_a^T K D_b -
    f~_b^T) Y_nu`` with ``Y_nu = (I - K D_a K D_b)^-1 g_nu`` and ``f~`` the
    source vectors (angle negated).  ``nu`` is ``alpha - 1`` or ``alpha``.
    """
    kern = two_vortex_kernel(z, cfg, tol)
    x0 = point(x0)
    r0a, t0a, r0b, t0b = kern.polar(x0.x1, x0.x2, x0.side)
    if min(r0a, r0b) < AT_VORTEX_EPS:
        raise AtVortex("point at a vortex")
    grid = kern.grid
    g = bessel_k(grid.nodes * 1j + nu, kern.energy.kappa * cfg.rho)
    fa = kern.weighted("a", kern.columns(r0a), -t0a)[:, 0]
    fb = kern.weighted("b", kern.columns(r0b), -t0b)[:, 0]
    lead = bessel_k(abs(nu), kern.energy.kappa * float(r0a)) * np.exp(-1j * nu * float(t0a))
    if pol.mode == "resummed":
        y = kern.ops("a").solve(g)
        corr = grid.h * (np.dot(fa, kern.K @ (kern.d["b"] * y)) - np.dot(fb, y))
        return complex(lead + corr)
    total = 0j
    w = g
    for n in range(1, pol.n_max + 1):
        if n % 2 == 1:
            total -= grid.h * np.dot(fb, w)
        else:
            kdw = kern.K @ (kern.d["b"] * w)
            total += grid.h * np.dot(fa, kdw)
            w = kern.K @ (kern.d["a"] * kdw)
    return complex(lead + total)


__all__ = [
    "ChainSpec",
    "GreenValue",
    "RESUMMED",
    "TruncationPolicy",
    "TwoVortexKernel",
    "VortexPair",
    "chain_term",
    "green_two",
    "green_two_arrays",
    "green_two_report",
    "l_coefficient",
    "two_vortex_kernel",
]
