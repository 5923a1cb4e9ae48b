"""Green function and deficiency basis of a single flux vortex at the origin.

The Green function of the one-vortex Hamiltonian (flux ``alpha``, cut along
the negative real axis) is evaluated in the separated form

    G = zeta [ K_0(kappa |x - x0|) / 2 pi
               - (1/2 pi) int K_{i tau}(kappa r) K_{i tau}(kappa r0) w(tau) dtau ]

with ``w`` the flux weight at angle ``theta - theta0 - eta``.  The winding
``eta`` (0 or +-2 pi) and the prefactor ``zeta = exp(i alpha eta)`` come
from the segment/cut classification of the geometry module, never from
comparing angles with +-pi.

Two independent oracles are provided: the partial-wave sum over angular
momenta and the real-line integral of ``K_0(kappa R(s))``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.special

from .errors import AtVortex, CoincidentPoints, InvalidParameter, TailNotNegligible
from .geometry import AT_VORTEX_EPS, point, polar_a, winding_etas
from .quadrature import (
    DEFAULT_CAP,
    DEFAULT_TOL,
    build_tau_grid_cached,
    flux_weight,
    integrate_line,
    k_columns,
    plane_integral,
)
from .special import as_energy, bessel_k

CHUNK = 1024
# only vectors of grid length are formed here, so the node budget can exceed
# the matrix cap used by the two-vortex chains
VECTOR_CAP = 8 * DEFAULT_CAP


@dataclass(frozen=True)
class AngularBranch:
    """Which of the three angular branches a point pair falls into.

    ``tag`` is ``"central"``, ``"upper"`` (angle difference in (pi, 2 pi))
    or ``"lower"`` (in (-2 pi, -pi)).
    """

    tag: str
    winding: int
    prefactor: complex


def _check_alpha(alpha):
    if not 0.0 <= alpha < 1.0:
        raise InvalidParameter(f"alpha={alpha} outside [0, 1)")


def angular_branch(alpha, x, x0):
    """Branch of the pair (x, x0); ``x0`` is the source point."""
    x, x0 = point(x), point(x0)
    k, _ = winding_etas(x.x1, x.x2, x.side, x0.x1, x0.x2, x0.side,
                        np.inf, strict=False)
    k = int(k)
    tag = {0: "central", 1: "upper", -1: "lower"}[k]
    return AngularBranch(tag, k, np.exp(2j * np.pi * alpha * k))


def _points(x):
    """Split a point or a sequence of points into coordinate arrays."""
    if hasattr(x, "x1"):
        return (np.array([x.x1]), np.array([x.x2]), np.array([x.side]), True)
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr[:1], arr[1:2], np.zeros(1, dtype=int), True
    return arr[:, 0], arr[:, 1], np.zeros(arr.shape[0], dtype=int), False


def green_one_arrays(z, alpha, x1, x2, side, y1, y2, yside, tol=DEFAULT_TOL):
    """Vectorised one-vortex Green function for point pairs.

    All coordinate arrays broadcast to a common 1-D shape; ``y`` is the
    source point.  Pairs that coincide or touch the vortex raise.
    """
    _check_alpha(alpha)
    energy = as_energy(z)
    x1, x2, side, y1, y2, yside = (np.ravel(a) for a in np.broadcast_arrays(
        np.asarray(x1, float), np.asarray(x2, float), np.asarray(side),
        np.asarray(y1, float), np.asarray(y2, float), np.asarray(yside)))
    r, th = polar_a(x1, x2, side)
    r0, th0 = polar_a(y1, y2, yside)
    if np.any(r < AT_VORTEX_EPS) or np.any(r0 < AT_VORTEX_EPS):
        raise AtVortex("point at the vortex")
    dist = np.hypot(x1 - y1, x2 - y2)
    if np.any(dist == 0):
        raise CoincidentPoints("x and x0 coincide")
    k, _ = winding_etas(x1, x2, side, y1, y2, yside, np.inf, strict=False)
    eta = 2 * np.pi * k
    free = bessel_k(0.0, energy.kappa * dist) / (2 * np.pi)
    out = free.astype(complex)
    if np.sin(np.pi * alpha) != 0.0:
        grid = build_tau_grid_cached(energy.z, 1.0, tol, (alpha,), VECTOR_CAP)
        tau = grid.nodes[:, None]
        chunk = max(16, CHUNK * DEFAULT_CAP // grid.n)
        for s in range(0, r.size, chunk):
            sl = slice(s, s + chunk)
            kr = k_columns(grid, r[sl])
            kr0 = k_columns(grid, r0[sl])
            w = flux_weight(alpha, tau, (th[sl] - th0[sl] - eta[sl])[None, :])
            out[sl] -= grid.h * np.sum(kr * kr0 * w, axis=0) / (2 * np.pi)
    return np.exp(1j * alpha * eta) * out


def green_one(z, alpha, x, x0, tol=DEFAULT_TOL):
    """One-vortex Green function ``G_z(x, x0)``.

    Parameters
    ----------
    z : complex or Energy
        Spectral parameter off ``[0, inf)``.
    alpha : float
        Flux in [0, 1); 0 gives the free Green function.
    x, x0 : PlanePoint or array_like
        Observation and source point.  Either may be an (P, 2) array of
        points, in which case an array is returned.
    tol : float
        Spectral-grid tolerance.

    Returns
    -------
    complex or ndarray
    """
    a1, a2, aside, scalar_x = _points(x)
    b1, b2, bside, scalar_y = _points(x0)
    val = green_one_arrays(z, alpha, a1, a2, aside, b1, b2, bside, tol)
    return complex(val[0]) if scalar_x and scalar_y else val


def green_one_branch(z, alpha, r, theta, r0, theta0, winding, tol=DEFAULT_TOL):
    """Separated form on an explicitly chosen branch.

    Evaluates ``exp(2 pi i alpha k) [K_0 term - integral at angle
    theta - theta0 - 2 pi k]`` for the given integer ``k``, without any
    geometric classification.  Used to compare the one-sided limits of
    adjacent branches.
    """
    energy = as_energy(z)
    dth = theta - theta0
    dist = np.sqrt(r * r + r0 * r0 - 2 * r * r0 * np.cos(dth))
    val = bessel_k(0.0, energy.kappa * dist) / (2 * np.pi)
    if np.sin(np.pi * alpha) != 0.0:
        grid = build_tau_grid_cached(energy.z, 1.0, tol, (alpha,), VECTOR_CAP)
        kr = k_columns(grid, [r, r0])
        w = flux_weight(alpha, grid.nodes, dth - 2 * np.pi * winding)
        val -= grid.h * np.sum(kr[:, 0] * kr[:, 1] * w) / (2 * np.pi)
    return complex(np.exp(2j * np.pi * alpha * winding) * val)


@dataclass(frozen=True)
class PartialWaveResult:
    value: complex
    tail_bound: float
    terms: int


def green_one_oracle(z, alpha, x, x0, n_max=200, stop=1e-14):
    """Partial-wave sum for the one-vortex Green function.

    ``(1/2 pi) sum_n exp(i (n+alpha)(theta-theta0)) I_|n+alpha|(kappa r<)
    K_|n+alpha|(kappa r>)`` with both angles in (-pi, pi).  Summation
    stops once three consecutive pairs of terms fall below ``stop`` times
    the running sum, or at ``|n| = n_max``.  Uses scipy's Bessel routines
    so that it shares no code with the separated form.

    Returns
    -------
    PartialWaveResult
        The value, a tail bound from the geometric ratio ``r< / r>`` and
        the index reached.
    """
    _check_alpha(alpha)
    if n_max < 1:
        raise InvalidParameter("n_max must be >= 1")
    energy = as_energy(z)
    x, x0 = point(x), point(x0)
    r, th = (float(v) for v in polar_a(x.x1, x.x2, x.side))
    r0, th0 = (float(v) for v in polar_a(x0.x1, x0.x2, x0.side))
    if min(r, r0) < AT_VORTEX_EPS:
        raise AtVortex("point at the vortex")
    if r == r0 and np.cos(th - th0) == 1.0:
        raise CoincidentPoints("x and x0 coincide")
    k = energy.kappa
    lo, hi = min(r, r0), max(r, r0)
    dth = th - th0

    def term(n):
        nu = abs(n + alpha)
        prod = (scipy.special.ive(nu, k * lo) * scipy.special.kve(nu, k * hi)
                * np.exp(abs((k * lo).real) - k * hi))
        return np.exp(1j * (n + alpha) * dth) * prod

    total = term(0)
    quiet = 0
    last = 0.0
    n = 0
    for n in range(1, n_max + 1):
        pair = term(n) + term(-n)
        if not np.isfinite(pair):
            # scaled Bessel factors under/overflow; the tail bound reports it
            last = np.inf
            break
        total += pair
        last = abs(term(n)) + abs(term(-n))
        quiet = quiet + 1 if last <= stop * abs(total) else 0
        if quiet >= 3:
            break
    q = lo / hi
    tail = last * q / (1.0 - q) if q < 1 else np.inf
    return PartialWaveResult(complex(total / (2 * np.pi)), float(tail / (2 * np.pi)), n)


def green_one_rs_oracle(z, alpha, x, x0, tol=1e-12):
    """Green function from the real-line integral of ``K_0(kappa R(s))``.

    ``R(s)^2 = r^2 + r0^2 + 2 r r0 cosh s``; the angle difference enters the
    weight unshifted and only the free term carries the branch prefactor.
    The integral is done adaptively with scipy's ``kv``.
    """
    _check_alpha(alpha)
    energy = as_energy(z)
    x, x0 = point(x), point(x0)
    r, th = (float(v) for v in polar_a(x.x1, x.x2, x.side))
    r0, th0 = (float(v) for v in polar_a(x0.x1, x0.x2, x0.side))
    if min(r, r0) < AT_VORTEX_EPS:
        raise AtVortex("point at the vortex")
    dist = np.hypot(x.x1 - x0.x1, x.x2 - x0.x2)
    if dist == 0:
        raise CoincidentPoints("x and x0 coincide")
    branch = angular_branch(alpha, x, x0)
    k = energy.kappa
    dth = th - th0
    if branch.winding == 0:
        # collinear pairs through the vortex count as central; keep dth on that branch
        dth = float(np.clip(dth, -np.pi, np.pi))
    free = branch.prefactor * scipy.special.kv(0, k * dist) / (2 * np.pi)
    if np.sin(np.pi * alpha) == 0.0:
        return complex(free)

    c = np.exp(1j * dth)

    def numerator(s):
        big_r = np.sqrt(r * r + r0 * r0 + 2 * r * r0 * np.cosh(s))
        return scipy.special.kv(0, k * big_r) * np.exp(-alpha * s + 1j * alpha * dth)

    # the denominator nearly vanishes at s = 0 when dth -> +-pi; subtract
    # the value there and integrate 1/(1 + c e^{-s}) = d/ds [s + log(1 + c e^{-s})]
    g0 = numerator(0.0)

    def integrand(s):
        return (numerator(s) - g0) / (1.0 + c * np.exp(-s))

    # K_0(kappa R(s)) < exp(-60) beyond s_max
    s_max = np.arccosh(max(1.0, (60.0 / k.real) ** 2 / (2 * r * r0)))
    val, _ = integrate_line(integrand, (-s_max, s_max), tol=tol, limit=1000)
    val += g0 * (2 * s_max + np.log(1 + c * np.exp(-s_max)) - np.log(1 + c * np.exp(s_max)))
    return complex(free - np.sin(np.pi * alpha) / np.pi * val / (2 * np.pi))


def deficiency_one(which, z, alpha, x):
    """One-vortex deficiency function.

    ``which=-1``: ``K_{1-alpha}(kappa r) exp(i (alpha-1) theta)``;
    ``which=0``: ``K_alpha(kappa r) exp(i alpha theta)``.  ``x`` may be a
    point or an (P, 2) array.
    """
    if which not in (-1, 0):
        raise InvalidParameter("which must be -1 or 0")
    energy = as_energy(z)
    x1, x2, side, scalar = _points(x)
    r, th = polar_a(x1, x2, side)
    if np.any(r < AT_VORTEX_EPS):
        raise AtVortex("deficiency function is singular at the vortex")
    nu = alpha + which
    val = bessel_k(abs(nu), energy.kappa * r) * np.exp(1j * nu * th)
    return complex(val[0]) if scalar else val


def resolvent_map_check(which, z, w, alpha, x, radius=25.0, tol=1e-4,
                        n_r=64, n_theta=64):
    """Residual of the resolvent map between deficiency spaces.

    Evaluates ``(z - w) int_{|y|<R} G_z(x, y) psi_w(y) dy + psi_w(x)
    - (kappa_z/kappa_w)^|nu| psi_z(x)`` by a two-centre polar quadrature.

    Raises
    ------
    TailNotNegligible
        If the estimate of the integral beyond ``R`` exceeds ``tol``.
    """
    ez, ew = as_energy(z), as_energy(w)
    x = point(x)
    nu = abs(alpha + which)
    target = (ez.kappa / ew.kappa) ** nu * deficiency_one(which, ez, alpha, x)
    psi_w_x = deficiency_one(which, ew, alpha, x)
    if ez.z == ew.z:
        return float(abs(psi_w_x - target))
    decay = ez.kappa.real + ew.kappa.real
    tail = (abs(ez.z - ew.z) * 2 * np.pi * radius
            * abs(bessel_k(nu, ew.kappa * radius))
            * abs(bessel_k(0.0, ez.kappa * max(radius - np.hypot(x.x1, x.x2), 1.0)))
            / decay)
    if tail > tol:
        raise TailNotNegligible(f"tail estimate {tail:.3g} exceeds {tol:g}")

    def integrand(y1, y2):
        g = green_one_arrays(ez, alpha, x.x1, x.x2, x.side, y1, y2, 0)
        return g * deficiency_one(which, ew, alpha, np.column_stack([y1, y2]))

    integral = plane_integral(integrand, [(0.0, 0.0), (x.x1, x.x2)], radius,
                              n_r=n_r, n_theta=n_theta)
    return float(abs((ez.z - ew.z) * integral + psi_w_x - target))
