"""Deficiency basis of the two-vortex Hamiltonian and its asymptotic matrices.

For a channel ``(u, nu)`` with ``u`` in {a, b}, ``v`` the other vortex and
``nu`` in {sigma_u - 1, sigma_u}, the basis function is

    psi(x) = K_nu(kappa r_u) e^{i nu theta_u}
             + h (f_u(x)^T K D_v - f_v(x)^T) Y_nu,
    Y_nu = (I - K D_u K D_v)^{-1} g_nu,

on the shared spectral grid, with ``g_nu[tau] = K_{i tau + nu}(kappa rho)``.
Expanding the inverse gives the chain series ``S_0 + S_1 + ...``.

At the complementary vortex ``h f_v(x)`` tends to the unit vector at
``tau = 0`` (the kernel becomes ``pi delta(tau)`` and the flux weight is
``1/pi`` there); this limit is used when ``x`` sits exactly on ``v``.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AtVortex, FitIllConditioned, InvalidParameter
from .geometry import AT_VORTEX_EPS, circle_points
from .quadrature import DEFAULT_TOL, g_vector
from .special import as_energy, bessel_i, bessel_k, gamma
from .two_vortex_green import RESUMMED, _as_arrays, _other, two_vortex_kernel

LOWER, UPPER = -1, 0


@dataclass(frozen=True)
class ChannelIndex:
    """Deficiency channel: vortex ``u`` and order shift ``which``.

    ``which=-1`` selects ``nu = sigma_u - 1`` and ``which=0`` selects
    ``nu = sigma_u``.  The flat index runs 1..4 over (a,-1), (a,0), (b,-1),
    (b,0).
    """

    u: str
    which: int

    def __post_init__(self):
        if self.u not in ("a", "b") or self.which not in (LOWER, UPPER):
            raise InvalidParameter(f"invalid channel ({self.u!r}, {self.which!r})")

    def nu(self, cfg):
        return cfg.flux(self.u) + self.which

    @property
    def flat(self):
        return (0 if self.u == "a" else 2) + (self.which + 1) + 1

    @classmethod
    def from_flat(cls, j):
        if j not in (1, 2, 3, 4):
            raise InvalidParameter("flat channel index must be 1..4")
        return cls("a" if j <= 2 else "b", (j - 1) % 2 - 1)


CHANNELS = tuple(ChannelIndex.from_flat(j) for j in (1, 2, 3, 4))


@dataclass(frozen=True)
class SeriesMethod:
    """Truncated chain series ``S_0 + ... + S_{n_max}``."""

    n_max: int = 12


RESUMMED_METHOD = "resummed"


class DeficiencyBasis:
    """The four basis functions for one (energy, configuration).

    Shares the grid, convolution matrix and factorisations with the Green
    function kernel of the same parameters.
    """

    def __init__(self, z, cfg, tol=DEFAULT_TOL):
        self.kern = two_vortex_kernel(z, cfg, tol)
        self.energy = self.kern.energy
        self.cfg = cfg
        self.grid = self.kern.grid
        self._y = {}

    def y_vector(self, u, nu):
        key = (u, nu)
        if key not in self._y:
            g = g_vector(self.grid, nu)
            self._y[key] = self.kern.ops(u).solve(g)
        return self._y[key]

    def _polar(self, x1, x2, side, u):
        ra, ta, rb, tb = self.kern.polar(x1, x2, side)
        if u == "a":
            return ra, ta, rb, tb
        return rb, tb, ra, ta

    def _leading(self, nu, r, t):
        return bessel_k(abs(nu), self.energy.kappa * r) * np.exp(1j * nu * t)

    def evaluate(self, ch, x1, x2, side):
        """Resummed values on coordinate arrays."""
        nu = ch.nu(self.cfg)
        ru, tu, _, _ = self._polar(x1, x2, side, ch.u)
        if np.any(ru < AT_VORTEX_EPS):
            raise AtVortex(f"basis function is singular at vortex {ch.u}")
        return self._leading(nu, ru, tu) + self.chain_part(ch.u, nu, x1, x2, side)

    def chain_part(self, u, nu, x1, x2, side):
        """Resummed ``S_1 + S_2 + ...`` for vortex ``u`` and any order ``nu``."""
        v = _other(u)
        ru, tu, rv, tv = self._polar(x1, x2, side, u)
        y = self.y_vector(u, nu)
        q = self.kern.K @ (self.kern.d[v] * y)
        h = self.grid.h
        out = np.zeros(ru.shape, dtype=complex)
        at_v = rv < AT_VORTEX_EPS
        ok = ~at_v
        if np.any(ok):
            fu = self.kern.weighted(u, self.kern.columns(ru[ok]), tu[ok])
            fv = self.kern.weighted(v, self.kern.columns(rv[ok]), tv[ok])
            out[ok] += h * (q @ fu - y @ fv)
        if np.any(at_v):
            fu = self.kern.weighted(u, self.kern.columns(ru[at_v]), tu[at_v])
            out[at_v] += h * (q @ fu) - y[self.grid.zero_index]
        return out

    def series_terms(self, ch, x1, x2, side, n_max):
        """Array of shape (n_max + 1, P) with ``S_0 .. S_{n_max}``."""
        u, v = ch.u, _other(ch.u)
        nu = ch.nu(self.cfg)
        ru, tu, rv, tv = self._polar(x1, x2, side, u)
        if np.any(ru < AT_VORTEX_EPS):
            raise AtVortex(f"basis function is singular at vortex {u}")
        h = self.grid.h
        K, du, dv = self.kern.K, self.kern.d[u], self.kern.d[v]
        fu = self.kern.weighted(u, self.kern.columns(ru), tu)
        at_v = rv < AT_VORTEX_EPS
        fv = np.zeros_like(fu)
        if np.any(~at_v):
            fv[:, ~at_v] = self.kern.weighted(v, self.kern.columns(rv[~at_v]), tv[~at_v])
        # h f_v -> unit vector at tau = 0 exactly at v
        fv[:, at_v] = 0.0
        fv[self.grid.zero_index, at_v] = 1.0 / h
        terms = np.zeros((n_max + 1, ru.size), dtype=complex)
        terms[0] = self._leading(nu, ru, tu)
        w = g_vector(self.grid, nu)
        for n in range(1, n_max + 1):
            if n % 2 == 1:
                terms[n] = -h * (w @ fv)
            else:
                kdw = K @ (dv * w)
                terms[n] = h * (kdw @ fu)
                w = K @ (du * kdw)
        return terms

    def asymptotic_matrices(self):
        """``(S, T)`` for own vortex ``a``: 2x2, indexed [omega_idx, nu_idx].

        Row/column 0 is the shifted order (sigma - 1), 1 the unshifted one.
        """
        cfg = self.cfg
        h, K = self.grid.h, self.kern.K
        da, db = self.kern.d["a"], self.kern.d["b"]
        kappa = self.energy.kappa
        nus = (cfg.alpha - 1, cfg.alpha)
        omegas_s = (cfg.beta - 1, cfg.beta)
        S = np.empty((2, 2), dtype=complex)
        T = np.empty((2, 2), dtype=complex)
        for j, nu in enumerate(nus):
            y = self.y_vector("a", nu)
            kdy = K @ (db * y)
            for i, om in enumerate(omegas_s):
                g = g_vector(self.grid, om)
                S[i, j] = bessel_k(om - nu, kappa * cfg.rho) + h * (g @ (da * kdy))
            for i, om in enumerate(nus):
                g = g_vector(self.grid, om)
                lead = np.pi / (2 * np.sin(np.pi * cfg.alpha)) if i == j else 0.0
                T[i, j] = lead + h * (g @ (db * y))
        return S, T


_BASES = {}


def deficiency_basis(z, cfg, tol=DEFAULT_TOL):
    e = as_energy(z)
    key = (e.z, cfg.alpha, cfg.beta, cfg.rho, tol)
    if key not in _BASES:
        if len(_BASES) > 16:
            _BASES.clear()
        _BASES[key] = DeficiencyBasis(e, cfg, tol)
    return _BASES[key]


def _channel(ch):
    if isinstance(ch, ChannelIndex):
        return ch
    if isinstance(ch, int):
        return ChannelIndex.from_flat(ch)
    u, which = ch
    if isinstance(which, str):
        which = {"lower": LOWER, "upper": UPPER}[which]
    return ChannelIndex(u, which)


def psi(ch, z, cfg, x, method=RESUMMED_METHOD, tol=DEFAULT_TOL):
    """Deficiency basis function ``psi_{u, nu, z}(x)``.

    Parameters
    ----------
    ch : ChannelIndex, int (flat index 1..4) or (u, which)
    z : complex or Energy
    cfg : VortexPair
    x : PlanePoint or array_like
        One point or an (P, 2) array.  May coincide with the complementary
        vortex, not with vortex ``u``.
    method : "resummed" or SeriesMethod
    """
    ch = _channel(ch)
    basis = deficiency_basis(z, cfg, tol)
    x1, x2, side, scalar = _as_arrays(x)
    if isinstance(method, SeriesMethod):
        val = basis.series_terms(ch, x1, x2, side, method.n_max).sum(axis=0)
    elif method == RESUMMED_METHOD:
        val = basis.evaluate(ch, x1, x2, side)
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return complex(val[0]) if scalar else val


def s_term(n, ch, z, cfg, x, tol=DEFAULT_TOL):
    """Single summand ``S_n`` of the chain series at ``x``."""
    if n < 0:
        raise InvalidParameter("n must be >= 0")
    ch = _channel(ch)
    basis = deficiency_basis(z, cfg, tol)
    x1, x2, side, scalar = _as_arrays(x)
    val = basis.series_terms(ch, x1, x2, side, n)[n]
    return complex(val[0]) if scalar else val


def order_sign_difference(ch, z, cfg, x, n_max=None, tol=DEFAULT_TOL):
    """``sum_{n>=1} S_n(u, nu) - sum_{n>=1} S_n(u, -nu)`` at ``x``.

    The two chain sums are compared either resummed (``n_max=None``) or
    truncated after ``n_max`` terms.  The leading terms are excluded.
    """
    ch = _channel(ch)
    basis = deficiency_basis(z, cfg, tol)
    x1, x2, side, scalar = _as_arrays(x)
    nu = ch.nu(cfg)
    if n_max is None:
        val = (basis.chain_part(ch.u, nu, x1, x2, side)
               - basis.chain_part(ch.u, -nu, x1, x2, side))
    else:
        plus = basis.series_terms(ch, x1, x2, side, n_max)[1:].sum(axis=0)
        flipped = _FlippedOrder(ch, cfg)
        minus = basis.series_terms(flipped, x1, x2, side, n_max)[1:].sum(axis=0)
        val = plus - minus
    return complex(val[0]) if scalar else val


class _FlippedOrder:
    """Channel stand-in whose order is ``-nu``; used by the sign comparison."""

    def __init__(self, ch, cfg):
        self.u = ch.u
        self.which = ch.which
        self._nu = -ch.nu(cfg)

    def nu(self, cfg):
        return self._nu


def _orient(alpha, beta, rho):
    from .geometry import VortexPair
    return VortexPair(alpha, beta, rho)


def cal_S(omega_idx, nu_idx, alpha, beta, z, pol=RESUMMED, rho=1.0, tol=DEFAULT_TOL):
    """Asymptotic matrix entry ``S_{omega, nu}(alpha, beta; z)``.

    ``omega = beta - 1`` (``omega_idx=-1``) or ``beta`` (0); ``nu = alpha - 1``
    or ``alpha`` likewise.  The first argument pair names the own vortex.
    """
    S, _ = deficiency_basis(z, _orient(alpha, beta, rho), tol).asymptotic_matrices()
    return complex(S[omega_idx + 1, nu_idx + 1])


def cal_T(omega_idx, nu_idx, alpha, beta, z, pol=RESUMMED, rho=1.0, tol=DEFAULT_TOL):
    """Asymptotic matrix entry ``T_{omega, nu}(alpha, beta; z)``.

    Both indices refer to the orders ``alpha - 1`` (-1) and ``alpha`` (0).
    """
    _, T = deficiency_basis(z, _orient(alpha, beta, rho), tol).asymptotic_matrices()
    return complex(T[omega_idx + 1, nu_idx + 1])


@dataclass
class AsymptoticMatrices:
    """``S`` and ``T`` for one orientation, indexed [omega_idx + 1, nu_idx + 1]."""

    S: np.ndarray
    T: np.ndarray
    alpha: float
    beta: float
    z: complex
    own: str = "a"


def asymptotic_matrices(z, cfg, own="a", tol=DEFAULT_TOL):
    """Both matrices with ``own`` as the vortex carrying the singularity."""
    oriented = cfg if own == "a" else cfg.swapped()
    S, T = deficiency_basis(z, oriented, tol).asymptotic_matrices()
    return AsymptoticMatrices(S, T, oriented.alpha, oriented.beta, as_energy(z).z, own)


# ----------------------------------------------------------------------
# verification helpers
# ----------------------------------------------------------------------

def cut_jump_residual(f, vortex, flux, radii, rho, step=1e-5):
    """Worst violation of the cut conditions of ``f`` on one cut.

    ``f(x1, x2, side)`` is evaluated on both sides of the cut of
    ``vortex`` at the given distances from it.  The value condition and
    the radial-derivative condition (central differences with one
    Richardson level) are both checked.  On the cut of ``a`` the upper
    value must equal ``exp(2 pi i flux)`` times the lower one; on the cut of
    ``b`` it is the lower value that carries the factor.
    """
    radii = np.asarray(radii, dtype=float)
    sign, base = (-1.0, 0.0) if vortex == "a" else (1.0, rho)
    phase = np.exp(2j * np.pi * flux)

    def jump(r):
        x1 = base + sign * r
        up = f(x1, np.zeros_like(x1), np.ones_like(x1, dtype=int))
        lo = f(x1, np.zeros_like(x1), -np.ones_like(x1, dtype=int))
        return up - phase * lo if vortex == "a" else lo - phase * up

    val = np.abs(jump(radii))
    d1 = (jump(radii * (1 + step)) - jump(radii * (1 - step))) / (2 * step * radii)
    d2 = (jump(radii * (1 + step / 2)) - jump(radii * (1 - step / 2))) / (step * radii)
    deriv = np.abs((4 * d2 - d1) / 3)
    return float(max(val.max(), deriv.max()))


def verify_cut_conditions(ch, z, cfg, samples=(0.3, 0.9, 2.0), tol=DEFAULT_TOL):
    """Worst cut-condition residual of a basis function on both cuts."""
    ch = _channel(ch)
    basis = deficiency_basis(z, cfg, tol)

    def f(x1, x2, side):
        return basis.evaluate(ch, x1, x2, side)

    return max(cut_jump_residual(f, "a", cfg.alpha, samples, cfg.rho),
               cut_jump_residual(f, "b", cfg.beta, samples, cfg.rho))


def helmholtz_residual(f, z, x, step):
    """Five-point ``(Delta + z) f`` at ``x`` with mesh ``step``."""
    x1, x2 = x
    pts = np.array([[x1, x2], [x1 + step, x2], [x1 - step, x2],
                    [x1, x2 + step], [x1, x2 - step]])
    v = f(pts)
    lap = (v[1] + v[2] + v[3] + v[4] - 4 * v[0]) / step ** 2
    return complex(lap + as_energy(z).z * v[0])


def mode_coefficients(f, vortex, flux, radii, rho, n_theta=256, modes=(-1, 0)):
    """Angular Fourier coefficients ``(1/2pi) int f e^{-i(n+flux) theta} dtheta``.

    Returns an array of shape (len(modes), len(radii)).
    """
    out = np.empty((len(modes), len(radii)), dtype=complex)
    for j, r in enumerate(radii):
        th, x1, x2 = circle_points(vortex, r, rho, n_theta)
        vals = f(np.column_stack([x1, x2]))
        for i, n in enumerate(modes):
            out[i, j] = np.mean(vals * np.exp(-1j * (n + flux) * th))
    return out


@dataclass
class AsymptoticReport:
    """Fitted near-vortex coefficients against the closed forms.

    ``errors`` maps a coefficient name to its relative error.
    """

    fitted: dict
    expected: dict
    errors: dict = field(default_factory=dict)
    residual: float = 0.0


def _bessel_fit(coeffs, order, kappa, radii):
    """Least-squares ``c(r) = A K_order(kappa r) + B I_order(kappa r)``."""
    radii = np.asarray(radii, dtype=float)
    M = np.column_stack([bessel_k(order, kappa * radii), bessel_i(order, kappa * radii)])
    sol, *_ = np.linalg.lstsq(M, coeffs, rcond=None)
    if np.linalg.cond(M) > 1e12:
        raise FitIllConditioned("radii do not separate the two Bessel modes")
    res = float(np.max(np.abs(M @ sol - coeffs)))
    return sol[0], sol[1], res


def _regular_coefficient(A, B, order):
    """Coefficient of (kappa r/2)^order in A K_order + B I_order."""
    return -A * gamma(1 - order) / (2 * order) + B / gamma(1 + order)


def asymptotic_check(ch, z, cfg, radii=(0.02, 0.05, 0.1), tol=DEFAULT_TOL):
    """Compare the near-vortex expansion of a basis function with its closed form.

    Near each vortex the angular modes ``e^{i mu theta}`` of ``psi`` are
    fitted exactly in the Bessel basis ``K_|mu|, I_|mu|``; the fitted
    amplitudes give the singular coefficient and the regular
    ``(kappa r/2)^|mu|`` coefficient, which are compared with the
    expressions built from ``S`` and ``T``.
    """
    ch = _channel(ch)
    basis = deficiency_basis(z, cfg, tol)
    kappa = basis.energy.kappa
    u, v = ch.u, _other(ch.u)
    nu = ch.nu(cfg)
    j = ch.which + 1
    mats_u = asymptotic_matrices(z, cfg, own=u, tol=tol)
    su, sv = cfg.flux(u), cfg.flux(v)

    def f(pts):
        return basis.evaluate(ch, pts[:, 0], pts[:, 1], np.zeros(len(pts), dtype=int))

    fitted, expected = {}, {}
    worst = 0.0
    cu = mode_coefficients(f, u, su, radii, cfg.rho)
    cv = mode_coefficients(f, v, sv, radii, cfg.rho)
    for i, n in enumerate((-1, 0)):
        mu = n + su
        order = abs(mu)
        A, B, res = _bessel_fit(cu[i], order, kappa, radii)
        worst = max(worst, res)
        fitted[f"own_singular[{i}]"] = A * gamma(order) / 2
        expected[f"own_singular[{i}]"] = gamma(order) / 2 if i == j else 0.0
        fitted[f"own_regular[{i}]"] = _regular_coefficient(A, B, order)
        expected[f"own_regular[{i}]"] = (-np.sin(np.pi * order) / np.pi
                                         * gamma(1 - order) / order * mats_u.T[i, j])
        mu = n + sv
        order = abs(mu)
        A, B, res = _bessel_fit(cv[i], order, kappa, radii)
        worst = max(worst, res)
        fitted[f"other_singular[{i}]"] = A * gamma(order) / 2
        expected[f"other_singular[{i}]"] = 0.0
        fitted[f"other_regular[{i}]"] = _regular_coefficient(A, B, order)
        expected[f"other_regular[{i}]"] = (np.sin(np.pi * order) / np.pi
                                           * gamma(1 - order) / order * mats_u.S[i, j])
    errors = {}
    for key, ex in expected.items():
        scale = abs(ex) if abs(ex) > 0 else 1.0
        errors[key] = float(abs(fitted[key] - ex) / scale)
    return AsymptoticReport(fitted, expected, errors, worst)


def singular_coefficient_matrix(z, cfg, radii=(0.02, 0.05, 0.1), tol=DEFAULT_TOL):
    """4x4 matrix of fitted singular amplitudes, rows = channels.

    Columns: the ``K`` amplitudes of modes ``sigma-1`` and ``sigma`` at
    ``a``, then at ``b``.  Nonsingularity witnesses four independent
    basis functions.
    """
    basis = deficiency_basis(z, cfg, tol)
    kappa = basis.energy.kappa
    M = np.empty((4, 4), dtype=complex)
    for row, ch in enumerate(CHANNELS):
        def f(pts, ch=ch):
            return basis.evaluate(ch, pts[:, 0], pts[:, 1], np.zeros(len(pts), dtype=int))
        col = 0
        for vtx in ("a", "b"):
            s = cfg.flux(vtx)
            c = mode_coefficients(f, vtx, s, radii, cfg.rho)
            for i, n in enumerate((-1, 0)):
                A, _, _ = _bessel_fit(c[i], abs(n + s), kappa, radii)
                M[row, col] = A
                col += 1
    return M
