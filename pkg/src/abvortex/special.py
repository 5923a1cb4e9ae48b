"""Complex branch arithmetic, Gamma and modified Bessel functions.

The Macdonald function of complex order is computed from the even
integral representation

    K_mu(x) = int_0^inf exp(-x cosh t) cosh(mu t) dt,

which is valid for Re x > 0 and every complex order.  The integrand
already decays double exponentially, so a plain trapezoid rule in ``t``
converges geometrically; the step is chosen from the width of the strip
of analyticity, which is what makes the rule spectrally accurate.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ArgumentLeftHalfPlane,
    ArgumentNearImaginaryAxis,
    InvalidParameter,
    OrderOutOfStrip,
    SpectralParameterOnCut,
)

ORDER_STRIP = 2.0
MIN_REAL_ARGUMENT = 1e-8

_LANCZOS_G = 7.0
_LANCZOS_COEF = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])


def kappa(z):
    """Return the branch of sqrt(-z) with positive real part.

    Parameters
    ----------
    z : complex
        Spectral parameter, not on [0, inf).

    Returns
    -------
    complex
    """
    z = complex(z)
    if z.imag == 0.0 and z.real >= 0.0:
        raise SpectralParameterOnCut(f"z={z!r} lies on [0, inf)")
    return complex(np.sqrt(-z))


@dataclass(frozen=True)
class Energy:
    """Spectral parameter together with its canonical square-root branch."""

    z: complex
    kappa: complex

    @classmethod
    def from_z(cls, z):
        return cls(complex(z), kappa(z))

    def conj(self):
        return Energy(self.z.conjugate(), self.kappa.conjugate())

    def power(self, p):
        """Principal power kappa**p (unambiguous because Re kappa > 0)."""
        return self.kappa ** p


def as_energy(z):
    return z if isinstance(z, Energy) else Energy.from_z(z)


def gamma(z):
    """Gamma function for real or complex arguments (Lanczos, g=7).

    Poles at non-positive integers return ``inf``.
    """
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    flat_in = z.ravel()
    flat = out.ravel()
    for i, w in enumerate(flat_in):
        flat[i] = _gamma_scalar(w)
    if np.all(np.asarray(z).imag == 0):
        return out.real if out.ndim else float(out.real)
    return out if out.ndim else complex(out)


def _gamma_scalar(w):
    if w.imag == 0 and w.real <= 0 and w.real == np.floor(w.real):
        return complex(np.inf)
    if w.real < 0.5:
        return np.pi / (np.sin(np.pi * w) * _gamma_scalar(1.0 - w))
    w = w - 1.0
    acc = _LANCZOS_COEF[0]
    for k in range(1, len(_LANCZOS_COEF)):
        acc += _LANCZOS_COEF[k] / (w + k)
    t = w + _LANCZOS_G + 0.5
    return np.sqrt(2 * np.pi) * t ** (w + 0.5) * np.exp(-t) * acc


def rgamma(x):
    """Reciprocal Gamma for real arguments, zero at the poles."""
    x = float(x)
    if x <= 0 and x == np.floor(x):
        return 0.0
    return 1.0 / float(np.real(_gamma_scalar(complex(x))))


# ----------------------------------------------------------------------
# Macdonald function K_mu(x)
# ----------------------------------------------------------------------

def _check_k_domain(mu, x):
    if np.any(np.abs(mu.real) >= ORDER_STRIP):
        raise OrderOutOfStrip(f"|Re mu| must be < {ORDER_STRIP}")
    if np.any(~np.isfinite(x)):
        raise ArgumentLeftHalfPlane("non-finite argument")
    if np.any(x.real <= 0):
        raise ArgumentLeftHalfPlane("Re x must be > 0")
    if np.any(x.real < MIN_REAL_ARGUMENT):
        raise ArgumentNearImaginaryAxis(
            f"Re x below {MIN_REAL_ARGUMENT:g}; evaluation refused")


def _t_grid(mu, x):
    """Trapezoid nodes and weights in t for a batch of (mu, x)."""
    arg_max = float(np.max(np.abs(np.angle(x))))
    strip = max(0.8 * (0.5 * np.pi - arg_max), 0.02)
    im_max = float(np.max(np.abs(mu.imag)))
    h = 2 * np.pi / (im_max + 39.0 / strip)
    re_min = float(np.min(x.real))
    nu_max = float(np.max(np.abs(mu.real)))
    # integrand below exp(-45) relative to O(1) beyond t_max
    t_max = np.arccosh(max(1.0, 45.0 / re_min))
    for _ in range(8):
        t_max = np.arccosh(max(1.0, (45.0 + nu_max * t_max) / re_min))
    n = int(np.ceil(t_max / h)) + 1
    t = h * np.arange(n)
    w = np.full(n, h)
    w[0] = 0.5 * h
    return t, w


def bessel_k(mu, x, chunk=2048):
    """Macdonald function K_mu(x) for complex order and argument.

    Parameters
    ----------
    mu : complex or array_like
        Order with |Re mu| < 2.
    x : complex or array_like
        Argument with Re x > 0.  Broadcast against ``mu``.

    Returns
    -------
    complex or ndarray
    """
    mu_b, x_b = np.broadcast_arrays(np.asarray(mu, dtype=complex),
                                    np.asarray(x, dtype=complex))
    _check_k_domain(mu_b, x_b)
    shape = mu_b.shape
    mu_f = mu_b.ravel()
    x_f = x_b.ravel()
    out = np.empty(mu_f.shape, dtype=complex)
    for s in range(0, mu_f.size, chunk):
        m = mu_f[s:s + chunk]
        xx = x_f[s:s + chunk]
        t, w = _t_grid(m, xx)
        base = -np.outer(xx, np.cosh(t))
        mt = np.outer(m, t)
        vals = 0.5 * (np.exp(base + mt) + np.exp(base - mt))
        out[s:s + chunk] = vals @ w
    if shape == ():
        return complex(out[0])
    return out.reshape(shape)


def bessel_k_table(orders, xs, chunk=512):
    """Outer-product table ``K[i, j] = K_{orders[i]}(xs[j])``.

    Uses one shared t-grid, so the table is a single matrix product.
    """
    orders = np.atleast_1d(np.asarray(orders, dtype=complex))
    xs = np.atleast_1d(np.asarray(xs, dtype=complex))
    _check_k_domain(orders, xs)
    out = np.empty((orders.size, xs.size), dtype=complex)
    imaginary = np.all(orders.real == 0)
    # chunks of similar |x| share a short t-grid
    order = np.argsort(np.abs(xs))
    xs_sorted = xs[order]
    tmp = np.empty_like(out)
    for s in range(0, xs.size, chunk):
        xx = xs_sorted[s:s + chunk]
        t, w = _t_grid(orders, xx)
        E = np.exp(-np.outer(np.cosh(t), xx))
        if imaginary:
            C = np.cos(np.outer(orders.imag, t)) * w
            # one contiguous real product; strided .real views are slow in BLAS
            m = xx.size
            RI = C @ np.concatenate([E.real, E.imag], axis=1)
            tmp[:, s:s + chunk] = RI[:, :m] + 1j * RI[:, m:]
        else:
            C = np.cosh(np.outer(orders, t)) * w
            tmp[:, s:s + chunk] = C @ E
    out[:, order] = tmp
    return out


def k_small_x_coefficients(nu):
    """Coefficients of (x/2)^(-nu) and (x/2)^(nu) in K_nu(x) as x -> 0.

    Returns ``(Gamma(nu)/2, -Gamma(1-nu)/(2 nu))`` for 0 < nu < 1.
    """
    nu = float(nu)
    if not 0.0 < nu < 1.0:
        raise OrderOutOfStrip("need 0 < nu < 1")
    return gamma(nu) / 2.0, -gamma(1.0 - nu) / (2.0 * nu)


# ----------------------------------------------------------------------
# Real-order I and J
# ----------------------------------------------------------------------

def _i_series(nu, x):
    half = x / 2.0
    term = np.where(half == 0, 1.0 if nu == 0 else 0.0,
                    half ** nu + 0j) * rgamma(nu + 1.0)
    total = term.copy()
    q = half * half
    for k in range(1, 2000):
        term = term * q / (k * (k + nu))
        total = total + term
        if k > 2 and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _i_asymptotic(nu, x):
    mu4 = 4.0 * nu * nu
    sum_plus = np.ones_like(x)
    sum_minus = np.ones_like(x)
    a = np.ones_like(x)
    for k in range(1, 200):
        a = a * (mu4 - (2 * k - 1) ** 2) / (8.0 * k * x)
        if np.all(np.abs(a) < 1e-17):
            break
        sum_plus = sum_plus + (-1) ** k * a
        sum_minus = sum_minus + a
    pref = 1.0 / np.sqrt(2 * np.pi * x)
    sgn = np.where(x.imag >= 0, 1.0, -1.0)
    second = sgn * 1j * np.exp(sgn * 1j * np.pi * nu) * np.exp(-x) * sum_minus
    return pref * (np.exp(x) * sum_plus + second)


def bessel_i(nu, x):
    """Modified Bessel function I_nu(x), real order, Re x >= 0.

    Power series below the switchover ``|x| = max(20, nu**2)``, the
    two-exponential Hankel expansion above it.
    """
    nu = float(nu)
    xa = np.asarray(x, dtype=complex)
    if np.any(xa.real < 0):
        raise ArgumentLeftHalfPlane("bessel_i needs Re x >= 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.empty(flat.shape, dtype=complex)
    big = np.abs(flat) >= max(20.0, nu * nu)
    if np.any(~big):
        out[~big] = _i_series(nu, flat[~big])
    if np.any(big):
        out[big] = _i_asymptotic(nu, flat[big])
    if xa.shape == ():
        return complex(out[0])
    return out.reshape(xa.shape)


def _j_series(nu, x):
    half = x / 2.0
    term = (half ** nu if nu else 1.0) * rgamma(nu + 1.0)
    total = term
    q = -half * half
    for k in range(1, 500):
        term = term * q / (k * (k + nu))
        total += term
        if k > 2 and abs(term) <= 1e-17 * max(abs(total), 1e-300):
            break
    return total


def _j_miller(nu, x):
    m = int(x + 30 + 10 * x ** (1.0 / 3.0))
    m += m % 2
    # backward recurrence for j_k ~ J_{nu+k}(x), k = m+1 .. 0
    jp1, jk = 0.0, 1e-300
    vals = np.zeros(m + 1)
    vals[m] = jk
    for k in range(m, 0, -1):
        jm1 = 2.0 * (nu + k) / x * jk - jp1
        jp1, jk = jk, jm1
        vals[k - 1] = jk
        if abs(jk) > 1e250:
            vals[k - 1:] *= 1e-250
            jp1 *= 1e-250
            jk *= 1e-250
    # normalisation (x/2)^nu = sum_k (nu+2k) Gamma(nu+k)/k! J_{nu+2k}(x)
    c = np.real(gamma(nu + 1.0)) if nu > 0 else 1.0
    s = c * vals[0]
    for k in range(1, m // 2 + 1):
        if k == 1:
            c = (nu + 2.0) * (np.real(gamma(nu + 1.0)) if nu > 0 else 1.0)
        else:
            c = c * (nu + 2 * k) * (nu + k - 1) / ((nu + 2 * k - 2) * k)
        s += c * vals[2 * k]
    return (x / 2.0) ** nu * vals[0] / s


def bessel_j(nu, x):
    """Bessel function J_nu(x) for real nu >= 0 and real x >= 0."""
    nu = float(nu)
    if nu < 0:
        raise OrderOutOfStrip("bessel_j needs nu >= 0")
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0):
        raise InvalidParameter("bessel_j needs x >= 0")
    flat = np.atleast_1d(xa).ravel()
    out = np.array([_j_series(nu, v) if v <= 6.0 else _j_miller(nu, v)
                    for v in flat])
    if xa.shape == ():
        return float(out[0])
    return out.reshape(xa.shape)
