"""Krein matrices, Gram matrices and the Pauli Green functions.

The rescaled basis is ``f_j = kappa^|nu_j| psi_j`` over the four channels
``j = 1..4`` = (a, alpha-1), (a, alpha), (b, beta-1), (b, beta).  With

    A(zeta)_{jk} = kappa_zeta^{|nu_j| + |nu_k|} C_{jk}(zeta),

where ``C_{jk} = T_{nu_k, nu_j}`` of the own vortex when both channels sit
on the same vortex and ``C_{jk} = -S_{nu_k, nu_j}`` (oriented with channel
``j`` as own vortex) otherwise, the Gram matrix and Krein matrices are

    P(z, w) = <f_z^j, f_w^k> = 2 pi / (conj(z) - w) (A(w) - A(conj(z))),
    M^{+, red} = (2 pi A[{1,3},{1,3}])^{-1},
    M^{-, red} = (2 pi A[{2,4},{2,4}])^{-1}.

The spin-up block lives on the shifted channels (1, 3), the spin-down block
on the unshifted ones (2, 4).
"""

from dataclasses import dataclass

import numpy as np

from .deficiency_two import CHANNELS, _channel, asymptotic_matrices, deficiency_basis
from .errors import (
    AtVortex,
    CoincidentSpectralParameters,
    FluxSumIncompatible,
    InvalidParameter,
    KreinMatrixSingular,
    RealSpectralParameter,
    TailNotNegligible,
)
from .geometry import AT_VORTEX_EPS, point
from .quadrature import DEFAULT_TOL, plane_nodes
from .special import as_energy, bessel_k
from .two_vortex_green import RESUMMED, _as_arrays, green_two_arrays

PLUS, MINUS = "+", "-"
SPIN_INDICES = {PLUS: (0, 2), MINUS: (1, 3)}
SINGULAR_COND = 1e12


def _spin(spin):
    key = {"+": PLUS, "plus": PLUS, "up": PLUS, "-": MINUS, "minus": MINUS,
           "down": MINUS}.get(spin)
    if key is None:
        raise InvalidParameter(f"unknown spin {spin!r}")
    return key


# ----------------------------------------------------------------------
# rescaled basis
# ----------------------------------------------------------------------

def order_magnitude(ch, cfg):
    return abs(_channel(ch).nu(cfg))


def rescaled_basis(ch, z, cfg, x, tol=DEFAULT_TOL):
    """``f = kappa^|nu| psi`` for a channel at one point or an (P, 2) array."""
    ch = _channel(ch)
    e = as_energy(z)
    basis = deficiency_basis(e, cfg, tol)
    x1, x2, side, scalar = _as_arrays(x)
    val = e.power(order_magnitude(ch, cfg)) * basis.evaluate(ch, x1, x2, side)
    return complex(val[0]) if scalar else val


def _basis_table(z, cfg, x1, x2, side, tol):
    """(4, P) array of ``f_z^j`` on coordinate arrays."""
    e = as_energy(z)
    basis = deficiency_basis(e, cfg, tol)
    return np.stack([e.power(order_magnitude(ch, cfg))
                     * basis.evaluate(ch, x1, x2, side) for ch in CHANNELS])


# ----------------------------------------------------------------------
# closed-form matrices
# ----------------------------------------------------------------------

def a_matrix(z, cfg, tol=DEFAULT_TOL):
    """The 4x4 matrix ``A(z)`` of rescaled asymptotic coefficients."""
    e = as_energy(z)
    mats = {u: asymptotic_matrices(e, cfg, own=u, tol=tol) for u in ("a", "b")}
    A = np.empty((4, 4), dtype=complex)
    for j, cj in enumerate(CHANNELS):
        for k, ck in enumerate(CHANNELS):
            own = mats[cj.u]
            if cj.u == ck.u:
                c = own.T[ck.which + 1, cj.which + 1]
            else:
                c = -own.S[ck.which + 1, cj.which + 1]
            p = order_magnitude(cj, cfg) + order_magnitude(ck, cfg)
            A[j, k] = e.power(p) * c
    return A


@dataclass(frozen=True)
class KreinMatrix:
    """Reduced 2x2 Krein block of one spin and its 4x4 embedding."""

    spin: str
    reduced: np.ndarray
    z: complex
    condition: float
    determinant: complex

    @property
    def indices(self):
        return SPIN_INDICES[self.spin]

    @property
    def full(self):
        M = np.zeros((4, 4), dtype=complex)
        M[np.ix_(self.indices, self.indices)] = self.reduced
        return M


def krein_matrix(spin, z, cfg, pol=RESUMMED, tol=DEFAULT_TOL):
    """``M^{spin}`` at ``z``.

    Raises
    ------
    KreinMatrixSingular
        If the 2x2 block to invert is numerically singular; carries the
        determinant.
    """
    spin = _spin(spin)
    e = as_energy(z)
    idx = SPIN_INDICES[spin]
    B = a_matrix(e, cfg, tol)[np.ix_(idx, idx)]
    det = complex(np.linalg.det(B))
    cond = float(np.linalg.cond(B))
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise KreinMatrixSingular(f"Krein block singular (cond {cond:.3g})", det)
    return KreinMatrix(spin, np.linalg.inv(B) / (2 * np.pi), e.z, cond, det)


def m_plus(z, cfg, pol=RESUMMED, tol=DEFAULT_TOL):
    return krein_matrix(PLUS, z, cfg, pol, tol)


def m_minus(z, cfg, pol=RESUMMED, tol=DEFAULT_TOL):
    return krein_matrix(MINUS, z, cfg, pol, tol)


@dataclass(frozen=True)
class InnerProductMatrix:
    """Gram matrix ``P[j, k] = <f_z^j, f_w^k>`` (antilinear in the first slot)."""

    P: np.ndarray
    z: complex
    w: complex


def p_matrix(z, w, cfg, pol=RESUMMED, tol=DEFAULT_TOL, eps=1e-12):
    """Closed-form Gram matrix between the bases at ``z`` and ``w``.

    Raises
    ------
    CoincidentSpectralParameters
        If ``w`` equals ``conj(z)``.
    """
    ez, ew = as_energy(z), as_energy(w)
    zb = ez.conj()
    gap = zb.z - ew.z
    if abs(gap) <= eps * max(1.0, abs(ew.z)):
        raise CoincidentSpectralParameters("w equals conj(z)")
    P = 2 * np.pi / gap * (a_matrix(ew, cfg, tol) - a_matrix(zb, cfg, tol))
    return InnerProductMatrix(P, ez.z, ew.z)


def p_matrix_diag(z, cfg, pol=RESUMMED, tol=DEFAULT_TOL):
    """Gram matrix of the basis at ``z`` with itself.

    The diagonal is the norm formula
    ``|kappa|^{2|nu|} * (-2 pi / Im z) Im((kappa/conj(kappa))^|nu| T_{nu,nu})``;
    off-diagonal entries come from the closed form, which is regular at
    ``w = z`` whenever ``Im z != 0``.
    """
    e = as_energy(z)
    if e.z.imag == 0.0:
        raise RealSpectralParameter("norms need Im z != 0")
    P = p_matrix(e, e, cfg, pol, tol).P.copy()
    for j, ch in enumerate(CHANNELS):
        P[j, j] = abs(e.kappa) ** (2 * order_magnitude(ch, cfg)) * psi_norm_squared(ch, e, cfg, tol)
    return InnerProductMatrix(P, e.z, e.z)


def psi_norm_squared(ch, z, cfg, tol=DEFAULT_TOL):
    """``||psi_ch||^2 = -(2 pi / Im z) Im((kappa/conj(kappa))^|nu| T_{nu,nu})``."""
    ch = _channel(ch)
    e = as_energy(z)
    if e.z.imag == 0.0:
        raise RealSpectralParameter("norms need Im z != 0")
    T = asymptotic_matrices(e, cfg, own=ch.u, tol=tol).T
    t = T[ch.which + 1, ch.which + 1]
    nu = order_magnitude(ch, cfg)
    ratio = (e.kappa / e.kappa.conjugate()) ** nu
    return float(-(2 * np.pi / e.z.imag) * (ratio * t).imag)


# ----------------------------------------------------------------------
# identities
# ----------------------------------------------------------------------

def hilbert_identity_residual(spin, z, w, cfg, tol=DEFAULT_TOL):
    """``||M_z - M_w - (z - w) M_z P(conj z, w) M_w||`` with closed-form ``P``."""
    ez, ew = as_energy(z), as_energy(w)
    Mz = krein_matrix(spin, ez, cfg, tol=tol).full
    Mw = krein_matrix(spin, ew, cfg, tol=tol).full
    P = p_matrix(ez.conj(), ew, cfg, tol=tol).P
    return float(np.linalg.norm(Mz - Mw - (ez.z - ew.z) * Mz @ P @ Mw))


def reduced_block_residual(spin, z, w, cfg, tol=DEFAULT_TOL):
    """``||(conj z - w) P_red(z, w) - (M_w^red)^-1 + (M_conj(z)^red)^-1||``."""
    spin = _spin(spin)
    ez, ew = as_energy(z), as_energy(w)
    idx = SPIN_INDICES[spin]
    P = p_matrix(ez, ew, cfg, tol=tol).P[np.ix_(idx, idx)]
    Mw = krein_matrix(spin, ew, cfg, tol=tol).reduced
    Mzb = krein_matrix(spin, ez.conj(), cfg, tol=tol).reduced
    lhs = (ez.z.conjugate() - ew.z) * P
    return float(np.linalg.norm(lhs - np.linalg.inv(Mw) + np.linalg.inv(Mzb)))


def conj_transpose_residual(spin, z, cfg, tol=DEFAULT_TOL):
    """``||M_z^* - M_conj(z)||`` on the reduced block."""
    e = as_energy(z)
    Mz = krein_matrix(spin, e, cfg, tol=tol).reduced
    Mzb = krein_matrix(spin, e.conj(), cfg, tol=tol).reduced
    return float(np.linalg.norm(Mz.conj().T - Mzb))


def _tail_bound(ez, ew, cfg, radius):
    """Crude bound on plane integrals of basis products beyond ``radius``."""
    dist = radius - cfg.rho
    decay = ez.kappa.real + ew.kappa.real
    lead = abs(bessel_k(0.5, ez.kappa * dist)) * abs(bessel_k(0.5, ew.kappa * dist))
    return 2 * np.pi * radius * lead / decay * 10.0


def gram_quadrature(z, w, cfg, radius=25.0, n_r=96, n_theta=128, tol=DEFAULT_TOL,
                    tail_tol=1e-4):
    """Gram matrix ``<f_z^j, f_w^k>`` by truncated-plane quadrature.

    Independent of the closed form: only point values of the basis enter.

    Raises
    ------
    TailNotNegligible
        If the estimated contribution beyond ``radius`` exceeds ``tail_tol``.
    """
    ez, ew = as_energy(z), as_energy(w)
    tail = _tail_bound(ez, ew, cfg, radius)
    if tail > tail_tol:
        raise TailNotNegligible(f"tail estimate {tail:.3g} exceeds {tail_tol:g}")
    y1, y2, wt = plane_nodes([(0.0, 0.0), (cfg.rho, 0.0)], radius, n_r, n_theta)
    side = np.zeros(y1.size, dtype=int)
    Fz = _basis_table(ez, cfg, y1, y2, side, tol)
    Fw = Fz if ez.z == ew.z else _basis_table(ew, cfg, y1, y2, side, tol)
    return InnerProductMatrix((Fz.conj() * wt) @ Fw.T, ez.z, ew.z)


def resolvent_identity_check(ch, z, w, cfg, x, radius=25.0, tol=1e-4,
                             n_r=96, n_theta=128, grid_tol=DEFAULT_TOL):
    """Residual of ``f_w(x) + (z - w) int G_z(x, y) f_w(y) dy - f_z(x)``.

    The integral is a truncated-plane quadrature about both vortices and
    ``x``; ``G_z`` is the two-vortex Green function.

    Raises
    ------
    TailNotNegligible
        If the estimated contribution beyond ``radius`` exceeds ``tol``.
    """
    ch = _channel(ch)
    ez, ew = as_energy(z), as_energy(w)
    x = point(x)
    fz = rescaled_basis(ch, ez, cfg, x, grid_tol)
    fw = rescaled_basis(ch, ew, cfg, x, grid_tol)
    if ez.z == ew.z:
        return float(abs(fw - fz))
    tail = abs(ez.z - ew.z) * _tail_bound(ez, ew, cfg, radius)
    if tail > tol:
        raise TailNotNegligible(f"tail estimate {tail:.3g} exceeds {tol:g}")
    y1, y2, wt = plane_nodes([(0.0, 0.0), (cfg.rho, 0.0), (x.x1, x.x2)],
                             radius, n_r, n_theta)
    side = np.zeros(y1.size, dtype=int)
    g = green_two_arrays(ez, cfg, x.x1, x.x2, x.side, y1, y2, side, tol=grid_tol)
    basis = deficiency_basis(ew, cfg, grid_tol)
    f = ew.power(order_magnitude(ch, cfg)) * basis.evaluate(ch, y1, y2, side)
    integral = np.sum(wt * g * f)
    return float(abs(fw + (ez.z - ew.z) * integral - fz))


# ----------------------------------------------------------------------
# Pauli Green functions
# ----------------------------------------------------------------------

def pauli_green_arrays(spin, z, cfg, x1, x2, side, y1, y2, yside, pol=RESUMMED,
                       tol=DEFAULT_TOL):
    """Vectorised ``G^spin_z`` over broadcast point pairs (``y`` the source)."""
    e = as_energy(z)
    M = krein_matrix(spin, e, cfg, pol, tol)
    arrs = np.broadcast_arrays(np.asarray(x1, float), np.asarray(x2, float),
                               np.asarray(side), np.asarray(y1, float),
                               np.asarray(y2, float), np.asarray(yside))
    x1, x2, side, y1, y2, yside = (np.ravel(a) for a in arrs)
    g = green_two_arrays(e, cfg, x1, x2, side, y1, y2, yside, pol, tol)
    idx = M.indices
    basis_z = deficiency_basis(e, cfg, tol)
    basis_zb = deficiency_basis(e.conj(), cfg, tol)
    fx = np.stack([e.power(order_magnitude(CHANNELS[j], cfg))
                   * basis_z.evaluate(CHANNELS[j], x1, x2, side) for j in idx])
    ey = e.conj()
    fy = np.stack([ey.power(order_magnitude(CHANNELS[j], cfg))
                   * basis_zb.evaluate(CHANNELS[j], y1, y2, yside) for j in idx])
    return g + np.einsum("jp,jk,kp->p", fx, M.reduced, fy.conj())


def pauli_green(spin, z, cfg, x, x0, pol=RESUMMED, tol=DEFAULT_TOL):
    """Green function of the spin component ``H^spin`` at one point pair."""
    x, x0 = point(x), point(x0)
    val = pauli_green_arrays(spin, z, cfg, x.x1, x.x2, x.side,
                             x0.x1, x0.x2, x0.side, pol, tol)
    return complex(val[0])


def pauli_source_function(spin, z, cfg, x, pol=RESUMMED, tol=DEFAULT_TOL):
    """``y -> exp(-i alpha theta_a - i beta theta_b) conj(G^spin_z(x, y))``.

    The source dependence of the Green function, returned to the
    single-valued gauge; its boundary functionals are the ones the spin
    component imposes.  Accepts an (P, 2) array of source points.
    """
    x = point(x)
    kern = deficiency_basis(z, cfg, tol).kern

    def f(pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        side = np.zeros(len(pts), dtype=int)
        g = pauli_green_arrays(spin, z, cfg, x.x1, x.x2, x.side,
                               pts[:, 0], pts[:, 1], side, pol, tol)
        _, ta, _, tb = kern.polar(pts[:, 0], pts[:, 1], side)
        return np.exp(-1j * (cfg.alpha * ta + cfg.beta * tb)) * np.conj(g)

    return f


# ----------------------------------------------------------------------
# zero modes
# ----------------------------------------------------------------------

def _check_zero_mode(spin, cfg):
    spin = _spin(spin)
    total = cfg.alpha + cfg.beta
    if spin == PLUS and not total < 1.0:
        raise FluxSumIncompatible("spin-up zero mode needs alpha + beta < 1")
    if spin == MINUS and not total > 1.0:
        raise FluxSumIncompatible("spin-down zero mode needs alpha + beta > 1")
    return spin


def zero_mode(spin, cfg, x):
    """Square-integrable zero mode of ``H^spin`` in the single-valued gauge.

    With ``w = x1 + i x2``, spin up (``alpha + beta < 1``):
    ``rho^{1-beta} |w|^alpha |w - rho|^beta / (w (rho - w))``; spin down
    (``alpha + beta > 1``): ``rho^beta / (|w|^alpha |w - rho|^beta)``.  Both
    are normalised to unit leading coefficient at ``a``.  Accepts one point
    or an (P, 2) array.
    """
    spin = _check_zero_mode(spin, cfg)
    pts = np.asarray(x.x1 + 1j * x.x2 if hasattr(x, "x1")
                     else np.asarray(x, dtype=float) @ np.array([1.0, 1j]))
    w = np.atleast_1d(pts)
    ra, rb = np.abs(w), np.abs(w - cfg.rho)
    if min(ra.min(), rb.min()) < AT_VORTEX_EPS:
        raise AtVortex("zero mode is singular at the vortices")
    a, b, rho = cfg.alpha, cfg.beta, cfg.rho
    if spin == PLUS:
        val = rho ** (1 - b) * ra ** a * rb ** b / (w * (rho - w))
    else:
        val = rho ** b / (ra ** a * rb ** b)
    return complex(val[0]) if np.ndim(pts) == 0 else val


def zero_mode_residual(spin, cfg, x, step=1e-4):
    """First-order operator residual of a zero mode by central differences.

    Spin up: ``(d/d conj(w) - alpha/(2 conj(w)) - beta/(2 (conj(w) - rho))) phi``;
    spin down: ``(d/dw + alpha/(2 w) + beta/(2 (w - rho))) phi``.
    """
    spin = _check_zero_mode(spin, cfg)
    x = point(x)
    w = x.x1 + 1j * x.x2

    def phi(d1, d2):
        return zero_mode(spin, cfg, np.array([[x.x1 + d1, x.x2 + d2]]))[0]

    dx = (phi(step, 0) - phi(-step, 0)) / (2 * step)
    dy = (phi(0, step) - phi(0, -step)) / (2 * step)
    val = phi(0, 0)
    a, b, rho = cfg.alpha, cfg.beta, cfg.rho
    if spin == PLUS:
        dwbar = 0.5 * (dx + 1j * dy)
        wb = w.conjugate()
        return float(abs(dwbar - (a / (2 * wb) + b / (2 * (wb - rho))) * val))
    dw = 0.5 * (dx - 1j * dy)
    return float(abs(dw + (a / (2 * w) + b / (2 * (w - rho))) * val))
