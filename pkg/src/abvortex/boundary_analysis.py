"""Boundary functionals at a vortex and the classification of extensions.

Near a vortex with flux ``sigma`` a function of the adjoint domain has, in
the single-valued gauge and with ``theta`` the polar angle about the vortex,

    phi = Phi_1^0 r^-sigma + Phi_2^0 r^sigma
          + (Phi_1^-1 r^{-1+sigma} + Phi_2^-1 r^{1-sigma}) e^{-i theta} + ...

The mode amplitudes are obtained by the trapezoid rule on circles (the
``e^{-i theta}`` amplitude uses the weight ``e^{i theta}``) and the powers
are separated by a least-squares fit in ``r`` that also carries the next
two powers of each mode.

Angles about ``b`` follow :mod:`abvortex.geometry`: zero on the segment
towards ``a`` and counterclockwise, i.e. the frame of ``a`` in the swapped
configuration.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitIllConditioned, InvalidParameter, RadiiTooCoarse, UnreliableBoundaryData
from .geometry import circle_points

N_THETA = 256
DEFAULT_RADII = tuple(np.geomspace(1e-3, 5e-2, 8))
RELIABLE_RESIDUAL = 1e-5


def _mode_powers(sigma, mode):
    """Exponents carried by the fit of one angular mode."""
    if mode == -1:
        return (-1 + sigma, 1 - sigma, 1 + sigma, 3 - sigma)
    return (-sigma, sigma, 2 - sigma, 2 + sigma)


def circle_modes(f, vortex, radii, rho, n_theta=N_THETA, phase=0.0):
    """Angular amplitudes of modes ``e^{-i theta}`` and ``1`` on circles.

    ``f`` takes an (P, 2) array of points.  ``phase`` is a flux whose
    factor ``e^{i phase theta}`` is divided out first.  Returns an array of
    shape (2, len(radii)); row 0 is the ``e^{-i theta}`` amplitude.
    """
    out = np.empty((2, len(radii)), dtype=complex)
    for j, r in enumerate(radii):
        th, x1, x2 = circle_points(vortex, r, rho, n_theta)
        vals = np.asarray(f(np.column_stack([x1, x2])), dtype=complex)
        vals = vals * np.exp(-1j * phase * th)
        out[0, j] = np.mean(vals * np.exp(1j * th))
        out[1, j] = np.mean(vals)
    return out


def _power_fit(values, radii, powers):
    radii = np.asarray(radii, dtype=float)
    # scale columns so the least-squares problem is well balanced
    M = np.column_stack([radii ** p for p in powers])
    scale = np.max(np.abs(M), axis=0)
    Ms = M / scale
    if np.linalg.cond(Ms) > 1e13:
        raise FitIllConditioned("radii cannot separate the fitted powers")
    sol, *_ = np.linalg.lstsq(Ms, values, rcond=None)
    return sol / scale


def _check_radii(radii, n_powers):
    radii = np.sort(np.asarray(radii, dtype=float))
    if radii.size < n_powers + 2:
        raise RadiiTooCoarse(f"need at least {n_powers + 2} radii")
    if radii[0] <= 0 or radii[-1] / radii[0] < 10.0:
        raise RadiiTooCoarse("radii must span at least one decade")
    return radii


def _fit_modes(modes, radii, sigma):
    """Leading two amplitudes of both modes with an error estimate.

    The error is the largest change of any amplitude when the smallest or
    the largest radius is dropped.
    """
    coef = np.empty((2, 2), dtype=complex)
    spread = 0.0
    for i, mode in enumerate((-1, 0)):
        powers = _mode_powers(sigma, mode)
        full = _power_fit(modes[i], radii, powers)[:2]
        coef[i] = full
        for keep in (slice(1, None), slice(None, -1)):
            part = _power_fit(modes[i][keep], radii[keep], powers)[:2]
            spread = max(spread, float(np.max(np.abs(part - full))))
    return coef, spread


@dataclass(frozen=True)
class BoundaryData:
    """The four boundary functionals at one vortex.

    ``residual`` is an error bar from refitting on subsets of the radii;
    values are trusted only when ``reliable`` is set.
    """

    phi_1_m1: complex
    phi_2_m1: complex
    phi_1_0: complex
    phi_2_0: complex
    radii: tuple = ()
    residual: float = 0.0
    reliable: bool = True

    @property
    def first(self):
        """``(Phi_1^-1, Phi_1^0)``."""
        return np.array([self.phi_1_m1, self.phi_1_0])

    @property
    def second(self):
        """``(Phi_2^-1, Phi_2^0)``."""
        return np.array([self.phi_2_m1, self.phi_2_0])


@dataclass(frozen=True)
class SingularCoefficients:
    """Leading coefficients ``c_0, d_0, c_-1, d_-1`` in the cut gauge."""

    c0: complex
    d0: complex
    c_m1: complex
    d_m1: complex
    radii: tuple = ()
    residual: float = 0.0


def phi_functionals(f, vortex, flux, radii=DEFAULT_RADII, rho=1.0, n_theta=N_THETA,
                    reliable_tol=RELIABLE_RESIDUAL):
    """Boundary functionals of a single-valued function at one vortex.

    Parameters
    ----------
    f : callable
        ``f(points) -> complex array`` for an (P, 2) array of points.
    vortex : {"a", "b"}
    flux : float
        Flux of that vortex.
    radii : sequence of float
        Circle radii; at least six, spanning a decade or more.

    Raises
    ------
    RadiiTooCoarse, FitIllConditioned
    """
    radii = _check_radii(radii, 4)
    modes = circle_modes(f, vortex, radii, rho, n_theta)
    coef, spread = _fit_modes(modes, radii, flux)
    return BoundaryData(complex(coef[0, 0]), complex(coef[0, 1]),
                        complex(coef[1, 0]), complex(coef[1, 1]),
                        tuple(float(r) for r in radii), spread,
                        spread < reliable_tol * max(1.0, float(np.max(np.abs(coef)))))


def fit_singular_coefficients(f, vortex, flux, radii=DEFAULT_RADII, rho=1.0,
                              n_theta=N_THETA):
    """Leading expansion coefficients of a cut-gauge function at a vortex.

    The factor ``e^{i flux theta}`` is divided out before the angular
    modes are taken, then ``c r^-flux + d r^flux`` (mode 1) and
    ``c r^{-1+flux} + d r^{1-flux}`` (mode ``e^{-i theta}``) are fitted.
    """
    radii = _check_radii(radii, 4)
    modes = circle_modes(f, vortex, radii, rho, n_theta, phase=flux)
    # in the cut gauge the mode e^{-i theta} has amplitude row 0
    coef, spread = _fit_modes(modes, radii, flux)
    return SingularCoefficients(complex(coef[1, 0]), complex(coef[1, 1]),
                                complex(coef[0, 0]), complex(coef[0, 1]),
                                tuple(float(r) for r in radii), spread)


def to_smooth_gauge(sc, other_flux, rho):
    """Boundary functionals from cut-gauge coefficients at one vortex.

    The phase of the other vortex, ``exp(-i other_flux theta_other)``, is
    ``1 + (other_flux r / 2 rho)(e^{i theta} - e^{-i theta}) + O(r^2)`` near
    this vortex, which shifts the subleading amplitudes:
    ``Phi_2^-1 = d_-1 - other_flux c_0 / (2 rho)`` and
    ``Phi_2^0 = d_0 + other_flux c_-1 / (2 rho)``.
    """
    k = other_flux / (2.0 * rho)
    return BoundaryData(sc.c_m1, sc.d_m1 - k * sc.c0, sc.c0, sc.d0 + k * sc.c_m1,
                        sc.radii, sc.residual, True)


def remainder_profile(f, vortex, flux, sc, radii, rho=1.0, n_theta=N_THETA):
    """Largest deviation from the four-term expansion on each circle.

    Returns ``(radii, deviation)``; the deviation should scale like
    ``r^gamma`` with ``gamma = min(2 - flux, 1 + flux)``.
    """
    radii = np.asarray(radii, dtype=float)
    dev = np.empty(radii.size)
    for j, r in enumerate(radii):
        th, x1, x2 = circle_points(vortex, r, rho, n_theta)
        vals = np.asarray(f(np.column_stack([x1, x2])), dtype=complex)
        vals = vals * np.exp(-1j * flux * th)
        model = (sc.c0 * r ** -flux + sc.d0 * r ** flux
                 + (sc.c_m1 * r ** (flux - 1) + sc.d_m1 * r ** (1 - flux))
                 * np.exp(-1j * th))
        dev[j] = np.max(np.abs(vals - model))
    return radii, dev


def remainder_exponents(f, vortex, flux, sc, radii, rho=1.0, n_theta=N_THETA,
                        modes=range(-3, 4), floor=1e-9):
    """Decay exponent of each angular component of the expansion remainder.

    The remainder after the four-term expansion is split into the modes
    ``e^{i m theta}`` (phase ``e^{i flux theta}`` divided out).  Components
    whose amplitude stays below ``floor`` times the largest one are skipped.
    Returns ``(smallest exponent, {m: exponent})``; the smallest exponent is
    the order of the remainder as ``r -> 0``.
    """
    radii = np.asarray(radii, dtype=float)
    modes = list(modes)
    amp = np.empty((len(modes), radii.size))
    for j, r in enumerate(radii):
        th, x1, x2 = circle_points(vortex, r, rho, n_theta)
        vals = np.asarray(f(np.column_stack([x1, x2])), dtype=complex)
        vals = vals * np.exp(-1j * flux * th)
        model = (sc.c0 * r ** -flux + sc.d0 * r ** flux
                 + (sc.c_m1 * r ** (flux - 1) + sc.d_m1 * r ** (1 - flux))
                 * np.exp(-1j * th))
        res = vals - model
        for i, m in enumerate(modes):
            amp[i, j] = abs(np.mean(res * np.exp(-1j * m * th)))
    top = float(amp.max())
    slopes = {m: loglog_slope(radii, amp[i]) for i, m in enumerate(modes)
              if amp[i].min() > floor * top}
    return min(slopes.values()), slopes


def loglog_slope(radii, values):
    """Least-squares slope of ``log values`` against ``log radii``."""
    return float(np.polyfit(np.log(radii), np.log(values), 1)[0])


# ----------------------------------------------------------------------
# extensions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ExtensionSpec:
    """Boundary condition ``A1 Phi_1 + A2 Phi_2 = 0`` at a vortex of flux ``alpha``.

    ``Phi_1 = (Phi_1^-1, Phi_1^0)`` and ``Phi_2 = (Phi_2^-1, Phi_2^0)``.
    """

    A1: np.ndarray
    A2: np.ndarray
    alpha: float

    @property
    def D(self):
        return np.diag([1.0 - self.alpha, self.alpha])


@dataclass(frozen=True)
class Classification:
    valid: bool
    reason: str = ""
    rank: int = 0
    symmetry_residual: float = 0.0


def classify_extension(spec, tol=1e-10):
    """Whether ``(A1, A2)`` defines a self-adjoint boundary condition.

    Needs ``rank(A1, A2) = 2`` and ``A1 D^-1 A2^* = A2 D^-1 A1^*``.
    """
    A1 = np.asarray(spec.A1, dtype=complex)
    A2 = np.asarray(spec.A2, dtype=complex)
    sv = np.linalg.svd(np.hstack([A1, A2]), compute_uv=False)
    scale = max(float(sv[0]), 1.0) if sv.size else 1.0
    rank = int(np.sum(sv > tol * scale))
    Dinv = np.linalg.inv(spec.D)
    sym = float(np.linalg.norm(A1 @ Dinv @ A2.conj().T - A2 @ Dinv @ A1.conj().T))
    if rank != 2:
        return Classification(False, f"rank {rank} != 2", rank, sym)
    if sym > tol * scale ** 2:
        return Classification(False, f"symmetry residual {sym:.3g}", rank, sym)
    return Classification(True, "", rank, sym)


def same_condition(spec1, spec2, tol=1e-10):
    """Whether ``(A1', A2') = G (A1, A2)`` for some invertible ``G``."""
    X = np.hstack([np.asarray(spec1.A1, complex), np.asarray(spec1.A2, complex)])
    Y = np.hstack([np.asarray(spec2.A1, complex), np.asarray(spec2.A2, complex)])
    G_t, *_ = np.linalg.lstsq(X.T, Y.T, rcond=None)
    G = G_t.T
    if np.linalg.norm(G @ X - Y) > tol * max(1.0, np.linalg.norm(Y)):
        return False
    sv = np.linalg.svd(G, compute_uv=False)
    return bool(sv[-1] > tol * max(sv[0], 1.0))


EXTENSIONS = {
    "H0": (np.eye(2), np.zeros((2, 2))),
    "H+": (np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [1.0, 0.0]])),
    "H-": (np.array([[1.0, 0.0], [0.0, 0.0]]), np.array([[0.0, 0.0], [0.0, 1.0]])),
}


def extension_spec(which, alpha):
    A1, A2 = EXTENSIONS[which]
    return ExtensionSpec(A1, A2, alpha)


@dataclass(frozen=True)
class Membership:
    inside: bool
    residuals: tuple


def boundary_residuals(bd, which):
    """The two functionals that the extension ``which`` requires to vanish."""
    pairs = {"H0": (bd.phi_1_m1, bd.phi_1_0),
             "H+": (bd.phi_2_m1, bd.phi_1_0),
             "H-": (bd.phi_1_m1, bd.phi_2_0)}
    if which not in pairs:
        raise InvalidParameter(f"unknown extension {which!r}")
    return tuple(float(abs(v)) for v in pairs[which])


def check_domain_membership(bd, which, tol=1e-4):
    """Whether boundary data satisfy the condition of ``H0``, ``H+`` or ``H-``.

    ``bd`` may be one ``BoundaryData`` or a sequence (one per vortex).

    Raises
    ------
    UnreliableBoundaryData
    """
    items = [bd] if isinstance(bd, BoundaryData) else list(bd)
    res = []
    for item in items:
        if not item.reliable:
            raise UnreliableBoundaryData("boundary fit residual too large")
        res.extend(boundary_residuals(item, which))
    return Membership(all(r < tol for r in res), tuple(res))
