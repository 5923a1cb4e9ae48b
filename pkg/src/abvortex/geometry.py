"""Plane points, polar coordinates about the two vortices, winding factors.

Vortex ``a`` sits at the origin and vortex ``b`` at ``(rho, 0)``.  The cut
of ``a`` is the half-line ``x1 < 0`` and the cut of ``b`` is ``x1 > rho``,
both on the real axis.

Angles are counterclockwise for both vortices, each measured so that it is
zero on the segment joining the vortices:

* ``theta_a = atan2(x2, x1)``, equal to ``+pi`` on the upper side of the
  cut of ``a`` and ``-pi`` on its lower side;
* ``theta_b = atan2(-x2, rho - x1)`` (the angle of ``b - x``), equal to
  ``-pi`` on the upper side of the cut of ``b`` and ``+pi`` on its lower
  side.

Points lying exactly on a cut need an explicit side tag: ``+1`` for the
upper side, ``-1`` for the lower side.
"""

from dataclasses import dataclass

import numpy as np

from .errors import AtVortex, DegenerateSegment, InvalidParameter, MissingSideTag

UPPER = 1
LOWER = -1
AT_VORTEX_EPS = 1e-14
SEGMENT_EPS = 1e-12


@dataclass(frozen=True)
class VortexPair:
    """Two flux vortices with fluxes ``alpha`` (at a) and ``beta`` (at b).

    Fluxes 0 are allowed as an explicit degenerate mode in which the
    corresponding vortex is absent.
    """

    alpha: float
    beta: float
    rho: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise InvalidParameter(f"{name}={v} outside [0, 1)")
        if not self.rho > 0:
            raise InvalidParameter(f"rho={self.rho} must be positive")

    def flux(self, vortex):
        return self.alpha if vortex == "a" else self.beta

    def center(self, vortex):
        return (0.0, 0.0) if vortex == "a" else (self.rho, 0.0)

    def swapped(self):
        """The configuration seen from ``b`` (a <-> b, alpha <-> beta)."""
        return VortexPair(self.beta, self.alpha, self.rho)


@dataclass(frozen=True)
class PlanePoint:
    """Cartesian point with an optional cut side tag (+1 upper, -1 lower)."""

    x1: float
    x2: float
    side: int = 0

    def mirrored(self):
        """Reflection through the real axis, side tag flipped."""
        return PlanePoint(self.x1, -self.x2, -self.side)


def point(x, side=0):
    if isinstance(x, PlanePoint):
        return x
    return PlanePoint(float(x[0]), float(x[1]), side)


def on_cut(x1, x2, rho):
    """Mask of points lying exactly on one of the two cuts."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return (x2 == 0) & ((x1 < 0) | (x1 > rho))


def _require_tags(x1, x2, side, rho):
    cut = on_cut(x1, x2, rho)
    if np.any(cut & (np.asarray(side) == 0)):
        raise MissingSideTag("point on a cut needs a side tag")
    return cut


def polar_a(x1, x2, side=0, rho=np.inf):
    """Polar coordinates about vortex ``a`` (vectorised)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    side = np.asarray(side)
    cut_a = (x2 == 0) & (x1 < 0)
    if np.any(cut_a & (side == 0)):
        raise MissingSideTag("point on the cut of a needs a side tag")
    r = np.hypot(x1, x2)
    th = np.arctan2(x2, x1)
    th = np.where(cut_a, np.where(side > 0, np.pi, -np.pi), th)
    return r, th


def polar_b(x1, x2, side, rho):
    """Polar coordinates about vortex ``b`` (vectorised)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    side = np.asarray(side)
    cut_b = (x2 == 0) & (x1 > rho)
    if np.any(cut_b & (side == 0)):
        raise MissingSideTag("point on the cut of b needs a side tag")
    dx = rho - x1
    r = np.hypot(dx, x2)
    th = np.arctan2(-x2, dx)
    th = np.where(cut_b, np.where(side > 0, -np.pi, np.pi), th)
    return r, th


def polar(x1, x2, side, vortex, rho):
    if vortex == "a":
        return polar_a(x1, x2, side)
    return polar_b(x1, x2, side, rho)


def polar_about(x, center, cfg, eps=AT_VORTEX_EPS):
    """Polar pair ``(r, theta)`` of a point about vortex ``center``.

    Raises
    ------
    AtVortex
        If the point is closer than ``eps`` to the centre.
    """
    x = point(x)
    r, th = polar(x.x1, x.x2, x.side, center, cfg.rho)
    if r < eps:
        raise AtVortex(f"point within {eps:g} of vortex {center}")
    return float(r), float(th)


@dataclass(frozen=True)
class WindingFactors:
    zeta_a: complex
    zeta_b: complex
    eta_a: float
    eta_b: float


def _vertical_sign(x2, side):
    x2 = np.asarray(x2, dtype=float)
    return np.where(x2 > 0, 1, np.where(x2 < 0, -1, np.sign(side))).astype(int)


def winding_etas(x1, x2, side, y1, y2, yside, rho, strict=True):
    """Integer winding data for segments from ``y`` (source) to ``x``.

    Returns ``(k_a, k_b)`` with ``eta = 2 pi k`` and ``k`` in {-1, 0, 1}.
    Vectorised over broadcastable inputs.  With ``strict=False`` a segment
    passing exactly through a vortex counts as not crossing (both angular
    branches agree there), otherwise it raises ``DegenerateSegment``.
    """
    x1, x2, side, y1, y2, yside = np.broadcast_arrays(
        np.asarray(x1, float), np.asarray(x2, float), np.asarray(side),
        np.asarray(y1, float), np.asarray(y2, float), np.asarray(yside))
    _require_tags(x1, x2, side, rho)
    _require_tags(y1, y2, yside, rho)
    sx = _vertical_sign(x2, side)
    sy = _vertical_sign(y2, yside)
    # points on the open segment between the vortices have sign 0
    cross = sx * sy < 0
    both_axis = cross & (x2 == 0) & (y2 == 0)
    if np.any(both_axis):
        raise DegenerateSegment("segment runs along a cut")
    dy = x2 - y2
    safe = np.where(cross, dy, 1.0)
    xc = y1 + (x1 - y1) * (-y2) / safe
    through = cross & ((np.abs(xc) < SEGMENT_EPS) |
                       (np.abs(xc - rho) < SEGMENT_EPS))
    if strict and np.any(through):
        raise DegenerateSegment("segment passes through a vortex")
    cross = cross & ~through
    k_a = np.where(cross & (xc < 0), np.where(sy < 0, 1, -1), 0)
    k_b = np.where(cross & (xc > rho), np.where(sy > 0, 1, -1), 0)
    return k_a, k_b


def winding_factors(x, x0, cfg):
    """Phase data for the pair (x, x0); ``x0`` is the source point."""
    x = point(x)
    x0 = point(x0)
    k_a, k_b = winding_etas(x.x1, x.x2, x.side, x0.x1, x0.x2, x0.side,
                            cfg.rho)
    eta_a = 2 * np.pi * int(k_a)
    eta_b = 2 * np.pi * int(k_b)
    return WindingFactors(np.exp(1j * cfg.alpha * eta_a),
                          np.exp(1j * cfg.beta * eta_b), eta_a, eta_b)


def circle_points(vortex, radius, rho, n=256):
    """Equispaced nodes on a circle about a vortex, in its own angle.

    Nodes avoid the angles 0 and +-pi, so no node lies on the real axis.
    Returns ``(theta, x1, x2)`` where ``theta`` is the polar angle of each
    node about ``vortex`` in the convention of this module.
    """
    th = -np.pi + (np.arange(n) + 0.5) * 2 * np.pi / n
    if vortex == "a":
        return th, radius * np.cos(th), radius * np.sin(th)
    return th, rho - radius * np.cos(th), -radius * np.sin(th)
